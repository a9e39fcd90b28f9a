"""Flask application factory for the powerctl HTTP API."""

import logging
from typing import Any, Dict, Optional

from flask import Flask

from powerctl.api.v1 import api_v1
from powerctl.api_utils import error_response
from powerctl.config import load_config

logger = logging.getLogger(__name__)


def create_app(config: Optional[Dict[str, Any]] = None) -> Flask:
    """
    Build the Flask app with the v1 blueprint registered.

    Args:
        config: Loaded configuration; read from config.json when omitted
    """
    app = Flask(__name__)
    app.config['POWERCTL'] = config if config is not None else load_config()
    app.config['JSON_SORT_KEYS'] = False
    app.register_blueprint(api_v1)

    @app.errorhandler(404)
    def not_found(_error):
        return error_response('Not found', 404)

    @app.errorhandler(405)
    def method_not_allowed(_error):
        return error_response('Method not allowed', 405)

    logger.debug(f"Registered routes: {sorted(str(r) for r in app.url_map.iter_rules())}")
    return app
