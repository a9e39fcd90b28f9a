"""
Scenario files: strict JSON schema, parsing and JSON reports.

A scenario file uses dB/dBm at the boundary and is converted to the
linear-unit types of ``powerctl.link_model`` on load. Unknown keys are
rejected with an error naming the key.

Example::

    {
      "bandwidth_hz": 10e6,
      "noise": {"mode": "explicit", "noise_dbm": -103},
      "p_max_dbm": 46,
      "links": [{"gain_db": -100, "rate_bps": 1e7},
                {"gain_db": -110, "rate_bps": 1e7}],
      "power_model": {"preset": "macro", "load_factor": 1}
    }
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as SchemaError

from powerctl.allocator import Allocation
from powerctl.link_model import (
    EXPLICIT,
    DEFAULT_BANDWIDTH_HZ,
    DEFAULT_NOISE_DBM,
    THERMAL,
    LinkSpec,
    NoiseConfig,
    Scenario,
    dbm_to_watts,
    linear_to_db,
    watts_to_dbm,
)
from powerctl.power_model import PRESETS, PowerModel, model_from_preset
from powerctl.validators import ValidationError


class _Strict(BaseModel):
    model_config = ConfigDict(extra='forbid')


class NoiseSection(_Strict):
    mode: Literal['explicit', 'thermal'] = EXPLICIT
    noise_dbm: Optional[float] = None
    temperature_k: Optional[float] = None

    @model_validator(mode='after')
    def _check_mode_fields(self):
        if self.mode == EXPLICIT and self.temperature_k is not None:
            raise ValueError("temperature_k is only valid in thermal mode")
        if self.mode == THERMAL and self.noise_dbm is not None:
            raise ValueError("noise_dbm is only valid in explicit mode")
        return self


class LinkEntry(_Strict):
    gain_db: float
    rate_bps: float = Field(ge=0)


class PowerModelSection(_Strict):
    preset: Optional[Literal['macro', 'micro', 'pico', 'femto']] = None
    p0_w: Optional[float] = Field(default=None, ge=0)
    load_factor: Optional[float] = Field(default=None, gt=0)
    p_max_dbm: Optional[float] = None

    @model_validator(mode='after')
    def _preset_or_triple(self):
        if self.preset is not None:
            if self.p0_w is not None or self.p_max_dbm is not None:
                raise ValueError("use either preset (+load_factor) or p0_w/load_factor/p_max_dbm, not both")
        elif None in (self.p0_w, self.load_factor, self.p_max_dbm):
            raise ValueError("explicit power model needs p0_w, load_factor and p_max_dbm")
        return self


class ScenarioFile(_Strict):
    bandwidth_hz: float = Field(default=DEFAULT_BANDWIDTH_HZ, gt=0)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    p_max_dbm: Optional[float] = None
    links: List[LinkEntry] = Field(min_length=1)
    power_model: Optional[PowerModelSection] = None


def parse_scenario(data: Any) -> Tuple[Scenario, Optional[PowerModel]]:
    """
    Validate a decoded scenario document.

    Returns:
        Tuple of (Scenario, PowerModel or None)

    Raises:
        ValidationError: Naming the offending key for schema violations
    """
    if not isinstance(data, dict):
        raise ValidationError("Scenario document must be a JSON object")
    try:
        doc = ScenarioFile.model_validate(data)
    except SchemaError as exc:
        raise ValidationError(_describe(exc)) from exc
    return _build(doc)


def load_scenario(path: Union[str, Path]) -> Tuple[Scenario, Optional[PowerModel]]:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ValidationError(f"Cannot read scenario file {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"Invalid JSON in {path}: {exc.msg} (line {exc.lineno})") from exc
    return parse_scenario(data)


def scenario_to_dict(scenario: Scenario, model: Optional[PowerModel] = None) -> Dict[str, Any]:
    """Express a scenario in the scenario-file format."""
    noise = scenario.noise
    if noise.mode == THERMAL:
        noise_doc = {'mode': THERMAL, 'temperature_k': noise.temperature_k}
    else:
        noise_doc = {'mode': EXPLICIT, 'noise_dbm': float(watts_to_dbm(noise.noise_power_w))}

    doc = {
        'bandwidth_hz': noise.bandwidth_hz,
        'noise': noise_doc,
        'p_max_dbm': float(watts_to_dbm(scenario.p_max_w)) if scenario.is_bounded else None,
        'links': [
            {'gain_db': float(linear_to_db(link.gain_linear)), 'rate_bps': link.target_rate_bps}
            for link in scenario.links
        ],
    }
    if model is not None:
        doc['power_model'] = {
            'p0_w': model.p0_w,
            'load_factor': model.load_factor,
            'p_max_dbm': float(watts_to_dbm(model.p_max_w)),
        }
    return doc


def build_report(scenario: Scenario, alloc: Allocation,
                 model: Optional[PowerModel] = None) -> Dict[str, Any]:
    """JSON report for a solved scenario; ``scenario`` re-parses with parse_scenario."""
    allocation = alloc.to_dict()
    allocation['p_tx_dbm'] = [
        float(watts_to_dbm(p)) if p > 0 else None for p in alloc.p_tx_w
    ]
    report = {
        'scenario': scenario_to_dict(scenario, model),
        'allocation': allocation,
    }
    if model is not None:
        report['power_model'] = model.to_dict()
    return report


def scenario_from_report(report: Dict[str, Any]) -> Tuple[Scenario, Optional[PowerModel]]:
    """Recover the scenario (and power model) embedded in a JSON report."""
    if 'scenario' not in report:
        raise ValidationError("Report has no 'scenario' section")
    return parse_scenario(report['scenario'])


def _build(doc: ScenarioFile) -> Tuple[Scenario, Optional[PowerModel]]:
    if doc.noise.mode == THERMAL:
        temperature_k = 290.0 if doc.noise.temperature_k is None else doc.noise.temperature_k
        noise = NoiseConfig.thermal(doc.bandwidth_hz, temperature_k)
    else:
        noise_dbm = DEFAULT_NOISE_DBM if doc.noise.noise_dbm is None else doc.noise.noise_dbm
        noise = NoiseConfig.explicit_dbm(noise_dbm, doc.bandwidth_hz)

    p_max_w = math.inf if doc.p_max_dbm is None else float(dbm_to_watts(doc.p_max_dbm))
    links = tuple(LinkSpec.from_db(entry.gain_db, entry.rate_bps) for entry in doc.links)
    scenario = Scenario(noise=noise, links=links, p_max_w=p_max_w)

    section = doc.power_model
    model = None
    if section is not None:
        if section.preset is not None:
            model = model_from_preset(PRESETS[section.preset], 1.0 if section.load_factor is None else section.load_factor)
        else:
            model = PowerModel(
                p0_w=section.p0_w,
                load_factor=section.load_factor,
                p_max_w=float(dbm_to_watts(section.p_max_dbm)),
            )
    return scenario, model


def _describe(exc: SchemaError) -> str:
    messages = []
    for err in exc.errors():
        location = '.'.join(str(part) for part in err.get('loc', ()))
        if err.get('type') == 'extra_forbidden':
            messages.append(f"unknown key '{location}'")
        elif err.get('type') == 'missing':
            messages.append(f"missing key '{location}'")
        else:
            where = f"'{location}': " if location else ''
            messages.append(f"{where}{err.get('msg')}")
    return "Invalid scenario: " + '; '.join(messages)
