"""HTTP API package for powerctl."""
