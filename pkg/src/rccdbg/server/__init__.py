"""Local HTTP review API consumed by the browser UI."""

from rccdbg.server.app import create_app

__all__ = ["create_app"]
