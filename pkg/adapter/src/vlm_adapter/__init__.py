"""Reference model server for the vlmbench wire contract."""

from .config import AdapterConfig, load_config
from .selftest import SelftestResult, contract_selftest
from .server import create_app

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "SelftestResult",
    "contract_selftest",
    "create_app",
    "load_config",
]
