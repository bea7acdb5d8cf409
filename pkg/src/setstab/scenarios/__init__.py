"""Registry of built-in systems with their sets, storages, feedbacks and
expected verdicts, plus a JSON loader for user-defined scenarios."""
from pathlib import Path

from .base import Scenario, names, load, register
from .loader import load_file, polynomial_field, polynomial_scalar
from . import builtin  # noqa: F401  (registers the built-ins)

list_names = names

DATA_DIR = Path(__file__).parent / "data"


def data_files():
    """Scenario files shipped with the package."""
    return sorted(DATA_DIR.glob("*.json"))

__all__ = ["Scenario", "names", "list_names", "load", "register", "load_file",
           "polynomial_field", "polynomial_scalar", "data_files", "DATA_DIR"]
