"""Partitioned FSI lab for the 1D elastic tube.

Classical fluid and structure solvers coupled implicitly with quasi-Newton
acceleration, plus per-subdomain neural surrogates trained on the classical
data and rolled out autoregressively under the same coupling.

Submodules are imported lazily so the command line can configure BLAS
threading before numpy loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "domain",
    "structure",
    "fluid",
    "coupling",
    "simulate",
    "nn",
    "surrogate",
    "config",
    "errors",
    "cli",
)

__all__ = list(_SUBMODULES)


def __getattr__(name):
    if name in _SUBMODULES:
        return import_module(f"tubeflow.{name}")
    raise AttributeError(f"module 'tubeflow' has no attribute {name!r}")
