"""Mixed-volume preserving curvature flows of convex hypersurfaces."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    DomainError,
    FormatError,
    declared_class,
    elementary_symmetric,
    evaluate,
    fit_decay,
    plot,
    registry,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "FormatError",
    "canonical_config",
    "declared_class",
    "elementary_symmetric",
    "evaluate",
    "fit_decay",
    "initial_geometry",
    "plot",
    "registry",
    "run",
    "run_to_directory",
    "verify",
]


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def run(config):
    """Evolve a configuration (dict or JSON text) and return summary,
    trajectory columns and final geometry."""
    out = _core.run(_text(config))
    out["summary"] = _json.loads(out["summary"])
    return out


def run_to_directory(config, out):
    return _core.run_to_directory(_text(config), str(out))


def initial_geometry(config):
    return _core.initial_geometry(_text(config))


def verify(n=2, samples=100000, seed=0):
    return _json.loads(_core.verify_report(n, samples, seed))


def canonical_config(config):
    """(canonical JSON text, config hash)."""
    return _core.canonical_config(_text(config))
