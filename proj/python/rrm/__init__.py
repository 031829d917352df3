"""Riemannian Robbins-Monro stochastic approximation.

Thin wrapper over the C++ core. Configs are plain dicts with the same schema
as the JSON files accepted by the ``rrm`` command line tool.
"""

import json as _json

from ._core import (
    ConfigError,
    DomainError,
    InvalidArgument,
    IterateError,
    Manifold,
    StepSchedule,
    bump_h,
    comparison_f,
    list_scenarios,
    ramp,
    ramp_prime,
    ramp_second,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "InvalidArgument",
    "IterateError",
    "Manifold",
    "StepSchedule",
    "bump_h",
    "comparison_f",
    "list_scenarios",
    "ramp",
    "ramp_prime",
    "ramp_second",
    "run",
    "scenario_template",
    "validate",
]


def scenario_template(name):
    """Complete default config of a registered scenario."""
    from . import _core

    return _json.loads(_core._scenario_template(name))


def validate(config):
    """Raise ConfigError (with the JSON path of the field) if the config is invalid."""
    from . import _core

    _core._validate(_json.dumps(config))


def run(config, out_dir=None):
    """Run every replication of a config.

    Returns a dict with per-replication ``states`` (N x ambient_dim array),
    ``times``, ``steps`` and the verdict fields. Writes the CSV/SVG outputs
    when ``out_dir`` is given.
    """
    from . import _core

    return _core._run(_json.dumps(config), "" if out_dir is None else str(out_dir))
