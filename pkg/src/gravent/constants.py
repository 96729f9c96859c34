"""Physical constants (SI, CODATA 2018) and material data.

Every module reads constants through attribute access on this module, so
values can be replaced at runtime.  For testing only, a JSON object with any
subset of the names below may be supplied through the ``GRAVENT_CONSTANTS``
environment variable (either inline JSON or a path to a JSON file).
"""

from __future__ import annotations

import json
import os
from pathlib import Path

G = 6.67430e-11  # m^3 kg^-1 s^-2
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K
C = 2.99792458e8  # m / s

OSMIUM_DENSITY = 22590.0  # kg / m^3 (22.59 g/cm^3)
M_AIR = 0.5e-25  # kg, representative air molecule

OVERRIDE_ENV = "GRAVENT_CONSTANTS"
_OVERRIDABLE = ("G", "HBAR", "K_B", "C", "OSMIUM_DENSITY", "M_AIR")


def _load_overrides(raw: str) -> dict[str, float]:
    text = raw.strip()
    if not text.startswith("{"):
        text = Path(text).read_text()
    data = json.loads(text)
    unknown = set(data) - set(_OVERRIDABLE)
    if unknown:
        raise ValueError(f"unknown constants in {OVERRIDE_ENV}: {sorted(unknown)}")
    return {k: float(v) for k, v in data.items()}


def apply_overrides(raw: str | None = None) -> dict[str, float]:
    """Apply overrides from ``raw`` (or the environment) and return them."""
    raw = os.environ.get(OVERRIDE_ENV) if raw is None else raw
    if not raw:
        return {}
    overrides = _load_overrides(raw)
    globals().update(overrides)
    return overrides


def snapshot() -> dict[str, float]:
    """Current values of all overridable constants."""
    return {name: globals()[name] for name in _OVERRIDABLE}


apply_overrides()
