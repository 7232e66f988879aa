"""Named grid presets.

"production" is the library default: it resolves both the unit-scale core and
enough of the r^{-3} ground-state tail that the truncated gradient norm is
accurate to ~1e-8. The smaller presets trade tail reach for speed and are used
by the time-dependent experiments; "wide" pushes the outer radius far enough
out that tail-cutoff initial data with very small amplitude parameters remain
constructible.
"""

from __future__ import annotations

from dataclasses import dataclass

from .radial_core import RadialGrid, make_grid


@dataclass(frozen=True)
class GridSpec:
    n_core: int
    n_total: int
    r_max: float


PRESETS = {
    "production": GridSpec(1025, 4096, 400.0),
    "wide": GridSpec(1025, 4096, 6000.0),
    "standard": GridSpec(513, 2048, 200.0),
    "fast": GridSpec(257, 1024, 100.0),
    "mini": GridSpec(129, 512, 60.0),
}

_grid_cache: dict = {}


def grid_for(preset: str | GridSpec) -> RadialGrid:
    """Build (and memoize) the grid for a named preset or explicit spec."""
    spec = PRESETS[preset] if isinstance(preset, str) else preset
    key = (spec.n_core, spec.n_total, spec.r_max)
    if key not in _grid_cache:
        _grid_cache[key] = make_grid(spec.n_core, spec.n_total, spec.r_max)
    return _grid_cache[key]
