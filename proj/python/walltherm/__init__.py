"""Wall conductivity estimation from surface thermographs."""

try:
    from walltherm._walltherm import (
        Physical,
        __version__,
        env_series,
        estimate,
        simulate_day,
        steady_surfaces,
    )
except ImportError:  # build-tree layout: the extension sits next to the package
    from _walltherm import (
        Physical,
        __version__,
        env_series,
        estimate,
        simulate_day,
        steady_surfaces,
    )

__all__ = [
    "Physical",
    "__version__",
    "env_series",
    "estimate",
    "simulate_day",
    "steady_surfaces",
]
