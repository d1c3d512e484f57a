"""Poisson bracket invariants of covers on symplectic surfaces."""

__version__ = "0.1.0"

from . import cover, experiments, partition, pbnorm, spacefill, surface  # noqa: E402
from .pbnorm import BACKEND, pb_of_partition  # noqa: E402
from .surface import make_surface  # noqa: E402

__all__ = ["cover", "experiments", "partition", "pbnorm", "spacefill", "surface",
           "BACKEND", "pb_of_partition", "make_surface", "__version__"]
