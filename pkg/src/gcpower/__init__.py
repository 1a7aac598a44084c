"""Dissipated-power statistics of small-noise diffusions.

Three routes to the same object -- simulation, Perron eigenvalues of the
tilted generator, and constrained action minimization -- plus the transforms
and checks tying them together.
"""

__version__ = "0.1.0"

from . import action, curves, functional, mc, models, paths, sde, spectral, transform  # noqa: F401
