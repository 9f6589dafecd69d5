"""Detection statistics of photons crossing discrete single-capacity absorbers,
computed in closed form, by exact enumeration, and by Monte Carlo."""

from .analytic import QVector

__version__ = "0.1.0"

__all__ = ["QVector", "__version__"]
