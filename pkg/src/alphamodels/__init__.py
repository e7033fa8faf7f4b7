"""Fourier-Galerkin solver for 2D Navier-Stokes and four alpha-regularized models."""

__version__ = "0.1.0"

from alphamodels.models import ModelKind, SimConfig  # noqa: E402

__all__ = ["ModelKind", "SimConfig", "__version__"]
