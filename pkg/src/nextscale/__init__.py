"""Scaled spatial guidance for next-scale autoregressive generation.

The core pieces are :func:`build_prior` (coarse logits -> prior at the next
scale), :func:`apply_ssg` (the guided logit update) and the multi-scale
residual quantiser in :mod:`nextscale.codec`. :mod:`nextscale.pipeline`
ties them together with a corrupted-teacher stand-in for a trained model.
"""

from .codec import Codebook, MultiScaleResidualQuantizer, encode_multiscale, reconstruct
from .dse import PriorMode, SpectralPrior, build_prior, interpolate
from .exceptions import DomainError, FormatError, NextScaleError, PersistenceError, ShapeError
from .guidance import GuidanceSchedule, ScaledSpatialGuidance, apply_ssg, beta_at, semantic_residual
from .spectral import dct2, idct2

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "DomainError",
    "FormatError",
    "GuidanceSchedule",
    "MultiScaleResidualQuantizer",
    "NextScaleError",
    "PersistenceError",
    "PriorMode",
    "ScaledSpatialGuidance",
    "ShapeError",
    "SpectralPrior",
    "apply_ssg",
    "beta_at",
    "build_prior",
    "dct2",
    "encode_multiscale",
    "idct2",
    "interpolate",
    "reconstruct",
    "semantic_residual",
]
