"""Link functions mapping Kendall's tau in [-1, 1] to the real line.

Three families:
    identity  L(t) = t
    fisher    L(t) = log((1+t)/(1-t))
    loglog    L(t) = log(-log((1-t)/2))

fisher and loglog diverge at the endpoints, so inputs are clamped into
[-1+eps, 1-eps] before evaluation; estimated tau values can legitimately
hit +/-1 on small neighborhoods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

__all__ = ["TransformSpec", "apply", "inverse", "derivative"]

_FAMILIES = ("identity", "fisher", "loglog")


@dataclass(frozen=True)
class TransformSpec:
    family: str = "identity"
    clamp_eps: float = 1e-6

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ArgumentError(f"unknown transform family {self.family!r}")
        if not 0 < self.clamp_eps < 1:
            raise ArgumentError("clamp_eps must be in (0, 1)")


def _clamped(spec: TransformSpec, tau) -> np.ndarray:
    t = np.asarray(tau, dtype=float)
    if np.any(np.isnan(t)):
        raise ArgumentError("NaN tau")
    return np.clip(t, -1.0 + spec.clamp_eps, 1.0 - spec.clamp_eps)


def apply(spec: TransformSpec, tau):
    """Evaluate L(tau). Accepts scalars or arrays; returns the same shape."""
    scalar = np.isscalar(tau) or np.ndim(tau) == 0
    if spec.family == "identity":
        t = np.asarray(tau, dtype=float)
        if np.any(np.isnan(t)):
            raise ArgumentError("NaN tau")
        out = t
    else:
        t = _clamped(spec, tau)
        if spec.family == "fisher":
            out = np.log1p(t) - np.log1p(-t)
        else:
            out = np.log(-np.log((1.0 - t) / 2.0))
    return float(out) if scalar else out


def inverse(spec: TransformSpec, y, clip: bool = True):
    """Evaluate L^{-1}(y); the result always lies in [-1, 1] when clip=True.

    clip=False skips the final clipping for the identity family (used by
    cross-validation, which compares against the raw linear predictor).
    """
    scalar = np.isscalar(y) or np.ndim(y) == 0
    yy = np.asarray(y, dtype=float)
    if spec.family == "identity":
        out = np.clip(yy, -1.0, 1.0) if clip else yy
    elif spec.family == "fisher":
        out = np.tanh(yy / 2.0)
    else:
        out = 1.0 - 2.0 * np.exp(-np.exp(yy))
    return float(out) if scalar else out


def derivative(spec: TransformSpec, tau):
    """First derivative L'(tau), evaluated at the clamped argument."""
    scalar = np.isscalar(tau) or np.ndim(tau) == 0
    if spec.family == "identity":
        t = np.asarray(tau, dtype=float)
        if np.any(np.isnan(t)):
            raise ArgumentError("NaN tau")
        out = np.ones_like(t)
    else:
        t = _clamped(spec, tau)
        if spec.family == "fisher":
            out = 2.0 / (1.0 - t * t)
        else:
            out = 1.0 / ((1.0 - t) * (-np.log((1.0 - t) / 2.0)))
    return float(out) if scalar else out
