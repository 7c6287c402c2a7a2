"""Kernel evaluation, bandwidth rules, density estimation and
Nadaraya-Watson weights.

Conventions:
    K is the unscaled kernel, a product of a 1D kernel across the p
    coordinates of Z.  The scaled version is always computed at call
    sites as K_h(v) = K(v/h) / h^p.  Weights are
    w_i(z) = K_h(Z_i - z) / sum_j K_h(Z_j - z).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateInputError, EmptyNeighborhoodError

__all__ = [
    "KernelSpec",
    "Sample",
    "kernel_value",
    "rule_of_thumb_bandwidth",
    "density_estimate",
    "nw_weights",
    "raw_kernel_matrix",
    "nw_weight_matrix",
]

_SQRT_2PI = np.sqrt(2.0 * np.pi)

# 1D constants: integral of K^2 over R, and sup K = K(0).
_INT_K2_1D = {"gaussian": 1.0 / (2.0 * np.sqrt(np.pi)), "epanechnikov": 0.6}
_SUP_K_1D = {"gaussian": 1.0 / _SQRT_2PI, "epanechnikov": 0.75}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, bandwidth and covariate dimension.

    The kernel acts on R^p as a product of identical 1D kernels, so the
    derived constants are per-dimension values raised to the p-th power.
    """

    family: str = "gaussian"
    bandwidth: float = 0.1
    dim: int = 1

    def __post_init__(self) -> None:
        if self.family not in _INT_K2_1D:
            raise ArgumentError(f"unknown kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise ArgumentError("bandwidth must be positive")
        if self.dim < 1:
            raise ArgumentError("dim must be >= 1")

    @property
    def int_k2(self) -> float:
        """Integral of K^2 over R^p (product kernel)."""
        return _INT_K2_1D[self.family] ** self.dim

    @property
    def sup_value(self) -> float:
        """Sup-norm of K, attained at 0."""
        return _SUP_K_1D[self.family] ** self.dim

    @property
    def order(self) -> int:
        """Order of the kernel (both shipped families are order 2)."""
        return 2


@dataclass(frozen=True)
class Sample:
    """n observations of (X1, X2, Z) with Z in R^p.

    Arrays are made read-only so a Sample is immutable after construction.
    """

    x1: np.ndarray
    x2: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        x1 = np.asarray(self.x1, dtype=float)
        x2 = np.asarray(self.x2, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.ndim != 2:
            raise ArgumentError("z must be a vector or an (n, p) matrix")
        if not (x1.shape == x2.shape == (z.shape[0],)):
            raise ArgumentError("x1, x2, z must share the same length n")
        if x1.size == 0:
            raise ArgumentError("empty sample")
        if not (np.isfinite(x1).all() and np.isfinite(x2).all() and np.isfinite(z).all()):
            raise ArgumentError("sample contains non-finite values")
        for arr, name in ((x1, "x1"), (x2, "x2"), (z, "z")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.x1.shape[0]

    @property
    def p(self) -> int:
        return self.z.shape[1]

    def restrict(self, indices) -> "Sample":
        """Sub-sample at the given row indices (order preserved)."""
        idx = np.asarray(indices)
        return Sample(x1=self.x1[idx], x2=self.x2[idx], z=self.z[idx])


def _as_query(z, p: int) -> np.ndarray:
    q = np.atleast_1d(np.asarray(z, dtype=float))
    if q.shape != (p,):
        raise ArgumentError(f"query point has dim {q.shape}, expected ({p},)")
    return q


def kernel_value(spec: KernelSpec, u) -> float:
    """Unscaled kernel K(u) at a point u in R^p (product across coordinates)."""
    u = _as_query(u, spec.dim)
    if spec.family == "gaussian":
        return float(np.exp(-0.5 * np.dot(u, u)) / _SQRT_2PI**spec.dim)
    inside = 0.75 * np.maximum(0.0, 1.0 - u * u)
    return float(np.prod(inside))


def rule_of_thumb_bandwidth(sample: Sample, multiplier: float = 1.0) -> float:
    """Rule-of-thumb bandwidth multiplier * sd(Z) * n^(-1/5).

    For p > 1 the geometric mean of per-coordinate standard deviations is
    used with the exponent -1/(4+p).
    """
    if multiplier <= 0:
        raise ArgumentError("multiplier must be positive")
    if sample.n < 2:
        raise DegenerateInputError("bandwidth rule needs n >= 2")
    sds = sample.z.std(axis=0, ddof=1)
    if np.any(sds <= 0):
        raise DegenerateInputError("Z has a constant coordinate")
    p = sample.p
    if p == 1:
        return float(multiplier * sds[0] * sample.n ** (-0.2))
    scale = float(np.prod(sds)) ** (1.0 / p)
    return float(multiplier * scale * sample.n ** (-1.0 / (4 + p)))


def raw_kernel_matrix(spec: KernelSpec, z_data: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Matrix of K_h(Z_i - z'_j) = K((Z_i - z'_j)/h) / h^p, shape (n, m)."""
    z_data = np.asarray(z_data, dtype=float)
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if z_data.shape[1] != spec.dim or points.shape[1] != spec.dim:
        raise ArgumentError("dimension mismatch between data, points and kernel spec")
    h = spec.bandwidth
    u = (z_data[:, None, :] - points[None, :, :]) / h
    if spec.family == "gaussian":
        k = np.exp(-0.5 * np.einsum("nmp,nmp->nm", u, u)) / _SQRT_2PI**spec.dim
    else:
        k = np.prod(0.75 * np.maximum(0.0, 1.0 - u * u), axis=2)
    return k / h**spec.dim


def density_estimate(sample: Sample, z, spec: KernelSpec) -> float:
    """Kernel density estimate of Z at z: (1/n) sum_i K_h(Z_i - z)."""
    q = _as_query(z, spec.dim)
    if sample.p != spec.dim:
        raise ArgumentError("sample dimension does not match kernel spec")
    col = raw_kernel_matrix(spec, sample.z, q[None, :])[:, 0]
    return float(col.mean())


def nw_weights(sample: Sample, z, spec: KernelSpec) -> np.ndarray:
    """Nadaraya-Watson weights at z; nonnegative, summing to 1."""
    q = _as_query(z, spec.dim)
    if sample.p != spec.dim:
        raise ArgumentError("sample dimension does not match kernel spec")
    col = raw_kernel_matrix(spec, sample.z, q[None, :])[:, 0]
    total = col.sum()
    if total <= 0:
        raise EmptyNeighborhoodError(q)
    return col / total


def nw_weight_matrix(
    spec: KernelSpec, z_data: np.ndarray, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-normalized weights for a batch of query points.

    Returns (weights, f_hat, valid): weights has shape (n, m) with each
    valid column summing to 1 (invalid columns are left as zeros), f_hat
    is the density estimate per point, and valid flags columns with
    positive kernel mass.
    """
    raw = raw_kernel_matrix(spec, z_data, points)
    totals = raw.sum(axis=0)
    valid = totals > 0
    weights = np.zeros_like(raw)
    if np.any(valid):
        weights[:, valid] = raw[:, valid] / totals[valid]
    f_hat = totals / raw.shape[0]
    return weights, f_hat, valid
