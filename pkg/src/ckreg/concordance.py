"""First-stage estimation of conditional Kendall's tau.

tau_hat(z) = sum_i sum_j w_i(z) w_j(z) g(X_i, X_j) with Nadaraya-Watson
weights w_i(z), where g is one of three pair kernels:

    g1(a, b) = 4*1{a1 < b1, a2 < b2} - 1          values {-1, 3}
    g2(a, b) = 1{(a1-b1)(a2-b2) > 0} - 1{... < 0} values {-1, 0, 1}
    g3(a, b) = 1 - 4*1{a1 < b1, a2 > b2}          values {-3, 1}

g2 is symmetric; g1/g3 are symmetrized as (g(a,b) + g(b,a))/2 where a
symmetric kernel is required.  Diagonal pair values are g1 = -1, g2 = 0,
g3 = +1; the i = j terms can be kept (the double sum taken literally) or
dropped with the weights renormalized.

gn_moment computes the third-order weighted moment
G_n(z) = sum_{i,j,k distinct} w_i w_j w_k gt(X_i,X_k) gt(X_j,X_k)
used by the Wald-test variance.  The sum over i, j at fixed k factorizes
as (sum_{i != k} w_i gt_ik)^2 - sum_{i != k} w_i^2 gt_ik^2, so the exact
value costs O(n^2); no subsampling is ever needed (max_triples and seed
are accepted for interface stability and ignored).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateInputError
from .kernels import KernelSpec, Sample, nw_weight_matrix, nw_weights

__all__ = [
    "ConcordanceVariant",
    "CktEstimate",
    "G1",
    "G2",
    "G3",
    "variant",
    "concordance",
    "pair_matrix",
    "ckt_at",
    "ckt_batch",
    "gn_moment",
]

# renormalizing by 1 - sum(w^2) breaks down when one point carries all mass
_SINGLE_MASS_TOL = 1e-12


@dataclass(frozen=True)
class ConcordanceVariant:
    """One of the three pair kernels, with its exponential-bound constant."""

    id: str
    c_constant: float
    diagonal_value: float


G1 = ConcordanceVariant("g1", 4.0, -1.0)
G2 = ConcordanceVariant("g2", 2.0, 0.0)
G3 = ConcordanceVariant("g3", 4.0, 1.0)

_VARIANTS = {"g1": G1, "g2": G2, "g3": G3}


def variant(v) -> ConcordanceVariant:
    """Coerce a name or a ConcordanceVariant instance to a variant."""
    if isinstance(v, ConcordanceVariant):
        return v
    try:
        return _VARIANTS[v]
    except (KeyError, TypeError):
        raise ArgumentError(f"unknown concordance variant: {v!r}") from None


@dataclass(frozen=True)
class CktEstimate:
    """Conditional Kendall's tau at one query point, with diagnostics.

    value is clipped to [-1, 1]; raw_value keeps the unclipped number.
    support_count is the number of strictly positive kernel weights and
    f_hat the kernel density estimate at z.  valid is False when the
    estimate could not be formed (empty neighborhood, or all weight on a
    single observation in exclude-diagonal mode).
    """

    value: float
    raw_value: float
    z: tuple
    f_hat: float
    support_count: int
    clipped: bool
    valid: bool = True


def concordance(v, xi, xj) -> float:
    """Evaluate the pair kernel at two bivariate observations."""
    v = variant(v)
    a = np.asarray(xi, dtype=float)
    b = np.asarray(xj, dtype=float)
    if a.shape != (2,) or b.shape != (2,):
        raise ArgumentError("pair arguments must be length-2 vectors")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ArgumentError("pair arguments must be finite")
    if v.id == "g1":
        return 4.0 * float(a[0] < b[0] and a[1] < b[1]) - 1.0
    if v.id == "g2":
        prod = (a[0] - b[0]) * (a[1] - b[1])
        return float(prod > 0) - float(prod < 0)
    return 1.0 - 4.0 * float(a[0] < b[0] and a[1] > b[1])


def pair_matrix(sample: Sample, v, symmetrized: bool = False) -> np.ndarray:
    """n x n matrix G[i, j] = g(X_i, X_j), optionally (G + G^T)/2."""
    v = variant(v)
    x1, x2 = sample.x1, sample.x2
    if v.id == "g1":
        lt1 = x1[:, None] < x1[None, :]
        lt2 = x2[:, None] < x2[None, :]
        g = 4.0 * (lt1 & lt2) - 1.0
    elif v.id == "g2":
        d1 = np.sign(x1[:, None] - x1[None, :])
        d2 = np.sign(x2[:, None] - x2[None, :])
        g = d1 * d2
    else:
        lt1 = x1[:, None] < x1[None, :]
        gt2 = x2[:, None] > x2[None, :]
        g = 1.0 - 4.0 * (lt1 & gt2)
    if symmetrized:
        g = 0.5 * (g + g.T)
    return g


def ckt_at(
    sample: Sample,
    z,
    kernel: KernelSpec,
    v="g2",
    include_diagonal: bool = True,
) -> CktEstimate:
    """Estimate conditional Kendall's tau at a single query point.

    Raises on an empty kernel neighborhood; exclude-diagonal mode also
    raises when a single observation carries all the kernel mass.
    """
    if sample.n < 2:
        raise DegenerateInputError("need at least 2 observations")
    nw_weights(sample, z, kernel)  # raises EmptyNeighborhoodError
    q = np.atleast_1d(np.asarray(z, dtype=float))
    est = ckt_batch(sample, q[None, :], kernel, v, include_diagonal)[0]
    if not est.valid:
        raise DegenerateInputError(
            f"estimate undefined at z={est.z}: kernel mass concentrated on "
            "a single observation"
        )
    return est


def ckt_batch(
    sample: Sample,
    points,
    kernel: KernelSpec,
    v="g2",
    include_diagonal: bool = True,
    pair: np.ndarray | None = None,
) -> list[CktEstimate]:
    """Estimate conditional Kendall's tau at many query points.

    Per-point failures are flagged (valid=False, value NaN), never raised,
    so downstream callers can drop and count them.  pair allows reuse of a
    precomputed pair_matrix(sample, v).
    """
    if sample.n < 2:
        raise DegenerateInputError("need at least 2 observations")
    v = variant(v)
    if pair is None:
        pair = pair_matrix(sample, v)
    w, f_hat, valid = nw_weight_matrix(kernel, sample.z, points)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if sample.p == 1 else pts[None, :]

    # one matrix-vector product per point: results are then independent of
    # how points are batched or ordered (bit-for-bit)
    raw = np.empty(w.shape[1])
    for m in range(w.shape[1]):
        wm = w[:, m]
        raw[m] = wm @ (pair @ wm)
    s2 = np.einsum("im,im->m", w, w)
    support = (w > 0).sum(axis=0)

    if not include_diagonal:
        denom = 1.0 - s2
        bad = denom <= _SINGLE_MASS_TOL
        denom = np.where(bad, 1.0, denom)
        raw = (raw - v.diagonal_value * s2) / denom
        valid = valid & ~bad

    out = []
    for m in range(pts.shape[0]):
        if not valid[m]:
            out.append(
                CktEstimate(
                    value=float("nan"), raw_value=float("nan"),
                    z=tuple(pts[m]), f_hat=float(f_hat[m]),
                    support_count=int(support[m]), clipped=False, valid=False,
                )
            )
            continue
        r = float(raw[m])
        val = min(1.0, max(-1.0, r))
        out.append(
            CktEstimate(
                value=val, raw_value=r, z=tuple(pts[m]),
                f_hat=float(f_hat[m]), support_count=int(support[m]),
                clipped=val != r, valid=True,
            )
        )
    return out


def gn_moment(
    sample: Sample,
    z,
    kernel: KernelSpec,
    v="g2",
    max_triples: int | None = None,
    seed: int = 0,
) -> float:
    """Third moment G_n(z) over ordered triples of distinct indices.

    Exact for every n: brute force with compensated summation for n <= 64,
    the O(n^2) factorization above.  max_triples and seed are ignored (the
    factorization removes the need for subsampling).
    """
    del max_triples, seed
    if sample.n < 3:
        raise DegenerateInputError("need at least 3 observations")
    w = nw_weights(sample, z, kernel)
    g = pair_matrix(sample, variant(v), symmetrized=True)
    n = sample.n
    if n <= 64:
        terms = []
        for i in range(n):
            for j in range(n):
                if j == i:
                    continue
                for k in range(n):
                    if k == i or k == j:
                        continue
                    terms.append(w[i] * w[j] * w[k] * g[i, k] * g[j, k])
        return math.fsum(terms)
    d = np.diag(g)
    a = g.T @ w - w * d  # a_k = sum_{i != k} w_i g_ik
    b = (g * g).T @ (w * w) - (w * w) * (d * d)
    return float(np.sum(w * (a * a - b)))
