"""Data-generating processes for the benchmark settings.

Nine registered settings, all with Z uniform on the unit box:

    s1  gaussian copula, tau(z) = 3 z (1 - z),          X_j | z ~ N(z, 1)
    s2  frank copula,    theta(z) = tan(pi z / 2)
    s3  frank copula,    tau(z) = 3 z (1 - z)           (matched to s1)
    s4  gaussian copula, tau(z) = tau_frank(tan(pi z/2)) (matched to s2)
    s5  gaussian copula, tau = 0.5 constant
    s6  frank copula,    tau = 0.5 constant
    d1  gaussian, p = 2, tau(z) = (3/4)(z1 - z2),       X_j | z ~ N(0, z1)
    d2  gaussian, p = 2, tau(z) = (4/8)cos(2 pi z1) + (2/8)sin(2 pi z2)
    d3  gaussian, p = 2, tau(z) = (3/4)tanh(z1 / z2)

Both 2D margins use variance z1 (as stated for the source experiments,
possibly intending z2 for X_2), clamped to >= 1e-12.

Frank Kendall's tau: tau(theta) = 1 + 4 (D1(theta) - 1) / theta with the
Debye function D1(x) = (1/x) int_0^x t / (e^t - 1) dt.  The public scalar
map integrates by adaptive quadrature; the vectorized sampler path uses a
Bernoulli series for |x| <= 1.5 and the exponential tail expansion
D1(x) = (pi^2/6 - sum_k e^{-kx} (x/k + 1/k^2)) / x above, both accurate
to ~1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .errors import ArgumentError
from .kernels import Sample

__all__ = [
    "SettingSpec",
    "SETTINGS",
    "get_setting",
    "tau_to_rho_gaussian",
    "frank_tau_from_theta",
    "frank_theta_from_tau",
    "sample_gaussian_copula",
    "sample_frank_copula",
    "sample_setting",
    "true_tau",
]

_MIN_VARIANCE = 1e-12  # N(0, z1) margins at z1 = 0
_FRANK_LOG_DOMAIN = 30.0  # switch to log-space conditional inversion
_INDEPENDENT_TOL = 1e-12


def tau_to_rho_gaussian(tau):
    """Gaussian-copula correlation with the given Kendall's tau."""
    t = np.asarray(tau, dtype=float)
    if np.any(np.abs(t) >= 1) or not np.isfinite(t).all():
        raise ArgumentError("tau must lie strictly inside (-1, 1)")
    out = np.sin(np.pi * t / 2.0)
    return float(out) if np.isscalar(tau) else out


# Bernoulli-series coefficients of D1: 1 - x/4 + sum_k B_{2k} x^{2k} / ((2k+1) (2k)!)
_D1_EVEN_COEF = (
    1.0 / 36.0,
    -1.0 / 3600.0,
    1.0 / 211680.0,
    -1.0 / 10886400.0,
    1.0 / 526901760.0,
    -691.0 / 16999766784000.0,
    1.0 / 1120863744000.0,
)


def _debye1(x: np.ndarray) -> np.ndarray:
    """Debye function D1, vectorized; D1(-x) = D1(x) + x/2."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)

    small = ax <= 1.5
    if small.any():
        a = ax[small]
        a2 = a * a
        acc = np.zeros_like(a)
        power = np.ones_like(a)
        for c in _D1_EVEN_COEF:
            power = power * a2
            acc += c * power
        out[small] = 1.0 - a / 4.0 + acc
    if (~small).any():
        a = ax[~small]
        k = np.arange(1, 81)[:, None]
        with np.errstate(under="ignore"):
            tail = np.sum(np.exp(-k * a[None, :]) * (a[None, :] / k + 1.0 / k**2), axis=0)
        out[~small] = (np.pi**2 / 6.0 - tail) / a
    return np.where(x < 0, out + ax / 2.0, out)


def _frank_tau_vec(theta: np.ndarray) -> np.ndarray:
    """Vectorized tau(theta); theta = 0 maps to the independence limit 0."""
    th = np.asarray(theta, dtype=float)
    safe = np.where(th == 0.0, 1.0, th)
    tau = 1.0 + 4.0 * (_debye1(safe) - 1.0) / safe
    return np.where(th == 0.0, 0.0, tau)


def frank_tau_from_theta(theta: float, allow_zero: bool = False) -> float:
    """Kendall's tau of the Frank copula, by adaptive quadrature."""
    theta = float(theta)
    if theta == 0.0:
        if allow_zero:
            return 0.0
        raise ArgumentError("theta = 0 is the independence limit; "
                            "pass allow_zero=True for the limit value 0")
    if not np.isfinite(theta):
        raise ArgumentError("theta must be finite")
    a = abs(theta)
    if a > 700.0:
        # integrand is numerically t e^{-t} beyond ~40; quadrature adds nothing
        d1 = float(_debye1(np.array([a]))[0])
    else:
        val, _ = integrate.quad(lambda t: t / np.expm1(t), 0.0, a, limit=200)
        d1 = val / a
    tau = 1.0 + 4.0 * (d1 - 1.0) / a
    return tau if theta > 0 else -tau


def frank_theta_from_tau(tau: float) -> float:
    """Invert tau(theta); |tau(theta_hat) - tau| <= 1e-10."""
    tau = float(tau)
    if not -1.0 < tau < 1.0:
        raise ArgumentError("tau must lie strictly inside (-1, 1)")
    if tau == 0.0:
        raise ArgumentError("theta is undefined at independence (tau = 0)")
    a = abs(tau)
    hi = 1.0
    while frank_tau_from_theta(hi) < a:
        hi *= 2.0
        if hi > 1e9:
            raise ArgumentError(f"tau = {tau} too close to 1 to invert")
    theta = optimize.brentq(
        lambda t: frank_tau_from_theta(t) - a, 1e-12, hi, xtol=1e-13, rtol=1e-15
    )
    return theta if tau > 0 else -theta


def _frank_theta_vec(tau: np.ndarray) -> np.ndarray:
    """Vectorized inversion by bisection on the series/tail map.
    tau = 0 entries return theta = 0 (handled as independence)."""
    t = np.asarray(tau, dtype=float)
    a = np.abs(t)
    if np.any(a >= 1.0):
        raise ArgumentError("tau must lie strictly inside (-1, 1)")
    live = a > _INDEPENDENT_TOL
    theta = np.zeros_like(a)
    if live.any():
        target = a[live]
        lo = np.full(target.shape, 1e-12)
        hi = np.full(target.shape, 4.0)
        for _ in range(60):  # expand until tau(hi) >= target (tau < 1 given)
            need = _frank_tau_vec(hi) < target
            if not need.any():
                break
            lo[need] = hi[need]
            hi[need] *= 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            below = _frank_tau_vec(mid) < target
            lo[below] = mid[below]
            hi[~below] = mid[~below]
        theta[live] = 0.5 * (lo + hi)
    return np.where(t < 0, -theta, theta)


def sample_gaussian_copula(tau: np.ndarray, rng: np.random.Generator):
    """Draw (U1, U2) from Gaussian copulas with per-row Kendall's tau."""
    t = np.asarray(tau, dtype=float)
    if np.any(np.abs(t) >= 1):
        raise ArgumentError("tau must lie strictly inside (-1, 1)")
    rho = np.sin(np.pi * t / 2.0)
    e1 = rng.standard_normal(t.shape)
    e2 = rng.standard_normal(t.shape)
    u1 = special.ndtr(e1)
    u2 = special.ndtr(rho * e1 + np.sqrt(1.0 - rho * rho) * e2)
    return u1, u2


def sample_frank_copula(
    tau: np.ndarray, rng: np.random.Generator, theta: np.ndarray | None = None
):
    """Draw (U1, U2) from Frank copulas by conditional-distribution
    inversion; theta may be supplied directly to skip the tau inversion.
    Rows with tau = 0 (or theta = 0) are sampled independent."""
    if theta is None:
        theta = _frank_theta_vec(tau)
    else:
        theta = np.asarray(theta, dtype=float)
    u = rng.random(theta.shape)
    w = rng.random(theta.shape)

    neg = theta < 0
    th = np.where(neg, -theta, theta)
    v = np.empty_like(th)

    indep = th <= _INDEPENDENT_TOL
    v[indep] = w[indep]

    direct = (~indep) & (th <= _FRANK_LOG_DOMAIN)
    if direct.any():
        td, ud, wd = th[direct], u[direct], w[direct]
        denom = wd + (1.0 - wd) * np.exp(-td * ud)
        v[direct] = -np.log1p(wd * np.expm1(-td) / denom) / td

    big = (~indep) & (th > _FRANK_LOG_DOMAIN)
    if big.any():
        tb, ub, wb = th[big], u[big], w[big]
        with np.errstate(divide="ignore", under="ignore"):
            num = np.logaddexp(np.log1p(-wb) - tb * ub, np.log(wb) - tb)
            den = np.log(wb + (1.0 - wb) * np.exp(-tb * ub))
        v[big] = -(num - den) / tb

    v = np.where(neg, 1.0 - v, v)
    return u, np.clip(v, 1e-15, 1.0 - 1e-16)


@dataclass(frozen=True)
class SettingSpec:
    """A benchmark data-generating process."""

    id: str
    copula_family: str  # gaussian | frank
    tau_fn: Callable[[np.ndarray], np.ndarray]  # (m, p) -> (m,)
    dim: int = 1
    marginal: str = "normal_shift"  # normal_shift: N(z,1); normal_scale: N(0,z1)
    theta_fn: Callable[[np.ndarray], np.ndarray] | None = None  # frank only

    @property
    def box(self):
        return (0.0,) * self.dim, (1.0,) * self.dim


def _tau_parabola(z):
    return 3.0 * z[:, 0] * (1.0 - z[:, 0])


def _theta_tan(z):
    return np.tan(np.pi * z[:, 0] / 2.0)


def _tau_s2(z):
    return _frank_tau_vec(_theta_tan(z))


def _tau_const_half(z):
    return np.full(z.shape[0], 0.5)


def _tau_d1(z):
    return 0.75 * (z[:, 0] - z[:, 1])


def _tau_d2(z):
    return 0.5 * np.cos(2 * np.pi * z[:, 0]) + 0.25 * np.sin(2 * np.pi * z[:, 1])


def _tau_d3(z):
    with np.errstate(divide="ignore"):
        ratio = np.where(z[:, 1] > 0, z[:, 0] / np.where(z[:, 1] > 0, z[:, 1], 1.0),
                         np.inf)
    return 0.75 * np.tanh(ratio)


SETTINGS = {
    "s1": SettingSpec("s1", "gaussian", _tau_parabola),
    "s2": SettingSpec("s2", "frank", _tau_s2, theta_fn=_theta_tan),
    "s3": SettingSpec("s3", "frank", _tau_parabola),
    "s4": SettingSpec("s4", "gaussian", _tau_s2),
    "s5": SettingSpec("s5", "gaussian", _tau_const_half),
    "s6": SettingSpec("s6", "frank", _tau_const_half),
    "d1": SettingSpec("d1", "gaussian", _tau_d1, dim=2, marginal="normal_scale"),
    "d2": SettingSpec("d2", "gaussian", _tau_d2, dim=2, marginal="normal_scale"),
    "d3": SettingSpec("d3", "gaussian", _tau_d3, dim=2, marginal="normal_scale"),
}


def get_setting(setting_id: str) -> SettingSpec:
    try:
        return SETTINGS[setting_id]
    except KeyError:
        raise ArgumentError(
            f"unknown setting {setting_id!r}; available: {sorted(SETTINGS)}"
        ) from None


def true_tau(spec: SettingSpec, z) -> float | np.ndarray:
    """Exact conditional Kendall's tau of the setting at z (or batch)."""
    pts = np.asarray(z, dtype=float)
    scalar = pts.ndim <= 1
    if pts.ndim == 0:
        pts = pts[None, None]
    elif pts.ndim == 1:
        pts = pts[:, None] if spec.dim == 1 and pts.shape[0] != spec.dim else pts[None, :]
    if pts.shape[1] != spec.dim:
        raise ArgumentError(f"points must have dimension {spec.dim}")
    lo, hi = spec.box
    if np.any(pts < np.asarray(lo)) or np.any(pts > np.asarray(hi)):
        raise ArgumentError("query point outside the setting's covariate box")
    vals = spec.tau_fn(pts)
    return float(vals[0]) if scalar and vals.shape[0] == 1 else vals


def sample_setting(spec: SettingSpec, n: int, rng) -> Sample:
    """Draw n observations: Z uniform on the box, (U1, U2) from the
    conditional copula at tau(Z), then the marginal quantile maps."""
    if n < 1:
        raise ArgumentError("n must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    z = rng.uniform(size=(n, spec.dim))
    if spec.copula_family == "gaussian":
        u1, u2 = sample_gaussian_copula(spec.tau_fn(z), rng)
    elif spec.copula_family == "frank":
        if spec.theta_fn is not None:
            u1, u2 = sample_frank_copula(None, rng, theta=spec.theta_fn(z))
        else:
            u1, u2 = sample_frank_copula(spec.tau_fn(z), rng)
    else:
        raise ArgumentError(f"unknown copula family {spec.copula_family!r}")

    q1 = special.ndtri(np.clip(u1, 1e-300, 1 - 1e-16))
    q2 = special.ndtri(np.clip(u2, 1e-300, 1 - 1e-16))
    if spec.marginal == "normal_shift":
        x1 = z[:, 0] + q1
        x2 = z[:, 0] + q2
    elif spec.marginal == "normal_scale":
        sd = np.sqrt(np.maximum(z[:, 0], _MIN_VARIANCE))
        x1 = sd * q1
        x2 = sd * q2
    else:
        raise ArgumentError(f"unknown marginal {spec.marginal!r}")
    return Sample(x1=x1, x2=x2, z=z)
