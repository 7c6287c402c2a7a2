"""Simplifying-assumption test and finite-sample theory diagnostics.

The Wald statistic tests H0: the regression coefficients are all zero
(the conditional Kendall's tau does not depend on the covariate), with
the intercept coefficient excluded by default since H0 concerns only the
non-constant part.  Two variants ship: "as_printed" evaluates
W_n = n h^p beta^T V_n beta against chi-square with dof = number of
design points, where V_n = Sigma^{-1} (sum_ij H_ij psi_i psi_j^T)
Sigma^{-1}; "studentized" replaces V_n by its pseudo-inverse and uses
dof = rank(V_n), which is the usual chi-square calibration.

theorem1_bound evaluates the finite-sample prediction/estimation bound
and its probability as pure arithmetic; estimate_re_constant is a random
search diagnostic for the restricted-eigenvalue constant (an upper
bound: random search cannot certify a minimum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats

from .concordance import gn_moment
from .dictionary import design_matrix
from .errors import ArgumentError, CkregError, RankDeficiencyError
from .kernels import Sample
from .pipeline import FitConfig, FitResult, two_step_fit
from .transforms import derivative as t_deriv

__all__ = [
    "WaldResult",
    "TheoryConstants",
    "TheoremBound",
    "wald_test",
    "bootstrap_pvalue",
    "theorem1_bound",
    "estimate_re_constant",
]

WALD_SCHEMA = "ckreg.wald_result/1"


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    dof: int
    p_value: float
    variant: str  # as_printed | studentized
    intercept_removed: bool
    h_hat_diag: np.ndarray  # floored per-point variance factors
    floored: int  # how many variance factors were negative and clipped

    def to_json_dict(self) -> dict:
        return {
            "schema": WALD_SCHEMA,
            "statistic": float(self.statistic),
            "dof": int(self.dof),
            "p_value": float(self.p_value),
            "variant": self.variant,
            "intercept_removed": bool(self.intercept_removed),
            "floored": int(self.floored),
        }


def _wald_core(sample, fit, beta, variant_id, remove_intercept, gn_budget, seed):
    cfg = fit.config
    if len(fit.first_stage) != cfg.n_points:
        raise ArgumentError("fit carries no first-stage estimates")
    valid = np.array([e.valid for e in fit.first_stage], dtype=bool)
    pts = cfg.design_points[valid]
    tau = np.array([e.value for e in fit.first_stage])[valid]
    f_hat = np.array([e.f_hat for e in fit.first_stage])[valid]
    psi = design_matrix(cfg.dictionary, pts)

    beta = np.asarray(beta, dtype=float)
    names = list(cfg.dictionary.names)
    removed = False
    ci = cfg.dictionary.constant_index
    if remove_intercept and ci is not None:
        keep = np.arange(psi.shape[1]) != ci
        psi = psi[:, keep]
        beta = beta[keep]
        names = [n for j, n in enumerate(names) if keep[j]]
        removed = True

    sigma = psi.T @ psi
    evals, evecs = np.linalg.eigh(sigma)
    tol = max(float(evals[-1]), 0.0) * sigma.shape[0] * np.finfo(float).eps
    if evals[0] <= tol:
        bad = evals <= tol
        dom = [names[int(np.argmax(np.abs(v)))] for v in evecs[:, bad].T]
        raise RankDeficiencyError(
            f"design-point Gram matrix is singular along {dom}; "
            "drop redundant basis functions or add design points",
            null_directions=evecs[:, bad],
        )

    lam_prime = np.asarray(t_deriv(cfg.transform, tau), dtype=float)
    gn = np.array([
        gn_moment(sample, z, cfg.kernel, cfg.variant,
                  max_triples=gn_budget, seed=seed)
        for z in pts
    ])
    h_raw = 4.0 * cfg.kernel.int_k2 / f_hat * lam_prime ** 2 * (gn - tau ** 2)
    floored = int(np.sum(h_raw < 0))
    h_diag = np.maximum(h_raw, 0.0)

    # H_ij vanishes unless z'_i = z'_j, so the middle sum collapses into
    # per-group outer products (plain diagonal when points are distinct)
    _, group = np.unique(pts, axis=0, return_inverse=True)
    mid = np.zeros_like(sigma)
    for g in np.unique(group):
        idx = np.nonzero(group == g)[0]
        pg = psi[idx].sum(axis=0)
        mid += h_diag[idx[0]] * np.outer(pg, pg)

    sigma_inv = evecs @ np.diag(1.0 / evals) @ evecs.T
    v_n = sigma_inv @ mid @ sigma_inv
    scale = sample.n * cfg.kernel.bandwidth ** cfg.kernel.dim

    if variant_id == "as_printed":
        statistic = scale * float(beta @ v_n @ beta)
        dof = int(pts.shape[0])
    else:
        v_sym = (v_n + v_n.T) / 2.0
        w, u = np.linalg.eigh(v_sym)
        wtol = max(float(w[-1]), 0.0) * v_sym.shape[0] * np.finfo(float).eps
        pos = w > wtol
        dof = int(pos.sum())
        if dof == 0:
            statistic = 0.0
        else:
            proj = u[:, pos].T @ beta
            statistic = scale * float(proj @ (proj / w[pos]))
        statistic = max(statistic, 0.0)

    p_value = 1.0 if dof == 0 else float(stats.chi2.sf(statistic, dof))
    return statistic, dof, p_value, h_diag, floored, removed


def wald_test(
    sample: Sample,
    fit: FitResult,
    variant: str = "as_printed",
    remove_intercept: bool = True,
    gn_budget: int | None = None,
    seed: int = 0,
) -> WaldResult:
    """Wald test of H0: beta = 0 (intercept excluded when present)."""
    if variant not in ("as_printed", "studentized"):
        raise ArgumentError("variant must be 'as_printed' or 'studentized'")
    statistic, dof, p_value, h_diag, floored, removed = _wald_core(
        sample, fit, fit.beta, variant, remove_intercept, gn_budget, seed
    )
    return WaldResult(
        statistic=statistic, dof=dof, p_value=p_value, variant=variant,
        intercept_removed=removed, h_hat_diag=h_diag, floored=floored,
    )


def bootstrap_pvalue(
    sample: Sample,
    fit: FitResult,
    config: FitConfig,
    B: int = 100,
    seed: int = 0,
    variant: str = "as_printed",
    remove_intercept: bool = True,
) -> float:
    """Nonparametric bootstrap p-value for the Wald statistic.

    Rows are resampled with replacement; each resample is refitted with
    `config` and its statistic is recentered at the observed beta.  A
    resample whose fit fails is redrawn (three attempts), after which it
    counts as an exceedance (conservative).  Replicates use seeds spawned
    from `seed`, so the result is reproducible.
    """
    if B < 1:
        raise ArgumentError("B must be >= 1")
    observed = wald_test(
        sample, fit, variant=variant, remove_intercept=remove_intercept
    )
    exceed = 0
    for child in np.random.SeedSequence(seed).spawn(B):
        rng = np.random.default_rng(child)
        outcome = None
        for _ in range(3):
            idx = rng.integers(0, sample.n, sample.n)
            try:
                resample = sample.restrict(idx)
                refit = two_step_fit(resample, config)
                stat_b, _, _, _, _, _ = _wald_core(
                    resample, refit, refit.beta - fit.beta, variant,
                    remove_intercept, None, 0,
                )
            except (CkregError, np.linalg.LinAlgError):
                continue
            outcome = stat_b >= observed.statistic
            break
        exceed += 1 if outcome is None else int(outcome)
    return (1 + exceed) / (B + 1)


@dataclass(frozen=True)
class TheoryConstants:
    """Constants entering the finite-sample bound (all assumed exact)."""

    alpha: float  # kernel order / smoothness exponent
    p: int  # covariate dimension
    f_min: float
    f_max: float
    int_K2: float
    C_K: float  # sup norm of the kernel
    C_K_alpha: float
    C_XZ_alpha: float
    C_psi: float
    C_Lambda_prime: float
    gamma: float  # penalty multiple, lambda = gamma * t
    kappa_s3: float  # restricted-eigenvalue constant kappa(s, 3)
    s: int  # sparsity

    def __post_init__(self):
        vals = [
            self.alpha, self.p, self.f_min, self.f_max, self.int_K2,
            self.C_K, self.C_K_alpha, self.C_XZ_alpha, self.C_psi,
            self.C_Lambda_prime, self.gamma, self.kappa_s3, self.s,
        ]
        if not all(v > 0 for v in vals):
            raise ArgumentError("all constants must be strictly positive")
        if self.f_min > self.f_max:
            raise ArgumentError("f_min must not exceed f_max")
        if self.gamma < 4:
            raise ArgumentError("gamma must be >= 4")


@dataclass(frozen=True)
class TheoremBound:
    radius_pred: float
    prob_lower_bound: float  # may be negative; reported as computed
    h_condition_ok: bool
    c1: float
    c2: float
    c3: float
    gamma: float
    t: float
    s: int
    kappa_s3: float

    def radius_q(self, q: float) -> float:
        """l_q estimation-error radius, valid for 1 <= q <= 2."""
        if not 1.0 <= q <= 2.0:
            raise ArgumentError("q must lie in [1, 2]")
        return (
            4.0 ** (2.0 / q) * (self.gamma + 1.0) * self.t
            * self.s ** (1.0 / q) / self.kappa_s3 ** 2
        )


def theorem1_bound(
    constants: TheoryConstants, n: int, n_prime: int, t: float, h: float
) -> TheoremBound:
    """Evaluate the fixed-design bound: prediction radius, l_q radii and
    the probability floor, plus the small-bandwidth side condition."""
    if not (t > 0 and h > 0 and n >= 2 and n_prime >= 1):
        raise ArgumentError("need t > 0, h > 0, n >= 2, n_prime >= 1")
    c = constants
    mix = c.f_min ** 2 + 8.0 * c.f_max ** 2
    c1 = c.f_min ** 2 / (32.0 * c.f_max * c.int_K2 + (8.0 / 3.0) * c.C_K * c.f_min)
    c2 = (16.0 * c.C_psi * c.C_Lambda_prime * mix * c.f_max * c.int_K2) ** 2 \
        / c.f_min ** 8
    c3 = (64.0 / 3.0) * c.C_psi * c.C_Lambda_prime * c.C_K ** 2 * mix \
        / c.f_min ** 4

    radius_pred = 4.0 * (c.gamma + 1.0) * t * math.sqrt(c.s) / c.kappa_s3
    prob = (
        1.0
        - 2.0 * n_prime * math.exp(-n * h ** c.p * c1)
        - 2.0 * n_prime * math.exp(-(n - 1) * h ** (2 * c.p) * t * t / (c2 + c3 * t))
    )
    fact = math.gamma(c.alpha + 1.0)
    h_cap = min(
        c.f_min * fact / (4.0 * c.C_K_alpha),
        c.f_min ** 4 * fact * t
        / (8.0 * c.C_psi * c.C_Lambda_prime * mix * c.C_XZ_alpha),
    )
    return TheoremBound(
        radius_pred=radius_pred,
        prob_lower_bound=prob,
        h_condition_ok=bool(h ** c.alpha <= h_cap),
        c1=c1, c2=c2, c3=c3,
        gamma=c.gamma, t=t, s=c.s, kappa_s3=c.kappa_s3,
    )


def estimate_re_constant(
    design, s: int, c0: float = 3.0, draws: int = 1000, seed: int = 0
) -> float:
    """Random-search upper bound for the restricted-eigenvalue constant
    min_{|J0|<=s} min_{cone} |X delta|_2 / (sqrt(n') |delta|_2).

    Support sets of size s are enumerated when C(p', s) <= 1e5, sampled
    otherwise; `draws` random cone directions are tried per support set.
    """
    x = np.asarray(design, dtype=float)
    if x.ndim != 2 or x.size == 0 or not np.isfinite(x).all():
        raise ArgumentError("design must be a finite 2d matrix")
    n_rows, p = x.shape
    if not 1 <= s <= p:
        raise ArgumentError("s must be between 1 and the number of columns")
    if not (c0 > 0 and draws >= 1):
        raise ArgumentError("need c0 > 0 and draws >= 1")

    rng = np.random.default_rng(seed)
    if math.comb(p, s) <= 10 ** 5:
        subsets = list(combinations(range(p), s))
    else:
        subsets = [
            tuple(np.sort(rng.choice(p, size=s, replace=False)))
            for _ in range(500)
        ]

    best = math.inf
    root_n = math.sqrt(n_rows)
    for j0 in subsets:
        mask = np.zeros(p, dtype=bool)
        mask[list(j0)] = True
        k = p - s
        on = rng.standard_normal((draws, s))
        delta = np.zeros((draws, p))
        delta[:, mask] = on
        if k:
            l1 = np.abs(on).sum(axis=1)
            w = rng.dirichlet(np.ones(k), size=draws)
            signs = rng.choice([-1.0, 1.0], size=(draws, k))
            frac = rng.uniform(0.0, 1.0, size=draws)
            delta[:, ~mask] = (frac * c0 * l1)[:, None] * w * signs
        num = np.linalg.norm(x @ delta.T, axis=0)
        den = root_n * np.linalg.norm(delta, axis=1)
        ok = den > 0
        if ok.any():
            best = min(best, float(np.min(num[ok] / den[ok])))
    return best
