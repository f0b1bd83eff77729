"""Energies, modified energies, norm functionals, and statistical estimators.

Quadratic functionals are evaluated as exact coefficient sums; quartic and
higher products go through physical-space quadrature on a grid fine enough
to make the trapezoid rule exact for the band-limited integrand (the
modified-energy family carries its own evaluation grid for that reason:
its derivative contains six-fold products of pi_N-projected fields).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import InadmissiblePair, UnsupportedS
from .propagator import free_evolve
from .randomize import sigma_n
from .spectral import (
    ModeGrid,
    SpectralField,
    StatePair,
    lebesgue_norm,
    pair_norm,
    project_leq,
    sobolev_norm,
    to_physical,
)

__all__ = [
    "energy",
    "energy_island",
    "truncated_energy",
    "semiclassical_energy",
    "modified_energy",
    "dt_modified_energy",
    "DtModifiedEnergy",
    "wick_quadratic",
    "strichartz_ratio",
    "tail_estimate",
    "TailEstimate",
    "moment_slope",
    "MomentSlope",
    "fit_gaussian_envelope",
    "GaussianTailFit",
    "gronwall_envelope",
]


def _grad_sq_sum(f: SpectralField) -> float:
    """sum |n|^2 |f^(n)|^2 = |grad f|_{L^2}^2 under the normalized measure."""
    c = f.coeffs
    return float(np.sum(f.grid.abs2 * (c.real ** 2 + c.imag ** 2)))


def _l2_sq(f: SpectralField) -> float:
    c = f.coeffs
    return float(np.sum(c.real ** 2 + c.imag ** 2))


def energy(state: StatePair) -> float:
    """H(u, v) = 1/2 int (v^2 + |grad u|^2) + 1/4 int u^4.

    Quadratic parts are exact coefficient sums; the quartic part uses the
    dealiased physical grid, which matches the discrete potential whose
    gradient drives the splitting kick.
    """
    quart = float(np.mean(to_physical(state.u) ** 4))
    return 0.5 * (_l2_sq(state.v) + _grad_sq_sum(state.u)) + 0.25 * quart


def energy_island(state: StatePair) -> float:
    """int ((d_t u)^2 + |grad u|^2 + u^4/2); identically 2 * energy."""
    return 2.0 * energy(state)


def truncated_energy(state: StatePair, N: int) -> float:
    """H_N(u, v) = H(pi_N u, pi_N v)."""
    return energy(StatePair(project_leq(N, state.u), project_leq(N, state.v)))


def semiclassical_energy(state: StatePair, n: int, s: float) -> float:
    """n-weighted closeness functional for the concentration experiments:

    n^-(1-s) (|v|_{L^2}^2 + |grad u|_{L^2}^2)^(1/2)
      + n^-(2-s) (|v|_{H^1}^2 + |grad u|_{H^1}^2)^(1/2).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    u, v = state.u, state.v
    low = math.sqrt(_l2_sq(v) + _grad_sq_sum(u))
    grid = u.grid
    w = grid.bracket2
    hi_v = float(np.sum(w * (v.coeffs.real ** 2 + v.coeffs.imag ** 2)))
    hi_gu = float(np.sum(w * grid.abs2 * (u.coeffs.real ** 2 + u.coeffs.imag ** 2)))
    high = math.sqrt(hi_v + hi_gu)
    return n ** -(1.0 - s) * low + n ** -(2.0 - s) * high


# ---------------------------------------------------------------------------
# modified energies (s = 2, d = 2)
# ---------------------------------------------------------------------------

_EVAL_GRIDS: dict = {}


def _eval_grid(grid: ModeGrid, N: int) -> ModeGrid:
    """Evaluation grid making six-fold products of pi_N fields alias-free."""
    P = sfft.next_fast_len(max(6 * N + 4, grid.modes_per_axis))
    key = (grid.dim, grid.modes_per_axis, P)
    if key not in _EVAL_GRIDS:
        _EVAL_GRIDS[key] = ModeGrid(grid.dim, grid.modes_per_axis, P, dealias=False)
    return _EVAL_GRIDS[key]


def _check_modified_args(state: StatePair, s: float) -> None:
    if s != 2:
        raise UnsupportedS("modified energies are implemented for s = 2 only")
    if state.grid.dim != 2:
        raise UnsupportedS("modified energies are specific to d = 2")


def modified_energy(state: StatePair, N: int, s: float = 2.0) -> float:
    """Renormalized energy H_{s,N} = H~_{s,N} + H + 1/2 int u^2 at s = 2,
    evaluated on the projected pair (pi_N u, pi_N v)."""
    _check_modified_args(state, s)
    eg = _eval_grid(state.grid, N)
    u = SpectralField(eg, project_leq(N, state.u).coeffs, enforce=False)
    v = SpectralField(eg, project_leq(N, state.v).coeffs, enforce=False)

    dsu = SpectralField(eg, eg.abs2 * u.coeffs, enforce=False)   # D^2 u = -Lap u
    dsv_sq = float(np.sum(eg.abs2 ** 2 * (v.coeffs.real ** 2 + v.coeffs.imag ** 2)))
    dsp1u_sq = float(np.sum(eg.abs2 ** 3 * (u.coeffs.real ** 2 + u.coeffs.imag ** 2)))

    u_phys = to_physical(u)
    dsu_phys = to_physical(dsu)
    cross = float(np.mean(dsu_phys ** 2 * u_phys ** 2))
    l2_u = _l2_sq(u)
    h_tilde = (0.5 * dsv_sq + 0.5 * dsp1u_sq + 1.5 * cross
               - 1.5 * sigma_n(s, N) * l2_u)

    quart = float(np.mean(u_phys ** 4))
    h_plain = 0.5 * (_l2_sq(v) + _grad_sq_sum(u)) + 0.25 * quart
    return h_tilde + h_plain + 0.5 * l2_u


@dataclass(frozen=True)
class DtModifiedEnergy:
    total: float
    q1: float
    q2: float
    q3: float
    uv: float


def dt_modified_energy(state: StatePair, N: int, s: float = 2.0) -> DtModifiedEnergy:
    """Instantaneous derivative of H_{s,N} along the truncated flow at s = 2.

    total = int u_N v_N + Q1 + Q2 + Q3 with

      Q1 = 3 int P0[(D^2 u_N)^2] P0[v_N u_N]      (P0 removes the mean)
      Q2 = -6 int Lap(v_N) u_N |grad u_N|^2
      Q3 = 3 (int (D^2 u_N)^2 - sigma_N) int v_N u_N
    """
    _check_modified_args(state, s)
    eg = _eval_grid(state.grid, N)
    uc = project_leq(N, state.u).coeffs
    vc = project_leq(N, state.v).coeffs
    u = SpectralField(eg, uc, enforce=False)
    v = SpectralField(eg, vc, enforce=False)

    u_phys = to_physical(u)
    v_phys = to_physical(v)
    dsu_phys = to_physical(SpectralField(eg, eg.abs2 * uc, enforce=False))
    lap_v_phys = to_physical(SpectralField(eg, -eg.abs2 * vc, enforce=False))

    mesh = np.meshgrid(*([eg.k1] * 2), indexing="ij")
    grad_sq = np.zeros(eg.phys_shape)
    for k in mesh:
        dphys = to_physical(SpectralField(eg, 1j * k * uc, enforce=False))
        grad_sq += dphys ** 2

    A = dsu_phys ** 2
    B = v_phys * u_phys
    mean_A = float(np.mean(A))
    uv = float(np.mean(B))
    q1 = 3.0 * (float(np.mean(A * B)) - mean_A * uv)
    q2 = -6.0 * float(np.mean(lap_v_phys * u_phys * grad_sq))
    q3 = 3.0 * (mean_A - sigma_n(s, N)) * uv
    return DtModifiedEnergy(uv + q1 + q2 + q3, q1, q2, q3, uv)


def wick_quadratic(u: SpectralField, s: float, N: int) -> float:
    """int (D^s pi_N u)^2 - sigma_N, exact in coefficients."""
    c = project_leq(N, u).coeffs
    val = float(np.sum(u.grid.abs2 ** s * (c.real ** 2 + c.imag ** 2)))
    return val - sigma_n(s, N)


# ---------------------------------------------------------------------------
# Strichartz ratio
# ---------------------------------------------------------------------------

def strichartz_ratio(state: StatePair, p: float, q: float, T: float = 1.0,
                     nodes_per_unit: int = 64, tol: float = 1e-3,
                     max_refine: int = 6) -> float:
    """|S(t)(u0,u1)|_{L^p([0,T];L^q)} / (|u0|_{H^{2/p}} + |u1|_{H^{2/p-1}}).

    Admissibility for the d = 3 wave pair: 2 < p <= inf and 1/p + 1/q = 1/2.
    The time norm uses the uniform trapezoid rule, refined until it moves by
    less than ``tol`` relative.
    """
    if not p > 2:
        raise InadmissiblePair(f"need p > 2, got p={p}")
    invp = 0.0 if math.isinf(p) else 1.0 / p
    if abs(invp + 1.0 / q - 0.5) > 1e-9:
        raise InadmissiblePair(f"(p,q)=({p},{q}) violates 1/p + 1/q = 1/2")
    s = 2.0 * invp
    rhs = sobolev_norm(state.u, s) + sobolev_norm(state.v, s - 1.0)
    if rhs == 0.0:
        raise ValueError("zero state has no Strichartz ratio")

    def time_norm(n_nodes: int) -> float:
        ts = np.linspace(0.0, T, n_nodes + 1)
        vals = np.array([lebesgue_norm(free_evolve(state, float(t)).u, q)
                         for t in ts])
        if math.isinf(p):
            return float(np.max(vals))
        return float(np.trapezoid(vals ** p, ts) ** (1.0 / p))

    n = max(2, int(nodes_per_unit * T))
    cur = time_norm(n)
    for _ in range(max_refine):
        n *= 2
        nxt = time_norm(n)
        if abs(nxt - cur) <= tol * max(abs(nxt), 1e-300):
            cur = nxt
            break
        cur = nxt
    return cur / rhs


# ---------------------------------------------------------------------------
# statistical estimators
# ---------------------------------------------------------------------------

@dataclass
class TailEstimate:
    lambdas: np.ndarray
    survival: np.ndarray
    std_error: np.ndarray


def tail_estimate(samples: Sequence[float], lambdas: Sequence[float]) -> TailEstimate:
    """Empirical survival function P(|X| > lambda) with binomial errors."""
    x = np.abs(np.asarray(samples, dtype=np.float64))
    lam = np.asarray(lambdas, dtype=np.float64)
    n = len(x)
    surv = np.array([float(np.mean(x > l)) for l in lam])
    se = np.sqrt(np.maximum(surv * (1.0 - surv), 1.0 / n) / n)
    return TailEstimate(lam, surv, se)


@dataclass
class MomentSlope:
    slope: float
    intercept: float
    ps: np.ndarray
    lp_values: np.ndarray


def moment_slope(samples: Sequence[float], ps: Sequence[float]) -> MomentSlope:
    """Least-squares slope of log |X|_{L^p} against log p."""
    x = np.abs(np.asarray(samples, dtype=np.float64))
    ps = np.asarray(sorted(ps), dtype=np.float64)
    lp = np.array([float(np.mean(x ** p) ** (1.0 / p)) for p in ps])
    if np.any(lp <= 0):
        return MomentSlope(0.0, -math.inf, ps, lp)
    A = np.vstack([np.log(ps), np.ones_like(ps)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(lp), rcond=None)
    return MomentSlope(float(coef[0]), float(coef[1]), ps, lp)


@dataclass
class GaussianTailFit:
    """Fit of log S(lambda) = log C - c lambda^2 over the tail grid."""

    c: float
    log_C: float
    max_residual: float
    ok: bool


def fit_gaussian_envelope(lambdas: Sequence[float], survival: Sequence[float],
                          resid_tol: float = 0.5) -> GaussianTailFit:
    """Shape test for subgaussian tails.

    Fits the log survival against lambda^2 and checks that the decay rate is
    positive and the pointwise residuals stay within ``resid_tol`` log units
    (systematic convexity, i.e. heavier-than-Gaussian tails, shows up as a
    large positive residual at the largest lambdas).
    """
    lam = np.asarray(lambdas, dtype=np.float64)
    surv = np.asarray(survival, dtype=np.float64)
    keep = surv > 0
    lam, surv = lam[keep], surv[keep]
    if len(lam) < 3:
        return GaussianTailFit(0.0, 0.0, math.inf, False)
    A = np.vstack([-lam ** 2, np.ones_like(lam)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(surv), rcond=None)
    resid = np.log(surv) - A @ coef
    max_res = float(np.max(np.abs(resid)))
    return GaussianTailFit(float(coef[0]), float(coef[1]), max_res,
                           bool(coef[0] > 0 and max_res <= resid_tol))


def gronwall_envelope(f: Sequence[float], g: Sequence[float],
                      ts: Sequence[float], C: float = 1.0) -> np.ndarray:
    """Envelope curve C * (int_0^t g) * exp(int_0^t f) for E^(1/2)."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    if np.any(f < 0) or np.any(g < 0):
        raise ValueError("f and g must be nonnegative")
    h = np.diff(ts)
    G = np.concatenate([[0.0], np.cumsum(0.5 * h * (g[1:] + g[:-1]))])
    F = np.concatenate([[0.0], np.cumsum(0.5 * h * (f[1:] + f[:-1]))])
    return C * G * np.exp(F)
