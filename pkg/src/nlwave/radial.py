"""Radial wave equation on the unit ball with Dirichlet conditions.

Everything happens in the reduced variable wt = r*u, whose linear part is
the one dimensional Dirichlet wave operator: the eigenfunctions of the
radial Laplacian are e_n(r) = sin(n pi r)/r with eigenvalues (n pi)^2, so
the sine coefficients of wt are exactly the e_n coefficients of u.

Integrals over the ball are normalized so that the e_n are orthonormal:
<f, g> = 2 * int_0^1 f(r) g(r) r^2 dr for radial functions.  With that
convention the free Gaussian field draws independent N(0, 1/(n pi)^2)
amplitudes on w and N(0, 1) on v = dw/dt, the Hamiltonian is

    H = 1/2 sum_n ((n pi)^2 a_n^2 + b_n^2) + 1/(alpha+2) |w_N|^{alpha+2},

and the splitting kick is the exact gradient of the discrete potential, so
exp(-H) is consistent between sampler, weight, and flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .errors import AlphaOutOfRange, NonFiniteField, SingularEvaluation

__all__ = [
    "RadialGrid",
    "RadialState",
    "radial_evolve",
    "radial_hamiltonian",
    "radial_sobolev_norm",
    "radial_lebesgue_pow",
    "reconstruct_u",
]


class RadialGrid:
    """Sine-mode grid for the reduced radial variable on (0, 1)."""

    def __init__(self, modes: int, quad_points: Optional[int] = None):
        if modes < 1:
            raise ValueError("need at least one mode")
        self.modes = int(modes)
        self.quad_points = 2 * self.modes if quad_points is None else int(quad_points)
        if self.quad_points < self.modes:
            raise ValueError("quadrature grid coarser than the mode set")
        P = self.quad_points
        self.r = np.arange(1, P + 1) / (P + 1.0)
        self.omega = math.pi * np.arange(1, self.modes + 1)

    def synth(self, coeffs: np.ndarray) -> np.ndarray:
        """wt(r_j) = sum_n c_n sin(n pi r_j) on the quadrature nodes."""
        pad = np.zeros(self.quad_points)
        pad[:self.modes] = coeffs
        return 0.5 * sfft.dst(pad, type=1)

    def analyze(self, samples: np.ndarray) -> np.ndarray:
        """Coefficients 2 * int_0^1 f(r) sin(n pi r) dr by exact DST quadrature."""
        return sfft.dst(samples, type=1)[:self.modes] / (self.quad_points + 1.0)

    def compatible(self, other: "RadialGrid") -> bool:
        return self.modes == other.modes and self.quad_points == other.quad_points

    def __repr__(self) -> str:
        return f"RadialGrid(modes={self.modes}, quad_points={self.quad_points})"


@dataclass
class RadialState:
    """Real sine coefficients of (w_tilde = r*u, v = d_t w_tilde)."""

    grid: RadialGrid
    w: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.w.shape != (self.grid.modes,) or self.v.shape != (self.grid.modes,):
            raise ValueError("coefficient arrays do not match the mode count")

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "RadialState":
        return cls(grid, np.zeros(grid.modes), np.zeros(grid.modes))

    def copy(self) -> "RadialState":
        return RadialState(self.grid, self.w.copy(), self.v.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.v)))


def _potential_density(grid: RadialGrid, w_coeffs: np.ndarray, alpha: float) -> np.ndarray:
    """|u(r_j)|^(alpha+2) r_j^2 on the quadrature nodes, u = wt/r."""
    wt = grid.synth(w_coeffs)
    u = wt / grid.r
    return np.abs(u) ** (alpha + 2.0) * grid.r ** 2


def radial_lebesgue_pow(state_or_coeffs, alpha: float,
                        N: Optional[int] = None,
                        grid: Optional[RadialGrid] = None) -> float:
    """|w_N|_{L^{alpha+2}}^{alpha+2} under the orthonormal-e_n measure."""
    if isinstance(state_or_coeffs, RadialState):
        grid = state_or_coeffs.grid
        coeffs = state_or_coeffs.w
    else:
        coeffs = np.asarray(state_or_coeffs)
        if grid is None:
            raise ValueError("grid required when passing raw coefficients")
    if N is not None:
        coeffs = np.where(np.arange(1, grid.modes + 1) <= N, coeffs, 0.0)
    dens = _potential_density(grid, coeffs, alpha)
    return 2.0 * float(np.sum(dens)) / (grid.quad_points + 1.0)


def radial_hamiltonian(state: RadialState, alpha: float,
                       N: Optional[int] = None) -> float:
    """Conserved energy of the (truncated) radial flow."""
    quad = 0.5 * float(np.sum(state.grid.omega ** 2 * state.w ** 2 + state.v ** 2))
    pot = radial_lebesgue_pow(state, alpha, N=N) / (alpha + 2.0)
    return quad + pot


def radial_sobolev_norm(coeffs: np.ndarray, s: float, grid: RadialGrid) -> float:
    """Spectral H^s norm (sum (n pi)^{2s} c_n^2)^(1/2) of a radial field."""
    return math.sqrt(float(np.sum(grid.omega ** (2.0 * s) * np.asarray(coeffs) ** 2)))


def reconstruct_u(state: RadialState, r) -> np.ndarray:
    """Physical field u(r) = wt(r)/r; at r = 0 uses the limit wt'(0)."""
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    n = np.arange(1, state.grid.modes + 1)
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        if ri == 0.0:
            out[i] = float(np.sum(state.w * state.grid.omega))
        else:
            out[i] = float(np.sum(state.w * np.sin(math.pi * n * ri)) / ri)
    bound = 2.0 * float(np.sum(np.abs(state.w) * state.grid.omega))
    if np.any(np.abs(out) > bound + 1e-9):
        raise SingularEvaluation("reconstructed field exceeds its coefficient bound")
    return out if out.size > 1 else out


def _force(grid: RadialGrid, w_coeffs: np.ndarray, alpha: float,
           N: Optional[int]) -> np.ndarray:
    """Gradient of the discrete potential: S_N(|u_N|^alpha u_N) coefficients."""
    if N is not None:
        mask = np.arange(1, grid.modes + 1) <= N
        w_coeffs = np.where(mask, w_coeffs, 0.0)
    wt = grid.synth(w_coeffs)
    u = wt / grid.r
    g = np.abs(u) ** alpha * u * grid.r
    f = sfft.dst(g, type=1)[:grid.modes] / (grid.quad_points + 1.0)
    if N is not None:
        f = np.where(mask, f, 0.0)
    return f


def radial_evolve(state: RadialState, alpha: float, N: Optional[int],
                  T: float, dt: float,
                  observer: Optional[Callable[[float, RadialState], None]] = None,
                  nonlinear: bool = True) -> RadialState:
    """Strang-splitting evolution of the radial wave equation over [0, T].

    Supports 0 < alpha <= 3; frequencies above N see only the linear flow.
    """
    if not 0.0 < alpha <= 3.0:
        raise AlphaOutOfRange(f"alpha={alpha} outside (0, 3]")
    grid = state.grid
    if N is not None and N > grid.modes:
        raise ValueError(f"truncation N={N} exceeds the mode count {grid.modes}")
    if T == 0:
        return state.copy()
    steps = max(1, int(round(abs(T) / dt)))
    h = T / steps
    omega = grid.omega
    cos_t, sin_t = np.cos(h * omega), np.sin(h * omega)
    a = state.w.copy()
    b = state.v.copy()

    def kick(step: float) -> None:
        if nonlinear:
            b_minus = step * _force(grid, a, alpha, N)
            b[:] = b - b_minus

    if observer is not None:
        observer(0.0, RadialState(grid, a.copy(), b.copy()))
    kick(0.5 * h)
    for j in range(1, steps + 1):
        a, b = (cos_t * a + sin_t / omega * b,
                -omega * sin_t * a + cos_t * b)
        if j == steps or observer is not None:
            kick(0.5 * h)
            if observer is not None and j < steps:
                observer(j * h, RadialState(grid, a.copy(), b.copy()))
            if j < steps:
                kick(0.5 * h)
        else:
            kick(h)
    out = RadialState(grid, a, b)
    if not out.is_finite():
        raise NonFiniteField("radial evolution produced non-finite coefficients")
    if observer is not None:
        observer(T, out.copy())
    return out
