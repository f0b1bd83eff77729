"""Exact free wave evolution, the Duhamel integral, and Picard iterates.

The free group acts mode-by-mode through (cos(t|n|), sin(t|n|)/|n|) with the
zero mode translating linearly, u(t) = u0 + t*u1.  Duhamel integrals are
evaluated by composite quadrature in time; Picard iterates live on a uniform
node grid and use the angle-addition split of the wave kernel so every
iterate costs one cumulative integral instead of a double sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import GridMismatch
from .spectral import (
    ModeGrid,
    SpectralField,
    StatePair,
    cube,
    sobolev_norm,
    wave_sinc_values,
)

__all__ = ["TimeGrid", "free_evolve", "duhamel", "picard_iterate", "PicardTrajectory"]


@dataclass(frozen=True)
class TimeGrid:
    """Quadrature layout for time integrals on [t0, t1].

    quadrature is either "gauss4" (composite two-point Gauss-Legendre,
    fourth order) or "trapezoid" (uniform nodes including endpoints).
    """

    t0: float
    t1: float
    steps: int
    quadrature: str = "gauss4"

    def __post_init__(self):
        if self.t1 <= self.t0:
            raise ValueError("need t1 > t0")
        if self.steps < 1:
            raise ValueError("need steps >= 1")
        if self.quadrature not in ("gauss4", "trapezoid"):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")

    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        h = (self.t1 - self.t0) / self.steps
        if self.quadrature == "trapezoid":
            nodes = self.t0 + h * np.arange(self.steps + 1)
            w = np.full(self.steps + 1, h)
            w[0] = w[-1] = h / 2.0
            return nodes, w
        # two-point Gauss-Legendre on each substep
        xi = 0.5 / math.sqrt(3.0)
        left = self.t0 + h * np.arange(self.steps)
        nodes = np.concatenate([left + h * (0.5 - xi), left + h * (0.5 + xi)])
        order = np.argsort(nodes, kind="stable")
        return nodes[order], np.full(2 * self.steps, h / 2.0)[order]


def _free_tables(grid: ModeGrid, t: float):
    absn = grid.abs_n
    ct = np.cos(t * absn)
    st = wave_sinc_values(grid, t)          # sin(t|n|)/|n|, t at n=0
    dt_st = -absn * np.sin(t * absn)        # d/dt cos(t|n|); zero at n=0
    return ct, st, dt_st


def free_evolve(state: StatePair, t: float) -> StatePair:
    """Propagate (u, v) by the linear wave group for time t."""
    grid = state.grid
    ct, st, dct = _free_tables(grid, t)
    u = state.u.coeffs
    v = state.v.coeffs
    u_t = ct * u + st * v
    v_t = dct * u + ct * v
    return StatePair(SpectralField(grid, u_t, enforce=False),
                     SpectralField(grid, v_t, enforce=False))


def duhamel(source: Callable[[float], SpectralField], tg: TimeGrid) -> StatePair:
    """Zero-data solution of (d_tt - Lap) u = F at time t1.

    ``source`` is evaluated at the quadrature nodes of ``tg``; the result
    converges at the quadrature's order under step refinement.
    """
    nodes, weights = tg.nodes_weights()
    f0 = source(float(nodes[0]))
    grid = f0.grid
    absn = grid.abs_n
    t1 = tg.t1
    u_acc = np.zeros(grid.shape, dtype=np.complex128)
    v_acc = np.zeros(grid.shape, dtype=np.complex128)
    for tau, w in zip(nodes, weights):
        f = f0 if tau == nodes[0] else source(float(tau))
        if not grid.compatible(f.grid):
            raise GridMismatch("source field grid changed between nodes")
        lag = t1 - float(tau)
        u_acc += (w * wave_sinc_values(grid, lag)) * f.coeffs
        v_acc += (w * np.cos(lag * absn)) * f.coeffs
    return StatePair(SpectralField(grid, u_acc, enforce=False),
                     SpectralField(grid, v_acc, enforce=False))


@dataclass
class PicardTrajectory:
    """A Picard iterate u^(k) sampled on uniform time nodes."""

    grid: ModeGrid
    times: np.ndarray
    coeffs: np.ndarray          # shape (len(times),) + grid.shape
    k: int
    diffs: list                 # sup-in-time H^1 distance between iterates

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[i], enforce=False)

    def sup_h1_distance(self, other: "PicardTrajectory") -> float:
        d = self.coeffs - other.coeffs
        w = self.grid.bracket2
        per_t = np.sqrt(np.sum(w * (d.real ** 2 + d.imag ** 2),
                               axis=tuple(range(1, d.ndim))))
        return float(np.max(per_t))


def _free_trajectory(state: StatePair, times: np.ndarray) -> np.ndarray:
    grid = state.grid
    out = np.empty((len(times),) + grid.shape, dtype=np.complex128)
    for i, t in enumerate(times):
        ct, st, _ = _free_tables(grid, float(t))
        out[i] = ct * state.u.coeffs + st * state.v.coeffs
    return out


def _fold_wave_kernel(grid: ModeGrid, times: np.ndarray,
                      src: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative Duhamel integrals of a node-sampled source.

    Returns (u_part, v_part) at every node, where
    u(t) = int_0^t sin((t-tau)|n|)/|n| src(tau) dtau and v = du/dt.
    Uses sin((t-tau)|n|) = sin(t|n|)cos(tau|n|) - cos(t|n|)sin(tau|n|) so a
    single pass of cumulative trapezoid sums suffices.
    """
    absn = grid.abs_n
    nt = len(times)
    h = float(times[1] - times[0])
    zero = (0,) * grid.dim

    cos_tbl = np.empty((nt,) + grid.shape)
    sin_tbl = np.empty((nt,) + grid.shape)
    for i, t in enumerate(times):
        cos_tbl[i] = np.cos(float(t) * absn)
        sin_tbl[i] = np.sin(float(t) * absn)

    fc = src * cos_tbl
    fs = src * sin_tbl
    A = np.zeros_like(src)
    B = np.zeros_like(src)
    np.cumsum(0.5 * h * (fc[1:] + fc[:-1]), axis=0, out=A[1:])
    np.cumsum(0.5 * h * (fs[1:] + fs[:-1]), axis=0, out=B[1:])

    with np.errstate(divide="ignore", invalid="ignore"):
        inv_n = np.where(absn > 0, 1.0 / np.where(absn > 0, absn, 1.0), 0.0)
    u_part = (sin_tbl * A - cos_tbl * B) * inv_n
    v_part = cos_tbl * A + sin_tbl * B

    # zero mode: u = int (t - tau) src dtau, v = int src dtau
    s0 = src[(slice(None),) + zero]
    I0 = np.zeros(nt, dtype=np.complex128)
    I1 = np.zeros(nt, dtype=np.complex128)
    I0[1:] = np.cumsum(0.5 * h * (s0[1:] + s0[:-1]))
    tau_s = times * s0
    I1[1:] = np.cumsum(0.5 * h * (tau_s[1:] + tau_s[:-1]))
    u_part[(slice(None),) + zero] = times * I0 - I1
    v_part[(slice(None),) + zero] = I0
    return u_part, v_part


def _cubic_source(grid: ModeGrid, traj: np.ndarray,
                  forcing: Optional[np.ndarray]) -> np.ndarray:
    """-(f + u)^3 at every node, dealiased."""
    out = np.empty_like(traj)
    for i in range(traj.shape[0]):
        f = SpectralField(grid, traj[i], enforce=False)
        if forcing is not None:
            f = f + SpectralField(grid, forcing[i], enforce=False)
        out[i] = -cube(f).coeffs
    return out


def picard_iterate(state: StatePair, k: int, tg: TimeGrid) -> PicardTrajectory:
    """k-th Picard iterate of the cubic Duhamel map on uniform nodes.

    u^(0) = 0, u^(1) = S(t)(u0, u1), and
    u^(k+1) = u^(1) - int_0^t sin((t-tau)|n|)/|n| (u^(k))^3 dtau.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    grid = state.grid
    times = np.linspace(tg.t0, tg.t1, tg.steps + 1)
    if abs(tg.t0) > 0:
        raise ValueError("picard iterates start at t0 = 0")
    free = _free_trajectory(state, times)
    cur = np.zeros_like(free)
    diffs: list[float] = []
    w = grid.bracket2
    for _ in range(k):
        src = _cubic_source(grid, cur, None)
        u_part, _ = _fold_wave_kernel(grid, times, src)
        nxt = free + u_part
        d = nxt - cur
        diffs.append(float(np.max(np.sqrt(np.sum(
            w * (d.real ** 2 + d.imag ** 2), axis=tuple(range(1, d.ndim)))))))
        cur = nxt
    return PicardTrajectory(grid, times, cur, k, diffs)
