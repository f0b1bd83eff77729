"""Spectral substrate for real fields on the torus.

Fields are stored as complex Fourier coefficients on an isotropic mode grid
with each axis ordered 0, 1, ..., M/2-1, -M/2, ..., -1 (row-major across
axes).  Reality of the physical field is encoded as Hermitian symmetry
f^(-n) = conj(f^(n)); the unmatched Nyquist planes (any component equal to
-M/2) have no conjugate partner inside the grid and are kept identically
zero, so the resolved band is |n_i| <= M/2 - 1.

All spatial integrals use the probability-normalized measure dx/(2*pi)^d,
so the constant field 1 has unit L^p norm for every p and Parseval reads
mean(f^2) = sum |f^(n)|^2 with no extra factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatch, UnderResolved

__all__ = [
    "ModeGrid",
    "SpectralField",
    "StatePair",
    "SymbolSpec",
    "apply_multiplier",
    "to_physical",
    "to_spectral",
    "sobolev_norm",
    "pair_norm",
    "lebesgue_norm",
    "project_leq",
    "project_nonzero",
    "multiply_dealiased",
    "cube",
    "BumpSpec",
    "bump_dilate",
]


class ModeGrid:
    """Isotropic mode grid on T^d with a padded physical quadrature grid.

    Parameters
    ----------
    dim : spatial dimension, 1, 2 or 3.
    modes_per_axis : even number M of stored modes per axis.
    physical_points_per_axis : quadrature points P per axis.  Defaults to
        2*M, which makes quartic quadrature and cubic products exact for
        fields in the resolved band; anything >= ceil(3*M/2) is accepted.
    dealias : set False for grids that never evaluate nonlinearities, which
        relaxes the requirement to P >= M (pure sampling plus norms).
    """

    def __init__(self, dim: int, modes_per_axis: int,
                 physical_points_per_axis: Optional[int] = None,
                 dealias: bool = True):
        if dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
        if modes_per_axis <= 0 or modes_per_axis % 2 != 0:
            raise ValueError(f"modes_per_axis must be even positive, got {modes_per_axis}")
        M = int(modes_per_axis)
        P = 2 * M if physical_points_per_axis is None else int(physical_points_per_axis)
        if dealias and 2 * P < 3 * M:
            raise ValueError(
                f"physical_points_per_axis={P} violates the dealiasing rule P >= 3M/2 (M={M})")
        if P < M:
            raise ValueError(f"need P >= M, got P={P}, M={M}")
        self.dim = int(dim)
        self.modes_per_axis = M
        self.physical_points_per_axis = P

        # integer wavenumbers along one axis, fft layout
        self.k1 = np.fft.fftfreq(M, d=1.0 / M).astype(np.int64)
        self._cache: dict = {}

    def _axis_view(self, ax: int) -> np.ndarray:
        shape = [1] * self.dim
        shape[ax] = self.modes_per_axis
        return self.k1.astype(np.float64).reshape(shape)

    @property
    def abs2(self) -> np.ndarray:
        """|n|^2 over the mode box (built lazily; large grids are heavy)."""
        if "abs2" not in self._cache:
            out = self._axis_view(0) ** 2
            for ax in range(1, self.dim):
                out = out + self._axis_view(ax) ** 2
            self._cache["abs2"] = out
        return self._cache["abs2"]

    @property
    def abs_n(self) -> np.ndarray:
        if "abs_n" not in self._cache:
            self._cache["abs_n"] = np.sqrt(self.abs2)
        return self._cache["abs_n"]

    @property
    def bracket2(self) -> np.ndarray:
        if "bracket2" not in self._cache:
            self._cache["bracket2"] = 1.0 + self.abs2
        return self._cache["bracket2"]

    @property
    def nyquist_mask(self) -> np.ndarray:
        if "nyquist_mask" not in self._cache:
            M = self.modes_per_axis
            mask = np.zeros(self.shape, dtype=bool)
            for ax in range(self.dim):
                sl = [slice(None)] * self.dim
                sl[ax] = M // 2
                mask[tuple(sl)] = True
            self._cache["nyquist_mask"] = mask
        return self._cache["nyquist_mask"]

    @property
    def shape(self) -> tuple:
        return (self.modes_per_axis,) * self.dim

    @property
    def phys_shape(self) -> tuple:
        return (self.physical_points_per_axis,) * self.dim

    @property
    def n_max(self) -> int:
        """Largest resolved wavenumber component (Nyquist excluded)."""
        return self.modes_per_axis // 2 - 1

    def physical_coords(self) -> list[np.ndarray]:
        """Per-axis sample coordinates 2*pi*j/P, j = 0..P-1."""
        P = self.physical_points_per_axis
        x = 2.0 * np.pi * np.arange(P) / P
        return [x] * self.dim

    def compatible(self, other: "ModeGrid") -> bool:
        return (self.dim == other.dim
                and self.modes_per_axis == other.modes_per_axis
                and self.physical_points_per_axis == other.physical_points_per_axis)

    def __repr__(self) -> str:
        return (f"ModeGrid(dim={self.dim}, M={self.modes_per_axis}, "
                f"P={self.physical_points_per_axis})")


def _reflect(a: np.ndarray) -> np.ndarray:
    """Index-negation mirror n -> -n modulo M on every axis."""
    out = a
    for ax in range(a.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def hermitianize(grid: ModeGrid, coeffs: np.ndarray) -> np.ndarray:
    """Project a coefficient array onto the real-field class.

    Averages with the conjugate mirror and zeroes the Nyquist planes.
    """
    c = 0.5 * (coeffs + np.conj(_reflect(coeffs)))
    c[grid.nyquist_mask] = 0.0
    return c


class SpectralField:
    """Real-valued function on T^d stored by its Fourier coefficients."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: ModeGrid, coeffs: np.ndarray, enforce: bool = True):
        if coeffs.shape != grid.shape:
            raise GridMismatch(f"coefficient shape {coeffs.shape} != grid shape {grid.shape}")
        c = np.asarray(coeffs, dtype=np.complex128)
        if enforce:
            c = hermitianize(grid, c)
        self.grid = grid
        self.coeffs = c

    @classmethod
    def zeros(cls, grid: ModeGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128), enforce=False)

    @classmethod
    def constant(cls, grid: ModeGrid, value: float) -> "SpectralField":
        f = cls.zeros(grid)
        f.coeffs[(0,) * grid.dim] = value
        return f

    @classmethod
    def from_function(cls, grid: ModeGrid, fn: Callable[..., np.ndarray]) -> "SpectralField":
        """Sample fn(x1, ..., xd) on the physical grid and transform."""
        coords = np.meshgrid(*grid.physical_coords(), indexing="ij")
        return to_spectral(grid, np.asarray(fn(*coords), dtype=np.float64))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy(), enforce=False)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs, enforce=False)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs, enforce=False)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar, enforce=False)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs, enforce=False)

    def _check(self, other: "SpectralField") -> None:
        if not self.grid.compatible(other.grid):
            raise GridMismatch("fields live on different grids")

    def mean(self) -> float:
        return float(self.coeffs[(0,) * self.grid.dim].real)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def __repr__(self) -> str:
        return f"SpectralField({self.grid!r})"


@dataclass
class StatePair:
    """Phase-space point (u, v = du/dt) of the first-order system."""

    u: SpectralField
    v: SpectralField

    def __post_init__(self):
        if not self.u.grid.compatible(self.v.grid):
            raise GridMismatch("state components live on different grids")

    @property
    def grid(self) -> ModeGrid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: ModeGrid) -> "StatePair":
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid))

    def copy(self) -> "StatePair":
        return StatePair(self.u.copy(), self.v.copy())

    def __add__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.u - other.u, self.v - other.v)

    def is_finite(self) -> bool:
        return self.u.is_finite() and self.v.is_finite()


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _dest_indices(grid: ModeGrid) -> np.ndarray:
    """Physical-grid cyclic index of each stored mode along one axis."""
    P = grid.physical_points_per_axis
    return np.mod(grid.k1, P)


def _phys_coeffs_raw(grid: ModeGrid, coeffs: np.ndarray) -> np.ndarray:
    """Embed mode coefficients into the padded half-complex layout."""
    P = grid.physical_points_per_axis
    M = grid.modes_per_axis
    dest = _dest_indices(grid)
    half = M // 2  # resolved nonnegative last-axis modes: 0..M/2-1
    shape = (P,) * (grid.dim - 1) + (P // 2 + 1,)
    H = np.zeros(shape, dtype=np.complex128)
    if grid.dim == 1:
        H[dest[:half]] = coeffs[:half]
    elif grid.dim == 2:
        H[np.ix_(dest, dest[:half])] = coeffs[:, :half]
    else:
        H[np.ix_(dest, dest, dest[:half])] = coeffs[:, :, :half]
    return H


def to_physical(f: SpectralField) -> np.ndarray:
    """Evaluate the field on the P^d physical grid (real samples)."""
    grid = f.grid
    H = _phys_coeffs_raw(grid, f.coeffs)
    n_total = grid.physical_points_per_axis ** grid.dim
    return sfft.irfftn(H, s=grid.phys_shape) * n_total


def to_spectral(grid: ModeGrid, samples: np.ndarray) -> SpectralField:
    """Transform P^d real samples into a SpectralField (band truncation)."""
    if samples.shape != grid.phys_shape:
        raise GridMismatch(f"sample shape {samples.shape} != physical grid {grid.phys_shape}")
    P = grid.physical_points_per_axis
    M = grid.modes_per_axis
    H = sfft.rfftn(samples) / float(P ** grid.dim)
    dest = _dest_indices(grid)
    neg = np.mod(-grid.k1, P)
    half = M // 2
    out = np.zeros(grid.shape, dtype=np.complex128)
    if grid.dim == 1:
        out[:half] = H[dest[:half]]
        out[half + 1:] = np.conj(H[M // 2 - 1:0:-1])
    elif grid.dim == 2:
        out[:, :half] = H[np.ix_(dest, dest[:half])]
        out[:, half + 1:] = np.conj(H[np.ix_(neg, np.arange(M // 2 - 1, 0, -1))])
    else:
        out[:, :, :half] = H[np.ix_(dest, dest, dest[:half])]
        out[:, :, half + 1:] = np.conj(
            H[np.ix_(neg, neg, np.arange(M // 2 - 1, 0, -1))])
    out[grid.nyquist_mask] = 0.0
    return SpectralField(grid, out, enforce=False)


# ---------------------------------------------------------------------------
# Fourier multipliers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymbolSpec:
    """Real radial Fourier multiplier.

    kind:
      * ``bracket_power``   <n>^s
      * ``wave_cos``        cos(t|n|)
      * ``wave_sinc``       sin(t|n|)/|n|, value exactly t at n = 0
      * ``tilde_weight``    (1 + |n|^2 + |n|^(2s+2))^(sign/2)
      * ``laplacian_power`` |n|^s (zero mode contributes 0 for s > 0)
    """

    kind: str
    s: float = 0.0
    t: float = 0.0
    sign: int = 1

    def values(self, grid: ModeGrid) -> np.ndarray:
        if self.kind == "bracket_power":
            return grid.bracket2 ** (self.s / 2.0)
        if self.kind == "wave_cos":
            return np.cos(self.t * grid.abs_n)
        if self.kind == "wave_sinc":
            return wave_sinc_values(grid, self.t)
        if self.kind == "tilde_weight":
            w = 1.0 + grid.abs2 + grid.abs2 ** (self.s + 1.0)
            return w ** (0.5 * self.sign)
        if self.kind == "laplacian_power":
            with np.errstate(divide="ignore"):
                vals = grid.abs_n ** self.s
            if self.s < 0:
                vals[(0,) * grid.dim] = 0.0
            return vals
        raise ValueError(f"unknown symbol kind {self.kind!r}")


def wave_sinc_values(grid: ModeGrid, t: float) -> np.ndarray:
    """sin(t|n|)/|n| with the zero mode set exactly to t."""
    absn = grid.abs_n
    out = np.empty_like(absn)
    nz = absn > 0
    out[nz] = np.sin(t * absn[nz]) / absn[nz]
    out[~nz] = t
    return out


def apply_multiplier(sym, f: SpectralField) -> SpectralField:
    """Coefficient-wise product with a real radial symbol."""
    vals = sym.values(f.grid) if isinstance(sym, SymbolSpec) else np.asarray(sym)
    if vals.shape != f.grid.shape:
        raise GridMismatch("symbol table shape does not match the grid")
    return SpectralField(f.grid, f.coeffs * vals, enforce=False)


# ---------------------------------------------------------------------------
# norms and projectors
# ---------------------------------------------------------------------------

def sobolev_norm(f: SpectralField, s: float) -> float:
    """H^s norm (sum_n <n>^{2s} |f^(n)|^2)^(1/2); exact coefficient sum."""
    w = f.grid.bracket2 ** s
    return math.sqrt(float(np.sum(w * (f.coeffs.real ** 2 + f.coeffs.imag ** 2))))


def pair_norm(state: StatePair, s: float) -> float:
    """Norm of (u, v) in H^s x H^(s-1), root of the sum of squares."""
    return math.hypot(sobolev_norm(state.u, s), sobolev_norm(state.v, s - 1.0))


def lebesgue_norm(f: SpectralField, p: float,
                  samples: Optional[np.ndarray] = None) -> float:
    """L^p norm under the normalized measure dx/(2 pi)^d.

    p = inf takes the max over the dealiased physical grid.  Quadrature is
    the P^d trapezoid rule, exact for band-limited |f|^p once P is large
    enough.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if samples is None:
        samples = to_physical(f)
    if math.isinf(p):
        return float(np.max(np.abs(samples)))
    if p == 2:
        return math.sqrt(float(np.mean(samples ** 2)))
    return float(np.mean(np.abs(samples) ** p) ** (1.0 / p))


def project_leq(N: int, f: SpectralField) -> SpectralField:
    """Dirichlet projector pi_N onto Euclidean frequencies |n| <= N."""
    if N < 0:
        raise ValueError("N must be >= 0")
    mask = f.grid.abs2 <= float(N) ** 2
    return SpectralField(f.grid, np.where(mask, f.coeffs, 0.0), enforce=False)


def project_nonzero(f: SpectralField) -> SpectralField:
    """Projector onto nonzero frequencies (removes the mean)."""
    c = f.coeffs.copy()
    c[(0,) * f.grid.dim] = 0.0
    return SpectralField(f.grid, c, enforce=False)


def pair_project_leq(N: int, state: StatePair) -> StatePair:
    return StatePair(project_leq(N, state.u), project_leq(N, state.v))


# ---------------------------------------------------------------------------
# dealiased products
# ---------------------------------------------------------------------------

def multiply_dealiased(*fields: SpectralField) -> SpectralField:
    """Pointwise product on the padded grid, truncated back to the mode set."""
    grid = fields[0].grid
    prod = to_physical(fields[0])
    for f in fields[1:]:
        if not grid.compatible(f.grid):
            raise GridMismatch("fields live on different grids")
        prod = prod * to_physical(f)
    return to_spectral(grid, prod)


def cube(f: SpectralField) -> SpectralField:
    """Dealiased f^3."""
    s = to_physical(f)
    return to_spectral(f.grid, s * s * s)


# ---------------------------------------------------------------------------
# concentrated bumps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpSpec:
    """Radial C^infty bump exp(-1/(1-(|x|/radius)^2)) supported in |x| < radius.

    ``bandwidth`` is the empirical frequency extent used by resolution
    checks: the fraction of H^s mass (s <= 1) carried by continuum
    frequencies above ``bandwidth`` is below one part in 1e4.
    """

    radius: float = math.pi / 2.0
    bandwidth: float = 4.0

    def profile(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        out = np.zeros_like(r)
        inside = np.abs(r) < self.radius
        q = (r[inside] / self.radius) ** 2
        out[inside] = np.exp(-1.0 / (1.0 - q))
        return out

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        r = np.sqrt(sum(np.asarray(c, dtype=np.float64) ** 2 for c in coords))
        return self.profile(r)


def bump_dilate(bump: BumpSpec, n: int, grid: ModeGrid) -> SpectralField:
    """Periodic field phi(n x) sampled on the grid and transformed.

    Requires the dilated support to fit inside (-pi/n, pi/n)^d so the
    periodization is exact, and the grid to resolve the concentration
    scale n * bandwidth.
    """
    if n < 1:
        raise ValueError("dilation index n must be >= 1")
    if bump.radius >= math.pi:
        raise UnderResolved(f"bump radius {bump.radius} does not fit inside one period cell")
    if n * bump.bandwidth > grid.n_max:
        raise UnderResolved(
            f"grid n_max={grid.n_max} cannot resolve dilation n={n} "
            f"(needs n*bandwidth={n * bump.bandwidth:.0f})")
    coords = grid.physical_coords()
    mesh = np.meshgrid(*[np.mod(x + np.pi, 2.0 * np.pi) - np.pi for x in coords],
                       indexing="ij")
    samples = bump(*[n * x for x in mesh])
    return to_spectral(grid, samples)
