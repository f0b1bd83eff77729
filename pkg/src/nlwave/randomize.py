"""Probability measures: coefficient randomization, Gaussian field samplers,
the renormalization constant, Gibbs weights and rejection samplers.

Every sampler is a pure function of a SeedSpec, so ensembles can be drawn
in any order (or in parallel) and still reproduce bit-identically: sample i
of a stream always uses the generator derived from
(master_seed, stream_id, i).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AlphaOutOfRange, ZeroAcceptance
from .radial import RadialGrid, RadialState, radial_lebesgue_pow
from .spectral import ModeGrid, SpectralField, StatePair, _reflect, hermitianize

__all__ = [
    "CoefficientDistribution",
    "SeedSpec",
    "GibbsSpec",
    "randomize_pair",
    "sample_mu_sd",
    "sample_mu_tilde",
    "sigma_n",
    "sample_radial_free",
    "gibbs_weight",
    "sample_gibbs",
    "sample_gibbs_ensemble",
    "sample_restricted",
    "EnsembleManifest",
]


@dataclass(frozen=True)
class CoefficientDistribution:
    """Law of the randomization variables: mean 0, variance 1, subgaussian.

    All three families satisfy E e^(g X) <= e^(c g^2) with c = 1/2, which
    gives the two-sided tail constant alpha = 1/(4c) = 1/2 in the large
    deviation bound 2 exp(-alpha lambda^2 / sum c_n^2).
    """

    family: str = "gaussian"

    mgf_constant: float = 0.5
    tail_alpha: float = 0.5

    def __post_init__(self):
        if self.family not in ("gaussian", "bernoulli", "uniform"):
            raise ValueError(f"unknown family {self.family!r}")

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "gaussian":
            return rng.standard_normal(size)
        if self.family == "bernoulli":
            return rng.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=size)


def _stream_hash(stream_id: str) -> int:
    digest = hashlib.sha256(stream_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class SeedSpec:
    """Deterministic seed derivation for parallel ensembles.

    The generator is Philox keyed by SeedSequence((master_seed,
    sha256(stream_id)[:8], sample_index)); identical (seed, stream, index)
    produce identical draws on every platform and thread count.
    """

    master_seed: int
    stream_id: str = "main"
    sample_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=(int(self.master_seed) & (2 ** 64 - 1),
                     _stream_hash(self.stream_id),
                     int(self.sample_index)))
        return np.random.Generator(np.random.Philox(ss))

    def stream(self, stream_id: str) -> "SeedSpec":
        return SeedSpec(self.master_seed, stream_id, 0)

    def index(self, sample_index: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_id, sample_index)


# ---------------------------------------------------------------------------
# torus randomization
# ---------------------------------------------------------------------------

def _rep_mask(grid: ModeGrid) -> np.ndarray:
    """One representative per mirror class {n, -n} (zero mode included)."""
    mesh = np.meshgrid(*([grid.k1] * grid.dim), indexing="ij")
    rep = np.zeros(grid.shape, dtype=bool)
    undecided = np.ones(grid.shape, dtype=bool)
    for k in mesh:
        rep |= undecided & (k > 0)
        undecided &= (k == 0)
    rep |= undecided  # the zero mode is its own representative
    return rep


def _classwise(grid: ModeGrid, draws: np.ndarray) -> np.ndarray:
    """Constant value on each mirror class, taken from the representative."""
    rep = _rep_mask(grid)
    return np.where(rep, draws, _reflect(draws))


def randomize_single(f: SpectralField, dist: CoefficientDistribution,
                     rng: np.random.Generator) -> SpectralField:
    """Multiply each cosine/sine coefficient by an independent draw.

    In exponential coordinates the cosine amplitude of the class {n, -n}
    is 2 Re f^(n) and the sine amplitude is -2 Im f^(n), so one draw scales
    the real parts of the pair and an independent draw the imaginary parts.
    """
    grid = f.grid
    beta = _classwise(grid, dist.draw(rng, grid.shape))
    gamma = _classwise(grid, dist.draw(rng, grid.shape))
    coeffs = beta * f.coeffs.real + 1j * gamma * f.coeffs.imag
    coeffs[grid.nyquist_mask] = 0.0
    return SpectralField(grid, coeffs, enforce=False)


def randomize_pair(base: StatePair, dist: CoefficientDistribution,
                   seed: SeedSpec) -> StatePair:
    """Independent randomization of both components of a state pair."""
    rng = seed.generator()
    u = randomize_single(base.u, dist, rng)
    v = randomize_single(base.v, dist, rng)
    return StatePair(u, v)


def hermitian_gaussian(grid: ModeGrid, rng: np.random.Generator) -> np.ndarray:
    """Standard complex Gaussian coefficients with g(-n) = conj(g(n)).

    Mirror-averaging z = X + iY with iid N(0,1) parts gives E|g_n|^2 = 1 for
    every mode and independence across mirror classes; self-conjugate modes
    come out real N(0, 1).  Nyquist planes are zeroed to stay in the
    real-field class.
    """
    z = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    out = (z + np.conj(_reflect(z))) / 2.0
    out[grid.nyquist_mask] = 0.0
    return out


def sample_mu_sd(s: float, d: int, grid: ModeGrid, seed: SeedSpec) -> StatePair:
    """Gaussian pair with u-weight <n>^-(s+1) and v-weight <n>^-s."""
    if grid.dim != d:
        raise ValueError(f"grid dimension {grid.dim} != requested d={d}")
    rng = seed.generator()
    gu = hermitian_gaussian(grid, rng)
    gv = hermitian_gaussian(grid, rng)
    br = np.sqrt(grid.bracket2)
    u = SpectralField(grid, gu * br ** -(s + 1.0), enforce=False)
    v = SpectralField(grid, gv * br ** -s, enforce=False)
    return StatePair(u, v)


def sample_mu_tilde(s: float, grid: ModeGrid, seed: SeedSpec) -> StatePair:
    """Equivalent Gaussian pair: u-weight (1+|n|^2+|n|^(2s+2))^(-1/2),
    v-weight (1+|n|^(2s))^(-1/2)."""
    rng = seed.generator()
    gu = hermitian_gaussian(grid, rng)
    gv = hermitian_gaussian(grid, rng)
    wu = (1.0 + grid.abs2 + grid.abs2 ** (s + 1.0)) ** -0.5
    wv = (1.0 + grid.abs2 ** s) ** -0.5
    u = SpectralField(grid, gu * wu, enforce=False)
    v = SpectralField(grid, gv * wv, enforce=False)
    return StatePair(u, v)


def sigma_n(s: float, N: int) -> float:
    """Renormalization constant: exact sum over the planar lattice ball,
    sum_{|n| <= N} |n|^(2s) / (1 + |n|^2 + |n|^(2s+2)); grows like log N."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if N < 0:
        raise ValueError("N must be >= 0")
    k = np.arange(-N, N + 1, dtype=np.float64)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    n2 = kx ** 2 + ky ** 2
    mask = n2 <= float(N) ** 2
    n2 = n2[mask]
    num = n2 ** s
    if s == 0:
        num = np.ones_like(n2)
    den = 1.0 + n2 + n2 ** (s + 1.0)
    vals = num / den
    if s > 0:
        vals[n2 == 0] = 0.0
    return float(np.sum(vals))


# ---------------------------------------------------------------------------
# radial free measure and Gibbs sampling
# ---------------------------------------------------------------------------

def sample_radial_free(modes: int, seed: SeedSpec,
                       quad_points: Optional[int] = None,
                       grid: Optional[RadialGrid] = None) -> RadialState:
    """Free field: w-coefficients h_n/(n pi), v-coefficients l_n, iid N(0,1)."""
    if grid is None:
        grid = RadialGrid(modes, quad_points)
    rng = seed.generator()
    h = rng.standard_normal(grid.modes)
    l = rng.standard_normal(grid.modes)
    return RadialState(grid, h / grid.omega, l)


@dataclass(frozen=True)
class GibbsSpec:
    """Parameters of the truncated Gibbs ensemble."""

    alpha: float
    truncation: Optional[int] = None
    modes: int = 64
    quad_points: Optional[int] = None
    max_proposals: int = 1_000_000

    def __post_init__(self):
        if not 0.0 < self.alpha < 4.0:
            raise AlphaOutOfRange(
                f"alpha={self.alpha} outside (0, 4); the Gibbs density degenerates at 4")


def gibbs_weight(state: RadialState, alpha: float,
                 N: Optional[int] = None) -> float:
    """exp(-|w_N|_{L^(alpha+2)}^(alpha+2) / (alpha+2)), always in (0, 1]."""
    pot = radial_lebesgue_pow(state, alpha, N=N) / (alpha + 2.0)
    return math.exp(-pot)


def sample_gibbs(spec: GibbsSpec, seed: SeedSpec) -> RadialState:
    """One exact draw from the truncated Gibbs measure by rejection.

    Proposes from the free measure and accepts with probability equal to
    the Gibbs weight (the density is bounded by 1, so rejection is exact).
    """
    grid = RadialGrid(spec.modes, spec.quad_points)
    rng_acc = seed.index(seed.sample_index).generator()
    # proposal draws use sub-streams so acceptance draws stay aligned
    for trial in range(spec.max_proposals):
        sub = SeedSpec(seed.master_seed,
                       f"{seed.stream_id}/prop{seed.sample_index}", trial)
        cand = sample_radial_free(spec.modes, sub, grid=grid)
        w = gibbs_weight(cand, spec.alpha, N=spec.truncation)
        if rng_acc.uniform() <= w:
            return cand
    raise ZeroAcceptance(f"no accept in {spec.max_proposals} proposals")


def sample_gibbs_ensemble(spec: GibbsSpec, count: int, seed: SeedSpec,
                          ) -> tuple[list[RadialState], int]:
    """count accepted samples plus the total number of proposals."""
    grid = RadialGrid(spec.modes, spec.quad_points)
    out: list[RadialState] = []
    proposals = 0
    trial = 0
    rng_acc = seed.generator()
    while len(out) < count:
        if trial >= spec.max_proposals:
            raise ZeroAcceptance(f"proposal budget {spec.max_proposals} exhausted")
        cand = sample_radial_free(spec.modes, seed.index(trial), grid=grid)
        trial += 1
        proposals += 1
        if rng_acc.uniform() <= gibbs_weight(cand, spec.alpha, N=spec.truncation):
            out.append(cand)
    return out, proposals


def sample_restricted(base_sampler: Callable[[SeedSpec], StatePair],
                      constraint: Callable[[StatePair], bool],
                      seed: SeedSpec, budget: int = 100_000) -> tuple[StatePair, int]:
    """Rejection sampling of a base law restricted to a constraint set.

    Returns (sample, proposals used).  Raises ZeroAcceptance when the
    proposal budget runs out, which signals an essentially empty set.
    """
    for trial in range(budget):
        sub = SeedSpec(seed.master_seed,
                       f"{seed.stream_id}/restr{seed.sample_index}", trial)
        cand = base_sampler(sub)
        if constraint(cand):
            return cand, trial + 1
    raise ZeroAcceptance(f"no sample satisfied the constraint in {budget} proposals")


@dataclass
class EnsembleManifest:
    """Provenance record for a sampled ensemble."""

    sampler: str
    parameters: dict
    master_seed: int
    sample_count: int
    acceptance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "sampler": self.sampler,
            "parameters": self.parameters,
            "master_seed": self.master_seed,
            "sample_count": self.sample_count,
            "acceptance": self.acceptance,
        }, indent=2, sort_keys=True)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")
