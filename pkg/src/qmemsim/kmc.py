"""Kinetic Monte Carlo for the signed syndrome chains.

Trajectories follow the unsigned jump process (rates are the absolute
values of the off-diagonal entries of ``L_Q``) and carry a weight that is
multiplied by ``g_j`` at each jump through coupling ``j``.  Then

    <exp(t L_Q) F, F> = E[ w_t F(eta_t) F(eta_0) ],   eta_0 ~ Gibbs

Trajectories are advanced in lock-step as numpy arrays.  Each chunk of
``chunk`` trajectories draws from its own Philox stream keyed by
``(seed, chunk index)``, so results do not depend on the thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import reduced
from .davies import SpectralFunction
from .model import StabilizerModel, SyndromeState, build_model
from .reduced import DressedLogical, ReducedGenerator, Sector, SiteTable

DEFAULT_CHUNK = 1000
MAX_TORUS_SIZE = 32


class NegativeRateError(ValueError):
    pass


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Counter-based stream for one chunk of trajectories."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# Gibbs sampling


def excitation_probabilities(m: StabilizerModel, beta: float) -> np.ndarray:
    """Unconstrained probability that each stabilizer is excited."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    J = np.asarray(m.couplings, dtype=float)
    return 0.5 * (1.0 - np.tanh(beta * J))


def sample_gibbs_bits(m: StabilizerModel, beta: float, rng: np.random.Generator, n: int,
                      sectors: Sequence[Sector] | None = None) -> np.ndarray:
    """``n`` exact samples of the constrained Gibbs measure, shape ``(n, M)``.

    Independent Bernoulli bits per sector, rejected until the sector parity is
    even.  Only the listed sectors are sampled; other stabilizers stay unexcited.
    """
    p = excitation_probabilities(m, beta)
    groups = [s.stabilizers for s in sectors] if sectors is not None else list(m.constraints)
    out = np.zeros((n, m.n_stabilizers), dtype=bool)
    for stabs in groups:
        cols = list(stabs)
        pending = np.arange(n)
        while pending.size:
            draw = rng.random((pending.size, len(cols))) < p[cols]
            ok = ~np.bitwise_xor.reduce(draw, axis=1)
            out[np.ix_(pending[ok], cols)] = draw[ok]
            pending = pending[~ok]
    return out


def sample_gibbs_syndrome(m: StabilizerModel, beta: float, rng: np.random.Generator) -> SyndromeState:
    bits = sample_gibbs_bits(m, beta, rng, 1)[0]
    return SyndromeState(tuple(bool(b) for b in bits))


# ---------------------------------------------------------------------------
# Jump process


@dataclass
class JumpTable:
    """Flat per-coupling data for the sampler."""

    pair_a: np.ndarray
    pair_b: np.ndarray
    rates: np.ndarray      # (n_sites, 4), indexed by 2*bit_a + bit_b
    signs: np.ndarray

    @classmethod
    def from_site_table(cls, table: SiteTable) -> "JumpTable":
        rates = np.asarray(table.rates, dtype=float)
        if np.any(rates < 0):
            raise NegativeRateError("rate table has negative entries")
        if not np.all(np.isfinite(rates)):
            raise NegativeRateError("rate table has non-finite entries")
        pairs = np.asarray(table.pairs, dtype=np.int64).reshape(-1, 2)
        return cls(pairs[:, 0], pairs[:, 1], rates, np.asarray(table.signs, dtype=float))

    @property
    def n_sites(self) -> int:
        return len(self.signs)

    def site_rates(self, bits: np.ndarray) -> np.ndarray:
        code = 2 * bits[:, self.pair_a].astype(np.int64) + bits[:, self.pair_b]
        return self.rates[np.arange(self.n_sites), code]


def _select(R: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise index ``k`` with ``cum[k-1] <= u * total < cum[k]``."""
    cum = np.cumsum(R, axis=1)
    target = u * cum[:, -1]
    k = (cum <= target[:, None]).sum(axis=1)
    return np.minimum(k, R.shape[1] - 1)


def _flip(bits: np.ndarray, rows: np.ndarray, table: JumpTable, k: np.ndarray) -> None:
    a, b = table.pair_a[k], table.pair_b[k]
    bits[rows, a] ^= True
    bits[rows, b] ^= True


def _simulate_chunk(m: StabilizerModel, beta: float, table: JumpTable, sectors: Sequence[Sector],
                    F, times: np.ndarray, n: int, rng: np.random.Generator,
                    check_parity: bool = False) -> np.ndarray:
    """Per-trajectory samples of ``w_t F(eta_t) F(eta_0)`` at every time, shape ``(n, T)``."""
    bits = sample_gibbs_bits(m, beta, rng, n, sectors)
    f0 = np.asarray(F(bits), dtype=float)
    w = np.ones(n)
    clock = np.zeros(n)
    ptr = np.zeros(n, dtype=np.int64)
    T = len(times)
    out = np.empty((n, T))
    live = np.arange(n)
    sector_cols = [list(s.stabilizers) for s in sectors]
    while live.size:
        R = table.site_rates(bits[live])
        total = R.sum(axis=1)
        with np.errstate(divide="ignore"):
            dt = rng.exponential(size=live.size) / total
        t_next = clock[live] + dt
        # record every grid time reached before the next jump
        while True:
            pending = ptr[live] < T
            due = pending.copy()
            due[pending] = times[ptr[live][pending]] < t_next[pending]
            if not due.any():
                break
            rows = live[due]
            out[rows, ptr[rows]] = w[rows] * np.asarray(F(bits[rows]), dtype=float) * f0[rows]
            ptr[rows] += 1
        active = ptr[live] < T
        live, R, t_next = live[active], R[active], t_next[active]
        if not live.size:
            break
        k = _select(R, rng.random(live.size))
        _flip(bits, live, table, k)
        w[live] *= table.signs[k]
        clock[live] = t_next
        if check_parity:
            for cols in sector_cols:
                if np.bitwise_xor.reduce(bits[np.ix_(live, cols)], axis=1).any():
                    raise AssertionError("parity constraint violated")
    return out


@dataclass
class KMCResult:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int
    seed: int
    chunk: int
    samples: np.ndarray | None = field(default=None, repr=False)

    def rows(self) -> list[tuple[float, float, float, int]]:
        return [(float(t), float(v), float(s), self.n_traj) for t, v, s in zip(self.times, self.mean, self.stderr)]


def run_chain(gen: ReducedGenerator, F, times: Sequence[float], n_traj: int, seed: int,
              sectors: str | Sequence[str] = "active", chunk: int = DEFAULT_CHUNK,
              n_threads: int = 1, keep_samples: bool = False, check_parity: bool = False) -> KMCResult:
    """Sampled autocorrelation of ``F`` under ``exp(t L_Q)`` for a built generator."""
    if n_traj < 100:
        raise ValueError("n_traj must be at least 100")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and sorted")
    if sectors == "active":
        secs = gen.active_sectors(F)
    elif sectors == "all":
        secs = list(gen.sectors)
    else:
        secs = [gen.sector(s) for s in sectors]
    table = JumpTable.from_site_table(gen.combined_table(secs))
    sizes = [min(chunk, n_traj - s) for s in range(0, n_traj, chunk)]

    def work(i: int) -> np.ndarray:
        return _simulate_chunk(gen.model, gen.beta, table, secs, F, times, sizes[i],
                               chunk_rng(seed, i), check_parity)

    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            parts = list(ex.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    samples = np.concatenate(parts, axis=0)
    mean = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(n_traj)
    return KMCResult(times, mean, stderr, n_traj, seed, chunk, samples if keep_samples else None)


def run_autocorrelation(m: StabilizerModel, h: SpectralFunction, qtilde: DressedLogical,
                        times: Sequence[float], n_traj: int, seed: int, coupling: str | None = None,
                        **kw) -> KMCResult:
    gen = reduced.build_reduced_generator(m, h, qtilde.Q, coupling)
    return run_chain(gen, qtilde.F, times, n_traj, seed, **kw)


@dataclass
class JumpStatistics:
    """Counts of jumps out of each joint state, by coupling, plus holding times."""

    counts: np.ndarray        # (n_states, n_sites)
    holding: np.ndarray       # total time spent in each state
    visits: np.ndarray        # number of jumps out of each state
    rates: np.ndarray         # exact (n_states, n_sites) rates


def jump_statistics(gen: ReducedGenerator, n_jumps: int, seed: int, n_walkers: int = 1000,
                    sectors: str | Sequence[str] = "all") -> JumpStatistics:
    """Run the unsigned jump process and tally transitions per state and coupling."""
    secs = list(gen.sectors) if sectors == "all" else [gen.sector(s) for s in sectors]
    space = gen.space(secs)
    table = JumpTable.from_site_table(gen.combined_table(secs))
    rng = chunk_rng(seed, 0)
    bits = sample_gibbs_bits(gen.model, gen.beta, rng, n_walkers, secs)
    S, K = space.n_states, table.n_sites
    counts = np.zeros(S * K, dtype=np.int64)
    holding = np.zeros(S)
    rows = np.arange(n_walkers)
    for _ in range(max(1, n_jumps // n_walkers)):
        idx = space.index_of(bits)
        R = table.site_rates(bits)
        total = R.sum(axis=1)
        np.add.at(holding, idx, rng.exponential(size=n_walkers) / total)
        k = _select(R, rng.random(n_walkers))
        np.add.at(counts, idx * K + k, 1)
        _flip(bits, rows, table, k)
    counts = counts.reshape(S, K)
    return JumpStatistics(counts, holding, counts.sum(axis=1), table.site_rates(space.bits))


# ---------------------------------------------------------------------------
# Lifetime scans


@dataclass
class ScanRow:
    kind: str
    size: int
    n_qubits: int
    beta: float
    logical: str
    method: str
    tau: float
    tau_stderr: float
    ci_low: float
    ci_high: float
    quality: str
    window_start: float
    window_end: float
    n_points: int
    residual: float

    FIELDS = ("kind", "size", "n_qubits", "beta", "logical", "method", "tau", "tau_stderr",
              "ci_low", "ci_high", "quality", "window_start", "window_end", "n_points", "residual")

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f) for f in self.FIELDS)


def _exact_feasible(gen: ReducedGenerator, F) -> bool:
    secs = gen.active_sectors(F)
    return math.prod(s.n_states for s in secs) <= reduced.MAX_STATES


def kmc_lifetime(gen: ReducedGenerator, F, n_traj: int, seed: int, per_decade: int = 10,
                 max_decades: int = 8, **kw) -> reduced.LifetimeFit:
    """Fit a lifetime to a sampled curve, widening the grid until it crosses 0.1."""
    t_min = 1e-2 / reduced.total_rate_scale(gen)
    t_max = t_min * 1e2
    for _ in range(max_decades):
        times = reduced.geometric_grid(t_min, t_max, per_decade)
        res = run_chain(gen, F, times, n_traj, seed, **kw)
        if res.mean[-1] < 0.1:
            break
        t_max *= 10
    return reduced.fit_lifetime(res.times, res.mean, res.stderr)


def lifetime_scan(kind: str, sizes: Sequence[int], h_params: dict, logical: str, *,
                  method: str = "auto", n_traj: int = 10_000, seed: int = 0,
                  coupling: str | None = None, z: float = 1.96, **kw) -> list[ScanRow]:
    """Lifetime ``tau(size)`` with confidence intervals, one row per size.

    ``h_params`` holds ``beta`` and optionally ``gamma``, ``gamma0``.
    """
    rows = []
    for size in sizes:
        if kind.lower().startswith("kitaev") and size > MAX_TORUS_SIZE:
            raise ValueError(f"torus size {size} above cap {MAX_TORUS_SIZE}")
        m = build_model(kind, size)
        h = SpectralFunction.for_model(m, h_params["beta"], h_params.get("gamma", 1.0),
                                       h_params.get("gamma0", 1.0), coupling)
        q = DressedLogical.bare(m, logical)
        gen = reduced.build_reduced_generator(m, h, q.Q, coupling)
        use = method
        if method == "auto":
            use = "exact-reduced" if _exact_feasible(gen, q.F) else "kmc"
        if use == "exact-reduced":
            fit = reduced.lifetime(m, h, q, coupling)
        elif use == "kmc":
            fit = kmc_lifetime(gen, q.F, n_traj, seed, **kw)
        else:
            raise ValueError(f"unknown method {method!r}")
        lo, hi = fit.tau - z * fit.tau_stderr, fit.tau + z * fit.tau_stderr
        rows.append(ScanRow(m.kind, size, m.n_qubits, h.beta, logical, use, fit.tau, fit.tau_stderr,
                            lo, hi, fit.quality, fit.window[0], fit.window[1], fit.n_points, fit.residual))
    return rows
