"""Classical signed dynamics of dressed logical observables on syndrome space.

For ``Q~ = Q F`` with ``Q`` a logical Pauli and ``F`` a +-1 function of the
stabilizer eigenvalues, the Davies semigroup acts as
``exp(tL)(Q F) = Q exp(t L_Q)(F)`` where

    (L_Q F)(eta) = sum_j D_j(eta) * (g_j F(eta ^ flip_j) - F(eta))

``D_j`` is the bath rate selected by the local pattern of the two
stabilizers that coupling ``j`` flips, and ``g_j = +-1`` records whether the
coupling commutes with ``Q``.

Each constraint sector (bonds; stars; plaquettes) has its own even-parity
state space.  States are indexed by the first ``M-1`` excitation bits, the
last one being fixed by parity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .davies import PATTERNS, SpectralFunction, _fkey, coupling_kinds
from .model import StabilizerModel, stabilizer_flip_energy
from .pauli import PauliOp, commutes

MAX_STATES = 1 << 20


class InvalidLogicalError(ValueError):
    pass


class InvalidFunctionError(ValueError):
    pass


class CapacityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Functions on syndrome space


@dataclass(frozen=True)
class StabilizerProduct:
    """``F = prod_{i in indices} S_i`` as a +-1 function of excitation bits."""

    indices: tuple[int, ...] = ()

    def __call__(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=bool)
        if not self.indices:
            return np.ones(bits.shape[:-1])
        par = np.bitwise_xor.reduce(bits[..., list(self.indices)], axis=-1)
        return 1.0 - 2.0 * par

    @property
    def depends_on(self) -> tuple[int, ...]:
        return self.indices


ONE = StabilizerProduct(())


@dataclass(frozen=True)
class SyndromeFunction:
    """Arbitrary function of the excitation bits (shape ``(..., M)`` -> ``(...)``)."""

    fn: Callable[[np.ndarray], np.ndarray]
    depends_on: tuple[int, ...] | None = None  # None: may depend on every stabilizer

    def __call__(self, bits: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(bits, dtype=bool)), dtype=float)


@dataclass(frozen=True)
class DressedLogical:
    """``Q~ = Q F``; ``Q`` is a logical Pauli (or identity) and ``F`` a +-1 syndrome function."""

    Q: PauliOp
    F: StabilizerProduct | SyndromeFunction = ONE

    @classmethod
    def bare(cls, model: StabilizerModel, name: str) -> "DressedLogical":
        if name in ("I", "1", "identity"):
            return cls(PauliOp.identity(model.n_qubits))
        return cls(model.logicals[name])


# ---------------------------------------------------------------------------
# Site tables and sectors


@dataclass
class SiteTable:
    """Per-coupling flip data shared by the exact chain and the sampler.

    ``pairs[k]`` are indices into the full stabilizer bit vector, ``rates[k, c]``
    the jump rate for local pattern ``c = 2*bit_a + bit_b``, ``signs[k]`` is
    ``g_Q`` for that coupling.
    """

    pairs: np.ndarray
    rates: np.ndarray
    signs: np.ndarray
    sites: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.signs)


@dataclass
class Sector:
    name: str
    stabilizers: tuple[int, ...]   # global stabilizer indices, in bit order
    table: SiteTable               # couplings flipping this sector

    @property
    def n_states(self) -> int:
        return 1 << (len(self.stabilizers) - 1)

    @cached_property
    def bits(self) -> np.ndarray:
        """All even-parity configurations, shape ``(n_states, M)``."""
        M = len(self.stabilizers)
        idx = np.arange(self.n_states, dtype=np.int64)
        b = ((idx[:, None] >> np.arange(M - 1)) & 1).astype(bool)
        last = np.bitwise_xor.reduce(b, axis=1) if M > 1 else np.zeros(len(idx), bool)
        return np.concatenate([b, last[:, None]], axis=1)

    def index_of(self, local_bits: np.ndarray) -> np.ndarray:
        M = len(self.stabilizers)
        w = (1 << np.arange(M - 1)).astype(np.int64)
        return np.asarray(local_bits, dtype=np.int64)[..., : M - 1] @ w

    def local_pairs(self) -> np.ndarray:
        pos = {g: k for k, g in enumerate(self.stabilizers)}
        return np.array([[pos[a], pos[b]] for a, b in self.table.pairs], dtype=np.int64).reshape(-1, 2)

    def matrix(self, signed: bool = True) -> sparse.csr_matrix:
        """Backward generator on this sector's even-parity space."""
        S = self.n_states
        if S > MAX_STATES:
            raise CapacityError(f"sector {self.name} has {S} states (limit {MAX_STATES}); use the kmc module")
        bits = self.bits
        idx = np.arange(S, dtype=np.int64)
        M = len(self.stabilizers)
        rows, cols, vals = [], [], []
        diag = np.zeros(S)
        for (a, b), rates, g in zip(self.local_pairs(), self.table.rates, self.table.signs):
            code = 2 * bits[:, a].astype(np.int64) + bits[:, b]
            r = rates[code]
            mask = 0
            for p in (a, b):
                if p < M - 1:
                    mask |= 1 << int(p)
            rows.append(idx)
            cols.append(idx ^ mask)
            vals.append(r * (g if signed else 1.0))
            diag -= r
        rows.append(idx)
        cols.append(idx)
        vals.append(diag)
        A = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(S, S))
        return A.tocsr()

    def gibbs_weights(self, model: StabilizerModel, beta: float) -> np.ndarray:
        J = np.array([model.couplings[i] for i in self.stabilizers])
        s = 1 - 2 * self.bits.astype(float)
        logw = beta * (s @ J)
        w = np.exp(logw - logw.max())
        return w / w.sum()


def _site_rates(model: StabilizerModel, h: SpectralFunction, pair: Sequence[int]) -> np.ndarray:
    out = np.empty(4)
    for pat in PATTERNS:
        w = -stabilizer_flip_energy(model, pair, pat)
        out[2 * pat[0] + pat[1]] = h(w)
    return out


@dataclass
class ReducedGenerator:
    model: StabilizerModel
    h: SpectralFunction
    Q: PauliOp
    sectors: list[Sector]

    @property
    def beta(self) -> float:
        return self.h.beta

    def sector(self, name: str) -> Sector:
        for s in self.sectors:
            if s.name == name:
                return s
        raise KeyError(name)

    def signs(self) -> dict[tuple[int, str], int]:
        return {site: int(g) for s in self.sectors for site, g in zip(s.table.sites, s.table.signs)}

    def active_sectors(self, F) -> list[Sector]:
        """Sectors that carry a sign or that ``F`` depends on; the others are inert."""
        dep = getattr(F, "depends_on", None)
        out = []
        for s in self.sectors:
            touched = dep is None or any(i in s.stabilizers for i in dep)
            if touched or np.any(s.table.signs < 0):
                out.append(s)
        return out

    def space(self, sectors: Sequence[Sector] | None = None) -> "ProductSpace":
        return ProductSpace(self, list(self.sectors if sectors is None else sectors))

    def combined_table(self, sectors: Sequence[Sector] | None = None) -> SiteTable:
        secs = self.sectors if sectors is None else sectors
        pairs = np.concatenate([s.table.pairs for s in secs]).reshape(-1, 2)
        rates = np.concatenate([s.table.rates for s in secs]).reshape(-1, 4)
        signs = np.concatenate([s.table.signs for s in secs])
        sites = [x for s in secs for x in s.table.sites]
        return SiteTable(pairs, rates, signs, sites)


def build_reduced_generator(m: StabilizerModel, h: SpectralFunction, Q: PauliOp | None = None,
                            coupling: str | None = None) -> ReducedGenerator:
    if Q is None:
        Q = PauliOp.identity(m.n_qubits)
    if Q.n_qubits != m.n_qubits:
        raise InvalidLogicalError("logical acts on the wrong number of qubits")
    for i, s in enumerate(m.stabilizers):
        if not commutes(Q, s):
            raise InvalidLogicalError(f"{Q} anticommutes with stabilizer {m.stabilizer_names[i]}")
    per_sector: dict[int, list] = {k: [] for k in range(len(m.constraints))}
    for kind in coupling_kinds(m, coupling):
        for site in range(1, m.n_qubits + 1):
            pair = m.anticommuting_stabilizers(site, kind)
            sec = {m.sector_of(i) for i in pair}
            if len(pair) != 2 or len(sec) != 1:
                raise ValueError(f"coupling {kind}{site} does not flip a stabilizer pair within one sector")
            u = PauliOp.single(m.n_qubits, site, kind)
            g = 1 if commutes(u, Q) else -1
            per_sector[sec.pop()].append((pair, _site_rates(m, h, pair), g, (site, kind)))
    sectors = []
    for k, (name, stabs) in enumerate(zip(m.sector_names, m.constraints)):
        rows = per_sector[k]
        if not rows:
            continue
        table = SiteTable(
            pairs=np.array([r[0] for r in rows], dtype=np.int64),
            rates=np.array([r[1] for r in rows]),
            signs=np.array([r[2] for r in rows], dtype=float),
            sites=[r[3] for r in rows],
        )
        sectors.append(Sector(name, tuple(stabs), table))
    return ReducedGenerator(m, h, Q, sectors)


class ProductSpace:
    """Tensor product of the even-parity spaces of several sectors.

    Joint index is ``kron`` order: the first sector is most significant.
    Stabilizers of sectors not included are held at zero excitation.
    """

    def __init__(self, gen: ReducedGenerator, sectors: list[Sector]):
        self.gen = gen
        self.sectors = sectors
        self.n_states = math.prod(s.n_states for s in sectors) if sectors else 1
        if self.n_states > MAX_STATES:
            raise CapacityError(f"{self.n_states} joint states exceed limit {MAX_STATES}; use the kmc module")

    @cached_property
    def bits(self) -> np.ndarray:
        """Full-model excitation bits for every joint state, ``(n_states, M)``."""
        M = self.gen.model.n_stabilizers
        out = np.zeros((self.n_states, M), dtype=bool)
        idx = np.arange(self.n_states, dtype=np.int64)
        stride = self.n_states
        for s in self.sectors:
            stride //= s.n_states
            local = (idx // stride) % s.n_states
            out[:, list(s.stabilizers)] = s.bits[local]
        return out

    def index_of(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=bool)
        idx = np.zeros(bits.shape[:-1], dtype=np.int64)
        for s in self.sectors:
            idx = idx * s.n_states + s.index_of(bits[..., list(s.stabilizers)])
        return idx

    def matrix(self, signed: bool = True) -> sparse.csr_matrix:
        """Kronecker sum of the sector generators."""
        mats = [s.matrix(signed) for s in self.sectors]
        dims = [s.n_states for s in self.sectors]
        total = sparse.csr_matrix((self.n_states, self.n_states))
        for k, A in enumerate(mats):
            left = sparse.identity(math.prod(dims[:k]), format="csr")
            right = sparse.identity(math.prod(dims[k + 1:]), format="csr")
            total = total + sparse.kron(sparse.kron(left, A), right)
        return total.tocsr()

    def gibbs_weights(self) -> np.ndarray:
        w = np.ones(1)
        for s in self.sectors:
            w = np.kron(w, s.gibbs_weights(self.gen.model, self.gen.beta))
        return w

    def evaluate(self, F) -> np.ndarray:
        vals = np.asarray(F(self.bits), dtype=float)
        if vals.shape != (self.n_states,):
            raise InvalidFunctionError("syndrome function returned wrong shape")
        return vals


# ---------------------------------------------------------------------------
# Propagation and autocorrelation


def _propagate_many(A: sparse.csr_matrix, v: np.ndarray, times: Sequence[float]) -> np.ndarray:
    """``exp(t A) v`` for each ``t`` (any order), stepping through sorted times."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    order = np.argsort(times)
    out = np.empty((len(times), len(v)))
    cur, t_prev = np.asarray(v, dtype=float), 0.0
    for k in order:
        dt = times[k] - t_prev
        if dt > 0:
            cur = expm_multiply(A * dt, cur)
        out[k] = cur
        t_prev = times[k]
    return out


def propagate_reduced(gen: ReducedGenerator, F, t: float | Sequence[float],
                      sectors: str | Sequence[str] = "active") -> tuple["ProductSpace", np.ndarray]:
    """``exp(t L_Q)(F)`` on the chosen sectors.

    ``sectors`` is ``"active"`` (only what ``F`` or the signs touch), ``"all"``
    or a list of sector names.  Returns the space and the values, one row per
    time when ``t`` is a sequence.
    """
    if sectors == "active":
        secs = gen.active_sectors(F)
    elif sectors == "all":
        secs = list(gen.sectors)
    else:
        secs = [gen.sector(n) for n in sectors]
    space = gen.space(secs)
    f = space.evaluate(F)
    A = space.matrix(signed=True)
    if np.isscalar(t):
        return space, _propagate_many(A, f, [t])[0]
    return space, _propagate_many(A, f, t)


def _check_pm1(values: np.ndarray) -> None:
    if not np.allclose(np.abs(values), 1.0, atol=1e-12):
        raise InvalidFunctionError("F must take values +-1 on syndrome space")


@dataclass
class AutocorrelationResult:
    times: np.ndarray
    values: np.ndarray
    half_time_norms: np.ndarray | None = None


def autocorrelation(gen: ReducedGenerator, F, times: Sequence[float],
                    sectors: str | Sequence[str] = "active",
                    with_half_norms: bool = False) -> AutocorrelationResult:
    """``<exp(t L_Q) F, F>`` in the constrained Gibbs measure.

    With ``with_half_norms`` also returns ``|exp(t/2 L_Q) F|^2`` so the two
    sides of the squared-norm identity can be compared.
    """
    times = np.asarray(times, dtype=float)
    secs = {"active": gen.active_sectors(F), "all": list(gen.sectors)}.get(sectors) if isinstance(sectors, str) \
        else [gen.sector(n) for n in sectors]
    space = gen.space(secs)
    f = space.evaluate(F)
    _check_pm1(f)
    pi = space.gibbs_weights()
    A = space.matrix(signed=True)
    G = _propagate_many(A, f, times)
    vals = G @ (pi * f)
    half = None
    if with_half_norms:
        Gh = _propagate_many(A, f, times / 2)
        half = (Gh ** 2) @ pi
    return AutocorrelationResult(times, vals, half)


def autocorrelation_for(m: StabilizerModel, h: SpectralFunction, qtilde: DressedLogical,
                        times: Sequence[float], coupling: str | None = None) -> np.ndarray:
    gen = build_reduced_generator(m, h, qtilde.Q, coupling)
    return autocorrelation(gen, qtilde.F, times).values


def geometric_grid(t_min: float, t_max: float, per_decade: int = 20) -> np.ndarray:
    n = max(2, int(math.ceil(per_decade * math.log10(t_max / t_min))) + 1)
    return np.geomspace(t_min, t_max, n)


# ---------------------------------------------------------------------------
# Lifetimes


@dataclass
class LifetimeFit:
    tau: float
    tau_stderr: float
    window: tuple[float, float]
    n_points: int
    residual: float
    quality: str            # "ok", "non-exponential", "insufficient-window"
    times: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "tau_stderr": self.tau_stderr, "window": list(self.window),
                "n_points": self.n_points, "residual": self.residual, "quality": self.quality}


def fit_lifetime(times: Sequence[float], values: Sequence[float], stderr: Sequence[float] | None = None,
                 lo: float = 0.1, hi: float = 0.8, max_residual: float = 0.05) -> LifetimeFit:
    """Least-squares fit of ``log C(t) = a - t / tau`` over ``lo <= C <= hi``."""
    t = np.asarray(times, dtype=float)
    c = np.asarray(values, dtype=float)
    sel = (c >= lo) & (c <= hi)
    n = int(sel.sum())
    if n < 3:
        return LifetimeFit(float("nan"), float("nan"), (float("nan"),) * 2, n, float("nan"),
                           "insufficient-window", t, c)
    ts, ys = t[sel], np.log(c[sel])
    if stderr is not None:
        se = np.asarray(stderr, dtype=float)[sel] / c[sel]
        w = 1.0 / np.maximum(se, 1e-12) ** 2
    else:
        w = np.ones(n)
    X = np.stack([np.ones(n), ts], axis=1)
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    a, slope = cov @ (WX.T @ ys)
    resid = ys - (a + slope * ts)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    if stderr is not None:
        slope_se = float(np.sqrt(cov[1, 1]))
    else:
        dof = max(n - 2, 1)
        s2 = float(resid @ resid) / dof
        slope_se = float(np.sqrt(s2 * cov[1, 1]))
    if slope >= 0:
        return LifetimeFit(float("inf"), float("nan"), (float(ts[0]), float(ts[-1])), n, rms,
                           "non-exponential", t, c)
    tau = -1.0 / slope
    quality = "ok" if rms <= max_residual else "non-exponential"
    return LifetimeFit(float(tau), float(slope_se / slope ** 2), (float(ts[0]), float(ts[-1])), n, rms,
                       quality, t, c)


def total_rate_scale(gen: ReducedGenerator) -> float:
    return max(float(np.sum([s.table.rates.max(axis=1).sum() for s in gen.sectors])), 1e-300)


def lifetime(m: StabilizerModel, h: SpectralFunction, qtilde: DressedLogical,
             coupling: str | None = None, per_decade: int = 20, max_decades: int = 12) -> LifetimeFit:
    """Decay time of the autocorrelation of ``qtilde`` from the exact reduced chain.

    The geometric time grid is extended until the curve drops below 0.1.
    """
    gen = build_reduced_generator(m, h, qtilde.Q, coupling)
    t_min = 1e-3 / total_rate_scale(gen)
    t_max = t_min * 1e3
    for _ in range(max_decades):
        times = geometric_grid(t_min, t_max, per_decade)
        vals = autocorrelation(gen, qtilde.F, times).values
        if vals[-1] < 0.1:
            break
        t_max *= 10
    return fit_lifetime(times, vals)
