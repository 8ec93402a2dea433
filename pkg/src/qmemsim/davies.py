"""Davies (weak-coupling) Lindblad generators for stabilizer Hamiltonians.

Observables are dense ``2^N x 2^N`` matrices in the computational basis;
jump operators are scipy sparse matrices with at most four nonzeros per
row, so the generator is applied without ever forming the superoperator.
The Heisenberg-picture generator is

    L(X) = i[H, X] + sum_k h(w_k) (S_k^+ X S_k - 1/2 {S_k^+ S_k, X})

where each coupling operator ``sigma_j`` is split into Fourier components
``S(w)`` by the local pattern of the two stabilizers it flips.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse

from . import krylov
from .model import ISING, KITAEV, KITAEV_Z, StabilizerModel, stabilizer_flip_energy
from .pauli import PauliOp, PauliSum, _reverse_bits

MAX_QUBITS = 10
MAX_DENSE_SUPEROP_QUBITS = 6
FREQ_TOL = 1e-9


class CapacityError(ValueError):
    pass


class KMSViolationError(ValueError):
    pass


def _fkey(w: float) -> float:
    return round(w / FREQ_TOL) * FREQ_TOL


@dataclass(frozen=True)
class SpectralFunction:
    """Bath rates ``h(w)`` on a finite set of Bohr frequencies.

    Construction rejects tables that violate ``h(-w) = exp(-beta w) h(w)``.
    """

    beta: float
    values: dict[float, float]

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        vals = {_fkey(float(w)): float(h) for w, h in self.values.items()}
        object.__setattr__(self, "values", vals)
        for w, h in vals.items():
            if h < 0:
                raise KMSViolationError(f"negative rate h({w}) = {h}")
            partner = vals.get(_fkey(-w))
            if partner is None:
                raise KMSViolationError(f"h({-w}) missing for stored frequency {w}")
            expected = math.exp(-self.beta * w) * h
            if not math.isclose(partner, expected, rel_tol=1e-10, abs_tol=1e-300):
                raise KMSViolationError(f"h({-w}) = {partner} but exp(-beta*{w}) h({w}) = {expected}")

    @classmethod
    def thermal(cls, beta: float, omegas: Iterable[float], gamma: float = 1.0,
                gamma0: float = 1.0) -> "SpectralFunction":
        """Default family: ``h(w) = gamma`` for ``w > 0``, ``gamma exp(beta w)`` below, ``gamma0`` at 0."""
        vals = {}
        for w in omegas:
            w = abs(float(w))
            if _fkey(w) == 0:
                vals[0.0] = gamma0
            else:
                vals[w] = gamma
                vals[-w] = gamma * math.exp(-beta * w)
        return cls(beta, vals)

    @classmethod
    def for_model(cls, model: StabilizerModel, beta: float, gamma: float = 1.0,
                  gamma0: float = 1.0, coupling: str | None = None) -> "SpectralFunction":
        return cls.thermal(beta, bohr_frequencies(model, coupling), gamma, gamma0)

    def __call__(self, w: float) -> float:
        try:
            return self.values[_fkey(w)]
        except KeyError:
            raise KeyError(f"no bath rate stored for Bohr frequency {w}") from None

    def to_dict(self) -> dict:
        return {"beta": self.beta, "values": {repr(k): v for k, v in sorted(self.values.items())}}


# ---------------------------------------------------------------------------
# Jump operators


def default_coupling(model: StabilizerModel) -> str:
    return "both" if model.kind == KITAEV else "x"


def coupling_kinds(model: StabilizerModel, coupling: str | None) -> tuple[str, ...]:
    coupling = coupling or default_coupling(model)
    kinds = {"x": ("X",), "z": ("Z",), "both": ("X", "Z")}.get(coupling)
    if kinds is None:
        raise ValueError(f"unknown coupling {coupling!r}")
    allowed = {ISING: {"x"}, KITAEV: {"x", "z", "both"}, KITAEV_Z: {"x"}}[model.kind]
    if coupling not in allowed:
        raise ValueError(f"coupling {coupling!r} unsupported for {model.kind}")
    return kinds


def local_projection(model: StabilizerModel, pair: Sequence[int],
                     patterns: Iterable[tuple[bool, bool]]) -> PauliSum:
    """Sum over ``patterns`` of ``prod_i (1 +- S_i)/2``; ``True`` selects eigenvalue -1."""
    n = model.n_qubits
    out = PauliSum(n)
    for pat in patterns:
        term = PauliSum.identity(n)
        for i, excited in zip(pair, pat):
            s = PauliSum.from_op(model.stabilizers[i], -0.5 if excited else 0.5)
            term = term * (PauliSum.identity(n, 0.5) + s)
        out = out + term
    return out


PATTERNS = ((False, False), (False, True), (True, False), (True, True))


@dataclass(frozen=True)
class Jump:
    site: int
    kind: str               # 'X' or 'Z' coupling
    omega: float
    pair: tuple[int, int]   # stabilizers flipped by the coupling
    patterns: tuple[tuple[bool, bool], ...]  # local patterns the jump acts on
    op: PauliSum            # sigma_j * projection

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        return self.op.to_sparse().tocsr()


@dataclass
class DaviesJumpSet:
    model: StabilizerModel
    coupling: str
    jumps: list[Jump] = field(default_factory=list)

    @property
    def frequencies(self) -> list[float]:
        return sorted({j.omega for j in self.jumps})

    def for_site(self, site: int, kind: str) -> list[Jump]:
        return [j for j in self.jumps if j.site == site and j.kind == kind]

    def projection(self, site: int, kind: str, label: str) -> PauliSum:
        """``P^0``, ``P^+`` (both excited) or ``P^-`` (both unexcited) at ``site``.

        For star-flipping couplings these are the ``R`` projections.
        """
        pair = self.model.anticommuting_stabilizers(site, kind)
        pats = {"0": [(False, True), (True, False)], "+": [(True, True)], "-": [(False, False)]}[label]
        return local_projection(self.model, pair, pats)


def build_jump_set(model: StabilizerModel, coupling: str | None = None) -> DaviesJumpSet:
    """Fourier components of every coupling operator, grouped by Bohr frequency."""
    coupling = coupling or default_coupling(model)
    kinds = coupling_kinds(model, coupling)
    js = DaviesJumpSet(model, coupling)
    n = model.n_qubits
    for kind in kinds:
        for site in range(1, n + 1):
            pair = model.anticommuting_stabilizers(site, kind)
            if len(pair) != 2:
                raise ValueError(f"sigma_{kind.lower()} at site {site} flips {len(pair)} stabilizers, expected 2")
            groups: dict[float, list[tuple[bool, bool]]] = {}
            for pat in PATTERNS:
                # component S(w) lowers the energy by w
                w = -stabilizer_flip_energy(model, pair, pat)
                groups.setdefault(_fkey(w), []).append(pat)
            sigma = PauliSum.from_op(PauliOp.single(n, site, kind))
            for w, pats in sorted(groups.items()):
                op = sigma * local_projection(model, pair, pats)
                js.jumps.append(Jump(site, kind, w, tuple(pair), tuple(pats), op))
    return js


def bohr_frequencies(model: StabilizerModel, coupling: str | None = None) -> list[float]:
    out = set()
    for kind in coupling_kinds(model, coupling):
        for site in range(1, model.n_qubits + 1):
            pair = model.anticommuting_stabilizers(site, kind)
            for pat in PATTERNS:
                out.add(_fkey(-stabilizer_flip_energy(model, pair, pat)))
    return sorted(out)


# ---------------------------------------------------------------------------
# Generator


def hamiltonian_sum(model: StabilizerModel) -> PauliSum:
    h = PauliSum(model.n_qubits)
    for s, j in zip(model.stabilizers, model.couplings):
        h = h + PauliSum.from_op(s, -j)
    return h


def _z_type_bits(model: StabilizerModel, idx: int, hadamard: bool) -> int | None:
    """Basis-index mask of a stabilizer that is diagonal in the chosen frame."""
    st = model.stabilizers[idx]
    if hadamard:
        if st.z_mask:
            return None
        mask = st.x_mask
    else:
        if st.x_mask:
            return None
        mask = st.z_mask
    return _reverse_bits(mask, model.n_qubits)


def _parity(values: np.ndarray, mask: int) -> np.ndarray:
    v = values & mask
    out = np.zeros_like(values)
    while np.any(v):
        out ^= v & 1
        v >>= 1
    return out.astype(bool)


def _walsh_hadamard(X: np.ndarray, axis: int) -> np.ndarray:
    """Normalised fast Walsh-Hadamard transform along one axis of a square array."""
    Y = np.moveaxis(X, axis, 0)
    d = Y.shape[0]
    rest = Y.shape[1:]
    h = 1
    while h < d:
        Y = Y.reshape(d // (2 * h), 2, h, *rest)
        Y = np.stack((Y[:, 0] + Y[:, 1], Y[:, 0] - Y[:, 1]), axis=1)
        h *= 2
    Y = Y.reshape(d, *rest) / d ** 0.5
    return np.moveaxis(Y, 0, axis)


class _Family:
    """All jumps of one coupling kind, in the frame where their projections are diagonal.

    In that frame the coupling is a bit-flip permutation ``perm`` and every
    Fourier component is that permutation times a 0/1 diagonal, so

        sum_w h(w) S(w)^+ X S(w) = W * X[perm][:, perm]

    with ``W[a, b] = h(w(a))`` when ``a`` and ``b`` share a frequency class.
    """

    def __init__(self, model: StabilizerModel, jumps: DaviesJumpSet, kind: str, h: SpectralFunction):
        self.hadamard = kind == "Z"
        n = model.n_qubits
        dim = 1 << n
        idx = np.arange(dim, dtype=np.int64)
        self.perms, self.labels, self.rates = [], [], []
        self.k_total = np.zeros(dim)
        for site in range(1, n + 1):
            comps = jumps.for_site(site, kind)
            if not comps:
                continue
            pair = comps[0].pair
            masks = [_z_type_bits(model, i, self.hadamard) for i in pair]
            if any(m is None for m in masks):
                raise NotImplementedError("projections not diagonal in a single Pauli frame")
            ex = [_parity(idx, m) for m in masks]
            label = np.empty(dim, dtype=np.int64)
            rate = np.empty(dim)
            for c, jmp in enumerate(comps):
                sel = np.zeros(dim, dtype=bool)
                for pat in jmp.patterns:
                    sel |= (ex[0] == pat[0]) & (ex[1] == pat[1])
                label[sel] = c
                rate[sel] = h(jmp.omega)
            self.perms.append(idx ^ _reverse_bits(1 << (site - 1), n))
            self.labels.append(label)
            self.rates.append(rate)
            self.k_total += rate  # diagonal of sum_w h(w) S^+ S, same summation order as below
        self.dim = dim
        # one flat gather per site: X[perm][:, perm] == X.ravel()[flat]
        self.flat = [(p[:, None] * dim + p[None, :]).ravel() for p in self.perms]
        self.weights = None
        if dim <= 256:
            self.weights = [self._weight(k).ravel() for k in range(len(self.perms))]
        self.k_sum = -0.5 * (self.k_total[:, None] + self.k_total[None, :])
    def _weight(self, k: int) -> np.ndarray:
        lab, r = self.labels[k], self.rates[k]
        return np.where(lab[:, None] == lab[None, :], r[:, None], 0.0)

    def _conj(self, X: np.ndarray) -> np.ndarray:
        """``Hd X Hd`` for the n-qubit Hadamard ``Hd``."""
        return _walsh_hadamard(_walsh_hadamard(X, 0), 1)

    def apply(self, X: np.ndarray) -> np.ndarray:
        if self.hadamard:
            X = self._conj(X)
        flatX = X.ravel()
        acc = np.zeros(flatX.size, dtype=np.result_type(X.dtype, float))
        for k, idx in enumerate(self.flat):
            W = self.weights[k] if self.weights is not None else self._weight(k).ravel()
            acc += W * flatX[idx]
        # subtract after the jump sum so that L(1) cancels exactly
        out = acc.reshape(X.shape) + self.k_sum * X
        if self.hadamard:
            out = self._conj(out)
        return out


class DaviesGenerator:
    """Matrix-free Heisenberg-picture Davies generator for one model and bath."""

    def __init__(self, model: StabilizerModel, jumps: DaviesJumpSet, h: SpectralFunction):
        if model.n_qubits > MAX_QUBITS:
            raise CapacityError(f"dense observables limited to {MAX_QUBITS} qubits, model has {model.n_qubits}")
        self.model = model
        self.jumps = jumps
        self.h = h
        self.dim = 1 << model.n_qubits
        self.H = hamiltonian_sum(model).to_sparse().tocsr()
        self.rates = np.array([h(j.omega) for j in jumps.jumps])
        kinds = sorted({j.kind for j in jumps.jumps})
        try:
            self.families = [_Family(model, jumps, k, h) for k in kinds]
        except NotImplementedError:
            self.families = None
            self.S = [j.matrix for j in jumps.jumps]
            self.Sd = [s.conj().T.tocsr() for s in self.S]
            self.SdS = [(sd @ s).tocsr() for s, sd in zip(self.S, self.Sd)]

    @property
    def n_qubits(self) -> int:
        return self.model.n_qubits

    def dissipative(self, X: np.ndarray) -> np.ndarray:
        if self.families is not None:
            out = self.families[0].apply(X)
            for fam in self.families[1:]:
                out += fam.apply(X)
            return out
        # generic sparse path; per-jump grouping keeps L(1) = 0 exact for dyadic jumps
        out = np.zeros_like(X, dtype=complex)
        for r, s, sd, sds in zip(self.rates, self.S, self.Sd, self.SdS):
            if r == 0.0:
                continue
            jump = sd @ (s.T @ X.T).T
            anti = sds @ X + (sds.T @ X.T).T
            out += r * jump - (0.5 * r) * anti
        return out

    def delta(self, X: np.ndarray) -> np.ndarray:
        """``[H, X]``."""
        return self.H @ X - (self.H.T @ X.T).T

    def hamiltonian_part(self, X: np.ndarray) -> np.ndarray:
        return 1j * self.delta(X)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self.hamiltonian_part(X) + self.dissipative(X)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self(x.reshape(self.dim, self.dim)).reshape(-1)

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.H.toarray())

    def gibbs_state(self, beta: float | None = None) -> np.ndarray:
        beta = self.h.beta if beta is None else beta
        e, v = self._eig
        w = np.exp(-beta * (e - e.min()))
        w /= w.sum()
        return (v * w) @ v.conj().T

    def superoperator(self) -> np.ndarray:
        """Dense matrix of ``L`` on row-major ``vec(X)``; small systems only."""
        if self.n_qubits > MAX_DENSE_SUPEROP_QUBITS:
            raise CapacityError(f"dense superoperator limited to {MAX_DENSE_SUPEROP_QUBITS} qubits")
        d2 = self.dim * self.dim
        out = np.empty((d2, d2), dtype=complex)
        e = np.zeros(d2, dtype=complex)
        for k in range(d2):
            e[k] = 1.0
            out[:, k] = self.matvec(e)
            e[k] = 0.0
        return out

    def anorm(self) -> float:
        """Cheap upper bound on the operator norm of ``L``."""
        h = float(np.abs(self.H).sum(axis=1).max())
        return 2 * h + 2 * float(self.rates.sum()) or 1.0


def apply_lindblad(model: StabilizerModel, jumps: DaviesJumpSet, h: SpectralFunction,
                   X: np.ndarray) -> np.ndarray:
    return DaviesGenerator(model, jumps, h)(X)


def propagate_observable(gen: DaviesGenerator, X: np.ndarray, t: float, tol: float = 1e-12) -> np.ndarray:
    """``exp(t L)(X)`` via the Krylov exponential action."""
    if t < 0:
        raise ValueError("t must be non-negative")
    X = np.asarray(X, dtype=complex)
    if t == 0:
        return X.copy()
    y = krylov.expv(t, gen.matvec, X.reshape(-1), tol=tol, anorm=gen.anorm())
    return y.reshape(gen.dim, gen.dim)


# ---------------------------------------------------------------------------
# Structural checks


def liouville_inner(rho: np.ndarray, X: np.ndarray, Y: np.ndarray) -> complex:
    """``<X, Y>_beta = tr(rho X^+ Y)``."""
    return complex(np.trace(rho @ X.conj().T @ Y))


@dataclass
class DetailedBalanceReport:
    unitality: float
    stationarity: float
    delta_commutator: float
    self_adjoint_asymmetry: float
    n_basis: int
    n_pairs: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _random_observable(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def check_detailed_balance(gen: DaviesGenerator, n_pairs: int = 20, seed: int = 0,
                           full_basis_max_qubits: int = 4) -> DetailedBalanceReport:
    """Residuals of unitality, Gibbs stationarity, ``[delta, L_dis] = 0`` and
    self-adjointness of ``L_dis`` in the Liouville inner product."""
    if gen.n_qubits > MAX_QUBITS:
        raise CapacityError(f"limited to {MAX_QUBITS} qubits")
    rng = np.random.default_rng(seed)
    dim = gen.dim
    rho = gen.gibbs_state()
    I = np.eye(dim, dtype=complex)
    unitality = float(np.abs(gen(I)).max())

    if gen.n_qubits <= full_basis_max_qubits:
        basis = []
        for a in range(dim):
            for b in range(dim):
                E = np.zeros((dim, dim), dtype=complex)
                E[a, b] = 1.0
                basis.append(E)
    else:
        basis = [_random_observable(rng, dim) for _ in range(n_pairs)]

    comm = 0.0
    stat = 0.0
    for X in basis:
        Ld = gen.dissipative(X)
        r = gen.delta(Ld) - gen.dissipative(gen.delta(X))
        comm = max(comm, float(np.abs(r).max()) / max(1.0, float(np.abs(X).max())))
        stat = max(stat, abs(np.trace(rho @ gen(X))))
    asym = 0.0
    for _ in range(n_pairs):
        X, Y = _random_observable(rng, dim), _random_observable(rng, dim)
        lhs = liouville_inner(rho, Y, gen.dissipative(X))
        rhs = liouville_inner(rho, gen.dissipative(Y), X)
        scale = max(1.0, abs(lhs))
        asym = max(asym, abs(lhs - rhs) / scale)
    return DetailedBalanceReport(unitality, float(stat), comm, asym, len(basis), n_pairs)


def commutant_dimension(ops: Sequence[PauliOp | PauliSum], n_qubits: int | None = None,
                        max_basis: int = 1 << 14) -> int:
    """Dimension of the joint commutant of ``ops`` in the full matrix algebra.

    Monomials cut the Pauli basis down to the commuting subgroup (their
    adjoint action is diagonal in it); the remaining polynomials are handled
    by a rank computation restricted to that span.
    """
    if not ops and n_qubits is None:
        raise ValueError("need n_qubits when ops is empty")
    n = n_qubits if n_qubits is not None else ops[0].n_qubits
    monos: list[PauliOp] = []
    polys: list[PauliSum] = []
    for op in ops:
        if isinstance(op, PauliOp):
            monos.append(op)
        elif len(op.terms) == 1:
            (x, z), = op.terms
            monos.append(PauliOp(n, x, z))
        elif len(op.terms) > 1:
            polys.append(op)
    basis = _commuting_paulis(n, monos, max_basis)
    if not polys:
        return len(basis)
    rows: dict[tuple[int, int], int] = {}
    entries: list[tuple[int, int, complex]] = []
    for col, key in enumerate(basis):
        P = PauliSum(n, {key: 1.0})
        for A in polys:
            for k, c in A.commutator(P).terms.items():
                r = rows.setdefault((id(A), *k), len(rows))
                entries.append((r, col, c))
    if not entries:
        return len(basis)
    r, c, v = zip(*entries)
    M = sparse.coo_matrix((v, (r, c)), shape=(len(rows), len(basis))).toarray()
    return len(basis) - int(np.linalg.matrix_rank(M, tol=1e-9))


def _commuting_paulis(n: int, monos: Sequence[PauliOp], max_basis: int) -> list[tuple[int, int]]:
    """All unsigned Paulis commuting with every monomial, via a GF(2) null space."""
    # constraint row for monomial (x, z) acting on candidate (x', z'): x.z' + z.x'
    rows = [(m.z_mask | (m.x_mask << n)) for m in monos]
    pivots: dict[int, int] = {}
    for v in rows:
        while v:
            top = v.bit_length() - 1
            if top in pivots:
                v ^= pivots[top]
            else:
                pivots[top] = v
                break
    # reduced row echelon form
    for top in sorted(pivots):
        for other in list(pivots):
            if other != top and pivots[other] >> top & 1:
                pivots[other] ^= pivots[top]
    free = [b for b in range(2 * n) if b not in pivots]
    if 1 << len(free) > max_basis:
        raise CapacityError(f"commuting subgroup has 2^{len(free)} elements, limit {max_basis}")
    null_vectors = []
    for f in free:
        vec = 1 << f
        for top, row in pivots.items():
            if row >> f & 1:
                vec |= 1 << top
        null_vectors.append(vec)
    out = []
    for combo in range(1 << len(free)):
        v = 0
        for k, nv in enumerate(null_vectors):
            if combo >> k & 1:
                v ^= nv
        x, z = v & ((1 << n) - 1), v >> n
        out.append((x, z))
    return out


def commutant_dimension_dense(mats: Sequence[np.ndarray]) -> int:
    """Dense oracle: null space of ``sum_A ad_A^+ ad_A`` for small dimensions."""
    d = mats[0].shape[0]
    I = np.eye(d)
    G = np.zeros((d * d, d * d), dtype=complex)
    for A in mats:
        A = np.asarray(A.toarray() if sparse.issparse(A) else A, dtype=complex)
        ad = np.kron(A, I) - np.kron(I, A.T)  # row-major vec of AX - XA
        G += ad.conj().T @ ad
    ev = np.linalg.eigvalsh(G)
    return int(np.sum(ev < 1e-8 * max(1.0, ev.max())))


def coupling_operators(model: StabilizerModel, coupling: str | None = None) -> list[PauliOp]:
    return [PauliOp.single(model.n_qubits, j, k)
            for k in coupling_kinds(model, coupling) for j in range(1, model.n_qubits + 1)]


def ergodicity_dimension(model: StabilizerModel, coupling: str | None = None) -> int:
    """Commutant dimension of the coupling operators together with ``H``."""
    return commutant_dimension([*coupling_operators(model, coupling), hamiltonian_sum(model)])


@dataclass
class LocalityReport:
    ok: bool
    max_order: int
    support_sizes: list[int]
    neighbourhood_size: int
    matches_restricted: bool


def neighbourhood(model: StabilizerModel, support: int) -> int:
    """Union of ``support`` with every stabilizer touching it (one boundary layer)."""
    out = support
    for s in model.stabilizers:
        if s.support & support:
            out |= s.support
    return out


def locality_report(model: StabilizerModel, X: PauliOp, k: int = 6) -> LocalityReport:
    """Symbolic check that ``delta^k(X)`` stays inside one stabilizer layer."""
    lam1 = neighbourhood(model, X.support)
    H = hamiltonian_sum(model)
    H_local = PauliSum(model.n_qubits, {key: c for key, c in H.terms.items()
                                        if (key[0] | key[1]) & ~lam1 == 0})
    cur = PauliSum.from_op(X)
    cur_local = cur
    ok, same, sizes = True, True, []
    for _ in range(k):
        cur = H.commutator(cur)
        cur_local = H_local.commutator(cur_local)
        sizes.append(cur.support.bit_count())
        if cur.support & ~lam1:
            ok = False
        diff = cur - cur_local
        if diff.terms and max(abs(v) for v in diff.terms.values()) > 1e-9 * max(1.0, *(abs(v) for v in cur.terms.values())):
            same = False
    return LocalityReport(ok and same, k, sizes, lam1.bit_count(), same)


def check_locality(model: StabilizerModel, X: PauliOp, k: int = 6) -> bool:
    return locality_report(model, X, k).ok


# ---------------------------------------------------------------------------
# Syndrome-diagonal operators and exact-diagonalization oracle


class SyndromeBasis:
    """Joint eigenbasis of all stabilizers, with the syndrome of every vector."""

    def __init__(self, model: StabilizerModel, seed: int = 7):
        if model.n_qubits > MAX_QUBITS:
            raise CapacityError(f"limited to {MAX_QUBITS} qubits")
        rng = np.random.default_rng(seed)
        weights = 1.0 + rng.random(model.n_stabilizers)
        dim = 1 << model.n_qubits
        R = sparse.csr_matrix((dim, dim), dtype=complex)
        mats = [s.to_sparse() for s in model.stabilizers]
        for w, m in zip(weights, mats):
            R = R + w * m
        _, V = np.linalg.eigh(R.toarray())
        self.V = V
        diag = np.stack([np.real(np.einsum("ij,ij->j", V.conj(), m @ V)) for m in mats], axis=1)
        self.bits = diag < 0  # (dim, M): True where the stabilizer is -1

    def operator(self, values: np.ndarray) -> np.ndarray:
        """``sum_eta G(eta) Pi_eta`` given ``G`` on every basis vector's syndrome."""
        return (self.V * np.asarray(values)) @ self.V.conj().T

    def lift(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return self.operator(fn(self.bits))


@dataclass
class EDOracle:
    """Numbers measured by dense diagonalization, to set against nominal labels."""

    bohr_frequencies: list[float]
    level_step: float
    levels: list[float]
    star_or_bond_expectation: float
    n_qubits: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ed_oracle(model: StabilizerModel, beta: float, coupling: str | None = None) -> EDOracle:
    if model.n_qubits > MAX_QUBITS:
        raise CapacityError(f"limited to {MAX_QUBITS} qubits")
    H = hamiltonian_sum(model).to_sparse().toarray()
    e, v = np.linalg.eigh(H)
    levels = sorted({round(x, 9) for x in e})
    step = min(b - a for a, b in zip(levels, levels[1:])) if len(levels) > 1 else 0.0
    freqs = set()
    for op in coupling_operators(model, coupling):
        m = v.conj().T @ op.to_dense() @ v
        a, b = np.nonzero(np.abs(m) > 1e-9)
        # S(w) lowers energy by w: w = E_initial - E_final
        freqs.update(round(float(e[bb] - e[aa]), 9) for aa, bb in zip(a, b))
    w = np.exp(-beta * (e - e.min()))
    rho = (v * (w / w.sum())) @ v.conj().T
    s0 = model.stabilizers[0].to_dense()
    return EDOracle(sorted(freqs), float(step), [float(x) for x in levels],
                    float(np.real(np.trace(rho @ s0))), model.n_qubits)


def propagate_many(gen: DaviesGenerator, X: np.ndarray, times: Sequence[float],
                   tol: float = 1e-12) -> list[np.ndarray]:
    """``exp(t L)(X)`` at each of ``times`` (sorted), stepping from one to the next."""
    out, cur, t_prev = [], np.asarray(X, dtype=complex), 0.0
    for t in times:
        if t < t_prev:
            raise ValueError("times must be sorted")
        cur = propagate_observable(gen, cur, t - t_prev, tol)
        out.append(cur)
        t_prev = t
    return out


def autocorrelation_full(gen: DaviesGenerator, X: np.ndarray, times: Sequence[float],
                         tol: float = 1e-12) -> np.ndarray:
    """``<X, exp(tL)(X)>_beta`` from the full generator."""
    rho = gen.gibbs_state()
    return np.array([liouville_inner(rho, X, Xt).real for Xt in propagate_many(gen, X, times, tol)])
