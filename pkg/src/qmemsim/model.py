"""Stabilizer Hamiltonians for the Ising ring and the toric code.

Both models have ``H = -sum_i J_i S_i`` with commuting, +-1 valued Pauli
stabilizers ``S_i``.  Syndromes (excited stabilizers) are constrained by
global parity relations: the product of all bonds, of all stars, and of all
plaquettes is the identity.

Torus conventions, K x K vertices ``(r, c)`` with periodic wrap:

* horizontal edge ``h(r, c)`` joins ``(r, c)``-``(r, c+1)``, site ``1 + r*K + c``
* vertical edge ``v(r, c)`` joins ``(r, c)``-``(r+1, c)``, site ``1 + K*K + r*K + c``
* star at vertex ``(r, c)``: ``h(r,c), h(r,c-1), v(r,c), v(r-1,c)``
* plaquette at face ``(r, c)``: ``h(r,c), h(r+1,c), v(r,c), v(r,c+1)``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .pauli import DimensionError, PauliOp, multiply

ISING = "IsingRing"
KITAEV = "KitaevTorus"
KITAEV_Z = "KitaevTorusZ"  # plaquette terms only


class InvalidSizeError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class StabilizerModel:
    kind: str
    size: int
    n_qubits: int
    stabilizers: tuple[PauliOp, ...]
    stabilizer_names: tuple[str, ...]
    constraints: tuple[tuple[int, ...], ...]
    sector_names: tuple[str, ...]
    logicals: dict[str, PauliOp]
    couplings: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.couplings:
            object.__setattr__(self, "couplings", (1.0,) * len(self.stabilizers))
        if len(self.couplings) != len(self.stabilizers):
            raise ValueError("one coupling per stabilizer required")
        if any(j <= 0 for j in self.couplings):
            raise ValueError("couplings must be strictly positive")

    @property
    def n_stabilizers(self) -> int:
        return len(self.stabilizers)

    @cached_property
    def independent_basis(self) -> tuple[int, ...]:
        dropped = {c[-1] for c in self.constraints}
        return tuple(i for i in range(self.n_stabilizers) if i not in dropped)

    @cached_property
    def _reducer(self) -> "_GF2Reducer":
        return _GF2Reducer(self.n_qubits, [self.stabilizers[i] for i in self.independent_basis])

    def sector_of(self, index: int) -> int:
        for k, c in enumerate(self.constraints):
            if index in c:
                return k
        raise KeyError(index)

    def anticommuting_stabilizers(self, site: int, kind: str) -> tuple[int, ...]:
        """Indices of stabilizers flipped by the single-site Pauli ``kind`` at ``site``."""
        u = PauliOp.single(self.n_qubits, site, kind)
        bit = 1 << (site - 1)
        out = []
        for i, s in enumerate(self.stabilizers):
            if s.support & bit and not _commute(u, s):
                out.append(i)
        return tuple(out)

    def decompose(self, p: PauliOp) -> tuple[tuple[int, ...], complex] | None:
        """Write ``p = c * prod_{i in A} S_i``; return ``(A, c)`` or None."""
        if p.n_qubits != self.n_qubits:
            raise DimensionError(f"operator on {p.n_qubits} qubits, model has {self.n_qubits}")
        combo = self._reducer.solve(p)
        if combo is None:
            return None
        subset = tuple(self.independent_basis[k] for k in combo)
        prod = PauliOp.identity(self.n_qubits)
        for i in subset:
            prod = multiply(prod, self.stabilizers[i])
        coef = 1j ** ((p.phase - prod.phase) % 4)
        return subset, coef

    def energy_of_bits(self, excited: np.ndarray) -> float:
        s = 1 - 2 * np.asarray(excited, dtype=int)
        return float(-np.dot(self.couplings, s))

    def to_dict(self) -> dict:
        """JSON-compatible description: sites, stabilizer site lists, logicals."""
        return {
            "kind": self.kind,
            "size": self.size,
            "n_qubits": self.n_qubits,
            "sites": list(range(1, self.n_qubits + 1)),
            "stabilizers": [
                {"name": n, "pauli": str(s), "sites": s.sites(), "coupling": j}
                for n, s, j in zip(self.stabilizer_names, self.stabilizers, self.couplings)
            ],
            "constraints": [
                {"sector": name, "stabilizers": list(c)}
                for name, c in zip(self.sector_names, self.constraints)
            ],
            "logicals": {k: {"pauli": str(v), "sites": v.sites()} for k, v in self.logicals.items()},
            "independent_basis": list(self.independent_basis),
        }


def _commute(a: PauliOp, b: PauliOp) -> bool:
    return ((a.x_mask & b.z_mask) ^ (a.z_mask & b.x_mask)).bit_count() % 2 == 0


class _GF2Reducer:
    """Row-reduced generators over GF(2) with combination tracking."""

    def __init__(self, n: int, generators: Sequence[PauliOp]):
        self.n = n
        self.rows: list[tuple[int, int, int]] = []  # (vector, pivot bit, combo mask)
        for k, g in enumerate(generators):
            v, combo = self._vec(g), 1 << k
            v, combo = self._reduce(v, combo)
            if v == 0:
                raise ValueError("generators are not independent")
            pivot = v.bit_length() - 1
            self.rows.append((v, pivot, combo))
            self.rows.sort(key=lambda r: -r[1])

    def _vec(self, p: PauliOp) -> int:
        return p.x_mask | (p.z_mask << self.n)

    def _reduce(self, v: int, combo: int) -> tuple[int, int]:
        for rv, pivot, rc in self.rows:
            if v >> pivot & 1:
                v ^= rv
                combo ^= rc
        return v, combo

    @property
    def rank(self) -> int:
        return len(self.rows)

    def solve(self, p: PauliOp) -> tuple[int, ...] | None:
        v, combo = self._reduce(self._vec(p), 0)
        if v:
            return None
        return tuple(k for k in range(combo.bit_length()) if combo >> k & 1)


def gf2_rank(ops: Sequence[PauliOp]) -> int:
    """Rank of the symplectic vectors of ``ops`` over GF(2)."""
    if not ops:
        return 0
    n = ops[0].n_qubits
    pivots: dict[int, int] = {}
    for p in ops:
        v = p.x_mask | (p.z_mask << n)
        while v:
            top = v.bit_length() - 1
            if top in pivots:
                v ^= pivots[top]
            else:
                pivots[top] = v
                break
    return len(pivots)


# ---------------------------------------------------------------------------
# Builders


def build_ising_ring(N: int, couplings: Sequence[float] | None = None) -> StabilizerModel:
    if N < 3:
        raise InvalidSizeError(f"Ising ring needs N >= 3, got {N}")
    bonds = tuple(PauliOp.from_sites(N, (j, j % N + 1), "Z") for j in range(1, N + 1))
    names = tuple(f"b{j}" for j in range(1, N + 1))
    ymask = 1
    logicals = {
        "X": PauliOp.from_sites(N, range(1, N + 1), "X"),
        "Y": PauliOp(N, (1 << N) - 1, ymask),
        "Z": PauliOp.single(N, 1, "Z"),
    }
    return StabilizerModel(
        kind=ISING,
        size=N,
        n_qubits=N,
        stabilizers=bonds,
        stabilizer_names=names,
        constraints=(tuple(range(N)),),
        sector_names=("bond",),
        logicals=logicals,
        couplings=tuple(couplings) if couplings is not None else (),
    )


def torus_h(K: int, r: int, c: int) -> int:
    return 1 + (r % K) * K + (c % K)


def torus_v(K: int, r: int, c: int) -> int:
    return 1 + K * K + (r % K) * K + (c % K)


def star_sites(K: int, r: int, c: int) -> tuple[int, ...]:
    return (torus_h(K, r, c), torus_h(K, r, c - 1), torus_v(K, r, c), torus_v(K, r - 1, c))


def plaquette_sites(K: int, r: int, c: int) -> tuple[int, ...]:
    return (torus_h(K, r, c), torus_h(K, r + 1, c), torus_v(K, r, c), torus_v(K, r, c + 1))


def build_kitaev_torus(K: int, couplings: Sequence[float] | None = None,
                       include_stars: bool = True) -> StabilizerModel:
    """Toric code on a K x K torus, ``N = 2 K^2`` spins.

    Stars come first (indices ``0 .. K^2-1``), plaquettes after.  With
    ``include_stars=False`` only the plaquette terms are kept.
    """
    if K < 2:
        raise InvalidSizeError(f"torus needs K >= 2, got {K}")
    N = 2 * K * K
    cells = [(r, c) for r in range(K) for c in range(K)]
    stars = [PauliOp.from_sites(N, star_sites(K, r, c), "X") for r, c in cells]
    plaqs = [PauliOp.from_sites(N, plaquette_sites(K, r, c), "Z") for r, c in cells]
    logicals = {
        "Z1": PauliOp.from_sites(N, [torus_h(K, 0, c) for c in range(K)], "Z"),
        "X1": PauliOp.from_sites(N, [torus_h(K, r, 0) for r in range(K)], "X"),
        "Z2": PauliOp.from_sites(N, [torus_v(K, r, 0) for r in range(K)], "Z"),
        "X2": PauliOp.from_sites(N, [torus_v(K, 0, c) for c in range(K)], "X"),
    }
    M = K * K
    if include_stars:
        stabs = tuple(stars + plaqs)
        names = tuple([f"s{r},{c}" for r, c in cells] + [f"p{r},{c}" for r, c in cells])
        constraints = (tuple(range(M)), tuple(range(M, 2 * M)))
        sectors = ("star", "plaquette")
        kind = KITAEV
    else:
        stabs = tuple(plaqs)
        names = tuple(f"p{r},{c}" for r, c in cells)
        constraints = (tuple(range(M)),)
        sectors = ("plaquette",)
        kind = KITAEV_Z
    return StabilizerModel(
        kind=kind,
        size=K,
        n_qubits=N,
        stabilizers=stabs,
        stabilizer_names=names,
        constraints=constraints,
        sector_names=sectors,
        logicals=logicals,
        couplings=tuple(couplings) if couplings is not None else (),
    )


def build_model(kind: str, size: int, couplings: Sequence[float] | None = None) -> StabilizerModel:
    aliases = {"ising": ISING, ISING.lower(): ISING, "kitaev": KITAEV, KITAEV.lower(): KITAEV,
               "kitaev_z": KITAEV_Z, KITAEV_Z.lower(): KITAEV_Z}
    k = aliases.get(kind.lower())
    if k == ISING:
        return build_ising_ring(size, couplings)
    if k == KITAEV:
        return build_kitaev_torus(size, couplings)
    if k == KITAEV_Z:
        return build_kitaev_torus(size, couplings, include_stars=False)
    raise ValueError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# Syndromes and expectations


@dataclass(frozen=True)
class SyndromeState:
    """Excitation pattern over all stabilizers of a model (True = eigenvalue -1)."""

    excited: tuple[bool, ...]

    @classmethod
    def from_indices(cls, model: StabilizerModel, indices: Sequence[int]) -> "SyndromeState":
        bits = [False] * model.n_stabilizers
        for i in indices:
            bits[i] = not bits[i]
        return cls(tuple(bits))

    @classmethod
    def vacuum(cls, model: StabilizerModel) -> "SyndromeState":
        return cls((False,) * model.n_stabilizers)

    def as_array(self) -> np.ndarray:
        return np.array(self.excited, dtype=bool)

    def n_excited(self) -> int:
        return sum(self.excited)

    def validate(self, model: StabilizerModel) -> None:
        if len(self.excited) != model.n_stabilizers:
            raise InvalidStateError("syndrome length does not match model")
        for name, c in zip(model.sector_names, model.constraints):
            if sum(self.excited[i] for i in c) % 2:
                raise InvalidStateError(f"odd number of excitations in {name} sector")


@dataclass(frozen=True)
class StabilizerMonomialExpectation:
    value: complex | float
    reducible: bool


def ground_expectation(m: StabilizerModel, p: PauliOp) -> StabilizerMonomialExpectation:
    """Expectation in the symmetric ground state (all stabilizers +1, logicals unbiased)."""
    dec = m.decompose(p)
    if dec is None:
        return StabilizerMonomialExpectation(0.0, False)
    return StabilizerMonomialExpectation(_real_if_possible(dec[1]), True)


def _real_if_possible(c: complex) -> complex | float:
    c = complex(c)
    return c.real if c.imag == 0 else c


def _subset_expectation(m: StabilizerModel, subset: Sequence[int], beta: float) -> float:
    """``<prod_{i in subset} S_i>`` in the constrained Gibbs product measure."""
    chosen = set(subset)
    t = [math.tanh(beta * j) for j in m.couplings]
    value = 1.0
    covered: set[int] = set()
    for c in m.constraints:
        covered.update(c)
        inside = math.prod(t[i] for i in c if i in chosen)
        outside = math.prod(t[i] for i in c if i not in chosen)
        value *= (inside + outside) / (1.0 + inside * outside)
    for i in chosen - covered:
        value *= t[i]
    return value


def gibbs_expectation(m: StabilizerModel, p: PauliOp, beta: float) -> complex | float:
    """``tr(rho_beta p)`` for the finite-volume Gibbs state of ``H = -sum J_i S_i``."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    dec = m.decompose(p)
    if dec is None:
        return 0.0
    subset, coef = dec
    return _real_if_possible(coef * _subset_expectation(m, subset, beta))


def hamiltonian_energy(m: StabilizerModel, syndrome: SyndromeState) -> float:
    syndrome.validate(m)
    return m.energy_of_bits(syndrome.as_array())


def stabilizer_flip_energy(m: StabilizerModel, pair: Sequence[int], excited: Sequence[bool]) -> float:
    """Energy change ``E_after - E_before`` when the stabilizers in ``pair`` toggle."""
    de = 0.0
    for i, e in zip(pair, excited):
        # unexcited -> excited costs 2J, the reverse releases 2J
        de += 2 * m.couplings[i] * (-1 if e else 1)
    return de
