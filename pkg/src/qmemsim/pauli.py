"""Pauli monomials on N qubits in binary-symplectic form.

A monomial is stored as ``i**k * P_1 (x) ... (x) P_N`` where each factor is
one of I, X, Y, Z chosen by the bit pair ``(x_j, z_j)``: (0,0)=I, (1,0)=X,
(0,1)=Z, (1,1)=Y.  Masks are Python ints, bit ``j-1`` carries site ``j``,
so commutation and products reduce to popcounts over whole words.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

_PHASE_STR = {0: "", 1: "i ", 2: "-", 3: "-i "}
_PHASE_VALUE = (1, 1j, -1, -1j)
_TOKEN = re.compile(r"^([XYZI])(\d+)$")


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


def _popcount(v: int) -> int:
    return v.bit_count()


@dataclass(frozen=True)
class PauliOp:
    n_qubits: int
    x_mask: int = 0
    z_mask: int = 0
    phase: int = 0  # exponent k of i**k

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        full = (1 << self.n_qubits) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise ValueError("mask has bits beyond n_qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PauliOp":
        return cls(n)

    @classmethod
    def single(cls, n: int, site: int, kind: str) -> "PauliOp":
        """Single-site Pauli ``kind`` in {'X','Y','Z'} on 1-based ``site``."""
        if not 1 <= site <= n:
            raise ValueError(f"site {site} outside 1..{n}")
        bit = 1 << (site - 1)
        kind = kind.upper()
        x = bit if kind in "XY" else 0
        z = bit if kind in "ZY" else 0
        if kind not in ("X", "Y", "Z"):
            raise ValueError(f"unknown Pauli {kind!r}")
        return cls(n, x, z)

    @classmethod
    def from_sites(cls, n: int, sites: Iterable[int], kind: str) -> "PauliOp":
        """Product of the same single-site Pauli over 1-based ``sites``."""
        mask = 0
        for s in sites:
            if not 1 <= s <= n:
                raise ValueError(f"site {s} outside 1..{n}")
            mask ^= 1 << (s - 1)
        kind = kind.upper()
        if kind == "X":
            return cls(n, mask, 0)
        if kind == "Z":
            return cls(n, 0, mask)
        if kind == "Y":
            return cls(n, mask, mask)
        raise ValueError(f"unknown Pauli {kind!r}")

    @classmethod
    def from_string(cls, text: str, n: int) -> "PauliOp":
        """Parse forms like ``"X1 Z5 Y7"``, ``"-i X2"`` or ``"I"``."""
        tokens = text.replace("*", " ").split()
        phase = 0
        if tokens and tokens[0] in ("+", "-", "i", "-i", "+i"):
            phase = {"+": 0, "-": 2, "i": 1, "+i": 1, "-i": 3}[tokens.pop(0)]
        elif tokens and tokens[0].startswith("-") and len(tokens[0]) > 1:
            phase = 2
            tokens[0] = tokens[0][1:]
        op = cls(n, 0, 0, phase)
        for tok in tokens:
            if tok == "I":
                continue
            m = _TOKEN.match(tok)
            if not m:
                raise ValueError(f"cannot parse Pauli token {tok!r}")
            kind, site = m.group(1), int(m.group(2))
            if kind == "I":
                continue
            op = op * cls.single(n, site, kind)
        return op

    # -- accessors ----------------------------------------------------------
    @property
    def support(self) -> int:
        return self.x_mask | self.z_mask

    def sites(self) -> list[int]:
        s, out, j = self.support, [], 1
        while s:
            if s & 1:
                out.append(j)
            s >>= 1
            j += 1
        return out

    def weight(self) -> int:
        return _popcount(self.support)

    @property
    def coefficient(self) -> complex:
        return _PHASE_VALUE[self.phase]

    @property
    def key(self) -> tuple[int, int]:
        return self.x_mask, self.z_mask

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def unsigned(self) -> "PauliOp":
        return PauliOp(self.n_qubits, self.x_mask, self.z_mask)

    def adjoint(self) -> "PauliOp":
        return PauliOp(self.n_qubits, self.x_mask, self.z_mask, -self.phase)

    def with_phase(self, phase: int) -> "PauliOp":
        return PauliOp(self.n_qubits, self.x_mask, self.z_mask, phase)

    def __mul__(self, other: "PauliOp") -> "PauliOp":
        return multiply(self, other)

    def __neg__(self) -> "PauliOp":
        return self.with_phase(self.phase + 2)

    def __str__(self) -> str:
        parts = []
        for j in range(1, self.n_qubits + 1):
            bit = 1 << (j - 1)
            x, z = bool(self.x_mask & bit), bool(self.z_mask & bit)
            if x and z:
                parts.append(f"Y{j}")
            elif x:
                parts.append(f"X{j}")
            elif z:
                parts.append(f"Z{j}")
        body = " ".join(parts) if parts else "I"
        return _PHASE_STR[self.phase] + body

    # -- matrix forms -------------------------------------------------------
    def to_sparse(self) -> sparse.csr_matrix:
        """Matrix in the computational basis; site 1 is the leftmost factor."""
        n = self.n_qubits
        dim = 1 << n
        xb = _reverse_bits(self.x_mask, n)
        zb = _reverse_bits(self.z_mask, n)
        cols = np.arange(dim, dtype=np.int64)
        rows = cols ^ xb
        parity = np.zeros(dim, dtype=np.int64)
        v = cols & zb
        while np.any(v):
            parity ^= v & 1
            v >>= 1
        n_y = _popcount(self.x_mask & self.z_mask)
        vals = _PHASE_VALUE[(self.phase + n_y) % 4] * (1 - 2 * parity)
        return sparse.csr_matrix((vals.astype(complex), (rows, cols)), shape=(dim, dim))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()


def _reverse_bits(mask: int, n: int) -> int:
    # site j (bit j-1) maps to the basis-index bit n-j
    out = 0
    for j in range(n):
        if mask >> j & 1:
            out |= 1 << (n - 1 - j)
    return out


def _check(a: PauliOp, b: PauliOp) -> None:
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"{a.n_qubits} vs {b.n_qubits} qubits")


def _product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Power of i picked up by the site-wise product of two unsigned monomials."""
    y1, xo1, zo1 = x1 & z1, x1 & ~z1, z1 & ~x1
    y2, xo2, zo2 = x2 & z2, x2 & ~z2, z2 & ~x2
    # YZ=iX, XY=iZ, ZX=iY and the reversed orders with -i
    plus = (y1 & zo2) | (xo1 & y2) | (zo1 & xo2)
    minus = (y1 & xo2) | (xo1 & zo2) | (zo1 & y2)
    return _popcount(plus) - _popcount(minus)


def multiply(a: PauliOp, b: PauliOp) -> PauliOp:
    """Exact product ``a @ b`` including the phase."""
    _check(a, b)
    k = a.phase + b.phase + _product_phase(a.x_mask, a.z_mask, b.x_mask, b.z_mask)
    return PauliOp(a.n_qubits, a.x_mask ^ b.x_mask, a.z_mask ^ b.z_mask, k)


def commutes(a: PauliOp, b: PauliOp) -> bool:
    _check(a, b)
    return _popcount((a.x_mask & b.z_mask) ^ (a.z_mask & b.x_mask)) % 2 == 0


def conjugate_sign(u: PauliOp, q: PauliOp) -> int:
    """Return g in {+1, -1} with ``u q u = g q`` for a single-site Pauli ``u``."""
    _check(u, q)
    if u.weight() != 1:
        raise ValueError("conjugating operator must act on exactly one site")
    return 1 if commutes(u, q) else -1


# ---------------------------------------------------------------------------
# Linear combinations of monomials


class PauliSum:
    """Sparse linear combination of unsigned Pauli monomials.

    Terms are stored as ``{(x_mask, z_mask): coefficient}`` with the monomial
    phase folded into the coefficient.
    """

    __slots__ = ("n_qubits", "terms")

    def __init__(self, n_qubits: int, terms: Mapping[tuple[int, int], complex] | None = None):
        self.n_qubits = n_qubits
        self.terms: dict[tuple[int, int], complex] = dict(terms or {})

    @classmethod
    def from_op(cls, op: PauliOp, coef: complex = 1.0) -> "PauliSum":
        return cls(op.n_qubits, {op.key: coef * op.coefficient})

    @classmethod
    def identity(cls, n: int, coef: complex = 1.0) -> "PauliSum":
        return cls(n, {(0, 0): coef})

    def copy(self) -> "PauliSum":
        return PauliSum(self.n_qubits, self.terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return PauliSum(self.n_qubits, out).pruned()

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + other.scaled(-1)

    def scaled(self, c: complex) -> "PauliSum":
        return PauliSum(self.n_qubits, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, other: "PauliSum") -> "PauliSum":
        if self.n_qubits != other.n_qubits:
            raise DimensionError(f"{self.n_qubits} vs {other.n_qubits} qubits")
        out: dict[tuple[int, int], complex] = {}
        for (x1, z1), c1 in self.terms.items():
            for (x2, z2), c2 in other.terms.items():
                k = (x1 ^ x2, z1 ^ z2)
                ph = _PHASE_VALUE[_product_phase(x1, z1, x2, z2) % 4]
                out[k] = out.get(k, 0) + c1 * c2 * ph
        return PauliSum(self.n_qubits, out).pruned()

    def commutator(self, other: "PauliSum") -> "PauliSum":
        """``[self, other]``; only anticommuting monomial pairs contribute."""
        out: dict[tuple[int, int], complex] = {}
        for (x1, z1), c1 in self.terms.items():
            for (x2, z2), c2 in other.terms.items():
                if _popcount((x1 & z2) ^ (z1 & x2)) % 2 == 0:
                    continue
                k = (x1 ^ x2, z1 ^ z2)
                ph = _PHASE_VALUE[_product_phase(x1, z1, x2, z2) % 4]
                out[k] = out.get(k, 0) + 2 * c1 * c2 * ph
        return PauliSum(self.n_qubits, out).pruned()

    def pruned(self, tol: float = 1e-14) -> "PauliSum":
        return PauliSum(self.n_qubits, {k: v for k, v in self.terms.items() if abs(v) > tol})

    @property
    def support(self) -> int:
        s = 0
        for x, z in self.terms:
            s |= x | z
        return s

    def __len__(self) -> int:
        return len(self.terms)

    def to_sparse(self) -> sparse.csr_matrix:
        dim = 1 << self.n_qubits
        m = sparse.csr_matrix((dim, dim), dtype=complex)
        for (x, z), c in self.terms.items():
            m = m + c * PauliOp(self.n_qubits, x, z).to_sparse()
        return m

    def __repr__(self) -> str:
        items = ", ".join(f"{c:.3g}*{PauliOp(self.n_qubits, x, z)}" for (x, z), c in self.terms.items())
        return f"PauliSum({items})"
