import itertools
import json
import math

import numpy as np
import pytest

from qmemsim.model import (
    DomainError, InvalidSizeError, InvalidStateError, SyndromeState, build_ising_ring,
    build_kitaev_torus, build_model, gf2_rank, gibbs_expectation, ground_expectation,
    hamiltonian_energy,
)
from qmemsim.pauli import PauliOp, commutes, multiply

from oracles import gibbs_state, kron_matrix


def _product(ops, n):
    p = PauliOp.identity(n)
    for o in ops:
        p = multiply(p, o)
    return p


def test_ising_counts():
    m = build_ising_ring(4)
    assert m.n_qubits == 4 and m.n_stabilizers == 4
    assert m.constraints == ((0, 1, 2, 3),)
    assert len(m.independent_basis) == 3
    assert str(m.logicals["X"]) == "X1 X2 X3 X4"


def test_ising_logicals():
    m3 = build_ising_ring(3)
    assert all(commutes(m3.logicals["Z"], s) for s in m3.stabilizers)
    m = build_ising_ring(4)
    X, Z = m.logicals["X"], m.logicals["Z"]
    assert not commutes(X, Z)
    assert all(commutes(X, s) and commutes(Z, s) for s in m.stabilizers)


def test_kitaev_counts():
    m = build_kitaev_torus(2)
    assert m.n_qubits == 8
    assert sum(n.startswith("s") for n in m.stabilizer_names) == 4
    assert sum(n.startswith("p") for n in m.stabilizer_names) == 4
    assert len(m.independent_basis) == 6
    assert all(s.weight() == 4 for s in m.stabilizers)
    for K in (2, 3, 4):
        mk = build_kitaev_torus(K)
        assert all(q.weight() == K for q in mk.logicals.values())


@pytest.mark.parametrize("K", [2, 3, 4])
def test_kitaev_stabilizers_commute(K):
    m = build_kitaev_torus(K)
    for a, b in itertools.combinations(m.stabilizers, 2):
        assert (a.support & b.support).bit_count() in (0, 1, 2)
        assert commutes(a, b)


@pytest.mark.parametrize("model", [build_ising_ring(5), build_kitaev_torus(2), build_kitaev_torus(3)])
def test_constraints_multiply_to_identity(model):
    for c in model.constraints:
        assert _product([model.stabilizers[i] for i in c], model.n_qubits) == PauliOp.identity(model.n_qubits)
    for s in model.stabilizers:
        assert multiply(s, s) == PauliOp.identity(model.n_qubits)


@pytest.mark.parametrize("K", [2, 3])
def test_kitaev_logical_algebra(K):
    m = build_kitaev_torus(K)
    L = m.logicals
    for q in L.values():
        assert all(commutes(q, s) for s in m.stabilizers)
        assert m.decompose(q) is None
    table = {(a, b): commutes(L[a], L[b]) for a in L for b in L}
    assert not table["X1", "Z1"] and not table["X2", "Z2"]
    assert table["X1", "Z2"] and table["X2", "Z1"]
    assert table["X1", "X2"] and table["Z1", "Z2"]


def test_logical_space_dimension():
    for m, dim in ((build_ising_ring(6), 2), (build_kitaev_torus(3), 4)):
        r = gf2_rank(list(m.stabilizers))
        assert r == len(m.independent_basis)
        assert 2 ** (m.n_qubits - r) == dim


def test_invalid_sizes():
    with pytest.raises(InvalidSizeError):
        build_ising_ring(2)
    with pytest.raises(InvalidSizeError):
        build_kitaev_torus(1)
    with pytest.raises(ValueError):
        build_model("cube", 3)


def test_ground_expectation_examples():
    m = build_kitaev_torus(2)
    assert ground_expectation(m, m.stabilizers[0]).value == 1
    assert ground_expectation(m, PauliOp.identity(m.n_qubits)).value == 1
    mi = build_ising_ring(4)
    r = ground_expectation(mi, PauliOp.single(4, 2, "X"))
    assert r.value == 0 and not r.reducible


def test_ground_expectation_products_and_nonreducible():
    m = build_kitaev_torus(2)
    rng = np.random.default_rng(0)
    for _ in range(200):
        subset = [s for s in m.stabilizers if rng.random() < 0.5]
        assert ground_expectation(m, _product(subset, m.n_qubits)).value == 1
    hits = 0
    while hits < 200:
        p = PauliOp(m.n_qubits, *map(int, rng.integers(0, 256, 2)))
        if all(commutes(p, s) for s in m.stabilizers):
            continue
        hits += 1
        assert ground_expectation(m, p).value == 0


def _random_monomials(m, rng, n):
    out = []
    for k in range(n):
        if k % 2:
            subset = [s for s in m.stabilizers if rng.random() < 0.5]
            p = _product(subset, m.n_qubits).with_phase(2 * int(rng.integers(2)))
        else:
            p = PauliOp(m.n_qubits, *map(int, rng.integers(0, 1 << m.n_qubits, 2)))
        out.append(p)
    return out


@pytest.mark.parametrize("model", [build_ising_ring(4), build_ising_ring(6), build_kitaev_torus(2)])
def test_gibbs_matches_ed(model):
    rng = np.random.default_rng(11)
    H = sum(-kron_matrix(s) for s in model.stabilizers)
    for beta in (0.3, 1.0):
        rho = gibbs_state(H, beta)
        for p in _random_monomials(model, rng, 40):
            ed = np.trace(rho @ kron_matrix(p))
            val = complex(gibbs_expectation(model, p, beta))
            assert abs(val - ed) <= 1e-12 * max(1.0, abs(ed))


def test_gibbs_limits_and_domain():
    m = build_kitaev_torus(2)
    vals = [gibbs_expectation(m, m.stabilizers[0], b) for b in (0.5, 1, 2, 5, 20)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(1.0, abs=1e-12)
    assert gibbs_expectation(m, PauliOp.single(8, 1, "X"), 1.0) == 0
    with pytest.raises(DomainError):
        gibbs_expectation(m, m.stabilizers[0], 0.0)


def test_gibbs_stabilizer_value_is_not_half_beta_tanh():
    # K=2 plaquette at beta=1, adjudicated by ED
    m = build_kitaev_torus(2)
    H = sum(-kron_matrix(s) for s in m.stabilizers)
    p = next(s for s, n in zip(m.stabilizers, m.stabilizer_names) if n.startswith("p"))
    ed = np.trace(gibbs_state(H, 1.0) @ kron_matrix(p)).real
    assert gibbs_expectation(m, p, 1.0) == pytest.approx(ed, abs=1e-12)
    assert abs(ed - math.tanh(0.5)) > 0.1


def test_hamiltonian_energy():
    m = build_ising_ring(5)
    assert hamiltonian_energy(m, SyndromeState.vacuum(m)) == -5
    m4 = build_ising_ring(4)
    assert hamiltonian_energy(m4, SyndromeState.from_indices(m4, [0, 2])) == 0
    with pytest.raises(InvalidStateError):
        hamiltonian_energy(m4, SyndromeState.from_indices(m4, [0]))


def test_kitaev_energy_against_ed():
    m = build_kitaev_torus(2)
    stars = [i for i, n in enumerate(m.stabilizer_names) if n.startswith("s")]
    plaqs = [i for i, n in enumerate(m.stabilizer_names) if n.startswith("p")]
    s = SyndromeState.from_indices(m, stars[:2] + plaqs[:2])
    assert hamiltonian_energy(m, s) == -m.n_qubits + 8
    # ED: energy of a joint eigenvector with this syndrome
    H = sum(-kron_matrix(x) for x in m.stabilizers)
    P = np.eye(256)
    for i, st_ in enumerate(m.stabilizers):
        sign = -1 if s.excited[i] else 1
        P = P @ (np.eye(256) + sign * kron_matrix(st_)) / 2
    assert np.trace(P).real == pytest.approx(4)
    assert np.trace(H @ P).real / 4 == pytest.approx(-m.n_qubits + 8)


def test_model_export_is_json():
    m = build_kitaev_torus(2)
    d = json.loads(json.dumps(m.to_dict()))
    assert d["n_qubits"] == 8
    assert len(d["stabilizers"]) == 8
    assert set(d["logicals"]) == {"X1", "Z1", "X2", "Z2"}
    assert d["stabilizers"][0]["sites"] == m.stabilizers[0].sites()
