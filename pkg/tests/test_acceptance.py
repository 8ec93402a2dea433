"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also collected in the terminal summary.
"""
import itertools
import json
import time

import numpy as np
import pytest

from qmemsim import cli, davies, kmc, reduced
from qmemsim.davies import DaviesGenerator, SpectralFunction, build_jump_set
from qmemsim.model import build_ising_ring, build_kitaev_torus, build_model, gibbs_expectation, ground_expectation
from qmemsim.pauli import PauliOp, commutes, multiply

from oracles import all_ops, gibbs_state, kron_matrix, kron_sparse, sparse_equal


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _product(ops, n):
    p = PauliOp.identity(n)
    for o in ops:
        p = multiply(p, o)
    return p


def test_algebra_oracle(verdict):
    mismatches = 0
    with Clock() as c:
        for n in (1, 2, 3):
            ops = list(all_ops(n, PauliOp))
            mats = {op.key: kron_matrix(op) for op in ops}
            for a, b in itertools.product(ops, ops):
                A, B = mats[a.key], mats[b.key]
                mismatches += not np.array_equal(kron_matrix(multiply(a, b)), A @ B)
                mismatches += commutes(a, b) != np.allclose(A @ B, B @ A)
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            a = PauliOp(8, *map(int, rng.integers(0, 256, 2)), int(rng.integers(4)))
            b = PauliOp(8, *map(int, rng.integers(0, 256, 2)), int(rng.integers(4)))
            A, B = kron_sparse(a), kron_sparse(b)
            mismatches += not sparse_equal(kron_sparse(multiply(a, b)), A @ B)
            mismatches += commutes(a, b) != sparse_equal(A @ B, B @ A)
    ok = mismatches == 0 and c.elapsed < 5
    verdict("1 algebra oracle", ok, f"mismatches={mismatches}, {c.elapsed:.1f}s")
    assert ok


def _monomials(m, rng, n):
    out = []
    for k in range(n):
        if k % 2:
            p = _product([s for s in m.stabilizers if rng.random() < 0.5], m.n_qubits)
            out.append(p.with_phase(2 * int(rng.integers(2))))
        else:
            hi = 1 << m.n_qubits
            out.append(PauliOp(m.n_qubits, *map(int, rng.integers(0, hi, 2)), int(rng.integers(4))))
    return out


def test_statics(verdict):
    worst, ground_bad = 0.0, 0
    rng = np.random.default_rng(7)
    with Clock() as c:
        models = [build_ising_ring(n) for n in range(3, 9)] + [build_kitaev_torus(2)]
        for m in models:
            H = sum(-kron_matrix(s) for s in m.stabilizers)
            for beta in (0.4, 1.3):
                rho = gibbs_state(H, beta)
                for p in _monomials(m, rng, 200):
                    ed = np.trace(rho @ kron_matrix(p))
                    err = abs(complex(gibbs_expectation(m, p, beta)) - ed) / max(1.0, abs(ed))
                    worst = max(worst, err)
        for m in (build_ising_ring(6), build_kitaev_torus(2)):
            S = m.stabilizers
            for mask in range(1 << len(S)):
                p = _product([s for i, s in enumerate(S) if mask >> i & 1], m.n_qubits)
                ground_bad += ground_expectation(m, p).value != 1
            hits = 0
            while hits < 200:
                hi = 1 << m.n_qubits
                p = PauliOp(m.n_qubits, *map(int, rng.integers(0, hi, 2)))
                if all(commutes(p, s) for s in S):
                    continue
                hits += 1
                ground_bad += ground_expectation(m, p).value != 0
    ok = worst <= 1e-12 and ground_bad == 0 and c.elapsed < 60
    verdict("2 statics", ok, f"max rel err={worst:.1e}, ground mismatches={ground_bad}, {c.elapsed:.1f}s")
    assert ok


@pytest.mark.parametrize("model", [build_ising_ring(4), build_kitaev_torus(2)], ids=["ising4", "kitaev2"])
def test_davies_structure(verdict, model):
    with Clock() as c:
        gen = DaviesGenerator(model, build_jump_set(model), SpectralFunction.for_model(model, 0.8))
        r = davies.check_detailed_balance(gen, n_pairs=20, seed=1)
    ok = (r.unitality == 0.0 and r.stationarity < 1e-10 and r.delta_commutator < 1e-10
          and r.self_adjoint_asymmetry < 1e-8 and c.elapsed < 300)
    verdict(f"3 Davies structure [{model.kind} {model.size}]", ok,
            f"L(1)={r.unitality:.0e}, stat={r.stationarity:.1e}, comm={r.delta_commutator:.1e}, "
            f"asym={r.self_adjoint_asymmetry:.1e}, {c.elapsed:.1f}s")
    assert ok


def test_ergodicity(verdict):
    with Clock() as c:
        d_kit = davies.ergodicity_dimension(build_kitaev_torus(2), "both")
        d_ising = davies.ergodicity_dimension(build_ising_ring(4), "x")
    ok = d_kit == 1 and d_ising == 2 and c.elapsed < 120
    verdict("4 ergodicity", ok, f"kitaev2={d_kit}, ising4={d_ising}, {c.elapsed:.1f}s")
    assert ok


def test_factorization(verdict):
    times = (0.1, 1.0, 10.0)
    worst = 0.0
    with Clock() as c:
        for m in (build_ising_ring(4), build_kitaev_torus(2)):
            h = SpectralFunction.for_model(m, 0.6)
            gen = DaviesGenerator(m, build_jump_set(m), h)
            sb = davies.SyndromeBasis(m)
            dressing = reduced.StabilizerProduct(tuple(cons[0] for cons in m.constraints))
            for name, Q in sorted(m.logicals.items()):
                rg = reduced.build_reduced_generator(m, h, Q)
                for F in (reduced.ONE, dressing):
                    full = davies.propagate_many(gen, Q.to_dense() @ sb.lift(F), times)
                    space, G = reduced.propagate_reduced(rg, F, list(times), sectors="all")
                    for Xt, g in zip(full, G):
                        pred = Q.to_dense() @ sb.operator(g[space.index_of(sb.bits)])
                        worst = max(worst, float(np.abs(Xt - pred).max()))
    ok = worst < 1e-8 and c.elapsed < 600
    verdict("5 factorization", ok, f"max err={worst:.1e}, {c.elapsed:.1f}s")
    assert ok


def test_kitaev_z_equivalence(verdict):
    times = [0.05, 0.5, 2.0, 8.0]
    same, worst = True, 0.0
    with Clock() as c:
        for K in (2, 3):
            full_m, z_m = build_kitaev_torus(K), build_model("kitaev_z", K)
            hf = SpectralFunction.for_model(full_m, 0.7)
            hz = SpectralFunction.for_model(z_m, 0.7)
            gf = reduced.build_reduced_generator(full_m, hf, full_m.logicals["Z1"], "both")
            gz = reduced.build_reduced_generator(z_m, hz, z_m.logicals["Z1"], "x")
            A = gf.space(gf.active_sectors(reduced.ONE)).matrix()
            B = gz.space(gz.active_sectors(reduced.ONE)).matrix()
            same &= A.shape == B.shape and (A != B).nnz == 0
            a = reduced.autocorrelation(gf, reduced.ONE, times, sectors="all").values
            b = reduced.autocorrelation(gz, reduced.ONE, times, sectors="all").values
            worst = max(worst, float(np.abs(a - b).max()))
    ok = same and worst < 1e-12 and c.elapsed < 60
    verdict("6 kitaev_z equivalence", ok, f"same matrix={same}, max diff={worst:.1e}, {c.elapsed:.1f}s")
    assert ok


def test_autocorrelation_chain(verdict):
    m = build_ising_ring(4)
    times = [0.1, 0.5, 1.0, 3.0, 10.0]
    worst = 0.0
    with Clock() as c:
        h = SpectralFunction.for_model(m, 0.8)
        for q in (reduced.DressedLogical.bare(m, "Z"),
                  reduced.DressedLogical(m.logicals["X"], reduced.StabilizerProduct((0,)))):
            gen = reduced.build_reduced_generator(m, h, q.Q)
            r = reduced.autocorrelation(gen, q.F, times, with_half_norms=True)
            worst = max(worst, float(np.abs(r.values - r.half_time_norms).max()))
    ok = worst < 1e-9 and c.elapsed < 60
    verdict("7 autocorrelation chain", ok, f"max diff={worst:.1e}, {c.elapsed:.1f}s")
    assert ok


def test_kmc_vs_exact(verdict):
    times = [0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0]
    worst_z, deterministic = 0.0, True
    with Clock() as c:
        for K in (2, 3):
            m = build_kitaev_torus(K)
            gen = reduced.build_reduced_generator(m, SpectralFunction.for_model(m, 0.6), m.logicals["Z1"])
            exact = reduced.autocorrelation(gen, reduced.ONE, times).values
            r = kmc.run_chain(gen, reduced.ONE, times, 10_000, seed=K)
            again = kmc.run_chain(gen, reduced.ONE, times, 10_000, seed=K)
            deterministic &= np.array_equal(r.mean, again.mean) and np.array_equal(r.stderr, again.stderr)
            for e, mu, se in zip(exact, r.mean, r.stderr):
                # the t = 0 estimate is deterministic and has zero spread
                z = abs(mu - e) / se if se > 0 else (0.0 if abs(mu - e) < 1e-12 else np.inf)
                worst_z = max(worst_z, z)
    ok = worst_z <= 3 and deterministic and c.elapsed < 600
    verdict("8 KMC vs exact", ok, f"max |z|={worst_z:.2f}, deterministic={deterministic}, {c.elapsed:.1f}s")
    assert ok


def test_locality(verdict):
    m = build_kitaev_torus(4)
    rng = np.random.default_rng(9)
    bad = 0
    with Clock() as c:
        for _ in range(100):
            # a random Pauli on one or two sites of a random plaquette or star
            stab = m.stabilizers[int(rng.integers(m.n_stabilizers))]
            sites = rng.choice(stab.sites(), size=int(rng.integers(1, 3)), replace=False)
            X = PauliOp.identity(m.n_qubits)
            for j in sites:
                X = multiply(X, PauliOp.single(m.n_qubits, int(j), "XYZ"[int(rng.integers(3))]))
            bad += not davies.locality_report(m, X, k=6).ok
    ok = bad == 0 and c.elapsed < 60
    verdict("9 locality", ok, f"violations={bad}, {c.elapsed:.1f}s")
    assert ok


@pytest.mark.parametrize("kind, size", [("ising", 4), ("kitaev", 2)])
def test_discrepancy_adjudication(verdict, tmp_path, kind, size):
    code = cli.main(["check", "--kind", kind, "--size", str(size), "--beta", "0.7", "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "check.json").read_text())
    o = rep["oracle"]
    emitted = all(k in o for k in ("ed", "implementation", "nominal", "differs_from_nominal"))
    ok = code == 0 and emitted and o["pass"]
    verdict(f"10 adjudication [{kind} {size}]", ok,
            f"ED omega*={o['omega_star']:g} vs nominal {o['nominal']['bohr_frequency']:g}, "
            f"ED <S>={o['ed']['star_or_bond_expectation']:.4f} vs tanh(beta/2)="
            f"{o['nominal']['stabilizer_expectation']:.4f}, step={o['ed']['level_step']:g}")
    assert ok
