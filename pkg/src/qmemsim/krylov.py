"""Krylov-subspace action of a matrix exponential, ``exp(t A) v``.

Arnoldi projection with adaptive sub-stepping and the local error estimate
of Expokit (Sidje 1998).  ``A`` enters only through a matvec callable.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.linalg import expm


class StepSizeError(RuntimeError):
    """Raised when the step-size control cannot meet the tolerance."""


def _round_step(x: float) -> float:
    if x <= 0 or not math.isfinite(x):
        return x
    s = 10.0 ** (math.floor(math.log10(x)) - 1)
    if s == 0.0 or not math.isfinite(s):
        return x
    return math.ceil(x / s) * s


def estimate_norm(matvec: Callable[[np.ndarray], np.ndarray], n: int, dtype, n_probe: int = 3,
                  seed: int = 12345) -> float:
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_probe):
        v = rng.standard_normal(n).astype(dtype)
        v /= np.linalg.norm(v)
        best = max(best, float(np.linalg.norm(matvec(v))))
    return max(best, 1e-300)


def expv(t: float, matvec: Callable[[np.ndarray], np.ndarray], v: np.ndarray, *,
         tol: float = 1e-12, m: int = 30, anorm: float | None = None,
         max_steps: int = 100_000, max_reject: int = 50) -> np.ndarray:
    """Return ``exp(t A) v``.

    ``tol`` bounds the local error per unit time (absolute, in the norm of
    the iterate), so the global error is roughly ``tol * t * |v|``.
    """
    v = np.asarray(v)
    dtype = np.result_type(v.dtype, np.float64)
    w = v.astype(dtype, copy=True)
    n = w.size
    t_out = abs(t)
    sgn = 1.0 if t >= 0 else -1.0
    beta = float(np.linalg.norm(w))
    if beta == 0.0 or t_out == 0.0:
        return w
    m = max(1, min(m, n))
    if anorm is None:
        anorm = 2.0 * estimate_norm(matvec, n, dtype)
    btol = min(1e-7, tol)
    gamma, delta = 0.9, 1.2

    xm = 1.0 / m
    fact = ((m + 1) / math.e) ** (m + 1) * math.sqrt(2 * math.pi * (m + 1))
    t_new = (1.0 / anorm) * ((fact * tol) / (4.0 * beta * anorm)) ** xm
    t_new = _round_step(t_new)

    t_now = 0.0
    nstep = 0
    while t_now < t_out:
        nstep += 1
        if nstep > max_steps:
            raise StepSizeError(f"exceeded {max_steps} steps at t={t_now:.3g} of {t_out:.3g}")
        t_step = min(t_out - t_now, t_new)
        V = np.zeros((n, m + 1), dtype=dtype)
        H = np.zeros((m + 2, m + 2), dtype=dtype)
        V[:, 0] = w / beta
        k1, mb = 2, m
        for j in range(m):
            p = matvec(V[:, j]).astype(dtype, copy=False)
            for _ in range(2):  # classical Gram-Schmidt, repeated once
                coeff = V[:, : j + 1].conj().T @ p
                H[: j + 1, j] += coeff
                p = p - V[:, : j + 1] @ coeff
            s = float(np.linalg.norm(p))
            if s < btol * anorm:
                # happy breakdown: the subspace is invariant
                k1, mb = 0, j + 1
                t_step = t_out - t_now
                break
            H[j + 1, j] = s
            V[:, j + 1] = p / s
        avnorm = 0.0
        if k1 != 0:
            H[m + 1, m] = 1.0
            avnorm = float(np.linalg.norm(matvec(V[:, m])))

        for ireject in range(max_reject + 1):
            mx = mb + k1
            F = expm(sgn * t_step * H[:mx, :mx])
            if k1 == 0:
                err_loc = btol
                break
            phi1 = abs(beta * F[m, 0])
            phi2 = abs(beta * F[m + 1, 0] * avnorm)
            if phi1 > 10 * phi2:
                err_loc, xm = phi2, 1.0 / m
            elif phi1 > phi2:
                err_loc, xm = phi1 * phi2 / (phi1 - phi2), 1.0 / m
            else:
                err_loc, xm = phi1, 1.0 / max(m - 1, 1)
            if err_loc <= delta * t_step * tol:
                break
            t_step = _round_step(gamma * t_step * (t_step * tol / err_loc) ** xm)
        else:
            raise StepSizeError(
                f"local error {err_loc:.3g} above tolerance after {max_reject} rejections "
                f"(t={t_now:.3g}, step={t_step:.3g})")

        mx = mb + max(0, k1 - 1)
        w = V[:, :mx] @ (beta * F[:mx, 0])
        beta = float(np.linalg.norm(w))
        t_now += t_step
        if beta == 0.0:
            break
        # floor the error at tol-scale roundoff and cap growth so a vanishing
        # estimate neither shrinks nor explodes the next step
        floor = max(err_loc, 1e-30 * t_step * tol)
        t_new = _round_step(min(10.0, gamma * (t_step * tol / floor) ** xm) * t_step)
    return w
