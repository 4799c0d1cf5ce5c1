"""Constructive solver for Zenger's lemma.

Given linearly independent u_1..u_m and weights alpha on the simplex, find
scalars w_j with u = sum_j w_j u_j a unit vector and <w_j u_j, u> = alpha_j.

The w_j are a maximizer of sum_j alpha_j log|c_j|^2 on the ellipsoid
|sum_j c_j u_j| = 1.  With G the Gram matrix, c^* G c = 1 and stationarity
reads conj(c_j) (G c)_j = alpha_j, which is exactly the required identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import InputError, LinearDependence, NonConvergence


@dataclass(frozen=True)
class ZengerSolution:
    w: np.ndarray
    u: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0


def simplex_weights(alphas) -> np.ndarray:
    a = np.asarray(alphas, dtype=float).ravel()
    if a.size == 0 or np.any(~np.isfinite(a)) or np.any(a < 0):
        raise InputError("weights must be finite and nonnegative")
    if abs(a.sum() - 1.0) > 1e-12:
        raise InputError(f"weights must sum to 1 (sum is {a.sum():.15g})")
    return a


def zenger_residuals(u_list: np.ndarray, w: np.ndarray, u: np.ndarray, alphas) -> np.ndarray:
    """|<w_j u_j, u> - alpha_j| recomputed from scratch."""
    inner = (u.conj() @ u_list) * w
    return np.abs(inner - np.asarray(alphas, dtype=float))


def _inv_sqrt(g: np.ndarray) -> np.ndarray:
    e, v = np.linalg.eigh(g)
    return (v / np.sqrt(e)) @ v.conj().T


def _normalize_phase(c: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    i = int(np.argmax(np.abs(u) > (1 - 1e-9) * np.max(np.abs(u))))
    ph = np.conj(u[i]) / abs(u[i])
    return c * ph, u * ph


def zenger_solve(
    u_list,
    alphas,
    tol: float = 1e-10,
    max_iters: int = 500,
    seed: int = 0,
    restarts: int = 12,
) -> ZengerSolution:
    """Solve Zenger's lemma for the columns of ``u_list`` (an N x m array).

    Zero weights drop their vector (w_j = 0).  The objective can have several
    local maxima, so every seeded start is run and the valid solution with
    the largest objective is kept; the global phase is then rotated so the
    largest-modulus entry of u is real positive.  This makes the result
    independent of rescaling and reordering of the inputs whenever the
    maximizer is unique up to phase.
    """
    ul = np.asarray(u_list, dtype=np.complex128)
    if ul.ndim == 1:
        ul = ul[:, None]
    a = simplex_weights(alphas)
    if a.size != ul.shape[1]:
        raise InputError(f"{ul.shape[1]} vectors but {a.size} weights")
    g_full = ul.conj().T @ ul
    g_full = (g_full + g_full.conj().T) / 2
    if np.linalg.eigvalsh(g_full)[0] <= 1e-10:
        raise LinearDependence("Gram matrix is numerically singular")
    act = np.flatnonzero(a > 0)
    ua, aa = ul[:, act], a[act]
    m = act.size
    g = g_full[np.ix_(act, act)]
    s = _inv_sqrt(g)

    def negf(p):
        z = p[:m] + 1j * p[m:]
        c = s @ z
        zz = np.vdot(z, z).real
        val = np.sum(aa * np.log(np.abs(c) ** 2)) - np.log(zz)
        gc = aa / np.conj(c)
        gz = s @ gc - z / zz
        return -val, -2 * np.concatenate([gz.real, gz.imag])

    def stationarity(p):
        c = p[:m] + 1j * p[m:]
        r = np.conj(c) * (g @ c) - aa
        return np.concatenate([r.real, r.imag])

    rng = np.random.default_rng(seed)
    best = (-np.inf, None)
    closest = np.inf
    for attempt in range(max(1, restarts)):
        if attempt == 0:
            c0 = np.sqrt(aa) / np.sqrt(np.diag(g).real)
        else:
            c0 = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) * np.sqrt(aa)
        z0 = np.linalg.solve(s, c0)
        z0 /= np.linalg.norm(z0)
        opt = scipy.optimize.minimize(
            negf,
            np.concatenate([z0.real, z0.imag]),
            jac=True,
            method="BFGS",
            options={"maxiter": max_iters, "gtol": 1e-12},
        )
        z = opt.x[:m] + 1j * opt.x[m:]
        c = s @ z
        c /= np.sqrt(np.vdot(c, g @ c).real)
        pol = scipy.optimize.least_squares(
            stationarity,
            np.concatenate([c.real, c.imag]),
            method="lm",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=100 * (2 * m + 1),
        )
        c = pol.x[:m] + 1j * pol.x[m:]
        c /= np.sqrt(np.vdot(c, g @ c).real)
        u = ua @ c
        c, u = _normalize_phase(c, u)
        w = np.zeros(a.size, dtype=np.complex128)
        w[act] = c
        res = zenger_residuals(ul, w, u, a)
        res = np.append(res, abs(np.linalg.norm(u) - 1.0))
        worst = float(np.max(res))
        closest = min(closest, worst)
        if worst <= tol:
            cn = c * np.sqrt(np.diag(g).real)
            obj = float(np.sum(aa * np.log(np.abs(cn) ** 2)))
            if obj > best[0] + 1e-12:
                best = (obj, (w, u, res[:-1]))
    if best[1] is None:
        raise NonConvergence(f"stationarity residual {closest:.3e} above {tol:g}", closest)
    w, u, res = best[1]
    return ZengerSolution(w, u, res)
