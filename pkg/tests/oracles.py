"""Independent test-side oracles (no library numerics beyond numpy)."""

from __future__ import annotations

import numpy as np


def _random_frame(rng, n, k):
    q, _ = np.linalg.qr(rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))
    return q


def frame_search_interval(a: np.ndarray, k: int, evaluations: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Endpoints of W_k(A) for Hermitian A by searching over k-frames.

    The upper end is max_F lambda_min(F*AF), the lower end min_F
    lambda_max(F*AF).  Both are found by a random-perturbation hill climb
    whose step shrinks on failure; the total number of frame evaluations is
    ``evaluations``.
    """
    rng = np.random.default_rng(seed)
    n = a.shape[0]

    def climb(score, budget):
        f = _random_frame(rng, n, k)
        best = score(f)
        step = 0.5
        for _ in range(budget):
            g = f + step * (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))
            g, _ = np.linalg.qr(g)
            s = score(g)
            if s > best:
                f, best = g, s
                step = min(step * 1.5, 1.0)
            else:
                step = max(step * 0.95, 1e-6)
        return best

    half = evaluations // 2
    hi = climb(lambda f: np.linalg.eigvalsh(f.conj().T @ a @ f)[0], half)
    lo = -climb(lambda f: -np.linalg.eigvalsh(f.conj().T @ a @ f)[-1], half)
    return float(lo), float(hi)


def zenger_grid(u1: np.ndarray, u2: np.ndarray, alphas, grid: int = 401, zooms: int = 6) -> np.ndarray:
    """Maximizer u of |c1|^{2a1}|c2|^{2a2} over |c1 u1 + c2 u2| = 1 by grid search.

    Phases: c1 is taken real positive (global phase), c2 = r e^{i phi}.  A
    dense grid over (ratio angle t, phi) is evaluated, then re-gridded
    around the best cell ``zooms`` times.
    """
    a1, a2 = alphas

    def value(t, phi):
        c1 = np.cos(t)
        c2 = np.sin(t) * np.exp(1j * phi)
        v = np.multiply.outer(u1, c1) + np.multiply.outer(u2, c2)
        nrm = np.linalg.norm(v, axis=0)
        return a1 * np.log((c1 / nrm) ** 2) + a2 * np.log(np.abs(c2 / nrm) ** 2), v / nrm

    t_lo, t_hi, p_lo, p_hi = 1e-6, np.pi / 2 - 1e-6, 0.0, 2 * np.pi
    for _ in range(zooms + 1):
        ts = np.linspace(t_lo, t_hi, grid)
        ps = np.linspace(p_lo, p_hi, grid)
        tt, pp = np.meshgrid(ts, ps, indexing="ij")
        val, vecs = value(tt, pp)
        i, j = np.unravel_index(int(np.argmax(val)), val.shape)
        dt, dp = 2 * (ts[1] - ts[0]), 2 * (ps[1] - ps[0])
        t_lo, t_hi = max(ts[i] - dt, 1e-9), min(ts[i] + dt, np.pi / 2 - 1e-9)
        p_lo, p_hi = ps[j] - dp, ps[j] + dp
    return vecs[:, i, j]
