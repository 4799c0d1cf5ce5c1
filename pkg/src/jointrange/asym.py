"""Truncated shift models and compressions of their power orbits.

The model operator T is a direct sum of m copies of the truncated weighted
shift on C^N (e_i -> w_i e_{i+1}, e_{N-1} -> 0), stored copy-major: basis
index = copy * N + i.  It is never assembled; powers act by shifting.

Vectors with prescribed moments <T^k x, x> ~ lambda^k are truncated
geometric sequences placed on index windows.  Windows are handed out by a
:class:`WindowAllocator`, which prefers untouched copies and otherwise packs
new windows behind existing support with a gap, so that low powers of T
cannot connect old and new vectors.

Truncation argument for the reported horizon: past the nilpotency index N
every power of T vanishes, so ||(T^n)_L - D^n|| = ||D^n|| <= r^n for n >= N,
which is below the tolerance once r^n is; sup over 1 <= n <= horizon with
horizon >= N therefore captures the full supremum up to that tail.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InputError, NonConvergence, NotStrictContraction, NotUnitary, WindowExhausted
from .opcore import Frame, operator_norm
from .pinch import power_dilation


# ---------------------------------------------------------------------------
# the model


class ShiftModel:
    """m copies of the truncated weighted shift of size N."""

    def __init__(self, N: int, multiplicity: int = 1, weights=None):
        if N < 2 or multiplicity < 1:
            raise InputError("need N >= 2 and multiplicity >= 1")
        self.N = int(N)
        self.m = int(multiplicity)
        if weights is None or (isinstance(weights, str) and weights == "ones"):
            w = np.ones(self.N - 1)
        else:
            w = np.asarray(weights, dtype=float).ravel()
            if w.size != self.N - 1:
                raise DimensionMismatch(f"need {self.N - 1} weights, got {w.size}")
            if np.any(~np.isfinite(w)) or np.any(w <= 0):
                raise InputError("weights must be positive and finite")
        self.weights = w
        self.unit = bool(np.all(w == 1.0))

    @property
    def dim(self) -> int:
        return self.N * self.m

    def index(self, copy: int, i: int) -> int:
        return copy * self.N + i

    def apply(self, x: np.ndarray, power: int = 1, adjoint: bool = False) -> np.ndarray:
        """T^power x (or T*^power x) for a vector or a dim x r block."""
        x = np.asarray(x, dtype=np.complex128)
        vec = x.ndim == 1
        z = x.reshape(self.m, self.N, -1)
        for _ in range(power):
            y = np.zeros_like(z)
            if adjoint:
                y[:, :-1] = self.weights[None, :, None] * z[:, 1:]
            else:
                y[:, 1:] = self.weights[None, :, None] * z[:, :-1]
            z = y
        out = z.reshape(self.dim, -1)
        return out[:, 0] if vec else out

    def power_bound(self, horizon: int) -> float:
        """sup_{0 <= k <= horizon} ||T^k||: the largest product of k consecutive weights."""
        if self.unit:
            return 1.0
        logs = np.concatenate([[0.0], np.cumsum(np.log(self.weights))])
        best = 0.0
        for k in range(1, min(horizon, self.N - 1) + 1):
            best = max(best, float(np.max(logs[k:] - logs[:-k])))
        return float(math.exp(best))

    def matrix(self) -> np.ndarray:
        """Dense T (small models only)."""
        return self.apply(np.eye(self.dim, dtype=np.complex128))

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "multiplicity": self.m,
            "weights": "ones" if self.unit else [float(w) for w in self.weights],
        }

    @classmethod
    def from_json(cls, obj) -> "ShiftModel":
        try:
            return cls(int(obj["N"]), int(obj.get("multiplicity", 1)), obj.get("weights", "ones"))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed model object: {exc}") from None

    def __repr__(self) -> str:
        return f"ShiftModel(N={self.N}, multiplicity={self.m})"


def orbit_inner(s: ShiftModel, x: np.ndarray, ys: np.ndarray, horizon: int, adjoint: bool = False) -> np.ndarray:
    """Array [n-1, j] = <T^n x, y_j> (or with T*) for n = 1..horizon."""
    ys = np.asarray(ys, dtype=np.complex128)
    if ys.ndim == 1:
        ys = ys[:, None]
    out = np.zeros((horizon, ys.shape[1]), dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    # T preserves copies: work on the copies x touches, with the columns that meet them
    copies = np.flatnonzero(np.any(x.reshape(s.m, s.N) != 0, axis=1))
    if copies.size == 0:
        return out
    rows = (copies[:, None] * s.N + np.arange(s.N)[None, :]).ravel()
    ysub = ys[rows]
    live = np.flatnonzero(np.any(ysub != 0, axis=0))
    if live.size == 0:
        return out
    sub = ShiftModel(s.N, copies.size, s.weights)
    yh = ysub[:, live].conj().T
    z = x[rows]
    for n in range(horizon):
        z = sub.apply(z, 1, adjoint)
        if not np.any(z):
            break
        out[n, live] = yh @ z
    return out


def compressed_powers(s: ShiftModel, frame: np.ndarray, horizon: int):
    """Yield (n, F* T^n F) for n = 1..horizon."""
    f = np.asarray(frame, dtype=np.complex128)
    z = f
    fh = f.conj().T
    for n in range(1, horizon + 1):
        z = s.apply(z, 1)
        yield n, fh @ z


# ---------------------------------------------------------------------------
# window allocation


class WindowAllocator:
    """Hands out index windows; sequential by contract.

    Each copy keeps a high-water mark (one past its last used index).  A
    request goes to the lowest untouched copy if there is one, otherwise
    behind the high-water mark of the copy with the most room, after a gap.
    """

    def __init__(self, s: ShiftModel):
        self.model = s
        self.hw = np.zeros(s.m, dtype=int)

    def block(self, vectors) -> None:
        """Mark the support of the given vectors (columns) as used."""
        v = np.asarray(vectors)
        if v.size == 0:
            return
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.model.dim:
            raise DimensionMismatch("vectors do not live in the model space")
        mask = np.any(np.abs(v) > 0, axis=1).reshape(self.model.m, self.model.N)
        for c in range(self.model.m):
            idx = np.flatnonzero(mask[c])
            if idx.size:
                self.hw[c] = max(self.hw[c], int(idx[-1]) + 1)

    def reserve(self, length: int, gap: int) -> tuple[int, int]:
        N = self.model.N
        fresh = np.flatnonzero(self.hw == 0)
        if fresh.size and length <= N:
            c = int(fresh[0])
            self.hw[c] = length
            return c, 0
        starts = self.hw + gap
        room = N - starts
        c = int(np.argmax(room))
        if room[c] < length:
            raise WindowExhausted(
                f"no room for a window of length {length} after gap {gap} "
                f"(N={N}, multiplicity={self.model.m})",
                demand=length + gap,
            )
        start = int(starts[c])
        self.hw[c] = start + length
        return c, start

    def free_copies(self) -> int:
        return int(np.sum(self.hw == 0))


# ---------------------------------------------------------------------------
# moment vectors


def window_length(lam: complex, horizon: int, tol: float = 1e-10) -> int:
    """Window giving moments lambda^k (k <= horizon) to within tol."""
    a = abs(lam)
    if a >= 1:
        raise InputError("|lambda| must be below 1")
    if a == 0:
        return horizon + 1
    return horizon + int(math.ceil(math.log(tol) / (2 * math.log(a))))


def geometric_window(lam: complex, length: int) -> np.ndarray:
    """Unit vector a_i ∝ conj(lambda)^i, i < length; <T^k a, a> = lambda^k (1-|l|^{2(w-k)})/(1-|l|^{2w})."""
    if lam == 0:
        a = np.zeros(length, dtype=np.complex128)
        a[0] = 1.0
        return a
    a = np.conj(lam) ** np.arange(length)
    return a / np.linalg.norm(a)


def moment_vector(
    s: ShiftModel,
    lam: complex,
    horizon: int,
    guard=None,
    tol: float = 1e-10,
    allocator: WindowAllocator | None = None,
    gap: int | None = None,
    window: int | None = None,
) -> np.ndarray:
    """Unit x with |<T^k x, x> - lambda^k| <= tol for k <= horizon, clear of ``guard``.

    The window is placed in an untouched copy, or behind the guard's support
    with a gap of ``gap`` (default ``horizon``) indices, so x is orthogonal
    to T^k g and T*^k g for k <= gap and every guard column g.  The moment
    identity is exact for unit weights; on weighted models the same window
    is used and the diagnostics report the moments actually attained.
    """
    if abs(lam) >= 1:
        raise InputError("|lambda| must be below 1")
    alloc = allocator if allocator is not None else WindowAllocator(s)
    if guard is not None:
        alloc.block(np.asarray(guard.columns if isinstance(guard, Frame) else guard))
    w = window_length(lam, horizon, tol)
    if window is not None:
        if window < w:
            raise InputError(f"window {window} is shorter than the required {w}")
        w = int(window)
    c, start = alloc.reserve(w, horizon if gap is None else gap)
    x = np.zeros(s.dim, dtype=np.complex128)
    x[s.index(c, start) : s.index(c, start) + w] = geometric_window(lam, w)
    return x


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class OrbitDiagnostics:
    horizon: int
    per_power: list[float]
    sup_value: float
    tail_trend: list[float]
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values: Sequence[float], tail_from: int = 0, window: int | None = None, **extra):
        vals = [float(v) for v in values]
        h = len(vals)
        window = window or max(1, h // 10)
        tail = vals[tail_from:]
        trend = [max(tail[i : i + window]) for i in range(0, len(tail), window)] if tail else []
        return cls(h, vals, max(vals) if vals else 0.0, trend, dict(extra))

    def trend_nonincreasing(self, slack: float = 1e-12) -> bool:
        t = self.tail_trend
        return all(t[i + 1] <= t[i] + slack for i in range(len(t) - 1))

    def to_csv(self, thresholds: Sequence[float] | None = None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "deviation", "threshold_in_force"])
        for n, v in enumerate(self.per_power, start=1):
            thr = thresholds[n - 1] if thresholds is not None else self.extra.get("eps", "")
            wr.writerow([n, repr(float(v)), thr])
        return buf.getvalue()

    def to_json(self) -> dict:
        out = {
            "horizon": self.horizon,
            "per_power": self.per_power,
            "sup_value": self.sup_value,
            "tail_trend": self.tail_trend,
        }
        out.update(self.extra)
        return out


def hamdan_windows(eps: float, K: float = 1.0) -> int:
    """Default window count ceil(25 K^2 / eps^2) + 1."""
    return int(math.ceil(25 * K * K / (eps * eps))) + 1


def first_power_below(r: float, bound: float) -> int:
    """Smallest n >= 1 with r^n < bound."""
    if r < bound:
        return 1
    if r == 0:
        return 1
    n = max(1, int(math.floor(math.log(bound) / math.log(r))))
    while r**n >= bound:
        n += 1
    while n > 1 and r ** (n - 1) < bound:
        n -= 1
    return n


def _cut_point(values: np.ndarray, start: int, threshold: float) -> int:
    """Smallest n > start with |values[n'-1]| < threshold for all n' >= n."""
    bad = np.flatnonzero(np.abs(values) >= threshold)
    last = int(bad[-1]) + 1 if bad.size else 0
    return max(start + 1, last + 1)


# ---------------------------------------------------------------------------
# Hamdan vectors and diagonal compressions


def hamdan_vector(
    s: ShiftModel,
    lam: complex,
    A=None,
    guard=None,
    eps: float = 0.25,
    horizon: int = 300,
    n_windows: int | None = None,
    seed: int = 0,
    allocator: WindowAllocator | None = None,
    guard_horizon: int = 0,
    tol: float | None = None,
) -> tuple[np.ndarray, OrbitDiagnostics]:
    """Unit x = s^{-1/2} sum_r zeta_r u_r with small moment and cross-orbit errors.

    The u_r are moment vectors for lambda, exact for powers up to n0 (the
    least n with |lambda|^n < eps/5) and at least as long as needed for the
    tail |lambda|^n to fall below eps/(5s).  Each is placed clear of the
    guard, of A and of the previous windows; zeta_r are seeded unit phases
    (zeta_1 = 1), which leave every u_r's own moments unchanged and keep the
    cross terms of packed windows from adding up coherently.  Cut points
    n_1 < n_2 < ... are found by scanning the cross inner products against
    eps/(5s) and reported.
    """
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    if abs(lam) >= 1:
        raise InputError("|lambda| must be below 1")
    K = s.power_bound(horizon)
    nwin = int(n_windows) if n_windows is not None else hamdan_windows(eps, K)
    if nwin < 1:
        raise InputError("n_windows must be positive")
    alloc = allocator if allocator is not None else WindowAllocator(s)
    a_cols = _columns(A, s.dim)
    g_cols = _columns(guard, s.dim)
    alloc.block(a_cols)
    alloc.block(g_cols)
    n0 = first_power_below(abs(lam), eps / 5)
    thr = eps / (5 * nwin)
    tol = tol if tol is not None else min(1e-10, thr / 10)
    exact_h = max(n0, first_power_below(abs(lam), thr) if lam != 0 else n0)
    gap = max(n0, guard_horizon) + 1
    rng = np.random.default_rng(seed)
    us = []
    for r in range(nwin):
        u = moment_vector(s, lam, exact_h, None, tol, alloc, gap=gap)
        if r:
            u = u * np.exp(2j * np.pi * rng.random())
        us.append(u)
    U = np.column_stack(us)
    x = U.sum(axis=1) / math.sqrt(nwin)

    # cut points: u_r against the earlier windows and A, both orbit directions
    cuts = [n0]
    for r in range(nwin):
        cols = np.hstack([U[:, :r], a_cols])
        if cols.shape[1] == 0:
            cuts.append(cuts[-1] + 1)
            continue
        fwd = orbit_inner(s, U[:, r], cols, horizon)
        bwd = orbit_inner(s, U[:, r], cols, horizon, adjoint=True)
        vals = np.max(np.abs(np.hstack([fwd, bwd])), axis=1)
        cuts.append(_cut_point(vals, cuts[-1], thr))

    moments = orbit_inner(s, x, x[:, None], horizon)[:, 0]
    target = lam ** np.arange(1, horizon + 1)
    per_power = np.abs(moments - target)
    extra = {
        "lambda": [float(np.real(lam)), float(np.imag(lam))],
        "eps": eps,
        "n_windows": nwin,
        "nominal_window_count": hamdan_windows(eps, K),
        "n0": n0,
        "cut_points": cuts,
        "power_bound": K,
    }
    if a_cols.size:
        cf = np.abs(orbit_inner(s, x, a_cols, horizon)).max(initial=0.0)
        cb = np.abs(orbit_inner(s, x, a_cols, horizon, adjoint=True)).max(initial=0.0)
        extra["sup_cross_A"] = float(max(cf, cb))
    diag = OrbitDiagnostics.from_values(per_power, tail_from=min(cuts[-1], horizon - 1), **extra)
    return x, diag


def _columns(v, dim: int) -> np.ndarray:
    if v is None:
        return np.zeros((dim, 0), dtype=np.complex128)
    if isinstance(v, Frame):
        return np.asarray(v.columns)
    if isinstance(v, (list, tuple)):
        if not v:
            return np.zeros((dim, 0), dtype=np.complex128)
        return np.column_stack([np.asarray(a, dtype=np.complex128) for a in v])
    a = np.asarray(v, dtype=np.complex128)
    return a[:, None] if a.ndim == 1 else a


def diagonal_compression(
    s: ShiftModel,
    lambdas,
    eps: float = 0.25,
    horizon: int = 300,
    windows_per_vector: int = 1,
    seed: int = 0,
    allocator: WindowAllocator | None = None,
) -> tuple[Frame, OrbitDiagnostics]:
    """Orthonormal e_1..e_m' with sup_n ||(T^n)_L - D^n|| <= eps, D = diag(lambda_k).

    e_{s+1} is a Hamdan vector for lambda_{s+1} at accuracy
    eps / (2^{s+4} (s+1)) that avoids the earlier e_k and their orbits up to
    the current cut point.  The window count per vector defaults to 1: the
    nominal count 25/threshold^2 is reported but cannot be placed at desk
    scale.
    """
    lam = np.atleast_1d(np.asarray(lambdas, dtype=np.complex128))
    if lam.size == 0:
        raise InputError("need at least one target")
    r = float(np.max(np.abs(lam)))
    if r >= 1:
        raise InputError("all targets must lie in the open unit disc")
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    alloc = allocator if allocator is not None else WindowAllocator(s)
    n0 = first_power_below(r, eps / 16)
    cuts = [n0]
    es: list[np.ndarray] = []
    thresholds = []
    for k, lk in enumerate(lam):
        thr = eps / (2 ** (k + 4) * (k + 1))
        thresholds.append(thr)
        e, _ = hamdan_vector(
            s,
            complex(lk),
            A=es or None,
            guard=None,
            eps=min(thr, 0.999),
            horizon=horizon,
            n_windows=windows_per_vector,
            seed=seed + k,
            allocator=alloc,
            guard_horizon=cuts[-1],
        )
        es.append(e)
        E = np.column_stack(es)
        cross = np.zeros(horizon)
        for col in range(E.shape[1]):
            vals = np.abs(orbit_inner(s, E[:, col], E, horizon))
            off = np.delete(vals, col, axis=1) if E.shape[1] > 1 else np.zeros((horizon, 1))
            cross = np.maximum(cross, off.max(axis=1))
        nxt = _cut_point(cross, cuts[-1], thr)
        nxt = max(nxt, first_power_below(r, eps / 2 ** (k + 5)) if r > 0 else nxt)
        cuts.append(nxt)
    E = np.column_stack(es)
    frame = Frame(E)
    dev = []
    exact = []
    separated = 0
    for n, comp in compressed_powers(s, E, horizon):
        d = operator_norm(comp - np.diag(lam**n))
        dev.append(d)
        if n <= n0:
            exact.append(d)
        if np.any(comp != 0):
            separated = n + 1
    # past `separated` the compression is exactly zero and the deviation is r^n
    tail_start = max(cuts[-1], separated)
    diag = OrbitDiagnostics.from_values(
        dev,
        tail_from=min(tail_start, horizon - 1),
        eps=eps,
        n0=n0,
        cut_points=cuts,
        tail_start=tail_start,
        horizon_covers_cuts=horizon >= 2 * cuts[-1],
        thresholds=thresholds,
        exact_regime_max=max(exact) if exact else 0.0,
        windows_per_vector=windows_per_vector,
    )
    return frame, diag


# ---------------------------------------------------------------------------
# spectral discretization and contraction matching


def _unitary_schur(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    tri, v = scipy.linalg.schur(u, output="complex")
    return np.diag(tri), v


def discretize_unitary(u, k: int) -> tuple[np.ndarray, float]:
    """Snap the spectrum of a unitary to the k-th roots of unity.

    The eigenvalue e^{2 pi i t}, t in [0,1), goes to e^{2 pi i j/k} with
    j = floor(t k) (the arc [j/k, (j+1)/k) it lies on).  Returns D and the
    bound ||U - D|| (eigenvectors are shared, so it is the largest eigenvalue
    displacement, at most 2 pi / k).
    """
    d, _, bound = _discretize(u, k)
    return d, bound


def _discretize(u, k: int):
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionMismatch("U must be square")
    if k < 1:
        raise InputError("k must be positive")
    if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) > 1e-8:
        raise NotUnitary("U*U differs from I by more than 1e-8")
    ev, v = _unitary_schur(u)
    t = np.mod(np.angle(ev) / (2 * np.pi), 1.0)
    j = np.floor(t * k + 1e-9).astype(int) % k
    snapped = np.exp(2j * np.pi * j / k)
    on_grid = np.abs(ev - snapped) <= 1e-12
    snapped = np.where(on_grid, ev, snapped)
    dmat = (v * snapped) @ v.conj().T
    if np.all(on_grid):
        dmat = u.copy()
    bound = float(np.max(np.abs(ev - snapped))) if ev.size else 0.0
    return dmat, (v, snapped), bound


def sup_n_c_power(c: float) -> tuple[float, int]:
    """max over integers n >= 1 of n c^n and the maximizing n."""
    if c <= 0:
        return 0.0, 1
    peak = max(1, int(math.ceil(-1 / math.log(c))) + 2)
    ns = np.arange(1, 2 * peak + 3)
    vals = ns * c**ns
    i = int(np.argmax(vals))
    return float(vals[i]), int(ns[i])


def roots_count(c0: float, eps: float) -> int:
    """Smallest k with sup_n n c0^n < k eps / (4 pi)."""
    sup, _ = sup_n_c_power(c0)
    k = int(math.floor(4 * math.pi * sup / eps)) + 1
    while not sup < k * eps / (4 * math.pi):
        k += 1
    return max(k, 1)


def discretization_budget(c0: float, c: float, k: int, depth: int, horizon: int) -> float:
    """sup_n [2 pi n c0^n / k + 1{n > depth} (c0^n + c^n)] over 1 <= n <= horizon.

    The first term bounds ||(c0 U)^n - (c0 D)^n||; the second covers powers
    beyond the dilation depth, where J*(c0 U)^n J no longer equals C^n.
    """
    n = np.arange(1, horizon + 1)
    vals = 2 * np.pi * n * c0**n / k + (n > depth) * (c0**n + c**n)
    return float(vals.max())


def match_contraction(
    s: ShiftModel,
    c_tilde,
    eps: float = 0.5,
    horizon: int = 300,
    seed: int = 0,
    depth: int | None = None,
) -> tuple[Frame, np.ndarray, OrbitDiagnostics]:
    """Frame L with sup_{n <= horizon} ||(T^n)_L - C^n|| <= eps.

    Stages: bump c = ||C|| to c0 = c + (1 - c)/4; choose the least k with
    sup_n n c0^n < k eps/(4 pi); dilate C/c0 to a unitary U of depth H (the
    least H whose discretization budget is <= eps/2, unless given); snap the
    spectrum of U to the k-th roots; compress T to the diagonal c0 D at
    eps/2; transport back through the eigenbasis of U and the dilation frame.
    Returns the frame, the transported C (equal to C in these coordinates)
    and the diagnostics with the per-stage budgets.
    """
    cm = np.asarray(c_tilde, dtype=np.complex128)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise DimensionMismatch("C must be square")
    c = operator_norm(cm)
    if c >= 1:
        raise NotStrictContraction(f"|C| = {c:.6g} is not below 1")
    c0 = c + (1 - c) / 4
    k = roots_count(c0, eps)
    if depth is None:
        depth = 1
        while discretization_budget(c0, c, k, depth, horizon) > eps / 2:
            depth += 1
            if depth > horizon:
                break
    b1 = discretization_budget(c0, c, k, depth, horizon)
    u, j = power_dilation(cm, c0, depth)
    _, (v, snapped), snap_bound = _discretize(u, k)
    lam = c0 * snapped
    e_frame, diag2 = diagonal_compression(s, lam, eps / 2, horizon, seed=seed)
    transport = v.conj().T @ np.asarray(j.columns)
    l_cols = np.asarray(e_frame.columns) @ transport
    frame = Frame(l_cols)
    dev = []
    stage1 = []
    cn = np.eye(cm.shape[0], dtype=np.complex128)
    dn = np.eye(lam.size, dtype=np.complex128)
    jc = np.asarray(j.columns)
    dtil = (v * lam) @ v.conj().T
    for n, comp in compressed_powers(s, l_cols, horizon):
        cn = cn @ cm
        dn = dn @ dtil
        dev.append(operator_norm(comp - cn))
        stage1.append(operator_norm(jc.conj().T @ dn @ jc - cn))
    sup_k, n_star = sup_n_c_power(c0)
    diag = OrbitDiagnostics.from_values(
        dev,
        tail_from=min(diag2.extra["tail_start"], horizon - 1),
        eps=eps,
        c=c,
        c0=c0,
        k=k,
        sup_n_c0_power=sup_k,
        argmax_n=n_star,
        dilation_depth=depth,
        snap_bound=snap_bound,
        stage1_budget=b1,
        stage1_measured=max(stage1) if stage1 else 0.0,
        stage2_measured=diag2.sup_value,
        stage2_budget=eps / 2,
        vectors=int(lam.size),
    )
    if diag.sup_value > eps:
        raise NonConvergence(f"measured sup {diag.sup_value:.3e} exceeds eps {eps:g}", diag.sup_value)
    return frame, cm.copy(), diag


def weak_orbit_decay(s: ShiftModel, probes: Sequence[tuple[np.ndarray, np.ndarray]], horizon: int):
    """Table of |<T^n x, y>| for each probe pair (x, y) and n = 0..horizon.

    Returns (rows, flags): rows are (probe, n, value); flags[p] says whether
    the sequence is nonincreasing after its peak.
    """
    rows = []
    flags = []
    for p, (x, y) in enumerate(probes):
        x = np.asarray(x, dtype=np.complex128)
        y = np.asarray(y, dtype=np.complex128)
        vals = [abs(np.vdot(y, x))]
        vals += list(np.abs(orbit_inner(s, x, y[:, None], horizon)[:, 0]))
        for n, v in enumerate(vals):
            rows.append((p, n, float(v)))
        peak = int(np.argmax(vals))
        tail = vals[peak:]
        flags.append(all(tail[i + 1] <= tail[i] + 1e-15 for i in range(len(tail) - 1)))
    return rows, flags


def decay_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["probe", "n", "modulus"])
    for p, n, v in rows:
        wr.writerow([p, n, repr(v)])
    return buf.getvalue()
