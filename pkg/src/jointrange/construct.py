"""Interpolation of points of W(T) from eigenvalues and a reservoir, and star shapes.

The main routine produces a unit vector x with <T x, x> equal to a target in
the interior of conv(reservoir hull ∪ point spectrum).  It grows
x_k = v_k + w_k with |x_k|^2 = 1 - 2^-k, where w_k lives on finitely many
eigenvectors (coefficients from Zenger's lemma) and v_k on fresh reservoir
vectors.  Each step cancels the current error eps_k by adding the convex
combination -eps_k 2^(k+1) of eigen-net and cluster values with total weight
2^-(k+1).

Reservoir demand: one step uses each cluster at most once, so a reservoir
whose clusters all have multiplicity >= the number of steps never runs dry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np
import scipy.optimize

from .errors import (
    CenterOutside,
    ConvexDecompositionFailure,
    HeadroomExhausted,
    InfeasibleTarget,
    InputError,
    InsufficientStarCenter,
    NonConvergence,
)
from .opcore import Frame, OperatorTuple, as_point, sup_norm, to_real
from .ranges import (
    Polytope2n,
    RangeWitness,
    RankKWitness,
    ReservoirModel,
    ReservoirSpender,
    compres_vector,
    convex_weights,
    rank_k_residual,
    reservoir_essential_polytope,
)
from .zenger import zenger_solve


def reservoir_demand(steps: int) -> int:
    """Cluster multiplicity that suffices for ``steps`` claim steps."""
    return int(steps)


# ---------------------------------------------------------------------------
# geometry


def inradius(p: Polytope2n, center) -> float:
    """Largest r with the cube center + [-r, r]^2n inside p.

    Uses the half-space description: for a . x <= b the cube fits iff
    a . center + r |a|_1 <= b.
    """
    c = np.asarray(center, dtype=float)
    if np.iscomplexobj(np.asarray(center)) or c.size != p.ambient:
        c = to_real(as_point(center))
    a, b = p.halfspaces()
    if len(a) == 0:
        raise CenterOutside("polytope has no bounding half-spaces")
    slack = (b - a @ c) / np.sum(np.abs(a), axis=1)
    r = float(np.min(slack))
    if r <= 0:
        raise CenterOutside(f"center is not interior (margin {r:.3e})")
    return r


def working_radius(points: np.ndarray, center: np.ndarray) -> float:
    """Inradius of conv(points) at center, relative to the affine hull.

    For a full-dimensional hull this is :func:`inradius`.  When the hull is
    flat but contains the center (e.g. a real segment for n = 1), the
    iteration never leaves the affine hull, so the Euclidean inradius inside
    it, divided by sqrt(2n) to dominate the sup-norm, is a valid radius.
    """
    pts = np.atleast_2d(points)
    dim = pts.shape[1]
    base = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - base, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * max(1.0, float(np.max(np.abs(pts))))))
    if rank == dim:
        return inradius(Polytope2n(pts), center)
    off = center - base
    if rank == 0 or np.linalg.norm(vt[rank:] @ off) > 1e-12 * max(1.0, np.linalg.norm(off)):
        raise CenterOutside("center is off the affine hull of the points")
    basis = vt[:rank]
    low = Polytope2n((pts - base) @ basis.T)
    a, b = low.halfspaces()
    a_norm = np.linalg.norm(a, axis=1)
    r = float(np.min((b - a @ (basis @ off)) / a_norm))
    if r <= 0:
        raise CenterOutside(f"center is not relatively interior (margin {r:.3e})")
    return r / math.sqrt(dim)


def _linf(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.max(np.abs(a - b), axis=-1)


@dataclass(frozen=True)
class EigenData:
    """Joint eigenpairs: T_j u_i = values[i, j] u_i up to ``residual_bound``."""

    values: np.ndarray
    vectors: np.ndarray
    residual_bound: float = 0.0

    @property
    def count(self) -> int:
        return self.values.shape[0]

    def subset(self, idx) -> "EigenData":
        idx = list(idx)
        return EigenData(self.values[idx], self.vectors[:, idx], self.residual_bound)

    @classmethod
    def empty(cls, n: int, dim: int) -> "EigenData":
        return cls(np.zeros((0, n), dtype=np.complex128), np.zeros((dim, 0), dtype=np.complex128))

    @classmethod
    def from_tuple(cls, t: OperatorTuple, tol: float = 1e-9, seed: int = 0) -> "EigenData":
        """Joint eigenvectors of a commuting tuple.

        Eigenvectors of a generic real combination of the members are joint
        eigenvectors when eigenvalues of the combination are simple; pairs
        whose joint residual exceeds ``tol`` are discarded.
        """
        rng = np.random.default_rng(seed)
        theta = rng.standard_normal(t.n) + 1j * rng.standard_normal(t.n)
        comb = np.tensordot(theta, t.stack(), axes=1)
        _, vecs = np.linalg.eig(comb)
        vals, keep, worst = [], [], 0.0
        for i in range(vecs.shape[1]):
            v = vecs[:, i] / np.linalg.norm(vecs[:, i])
            lam = t.quadratic_form(v)
            res = max(float(np.linalg.norm(m @ v - l * v)) for m, l in zip(t, lam))
            if res <= tol:
                vals.append(lam)
                keep.append(v)
                worst = max(worst, res)
        if not keep:
            return cls.empty(t.n, t.dim)
        return cls(np.array(vals), np.column_stack(keep), worst)

    @classmethod
    def from_reservoir_base(cls, res: ReservoirModel, tol: float = 1e-9, seed: int = 0) -> "EigenData":
        """Eigenpairs of the base block, embedded in the reservoir space."""
        if res.base is None:
            return cls.empty(res.n, res.dim)
        e = cls.from_tuple(res.base, tol, seed)
        vec = np.zeros((res.dim, e.count), dtype=np.complex128)
        vec[: res.base_dim] = e.vectors
        return cls(e.values, vec, e.residual_bound)


def select_eigen_net(e: EigenData, reservoir_poly: Polytope2n | None, r: float) -> EigenData:
    """Greedy farthest-point r/2-net (real sup-norm) of eigenvalues outside the polytope.

    Eigenvalues inside the reservoir polytope need no representative: every
    half-space containing the polytope contains them.
    """
    if r <= 0:
        raise InputError("r must be positive")
    if e.count == 0:
        return e
    pts = to_real(e.values)
    outside = [
        i for i in range(e.count) if reservoir_poly is None or not reservoir_poly.contains(pts[i], 1e-12)
    ]
    if not outside:
        return e.subset([])
    chosen = [outside[0]]
    dist = _linf(pts[outside], pts[outside[0]])
    while True:
        far = int(np.argmax(dist))
        if dist[far] < r / 2:
            break
        chosen.append(outside[far])
        dist = np.minimum(dist, _linf(pts[outside], pts[outside[far]]))
    return e.subset(chosen)


# ---------------------------------------------------------------------------
# the claim iteration


@dataclass
class ClaimState:
    k: int
    v: np.ndarray
    w: np.ndarray
    alphas: np.ndarray
    norm_sq: float
    residual: float
    spend: int = 0

    @property
    def x(self) -> np.ndarray:
        return self.v + self.w

    def to_log(self) -> dict:
        return {
            "k": self.k,
            "norm_sq": self.norm_sq,
            "residual": self.residual,
            "spend": self.spend,
        }


@dataclass
class ClaimContext:
    """Everything claim_step needs besides the state (already target-shifted)."""

    res: ReservoirModel
    net: EigenData
    target: np.ndarray
    r: float
    spender: ReservoirSpender = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.spender is None:
            self.spender = ReservoirSpender(self.res)

    def shifted_form(self, x: np.ndarray) -> np.ndarray:
        """<(T - target) x, x>."""
        return self.res.quadratic_form(x) - self.target * np.vdot(x, x).real


def initial_state(res: ReservoirModel, net: EigenData) -> ClaimState:
    z = np.zeros(res.dim, dtype=np.complex128)
    return ClaimState(0, z, z.copy(), np.zeros(net.count), 0.0, 0.0)


def claim_step(ctx: ClaimContext, state: ClaimState) -> ClaimState:
    """One step x_k -> x_{k+1} of the interpolation iteration."""
    k = state.k
    scale = 2.0 ** (k + 1)
    eps = ctx.shifted_form(state.x)
    goal = -eps * scale
    net_vals = ctx.net.values - ctx.target
    cl_vals = ctx.res.cluster_values() - ctx.target
    pts = np.vstack([net_vals, cl_vals]) if net_vals.size else cl_vals
    c = _decompose(to_real(pts), to_real(goal), ctx.net.count, ctx.r / 2)
    m = ctx.net.count
    c_net, c_cl = c[:m], c[m:]

    beta = state.alphas + c_net / scale
    w = np.zeros(ctx.res.dim, dtype=np.complex128)
    if m and beta.sum() > 0:
        total = float(beta.sum())
        sol = zenger_solve(ctx.net.vectors, beta / total)
        w = math.sqrt(total) * sol.u

    v = state.v.copy()
    guard = None
    if np.linalg.norm(state.v) > 0:
        guard = Frame((state.v / np.linalg.norm(state.v))[:, None])
    for i in np.flatnonzero(c_cl > 0):
        y = compres_vector(ctx.res, ctx.res.clusters[i].value, guard, ctx.r / 4, ctx.spender)
        v += math.sqrt(c_cl[i] / scale) * y
    x = v + w
    norm_sq = float(np.vdot(x, x).real)
    residual = sup_norm(ctx.shifted_form(x))
    target_norm = 1 - 2.0 ** -(k + 1)
    if abs(norm_sq - target_norm) > 1e-9:
        raise NonConvergence(f"norm schedule broken at step {k + 1}: {norm_sq!r}", residual)
    if residual >= ctx.r / 2.0 ** (k + 3):
        raise NonConvergence(f"residual schedule broken at step {k + 1}: {residual:.3e}", residual)
    return ClaimState(k + 1, v, w, beta, norm_sq, residual, ctx.spender.spend)


def _lp_decompose(points: np.ndarray, goal: np.ndarray, n_net: int) -> np.ndarray | None:
    m = points.shape[0]
    cost = np.zeros(m)
    cost[n_net:] = 1.0
    a_eq = np.vstack([points.T, np.ones((1, m))])
    b_eq = np.concatenate([goal, [1.0]])
    lp = scipy.optimize.linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * m, method="highs")
    if lp.status != 0:
        return None
    sup = np.flatnonzero(lp.x > 1e-12)
    sol, *_ = np.linalg.lstsq(a_eq[:, sup], b_eq, rcond=None)
    if np.any(sol < -1e-12):
        return None
    c = np.zeros(m)
    c[sup] = np.clip(sol, 0, None)
    return c / c.sum()


def _decompose(points: np.ndarray, goal: np.ndarray, n_net: int, radius: float) -> np.ndarray:
    """Convex weights for goal, preferring eigen-net points over clusters.

    A linear program minimizing the cluster mass returns a basic solution
    (support <= dim+1) whose support is then solved exactly.  Goals much
    smaller than the solver tolerance are handled by blending: with c0 the
    weights of the center and c' those of goal rescaled to sup-norm
    ``radius``, (1-s) c0 + s c' hits goal exactly for s = |goal|/radius.
    A goal outside the hull means the radius was wrong.
    """
    size = float(np.max(np.abs(goal))) if goal.size else 0.0
    if 0 < size < radius:
        c0 = _lp_decompose(points, np.zeros_like(goal), n_net)
        c1 = _lp_decompose(points, goal * (radius / size), n_net)
        c = None if c0 is None or c1 is None else (1 - size / radius) * c0 + (size / radius) * c1
    else:
        c = _lp_decompose(points, goal, n_net)
    if c is None:
        c, _ = convex_weights(points, goal)
    c = c / c.sum()
    misfit = float(np.max(np.abs(points.T @ c - goal)))
    if misfit > 1e-12 * max(1.0, float(np.max(np.abs(points)))):
        raise ConvexDecompositionFailure(f"correction leaves the polytope (misfit {misfit:.3e})")
    return c


def interpolate_numerical_range(
    res: ReservoirModel,
    eigen: EigenData | None,
    target,
    tol: float = 1e-9,
    max_k: int = 40,
    min_k: int = 0,
    trace: TextIO | Callable[[dict], None] | None = None,
) -> RangeWitness:
    """Unit x with <T x, x> = target for a target interior to conv(reservoir ∪ eigenvalues).

    ``trace`` receives one record per step (k, norm_sq, residual, spend):
    a callable is called with the dict, a text stream gets JSON lines.
    Iteration stops at the first k >= min_k whose normalized iterate meets
    ``tol``.
    """
    lam = as_point(target, res.n)
    eigen = eigen if eigen is not None else EigenData.empty(res.n, res.dim)
    pts = []
    if res.clusters:
        pts.append(res.cluster_values())
    if eigen.count:
        pts.append(eigen.values)
    if not pts:
        raise InfeasibleTarget("no reservoir clusters and no eigenvalues")
    try:
        r = working_radius(to_real(np.vstack(pts)), to_real(lam))
    except CenterOutside as exc:
        raise InfeasibleTarget(f"target is not interior: {exc}") from None
    if r < 1e-12:
        raise InfeasibleTarget("target is too close to the boundary")
    rpoly = reservoir_essential_polytope(res) if res.clusters else None
    net = select_eigen_net(eigen, rpoly, r)
    ctx = ClaimContext(res, net, lam, r)
    state = initial_state(res, net)

    def emit(rec):
        if trace is None:
            return
        if callable(trace):
            trace(rec)
        else:
            trace.write(json.dumps(rec, sort_keys=True) + "\n")

    best = np.inf
    while state.k < max_k:
        state = claim_step(ctx, state)
        rec = state.to_log()
        rec["r"] = r
        emit(rec)
        x = state.x / math.sqrt(state.norm_sq)
        best = sup_norm(res.quadratic_form(x) - lam)
        if state.k >= min_k and best <= tol:
            return RangeWitness(lam, x, best)
    raise NonConvergence(f"residual {best:.3e} above {tol:g} after {max_k} steps", best)


# ---------------------------------------------------------------------------
# star-shaped rank-k ranges


def star_interpolate(t: OperatorTuple, w_mu: RankKWitness, w_lambda: RankKWitness, tau: float) -> RankKWitness:
    """Rank-k witness for tau*mu + (1-tau)*lambda from witnesses for mu (rank k) and lambda (rank m).

    With x_s the columns of the mu-frame and M the lambda-subspace, pick
    orthonormal y_s in M orthogonal to {x_s, T_j x_s, T_j* x_s}; then
    u_s = sqrt(tau) x_s + sqrt(1-tau) y_s spans the new witness.  The cross
    terms vanish by the orthogonality and the y_s see only the scalar
    compression lambda.
    """
    if not 0.0 <= tau <= 1.0:
        raise InputError("tau must lie in [0, 1]")
    k, m, n = w_mu.k, w_lambda.k, t.n
    if m <= k * (2 * n + 1):
        raise InsufficientStarCenter(f"center rank {m} must exceed k(2n+1) = {k * (2 * n + 1)}")
    if tau == 1.0:
        return w_mu
    if tau == 0.0:
        sub = w_lambda.frame.select(list(range(k)))
        return RankKWitness(w_lambda.point, sub, rank_k_residual(t, sub.columns, w_lambda.point))
    x = np.asarray(w_mu.frame.columns)
    mm = np.asarray(w_lambda.frame.columns)
    guard = [x] + [mat @ x for mat in t] + [mat.conj().T @ x for mat in t]
    g = np.hstack(guard)
    _, s, vh = np.linalg.svd(g.conj().T @ mm, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 1.0)))
    null = vh[rank:].conj().T
    if null.shape[1] < k:
        raise HeadroomExhausted(
            f"only {null.shape[1]} free directions in the center subspace, need {k}"
        )
    y = mm @ null[:, -k:]
    u = math.sqrt(tau) * x + math.sqrt(1 - tau) * y
    point = tau * np.asarray(w_mu.point) + (1 - tau) * np.asarray(w_lambda.point)
    f = Frame(u)
    return RankKWitness(point, f, rank_k_residual(t, f.columns, point))
