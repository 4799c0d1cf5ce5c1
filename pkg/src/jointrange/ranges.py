"""Joint numerical ranges, their convex hulls, rank-k ranges and reservoirs.

Points of C^n are identified with R^2n through :func:`opcore.to_real`.  The
support function of conv W(T) in a real direction d is the top eigenvalue of

    H(d) = sum_j d_{2j-1} Re T_j + d_{2j} Im T_j,

and the top eigenvector is a unit vector whose range point attains it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.spatial
import scipy.stats

from ._parallel import pmap
from .errors import (
    DimensionMismatch,
    DimensionTooSmall,
    EigensolverFailure,
    EmptyRegion,
    InputError,
    InsufficientMultiplicity,
    NotFound,
    NotInRange,
    SearchFailure,
    TargetOutsidePolytope,
)
from .opcore import (
    EmptyFrame,
    Frame,
    OperatorTuple,
    as_matrix,
    as_point,
    direct_sum,
    sup_norm,
    to_real,
)


# ---------------------------------------------------------------------------
# directions and support functions


def normalize_direction(d) -> np.ndarray:
    d = np.asarray(d, dtype=float).ravel()
    nrm = np.linalg.norm(d)
    if not np.isfinite(nrm) or nrm == 0:
        raise InputError("direction must be a finite nonzero real vector")
    return d / nrm


def pencil(t: OperatorTuple, d) -> np.ndarray:
    """The Hermitian matrix H(d) whose top eigenvalue is the support value."""
    d = np.asarray(d, dtype=float)
    if d.shape != (2 * t.n,):
        raise DimensionMismatch(f"direction must have length {2 * t.n}")
    re, im = t.hermitian_parts()
    h = np.tensordot(d[0::2], re, axes=1) + np.tensordot(d[1::2], im, axes=1)
    return (h + h.conj().T) / 2


def support_function(t: OperatorTuple, d) -> tuple[float, np.ndarray]:
    """Support value of conv W(t) in direction ``d`` and a maximizing unit vector."""
    d = normalize_direction(d)
    try:
        w, v = np.linalg.eigh(pencil(t, d))
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from None
    return float(w[-1]), v[:, -1]


def axis_directions(dim: int) -> np.ndarray:
    eye = np.eye(dim)
    return np.vstack([eye, -eye])


def sphere_directions(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit directions in R^dim, the 2*dim signed axes first.

    In the plane the remaining directions are equally spaced angles.  In
    higher dimension they come from a scrambled Sobol sequence pushed through
    the Gaussian quantile function and normalized.
    """
    axes = axis_directions(dim)
    extra = max(count - len(axes), 0)
    if extra == 0:
        return axes
    if dim == 2:
        ang = 2 * np.pi * (np.arange(extra) + 0.5) / extra
        pts = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        sob = scipy.stats.qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(seed))
        m = int(math.ceil(math.log2(max(extra, 2))))
        u = sob.random_base2(m)[:extra]
        u = np.clip(u, 1e-12, 1 - 1e-12)
        pts = scipy.stats.norm.ppf(u)
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return np.vstack([axes, pts])


# ---------------------------------------------------------------------------
# polytopes


class Polytope2n:
    """A convex polytope in R^2n given by vertices and optional support data.

    ``directions``/``values`` (when present) are supporting half-spaces
    <d, x> <= value, i.e. an outer description.  Without them the half-space
    description is computed from the vertices.
    """

    def __init__(self, vertices, directions=None, values=None):
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        if v.size == 0:
            raise EmptyRegion("polytope has no vertices")
        self.vertices = v
        self.ambient = v.shape[1]
        if directions is not None:
            self.directions = np.atleast_2d(np.asarray(directions, dtype=float))
            self.values = np.asarray(values, dtype=float).ravel()
            if self.directions.shape != (self.values.size, self.ambient):
                raise DimensionMismatch("support cache shape disagrees with the vertices")
        else:
            self.directions = None
            self.values = None
        self._hs: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def n(self) -> int:
        return self.ambient // 2

    def support(self, d) -> float:
        """max over vertices of <d, v>."""
        return float(np.max(self.vertices @ np.asarray(d, dtype=float)))

    def supports(self, dirs: np.ndarray) -> np.ndarray:
        return np.max(dirs @ self.vertices.T, axis=1)

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Outer description (A, b) with rows a_i . x <= b_i."""
        if self.directions is not None:
            return self.directions, self.values
        if self._hs is None:
            self._hs = vertex_halfspaces(self.vertices)
        return self._hs

    def contains(self, x, tol: float = 1e-9) -> bool:
        a, b = self.halfspaces()
        x = np.asarray(x, dtype=float)
        return bool(np.all(a @ x <= b + tol))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def __repr__(self) -> str:
        return f"Polytope2n(ambient={self.ambient}, vertices={len(self.vertices)})"


def vertex_halfspaces(v: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Half-space description of conv(v), handling lower-dimensional hulls.

    Equalities of the affine hull appear as opposite pairs of half-spaces.
    Normals are unit vectors.
    """
    dim = v.shape[1]
    c = v.mean(axis=0)
    _, s, vt = np.linalg.svd(v - c, full_matrices=True)
    scale = max(1.0, float(np.max(np.abs(v))))
    r = int(np.sum(s > tol * scale))
    basis, normals = vt[:r], vt[r:]
    rows, rhs = [], []
    for a in normals:
        beta = float(a @ c)
        rows += [a, -a]
        rhs += [beta, -beta]
    if r == 1:
        proj = (v - c) @ basis[0]
        rows += [basis[0], -basis[0]]
        rhs += [float(basis[0] @ c + proj.max()), float(-(basis[0] @ c) - proj.min())]
    elif r >= 2:
        proj = (v - c) @ basis.T
        hull = scipy.spatial.ConvexHull(proj)
        for eq in hull.equations:
            a_low, off = eq[:-1], eq[-1]
            a = a_low @ basis
            nrm = np.linalg.norm(a)
            rows.append(a / nrm)
            rhs.append(float(-off / nrm + (a / nrm) @ c))
    return np.array(rows).reshape(-1, dim), np.array(rhs)


def hull_vertices(points: np.ndarray) -> np.ndarray:
    """Extreme points of conv(points) (all points if the hull is degenerate)."""
    points = np.atleast_2d(points)
    if len(points) <= points.shape[1] + 1:
        return points
    try:
        hull = scipy.spatial.ConvexHull(points)
    except scipy.spatial.QhullError:
        return points
    return points[np.sort(hull.vertices)]


def hausdorff(p: Polytope2n, q: Polytope2n, directions: int = 1024, seed: int = 0) -> float:
    """Hausdorff distance of two convex polytopes via sampled support functions.

    For convex bodies the Hausdorff distance is sup_{|d|=1} |h_p(d) - h_q(d)|;
    the supremum is taken over a deterministic direction sample (a lower
    bound that is tight as the sample refines).
    """
    if p.ambient != q.ambient:
        raise DimensionMismatch("polytopes live in different spaces")
    dirs = sphere_directions(p.ambient, directions, seed)
    return float(np.max(np.abs(p.supports(dirs) - q.supports(dirs))))


def conv_hull_boundary(t: OperatorTuple, directions: int, seed: int = 0) -> Polytope2n:
    """Outer polytope of conv W(t) from support evaluations on a sphere sample.

    Vertices are the range points of the maximizing eigenvectors, so each
    lies in W(t) and on its supporting hyperplane.
    """
    dim = 2 * t.n
    if directions < dim + 1:
        raise InputError(f"need at least {dim + 1} directions, got {directions}")
    dirs = sphere_directions(dim, directions, seed)

    def one(d):
        val, x = support_function(t, d)
        return val, to_real(t.quadratic_form(x))

    res = pmap(one, dirs)
    values = np.array([r[0] for r in res])
    verts = np.array([r[1] for r in res])
    return Polytope2n(verts, dirs, values)


def sample_range(t: OperatorTuple, count: int, seed: int = 0) -> np.ndarray:
    """Range points of ``count`` random unit vectors, as complex rows."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, t.dim)) + 1j * rng.standard_normal((count, t.dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    s = t.stack()
    return np.einsum("ci,jik,ck->cj", z.conj(), s, z)


# ---------------------------------------------------------------------------
# witnesses


@dataclass(frozen=True)
class RangeWitness:
    """A unit vector x with <T x, x> close to ``point``."""

    point: np.ndarray
    vector: np.ndarray
    residual: float

    def recompute(self, t: OperatorTuple) -> float:
        return sup_norm(t.quadratic_form(self.vector) - self.point)

    def to_json(self) -> dict:
        from .jsonio import vector_to_json

        return {
            "point": vector_to_json(self.point),
            "vector": vector_to_json(self.vector),
            "residual": float(self.residual),
        }


@dataclass(frozen=True)
class RankKWitness:
    """A rank-k frame F with F* T_j F close to point_j I_k."""

    point: np.ndarray
    frame: Frame
    residual: float

    @property
    def k(self) -> int:
        return self.frame.rank

    def recompute(self, t: OperatorTuple) -> float:
        return rank_k_residual(t, self.frame.columns, self.point)

    def drop_column(self, i: int = -1) -> "RankKWitness":
        """Witness of rank k-1 for the same point (sub-frames inherit the property)."""
        keep = [j for j in range(self.k) if j != (i % self.k)]
        f = self.frame.select(keep)
        return RankKWitness(self.point, f, self.residual)

    def to_json(self) -> dict:
        from .jsonio import frame_to_json, vector_to_json

        return {
            "point": vector_to_json(self.point),
            "frame": frame_to_json(self.frame),
            "residual": float(self.residual),
        }


def rank_k_residual(t: OperatorTuple, cols: np.ndarray, point) -> float:
    """max_j ||F* T_j F - point_j I||_F."""
    k = cols.shape[1]
    ch = cols.conj().T
    eye = np.eye(k)
    return max(float(np.linalg.norm(ch @ m @ cols - p * eye)) for m, p in zip(t, point))


# ---------------------------------------------------------------------------
# membership in W(T)


def _range_residual_and_jac(stack: np.ndarray, target: np.ndarray, dim: int):
    stack_h = np.conj(np.swapaxes(stack, 1, 2))

    def split(p):
        z = p[:dim] + 1j * p[dim:]
        return z

    def fun(p):
        z = split(p)
        s = np.vdot(z, z).real
        q = np.einsum("i,jik,k->j", z.conj(), stack, z) / s
        r = q - target
        return np.concatenate([r.real, r.imag])

    def jac(p):
        z = split(p)
        s = np.vdot(z, z).real
        tz = stack @ z
        thz = stack_h @ z
        q = np.einsum("i,ji->j", z.conj(), tz) / s
        da = (tz + thz.conj() - 2 * q[:, None] * z.real[None, :]) / s
        db = (1j * thz.conj() - 1j * tz - 2 * q[:, None] * z.imag[None, :]) / s
        jc = np.hstack([da, db])
        return np.vstack([jc.real, jc.imag])

    return fun, jac


def membership_in_range(
    t: OperatorTuple,
    target,
    tol: float = 1e-8,
    seed: int = 0,
    max_restarts: int = 20,
) -> RangeWitness:
    """Search for a unit x with max_j |<T_j x, x> - target_j| <= tol.

    Trust-region least squares on the sphere parameterization x = z/|z| from
    seeded random starts.  Failure is inconclusive: W(T) need not be convex
    and the search is local.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    lam = as_point(target, t.n)
    fun, jac = _range_residual_and_jac(t.stack(), lam, t.dim)
    rng = np.random.default_rng(seed)
    best_res, best_x = np.inf, None
    for _ in range(max(1, max_restarts)):
        p0 = rng.standard_normal(2 * t.dim)
        sol = scipy.optimize.least_squares(
            fun, p0, jac=jac, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400
        )
        z = sol.x[: t.dim] + 1j * sol.x[t.dim :]
        x = z / np.linalg.norm(z)
        res = sup_norm(t.quadratic_form(x) - lam)
        if res < best_res:
            best_res, best_x = res, x
        if res <= tol:
            break
    if best_res > tol:
        raise NotInRange(
            f"no witness within {tol:g} after {max_restarts} starts (best {best_res:.3e})",
            best_residual=best_res,
        )
    return RangeWitness(lam, best_x, best_res)


# ---------------------------------------------------------------------------
# rank-k ranges


def polar_frame(z: np.ndarray) -> np.ndarray:
    """Orthonormal polar factor Z (Z*Z)^(-1/2)."""
    u, _, vh = np.linalg.svd(z, full_matrices=False)
    return u @ vh


def _rank_k_fit(stack, k, point, free, rng, max_iters, tol):
    dim = stack.shape[1]
    eye = np.eye(k)

    def residual_blocks(f):
        c = np.einsum("ia,jik,kb->jab", f.conj(), stack, f)
        if free:
            lam = np.trace(c, axis1=1, axis2=2) / k
        else:
            lam = point
        return c - lam[:, None, None] * eye[None], lam

    def fun(p):
        z = (p[: dim * k] + 1j * p[dim * k :]).reshape(dim, k)
        d, _ = residual_blocks(polar_frame(z))
        return np.concatenate([d.real.ravel(), d.imag.ravel()])

    z0 = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    p0 = np.concatenate([z0.real.ravel(), z0.imag.ravel()])
    sol = scipy.optimize.least_squares(
        fun, p0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_iters
    )
    z = (sol.x[: dim * k] + 1j * sol.x[dim * k :]).reshape(dim, k)
    f = polar_frame(z)
    d, lam = residual_blocks(f)
    res = float(np.max(np.linalg.norm(d, axis=(1, 2))))
    return f, lam, res


def rank_k_membership(
    t: OperatorTuple,
    target,
    k: int,
    tol: float = 1e-8,
    seed: int = 0,
    max_iters: int = 2000,
    restarts: int = 8,
) -> RankKWitness:
    """Search for a rank-k frame F with F* T_j F = target_j I_k.

    Least squares over N x k matrices Z with the frame F = polar(Z); the
    polar retraction keeps every iterate orthonormal.  Failure is
    inconclusive.
    """
    if k < 1:
        raise InputError("k must be positive")
    if k > t.dim:
        raise DimensionTooSmall(f"k={k} exceeds the dimension {t.dim}")
    lam = as_point(target, t.n)
    if k == t.dim:
        f = np.eye(t.dim, dtype=np.complex128)
        res = rank_k_residual(t, f, lam)
        if res <= tol:
            return RankKWitness(lam, Frame(f), res)
        raise NotFound(f"the only rank-{k} subspace gives residual {res:.3e}", best_residual=res)
    stack = t.stack()
    rng = np.random.default_rng(seed)
    best = (np.inf, None)
    for _ in range(max(1, restarts)):
        f, _, res = _rank_k_fit(stack, k, lam, False, rng, max_iters, tol)
        if res < best[0]:
            best = (res, f)
        if res <= tol:
            break
    if best[0] > tol:
        raise NotFound(f"no rank-{k} witness within {tol:g} (best {best[0]:.3e})", best[0])
    return RankKWitness(lam, Frame(best[1]), best[0])


def hermitian_rank_k_interval(eigs, k: int) -> tuple[float, float]:
    """[lambda_{N-k+1}, lambda_k] (eigenvalues sorted decreasingly)."""
    e = np.sort(np.asarray(eigs, dtype=float))[::-1]
    n = e.size
    if k > n:
        raise DimensionTooSmall(f"k={k} exceeds the dimension {n}")
    lo, hi = float(e[n - k]), float(e[k - 1])
    if lo > hi:
        raise EmptyRegion(f"rank-{k} range of a {n}x{n} Hermitian matrix is empty")
    return lo, hi


def _clip(poly: np.ndarray, a: np.ndarray, b: float, tol: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon by a . x <= b (with slack tol)."""
    out = []
    m = len(poly)
    if m == 0:
        return poly
    vals = poly @ a - b
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        vp, vq = vals[i], vals[(i + 1) % m]
        pin, qin = vp <= tol, vq <= tol
        if pin:
            out.append(p)
        if pin != qin and m > 1:
            s = vp / (vp - vq)
            out.append(p + s * (q - p))
    return np.array(out).reshape(-1, 2)


def _dedupe(poly: np.ndarray, tol: float) -> np.ndarray:
    keep = []
    for p in poly:
        if not keep or np.max(np.abs(p - keep[-1])) > tol:
            keep.append(p)
    if len(keep) > 1 and np.max(np.abs(keep[0] - keep[-1])) <= tol:
        keep.pop()
    return np.array(keep).reshape(-1, 2)


def rank_k_range_single(a, k: int, directions: int = 256) -> Polytope2n:
    """Outer polygon of W_k(A): the intersection over angles theta of

        Re(e^{-i theta} mu) <= k-th largest eigenvalue of Re(e^{-i theta} A).

    The four axis angles are always included, so for Hermitian A the
    polygon's real extent is exactly [lambda_{N-k+1}, lambda_k].
    """
    a = as_matrix(a, square=True, name="A")
    dim = a.shape[0]
    if k < 1 or k > dim:
        raise DimensionTooSmall(f"k={k} must lie in 1..{dim}")
    dirs = sphere_directions(2, max(directions, 4))
    radius = 2 * float(np.linalg.norm(a, 2)) + 1.0
    poly = radius * np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float)
    values = np.empty(len(dirs))
    scale = radius
    for i, d in enumerate(dirs):
        e = np.exp(-1j * math.atan2(d[1], d[0]))
        h = e * a
        h = (h + h.conj().T) / 2
        w = np.linalg.eigvalsh(h)
        values[i] = w[dim - k]
    for d, v in zip(dirs, values):
        poly = _clip(poly, d, v, 1e-12 * scale)
        if len(poly) == 0:
            raise EmptyRegion(f"rank-{k} half-plane intersection is empty")
    poly = _dedupe(poly, 1e-12 * scale)
    # an empty intersection shows up as a sliver violating some constraint
    viol = np.max(poly @ dirs.T - values[None, :])
    if viol > 1e-9 * scale:
        raise EmptyRegion(f"rank-{k} half-plane intersection is empty")
    return Polytope2n(poly, dirs, values)


def polygon_center(p: Polytope2n) -> np.ndarray:
    return p.vertices.mean(axis=0)


def rank_k_demand(n: int, k: int) -> int:
    """Dimension guaranteeing W_k(T_1..T_n) is nonempty through the peel-off recursion."""
    kk = k * 4 ** (n - 1)
    return 3 * kk - 2


def _single_rank_k(a: np.ndarray, k: int, seed: int, tol: float) -> tuple[complex, np.ndarray]:
    """A rank-k witness (point, frame) for a single matrix of dimension >= 3k-2."""
    dim = a.shape[0]
    if k == dim:
        if np.allclose(a, a[0, 0] * np.eye(dim), atol=tol, rtol=0):
            return complex(a[0, 0]), np.eye(dim, dtype=np.complex128)
    if np.allclose(a, np.diag(np.diag(a)), atol=1e-14, rtol=0) and np.allclose(
        np.diag(a).imag, 0, atol=1e-14
    ):
        f, mu = _hermitian_diag_rank_k(np.diag(a).real, k)
        return mu, f
    t = OperatorTuple([a])
    try:
        poly = rank_k_range_single(a, k)
        mu = complex(*polygon_center(poly))
        w = rank_k_membership(t, [mu], k, tol=tol, seed=seed)
        return complex(w.point[0]), np.asarray(w.frame.columns)
    except (NotFound, EmptyRegion):
        pass
    stack = t.stack()
    rng = np.random.default_rng(seed)
    best = (np.inf, None, None)
    for _ in range(12):
        f, lam, res = _rank_k_fit(stack, k, None, True, rng, 4000, tol)
        if res < best[0]:
            best = (res, f, lam)
        if res <= tol:
            return complex(lam[0]), f
    raise SearchFailure(f"rank-{k} base case stalled at residual {best[0]:.3e}")


def _hermitian_diag_rank_k(d: np.ndarray, k: int) -> tuple[np.ndarray, complex]:
    """Explicit rank-k witness for a real diagonal matrix with N >= 2k-1.

    Pair the i-th largest with the i-th smallest entry (i < k) so each pair
    straddles mu = d_(k) (k-th largest); the middle entry itself is used
    when the pairs run out.
    """
    dim = d.size
    order = np.argsort(-d, kind="stable")
    mu = float(d[order[k - 1]])
    cols = np.zeros((dim, k), dtype=np.complex128)
    cols[order[k - 1], 0] = 1.0
    for i in range(k - 1):
        hi, lo = order[i], order[dim - 1 - i]
        a, b = d[hi], d[lo]
        if a - b <= 0:
            w = 1.0
        else:
            w = (mu - b) / (a - b)
        cols[hi, i + 1] = math.sqrt(w)
        cols[lo, i + 1] = math.sqrt(1 - w)
    return cols, complex(mu)


def rank_k_nonempty_search(t: OperatorTuple, k: int, seed: int = 0, tol: float = 1e-7) -> RankKWitness:
    """Constructive nonemptiness of W_k(T) through the peel-off recursion.

    For n = 1 a single-matrix witness is found in dimension >= 3k-2.  For
    n > 1 a rank-4k witness L for (T_1..T_{n-1}) is found first; T_n is then
    compressed to L and a rank-k witness of that 4k x 4k matrix (4k >= 3k-2)
    is pulled back.
    """
    if k < 1:
        raise InputError("k must be positive")
    if k > t.dim:
        raise DimensionTooSmall(f"k={k} exceeds the dimension {t.dim}")
    scal = [m[0, 0] for m in t]
    if all(np.allclose(m, s * np.eye(t.dim), atol=1e-14, rtol=0) for m, s in zip(t, scal)):
        # scalar tuples: every k-frame is a witness
        f = np.eye(t.dim, k, dtype=np.complex128)
        return RankKWitness(np.array(scal), Frame(f), rank_k_residual(t, f, scal))
    if k == 1:
        # W_1 = W: any unit vector is a witness for its own point
        f = np.eye(t.dim, 1, dtype=np.complex128)
        point = t.quadratic_form(f[:, 0])
        return RankKWitness(point, Frame(f), rank_k_residual(t, f, point))
    demand = rank_k_demand(t.n, k)
    if t.dim < demand:
        raise DimensionTooSmall(f"dimension {t.dim} below the recursion demand {demand}")
    if t.n == 1:
        mu, f = _single_rank_k(np.asarray(t[0]), k, seed, tol / 10)
        point = np.array([mu])
    else:
        head = OperatorTuple(t.matrices[:-1])
        w = rank_k_nonempty_search(head, 4 * k, seed, tol / 10)
        outer = np.asarray(w.frame.columns)
        inner_mat = outer.conj().T @ t[-1] @ outer
        mu, g = _single_rank_k(inner_mat, k, seed + 1, tol / 10)
        f = outer @ g
        point = np.concatenate([w.point, [mu]])
    f = polar_frame(f)
    res = rank_k_residual(t, f, point)
    if res > tol:
        raise SearchFailure(f"assembled witness residual {res:.3e} exceeds {tol:g}")
    return RankKWitness(point, Frame(f), res)


def convex_weights(points: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, float]:
    """Convex coefficients c (c >= 0, sum 1) with sum c_i points_i close to target.

    A linear program returns a basic solution (support at most dim+1, i.e.
    Caratheodory); the support is then re-solved exactly by least squares.
    If the target is outside the hull, falls back to the nearest convex
    combination by nonnegative least squares.  Returns (c, sup-norm misfit).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    target = np.asarray(target, dtype=float)
    m, d = points.shape
    a_eq = np.vstack([points.T, np.ones((1, m))])
    b_eq = np.concatenate([target, [1.0]])
    c = None
    lp = scipy.optimize.linprog(
        np.zeros(m), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * m, method="highs"
    )
    if lp.status == 0:
        c = _polish(a_eq, b_eq, lp.x)
    if c is None:
        rho = 1e3 * (1 + float(np.max(np.abs(points))))
        a_aug = np.vstack([points.T, rho * np.ones((1, m))])
        b_aug = np.concatenate([target, [rho]])
        c, _ = scipy.optimize.nnls(a_aug, b_aug)
        s = c.sum()
        c = c / s if s > 0 else np.full(m, 1.0 / m)
        sup = np.flatnonzero(c > 0)
        sub = scipy.optimize.nnls(np.vstack([points[sup].T, rho * np.ones((1, sup.size))]), b_aug)[0]
        if sub.sum() > 0:
            c = np.zeros(m)
            c[sup] = sub / sub.sum()
    misfit = float(np.max(np.abs(points.T @ c - target))) if d else 0.0
    return c, misfit


def _polish(a_eq, b_eq, x) -> np.ndarray | None:
    sup = np.flatnonzero(x > 1e-12)
    if sup.size == 0:
        return None
    sol, *_ = np.linalg.lstsq(a_eq[:, sup], b_eq, rcond=None)
    if np.any(sol < -1e-12):
        sol = np.clip(x[sup], 0, None)
    sol = np.clip(sol, 0, None)
    out = np.zeros_like(x)
    out[sup] = sol / sol.sum()
    return out


def diagonal_rank_k_witness(values, target, k: int) -> RankKWitness:
    """Explicit rank-k witness for a diagonal tuple.

    ``values`` is the N x n array of joint diagonal entries.  The frame is
    built from k disjoint index groups whose hulls contain the target; the
    column for a group with convex weights c is sum_i sqrt(c_i) e_i.
    Disjoint supports make all off-diagonal compressions vanish.
    """
    vals = np.atleast_2d(np.asarray(values, dtype=np.complex128))
    if vals.shape[0] == 1 and vals.ndim == 2 and vals.shape[1] > 1 and np.ndim(target) == 0:
        vals = vals.T
    lam = as_point(target, vals.shape[1])
    dim = vals.shape[0]
    free = list(range(dim))
    cols = np.zeros((dim, k), dtype=np.complex128)
    pts = to_real(vals)
    tgt = to_real(lam)
    for g in range(k):
        if not free:
            raise NotFound(f"ran out of diagonal entries after {g} groups")
        c, misfit = convex_weights(pts[free], tgt)
        if misfit > 1e-12:
            raise NotFound(f"target outside the hull of the remaining entries (group {g})", misfit)
        used = [free[i] for i in np.flatnonzero(c > 0)]
        for i, ci in zip(used, c[c > 0]):
            cols[i, g] = math.sqrt(ci)
        free = [i for i in free if i not in used]
    t = OperatorTuple([np.diag(vals[:, j]) for j in range(vals.shape[1])])
    f = Frame(cols)
    return RankKWitness(lam, f, rank_k_residual(t, cols, lam))


# ---------------------------------------------------------------------------
# reservoir models


@dataclass(frozen=True)
class Cluster:
    value: np.ndarray
    multiplicity: int


class ReservoirModel:
    """Block tuple base ⊕ (value_c · I_{m_c}) over declared clusters.

    The clusters are exact scalar blocks of high multiplicity; they stand in
    for the essential part of the spectrum.  The tuple is applied blockwise,
    so large reservoirs never need a dense assembly.
    """

    def __init__(self, clusters: Sequence[tuple], base: OperatorTuple | None = None):
        cl = []
        n = base.n if base is not None else None
        for value, mult in clusters:
            v = as_point(value)
            if n is None:
                n = v.size
            if v.size != n:
                raise DimensionMismatch("cluster values must all have the tuple length")
            if int(mult) < 1:
                raise InputError("cluster multiplicity must be positive")
            cl.append(Cluster(v, int(mult)))
        if not cl and base is None:
            raise InputError("a reservoir needs a base tuple or at least one cluster")
        self.base = base
        self.clusters: tuple[Cluster, ...] = tuple(cl)
        self.n = int(n)
        self.base_dim = base.dim if base is not None else 0
        offs = [self.base_dim]
        for c in cl:
            offs.append(offs[-1] + c.multiplicity)
        self.offsets = tuple(offs[:-1])
        self.dim = offs[-1]
        self._assembled: OperatorTuple | None = None

    @classmethod
    def power(cls, points, multiplicity: int | Sequence[int], horizon: int, base_matrix=None):
        """Reservoir for the power tuple (T, T^2, ..., T^n) with T = B ⊕ diag(mu_c)."""
        from .opcore import power_tuple

        pts = np.atleast_1d(np.asarray(points, dtype=np.complex128))
        mults = np.broadcast_to(np.asarray(multiplicity), pts.shape)
        clusters = [(mu ** np.arange(1, horizon + 1), int(m)) for mu, m in zip(pts, mults)]
        base = power_tuple(base_matrix, horizon) if base_matrix is not None else None
        return cls(clusters, base)

    @property
    def assembled(self) -> OperatorTuple:
        if self._assembled is None:
            blocks = []
            if self.base is not None:
                blocks.append(self.base)
            for c in self.clusters:
                blocks.append(OperatorTuple([z * np.eye(c.multiplicity) for z in c.value]))
            self._assembled = direct_sum(blocks)
        return self._assembled

    def cluster_values(self) -> np.ndarray:
        return np.array([c.value for c in self.clusters]).reshape(-1, self.n)

    def block(self, i: int) -> slice:
        o = self.offsets[i]
        return slice(o, o + self.clusters[i].multiplicity)

    def apply(self, j: int, x: np.ndarray, adjoint: bool = False) -> np.ndarray:
        """T_j x (or T_j* x) for a vector or an N x r block of columns."""
        x = np.asarray(x, dtype=np.complex128)
        y = np.empty_like(x)
        if self.base is not None:
            m = self.base[j].conj().T if adjoint else self.base[j]
            y[: self.base_dim] = m @ x[: self.base_dim]
        for i, c in enumerate(self.clusters):
            z = np.conj(c.value[j]) if adjoint else c.value[j]
            sl = self.block(i)
            y[sl] = z * x[sl]
        return y

    def quadratic_form(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        return np.array([np.vdot(x, self.apply(j, x)) for j in range(self.n)])

    def compress(self, f: Frame | np.ndarray) -> OperatorTuple:
        cols = np.asarray(f.columns if isinstance(f, Frame) else f)
        if cols.shape[0] != self.dim:
            raise DimensionMismatch(f"frame lives in C^{cols.shape[0]}, reservoir in C^{self.dim}")
        ch = cols.conj().T
        return OperatorTuple([ch @ self.apply(j, cols) for j in range(self.n)])

    def __repr__(self) -> str:
        return f"ReservoirModel(n={self.n}, dim={self.dim}, clusters={len(self.clusters)})"


def reservoir_essential_polytope(r: ReservoirModel) -> Polytope2n:
    """conv of the cluster values, as points of R^2n."""
    if not r.clusters:
        raise InputError("reservoir has no clusters")
    return Polytope2n(to_real(r.cluster_values()))


class ReservoirSpender:
    """Tracks which cluster basis vectors have been handed out.

    Each cluster keeps the list of vectors (in block coordinates) already
    used; new vectors are drawn orthogonal to them.  Single-threaded.
    """

    def __init__(self, r: ReservoirModel):
        self.model = r
        self.used: list[list[np.ndarray]] = [[] for _ in r.clusters]
        self._cursor = [0] * len(r.clusters)

    @property
    def spend(self) -> int:
        return sum(len(u) for u in self.used)

    def per_cluster(self) -> list[int]:
        return [len(u) for u in self.used]

    def fresh(self, i: int, guard: np.ndarray | None = None) -> np.ndarray:
        """A unit vector in cluster block i orthogonal to used vectors and to ``guard``.

        ``guard`` holds block-i components (rows = multiplicity) that must be
        avoided.  Raises InsufficientMultiplicity when the block is exhausted.
        """
        c = self.model.clusters[i]
        m = c.multiplicity
        basis = [g for g in self.used[i]]
        if guard is not None and guard.size:
            for col in np.asarray(guard).T:
                basis.append(col)
        q = _orth_basis(np.column_stack(basis) if basis else np.zeros((m, 0)))
        if q.shape[1] >= m:
            raise InsufficientMultiplicity(
                f"cluster {i} exhausted (multiplicity {m}, {len(self.used[i])} spent)",
                demand=q.shape[1] + 1,
                reached=m,
            )
        start = self._cursor[i]
        for step in range(m):
            e_idx = (start + step) % m
            v = np.zeros(m, dtype=np.complex128)
            v[e_idx] = 1.0
            for _ in range(2):
                v -= q @ (q.conj().T @ v)
            nrm = np.linalg.norm(v)
            if nrm > 1e-6:
                self._cursor[i] = (e_idx + 1) % m
                v /= nrm
                self.used[i].append(v)
                return v
        raise InsufficientMultiplicity(f"cluster {i} has no room left", demand=q.shape[1] + 1, reached=m)

    def embed(self, i: int, v: np.ndarray) -> np.ndarray:
        x = np.zeros(self.model.dim, dtype=np.complex128)
        x[self.model.block(i)] = v
        return x


def _orth_basis(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if a.shape[1] == 0:
        return a.astype(np.complex128)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return u[:, :r]


def guard_columns(r: ReservoirModel, avoid) -> np.ndarray:
    """Columns of avoid together with their T_j and T_j* images."""
    if avoid is None:
        return np.zeros((r.dim, 0), dtype=np.complex128)
    a = np.asarray(avoid.columns if isinstance(avoid, (Frame, EmptyFrame)) else avoid)
    if a.size == 0:
        return np.zeros((r.dim, 0), dtype=np.complex128)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] != r.dim:
        raise DimensionMismatch(f"guard lives in C^{a.shape[0]}, reservoir in C^{r.dim}")
    parts = [a]
    for j in range(r.n):
        parts.append(r.apply(j, a))
        parts.append(r.apply(j, a, adjoint=True))
    return np.hstack(parts)


def compres_vector(
    r: ReservoirModel,
    target,
    avoid=None,
    delta: float = 1e-9,
    spender: ReservoirSpender | None = None,
) -> np.ndarray:
    """Unit x ⊥ {a, T_j a, T_j* a : a in avoid} with |<T x, x> - target| < delta.

    The target is written as a convex combination of cluster values; x is
    the matching mixture sum_i sqrt(c_i) y_i of fresh cluster vectors y_i.
    Cluster blocks are scalar, so each y_i only has to avoid the block
    components of the guard columns (the T_j images add nothing inside a
    scalar block), and distinct blocks contribute no cross terms.
    """
    if not r.clusters:
        raise InsufficientMultiplicity("reservoir has no clusters", demand=1, reached=0)
    lam = as_point(target, r.n)
    c, misfit = convex_weights(to_real(r.cluster_values()), to_real(lam))
    if misfit >= delta:
        raise TargetOutsidePolytope(
            f"target is {misfit:.3e} away from the reservoir polytope (delta {delta:g})"
        )
    spender = spender if spender is not None else ReservoirSpender(r)
    guard = guard_columns(r, avoid)
    x = np.zeros(r.dim, dtype=np.complex128)
    for i in np.flatnonzero(c > 0):
        gi = guard[r.block(i)] if guard.size else None
        y = spender.fresh(int(i), gi)
        x[r.block(i)] += math.sqrt(c[i]) * y
    return x / np.linalg.norm(x)
