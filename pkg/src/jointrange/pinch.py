"""Exact compression algebra: convex combinations, power dilations, pinching.

* :func:`pokrzywa_compress` - a subspace M of a direct sum on which the
  compression of ⊕ A_j equals sum_j alpha_j A_j.
* :func:`realize_diagonal_convex` - realize a convex combination of
  (unitarily) diagonal tuples as a compression of a reservoir tuple.
* :func:`power_dilation` - a unitary U and frame J with J*(cU)^k J = C^k for
  1 <= k <= n.
* :func:`bourin_pinch` - a frame L with (T^k)_L = C^k for k <= n when T is a
  power reservoir covering a disc of radius > c'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    InputError,
    NotStrictContraction,
    SurrogateViolation,
    TargetOutsidePolytope,
    TupleLengthMismatch,
)
from .opcore import Frame, OperatorTuple, as_matrix, operator_norm, to_real
from .ranges import ReservoirModel, ReservoirSpender, compres_vector, convex_weights
from .zenger import simplex_weights

#: misfit above which a diagonal entry counts as outside the reservoir hull
SURROGATE_TOL = 1e-10


# ---------------------------------------------------------------------------
# convex combinations as compressions


def pokrzywa_compress(ts: Sequence[OperatorTuple], alphas) -> tuple[Frame, np.ndarray]:
    """Frame M in ⊕_j H with M* (⊕ A_j) M = sum_j alpha_j A_j.

    Built recursively: for two summands M = [sqrt(a1) I; sqrt(a2) I] (the
    first block column of the self-inverse unitary [[√a1, √a2], [√a2, -√a1]]);
    for r summands the frame for the first r-1 (with renormalized weights)
    is stacked over the last block.  Zero weights are skipped.  In these
    coordinates the unitary witness is the identity.
    """
    ts = list(ts)
    a = simplex_weights(alphas)
    if len(ts) != a.size:
        raise InputError(f"{len(ts)} tuples but {a.size} weights")
    n, dim = ts[0].n, ts[0].dim
    for t in ts:
        if t.n != n:
            raise TupleLengthMismatch("all tuples must have the same length")
        if t.dim != dim:
            raise DimensionMismatch("all tuples must act on the same dimension")
    cols = _pokrzywa_columns(a, dim)
    return Frame(cols), np.eye(dim, dtype=np.complex128)


def _pokrzywa_columns(a: np.ndarray, dim: int) -> np.ndarray:
    r = a.size
    eye = np.eye(dim, dtype=np.complex128)
    if r == 1:
        return eye.copy()
    head = float(a[:-1].sum())
    if head == 0.0:
        # all earlier weights vanish: the last summand alone
        return np.vstack([np.zeros(((r - 1) * dim, dim)), eye])
    inner = _pokrzywa_columns(a[:-1] / head, dim)
    return np.vstack([math.sqrt(head) * inner, math.sqrt(a[-1]) * eye])


@dataclass(frozen=True)
class DiagonalTerm:
    """weight * W diag(points) W*; ``points`` is d x n, ``basis`` d x d unitary."""

    weight: float
    points: np.ndarray
    basis: np.ndarray | None = None

    def tuple(self) -> OperatorTuple:
        w = self.basis if self.basis is not None else np.eye(self.points.shape[0])
        return OperatorTuple([(w * self.points[:, j]) @ w.conj().T for j in range(self.points.shape[1])])


@dataclass
class DiagonalTupleDecomposition:
    terms: list[DiagonalTerm]

    def __post_init__(self):
        if not self.terms:
            raise InputError("decomposition has no terms")
        simplex_weights([t.weight for t in self.terms])
        d = {t.points.shape for t in self.terms}
        if len(d) != 1:
            raise DimensionMismatch("all terms must have the same size and tuple length")

    @property
    def n(self) -> int:
        return self.terms[0].points.shape[1]

    @property
    def dim(self) -> int:
        return self.terms[0].points.shape[0]

    def reassemble(self) -> OperatorTuple:
        mats = np.zeros((self.n, self.dim, self.dim), dtype=np.complex128)
        for t in self.terms:
            mats += t.weight * t.tuple().stack()
        return OperatorTuple(list(mats))


def realize_diagonal_convex(
    res: ReservoirModel,
    d: DiagonalTupleDecomposition,
    spender: ReservoirSpender | None = None,
) -> Frame:
    """Frame F in the reservoir space with F* T F = sum_j alpha_j A_j.

    Vectors x_{j,i} with <T x_{j,i}, x_{j,i}> = lambda_{j,i} are drawn in
    lexicographic order (entry index i major, term index j minor), each
    orthogonal to all earlier vectors and their T_s / T_s* images.  On
    H_j = span_i x_{j,i} the tuple compresses to diag(lambda_{j,.}); the
    basis W_j and the block-column frame of :func:`pokrzywa_compress` then
    give the combination.
    """
    if d.n != res.n:
        raise DimensionMismatch("decomposition and reservoir have different tuple lengths")
    spender = spender if spender is not None else ReservoirSpender(res)
    active = [j for j, t in enumerate(d.terms) if t.weight > 0]
    pts = to_real(res.cluster_values())
    for j in active:
        for i in range(d.dim):
            _, misfit = convex_weights(pts, to_real(d.terms[j].points[i]))
            if misfit > SURROGATE_TOL:
                raise SurrogateViolation(
                    f"entry {i} of term {j} is {misfit:.3e} outside the reservoir hull"
                )
    xs: dict[tuple[int, int], np.ndarray] = {}
    done: list[np.ndarray] = []
    for i in range(d.dim):
        for j in active:
            avoid = np.column_stack(done) if done else None
            try:
                x = compres_vector(res, d.terms[j].points[i], avoid, SURROGATE_TOL, spender)
            except TargetOutsidePolytope as exc:
                raise SurrogateViolation(str(exc)) from None
            xs[(j, i)] = x
            done.append(x)
    f = np.zeros((res.dim, d.dim), dtype=np.complex128)
    for j in active:
        t = d.terms[j]
        xj = np.column_stack([xs[(j, i)] for i in range(d.dim)])
        if t.basis is not None:
            xj = xj @ t.basis.conj().T
        f += math.sqrt(t.weight) * xj
    return Frame(f)


# ---------------------------------------------------------------------------
# power dilation


def power_dilation(c_mat, c: float, n: int) -> tuple[np.ndarray, Frame]:
    """Unitary U on n+1 copies and frame J with J*(cU)^k J = C^k for k <= n.

    With A = C/c the block matrix

        [ A    0 ... 0  D_{A*} ]
        [ D_A  0 ... 0  -A*    ]
        [ 0    I ... 0   0     ]
        [ ...      I     0     ]

    is unitary (D_A = (I - A*A)^{1/2}); powers k <= n of its (1,1) corner
    equal A^k.  When A is already unitary, U = A and J = I.
    """
    cm = as_matrix(c_mat, square=True, name="C")
    if not 0 < c < 1:
        raise NotStrictContraction("declared bound c must lie in (0, 1)")
    norm = operator_norm(cm)
    if norm > c * (1 + 1e-12):
        raise NotStrictContraction(f"|C| = {norm:.6g} exceeds the declared bound {c:g}")
    if n < 1:
        raise InputError("horizon must be positive")
    a = cm / c
    d = a.shape[0]
    eye = np.eye(d)
    if np.linalg.norm(a.conj().T @ a - eye) <= 1e-12:
        return a.copy(), Frame(np.eye(d))
    # defect operators from one SVD, so A* D_{A*} = D_A A* holds to rounding
    w, sig, zh = np.linalg.svd(a)
    root = np.sqrt(np.clip((1 - sig) * (1 + sig), 0, None))
    da = (zh.conj().T * root) @ zh
    das = (w * root) @ w.conj().T
    blocks = n + 1
    u = np.zeros((blocks * d, blocks * d), dtype=np.complex128)

    def put(r, s, m):
        u[r * d : (r + 1) * d, s * d : (s + 1) * d] = m

    put(0, 0, a)
    put(0, blocks - 1, das)
    put(1, 0, da)
    put(1, blocks - 1, -a.conj().T)
    for r in range(2, blocks):
        put(r, r - 1, eye)
    j = np.zeros((blocks * d, d), dtype=np.complex128)
    j[:d] = eye
    return u, Frame(j)


# ---------------------------------------------------------------------------
# pinching


@dataclass
class PinchPlan:
    horizon: int
    contraction: np.ndarray
    c: float
    c_prime: float
    rounding_delta: float = 0.0

    def __post_init__(self):
        if not 0 < self.c < self.c_prime < 1:
            raise InputError(f"need 0 < c < c' < 1 (c={self.c}, c'={self.c_prime})")
        if self.rounding_delta < 0:
            raise InputError("rounding_delta must be nonnegative")
        if operator_norm(self.contraction) > self.c * (1 + 1e-12):
            raise NotStrictContraction("contraction norm exceeds the declared bound c")

    @property
    def eta(self) -> float:
        return (1 - self.c / self.c_prime) / (2 * self.horizon)

    def weight_identity_defect(self) -> float:
        return abs(self.c / self.c_prime + 2 * self.horizon * self.eta - 1)


@dataclass
class CompressionReport:
    horizon: int
    per_power_deviation: list[float]
    reservoir_spend: int
    budget: float
    k_norms: list[float] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def max_deviation(self) -> float:
        return max(self.per_power_deviation) if self.per_power_deviation else 0.0

    def to_json(self) -> dict:
        out = {
            "horizon": self.horizon,
            "per_power_deviation": [float(x) for x in self.per_power_deviation],
            "max_deviation": float(self.max_deviation),
            "reservoir_spend": int(self.reservoir_spend),
            "budget": float(self.budget),
            "k_norms": [float(x) for x in self.k_norms],
        }
        out.update(self.extra)
        return out


def power_deviations(res: ReservoirModel, frame, targets: Sequence[np.ndarray]) -> list[float]:
    """||F* T_k F - targets[k-1]|| (operator norm) for the members of a power reservoir."""
    comp = res.compress(frame)
    return [operator_norm(comp[k] - targets[k]) for k in range(len(targets))]


def pinch_decomposition(plan: PinchPlan) -> tuple[DiagonalTupleDecomposition, np.ndarray, Frame, list[float]]:
    """The convex splitting of (A, ..., A^n) with A = cU in a Schur basis of U.

    Returns the decomposition, the Schur basis V, the dilation frame J and
    the norms ||K_j||.
    """
    n, c, cp = plan.horizon, plan.c, plan.c_prime
    u, j = power_dilation(plan.contraction, c, n)
    tri, v = scipy.linalg.schur(u, output="complex")
    a_v = c * tri
    theta = np.angle(np.diag(tri))
    if plan.rounding_delta > 0:
        theta = plan.rounding_delta * np.round(theta / plan.rounding_delta)
    dvals = c * np.exp(1j * theta)
    eta = plan.eta
    d = a_v.shape[0]
    terms = [
        DiagonalTerm(
            c / cp,
            np.column_stack([(cp / c) * dvals**p for p in range(1, n + 1)]),
        )
    ]
    k_norms = []
    ap = np.eye(d, dtype=np.complex128)
    for p in range(1, n + 1):
        ap = ap @ a_v
        kp = ap - np.diag(dvals**p)
        k_norms.append(operator_norm(kp))
        herm = (kp + kp.conj().T) / 2
        skew_h = (kp - kp.conj().T) / 2j
        for mat, unit in ((herm, 1.0), (skew_h, 1j)):
            w, basis = np.linalg.eigh((mat + mat.conj().T) / 2)
            pts = np.zeros((d, n), dtype=np.complex128)
            pts[:, p - 1] = unit * w / eta
            terms.append(DiagonalTerm(eta, pts, basis))
    weights = np.array([t.weight for t in terms])
    weights[0] = 1.0 - weights[1:].sum()
    terms[0] = DiagonalTerm(float(weights[0]), terms[0].points)
    return DiagonalTupleDecomposition(terms), v, j, k_norms


def choose_c_prime(res: ReservoirModel, contraction, horizon: int, c: float, rounding_delta: float) -> float:
    """Largest c' on a grid in (c, 1) whose splitting stays inside the reservoir hull."""
    pts = to_real(res.cluster_values())
    for frac in np.linspace(0.95, 0.05, 19):
        cp = c + (1 - c) * frac
        plan = PinchPlan(horizon, contraction, c, cp, rounding_delta)
        dec, *_ = pinch_decomposition(plan)
        ok = all(
            convex_weights(pts, to_real(row))[1] <= SURROGATE_TOL
            for t in dec.terms
            for row in t.points
        )
        if ok:
            return float(cp)
    raise SurrogateViolation("no c' in (c, 1) keeps the splitting inside the reservoir hull")


def bourin_pinch(
    res: ReservoirModel,
    contraction,
    n: int,
    rounding_delta: float = 0.0,
    c: float | None = None,
    c_prime: float | None = None,
) -> tuple[Frame, CompressionReport]:
    """Frame L with (T^k)_L = C^k for 1 <= k <= n.

    ``res`` must be a power reservoir (its j-th member is T^j) whose cluster
    hull contains the splitting points.  ``c`` defaults to |C| (or c'/2 when
    C = 0); ``c_prime`` defaults to the largest feasible value on a grid.
    """
    cm = as_matrix(contraction, square=True, name="C")
    if res.n != n:
        raise DimensionMismatch(f"reservoir has tuple length {res.n}, horizon is {n}")
    norm = operator_norm(cm)
    if norm >= 1:
        raise NotStrictContraction(f"|C| = {norm:.6g} is not below 1")
    if c is None:
        c = norm if norm > 0 else (c_prime / 2 if c_prime else 0.5)
    if c_prime is None:
        c_prime = choose_c_prime(res, cm, n, c, rounding_delta)
    plan = PinchPlan(n, cm, c, c_prime, rounding_delta)
    dec, v, j, k_norms = pinch_decomposition(plan)
    spender = ReservoirSpender(res)
    f = realize_diagonal_convex(res, dec, spender)
    l_cols = np.asarray(f.columns) @ (v.conj().T @ np.asarray(j.columns))
    frame = Frame(l_cols)
    targets = [np.linalg.matrix_power(cm, k) for k in range(1, n + 1)]
    dev = power_deviations(res, frame, targets)
    budget = 1e-7 + n * (k_norms[0] if k_norms else 0.0)
    report = CompressionReport(
        n,
        dev,
        spender.spend,
        budget,
        k_norms,
        {
            "c": c,
            "c_prime": c_prime,
            "eta": plan.eta,
            "rounding_delta": rounding_delta,
            "weight_identity_defect": plan.weight_identity_defect(),
        },
    )
    if report.max_deviation > budget:
        raise BudgetExceeded(f"deviation {report.max_deviation:.3e} exceeds budget {budget:.3e}")
    return frame, report
