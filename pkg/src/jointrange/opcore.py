"""Dense complex tuple arithmetic: frames, compressions, direct sums, powers.

An operator tuple is an ordered collection of square complex matrices acting
on a common space C^N.  A frame is an N x k matrix with orthonormal columns;
it stands for a subspace together with its embedding, and compressing a tuple
onto a frame F means forming F* T_j F for every member.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    InputError,
    LinearDependence,
    NonOrthonormalFrame,
    TupleLengthMismatch,
)

#: orthonormality accepted for frames supplied from outside (files, callers)
FRAME_ACCEPT_TOL = 1e-8
#: orthonormality guaranteed by frames built inside the library
FRAME_BUILD_TOL = 1e-10
#: smallest column norm kept by :func:`orthonormalize`
INDEPENDENCE_TOL = 1e-10


def as_matrix(a, square: bool = False, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D complex128 array (a private copy)."""
    m = np.array(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} has non-finite entries")
    return m


def as_point(p, n: int | None = None) -> np.ndarray:
    """Return a tuple point (a finite complex vector of length ``n``)."""
    v = np.atleast_1d(np.array(p, dtype=np.complex128))
    if v.ndim != 1:
        raise DimensionMismatch(f"tuple point must be 1-D, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(f"tuple point has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise InputError("tuple point has non-finite entries")
    return v


def sup_norm(p) -> float:
    """max_j |p_j|, the norm used for tuple points."""
    return float(np.max(np.abs(p))) if np.size(p) else 0.0


def to_real(p) -> np.ndarray:
    """Identify C^n with R^2n as (Re p_1, Im p_1, ..., Re p_n, Im p_n)."""
    p = np.asarray(p, dtype=np.complex128)
    out = np.empty(p.shape[:-1] + (2 * p.shape[-1],))
    out[..., 0::2] = p.real
    out[..., 1::2] = p.imag
    return out


def from_real(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return r[..., 0::2] + 1j * r[..., 1::2]


def _frozen(m: np.ndarray) -> np.ndarray:
    m.setflags(write=False)
    return m


class OperatorTuple:
    """An n-tuple (T_1, ..., T_n) of N x N complex matrices.

    Instances are immutable; the member arrays are flagged read-only.
    """

    __slots__ = ("_mats",)

    def __init__(self, matrices: Iterable):
        mats = [as_matrix(m, square=True, name="tuple member") for m in matrices]
        if not mats:
            raise TupleLengthMismatch("an operator tuple needs at least one member")
        dim = mats[0].shape[0]
        for m in mats:
            if m.shape[0] != dim:
                raise DimensionMismatch("tuple members must share one dimension")
        self._mats = tuple(_frozen(m) for m in mats)

    @classmethod
    def single(cls, m) -> "OperatorTuple":
        return cls([m])

    @property
    def n(self) -> int:
        return len(self._mats)

    @property
    def dim(self) -> int:
        return self._mats[0].shape[0]

    @property
    def matrices(self) -> tuple[np.ndarray, ...]:
        return self._mats

    def __len__(self) -> int:
        return len(self._mats)

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self._mats)

    def __getitem__(self, j: int) -> np.ndarray:
        return self._mats[j]

    def __repr__(self) -> str:
        return f"OperatorTuple(n={self.n}, dim={self.dim})"

    def stack(self) -> np.ndarray:
        """The members as an (n, N, N) array."""
        return np.stack(self._mats)

    def shifted(self, point) -> "OperatorTuple":
        """The tuple (T_1 - p_1 I, ..., T_n - p_n I)."""
        p = as_point(point, self.n)
        eye = np.eye(self.dim)
        return OperatorTuple([m - pj * eye for m, pj in zip(self._mats, p)])

    def scaled(self, a: complex) -> "OperatorTuple":
        return OperatorTuple([a * m for m in self._mats])

    def adjoint(self) -> "OperatorTuple":
        return OperatorTuple([m.conj().T for m in self._mats])

    def quadratic_form(self, x) -> np.ndarray:
        """(<T_1 x, x>, ..., <T_n x, x>) with <u, v> = v* u."""
        x = np.asarray(x, dtype=np.complex128)
        return np.einsum("i,jik,k->j", x.conj(), self.stack(), x)

    def hermitian_parts(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (Re T_j) and (Im T_j), each of shape (n, N, N)."""
        s = self.stack()
        sh = np.conj(np.swapaxes(s, 1, 2))
        return (s + sh) / 2, (s - sh) / 2j

    def allclose(self, other: "OperatorTuple", atol: float = 1e-12) -> bool:
        return (
            self.n == other.n
            and self.dim == other.dim
            and all(np.allclose(a, b, atol=atol, rtol=0) for a, b in zip(self, other))
        )


class Frame:
    """An N x k matrix with orthonormal columns.

    ``tol`` is the Frobenius tolerance on F*F - I.  Frames handed in from
    outside are checked at 1e-8; the library's own constructions satisfy
    1e-10.
    """

    __slots__ = ("_cols",)

    def __init__(self, columns, tol: float = FRAME_ACCEPT_TOL):
        cols = as_matrix(columns, name="frame")
        if cols.shape[1] > cols.shape[0]:
            raise NonOrthonormalFrame(
                f"frame rank {cols.shape[1]} exceeds ambient dimension {cols.shape[0]}"
            )
        dev = orthonormality_defect(cols)
        if dev > tol:
            raise NonOrthonormalFrame(f"columns are not orthonormal (defect {dev:.3e})")
        self._cols = _frozen(cols)

    @classmethod
    def identity(cls, dim: int) -> "Frame":
        return cls(np.eye(dim))

    @classmethod
    def empty(cls, dim: int) -> "EmptyFrame":
        return EmptyFrame(dim)

    @property
    def columns(self) -> np.ndarray:
        return self._cols

    @property
    def ambient_dim(self) -> int:
        return self._cols.shape[0]

    @property
    def rank(self) -> int:
        return self._cols.shape[1]

    def projector(self) -> np.ndarray:
        return self._cols @ self._cols.conj().T

    def then(self, inner: "Frame | np.ndarray") -> "Frame":
        """The composite frame F @ G for G a frame in the coordinates of F."""
        g = inner.columns if isinstance(inner, Frame) else as_matrix(inner)
        if g.shape[0] != self.rank:
            raise DimensionMismatch(f"inner frame has {g.shape[0]} rows, expected {self.rank}")
        return Frame(self._cols @ g)

    def select(self, idx) -> "Frame":
        return Frame(self._cols[:, idx])

    def __repr__(self) -> str:
        return f"Frame(ambient_dim={self.ambient_dim}, rank={self.rank})"


class EmptyFrame:
    """A rank-0 frame; only used as the ``against`` argument of orthonormalize."""

    __slots__ = ("ambient_dim",)

    def __init__(self, ambient_dim: int):
        self.ambient_dim = ambient_dim

    rank = 0

    @property
    def columns(self) -> np.ndarray:
        return np.zeros((self.ambient_dim, 0), dtype=np.complex128)


def orthonormality_defect(cols: np.ndarray) -> float:
    k = cols.shape[1]
    return float(np.linalg.norm(cols.conj().T @ cols - np.eye(k)))


def compress(t: OperatorTuple, f: Frame) -> OperatorTuple:
    """The compression (F* T_1 F, ..., F* T_n F) in frame coordinates."""
    if f.ambient_dim != t.dim:
        raise DimensionMismatch(f"frame lives in C^{f.ambient_dim}, tuple in C^{t.dim}")
    if not isinstance(f, Frame):
        raise NonOrthonormalFrame("cannot compress onto an empty frame")
    if orthonormality_defect(f.columns) > FRAME_ACCEPT_TOL:
        raise NonOrthonormalFrame("frame failed the orthonormality check")
    c = f.columns
    ch = c.conj().T
    return OperatorTuple([ch @ m @ c for m in t])


def direct_sum(ts: Sequence[OperatorTuple]) -> OperatorTuple:
    """Block-diagonal tuple (⊕ A_j1, ..., ⊕ A_jn), block order preserved."""
    ts = list(ts)
    if not ts:
        raise TupleLengthMismatch("direct sum of nothing")
    n = ts[0].n
    if any(t.n != n for t in ts):
        raise TupleLengthMismatch("all summands must have the same tuple length")
    return OperatorTuple([scipy.linalg.block_diag(*(t[j] for t in ts)) for j in range(n)])


def block_frame(dims: Sequence[int], i: int) -> Frame:
    """Natural frame of the i-th summand inside a direct sum with block sizes ``dims``."""
    total = int(sum(dims))
    start = int(sum(dims[:i]))
    cols = np.zeros((total, dims[i]), dtype=np.complex128)
    cols[start : start + dims[i], :] = np.eye(dims[i])
    return Frame(cols)


def orthonormalize(vectors, against: Frame | EmptyFrame | None = None) -> Frame:
    """Gram-Schmidt (two passes) of ``vectors`` against an optional frame.

    ``vectors`` is a sequence of N-vectors or an N x k array whose columns are
    the vectors.  Raises :class:`LinearDependence` when a projected column
    falls below 1e-10 in norm.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        v = np.array(vectors, dtype=np.complex128)
    else:
        v = np.column_stack([np.asarray(x, dtype=np.complex128) for x in vectors])
    n_amb = v.shape[0]
    base = np.zeros((n_amb, 0), dtype=np.complex128)
    if against is not None and against.rank:
        if against.ambient_dim != n_amb:
            raise DimensionMismatch("vectors and frame live in different spaces")
        base = np.asarray(against.columns)
    out = np.zeros((n_amb, v.shape[1]), dtype=np.complex128)
    for i in range(v.shape[1]):
        x = v[:, i].copy()
        for _ in range(2):
            if base.shape[1]:
                x -= base @ (base.conj().T @ x)
            if i:
                x -= out[:, :i] @ (out[:, :i].conj().T @ x)
        nrm = np.linalg.norm(x)
        if nrm <= INDEPENDENCE_TOL:
            raise LinearDependence(f"vector {i} is dependent (projected norm {nrm:.3e})")
        out[:, i] = x / nrm
    return Frame(out, tol=FRAME_BUILD_TOL)


def complement_basis(cols: np.ndarray, dim: int, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of span(cols) in C^dim."""
    if cols.size == 0:
        return np.eye(dim, dtype=np.complex128)
    u, s, _ = np.linalg.svd(cols, full_matrices=True)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return u[:, rank:]


def power_tuple(T, n: int) -> OperatorTuple:
    """(T, T^2, ..., T^n) by repeated multiplication."""
    T = as_matrix(T, square=True, name="T")
    if n < 1:
        raise InputError("power horizon must be a positive integer")
    out = [T]
    for _ in range(n - 1):
        out.append(out[-1] @ T)
    return OperatorTuple(out)


def verify_unitary_equivalence(
    a: OperatorTuple, b: OperatorTuple, u, tol: float = 1e-9
) -> tuple[bool, float]:
    """Check the certificate u*·A_j·u = B_j for all j and u*u = I.

    Returns ``(ok, deviation)`` where ``deviation`` is the largest Frobenius
    error over the members (and over u*u - I).
    """
    u = as_matrix(u, square=True, name="u")
    if a.n != b.n:
        raise TupleLengthMismatch("tuples have different lengths")
    if a.dim != b.dim or u.shape[0] != a.dim:
        raise DimensionMismatch("tuple and certificate dimensions disagree")
    uh = u.conj().T
    dev_u = float(np.linalg.norm(uh @ u - np.eye(a.dim)))
    dev = max(float(np.linalg.norm(uh @ x @ u - y)) for x, y in zip(a, b))
    worst = max(dev, dev_u)
    return worst <= tol, worst


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR factorization of a Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_tuple(n: int, dim: int, rng: np.random.Generator) -> OperatorTuple:
    return OperatorTuple(
        [rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)) for _ in range(n)]
    )


def operator_norm(a) -> float:
    """Largest singular value."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))
