"""Dense real exterior algebra over a fixed six-dimensional coframe.

Coefficient vectors are indexed by the lexicographically ordered strictly
increasing multi-indices of {1..6}, so a k-form is a flat vector of length
C(6,k).  Basis products, interior products and Hodge duals are realized as
small precomputed tensors, which keeps every operation a single einsum and
makes batched evaluation over many points cheap.

Sign conventions: dx^1^dx^2(e1,e2) = 1 (determinant convention), and the
interior product is the degree-lowering anti-derivation with
iota_v(alpha) = alpha(v) on 1-forms.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateMetric,
    DegenerateVolume,
    DegreeMismatch,
    DegreeOverflow,
    DegreeUnderflow,
    FrameMismatch,
)

DIM = 6

#: INDEX_SETS[k] lists the increasing k-tuples of {1..6} in lexicographic order.
INDEX_SETS = tuple(tuple(itertools.combinations(range(1, DIM + 1), k))
                   for k in range(DIM + 1))
RANK = tuple({s: i for i, s in enumerate(INDEX_SETS[k])} for k in range(DIM + 1))
DIMS = tuple(len(INDEX_SETS[k]) for k in range(DIM + 1))  # 1,6,15,20,15,6,1


def sort_sign(indices):
    """Sort an index tuple, returning (sign, sorted tuple); sign 0 on repeats."""
    seq = list(indices)
    if len(set(seq)) != len(seq):
        return 0, None
    sign = 1
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                sign = -sign
    return sign, tuple(seq)


def multi_index_rank(indices):
    """Lexicographic rank of a strictly increasing multi-index."""
    indices = tuple(indices)
    k = len(indices)
    if indices not in RANK[k]:
        raise ValueError(f"not a strictly increasing multi-index in 1..6: {indices}")
    return RANK[k][indices]


def multi_index_from_rank(degree, rank):
    """Inverse of :func:`multi_index_rank`."""
    return INDEX_SETS[degree][rank]


def _build_wedge_tensor(k, l):
    T = np.zeros((DIMS[k + l], DIMS[k], DIMS[l]))
    for i, a in enumerate(INDEX_SETS[k]):
        for j, b in enumerate(INDEX_SETS[l]):
            s, merged = sort_sign(a + b)
            if s:
                T[RANK[k + l][merged], i, j] = s
    return T


def _build_contract_tensor(k):
    # T[m, v, j]: coefficient of basis (k-1)-form m in iota_{e_{v+1}} (basis k-form j)
    T = np.zeros((DIMS[k - 1], DIM, DIMS[k]))
    for j, I in enumerate(INDEX_SETS[k]):
        for p, idx in enumerate(I):
            rest = I[:p] + I[p + 1:]
            T[RANK[k - 1][rest], idx - 1, j] = (-1.0) ** p
    return T


def _build_complement(k):
    comp = np.zeros(DIMS[k], dtype=np.intp)
    eps = np.zeros(DIMS[k])
    for i, I in enumerate(INDEX_SETS[k]):
        c = tuple(x for x in range(1, DIM + 1) if x not in I)
        s, _ = sort_sign(I + c)
        comp[i] = RANK[DIM - k][c]
        eps[i] = s
    return comp, eps


WEDGE_TENSOR = {(k, l): _build_wedge_tensor(k, l)
                for k in range(DIM + 1) for l in range(DIM + 1) if k + l <= DIM}
CONTRACT_TENSOR = {k: _build_contract_tensor(k) for k in range(1, DIM + 1)}
COMPLEMENT = {k: _build_complement(k) for k in range(DIM + 1)}
#: IDX0[k][i] is the 0-based numpy index array of INDEX_SETS[k][i].
IDX0 = tuple(np.array(INDEX_SETS[k], dtype=np.intp) - 1 if k else
             np.zeros((1, 0), dtype=np.intp) for k in range(DIM + 1))


@dataclass(frozen=True)
class Vector6:
    """A tangent vector in the frame dual to the active coframe."""

    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if c.shape != (DIM,):
            raise ValueError("Vector6 needs exactly 6 components")
        object.__setattr__(self, "components", c)


class Form:
    """A degree-k exterior form as a dense coefficient vector.

    Coefficients follow the lexicographic multi-index order of
    ``INDEX_SETS[degree]``.  Forms over distinct coframes (``frame`` ids)
    never combine.
    """

    __slots__ = ("degree", "coeffs", "frame")

    def __init__(self, degree, coeffs, frame="std"):
        if not 0 <= degree <= DIM:
            raise ValueError(f"degree must be in 0..6, got {degree}")
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (DIMS[degree],):
            raise ValueError(
                f"degree {degree} form needs {DIMS[degree]} coefficients, got {c.shape}")
        self.degree = degree
        self.coeffs = c.copy()
        self.coeffs.flags.writeable = False
        self.frame = frame

    @classmethod
    def zero(cls, degree, frame="std"):
        return cls(degree, np.zeros(DIMS[degree]), frame)

    @classmethod
    def from_terms(cls, degree, terms, frame="std"):
        """Build a form from ``{index tuple: coefficient}`` terms."""
        v = np.zeros(DIMS[degree])
        for idx, coeff in terms.items():
            s, key = sort_sign(idx)
            if s == 0:
                raise ValueError(f"repeated index in {idx}")
            if len(key) != degree:
                raise ValueError(f"index {idx} has wrong length for degree {degree}")
            v[RANK[degree][key]] += s * coeff
        return cls(degree, v, frame)

    def __repr__(self):
        terms = [f"{c:+g}*dx{''.join(map(str, I))}"
                 for I, c in zip(INDEX_SETS[self.degree], self.coeffs)
                 if abs(c) > 0]
        body = " ".join(terms) if terms else "0"
        return f"Form(deg={self.degree}, {body})"

    def _check_frame(self, other):
        if self.frame != other.frame:
            raise FrameMismatch(
                f"cannot combine forms over frames {self.frame!r} and {other.frame!r}")

    def __add__(self, other):
        self._check_frame(other)
        if self.degree != other.degree:
            raise DegreeMismatch("cannot add forms of different degree")
        return Form(self.degree, self.coeffs + other.coeffs, self.frame)

    def __sub__(self, other):
        self._check_frame(other)
        if self.degree != other.degree:
            raise DegreeMismatch("cannot subtract forms of different degree")
        return Form(self.degree, self.coeffs - other.coeffs, self.frame)

    def __mul__(self, scalar):
        return Form(self.degree, self.coeffs * float(scalar), self.frame)

    __rmul__ = __mul__

    def __neg__(self):
        return Form(self.degree, -self.coeffs, self.frame)

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def is_zero(self, tol=0.0):
        return bool(np.max(np.abs(self.coeffs), initial=0.0) <= tol)

    def to_dict(self):
        return {"degree": self.degree, "frame": self.frame,
                "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(int(data["degree"]), data["coeffs"], str(data["frame"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed form object: {exc}") from exc


@dataclass
class Metric:
    """Components of a Riemannian metric in the active coframe."""

    gram: np.ndarray
    _inv: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=float)
        if g.shape != (DIM, DIM):
            raise ValueError("metric gram matrix must be 6x6")
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.T)) > 1e-12 * scale:
            raise ValueError("metric gram matrix must be symmetric")
        self.gram = 0.5 * (g + g.T)

    @classmethod
    def euclidean(cls):
        return cls(np.eye(DIM))

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.gram)

    def is_positive_definite(self):
        ev = self.eigenvalues()
        return bool(ev[0] > 1e-10 * max(ev[-1], 0.0))

    def inverse(self):
        if self._inv is None:
            self._inv = np.linalg.inv(self.gram)
        return self._inv

    def volume_scale(self):
        """sqrt(det g); the metric volume is this times the unit coframe volume."""
        return math.sqrt(float(np.linalg.det(self.gram)))


def wedge(a: Form, b: Form) -> Form:
    """Wedge product a ^ b."""
    a._check_frame(b)
    total = a.degree + b.degree
    if total > DIM:
        raise DegreeOverflow(
            f"wedge of degrees {a.degree} and {b.degree} exceeds dimension 6")
    T = WEDGE_TENSOR[(a.degree, b.degree)]
    return Form(total, np.einsum("mij,i,j->m", T, a.coeffs, b.coeffs), a.frame)


def wedge_all(*forms: Form) -> Form:
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def contract(v, a: Form) -> Form:
    """Interior product iota_v a."""
    if a.degree < 1:
        raise DegreeUnderflow("interior product of a 0-form")
    comps = v.components if isinstance(v, Vector6) else np.asarray(v, dtype=float)
    T = CONTRACT_TENSOR[a.degree]
    return Form(a.degree - 1, np.einsum("mvj,v,j->m", T, comps, a.coeffs), a.frame)


def pullback(A, a: Form) -> Form:
    """Pullback of ``a`` under the linear map with matrix ``A``.

    On 1-forms this is coeffs -> A^T coeffs; on higher degrees the k x k
    minors of A enter, which makes the operation an algebra homomorphism.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (DIM, DIM):
        raise ValueError("pullback needs a 6x6 matrix")
    k = a.degree
    if k == 0:
        return Form(0, a.coeffs.copy(), a.frame)
    if k == 1:
        minors = A
    else:
        idx = IDX0[k]
        stack = A[idx[:, None, :, None], idx[None, :, None, :]]
        minors = np.linalg.det(stack)
    # (f^* a)_J = sum_I a_I det(A[I, J])
    return Form(k, a.coeffs @ minors, a.frame)


def gram_on_forms(ginv, k):
    """Gram matrix of the inverse metric on degree-k multi-indices.

    Entry (I, J) is det(ginv[I, J]); for a g-orthonormal coframe the
    increasing basis k-forms come out orthonormal.
    """
    if k == 0:
        return np.ones((1, 1))
    if k == 1:
        return np.asarray(ginv, dtype=float).copy()
    idx = IDX0[k]
    stack = ginv[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(stack)


def _require_positive_definite(g: Metric):
    if not g.is_positive_definite():
        raise DegenerateMetric("metric is not positive definite")


def inner_product(g: Metric, a: Form, b: Form) -> float:
    """Pointwise inner product <a, b>_g of equal-degree forms."""
    a._check_frame(b)
    if a.degree != b.degree:
        raise DegreeMismatch("inner product needs equal degrees")
    _require_positive_definite(g)
    G = gram_on_forms(g.inverse(), a.degree)
    return float(a.coeffs @ G @ b.coeffs)


def hodge_star(g: Metric, orientation: Form, a: Form) -> Form:
    """Hodge dual of ``a`` for metric g, with dV_g oriented like ``orientation``.

    Defined by  b ^ *(a) = <b, a>_g dV_g  for all b of the same degree; works
    for non-orthonormal coframes through the Gram matrices of the inverse
    metric.
    """
    _require_positive_definite(g)
    if orientation.degree != DIM:
        raise ValueError("orientation must be a 6-form")
    ocoeff = float(orientation.coeffs[0])
    if ocoeff == 0.0:
        raise DegenerateVolume("orientation form vanishes")
    k = a.degree
    Gk = gram_on_forms(g.inverse(), k)
    sigma = 1.0 if ocoeff > 0 else -1.0
    t = sigma * g.volume_scale() * (Gk @ a.coeffs)
    comp, eps = COMPLEMENT[k]
    out = np.zeros(DIMS[DIM - k])
    out[comp] = eps * t
    return Form(DIM - k, out, a.frame)


def volume_form(g: Metric, orientation: Form, frame="std") -> Form:
    """Metric volume form dV_g with the given orientation."""
    return hodge_star(g, orientation, Form(0, [1.0], frame))


def two_form_matrix(a: Form) -> np.ndarray:
    """Antisymmetric 6x6 matrix M with M[i,j] = a(e_{i+1}, e_{j+1})."""
    if a.degree != 2:
        raise DegreeMismatch("expected a 2-form")
    M = np.zeros((DIM, DIM))
    for i, (p, q) in enumerate(INDEX_SETS[2]):
        M[p - 1, q - 1] = a.coeffs[i]
        M[q - 1, p - 1] = -a.coeffs[i]
    return M

