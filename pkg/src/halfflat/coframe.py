"""Exterior derivative of form fields in two concrete coframe models.

* ``coordinate_chart``: the flat chart with coframe dx^1..dx^6 and analytic
  coefficient functions of x1..x6; d acts by symbolic partial derivatives.

* ``ts3_invariant``: the SO(4)-invariant frame (xi*, A*, E1*, V1*, E2*, V2*)
  along the normal geodesic, with coefficient functions of the arclength t.
  Degree-k fields live over the finite basis of invariant forms built from
  the generators

      w1 = xi*^A*, w2 = E1*^V1*, w3 = E2*^V2*,
      w4 = E1*^E2* + V1*^V2*,   w5 = E1*^V2* - V1*^E2*,

  whose structural differentials are

      d xi* = 0,            d A* = (w3 - w2)/4,
      d w1 = xi*^(w2-w3)/4, d w2 = d w3 = 0,
      d w4 = -2 A*^w5,      d w5 = 2 A*^w4.

  Products of generators are expanded once through the concrete Lambda(R^6)
  algebra and cached, so no sign-prone relations are hand-coded.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedModel
from .exterior import (
    DIM,
    DIMS,
    INDEX_SETS,
    CONTRACT_TENSOR,
    WEDGE_TENSOR,
    Form,
    wedge_all,
)
from .expr import Expr, Num, diff_expr, to_text


# ---------------------------------------------------------------------------
# coefficient functions


class Coeff:
    """Protocol for coefficient functions: ev(env), d(var), text()."""

    def ev(self, env):
        raise NotImplementedError

    def d(self, var):
        raise NotImplementedError

    def text(self):
        raise NotImplementedError

    def is_zero(self):
        return False


class CExpr(Coeff):
    """Coefficient backed by a closed-form expression."""

    __slots__ = ("expr",)

    def __init__(self, expr):
        self.expr = expr if isinstance(expr, Expr) else Num(float(expr))

    def ev(self, env):
        return self.expr.ev(env)

    def d(self, var):
        return CExpr(diff_expr(self.expr, var))

    def text(self):
        return to_text(self.expr)

    def is_zero(self):
        return isinstance(self.expr, Num) and self.expr.value == 0.0


class CLin(Coeff):
    """Finite linear combination of coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms):
        flat = []
        for k, c in terms:
            if k == 0.0 or c.is_zero():
                continue
            if isinstance(c, CLin):
                flat.extend((k * k2, c2) for k2, c2 in c.terms)
            else:
                flat.append((float(k), c))
        self.terms = tuple(flat)

    def ev(self, env):
        if not self.terms:
            return 0.0
        acc = None
        for k, c in self.terms:
            v = k * c.ev(env)
            acc = v if acc is None else acc + v
        return acc

    def d(self, var):
        return CLin([(k, c.d(var)) for k, c in self.terms])

    def text(self):
        if not self.terms:
            return "0.0"
        return " + ".join(f"{k!r}*({c.text()})" for k, c in self.terms)

    def is_zero(self):
        return not self.terms


class CProd(Coeff):
    """Product of two coefficients (used by interior products)."""

    __slots__ = ("a", "b")

    def __init__(self, a, b):
        self.a, self.b = a, b

    def ev(self, env):
        return self.a.ev(env) * self.b.ev(env)

    def d(self, var):
        return CLin([(1.0, CProd(self.a.d(var), self.b)),
                     (1.0, CProd(self.a, self.b.d(var)))])

    def text(self):
        return f"({self.a.text()})*({self.b.text()})"

    def is_zero(self):
        return self.a.is_zero() or self.b.is_zero()


ZERO_COEFF = CExpr(Num(0.0))


def as_coeff(x) -> Coeff:
    if isinstance(x, Coeff):
        return x
    if isinstance(x, Expr):
        return CExpr(x)
    return CExpr(Num(float(x)))


# ---------------------------------------------------------------------------
# models


class CoframeModel:
    """A coframe together with structural exterior-derivative rules."""

    def __init__(self, kind, frame, variables, basis_names, basis_sizes):
        self.kind = kind
        self.frame = frame
        self.variables = variables
        self._basis_names = basis_names
        self._basis_sizes = basis_sizes

    def basis_size(self, degree):
        return self._basis_sizes[degree]

    def basis_names(self, degree):
        return self._basis_names[degree]

    def __repr__(self):
        return f"CoframeModel({self.kind!r})"

    def to_dict(self):
        out = {"kind": self.kind, "frame": self.frame,
               "generators": list(self.generator_names)}
        if self.kind == "ts3_invariant":
            out["d_rules"] = {
                name: [[float(c), tgt] for c, tgt in rule]
                for name, rule in self.d_rules_sparse.items()}
        else:
            out["d_rules"] = {}
        return out


def coordinate_chart() -> CoframeModel:
    """The flat chart model on variables x1..x6."""
    names = tuple(
        tuple("dx" + "".join(map(str, I)) for I in INDEX_SETS[k])
        for k in range(DIM + 1))
    model = CoframeModel(
        kind="coordinate_chart",
        frame="std",
        variables=("x1", "x2", "x3", "x4", "x5", "x6"),
        basis_names=names,
        basis_sizes=DIMS,
    )
    model.generator_names = tuple(f"dx{i}" for i in range(1, DIM + 1))
    return model


# the invariant model: factorizations of the basis elements into generators
_TS3_GENERATOR_FORMS = {
    "xi": Form.from_terms(1, {(1,): 1.0}, "ts3"),
    "A": Form.from_terms(1, {(2,): 1.0}, "ts3"),
    "w1": Form.from_terms(2, {(1, 2): 1.0}, "ts3"),
    "w2": Form.from_terms(2, {(3, 4): 1.0}, "ts3"),
    "w3": Form.from_terms(2, {(5, 6): 1.0}, "ts3"),
    "w4": Form.from_terms(2, {(3, 5): 1.0, (4, 6): 1.0}, "ts3"),
    "w5": Form.from_terms(2, {(3, 6): 1.0, (4, 5): -1.0}, "ts3"),
}
_TS3_GENERATOR_DEGREE = {"xi": 1, "A": 1, "w1": 2, "w2": 2, "w3": 2,
                         "w4": 2, "w5": 2}
_TS3_D_RULES = {
    "xi": Form.zero(2, "ts3"),
    "A": 0.25 * (_TS3_GENERATOR_FORMS["w3"] - _TS3_GENERATOR_FORMS["w2"]),
    "w1": 0.25 * wedge_all(_TS3_GENERATOR_FORMS["xi"],
                           _TS3_GENERATOR_FORMS["w2"] - _TS3_GENERATOR_FORMS["w3"]),
    "w2": Form.zero(3, "ts3"),
    "w3": Form.zero(3, "ts3"),
    "w4": -2.0 * wedge_all(_TS3_GENERATOR_FORMS["A"], _TS3_GENERATOR_FORMS["w5"]),
    "w5": 2.0 * wedge_all(_TS3_GENERATOR_FORMS["A"], _TS3_GENERATOR_FORMS["w4"]),
}
_TS3_BASIS_FACTORS = (
    ((),),
    (("xi",), ("A",)),
    (("w1",), ("w2",), ("w3",), ("w4",), ("w5",)),
    (("xi", "w2"), ("xi", "w3"), ("xi", "w4"), ("xi", "w5"),
     ("A", "w2"), ("A", "w3"), ("A", "w4"), ("A", "w5")),
    (("w1", "w2"), ("w1", "w3"), ("w1", "w4"), ("w1", "w5"), ("w2", "w3")),
    (("xi", "w2", "w3"), ("A", "w2", "w3")),
    (("w1", "w2", "w3"),),
)


def _ts3_basis_form(factors):
    if not factors:
        return Form(0, [1.0], "ts3")
    return wedge_all(*[_TS3_GENERATOR_FORMS[f] for f in factors])


def _ts3_basis_d(factors):
    """d of a product of generators via the graded Leibniz rule."""
    degree = sum(_TS3_GENERATOR_DEGREE[f] for f in factors)
    out = Form.zero(degree + 1, "ts3")
    for i, f in enumerate(factors):
        sign = (-1.0) ** sum(_TS3_GENERATOR_DEGREE[g] for g in factors[:i])
        pieces = ([_TS3_GENERATOR_FORMS[g] for g in factors[:i]]
                  + [_TS3_D_RULES[f]]
                  + [_TS3_GENERATOR_FORMS[g] for g in factors[i + 1:]])
        out = out + sign * wedge_all(*pieces)
    return out


def _projector(embedding):
    # the invariant basis forms have disjoint concrete support, so the normal
    # matrix is diagonal and the projection is exact in floating point
    normal = embedding.T @ embedding
    if np.max(np.abs(normal - np.diag(np.diag(normal)))) != 0.0:
        raise AssertionError("invariant basis lost orthogonality")
    return embedding.T / np.diag(normal)[:, None]


def _coords_in(embedding, form, what):
    coords = _projector(embedding) @ form.coeffs
    err = np.linalg.norm(embedding @ coords - form.coeffs)
    if err > 1e-10 * max(1.0, form.norm()):
        raise ValueError(f"{what} is not an invariant form (residual {err:.3e})")
    return coords


def ts3_invariant() -> CoframeModel:
    """The SO(4)-invariant model along the normal geodesic on TS^3."""
    names = tuple(
        tuple("^".join(f) if f else "1" for f in _TS3_BASIS_FACTORS[k])
        for k in range(DIM + 1))
    sizes = tuple(len(_TS3_BASIS_FACTORS[k]) for k in range(DIM + 1))
    model = CoframeModel(
        kind="ts3_invariant",
        frame="ts3",
        variables=("t",),
        basis_names=names,
        basis_sizes=sizes,
    )
    model.generator_names = ("xi", "A", "w1", "w2", "w3", "w4", "w5")
    model.d_rules_sparse = {}
    for name, dform in _TS3_D_RULES.items():
        deg = _TS3_GENERATOR_DEGREE[name] + 1
        coords = _coords_in(_embedding(deg), dform, f"d({name})")
        model.d_rules_sparse[name] = [
            (c, names[deg][i]) for i, c in enumerate(coords) if abs(c) > 1e-14]

    model.embedding = tuple(_embedding(k) for k in range(DIM + 1))
    model.projector = tuple(_projector(E) for E in model.embedding)
    # D[k]: invariant coordinates of d(basis element); XW[k]: of xi* ^ (element)
    model.d_matrix = []
    model.xi_matrix = []
    xi = _TS3_GENERATOR_FORMS["xi"]
    for k in range(DIM):
        nk, nk1 = sizes[k], sizes[k + 1]
        Dk = np.zeros((nk1, nk))
        Xk = np.zeros((nk1, nk))
        for j, factors in enumerate(_TS3_BASIS_FACTORS[k]):
            Dk[:, j] = _coords_in(model.embedding[k + 1],
                                  _ts3_basis_d(factors), "d(basis)")
            Xk[:, j] = _coords_in(model.embedding[k + 1],
                                  wedge_all(xi, _ts3_basis_form(factors)),
                                  "xi^basis")
        model.d_matrix.append(Dk)
        model.xi_matrix.append(Xk)
    return model


_EMBED_CACHE = {}


def _embedding(k):
    if k not in _EMBED_CACHE:
        cols = [_ts3_basis_form(f).coeffs for f in _TS3_BASIS_FACTORS[k]]
        _EMBED_CACHE[k] = np.stack(cols, axis=1)
    return _EMBED_CACHE[k]


_CHART = None
_TS3 = None


def chart_model() -> CoframeModel:
    global _CHART
    if _CHART is None:
        _CHART = coordinate_chart()
    return _CHART


def ts3_model() -> CoframeModel:
    global _TS3
    if _TS3 is None:
        _TS3 = ts3_invariant()
    return _TS3


# ---------------------------------------------------------------------------
# form fields


@dataclass(frozen=True)
class FormField:
    """A degree-k form field: one coefficient function per model basis form."""

    model: CoframeModel
    degree: int
    coeffs: tuple

    def __post_init__(self):
        want = self.model.basis_size(self.degree)
        if len(self.coeffs) != want:
            raise ValueError(
                f"degree {self.degree} field needs {want} coefficients, "
                f"got {len(self.coeffs)}")
        object.__setattr__(self, "coeffs", tuple(as_coeff(c) for c in self.coeffs))

    def coeff_values(self, env):
        """Evaluate all coefficients; scalars broadcast to the env's shape."""
        vals = [np.asarray(c.ev(env), dtype=float) for c in self.coeffs]
        shape = np.broadcast_shapes(*[v.shape for v in vals])
        return np.stack([np.broadcast_to(v, shape) for v in vals])

    def to_dict(self):
        return {"model": self.model.kind, "degree": self.degree,
                "coeffs": [c.text() for c in self.coeffs]}


def exterior_derivative(F: FormField) -> FormField:
    """d of a form field, symbolic in the coefficient functions."""
    model = F.model
    k = F.degree
    if k >= DIM:
        raise ValueError("d of a top-degree field vanishes; there is no degree 7")
    if model.kind == "coordinate_chart":
        W = WEDGE_TENSOR[(1, k)]
        out = []
        for m in range(DIMS[k + 1]):
            terms = []
            for v in range(DIM):
                var = model.variables[v]
                for i, c in enumerate(F.coeffs):
                    s = W[m, v, i]
                    if s and not c.is_zero():
                        terms.append((s, c.d(var)))
            out.append(CLin(terms))
        return FormField(model, k + 1, tuple(out))
    if model.kind == "ts3_invariant":
        Dk = model.d_matrix[k]
        Xk = model.xi_matrix[k]
        out = []
        for m in range(model.basis_size(k + 1)):
            terms = []
            for j, c in enumerate(F.coeffs):
                if Dk[m, j]:
                    terms.append((Dk[m, j], c))
                if Xk[m, j]:
                    terms.append((Xk[m, j], c.d("t")))
            out.append(CLin(terms))
        return FormField(model, k + 1, tuple(out))
    raise UnsupportedModel(f"unknown model kind {model.kind!r}")


def evaluate_at(F: FormField, point) -> Form:
    """Evaluate the field at a point (dict of model variables) as a Form."""
    env = dict(point)
    vals = np.array([float(c.ev(env)) for c in F.coeffs])
    if F.model.kind == "ts3_invariant":
        vals = F.model.embedding[F.degree] @ vals
    return Form(F.degree, vals, F.model.frame)


def invariant_coords(model: CoframeModel, form: Form) -> np.ndarray:
    """Coordinates of a concrete Form in the invariant basis of its degree."""
    if model.kind != "ts3_invariant":
        raise UnsupportedModel("invariant coordinates need the invariant model")
    return model.projector[form.degree] @ form.coeffs


def contract_field(X, F: FormField) -> FormField:
    """iota_X F for a vector field X with coefficient components (chart only)."""
    if F.model.kind != "coordinate_chart":
        raise UnsupportedModel("interior product of fields needs a chart model")
    Xc = [as_coeff(x) for x in X]
    k = F.degree
    if k == 0:
        raise ValueError("cannot contract a 0-form field")
    T = CONTRACT_TENSOR[k]
    out = []
    for m in range(DIMS[k - 1]):
        terms = []
        for v in range(DIM):
            if Xc[v].is_zero():
                continue
            for j, c in enumerate(F.coeffs):
                s = T[m, v, j]
                if s and not c.is_zero():
                    terms.append((s, CProd(Xc[v], c)))
        out.append(CLin(terms))
    return FormField(F.model, k - 1, tuple(out))


def wedge_fields(F: FormField, G: FormField) -> FormField:
    """Wedge product of two chart-model fields (symbolic coefficients)."""
    if F.model.kind != "coordinate_chart" or G.model.kind != "coordinate_chart":
        raise UnsupportedModel("field wedge implemented for chart models")
    k, l = F.degree, G.degree
    W = WEDGE_TENSOR[(k, l)]
    out = []
    for m in range(DIMS[k + l]):
        terms = []
        for i, a in enumerate(F.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(G.coeffs):
                s = W[m, i, j]
                if s and not b.is_zero():
                    terms.append((s, CProd(a, b)))
        out.append(CLin(terms))
    return FormField(F.model, k + l, tuple(out))


def lie_derivative(X, F: FormField) -> FormField:
    """Cartan formula L_X = iota_X d + d iota_X (coordinate charts only)."""
    if F.model.kind != "coordinate_chart":
        raise UnsupportedModel("lie_derivative supports coordinate charts only")
    dF = exterior_derivative(F)
    part1 = contract_field(X, dF)
    if F.degree == 0:
        return part1
    part2 = exterior_derivative(contract_field(X, F))
    out = [CLin([(1.0, a), (1.0, b)])
           for a, b in zip(part1.coeffs, part2.coeffs)]
    return FormField(F.model, F.degree, tuple(out))


def constant_field(model: CoframeModel, form_or_degree, coeffs=None) -> FormField:
    """A field with constant coefficients, from a Form or raw numbers."""
    if isinstance(form_or_degree, Form):
        degree = form_or_degree.degree
        values = form_or_degree.coeffs
        if model.kind == "ts3_invariant":
            values = model.projector[degree] @ values
    else:
        degree = int(form_or_degree)
        values = np.asarray(coeffs, dtype=float)
    return FormField(model, degree, tuple(CExpr(Num(v)) for v in values))
