"""Cohomogeneity-one construction on the tangent bundle of the 3-sphere.

A profile is a single even negative function f1(t) along the normal geodesic.
From it the construction derives

    f2   = -1/4 integral_0^t f1      (so f2' = -f1/4, f3 = -f2),
    q    = (f2^2)'' = f1^2/8 - f2 f1'/2,
    psi2 = sqrt(q^2 - f2^2)          (condition 3 makes the root real),
    phi5 = f1 f2 / 2,  phi5' = -q,

and assembles the invariant symplectic form, the stable 3-form and its dual
along the geodesic.  Admissibility is conditions 1)-3); the scalar curvature
comes out both from the torsion 2-form (Scal = -|sigma|^2/2) and from the
closed-form quotient -((f1 psi2)'/(f1 phi5'))^2, which must agree.

The derivative of the quadrature-backed f2 is always taken analytically as
-f1/4, never by finite differences, so closure identities hold to roundoff.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coframe import Coeff, FormField, ZERO_COEFF, ts3_model
from .coframe import exterior_derivative as field_d
from .errors import AdmissibilityFailure, HalfFlatError, ODEStiffness, ValidationFailure
from .expr import Expr, Num, diff_expr, parse_expr, to_text
from .exterior import Form, Metric
from .hitchin import (
    SU3Data,
    TorsionReport,
    sigma_diagnostics_many,
    triple_wedge_coeff_many,
    validate_su3_many,
)

#: builtin profile names accepted by the CLI layer
BUILTIN_PROFILES = {"cosh": "-cosh(t)"}


# ---------------------------------------------------------------------------
# time-dependent coefficient functions with exact derivative chains


class TFun(Coeff):
    """Coefficient function of t exposing an exact derivative chain."""

    def __call__(self, t):
        raise NotImplementedError

    def deriv(self):
        raise NotImplementedError

    def ev(self, env):
        return self(env["t"])

    def d(self, var):
        if var != "t":
            return ZERO_COEFF
        return self.deriv()

    def text(self):
        return type(self).__name__


class TNum(TFun):
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, t):
        return self.value if np.isscalar(t) else np.full_like(np.asarray(t, float),
                                                              self.value)

    def deriv(self):
        return TNum(0.0)

    def text(self):
        return repr(self.value)

    def is_zero(self):
        return self.value == 0.0


class TExpr(TFun):
    def __init__(self, expr):
        self.expr = expr if isinstance(expr, Expr) else parse_expr(str(expr))

    def __call__(self, t):
        return self.expr.ev({"t": t})

    def deriv(self):
        return TExpr(diff_expr(self.expr, "t"))

    def text(self):
        return to_text(self.expr)

    def is_zero(self):
        return isinstance(self.expr, Num) and self.expr.value == 0.0


class TSum(TFun):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def __call__(self, t):
        return self.a(t) + self.b(t)

    def deriv(self):
        return TSum(self.a.deriv(), self.b.deriv())

    def text(self):
        return f"({self.a.text()} + {self.b.text()})"


class TScale(TFun):
    def __init__(self, k, a):
        self.k, self.a = float(k), a

    def __call__(self, t):
        return self.k * self.a(t)

    def deriv(self):
        return TScale(self.k, self.a.deriv())

    def text(self):
        return f"{self.k!r}*({self.a.text()})"


class TProd(TFun):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def __call__(self, t):
        return self.a(t) * self.b(t)

    def deriv(self):
        return TSum(TProd(self.a.deriv(), self.b), TProd(self.a, self.b.deriv()))

    def text(self):
        return f"({self.a.text()})*({self.b.text()})"


class TQuot(TFun):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def __call__(self, t):
        return self.a(t) / self.b(t)

    def deriv(self):
        num = TSum(TProd(self.a.deriv(), self.b),
                   TScale(-1.0, TProd(self.a, self.b.deriv())))
        return TQuot(num, TProd(self.b, self.b))

    def text(self):
        return f"({self.a.text()})/({self.b.text()})"


class TSqrt(TFun):
    def __init__(self, a):
        self.a = a

    def __call__(self, t):
        return np.sqrt(np.maximum(self.a(t), 0.0))

    def deriv(self):
        return TQuot(TScale(0.5, self.a.deriv()), TSqrt(self.a))

    def text(self):
        return f"sqrt({self.a.text()})"


class TTab(TFun):
    """Tabulated function of a numeric profile; derivatives walk the chain."""

    def __init__(self, profile, which):
        self.profile = profile
        self.which = which

    def __call__(self, t):
        return getattr(self.profile, "_eval_" + self.which)(t)

    def deriv(self):
        nxt = {"f1": "f1p", "f1p": "f1pp"}.get(self.which)
        if nxt is None:
            raise HalfFlatError(
                "third derivative of a numeric profile is not available")
        return TTab(self.profile, nxt)

    def text(self):
        return f"<tabulated {self.which}>"


# ---------------------------------------------------------------------------
# profiles


def _cumulative_simpson(y, h):
    """Cumulative integral of samples y on a uniform grid, O(h^4)."""
    n = len(y)
    out = np.zeros(n)
    for j in range(1, n):
        if j == 1:
            out[1] = h * (5.0 * y[0] + 8.0 * y[1] - y[2]) / 12.0
        elif j % 2 == 0:
            out[j] = out[j - 2] + h * (y[j - 2] + 4.0 * y[j - 1] + y[j]) / 3.0
        else:
            out[j] = out[j - 1] + h * (-y[j - 2] + 8.0 * y[j - 1] + 5.0 * y[j]) / 12.0
    return out


def _gl3_integral(fn, a, b):
    """3-point Gauss-Legendre integral of fn over [a, b] (vectorized in a, b)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    r = math.sqrt(3.0 / 5.0)
    return half * (5.0 * fn(mid - r * half) + 8.0 * fn(mid)
                   + 5.0 * fn(mid + r * half)) / 9.0


class Profile:
    """Base class; concrete profiles provide f1, f1', f1'', f2 on [-T, T]."""

    kind = "abstract"

    def __init__(self, t_max, samples):
        samples = int(samples)
        if samples < 3 or samples % 2 == 0:
            raise ValueError("samples must be odd and >= 3 so that t = 0 is a node")
        self.t_max = float(t_max)
        self.samples = samples
        self.grid = np.linspace(-self.t_max, self.t_max, samples)
        self.center = samples // 2
        self.h = self.grid[1] - self.grid[0]

    # subclasses implement f1, f1_prime, f1_second, f2 (vectorized in t)

    def tf_f1(self):
        raise NotImplementedError

    def tf_f2(self):
        return TQuad(self)


class TQuad(TFun):
    """The quadrature-backed f2 with the analytic derivative -f1/4."""

    def __init__(self, profile):
        self.profile = profile

    def __call__(self, t):
        return self.profile.f2(t)

    def deriv(self):
        return TScale(-0.25, self.profile.tf_f1())

    def text(self):
        return "<f2 quadrature>"


class SymbolicProfile(Profile):
    """Profile whose f1 is a closed-form expression in t."""

    kind = "symbolic"

    def __init__(self, f1, t_max, samples):
        super().__init__(t_max, samples)
        self.f1_expr = f1 if isinstance(f1, Expr) else parse_expr(str(f1))
        if not self.f1_expr.variables() <= {"t"}:
            raise ValueError("profile expression may depend on t only")
        self.f1_prime_expr = diff_expr(self.f1_expr, "t")
        self.f1_second_expr = diff_expr(self.f1_prime_expr, "t")
        grid_pos = self.grid[self.center:]
        half = _cumulative_simpson(self.f1(grid_pos), self.h)
        self._f2_nodes = np.concatenate([half[1:][::-1] * 0.25, -0.25 * half])
        # -1/4 int is odd: mirror of the positive half keeps f2 exactly odd

    def _ev(self, expr, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(expr.ev({"t": t}), dtype=float),
                               t.shape).copy() if t.shape else float(expr.ev({"t": t}))

    def f1(self, t):
        return self._ev(self.f1_expr, t)

    def f1_prime(self, t):
        return self._ev(self.f1_prime_expr, t)

    def f1_second(self, t):
        return self._ev(self.f1_second_expr, t)

    def f2(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.rint((t - self.grid[0]) / self.h).astype(int),
                      0, self.samples - 1)
        tk = self.grid[idx]
        corr = _gl3_integral(self.f1, tk, t)
        return self._f2_nodes[idx] - 0.25 * corr

    def tf_f1(self):
        return TExpr(self.f1_expr)


class NumericProfile(Profile):
    """Profile tabulated on the grid with exact first and second derivatives."""

    kind = "numeric"

    def __init__(self, t_max, samples, f1, f1p, f1pp, f2):
        super().__init__(t_max, samples)
        self._f1 = np.asarray(f1, float)
        self._f1p = np.asarray(f1p, float)
        self._f1pp = np.asarray(f1pp, float)
        self._f2 = np.asarray(f2, float)

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(((t - self.grid[0]) / self.h).astype(int), 0, self.samples - 2)
        s = (t - self.grid[i]) / self.h
        return i, s

    def _hermite(self, t, y, yp):
        i, s = self._locate(t)
        y0, y1 = y[i], y[i + 1]
        d0, d1 = yp[i] * self.h, yp[i + 1] * self.h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1

    def _eval_f1(self, t):
        return self._hermite(t, self._f1, self._f1p)

    def _eval_f1p(self, t):
        return self._hermite(t, self._f1p, self._f1pp)

    def _eval_f1pp(self, t):
        return np.interp(np.asarray(t, dtype=float), self.grid, self._f1pp)

    def _eval_f2(self, t):
        return self._hermite(t, self._f2, -0.25 * self._f1)

    f1 = _eval_f1
    f1_prime = _eval_f1p
    f1_second = _eval_f1pp
    f2 = _eval_f2

    def tf_f1(self):
        return TTab(self, "f1")


def symbolic_profile(f1_text, t_max, samples) -> SymbolicProfile:
    """Build a profile from expression text or a builtin name like `cosh`."""
    text = BUILTIN_PROFILES.get(str(f1_text).strip(), f1_text)
    return SymbolicProfile(text, t_max, samples)


def integrate_f2(profile: Profile):
    """Sampled f2 on the profile grid plus an interpolating callable."""
    return profile.grid, np.asarray(profile.f2(profile.grid)), profile.f2


# ---------------------------------------------------------------------------
# admissibility


@dataclass
class AdmissibilityReport:
    """Conditions 1)-3) plus the parity/boundary extendability checks."""

    cond1_even_negative: bool
    cond2_convexity: bool
    cond3_psi2_real: bool
    first_violation_t: float | None
    extendability: dict

    def passed(self):
        return (self.cond1_even_negative and self.cond2_convexity
                and self.cond3_psi2_real)

    def to_dict(self):
        return {
            "cond1_even_negative": self.cond1_even_negative,
            "cond2_convexity": self.cond2_convexity,
            "cond3_psi2_real": self.cond3_psi2_real,
            "first_violation_t": self.first_violation_t,
            "extendability": {k: float(v) for k, v in self.extendability.items()},
        }


def _derived_arrays(profile, t):
    t = np.asarray(t, dtype=float)
    f1 = np.asarray(profile.f1(t), float)
    f1p = np.asarray(profile.f1_prime(t), float)
    f2 = np.asarray(profile.f2(t), float)
    q = f1 * f1 / 8.0 - f2 * f1p / 2.0
    return f1, f1p, f2, q


def _first_violation(profile, check, lo, hi):
    """Bisect |t| between a passing node lo and a failing node hi."""
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if check(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return hi


def check_admissibility(profile: Profile) -> AdmissibilityReport:
    """Evaluate conditions 1)-3) on the grid; failures are reported, not raised."""
    g = profile.grid
    f1, f1p, f2, q = _derived_arrays(profile, g)
    scale = max(1.0, float(np.max(np.abs(f1))))

    even = float(np.max(np.abs(f1 - f1[::-1]))) <= 1e-10 * scale
    negative = bool(np.all(f1 < 0.0))
    cond1 = even and negative

    psi2sq = q * q - f2 * f2
    tol3 = 1e-12 * max(1.0, float(np.max(np.abs(q))) ** 2)
    cond2_mask = q > 0.0
    cond3_mask = psi2sq >= -tol3
    cond2 = bool(np.all(cond2_mask))
    cond3 = bool(np.all(cond3_mask))

    first_t = None
    order = np.argsort(np.abs(g), kind="stable")
    for cond_mask, fn in ((cond2_mask, lambda t: _q_at(profile, t) > 0.0),
                          (cond3_mask, lambda t: _psi2sq_at(profile, t) >= -tol3)):
        if cond_mask.all():
            continue
        bad = order[~cond_mask[order]][0]
        prev = np.sign(g[bad]) * (abs(g[bad]) - profile.h)
        t_star = _first_violation(profile, fn, abs(prev), abs(g[bad]))
        if first_t is None or t_star < first_t:
            first_t = float(t_star)

    f1_0 = float(profile.f1(0.0))
    f2p_0 = -0.25 * f1_0
    extend = {
        "f1_even_residual": float(np.max(np.abs(f1 - f1[::-1]))),
        "f2_odd_residual": float(np.max(np.abs(
            np.asarray(profile.f2(g)) + np.asarray(profile.f2(-g))))),
        # f3 = -f2, f4 = 0, f5 = 0 in this construction
        "f3_prime_0": abs(-f2p_0 - (0.5 * f1_0 + f2p_0)),
        "f5_prime_0": abs(0.0 - (-0.25 * f1_0 - f2p_0)),
        "f4_at_0": 0.0,
    }
    return AdmissibilityReport(cond1, cond2, cond3, first_t, extend)


def _q_at(profile, t):
    return _derived_arrays(profile, t)[3]


def _psi2sq_at(profile, t):
    f1, f1p, f2, q = _derived_arrays(profile, t)
    return q * q - f2 * f2


# ---------------------------------------------------------------------------
# structure assembly


@dataclass
class BuiltStructure:
    """Per-sample data of the invariant structure along the geodesic.

    At the t = 0 node the orbit is singular (omega^3 vanishes in this frame),
    so pointwise quantities there are parity limits: P = -4, the metric block
    values are their analytic limits, and ``su3[center]`` is None.
    """

    profile: Profile
    grid: np.ndarray
    center: int
    f1: np.ndarray
    f2: np.ndarray
    psi2: np.ndarray
    phi5: np.ndarray
    phi5_prime: np.ndarray
    P: np.ndarray
    res_compat: np.ndarray
    res_norm: np.ndarray
    J: np.ndarray
    g: np.ndarray
    omega_coeffs: np.ndarray
    psi_coeffs: np.ndarray
    psi_hat_coeffs: np.ndarray
    omega_field: FormField
    psi_field: FormField
    psi_hat_field: FormField
    su3: list = field(repr=False, default=None)

    def form_at(self, index, which="omega"):
        coeffs = {"omega": self.omega_coeffs, "psi": self.psi_coeffs,
                  "psi_hat": self.psi_hat_coeffs}[which]
        degree = 2 if which == "omega" else 3
        return Form(degree, coeffs[index], "ts3")


def _structure_coefficients(profile, t):
    """Arrays f1, f2, psi2, phi5, phi5', plus first/second derivative helpers."""
    t = np.asarray(t, dtype=float)
    f1 = np.asarray(profile.f1(t), float)
    f1p = np.asarray(profile.f1_prime(t), float)
    f1pp = np.asarray(profile.f1_second(t), float)
    f2 = np.asarray(profile.f2(t), float)
    f2p = -0.25 * f1
    q = f1 * f1 / 8.0 - f2 * f1p / 2.0
    psi2 = np.sqrt(np.maximum(q * q - f2 * f2, 0.0))
    phi5 = 0.5 * f1 * f2
    phi5p = -q
    qp = 0.375 * f1 * f1p - 0.5 * f2 * f1pp
    with np.errstate(divide="ignore", invalid="ignore"):
        psi2p = np.where(psi2 > 0.0, (q * qp - f2 * f2p) / np.where(psi2 > 0, psi2, 1.0),
                         0.0)
    phi5pp = 0.5 * f1pp * f2 - 0.375 * f1 * f1p
    return dict(f1=f1, f1p=f1p, f1pp=f1pp, f2=f2, f2p=f2p, q=q, qp=qp,
                psi2=psi2, psi2p=psi2p, phi5=phi5, phi5p=phi5p, phi5pp=phi5pp)


def structure_fields(profile: Profile):
    """The omega, psi, psi_hat form fields of the construction (invariant model)."""
    model = ts3_model()
    tf1 = profile.tf_f1()
    tf2 = profile.tf_f2()
    phi5 = TScale(0.5, TProd(tf1, tf2))
    phi5p = phi5.deriv()
    psi2sq = TSum(TProd(TScale(-1.0, phi5p), TScale(-1.0, phi5p)),
                  TScale(-1.0, TProd(tf2, tf2)))
    psi2 = TSqrt(psi2sq)
    zero = TNum(0.0)
    omega = FormField(model, 2, (tf1, tf2, TScale(-1.0, tf2), zero, zero))
    psi = FormField(model, 3, (psi2, psi2, zero, phi5p,
                               zero, zero, TScale(2.0, phi5), zero))
    # -2 phi5/f1 = -f2 exactly, and 4 phi5/f1 = 2 f2 wherever needed
    psi_hat = FormField(model, 3, (zero, zero, TScale(-1.0, tf2), zero,
                                   TProd(tf1, psi2), TProd(tf1, psi2), zero,
                                   TProd(tf1, phi5p)))
    return omega, psi, psi_hat


def build_structure(profile: Profile, tol=1e-8) -> BuiltStructure:
    """Assemble and validate the structure at every grid node.

    Raises :class:`AdmissibilityFailure` when conditions 1)-3) fail and
    :class:`ValidationFailure` when any t != 0 sample fails the pointwise
    SU(3) checks at the given tolerance.
    """
    report = check_admissibility(profile)
    if not report.passed():
        raise AdmissibilityFailure(
            f"profile is not admissible: {report.to_dict()}",
            first_violation_t=report.first_violation_t)

    model = ts3_model()
    g = profile.grid
    n = len(g)
    center = profile.center
    c = _structure_coefficients(profile, g)

    E2, E3 = model.embedding[2], model.embedding[3]
    omega_inv = np.stack([c["f1"], c["f2"], -c["f2"],
                          np.zeros(n), np.zeros(n)], axis=1)
    zeros = np.zeros(n)
    psi_inv = np.stack([c["psi2"], c["psi2"], zeros, c["phi5p"],
                        zeros, zeros, 2.0 * c["phi5"], zeros], axis=1)
    psi_hat_inv = np.stack([zeros, zeros, -c["f2"], zeros,
                            c["f1"] * c["psi2"], c["f1"] * c["psi2"], zeros,
                            c["f1"] * c["phi5p"]], axis=1)
    omega_coeffs = omega_inv @ E2.T
    psi_coeffs = psi_inv @ E3.T
    psi_hat_coeffs = psi_hat_inv @ E3.T

    out = validate_su3_many(omega_coeffs, psi_coeffs, tol=tol)
    mask = np.ones(n, dtype=bool)
    mask[center] = False
    if not np.all(out["valid"][mask]):
        bad = int(np.nonzero(~out["valid"] & mask)[0][0])
        raise ValidationFailure(
            f"pointwise SU(3) validation failed at t = {g[bad]:.6g}",
            t=float(g[bad]),
            residual=float(max(out["res_compat"][bad], out["res_norm"][bad])))

    # engine psi_hat must reproduce the closed-form field
    hat_dev = np.max(np.abs(out["psi_hat"][mask] - psi_hat_coeffs[mask]))
    if hat_dev > tol * max(1.0, float(np.max(np.abs(psi_hat_coeffs)))):
        raise ValidationFailure(f"psi_hat mismatch {hat_dev:.3e}")
    # J(xi) = (1/f1) A-hat
    jxi = out["J"][mask][:, :, 0]
    jxi_expected = np.zeros_like(jxi)
    jxi_expected[:, 1] = 1.0 / c["f1"][mask]
    if np.max(np.abs(jxi - jxi_expected)) > tol * float(np.max(1.0 / np.abs(c["f1"]))):
        raise ValidationFailure("J(xi) deviates from (1/f1) A-hat")

    P = out["P"].copy()
    J = out["J"].copy()
    gmat = out["g"].copy()
    res_compat = out["res_compat"].copy()
    res_norm = out["res_norm"].copy()

    # t = 0 limits: P = -4 identically; g block limits; J by even Richardson
    P[center] = -4.0
    alpha0 = float(c["q"][center])
    beta0 = -float(c["psi2"][center])
    f1_0 = float(c["f1"][center])
    g0 = np.zeros((6, 6))
    g0[0, 0] = 1.0
    g0[1, 1] = f1_0 * f1_0
    for i in (2, 3):
        g0[i, i] = g0[i + 2, i + 2] = alpha0
        g0[i, i + 2] = g0[i + 2, i] = beta0
    gmat[center] = g0
    if center + 2 < n:
        J[center] = (4.0 * J[center + 1] - J[center + 2]) / 3.0
    # normalization residual relative to |omega|^3 so the t = 0 row is finite;
    # the closed-form psi_hat stands in for the engine's at the singular node
    hat_for_norm = out["psi_hat"].copy()
    hat_for_norm[center] = psi_hat_coeffs[center]
    w33 = np.einsum("ab,na,nb->n", _W33_CACHE(), psi_coeffs, hat_for_norm)
    top = triple_wedge_coeff_many(omega_coeffs)
    scale = np.maximum(np.linalg.norm(omega_coeffs, axis=1) ** 3, 1e-300)
    res_norm = np.abs(w33 - (2.0 / 3.0) * top) / scale

    omega_field, psi_field, psi_hat_field = structure_fields(profile)

    su3 = [None] * n
    for i in range(n):
        if i == center:
            continue
        residuals = {
            "compat": float(res_compat[i]),
            "normalization": float(out["res_norm"][i]),
            "s_proportional": float(out["s_rel"][i]),
            "j_squared": float(out["j_rel"][i]),
            "g_min_eigenvalue": float(out["g_min_eig"][i]),
            "P": float(out["P"][i]),
        }
        su3[i] = SU3Data(
            omega=Form(2, omega_coeffs[i], "ts3"),
            psi=Form(3, psi_coeffs[i], "ts3"),
            psi_hat=Form(3, out["psi_hat"][i], "ts3"),
            J=out["J"][i],
            g=Metric(out["g"][i]),
            P=float(out["P"][i]),
            residuals=residuals,
            valid=bool(out["valid"][i]),
        )

    return BuiltStructure(
        profile=profile, grid=g, center=center,
        f1=c["f1"], f2=c["f2"], psi2=c["psi2"], phi5=c["phi5"],
        phi5_prime=c["phi5p"], P=P,
        res_compat=res_compat, res_norm=res_norm,
        J=J, g=gmat,
        omega_coeffs=omega_coeffs, psi_coeffs=psi_coeffs,
        psi_hat_coeffs=psi_hat_coeffs,
        omega_field=omega_field, psi_field=psi_field,
        psi_hat_field=psi_hat_field,
        su3=su3,
    )


_W33 = None


def _W33_CACHE():
    global _W33
    if _W33 is None:
        from .exterior import WEDGE_TENSOR
        _W33 = WEDGE_TENSOR[(3, 3)][0]
    return _W33


def scal_closed_form(built: BuiltStructure):
    """Scal = -((f1 psi2)'/(f1 phi5'))^2 per sample; exact 0 at t = 0 by parity.

    Returns (values, near_zero_flags); flags mark samples where the
    denominator f1 phi5' fell below 1e-12 and the quotient is unreliable.
    """
    c = _structure_coefficients(built.profile, built.grid)
    numer = c["f1p"] * c["psi2"] + c["f1"] * c["psi2p"]
    denom = c["f1"] * c["phi5p"]
    flags = np.abs(denom) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        scal = -np.square(numer / np.where(flags, 1.0, denom))
    scal[flags] = np.nan
    scal[built.center] = 0.0
    return scal, flags


@dataclass
class TorsionSweep:
    """sigma extracted per sample, with the paper-form component comparison."""

    scal: np.ndarray
    sigma_inv: np.ndarray          # coordinates in (w1..w5)
    component_a: np.ndarray        # (f1 psi2)'/f1, the (w2+w3) component
    component_b: np.ndarray        # ((f1 phi5')' - 4 phi5/f1)/f1, the w5 component
    component_residual: float
    primitivity: np.ndarray
    j_invariance: np.ndarray
    reports: list


def scal_from_torsion(built: BuiltStructure) -> TorsionSweep:
    """d(psi_hat) in the invariant model, sigma by Lefschetz inversion, Scal.

    The t = 0 sample is the singular orbit: sigma and Scal vanish there by
    parity and are set exactly to zero.
    """
    model = ts3_model()
    g = built.grid
    n = len(g)
    center = built.center

    dhat_field = field_d(built.psi_hat_field)
    coords4 = dhat_field.coeff_values({"t": g}).T          # (n, 5)
    dhat = coords4 @ model.embedding[4].T                  # (n, 15)

    mask = np.ones(n, dtype=bool)
    mask[center] = False
    from .exterior import WEDGE_TENSOR
    L = np.einsum("mij,nj->nmi", WEDGE_TENSOR[(2, 2)], built.omega_coeffs[mask])
    sigma = np.zeros((n, 15))
    sigma[mask] = np.linalg.solve(L, dhat[mask][..., None])[..., 0]

    ginv = np.zeros_like(built.g)
    ginv[mask] = np.linalg.inv(built.g[mask])
    ginv[center] = np.eye(6)
    prim, j_res, nsq = sigma_diagnostics_many(
        built.omega_coeffs, built.J, ginv, sigma)
    prim[center] = 0.0
    j_res[center] = 0.0
    nsq[center] = 0.0
    scal = -0.5 * nsq
    scal[center] = 0.0

    sigma_inv = sigma @ model.projector[2].T

    c = _structure_coefficients(built.profile, g)
    a = (c["f1p"] * c["psi2"] + c["f1"] * c["psi2p"]) / c["f1"]
    b = (c["f1p"] * c["phi5p"] + c["f1"] * c["phi5pp"] - 2.0 * c["f2"]) / c["f1"]
    expected = np.stack([np.zeros(n), a, a, np.zeros(n), b], axis=1)
    expected[center] = 0.0
    comp_res = float(np.max(np.abs(sigma_inv - expected)))

    reports = []
    for i in range(n):
        rep = TorsionReport(
            sigma=Form(2, sigma[i], "ts3"),
            primitivity_residual=float(prim[i]),
            j_invariance_residual=float(j_res[i]),
            norm_sq=float(nsq[i]),
            scal=float(scal[i]),
        )
        reports.append(rep)
    return TorsionSweep(
        scal=scal, sigma_inv=sigma_inv, component_a=a, component_b=b,
        component_residual=comp_res, primitivity=prim, j_invariance=j_res,
        reports=reports,
    )


# ---------------------------------------------------------------------------
# the Calabi-Yau degeneration


def stenzel_solve(f1_at_0, t_max, samples=801) -> NumericProfile:
    """Integrate the Ricci-flat profile ODE (f1 psi2 = const).

    With psi2 = c/f1 and c = f1(0)^3/8 the constraint psi2^2 = q^2 - f2^2
    solves for f1' as

        f1' = (f1^2/4 - 2 sqrt(c^2/f1^2 + f2^2)) / f2,

    integrated by classical RK4 on the positive half grid with a Taylor
    launch (f1 = A + 2t^2/(5A) - 58 t^4/(525 A^3) + ...) from t = 1e-3 to
    clear the f2 = 0 singularity, then mirrored by parity.
    """
    A = float(f1_at_0)
    if A >= 0.0:
        raise ValueError("f1(0) must be negative")
    prof_grid = Profile(t_max, samples)
    half = prof_grid.grid[prof_grid.center:]
    h = prof_grid.h
    try:
        c = A ** 3 / 8.0
        a2 = 2.0 / (5.0 * A)
        a4 = -58.0 / (525.0 * A ** 3)
    except (OverflowError, ZeroDivisionError) as exc:
        raise ODEStiffness(f"initial data out of range: {exc}",
                           last_valid_t=0.0) from exc

    def taylor(t):
        f1 = A + a2 * t * t + a4 * t ** 4
        f2 = -0.25 * (A * t + a2 * t ** 3 / 3.0 + a4 * t ** 5 / 5.0)
        return np.array([f1, f2])

    def rhs(y):
        f1, f2 = y
        w = math.sqrt(c * c / (f1 * f1) + f2 * f2)
        return np.array([(f1 * f1 / 4.0 - 2.0 * w) / f2, -0.25 * f1])

    def f1_second_of(y, f1p):
        f1, f2 = y
        w = math.sqrt(c * c / (f1 * f1) + f2 * f2)
        f2p = -0.25 * f1
        wp = (-c * c * f1p / f1 ** 3 + f2 * f2p) / w
        return ((f1 * f1p / 2.0 - 2.0 * wp) * f2
                - (f1 * f1 / 4.0 - 2.0 * w) * f2p) / (f2 * f2)

    n_half = len(half)
    f1 = np.empty(n_half)
    f2 = np.empty(n_half)
    f1p = np.empty(n_half)
    f1pp = np.empty(n_half)
    f1[0], f2[0] = A, 0.0
    f1p[0], f1pp[0] = 0.0, 2.0 * a2

    t0 = min(1e-3, h)
    y = taylor(t0)
    t_now = t0

    def rk4_step(y, dt):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        return y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

    def advance(y, t_from, t_to, nsub):
        dt = (t_to - t_from) / nsub
        for _ in range(nsub):
            try:
                y = rk4_step(y, dt)
            except (ZeroDivisionError, OverflowError, ValueError) as exc:
                raise ODEStiffness(
                    f"profile ODE step failed near t = {t_from:.6g}: {exc}",
                    last_valid_t=float(t_from)) from exc
            if not np.all(np.isfinite(y)) or y[1] <= 0.0 or y[0] >= 0.0:
                raise ODEStiffness(
                    f"profile ODE left the admissible region near t = {t_from:.6g}",
                    last_valid_t=float(t_from))
        return y

    for j in range(1, n_half):
        target = half[j]
        y = advance(y, t_now, target, nsub=4 if j == 1 else 2)
        t_now = target
        f1[j], f2[j] = y
        try:
            d = rhs(y)
            f1p[j] = d[0]
            f1pp[j] = f1_second_of(y, d[0])
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise ODEStiffness(
                f"profile derivatives failed at t = {target:.6g}: {exc}",
                last_valid_t=float(t_now)) from exc

    full_f1 = np.concatenate([f1[1:][::-1], f1])
    full_f2 = np.concatenate([-f2[1:][::-1], f2])
    full_f1p = np.concatenate([-f1p[1:][::-1], f1p])
    full_f1pp = np.concatenate([f1pp[1:][::-1], f1pp])
    return NumericProfile(t_max, samples, full_f1, full_f1p, full_f1pp, full_f2)


# ---------------------------------------------------------------------------
# delimited output

CSV_HEADER = "t,f1,f2,psi2,phi5,P,scal_sigma,scal_closed,res_compat,res_norm"


def write_sweep_csv(built: BuiltStructure, scal_sigma, scal_closed, fh):
    """Fixed-format sweep rows; 17 significant digits, '.' decimal, LF endings."""
    fh.write(CSV_HEADER + "\n")
    for i, t in enumerate(built.grid):
        row = (t, built.f1[i], built.f2[i], built.psi2[i], built.phi5[i],
               built.P[i], scal_sigma[i], scal_closed[i],
               built.res_compat[i], built.res_norm[i])
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
