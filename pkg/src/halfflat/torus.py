"""The T^6 family: omega = dx^14 + dx^25 + dx^36 with

    psi = -e^{l3} dx^126 + e^{l2} dx^135 - e^{l1} dx^234 + dx^456,
    l1 = b(x2) - c(x3),  l2 = c(x3) - a(x1),  l3 = a(x1) - b(x2),

for 1-periodic a, b, c.  Both forms are closed for every choice, the
structure validates as SU(3) at every point, and the torsion 2-form sigma
detects strictness.  Coordinate vector fields are scanned for automorphisms
(a lower bound for the full symmetry group), and preserved fields get the
harmonicity checks d(iota_X omega) = 0, d*(iota_X omega) = 0.

d(psi_hat) is computed through exact directional derivatives of the pointwise
Hitchin pipeline (S, P, J, psi_hat are all smooth closed-form maps of the psi
coefficients), so sigma keeps its primitivity and J-invariance to roundoff;
finite differences appear only in the d* harmonicity check, which
differentiates Hodge duals of numerically starred fields.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .coframe import (
    CExpr,
    FormField,
    chart_model,
    constant_field,
    contract_field,
    exterior_derivative,
    lie_derivative,
)
from .errors import PeriodicityViolation, ValidationFailure
from .expr import Expr, Num, Sub, evaluate, parse_expr
from .exterior import (
    COMPLEMENT,
    DIM,
    RANK,
    WEDGE_TENSOR,
    Form,
)
from .hitchin import (
    psi_hat_many,
    sigma_diagnostics_many,
    triple_wedge_coeff_many,
    validate_su3_many,
)

OMEGA_TERMS = {(1, 4): 1.0, (2, 5): 1.0, (3, 6): 1.0}


@dataclass(frozen=True)
class TorusSpec:
    """Generating functions a(x1), b(x2), c(x3) plus the per-axis grid size."""

    a: Expr
    b: Expr
    c: Expr
    grid: int = 32

    @classmethod
    def from_text(cls, a, b, c, grid=32):
        return cls(parse_expr(str(a)), parse_expr(str(b)), parse_expr(str(c)),
                   int(grid))

    def __post_init__(self):
        for expr, var in ((self.a, "x1"), (self.b, "x2"), (self.c, "x3")):
            if not expr.variables() <= {var}:
                raise ValueError(f"generating function may depend on {var} only")
        if self.grid < 4:
            raise ValueError("grid must be at least 4 per axis")


def periodicity_residual(expr: Expr, var: str, samples=257) -> float:
    """sup |f(u + 1) - f(u)| over a sample of u in [0, 1)."""
    u = np.linspace(0.0, 1.0, samples, endpoint=False)
    lo = np.asarray(evaluate(expr, {var: u}), dtype=float)
    hi = np.asarray(evaluate(expr, {var: u + 1.0}), dtype=float)
    return float(np.max(np.abs(hi - lo), initial=0.0))


def check_periodicity(spec: TorusSpec, tol=1e-8):
    for expr, var in ((spec.a, "x1"), (spec.b, "x2"), (spec.c, "x3")):
        res = periodicity_residual(expr, var)
        if res > tol:
            raise PeriodicityViolation(
                f"{var}-function is not 1-periodic (residual {res:.3e})")


def torus_fields(spec: TorusSpec):
    """The (omega, psi) form fields over the coordinate chart."""
    model = chart_model()
    omega = constant_field(model, Form.from_terms(2, OMEGA_TERMS))
    lam1 = Sub(spec.b, spec.c)
    lam2 = Sub(spec.c, spec.a)
    lam3 = Sub(spec.a, spec.b)
    coeffs = [CExpr(Num(0.0))] * 20
    coeffs[RANK[3][(1, 2, 6)]] = CExpr(Sub(Num(0.0), _exp(lam3)))
    coeffs[RANK[3][(1, 3, 5)]] = CExpr(_exp(lam2))
    coeffs[RANK[3][(2, 3, 4)]] = CExpr(Sub(Num(0.0), _exp(lam1)))
    coeffs[RANK[3][(4, 5, 6)]] = CExpr(Num(1.0))
    psi = FormField(model, 3, tuple(coeffs))
    return omega, psi


def _exp(arg):
    from .expr import Fn
    return Fn("exp", arg)


def build_torus(spec: TorusSpec, tol=1e-8):
    """Build the fields and validate the structure at every grid node."""
    check_periodicity(spec)
    omega, psi = torus_fields(spec)
    pw = _pointwise(omega, psi, spec.grid, tol)
    if not bool(np.all(pw["valid"])):
        bad = int(np.argmin(pw["valid"]))
        raise ValidationFailure(
            "SU(3) validation failed on the grid",
            residual=float(max(pw["res_compat"][bad], pw["res_norm"][bad])))
    return omega, psi


def _grid_env(n):
    u = np.arange(n) / n
    x1, x2, x3 = np.meshgrid(u, u, u, indexing="ij")
    return {
        "x1": x1.ravel(), "x2": x2.ravel(), "x3": x3.ravel(),
        "x4": 0.0, "x5": 0.0, "x6": 0.0,
    }


@lru_cache(maxsize=4)
def _pointwise(omega_field, psi_field, n, tol=1e-8):
    """Batched structure data over the n^3 grid, including sigma and Scal."""
    used = set()
    for c in (*omega_field.coeffs, *psi_field.coeffs):
        if hasattr(c, "expr"):
            used |= c.expr.variables()
    if not used <= {"x1", "x2", "x3"}:
        raise ValueError("torus fields may depend on x1, x2, x3 only")
    for c in omega_field.coeffs:
        for var in ("x1", "x2", "x3"):
            if not c.d(var).is_zero():
                raise ValueError("the symplectic form of this family is constant")

    env = _grid_env(n)
    N = n ** 3
    zeros_env = {k: 0.0 for k in ("x1", "x2", "x3", "x4", "x5", "x6")}
    omega_row = np.array([float(c.ev(zeros_env)) for c in omega_field.coeffs])
    omega = np.broadcast_to(omega_row, (N, 15)).copy()
    psi = np.ascontiguousarray(
        np.broadcast_to(psi_field.coeff_values(env).T, (N, 20)))

    out = validate_su3_many(omega, psi, tol=tol)
    S, P, J = out["S"], out["P"], out["J"]
    lam = np.sqrt(-P)

    # exact directional derivatives of psi_hat through the pipeline
    vol = out["vol"]
    dhat4 = np.zeros((N, 15))
    W13 = WEDGE_TENSOR[(1, 3)]
    for axis, var in enumerate(("x1", "x2", "x3")):
        dcoeffs = [c.d(var) for c in psi_field.coeffs]
        if all(c.is_zero() for c in dcoeffs):
            continue
        dpsi = FormField(psi_field.model, 3, tuple(dcoeffs)).coeff_values(env).T
        dpsi = np.broadcast_to(dpsi, psi.shape)
        dS = (np.einsum("jiab,na,nb->nji", _ST(), dpsi, psi, optimize=True)
              + np.einsum("jiab,na,nb->nji", _ST(), psi, dpsi, optimize=True)) \
            / vol[:, None, None]
        dP = np.einsum("nij,nji->n", dS, S) / 3.0
        dJ = dS / lam[:, None, None] + S * (dP / (2.0 * lam ** 3))[:, None, None]
        dpsi_hat = psi_hat_many(dJ, psi) + psi_hat_many(J, dpsi)
        dhat4 += np.einsum("mI,nI->nm", W13[:, axis, :], dpsi_hat)

    Lmat = np.einsum("mij,j->mi", WEDGE_TENSOR[(2, 2)], omega[0])
    sigma = dhat4 @ np.linalg.inv(Lmat).T
    ginv = np.linalg.inv(out["g"])
    prim, j_res, nsq = sigma_diagnostics_many(omega, J, ginv, sigma)
    scal = -0.5 * nsq

    out.update(sigma=sigma, sigma_prim=prim, sigma_jres=j_res,
               sigma_norm=np.sqrt(np.maximum(nsq, 0.0)), scal=scal,
               omega=omega, psi=psi, env=env, ginv=ginv, n_axis=n)
    return out


def _ST():
    from .hitchin import _ST as T
    return T


def verify_half_flat(omega_field, psi_field, grid=32, strict_tol=1e-6):
    """Closedness of omega and psi (symbolic d) and the torsion extraction."""
    env = _grid_env(grid)
    res_domega = float(np.max(np.abs(
        exterior_derivative(omega_field).coeff_values(env))))
    res_dpsi = float(np.max(np.abs(
        exterior_derivative(psi_field).coeff_values(env))))
    pw = _pointwise(omega_field, psi_field, grid)
    sup_sigma = float(np.max(pw["sigma_norm"]))
    return {
        "res_domega": res_domega,
        "res_dpsi": res_dpsi,
        "sup_sigma_norm": sup_sigma,
        "strict": bool(sup_sigma > strict_tol),
        "sigma_primitivity": float(np.max(pw["sigma_prim"])),
        "sigma_j_invariance": float(np.max(pw["sigma_jres"])),
        "scal_range": [float(np.min(pw["scal"])), float(np.max(pw["scal"]))],
    }


@dataclass
class AutomorphismReport:
    """Lie-derivative residuals of the coordinate fields; a lower bound scan."""

    per_field: dict
    dim_lower_bound: int

    def preserved_fields(self):
        return [k for k, v in self.per_field.items() if v["preserved"]]

    def to_dict(self):
        return {"per_field": self.per_field,
                "dim_lower_bound": self.dim_lower_bound}


def _fd4(arr, axis, h):
    """4th-order central difference with periodic wrap."""
    return (-np.roll(arr, -2, axis=axis) + 8.0 * np.roll(arr, -1, axis=axis)
            - 8.0 * np.roll(arr, 1, axis=axis) + np.roll(arr, 2, axis=axis)) \
        / (12.0 * h)


def _coclosed_residual(alpha_vals, pw):
    """sup |d * alpha| for a 1-form with values alpha_vals (N, 6).

    The star uses the pointwise metric; the exterior derivative of the
    starred 5-form needs only the derivative along each missing index, taken
    by periodic 4th-order stencils on the grid (the fields are constant in
    x4, x5, x6, so those directions contribute nothing).
    """
    n = pw["n_axis"]
    h = 1.0 / n
    sqrt_det = np.sqrt(np.linalg.det(pw["g"]))
    orient_sign = np.sign(triple_wedge_coeff_many(pw["omega"][:1])[0])
    t = orient_sign * sqrt_det[:, None] * np.einsum(
        "nij,nj->ni", pw["ginv"], alpha_vals)
    comp1, eps1 = COMPLEMENT[1]
    total = np.zeros(n ** 3)
    for m in range(DIM):            # m is the missing coordinate index (0-based)
        beta = (eps1[m] * t[:, m]).reshape(n, n, n)
        if m < 3:
            total += _fd4(beta, m, h).ravel()
    return float(np.max(np.abs(total)))


def automorphism_scan(omega_field, psi_field, grid=32, tol=1e-8) -> AutomorphismReport:
    """Test the coordinate fields d/dx^i and check harmonicity of iota_X omega.

    Only coordinate fields are scanned, so the count is a lower bound for the
    automorphism dimension.  Preservation of d/dx^1 depends on a being
    constant (likewise b, c), not on it vanishing.
    """
    env = _grid_env(grid)
    pw = _pointwise(omega_field, psi_field, grid)
    per_field = {}
    count = 0
    for i in range(DIM):
        X = [0.0] * DIM
        X[i] = 1.0
        res_om = float(np.max(np.abs(
            lie_derivative(X, omega_field).coeff_values(env))))
        res_psi = float(np.max(np.abs(
            lie_derivative(X, psi_field).coeff_values(env))))
        preserved = res_om < tol and res_psi < tol
        entry = {"res_omega": res_om, "res_psi": res_psi,
                 "preserved": preserved, "res_closed": None,
                 "res_coclosed": None}
        if preserved:
            count += 1
            alpha = contract_field(X, omega_field)
            entry["res_closed"] = float(np.max(np.abs(
                exterior_derivative(alpha).coeff_values(env))))
            alpha_vals = np.broadcast_to(alpha.coeff_values(env).T,
                                         (grid ** 3, DIM))
            entry["res_coclosed"] = _coclosed_residual(alpha_vals, pw)
        per_field[f"x{i + 1}"] = entry
    return AutomorphismReport(per_field=per_field, dim_lower_bound=count)


def full_report(spec: TorusSpec, tol=1e-8) -> dict:
    """The module's JSON report: strictness, scan results and Scal range."""
    omega, psi = build_torus(spec, tol=tol)
    hf = verify_half_flat(omega, psi, grid=spec.grid)
    scan = automorphism_scan(omega, psi, grid=spec.grid)
    return {
        "strict": hf["strict"],
        "dim_lower_bound": scan.dim_lower_bound,
        "per_field": scan.per_field,
        "scal_range": hf["scal_range"],
        "closedness": {"res_domega": hf["res_domega"],
                       "res_dpsi": hf["res_dpsi"]},
        "sigma": {"sup_norm": hf["sup_sigma_norm"],
                  "primitivity": hf["sigma_primitivity"],
                  "j_invariance": hf["sigma_j_invariance"]},
    }
