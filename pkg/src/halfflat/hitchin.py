"""Stable-form machinery at a point.

From a 2-form omega and a 3-form psi this module computes the endomorphism S
defined by  iota_v psi ^ psi ^ theta = theta(S v) omega^3/6,  the quartic
invariant P with S^2 = P Id, the almost complex structure J = S/sqrt(|P|),
the dual 3-form psi_hat = -psi(J.,.,.), the metric g = omega(., J.), and the
torsion 2-form sigma with  d(psi_hat) = sigma ^ omega  obtained by inverting
the Lefschetz map.

All heavy lifting happens in the ``*_many`` functions, which operate on
arrays of shape (N, ...) so that grid sweeps stay vectorized; the pointwise
API wraps them with N = 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSymplectic,
    DegenerateVolume,
    NotProportional,
    NotStable,
    SingularSystem,
    ValidationFailure,
)
from .exterior import (
    DIM,
    DIMS,
    INDEX_SETS,
    RANK,
    CONTRACT_TENSOR,
    WEDGE_TENSOR,
    Form,
    Metric,
    Vector6,
    contract,
    hodge_star,
    inner_product,
    sort_sign,
    two_form_matrix,
    wedge,
)

MAX_LEFSCHETZ_COND = 1e12


def _build_s_tensor():
    # ST[j,i,a,b] with  v * S[j,i] = sum ST[j,i,a,b] psi_a psi_b
    C3 = CONTRACT_TENSOR[3]          # (15, 6, 20)
    W23 = WEDGE_TENSOR[(2, 3)]       # (6, 15, 20)
    W51 = WEDGE_TENSOR[(5, 1)][0]    # (6, 6): [m, j]
    return np.einsum("mj,mpb,pia->jiab", W51, W23, C3)


def _build_hat_tensor():
    # psi(e_m, e_{I2}, e_{I3}) = sum_a HT[I, m, a] psi_a ; FIRST[I] = I1 - 1
    HT = np.zeros((DIMS[3], DIM, DIMS[3]))
    first = np.zeros(DIMS[3], dtype=np.intp)
    for Ii, I in enumerate(INDEX_SETS[3]):
        first[Ii] = I[0] - 1
        for m in range(1, DIM + 1):
            s, key = sort_sign((m, I[1], I[2]))
            if s:
                HT[Ii, m - 1, RANK[3][key]] = s
    return HT, first


_ST = _build_s_tensor()
_HT, _FIRST3 = _build_hat_tensor()
_W22 = WEDGE_TENSOR[(2, 2)]
_W24 = WEDGE_TENSOR[(2, 4)]
_W33 = WEDGE_TENSOR[(3, 3)][0]       # (20, 20)
_P2 = np.array(INDEX_SETS[2], dtype=np.intp) - 1   # (15, 2)


def triple_wedge_coeff_many(omega):
    """Top coefficient of omega^3 for omega of shape (N, 15)."""
    o2 = np.einsum("mij,ni,nj->nm", _W22, omega, omega)
    return np.einsum("ij,ni,nj->n", _W24[0], omega, o2)


def s_endomorphism_many(psi, vol):
    """S for psi (N, 20) against reference volume coefficients vol (N,)."""
    pair = np.einsum("jiab,na,nb->nji", _ST, psi, psi)
    return pair / vol[:, None, None]


def hitchin_p_many(S):
    S2 = S @ S
    P = np.einsum("nii->n", S2) / DIM
    dev = S2 - P[:, None, None] * np.eye(DIM)
    scale = np.maximum(np.abs(P), np.max(np.abs(S2), axis=(1, 2)))
    rel = np.max(np.abs(dev), axis=(1, 2)) / np.maximum(scale, 1e-300)
    return P, rel


def psi_hat_many(J, psi):
    """psi_hat = -psi(J.,.,.) with J applied to the first slot only."""
    tmp = np.einsum("Ima,na->nIm", _HT, psi)
    Jf = J[:, :, _FIRST3]                       # (N, 6, 20)
    return -np.einsum("nIm,nmI->nI", tmp, Jf)


def two_form_matrix_many(c):
    M = np.zeros(c.shape[:-1] + (DIM, DIM))
    i1, i2 = _P2[:, 0], _P2[:, 1]
    M[..., i1, i2] = c
    M[..., i2, i1] = -c
    return M


def gram2_pairing_many(ginv, a, b):
    """<a, b>_g for 2-forms given inverse metrics ginv (N,6,6)."""
    A = two_form_matrix_many(a)
    B = two_form_matrix_many(b)
    # <a,b> = 1/2 tr(A ginv B^T ginv) = 1/2 sum((ginv A ginv) * B)
    GAG = ginv @ A @ ginv
    return 0.5 * np.einsum("nij,nij->n", GAG, B)


def s_endomorphism(psi: Form, vol: Form) -> np.ndarray:
    """Endomorphism S of the tangent space determined by psi and a volume."""
    v = float(vol.coeffs[0])
    if v == 0.0:
        raise DegenerateVolume("reference volume form vanishes")
    return s_endomorphism_many(psi.coeffs[None, :], np.array([v]))[0]


def hitchin_p(psi: Form, vol: Form, rel_tol=1e-8) -> float:
    """Quartic invariant P with S^2 = P Id; raises if S^2 is not proportional."""
    S = s_endomorphism(psi, vol)
    P, rel = hitchin_p_many(S[None])
    if np.max(np.abs(S)) > 0 and rel[0] > rel_tol:
        raise NotProportional(
            f"S^2 deviates from P*Id by relative {rel[0]:.3e}")
    return float(P[0])


def almost_complex(psi: Form, vol: Form) -> np.ndarray:
    """J = S / sqrt(|P|); requires the stability condition P < 0."""
    S = s_endomorphism(psi, vol)
    P, _ = hitchin_p_many(S[None])
    if P[0] >= 0.0:
        raise NotStable(f"P(psi) = {P[0]:.6g} is not negative")
    return S / np.sqrt(-P[0])


@dataclass
class SU3Data:
    """A validated pointwise SU(3)-structure with residual diagnostics."""

    omega: Form
    psi: Form
    psi_hat: Form
    J: np.ndarray
    g: Metric
    P: float
    residuals: dict
    valid: bool

    def to_dict(self):
        return {
            "omega": self.omega.to_dict(),
            "psi": self.psi.to_dict(),
            "psi_hat": self.psi_hat.to_dict(),
            "J_rowmajor": np.asarray(self.J).ravel().tolist(),
            "g_rowmajor": np.asarray(self.g.gram).ravel().tolist(),
            "P": self.P,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "valid": self.valid,
        }


@dataclass
class TorsionReport:
    """Torsion 2-form sigma with primitivity/J-invariance diagnostics.

    ``scal`` is -norm_sq/2 by construction.
    """

    sigma: Form
    primitivity_residual: float
    j_invariance_residual: float
    norm_sq: float
    scal: float

    def to_dict(self):
        return {
            "sigma": self.sigma.to_dict(),
            "primitivity_residual": self.primitivity_residual,
            "j_invariance_residual": self.j_invariance_residual,
            "norm_sq": self.norm_sq,
            "scal": self.scal,
        }


def validate_su3_many(omega, psi, tol=1e-8):
    """Vectorized SU(3) validation over omega (N,15) and psi (N,20).

    Returns a dict of arrays; see :func:`validate_su3` for the pointwise
    variant built on top of it.  Entries of ``top`` equal to zero mark points
    where omega^3 = 0 (everything else is NaN there).
    """
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    n = omega.shape[0]
    top = triple_wedge_coeff_many(omega)
    ok = top != 0.0
    vol = np.where(ok, top, np.nan) / 6.0

    S = s_endomorphism_many(psi, vol)
    P, s_rel = hitchin_p_many(S)
    stable = ok & (P < 0.0)
    lam = np.sqrt(np.where(stable, -P, np.nan))
    J = S / lam[:, None, None]
    J2 = J @ J
    j_rel = np.max(np.abs(J2 + np.eye(DIM)), axis=(1, 2))

    psi_hat = psi_hat_many(J, psi)
    OM = two_form_matrix_many(omega)
    g = OM @ J
    g_sym = np.max(np.abs(g - np.swapaxes(g, 1, 2)), axis=(1, 2))
    g = 0.5 * (g + np.swapaxes(g, 1, 2))
    with np.errstate(invalid="ignore"):
        eig = np.linalg.eigvalsh(np.where(np.isfinite(g), g, 0.0)[..., :, :])
    g_min = eig[:, 0]
    g_max = eig[:, -1]
    g_pd = stable & (g_min > 1e-10 * np.maximum(g_max, 0.0))

    # a) omega ^ psi = 0
    compat = np.einsum("mij,ni,nj->nm", WEDGE_TENSOR[(2, 3)], omega, psi)
    scale_c = (np.linalg.norm(omega, axis=1) * np.linalg.norm(psi, axis=1))
    res_compat = np.linalg.norm(compat, axis=1) / np.maximum(scale_c, 1e-300)
    # c) psi ^ psi_hat = (2/3) omega^3
    pp = np.einsum("ab,na,nb->n", _W33, psi, psi_hat)
    res_norm = np.abs(pp - (2.0 / 3.0) * top) / np.maximum(np.abs(top), 1e-300)

    valid = (ok & stable & g_pd
             & (res_compat < tol) & (res_norm < tol)
             & (s_rel < tol) & (j_rel < tol) & (g_sym < tol * np.maximum(np.abs(P), 1.0)))
    return {
        "n": n, "top": top, "vol": vol, "S": S, "P": P, "s_rel": s_rel,
        "J": J, "j_rel": j_rel, "psi_hat": psi_hat, "g": g,
        "g_min_eig": g_min, "g_sym": g_sym, "res_compat": res_compat,
        "res_norm": res_norm, "stable": stable, "valid": valid,
    }


def validate_su3(omega: Form, psi: Form, tol=1e-8) -> SU3Data:
    """Check conditions a)-d) and assemble the full pointwise structure.

    Individual check failures are reported in ``residuals`` and flip the
    ``valid`` flag; only a degenerate omega (omega^3 = 0) raises.
    """
    omega._check_frame(psi)
    out = validate_su3_many(omega.coeffs, psi.coeffs, tol=tol)
    if out["top"][0] == 0.0:
        raise DegenerateSymplectic("omega^3 = 0: not a symplectic form")
    residuals = {
        "compat": float(out["res_compat"][0]),
        "normalization": float(out["res_norm"][0]),
        "s_proportional": float(out["s_rel"][0]),
        "j_squared": float(out["j_rel"][0]),
        "g_symmetry": float(out["g_sym"][0]),
        "g_min_eigenvalue": float(out["g_min_eig"][0]),
        "P": float(out["P"][0]),
    }
    return SU3Data(
        omega=omega,
        psi=psi,
        psi_hat=Form(3, out["psi_hat"][0], omega.frame),
        J=out["J"][0],
        g=Metric(out["g"][0]),
        P=float(out["P"][0]),
        residuals=residuals,
        valid=bool(out["valid"][0]),
    )


def lefschetz_matrix(omega: Form) -> np.ndarray:
    """Matrix of the Lefschetz map kappa -> kappa ^ omega on 2-forms."""
    return np.einsum("mij,j->mi", _W22, omega.coeffs)


def lefschetz_inverse(omega: Form, tau: Form) -> Form:
    """The unique 2-form sigma with sigma ^ omega = tau (omega symplectic)."""
    omega._check_frame(tau)
    if tau.degree != 4:
        raise DegreeMismatch("lefschetz_inverse expects a 4-form")
    top = triple_wedge_coeff_many(omega.coeffs[None])[0]
    if abs(top) <= 1e-300 + 1e-14 * np.linalg.norm(omega.coeffs) ** 3:
        raise DegenerateSymplectic("omega^3 = 0: Lefschetz map is singular")
    L = lefschetz_matrix(omega)
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > MAX_LEFSCHETZ_COND:
        raise SingularSystem(f"Lefschetz system condition number {cond:.3e}")
    return Form(2, np.linalg.solve(L, tau.coeffs), omega.frame)


def torsion_report(data: SU3Data, d_psi_hat: Form) -> TorsionReport:
    """Extract sigma from d(psi_hat) = sigma ^ omega and report Scal = -|sigma|^2/2."""
    sigma = lefschetz_inverse(data.omega, d_psi_hat)
    om2 = wedge(data.omega, data.omega)
    prim = wedge(sigma, om2).norm()
    SM = two_form_matrix(sigma)
    j_res = float(np.max(np.abs(data.J.T @ SM @ data.J - SM)))
    nsq = inner_product(data.g, sigma, sigma)
    return TorsionReport(
        sigma=sigma,
        primitivity_residual=prim,
        j_invariance_residual=j_res,
        norm_sq=nsq,
        scal=-0.5 * nsq,
    )


def lemma1_residual(omega: Form, psi: Form, X) -> float:
    """Residual of the identity  iota_X psi ^ psi = -2 * (iota_X omega).

    The Hodge star uses the induced metric and the orientation dV = omega^3/6;
    vanishes (to roundoff) on every valid SU(3)-structure.
    """
    data = validate_su3(omega, psi)
    if not data.valid:
        raise ValidationFailure("lemma 1 requires a valid SU(3)-structure")
    vec = X if isinstance(X, (Vector6, np.ndarray, list, tuple)) else Vector6(X)
    lhs = wedge(contract(vec, psi), psi)
    orientation = Form(6, [triple_wedge_coeff_many(omega.coeffs[None])[0] / 6.0],
                       omega.frame)
    rhs = hodge_star(data.g, orientation, contract(vec, omega)) * (-2.0)
    return (lhs - rhs).norm()


def sigma_diagnostics_many(omega, J, ginv, sigma):
    """Batched primitivity / J-invariance / norm diagnostics for sigma (N,15)."""
    om2 = np.einsum("mij,ni,nj->nm", _W22, omega, omega)
    prim = np.abs(np.einsum("ij,ni,nj->n", _W24[0], sigma, om2))
    SM = two_form_matrix_many(sigma)
    JT = np.swapaxes(J, 1, 2)
    j_res = np.max(np.abs(JT @ SM @ J - SM), axis=(1, 2))
    nsq = gram2_pairing_many(ginv, sigma, sigma)
    return prim, j_res, nsq
