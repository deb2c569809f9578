import io
import math

import numpy as np
import pytest

import oracle

from halfflat.errors import AdmissibilityFailure, ODEStiffness
from halfflat.ts3 import (
    CSV_HEADER,
    build_structure,
    check_admissibility,
    integrate_f2,
    scal_closed_form,
    scal_from_torsion,
    stenzel_solve,
    symbolic_profile,
    write_sweep_csv,
)

# closed-form scalar curvature of the -cosh(t) profile, frozen at t = 1:
# -tanh(1)^2 (6 cosh(1)^2 - 5)^2 / (4 cosh(1)^4 - 8 cosh(1)^2 + 5)
SCAL_COSH_1 = -5.796455655477311


def cosh_scal(t):
    c = np.cosh(t)
    return -np.tanh(t) ** 2 * (6 * c * c - 5) ** 2 / (4 * c ** 4 - 8 * c * c + 5)


@pytest.fixture(scope="module")
def cosh_built():
    return build_structure(symbolic_profile("cosh", 3.0, 601))


def test_integrate_f2_constant_profile():
    prof = symbolic_profile("-1", 0.5, 101)
    grid, vals, interp = integrate_f2(prof)
    assert np.allclose(vals, grid / 4.0, atol=1e-14)
    assert interp(0.3) == pytest.approx(0.075, abs=1e-14)


def test_integrate_f2_cosh():
    prof = symbolic_profile("cosh", 3.0, 601)
    # analytic antiderivative as oracle: f2(t) = sinh(t)/4
    assert prof.f2(1.0) == pytest.approx(math.sinh(1.0) / 4.0, abs=1e-9)
    grid, vals, _ = integrate_f2(prof)
    assert np.max(np.abs(vals - np.sinh(grid) / 4.0)) < 1e-8
    # exactly odd on the symmetric grid
    assert np.max(np.abs(vals + vals[::-1])) == 0.0


def test_admissibility_cosh():
    rep = check_admissibility(symbolic_profile("cosh", 3.0, 601))
    assert rep.passed()
    assert rep.first_violation_t is None
    assert all(v < 1e-12 for v in rep.extendability.values())


def test_admissibility_constant_profile_fails_at_half():
    # psi2^2 = 1/64 - t^2/16 turns negative past t = 1/2
    rep = check_admissibility(symbolic_profile("-1", 1.0, 101))
    assert rep.cond1_even_negative and rep.cond2_convexity
    assert not rep.cond3_psi2_real
    assert rep.first_violation_t == pytest.approx(0.5, abs=1e-6)


def test_admissibility_positive_profile_fails():
    rep = check_admissibility(symbolic_profile("cosh(t)", 1.0, 101))
    assert not rep.cond1_even_negative


def test_admissibility_odd_profile_fails():
    rep = check_admissibility(symbolic_profile("-cosh(t) - 0.1*sinh(t)",
                                               1.0, 101))
    assert not rep.cond1_even_negative


def test_build_rejects_inadmissible():
    with pytest.raises(AdmissibilityFailure) as err:
        build_structure(symbolic_profile("-1", 1.0, 101))
    assert err.value.first_violation_t == pytest.approx(0.5, abs=1e-6)


def test_build_parity(cosh_built):
    b = cosh_built
    assert np.max(np.abs(b.f1 - b.f1[::-1])) < 1e-10
    assert np.max(np.abs(b.f2 + b.f2[::-1])) < 1e-10
    assert np.max(np.abs(b.psi2 - b.psi2[::-1])) < 1e-10
    assert np.max(np.abs(b.phi5 + b.phi5[::-1])) < 1e-10


def test_build_p_is_minus_four(cosh_built):
    assert np.max(np.abs(cosh_built.P + 4.0)) < 1e-8


def test_build_metric_blocks(cosh_built):
    b = cosh_built
    g = b.g
    assert np.max(np.abs(g[:, 0, 0] - 1.0)) < 1e-8
    assert np.max(np.abs(g[:, 0, 1])) < 1e-8
    assert np.max(np.abs(g[:, 1, 1] - b.f1 ** 2)) < 1e-8
    # 4-block: diagonal -2 phi5' phi5/(f1 f2), off-diagonal -2 psi2 phi5/(f1 f2)
    mask = np.arange(len(b.grid)) != b.center
    alpha = -2.0 * b.phi5_prime[mask] * b.phi5[mask] / (b.f1[mask] * b.f2[mask])
    beta = -2.0 * b.psi2[mask] * b.phi5[mask] / (b.f1[mask] * b.f2[mask])
    for i in (2, 3, 4, 5):
        assert np.max(np.abs(g[mask, i, i] - alpha)) < 1e-8
    assert np.max(np.abs(g[mask, 2, 4] - beta)) < 1e-8
    assert np.max(np.abs(g[mask, 3, 5] - beta)) < 1e-8
    assert np.max(np.abs(g[mask, 2, 3])) < 1e-10
    assert np.max(np.abs(g[mask, 2, 5])) < 1e-10


def test_build_normalization_identities(cosh_built):
    b = cosh_built
    # phi4^2 + phi5^2 = (f1 f2)^2/4 with phi4 = 0
    assert np.max(np.abs(b.phi5 ** 2 - 0.25 * (b.f1 * b.f2) ** 2)) < 1e-10
    # 4 phi5^2 = f1^2 (phi5'^2 - psi2^2)
    res = 4.0 * b.phi5 ** 2 - b.f1 ** 2 * (b.phi5_prime ** 2 - b.psi2 ** 2)
    assert np.max(np.abs(res)) < 1e-8 * max(1.0, float(np.max(b.f1 ** 4)))
    assert np.max(b.res_compat) < 1e-10
    assert np.max(b.res_norm) < 1e-10


def test_build_su3_samples_valid(cosh_built):
    b = cosh_built
    assert b.su3[b.center] is None
    others = [s for i, s in enumerate(b.su3) if i != b.center]
    assert all(s.valid for s in others)
    # J(xi) = (1/f1) A-hat
    i = b.center + 100
    assert b.su3[i].J[1, 0] == pytest.approx(1.0 / b.f1[i], abs=1e-10)


def test_scal_closed_form_cosh(cosh_built):
    scal, flags = scal_closed_form(cosh_built)
    assert not flags.any()
    assert scal[cosh_built.center] == 0.0
    i1 = np.argmin(np.abs(cosh_built.grid - 1.0))
    assert scal[i1] == pytest.approx(SCAL_COSH_1, abs=1e-6)
    # matches the displayed closed form everywhere
    assert np.max(np.abs(scal - cosh_scal(cosh_built.grid))) < 1e-6


def test_scal_cross_check(cosh_built):
    scal_c, _ = scal_closed_form(cosh_built)
    sweep = scal_from_torsion(cosh_built)
    mask = np.abs(cosh_built.grid) >= 0.1
    assert np.max(np.abs(sweep.scal[mask] - scal_c[mask])) < 1e-4
    # the two expressions agree to much better than the required tolerance
    big = np.abs(cosh_built.grid) >= 2.0
    assert np.max(np.abs(sweep.scal[big] / scal_c[big] - 1.0)) < 1e-6


def test_torsion_components_match_formula(cosh_built):
    sweep = scal_from_torsion(cosh_built)
    assert sweep.component_residual < 1e-6
    # sigma is primitive and J-invariant
    assert np.max(sweep.primitivity) < 1e-8
    assert np.max(sweep.j_invariance) < 1e-8
    # sigma(0) = 0 by parity, and the structure is strict
    assert np.max(np.abs(sweep.sigma_inv[cosh_built.center])) == 0.0
    assert float(np.max(-2.0 * sweep.scal)) > 1e-6


def test_torsion_reports(cosh_built):
    sweep = scal_from_torsion(cosh_built)
    rep = sweep.reports[cosh_built.center + 50]
    assert rep.scal == -0.5 * rep.norm_sq
    d = rep.to_dict()
    assert set(d) == {"sigma", "primitivity_residual", "j_invariance_residual",
                      "norm_sq", "scal"}


def test_vanishing_sigma_iff_vanishing_scal(cosh_built):
    sweep = scal_from_torsion(cosh_built)
    norms = np.linalg.norm(sweep.sigma_inv, axis=1)
    scal = np.abs(sweep.scal)
    assert np.all((norms < 1e-12) == (scal < 1e-24))


def test_stenzel_constant_c():
    prof = stenzel_solve(-1.0, 2.0, 401)
    built = build_structure(prof)
    # f1(0)^3/8 = -1/8 and f1 psi2 stays pinned at it
    assert np.max(np.abs(built.f1 * built.psi2 + 0.125)) < 1e-10


def test_stenzel_scal_flat():
    prof = stenzel_solve(-1.0, 2.0, 801)
    built = build_structure(prof)
    scal_c, _ = scal_closed_form(built)
    sweep = scal_from_torsion(built)
    mask = np.abs(built.grid) >= 0.1
    assert np.max(np.abs(scal_c[mask])) < 1e-5
    assert np.max(np.abs(sweep.scal[mask])) < 1e-5
    assert np.max(np.abs(built.P + 4.0)) < 1e-8
    # constant scalar curvature forces the Calabi-Yau case
    if float(np.ptp(sweep.scal[mask])) < 1e-6:
        assert np.max(np.abs(sweep.scal[mask])) < 1e-5


def test_stenzel_rejects_positive_f1():
    with pytest.raises(ValueError):
        stenzel_solve(1.0, 2.0, 101)


def test_stenzel_extreme_data_reports_stiffness():
    with pytest.raises(ODEStiffness) as err:
        stenzel_solve(-1e-300, 1.0, 51)
    assert err.value.last_valid_t is not None


def test_nonstandard_admissible_profile():
    # P = -4 holds for every admissible profile, not only the cosh example
    built = build_structure(symbolic_profile("-1 - t*t", 3.0, 241))
    assert np.max(np.abs(built.P + 4.0)) < 1e-8
    scal_c, _ = scal_closed_form(built)
    sweep = scal_from_torsion(built)
    mask = np.abs(built.grid) >= 0.1
    assert np.max(np.abs(sweep.scal[mask] - scal_c[mask])) < 1e-4


def test_su3_sample_compatibilities(cosh_built):
    # omega(J., J.) = omega and g(J., J.) = g pointwise
    su3 = cosh_built.su3[cosh_built.center + 77]
    J = su3.J
    OM = np.zeros((6, 6))
    for idx, (p, q) in enumerate(oracle.BAS[2]):
        OM[p - 1, q - 1] = su3.omega.coeffs[idx]
        OM[q - 1, p - 1] = -su3.omega.coeffs[idx]
    assert np.max(np.abs(J.T @ OM @ J - OM)) < 1e-10
    g = su3.g.gram
    assert np.max(np.abs(J.T @ g @ J - g)) < 1e-10
    # psi_hat ^ psi = -(2/3) omega^3
    from halfflat.exterior import wedge, wedge_all
    lhs = wedge(su3.psi_hat, su3.psi)
    rhs = wedge_all(su3.omega, su3.omega, su3.omega) * (-2.0 / 3.0)
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-10


def test_stenzel_admissible():
    prof = stenzel_solve(-0.7, 1.5, 301)
    rep = check_admissibility(prof)
    assert rep.passed()


def test_csv_format_and_determinism(cosh_built):
    scal_c, _ = scal_closed_form(cosh_built)
    sweep = scal_from_torsion(cosh_built)
    bufs = []
    for _ in range(2):
        buf = io.StringIO()
        write_sweep_csv(cosh_built, sweep.scal, scal_c, buf)
        bufs.append(buf.getvalue())
    assert bufs[0] == bufs[1]
    lines = bufs[0].split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 601 + 2 and lines[-1] == ""
    row = lines[1 + cosh_built.center].split(",")
    assert float(row[0]) == 0.0
    assert float(row[5]) == -4.0
    assert float(row[6]) == 0.0 and float(row[7]) == 0.0
    assert "\r" not in bufs[0]
