import numpy as np
import pytest

from halfflat.exterior import Form, Metric, Vector6, wedge, wedge_all
from halfflat.hitchin import (
    almost_complex,
    hitchin_p,
    lefschetz_inverse,
    lemma1_residual,
    s_endomorphism,
    torsion_report,
    validate_su3,
)
from halfflat.errors import (
    DegenerateSymplectic,
    DegenerateVolume,
    NotStable,
    SingularSystem,
)

import oracle

W0 = Form(2, oracle.OMEGA0)
PSI0 = Form(3, oracle.PSI0)
VOL0 = wedge_all(W0, W0, W0) * (1.0 / 6.0)   # = -dx^123456


def test_s_endomorphism_flat():
    S = s_endomorphism(PSI0, VOL0)
    assert np.allclose(S @ S, -4.0 * np.eye(6), atol=1e-12)
    # matches the brute-force definition
    assert np.allclose(S, oracle.s_endo(oracle.PSI0, VOL0.coeffs[0]), atol=1e-12)


def test_s_endomorphism_random_matches_oracle():
    rng = np.random.default_rng(21)
    for _ in range(25):
        psi = Form(3, rng.standard_normal(20))
        S = s_endomorphism(psi, Form(6, [1.0]))
        assert np.allclose(S, oracle.s_endo(psi.coeffs, 1.0), atol=1e-10)


def test_s_endomorphism_degenerate_cases():
    assert np.allclose(
        s_endomorphism(Form.from_terms(3, {(1, 2, 3): 1.0}), Form(6, [1.0])), 0.0)
    with pytest.raises(DegenerateVolume):
        s_endomorphism(PSI0, Form(6, [0.0]))


def test_s_scales_quadratically():
    rng = np.random.default_rng(22)
    psi = Form(3, rng.standard_normal(20))
    S1 = s_endomorphism(psi, Form(6, [1.0]))
    S3 = s_endomorphism(psi * 3.0, Form(6, [1.0]))
    assert np.allclose(S3, 9.0 * S1, atol=1e-10)


def test_hitchin_p_values():
    assert hitchin_p(PSI0, VOL0) == pytest.approx(-4.0, abs=1e-12)
    # real decomposable type: frozen from the oracle, P = +1 > 0
    psir = Form.from_terms(3, {(1, 2, 3): 1.0, (4, 5, 6): 1.0})
    volstd = Form(6, [1.0])
    Sr = oracle.s_endo(psir.coeffs, 1.0)
    assert np.allclose(Sr, np.diag([-1, -1, -1, 1, 1, 1.0]), atol=1e-12)
    assert hitchin_p(psir, volstd) == pytest.approx(1.0, abs=1e-12)
    assert hitchin_p(Form(3, np.zeros(20)), volstd) == 0.0


def test_hitchin_p_quartic_scaling():
    assert hitchin_p(PSI0 * 2.0, VOL0) == pytest.approx(
        16.0 * hitchin_p(PSI0, VOL0), rel=1e-12)


def test_almost_complex_flat():
    J = almost_complex(PSI0, VOL0)
    assert np.allclose(J @ J, -np.eye(6), atol=1e-12)
    # J maps e1 to the e4 direction, compatible with omega0 = dx^14+dx^25+dx^36
    assert np.allclose(J[:, 0], np.eye(6)[3], atol=1e-12)


def test_almost_complex_not_stable():
    with pytest.raises(NotStable):
        almost_complex(Form.from_terms(3, {(1, 2, 3): 1.0, (4, 5, 6): 1.0}),
                       Form(6, [1.0]))


def test_validate_flat_model():
    data = validate_su3(W0, PSI0)
    assert data.valid
    assert data.P == pytest.approx(-4.0, abs=1e-12)
    assert np.allclose(data.g.gram, np.eye(6), atol=1e-12)
    expected_hat = oracle.form(3, {(1, 2, 3): 1.0, (1, 5, 6): -1.0,
                                   (2, 4, 6): 1.0, (3, 4, 5): -1.0})
    assert np.allclose(data.psi_hat.coeffs, expected_hat, atol=1e-12)
    # omega is J-compatible and g is J-hermitian
    J = data.J
    OM = np.zeros((6, 6))
    for idx, (p, q) in enumerate(oracle.BAS[2]):
        OM[p - 1, q - 1] = W0.coeffs[idx]
        OM[q - 1, p - 1] = -W0.coeffs[idx]
    assert np.allclose(J.T @ OM @ J, OM, atol=1e-12)
    assert np.allclose(J.T @ data.g.gram @ J, data.g.gram, atol=1e-12)
    # psi_hat ^ psi = -(2/3) omega^3
    lhs = wedge(data.psi_hat, PSI0).coeffs[0]
    assert lhs == pytest.approx(-(2.0 / 3.0) * (-6.0), abs=1e-12)


def test_validate_scaled_psi_fails_normalization():
    data = validate_su3(W0, PSI0 * 2.0)
    assert not data.valid
    # psi ^ psi_hat scales quartically against the fixed omega^3
    assert data.residuals["normalization"] > 1.0
    assert data.residuals["compat"] < 1e-12
    assert data.P < 0.0


def test_validate_unstable_psi():
    data = validate_su3(W0, Form.from_terms(3, {(1, 2, 3): 1.0, (4, 5, 6): 1.0}))
    assert not data.valid
    assert data.P > 0.0


def test_validate_degenerate_omega():
    with pytest.raises(DegenerateSymplectic):
        validate_su3(Form.from_terms(2, {(1, 2): 1.0}), PSI0)


def test_su3data_serialization():
    data = validate_su3(W0, PSI0)
    d = data.to_dict()
    assert set(d) == {"omega", "psi", "psi_hat", "J_rowmajor", "g_rowmajor",
                      "P", "residuals", "valid"}
    assert len(d["J_rowmajor"]) == 36 and len(d["g_rowmajor"]) == 36


def test_lefschetz_identities():
    tau = wedge(W0, W0)
    sigma = lefschetz_inverse(W0, tau)
    assert np.allclose(sigma.coeffs, W0.coeffs, atol=1e-12)
    zero = lefschetz_inverse(W0, Form(4, np.zeros(15)))
    assert np.allclose(zero.coeffs, 0.0)


def test_lefschetz_round_trip_random():
    rng = np.random.default_rng(23)
    for _ in range(100):
        om = Form(2, oracle.OMEGA0 + 0.3 * rng.standard_normal(15))
        kappa = Form(2, rng.standard_normal(15))
        back = lefschetz_inverse(om, wedge(kappa, om))
        assert np.max(np.abs(back.coeffs - kappa.coeffs)) < 1e-10


def test_lefschetz_degenerate():
    with pytest.raises(DegenerateSymplectic):
        lefschetz_inverse(Form.from_terms(2, {(1, 2): 1.0}),
                          Form(4, np.zeros(15)))


def test_lefschetz_singular_system():
    # omega^3 is nonzero but tiny: the 15x15 system is numerically singular
    eps = 3e-7
    om = Form.from_terms(2, {(1, 4): 1.0, (2, 5): eps, (3, 6): eps})
    with pytest.raises((SingularSystem, DegenerateSymplectic)):
        lefschetz_inverse(om, Form(4, np.zeros(15)))


def test_torsion_report_calabi_yau():
    data = validate_su3(W0, PSI0)
    rep = torsion_report(data, Form(4, np.zeros(15)))
    assert rep.sigma.is_zero()
    assert rep.norm_sq == 0.0 and rep.scal == 0.0
    assert rep.scal == -0.5 * rep.norm_sq


def test_torsion_report_consistency_random():
    # feed sigma0 ^ omega and recover sigma0 with its diagnostics
    rng = np.random.default_rng(24)
    data = validate_su3(W0, PSI0)
    for _ in range(20):
        sig0 = Form(2, rng.standard_normal(15))
        rep = torsion_report(data, wedge(sig0, W0))
        assert np.allclose(rep.sigma.coeffs, sig0.coeffs, atol=1e-10)
        assert rep.scal == -0.5 * rep.norm_sq
        want = oracle.inner(data.g.gram, 2, sig0.coeffs, sig0.coeffs)
        assert rep.norm_sq == pytest.approx(want, rel=1e-10)


def test_lemma1_flat():
    assert lemma1_residual(W0, PSI0, Vector6(np.eye(6)[0])) < 1e-12
    assert lemma1_residual(W0, PSI0, np.zeros(6)) == 0.0
    rng = np.random.default_rng(25)
    for _ in range(10):
        assert lemma1_residual(W0, PSI0, rng.standard_normal(6)) < 1e-12


def test_lemma1_requires_valid_structure():
    from halfflat.errors import ValidationFailure
    with pytest.raises(ValidationFailure):
        lemma1_residual(W0, PSI0 * 2.0, np.eye(6)[0])


def test_hitchin_p_proportionality_guard():
    # S^2 = P*Id is a structural identity; the guard only trips on a
    # deliberately impossible tolerance
    from halfflat.errors import NotProportional
    rng = np.random.default_rng(26)
    psi = Form(3, rng.standard_normal(20))
    with pytest.raises(NotProportional):
        hitchin_p(psi, Form(6, [1.0]), rel_tol=1e-18)


def test_volume_form_helper():
    from halfflat.exterior import volume_form
    g = Metric(np.diag([4.0, 1, 1, 1, 1, 1]))
    dv = volume_form(g, Form(6, [-1.0]))
    assert dv.coeffs[0] == pytest.approx(-2.0, abs=1e-14)
