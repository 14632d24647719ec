import numpy as np
import pytest

from nltaxis import ConfigurationError
from nltaxis.models import (
    build_custom,
    build_preset,
    effective_coeffs,
    parse_coefficient,
    validate_wellposedness,
)
from nltaxis.operators import exponential_kernel


FIG_A = dict(a=0.01, b=1.0, s_cc=0.0, s_cv=10.0, mu_c=0.01, k_c=2.0, eta_c=1.0, mu_v=0.0, k_v=1.0, lambda_v=1.0)
FIG_STRONG = dict(FIG_A, s_cc=2.5)


def _lattice(c_max=2.0, v_max=1.0, n=41):
    return np.meshgrid(np.linspace(0.0, c_max, n), np.linspace(0.0, v_max, n), indexing="ij")


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def test_minimal_linear_effective_forms():
    cs = build_preset("minimal_linear", a=0.3, s_cc=0.7, s_cv=4.0, mu=1.0)
    eff = effective_coeffs(cs)
    rng = np.random.default_rng(0)
    c = rng.uniform(0, 3, 10000)
    v = rng.uniform(0, 2, 10000)
    assert np.abs(eff.d_eff(c, v) - (0.3 - 0.7 * c)).max() <= 1e-12
    assert np.abs(eff.chi_eff(c, v) - 4.0).max() <= 1e-12


def test_minimal_linear_without_cell_adhesion_keeps_constant_diffusion():
    cs = build_preset("minimal_linear", a=0.5, s_cc=0.0, s_cv=10.0, mu=1.0)
    eff = effective_coeffs(cs)
    cc, vv = _lattice()
    assert np.abs(eff.d_eff(cc, vv) - 0.5).max() <= 1e-14


def test_preset_validation_errors():
    with pytest.raises(ConfigurationError):
        build_preset("minimal_linear", a=0.0)
    with pytest.raises(ConfigurationError):
        build_preset("minimal_linear", s_cc=-1.0)
    with pytest.raises(ConfigurationError):
        build_preset("saturating", b=-0.5)
    with pytest.raises(ConfigurationError):
        build_preset("crowding", a=0.01, bogus=1.0)
    with pytest.raises(ConfigurationError):
        build_preset("nope")


def test_saturating_diffusion_lower_bound():
    cs = build_preset("saturating", b=1.0, s_cc=1.0, s_cv=2.0, k_v=1.0)
    cc, vv = _lattice(c_max=50.0, v_max=1.0, n=101)
    assert cs.d_c(cc, vv).min() >= 1.0 / (1.0 + 1.0) - 1e-12


def test_saturating_taxis_pressure_saturates():
    # c |chi| climbs to b as the population grows
    cs = build_preset("saturating", b=0.8, s_cc=1.0, s_cv=2.0)
    c = np.array([1e6])
    v = np.array([0.3])
    assert float(c[0] * cs.chi(c, v)[0]) == pytest.approx(0.8, rel=1e-5)


@pytest.mark.parametrize("tag,params", [
    ("minimal_linear", dict(a=0.01, s_cc=0.5, s_cv=10.0, mu=1.0)),
    ("saturating", dict(b=1.0, s_cc=1.0, s_cv=2.0)),
    ("crowding", FIG_STRONG),
])
def test_zero_preservation(tag, params):
    cs = build_preset(tag, **params)
    v = np.linspace(0.0, 2.0, 23)
    c = np.linspace(0.0, 3.0, 23)
    assert np.abs(cs.f_c(np.zeros_like(v), v)).max() == 0.0
    assert np.abs(cs.f_v(c, np.zeros_like(c))).max() == 0.0


def test_saturating_matrix_barrier():
    cs = build_preset("saturating", b=1.0, s_cc=1.0, s_cv=2.0, mu_v=0.7, k_v=1.3)
    c = np.linspace(0.0, 5.0, 41)
    assert np.all(cs.f_v(c, np.full_like(c, 1.3)) <= 0.0)
    assert np.all(cs.f_v(c, np.zeros_like(c)) == 0.0)


def test_partials_of_g_match_finite_differences():
    for tag, params in (("saturating", dict(b=1.0, s_cc=1.5, s_cv=3.0)), ("crowding", FIG_STRONG)):
        cs = build_preset(tag, **params)
        cc, vv = _lattice(n=21)
        step = 1e-6
        dc = (cs.g(cc + step, vv) - cs.g(cc - step, vv)) / (2 * step)
        dv = (cs.g(cc, vv + step) - cs.g(cc, vv - step)) / (2 * step)
        assert np.abs(cs.dg_dc(cc, vv) - dc).max() <= 1e-8
        assert np.abs(cs.dg_dv(cc, vv) - dv).max() <= 1e-8


# ---------------------------------------------------------------------------
# effective coefficients of the crowding family
# ---------------------------------------------------------------------------


def test_crowding_effective_matches_generic_rule():
    # the closed forms must coincide with D_c - c chi dg/dc and chi dg/dv
    cs = build_preset("crowding", **FIG_STRONG)
    eff = effective_coeffs(cs)
    cc, vv = _lattice(n=81)
    d_generic = cs.d_c(cc, vv) - cc * cs.chi(cc, vv) * cs.dg_dc(cc, vv)
    chi_generic = cs.chi(cc, vv) * cs.dg_dv(cc, vv)
    assert np.abs(eff.d_eff(cc, vv) - d_generic).max() <= 1e-12
    assert np.abs(eff.chi_eff(cc, vv) - chi_generic).max() <= 1e-12


def test_crowding_effective_diffusion_at_zero_cells():
    cs = build_preset("crowding", **FIG_STRONG)
    eff = effective_coeffs(cs)
    v = np.linspace(0.0, 3.0, 31)
    assert np.abs(eff.d_eff(np.zeros_like(v), v) - 0.01**2).max() <= 1e-15


def test_strong_cell_adhesion_turns_diffusion_negative():
    # independent lattice search at step 0.01 over [0,2] x [0,1]
    cs = build_preset("crowding", **FIG_STRONG)
    eff = effective_coeffs(cs)
    cc, vv = np.meshgrid(np.arange(0.0, 2.0001, 0.01), np.arange(0.0, 1.0001, 0.01), indexing="ij")
    d = eff.d_eff(cc, vv)
    assert d.min() < 0.0
    # and the sign flip requires matrix depletion: at v = 1 everything is parabolic-stable
    assert eff.d_eff(np.linspace(0, 2, 21), np.ones(21)).min() > 0.0


def test_no_cell_adhesion_stays_parabolic():
    cs = build_preset("crowding", **FIG_A)
    rep = validate_wellposedness(cs)
    assert rep.d_eff_min > 0.0
    assert not rep.ill_posed_local


# ---------------------------------------------------------------------------
# well-posedness report
# ---------------------------------------------------------------------------


def test_wellposedness_flags_strong_adhesion():
    rep = validate_wellposedness(build_preset("crowding", **FIG_STRONG))
    assert rep.ill_posed_local
    assert rep.d_eff_min < 0.0
    assert "ill-posed" in rep.summary()


def test_wellposedness_contraction_condition_example():
    # parameters satisfying (1 + K_v) b max{S_cc, |S_cc/(1+K_v) - S_cv K_v/(1+K_v)^2|} < 1
    k_v, b, s_cc, s_cv = 1.0, 0.5, 0.4, 1.0
    bound = (1 + k_v) * b * max(s_cc, abs(s_cc / (1 + k_v) - s_cv * k_v / (1 + k_v) ** 2))
    assert bound < 1.0
    cs = build_preset("saturating", b=b, s_cc=s_cc, s_cv=s_cv, k_v=k_v)
    rep = validate_wellposedness(cs, c_range=(0.0, 50.0), v_range=(0.0, k_v), step=0.05)
    assert rep.c_star < 1.0
    assert not rep.ill_posed_local


def test_wellposedness_margin_with_operator_norm():
    cs = build_preset("minimal_linear", a=1.0, s_cc=0.1, s_cv=1.0, mu=1.0)
    rep = validate_wellposedness(cs, op_norm_estimate=1.0)
    assert rep.margin == pytest.approx(1.0 - rep.c_star)


def test_wellposedness_rejects_empty_range():
    cs = build_preset("minimal_linear")
    with pytest.raises(ConfigurationError):
        validate_wellposedness(cs, c_range=(1.0, 1.0))


# ---------------------------------------------------------------------------
# custom coefficient sets
# ---------------------------------------------------------------------------


def test_parse_coefficient_arithmetic():
    fn = parse_coefficient("(1 + c) / (1 + c + v)")
    assert fn(np.array([1.0]), np.array([2.0]))[0] == pytest.approx(0.5)
    fn2 = parse_coefficient("exp(-2*c) * v")
    assert fn2(np.array([0.0]), np.array([3.0]))[0] == pytest.approx(3.0)


def test_parse_coefficient_rejects_unsafe():
    for expr in ("__import__('os')", "c.__class__", "lambda: 1", "open('x')", "c[0]"):
        with pytest.raises(ConfigurationError):
            parse_coefficient(expr)


def test_build_custom_with_finite_difference_partials():
    cs = build_custom(
        d_c="0.5 + 0*c",
        chi="1 + 0*c",
        g="c*v",
        f_c="0*c",
        f_v="-c*v",
        kernel=exponential_kernel(),
    )
    cc, vv = _lattice(n=11)
    assert np.abs(cs.dg_dc(cc, vv) - vv).max() <= 1e-6
    assert np.abs(cs.dg_dv(cc, vv) - cc).max() <= 1e-6


def test_build_custom_enforces_zero_preservation():
    with pytest.raises(ConfigurationError):
        build_custom(d_c="1 + 0*c", chi="1 + 0*c", g="c", f_c="1 + 0*c", f_v="-c*v")
    with pytest.raises(ConfigurationError):
        build_custom(d_c="0*c - 1", chi="1 + 0*c", g="c", f_c="0*c", f_v="-c*v")
