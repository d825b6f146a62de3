import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trivlab import (
    DegenerateConditioningError,
    LrcStructure,
    SrcCorrelator,
    alpha_beta,
    check_assumption3,
    eval_lrc,
    eval_src,
    trivialization_threshold,
)
from trivlab.structure_functions import conditioning_variance

from oracles import central_diff

DEFAULT_SRC = SrcCorrelator()          # B(r) = exp(-r)
DEFAULT_LRC = LrcStructure()           # D(r) = 0.5 r + 1 - exp(-r)


def atoms_strategy():
    weight = st.floats(min_value=0.1, max_value=10.0)
    scale = st.floats(min_value=0.3, max_value=3.0)
    return st.lists(st.tuples(weight, scale), min_size=1, max_size=4)


# ---------------------------------------------------------------- evaluation

def test_default_src_is_plain_exponential():
    for r in (0.0, 0.3, 1.0, 4.2):
        assert eval_src(DEFAULT_SRC, r) == pytest.approx(np.exp(-r), rel=1e-15)
        assert eval_src(DEFAULT_SRC, r, order=1) == pytest.approx(-np.exp(-r), rel=1e-15)
        assert eval_src(DEFAULT_SRC, r, order=2) == pytest.approx(np.exp(-r), rel=1e-15)


def test_default_lrc_values():
    assert eval_lrc(DEFAULT_LRC, 0.0) == 0.0
    assert eval_lrc(DEFAULT_LRC, 1.0) == pytest.approx(1.5 - np.exp(-1.0), rel=1e-15)
    assert eval_lrc(DEFAULT_LRC, 0.0, order=1) == pytest.approx(1.5)
    assert eval_lrc(DEFAULT_LRC, 0.0, order=2) == pytest.approx(-1.0)
    assert eval_lrc(DEFAULT_LRC, 0.0, order=3) == pytest.approx(1.0)
    assert eval_lrc(DEFAULT_LRC, 0.0, order=4) == pytest.approx(-1.0)


def test_eval_vectorizes():
    r = np.linspace(0.0, 3.0, 7)
    b = eval_src(DEFAULT_SRC, r)
    assert b.shape == r.shape
    assert np.allclose(b, np.exp(-r))
    d = eval_lrc(DEFAULT_LRC, r, order=1)
    assert np.allclose(d, 0.5 + np.exp(-r))
    assert isinstance(eval_src(DEFAULT_SRC, 1.0), float)


@settings(max_examples=60, deadline=None)
@given(atoms=atoms_strategy(), c0=st.floats(min_value=0.0, max_value=2.0),
       r=st.floats(min_value=0.0, max_value=5.0), order=st.integers(1, 2))
def test_src_derivatives_match_finite_differences(atoms, c0, r, order):
    model = SrcCorrelator(c0=c0, atoms=atoms)
    exact = eval_src(model, r, order=order)
    approx = central_diff(lambda s: eval_src(model, s, order=order - 1), r)
    # 1e-6 relative, plus the subtraction rounding floor eps * |f| / h of the
    # difference quotient (matters once the exponentials saturate)
    floor = 2e-10 * max(1.0, abs(eval_src(model, r, order=order - 1)))
    assert abs(exact - approx) <= 1e-6 * abs(exact) + floor


@settings(max_examples=60, deadline=None)
@given(atoms=atoms_strategy(), A=st.floats(min_value=0.0, max_value=2.0),
       r=st.floats(min_value=0.0, max_value=5.0), order=st.integers(1, 4))
def test_lrc_derivatives_match_finite_differences(atoms, A, r, order):
    model = LrcStructure(A=A, atoms=atoms)
    exact = eval_lrc(model, r, order=order)
    approx = central_diff(lambda s: eval_lrc(model, s, order=order - 1), r)
    floor = 2e-10 * max(1.0, abs(eval_lrc(model, r, order=order - 1)))
    assert abs(exact - approx) <= 1e-6 * abs(exact) + floor


def test_src_increments_match_induced_structure_function():
    # D(r) = 2 (B(0) - B(r)) links the two families; check the derivative dictionary.
    model = SrcCorrelator(c0=0.3, atoms=((0.7, 1.2), (0.5, 0.6)))
    for r in (0.0, 0.4, 2.0):
        d1 = -2.0 * eval_src(model, r, order=1)
        d2 = -2.0 * eval_src(model, r, order=2)
        induced = lambda s: 2.0 * (eval_src(model, 0.0) - eval_src(model, s))
        assert central_diff(induced, r) == pytest.approx(d1, rel=1e-7)
        assert central_diff(lambda s: central_diff(induced, s, h=1e-4), r, h=1e-4) == pytest.approx(d2, rel=1e-5)


def test_eval_rejects_bad_order():
    with pytest.raises(ValueError):
        eval_src(DEFAULT_SRC, 1.0, order=3)
    with pytest.raises(ValueError):
        eval_lrc(DEFAULT_LRC, 1.0, order=5)
    with pytest.raises(ValueError):
        eval_lrc(DEFAULT_LRC, 1.0, order=-1)


# ---------------------------------------------------------------- validation

def test_model_validation():
    with pytest.raises(ValueError):
        SrcCorrelator(c0=-0.1)
    with pytest.raises(ValueError):
        SrcCorrelator(atoms=((0.0, 1.0),))
    with pytest.raises(ValueError):
        SrcCorrelator(atoms=((1.0, -1.0),))
    with pytest.raises(ValueError):
        LrcStructure(A=-0.5)
    with pytest.raises(ValueError):
        LrcStructure(atoms=((1.0, np.inf),))


def test_empty_atoms_degenerate_models():
    # constant correlator: B = c0, no curvature, threshold 0
    flat = SrcCorrelator(c0=0.3, atoms=())
    assert eval_src(flat, 1.7) == pytest.approx(0.3, abs=0.0)
    assert eval_src(flat, 1.7, order=1) == 0.0
    assert eval_src(flat, 0.0, order=2) == 0.0
    assert trivialization_threshold(flat) == 0.0
    # pure ramp: D = A r, the conditioning variance vanishes identically
    ramp = LrcStructure(A=0.5, atoms=())
    assert eval_lrc(ramp, 2.0) == pytest.approx(1.0, abs=0.0)
    assert eval_lrc(ramp, 2.0, order=1) == 0.5
    with pytest.raises(DegenerateConditioningError):
        check_assumption3(ramp, rho_max=10.0, grid_points=50)


def test_models_are_hashable_and_frozen():
    m = SrcCorrelator()
    assert hash(m) == hash(SrcCorrelator(c0=0.0, atoms=((1.0, 1.0),)))
    with pytest.raises(AttributeError):
        m.c0 = 1.0


# ---------------------------------------------------------------- thresholds

def test_default_thresholds():
    # B''(0) = 1 -> sqrt(4); D''(0) = -1 -> sqrt(2)
    assert trivialization_threshold(DEFAULT_SRC) == pytest.approx(2.0, abs=1e-14)
    assert trivialization_threshold(DEFAULT_LRC) == pytest.approx(np.sqrt(2.0), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(atoms=atoms_strategy(), s=st.floats(min_value=0.5, max_value=2.0))
def test_threshold_scale_covariance(atoms, s):
    # rescaling every atom scale t -> s t multiplies B''(0) by s^4
    base = trivialization_threshold(SrcCorrelator(atoms=atoms))
    scaled = trivialization_threshold(SrcCorrelator(atoms=[(a, s * t) for a, t in atoms]))
    assert scaled == pytest.approx(s * s * base, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(atoms=atoms_strategy())
def test_threshold_atom_split_invariance(atoms):
    split = []
    for a, t in atoms:
        split += [(a / 2, t), (a / 2, t)]
    for family, kwargs in ((SrcCorrelator, {}), (LrcStructure, {"A": 0.25})):
        whole = family(atoms=atoms, **kwargs)
        halves = family(atoms=split, **kwargs)
        assert trivialization_threshold(halves) == pytest.approx(
            trivialization_threshold(whole), rel=1e-12)


def test_threshold_rejects_unknown_model():
    with pytest.raises(TypeError):
        trivialization_threshold(object())


# ---------------------------------------------------------------- alpha/beta

def test_alpha_beta_signs_on_default():
    for rho in np.geomspace(1e-3, 10.0, 25):
        alpha, beta = alpha_beta(DEFAULT_LRC, rho)
        assert alpha < 0.0
        assert beta < 0.0
        assert conditioning_variance(DEFAULT_LRC, rho) > 0.0


def test_alpha_beta_small_rho_limits():
    # Series: V = -(3/2) D''(0) rho^4 + O(rho^6), so
    # beta -> D''(0)/sqrt(-3 D''(0)/2) = -sqrt(-2 D''(0)/3) and alpha rho^2 -> 2 beta.
    beta_limit = -np.sqrt(2.0 / 3.0)
    alpha, beta = alpha_beta(DEFAULT_LRC, 1e-3)
    assert beta == pytest.approx(beta_limit, abs=2e-6)
    assert alpha * 1e-6 == pytest.approx(2.0 * beta_limit, abs=5e-6)


def test_alpha_beta_at_reference_radius():
    # frozen from direct evaluation of the defining formulas at rho = sqrt(0.375):
    # D'(0.375) = 0.5 + e^-0.375, D(0.375) = 0.6875 - e^-0.375, V = D - D'^2 * 0.375/1.5
    rho = np.sqrt(0.375)
    d1 = 0.5 + np.exp(-0.375)
    v = (1.1875 - np.exp(-0.375)) - d1 * d1 * 0.375 / 1.5
    alpha, beta = alpha_beta(DEFAULT_LRC, rho)
    assert alpha == pytest.approx(2.0 * (-np.exp(-0.375)) / np.sqrt(v), rel=1e-12)
    assert beta == pytest.approx((d1 - 1.5) / np.sqrt(v), rel=1e-12)


def test_conditioning_degeneracy_errors():
    with pytest.raises(DegenerateConditioningError):
        conditioning_variance(DEFAULT_LRC, 1e-9)
    with pytest.raises(DegenerateConditioningError):
        conditioning_variance(DEFAULT_LRC, 0.0)
    with pytest.raises(TypeError):
        alpha_beta(DEFAULT_SRC, 0.5)


# ---------------------------------------------------------------- assumption check

def test_assumption_check_passes_on_default():
    report = check_assumption3(DEFAULT_LRC, rho_max=10.0, grid_points=200)
    assert report["pass"] is True
    assert report["worst_margin"] > 0.0
    # margins vanish as rho -> 0, so the worst point sits at the grid floor
    assert report["worst_rho"] == pytest.approx(10.0 * 1e-4, rel=1e-12)
    assert report["worst_margin"] < 0.01


def test_assumption_check_margin_decreases_with_rho_floor():
    wide = check_assumption3(DEFAULT_LRC, rho_max=10.0, grid_points=64)
    narrow = check_assumption3(DEFAULT_LRC, rho_max=1.0, grid_points=64)
    assert narrow["worst_margin"] < wide["worst_margin"]


def test_assumption_check_validation():
    with pytest.raises(ValueError):
        check_assumption3(DEFAULT_LRC, rho_max=0.0)
    with pytest.raises(ValueError):
        check_assumption3(DEFAULT_LRC, grid_points=1)
