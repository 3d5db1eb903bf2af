import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsinflate.lattice import DomainSpec, SpectralField, field_multiply, torus
from nlsinflate.norms import (NormSpec, aniso_mod_norm, d_norm, dyadic_block, evaluate_norm, f_s,
                              hs_norm, l2_norm, log_bracket, lowfreq_l2, m_rho_norm,
                              modulation_norm)


def field1(entries, dom=None, A=1.0):
    dom = dom or torus(1)
    idx = np.array([[k] for k in entries], dtype=np.int64).reshape(-1, 1)
    return SpectralField.static(dom, A, idx, np.array(list(entries.values()), dtype=complex))


def random_field(rng, n=20, span=200):
    keys = rng.choice(np.arange(-span, span + 1), size=n, replace=False)
    return field1({int(k): complex(rng.normal(), rng.normal()) for k in keys})


random_maps = st.dictionaries(st.integers(-300, 300),
                              st.complex_numbers(max_magnitude=10, min_magnitude=1e-3,
                                                 allow_nan=False, allow_infinity=False),
                              min_size=1, max_size=15)

ALL_SPECS = [NormSpec.Hs(-0.5), NormSpec.ModA(4), NormSpec.ModRhoA(1.5, 2), NormSpec("L2"),
             NormSpec.DBracket(0.3, 2, 3), NormSpec.DS(-0.2, 1.5, math.inf),
             NormSpec.LowFreqL2(50)]


# H^s --------------------------------------------------------------------------

@pytest.mark.parametrize("s", [-2.0, -0.5, 0.0, 1.3])
def test_hs_delta_zero(s):
    assert hs_norm(field1({0: 1.0}), s) == 1.0


def test_hs_three_modes():
    N, s = 16, -1.0
    f = field1({N: N ** -s, -N: N ** -s, 2 * N: N ** -s})
    ref = math.sqrt(256 * (2 / 257 + 1 / 1025))
    assert hs_norm(f, s) == pytest.approx(ref, rel=1e-14)
    assert ref == pytest.approx(1.4973, abs=1e-4)


@settings(max_examples=40, deadline=None)
@given(random_maps)
def test_hs_zero_is_l2(m):
    f = field1(m)
    assert hs_norm(f, 0.0) == pytest.approx(l2_norm(f), rel=1e-15)


def test_quadrature_weight_in_l2():
    dom = DomainSpec(1, 0, quadrature_cell=(0.25,))
    f = field1({1: 2.0, 2: 2.0}, dom)
    assert l2_norm(f) == pytest.approx(math.sqrt(0.25 * 8))


# modulation norms -----------------------------------------------------------

def test_modulation_single_box():
    f = field1({7: 1.0, 8: 2.0, 9: 2.0})  # inside 8 + [-2, 2)
    assert modulation_norm(f, 4) == pytest.approx(3.0)
    # box edges: [-A/2, A/2) is half-open
    assert modulation_norm(field1({2: 1.0, -2: 1.0}), 4) == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(random_maps, st.sampled_from([1, 2, 4, 8]))
def test_m_rho_two_is_modulation(m, A):
    f = field1(m)
    assert m_rho_norm(f, 2.0, A) == pytest.approx(modulation_norm(f, A), rel=1e-13)


@pytest.mark.parametrize("rho", [1.0, 1.5, 2.0, 7.0])
def test_m_rho_single_point(rho):
    assert m_rho_norm(field1({5: 3 - 4j}), rho, 2) == pytest.approx(5.0)


def test_m_rho_rejects_small_rho():
    with pytest.raises(ValueError):
        m_rho_norm(field1({1: 1.0}), 0.5, 1)


def test_product_bound_fitted_constant():
    rng = np.random.default_rng(7)
    for A in (1, 2, 4, 8):
        worst = 0.0
        for _ in range(100):
            f, g = random_field(rng, 10, 40), random_field(rng, 10, 40)
            lhs = modulation_norm(field_multiply(f, g), A)
            worst = max(worst, lhs / (math.sqrt(A) * modulation_norm(f, A) * modulation_norm(g, A)))
        assert worst <= 2


def test_m_rho_product_growth():
    rho = 1.5
    vals = []
    for A in (1, 2, 4, 8):
        f = field1({k: 1.0 for k in range(-(A // 2), (A + 1) // 2)})
        ratio = m_rho_norm(field_multiply(f, f), rho, A) / m_rho_norm(f, rho, A) ** 2
        vals.append(ratio / A ** (1 - 1 / rho))
    assert max(vals) / min(vals) <= 2


def test_aniso_equals_m_rho_in_1d():
    N = 16
    dom = DomainSpec(1, 0, quadrature_cell=(1 / (8 * N),))
    rng = np.random.default_rng(1)
    f = field1({int(k): complex(rng.normal(), rng.normal()) for k in rng.choice(2000, 30)}, dom)
    assert aniso_mod_norm(f, N) == pytest.approx(m_rho_norm(f, 2.0, 1 / N), rel=1e-13)


def test_aniso_single_box_and_growth():
    vals = []
    for N in (16, 32, 64, 128, 256):
        h = 1 / (8 * N)
        dom = DomainSpec(1, 0, quadrature_cell=(h,))
        centre = 8 * N * N
        f = field1({centre + j: 1.0 for j in range(-4, 4)}, dom, A=1 / N)
        assert aniso_mod_norm(f, N) == pytest.approx(l2_norm(f), rel=1e-13)
        ratio = aniso_mod_norm(field_multiply(f, f), N) / aniso_mod_norm(f, N) ** 2
        vals.append(ratio * math.sqrt(N))
    assert max(vals) / min(vals) <= 2


def test_aniso_rejects_torus():
    with pytest.raises(ValueError):
        aniso_mod_norm(field1({1: 1.0}), 4)


# D-norms --------------------------------------------------------------------

def test_dyadic_block_edges():
    xs = np.array([[0], [1], [2], [3], [4], [7], [8]])
    # <xi> = sqrt(1 + xi^2): 1, 1.41, 2.24, 3.16, 4.12, 7.07, 8.06
    np.testing.assert_array_equal(dyadic_block(xs), [0, 0, 1, 1, 2, 2, 3])


def test_d_norm_single_block():
    N = 64
    f = field1({k: 1.0 for k in range(N, 2 * N)})
    assert d_norm(f, 2, 2, alpha=0.0) == pytest.approx(1.0, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(random_maps, st.sampled_from([1.0, 2.0, 3.0, math.inf]))
def test_bracket_zero_is_plain(m, q):
    f = field1(m)
    assert d_norm(f, 2, q, alpha=0.0) == pytest.approx(d_norm(f, 2, q, s=-0.5), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(random_maps, st.sampled_from([1.0, 1.5, 2.0, 4.0]))
def test_bracket_vs_fourier_lebesgue(m, p):
    f = field1(m)
    idx, val = f.values()
    jb = np.sqrt(1.0 + idx[:, 0].astype(float) ** 2)
    direct = np.sum((jb ** (-1 / p) * np.abs(val)) ** p) ** (1 / p)
    block = d_norm(f, p, p, alpha=0.0)
    assert direct / 2 ** (1 / p) * (1 - 1e-12) <= block <= direct * 2 ** (1 / p) * (1 + 1e-12)


@settings(max_examples=50, deadline=None)
@given(random_maps, st.floats(-1, 1), st.sampled_from([1.2, 2.0, 3.0]))
def test_d_norm_monotone_in_q(m, alpha, p):
    f = field1(m)
    vals = [d_norm(f, p, q, alpha=alpha) for q in (1.0, 1.5, 2.0, 4.0, math.inf)]
    assert all(a >= b * (1 - 1e-12) for a, b in zip(vals, vals[1:]))


def test_log_bracket_at_one():
    assert log_bracket(1.0) == 1.0


def test_d_norm_argument_checks():
    f = field1({1: 1.0})
    with pytest.raises(ValueError):
        d_norm(f, 2, 2)
    with pytest.raises(ValueError):
        d_norm(f, 2, 2, alpha=0.0, s=0.0)
    with pytest.raises(ValueError):
        d_norm(f, math.inf, 2, alpha=0.0)


# f_s ------------------------------------------------------------------------

def test_f_s_closed_forms():
    # int_{-1}^{1} (1 + x^2)^{-1/2} dx = 2 asinh 1
    assert f_s(1.0, -0.5) == pytest.approx(math.sqrt(2 * math.asinh(1.0)), rel=1e-10)
    # int_{-1}^{1} (1 + x^2)^{-1} dx = pi / 2
    assert f_s(1.0, -1.0) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-10)


def test_f_s_log_growth():
    A = 2.0 ** 10
    diff = f_s(2 * A, -0.5) ** 2 - f_s(A, -0.5) ** 2
    assert diff == pytest.approx(2 * math.log(2), rel=0.05)


def test_f_s_monotone_and_2d():
    vals = [f_s(A, -0.3) for A in (0.5, 1, 2, 4, 8)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    # d=2: 2 pi int_0^1 r / (1 + r^2) dr = pi log 2
    assert f_s(1.0, -1.0, d=2) == pytest.approx(math.sqrt(math.pi * math.log(2)), rel=1e-10)


# low frequency mass ---------------------------------------------------------

def test_lowfreq():
    assert lowfreq_l2(field1({64: 1.0, -64: 2.0}), 1.0) == 0.0
    assert lowfreq_l2(field1({0: 3 - 4j, 64: 1.0}), 1.0) == 5.0


# generic properties ---------------------------------------------------------

@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.label())
def test_homogeneity(spec):
    rng = np.random.default_rng(11)
    for _ in range(10):
        f = random_field(rng)
        c = complex(rng.normal(), rng.normal())
        assert evaluate_norm(f.scale(c), spec) == pytest.approx(abs(c) * evaluate_norm(f, spec),
                                                                rel=1e-12)


def test_embedding_chain():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        f = random_field(rng, n=int(rng.integers(1, 40)), span=500)
        l2, m1 = l2_norm(f), modulation_norm(f, 1)
        assert l2 <= m1 * (1 + 1e-12)
        worst = max(worst, m1 / hs_norm(f, 0.6))
    assert worst <= 10


def test_normspec_roundtrip_and_validation():
    for spec in ALL_SPECS:
        assert NormSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        NormSpec("Besov", (1.0,))
    with pytest.raises(ValueError):
        NormSpec.DBracket(0.0, 0.5, 2)
    with pytest.raises(ValueError):
        NormSpec.ModA(0)


def test_norm_at_time():
    f = SpectralField.static(torus(1), 1.0, [[3]], [2.0]).twisted_form()
    assert hs_norm(f, 1.0, t=0.4) == pytest.approx(2 * math.sqrt(10))
