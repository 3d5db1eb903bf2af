import cmath

import numpy as np
import pytest

from nlsinflate.lattice import DomainSpec, SpectralField, torus
from nlsinflate.norms import l2_norm
from nlsinflate.picard import NonlinearitySpec
from nlsinflate.scenarios import schedule_case
from nlsinflate.solver import (SolverBlowupError, SolverConfig, compare_series, dense_grid_size,
                               evolve)

CUBIC = NonlinearitySpec.single(3, 2, 1.0)


def single_mode(k, a, d=1):
    return SpectralField.static(torus(d), 1.0, [[k] * d], [a])


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(0, 0.1, 10)
    cfg = SolverConfig.for_horizon(0.5, 10, 16)
    assert cfg.T == pytest.approx(0.5)
    assert cfg.refined(2).steps == 20


def test_dense_grid_dealiases():
    assert dense_grid_size(16, 3) > 4 * 16
    assert dense_grid_size(100, 5) > 600


@pytest.mark.parametrize("k,a", [(0, 1.0), (3, 0.7 - 0.2j), (-5, 1.5j)])
def test_cubic_plane_wave(k, a):
    T = 0.1
    out = evolve(single_mode(k, a), CUBIC, SolverConfig.for_horizon(T, 200, 8))
    exact = a * cmath.exp(-1j * (k * k + abs(a) ** 2) * T)
    assert abs(out.value_at((k,), 0.0) - exact) <= 1e-8 * abs(a)
    idx, val = out.values()
    assert np.all(np.abs(val[idx[:, 0] != k]) <= 1e-13)


def test_plane_wave_2d():
    T = 0.1
    a = 0.9
    out = evolve(single_mode(2, a, d=2), CUBIC, SolverConfig.for_horizon(T, 100, 4))
    exact = a * cmath.exp(-1j * (8 + a * a) * T)
    assert abs(out.value_at((2, 2), 0.0) - exact) <= 1e-8


def test_mass_conserved_for_gauge_invariant():
    phi = SpectralField.static(torus(1), 1.0, [[-2], [1], [4]], [0.4, 0.5j, 0.3])
    out = evolve(phi, CUBIC, SolverConfig.for_horizon(0.5, 400, 32))
    assert abs(l2_norm(out) - l2_norm(phi)) <= 1e-9 * l2_norm(phi)


def test_cutoff_insensitive_for_small_data():
    phi = SpectralField.static(torus(1), 1.0, [[-1], [2]], [0.05, 0.05])
    nl = NonlinearitySpec.single(2, 1, 1.0)
    a = evolve(phi, nl, SolverConfig.for_horizon(0.2, 50, 64))
    b = evolve(phi, nl, SolverConfig.for_horizon(0.2, 50, 128))
    assert l2_norm(a - b) <= 1e-12


def test_deterministic():
    phi = SpectralField.static(torus(1), 1.0, [[-1], [2]], [0.3, 0.2j])
    cfg = SolverConfig.for_horizon(0.2, 20, 16)
    a, b = evolve(phi, CUBIC, cfg), evolve(phi, CUBIC, cfg)
    np.testing.assert_array_equal(a.coef, b.coef)


def test_rejects_quadrature_and_out_of_cutoff():
    dom = DomainSpec(1, 0, quadrature_cell=(0.5,))
    with pytest.raises(ValueError):
        evolve(SpectralField.static(dom, 0.5, [[1]], [1.0]), CUBIC, SolverConfig(8, 0.01, 1))
    with pytest.raises(ValueError):
        evolve(single_mode(20, 1.0), CUBIC, SolverConfig(8, 0.01, 1))


def test_blowup_guard():
    # zero mode obeys a' = a^2, which blows up at t = 1 / a(0)
    phi = single_mode(0, 10.0)
    nl = NonlinearitySpec.single(2, 2, 1j)
    with pytest.raises(SolverBlowupError):
        evolve(phi, nl, SolverConfig.for_horizon(1.0, 50, 16))


def test_compare_series_small():
    sc = schedule_case("case6", 4, {"r": 0.05})
    cfg = SolverConfig.for_horizon(sc.T, 384, 256)
    res = compare_series(sc, 7, cfg)
    assert res["rho_hat"] < 0.3
    assert res["l2_rel_err"] <= res["bound"]
    assert 3.5 <= res["dt_order_estimate"] <= 4.5
    with pytest.raises(ValueError):
        compare_series(sc, 7, SolverConfig.for_horizon(2 * sc.T, 64, 256))
