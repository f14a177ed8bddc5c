"""Closed-form wall law: equilibrium, verified example, blow-up guards."""

import numpy as np
import pytest

from tubeflow.domain import TubeParams
from tubeflow.errors import WallBlowUpError
from tubeflow.structure import (
    SINGULARITY_MARGIN,
    circumferential_stress,
    radius_from_pressure,
    singular_pressure,
    solve_structure,
)


def test_singular_pressure_default():
    assert singular_pressure(TubeParams()) == pytest.approx(2e5)


def test_known_doubling_example():
    # E=1e6, h=1e-3, r0=5e-3, sigma0=0, p=1e5 -> r doubles to 1e-2.
    tube = TubeParams(r0=5e-3, h=1e-3, elastic_modulus=1e6, sigma0=0.0)
    assert radius_from_pressure(1e5, tube) == pytest.approx(1e-2, rel=1e-12)


def test_zero_strain_pressure_returns_r0():
    tube = TubeParams(sigma0=200.0)
    p0 = tube.sigma0 * tube.h / tube.r0
    assert radius_from_pressure(p0, tube) == pytest.approx(tube.r0, rel=1e-12)


def test_equilibrium_identity_random_pressures():
    tube = TubeParams()
    rng = np.random.default_rng(7)
    p_sing = singular_pressure(tube)
    pressures = rng.uniform(-p_sing, p_sing * (1.0 - 2 * SINGULARITY_MARGIN), size=1000)
    for p in pressures:
        r = radius_from_pressure(p, tube)
        sigma = circumferential_stress(r, tube)
        assert abs(p * r - sigma * tube.h) / max(1.0, abs(p * r)) < 1e-9


def test_monotone_in_pressure():
    tube = TubeParams()
    ps = np.linspace(-1e5, 1.5e5, 50)
    rs = [radius_from_pressure(p, tube) for p in ps]
    assert np.all(np.diff(rs) > 0)


def test_blow_up_at_singular_pressure():
    tube = TubeParams()
    with pytest.raises(WallBlowUpError):
        radius_from_pressure(singular_pressure(tube), tube)
    with pytest.raises(WallBlowUpError):
        radius_from_pressure(singular_pressure(tube) * 2.0, tube)


def test_solve_structure_vectorized_matches_scalar():
    tube = TubeParams()
    p = np.array([-5e4, 0.0, 5e4, 1e5])
    resp = solve_structure(p, tube)
    for i, pi in enumerate(p):
        assert resp.radius[i] == pytest.approx(radius_from_pressure(pi, tube), rel=1e-14)
    assert np.allclose(resp.area, np.pi * resp.radius**2)


def test_solve_structure_reports_offending_node():
    tube = TubeParams()
    p = np.array([0.0, 0.0, 3e5, 0.0])
    with pytest.raises(WallBlowUpError) as exc:
        solve_structure(p, tube)
    assert exc.value.node == 2
    assert "node 2" in str(exc.value)


def test_zero_pressure_gives_r0_when_unstressed():
    tube = TubeParams(sigma0=0.0)
    resp = solve_structure(np.zeros(5), tube)
    assert np.allclose(resp.radius, tube.r0, rtol=1e-14)
