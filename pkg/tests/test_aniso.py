import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisopsido.aniso import (AnisotropyVector, GridSpec, SectorSpec, aniso_abs, aniso_bracket, aniso_length,
                              multi_indices, peetre_check, weight_equivalence_check)

ELLS = [(1, 1), (1, 2), (2, 3), (1, 2, 3)]
coord = st.floats(-50, 50, allow_nan=False)


def test_isotropic_distance_is_euclidean():
    assert aniso_abs(np.array([3.0, 4.0]), (1, 1)) == pytest.approx(5.0)
    assert aniso_bracket(np.array([3.0, 4.0]), (1, 1)) == pytest.approx(math.sqrt(26.0))


def test_origin():
    for ell in ELLS:
        z = np.zeros(len(ell))
        assert aniso_abs(z, ell) == 0.0
        assert aniso_bracket(z, ell) == 1.0


def test_frozen_values_mixed_weights():
    # (1^4 + 1^2)^(1/4) and (1 + 1^4 + 1^2)^(1/4)
    assert aniso_abs(np.array([1.0, 1.0]), (1, 2)) == pytest.approx(1.189207115002721, rel=1e-14)
    assert aniso_bracket(np.array([1.0, 1.0]), (1, 2)) == pytest.approx(1.3160740129524924, rel=1e-14)


def test_anisotropic_length():
    assert aniso_length((1, 2), (1, 2)) == 5
    assert aniso_length((0, 0), (1, 2)) == 0
    assert aniso_length((4, 0), (1, 2)) == aniso_length((0, 2), (1, 2)) == 4
    with pytest.raises(ValueError):
        aniso_length((1,), (1, 2))
    with pytest.raises(ValueError):
        aniso_length((-1, 0), (1, 2))


def test_anisotropy_vector_validation():
    ell = AnisotropyVector((1, 2))
    assert ell.L == 2 and tuple(ell.pi) == (2, 1)
    with pytest.raises(ValueError):
        AnisotropyVector((0, 1))
    with pytest.raises(ValueError):
        AnisotropyVector(())
    with pytest.raises(ValueError):
        aniso_abs(np.ones(3), (1, 2))


def test_multi_indices_counts():
    assert multi_indices(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    for n, k in [(1, 3), (3, 2), (4, 2)]:
        assert len(multi_indices(n, k)) == math.comb(n + k, k)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(ELLS), st.data(), st.floats(0.01, 100.0))
def test_dilation_homogeneity(ell, data, rho):
    xi = np.array(data.draw(st.lists(coord, min_size=len(ell), max_size=len(ell))))
    ell = AnisotropyVector(ell)
    assert aniso_abs(ell.dilate(xi, rho), ell) == pytest.approx(rho * aniso_abs(xi, ell), rel=1e-10, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(ELLS), st.data())
def test_bracket_dominates(ell, data):
    xi = np.array(data.draw(st.lists(coord, min_size=len(ell), max_size=len(ell))))
    b = aniso_bracket(xi, ell)
    assert b >= 1.0
    assert b >= aniso_abs(xi, ell) * (1 - 1e-14)


def test_bracket_on_unit_sphere():
    rng = np.random.default_rng(1)
    for ell in ELLS:
        ell = AnisotropyVector(ell)
        w = rng.standard_normal((50, len(ell)))
        r = aniso_abs(w, ell)
        sphere = w / r[:, None] ** ell.array
        np.testing.assert_allclose(aniso_bracket(sphere, ell), 2.0 ** (1.0 / (2 * ell.L)), rtol=1e-12)


def test_huge_arguments_do_not_overflow():
    xi = np.array([1e200, 1e150])
    val = aniso_abs(xi, (1, 2))
    assert np.isfinite(val) and val == pytest.approx(1e200, rel=1e-10)


def test_peetre_trivial_cases():
    rng = np.random.default_rng(0)
    xi = rng.uniform(-10, 10, (100, 2))
    assert peetre_check(0.0, (xi, xi[::-1]), (1, 2)).max_ratio == pytest.approx(1.0)
    rep = peetre_check(1.5, (xi, np.zeros_like(xi)), (1, 2))
    assert rep.max_ratio == pytest.approx(1.0) and rep.passed


def test_peetre_sweep_s1():
    rng = np.random.default_rng(2)
    xi, xip = rng.uniform(-10, 10, (2, 1000, 2))
    rep = peetre_check(1.0, (xi, xip), (1, 1))
    assert rep.passed and rep.max_ratio <= 2.0


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(ELLS[:3]), st.floats(-4, 4), st.integers(0, 2**32 - 1))
def test_peetre_property(ell, s, seed):
    rng = np.random.default_rng(seed)
    xi, xip = rng.standard_cauchy((2, 64, 2)) * 5
    assert peetre_check(s, (xi, xip), ell).violations == 0


def test_weight_equivalence_sweep():
    ax = np.linspace(-100, 100, 81)  # contains the origin, where both ratios are 1
    xi = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    rep = weight_equivalence_check((1, 2), xi)
    assert rep.c <= 1.0 <= rep.C
    with pytest.raises(ValueError):
        weight_equivalence_check((1, 2), np.zeros((0, 2)))


def test_sector_spec():
    s = SectorSpec.logspaced(math.pi / 2, 1.0, 100.0, 3, 3)
    lam = s.samples()
    assert lam.shape == (9,)
    # radius-major
    np.testing.assert_allclose(np.abs(lam[:3]), 1.0)
    assert np.all(s.contains(lam))
    assert not s.contains(-2.0)
    assert not s.contains(0.5)
    with pytest.raises(ValueError):
        SectorSpec(0.0, 1.0)
    with pytest.raises(ValueError):
        SectorSpec(1.0, 1.0, (2.0, 1.0))
    with pytest.raises(ValueError):
        SectorSpec(1.0, 1.0, (2.0,), (1.5,))


def test_cone_distance():
    s = SectorSpec.right_half_plane()
    assert s.cone_distance(np.array([1.0 + 0j]))[0] == 0.0
    assert s.cone_distance(np.array([-1.0 + 0j]))[0] == pytest.approx(1.0)


def test_grid_spec():
    g = GridSpec(2, 8.0, 16)
    assert g.n_nodes == 256
    assert g.h == pytest.approx(1.0)
    assert g.nodes().shape == (256, 2)
    k = g.frequencies() * g.B / math.pi
    np.testing.assert_allclose(k, np.rint(k))
    assert g.refine().M == 32
    with pytest.raises(ValueError):
        GridSpec(1, 8.0, 15)
    with pytest.raises(ValueError):
        GridSpec(1, -1.0, 16)
