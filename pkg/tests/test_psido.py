import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisopsido.aniso import AnisotropyVector, GridSpec, aniso_bracket
from anisopsido.elliptic import DifferentialOperatorSpec, build_full_symbol
from anisopsido.rbound import BanachSpaceSpec, Budget
from anisopsido.psido import (HEADER, CoverageError, GridFunction, bracket_multiplier, composition_consistency,
                              equivalent_norm_multiplier, fourier_mode, half_line_projection, hilbert_transform_check,
                              hull_membership, lp_norm, multiplier, multiplier_rbound_harness, op_apply, op_operator,
                              op_iteration_rbound, sobolev_norm, w_h_equivalence, wave_packets)
from anisopsido.symbols import FunctionSymbol, InverseSymbol, PolySymbol, PolyTerm, identity, multiply, symbol_from_spec

G1 = GridSpec(1, 16.0, 64)


def scalar_symbol(fn, order=0.0, d=1, q=0, ell=(1,)):
    return FunctionSymbol(lambda x, xi, lam: np.asarray(fn(xi, lam))[..., None, None], d, q, (1, 1), order, ell,
                          x_independent=True)


def test_identity_symbol_is_identity():
    u = wave_packets(G1, 2, 1, seed=1)[0]
    out = op_apply(identity(1, 0, 2, [1]), 0.0, u)
    np.testing.assert_allclose(out.values, u.values, atol=1e-13)


def test_fourier_mode_eigenfunction():
    u = fourier_mode(G1, 5)
    kappa = 5 * math.pi / G1.B
    out = op_apply(scalar_symbol(lambda xi, lam: 1j * xi[..., 0], 1.0), 0.0, u, check=False)
    np.testing.assert_allclose(out.values, 1j * kappa * u.values, atol=1e-12)


def test_heat_inverse_on_mode():
    heat = symbol_from_spec({"d": 1, "ell_xi": [1], "ell_lambda": 2,
                             "terms": [{"coef": -1.0, "alpha": [2]}, {"coef": -1.0, "alpha": [0], "lam_power": 1}]})
    u = fourier_mode(G1, 3)
    kappa = 3 * math.pi / G1.B
    out = op_apply(InverseSymbol(heat), 1.0, u, check=False)
    np.testing.assert_allclose(out.values, u.values / (-kappa**2 - 1), atol=1e-14)


def test_dense_kernel_matches_multiplier_path():
    # x-dependence with amplitude 0 must reproduce the multiplier exactly
    a = symbol_from_spec({"d": 1, "ell_xi": [1], "terms": [
        {"coef": -1.0, "alpha": [2], "profile": {"kind": "bump", "base": 1.0, "amp": 1e-300, "width": 1.0}}]})
    u = wave_packets(G1, 1, 1, seed=2)[0]
    b = symbol_from_spec({"d": 1, "ell_xi": [1], "terms": [{"coef": -1.0, "alpha": [2]}]})
    assert op_operator(a, G1).kind == "full" and op_operator(b, G1).kind == "multiplier"
    np.testing.assert_allclose(op_apply(a, 0.0, u).values, op_apply(b, 0.0, u).values, atol=1e-10)


def test_x_dependent_multiplication():
    phi = {"kind": "bump", "base": 1.0, "amp": 0.5, "width": 1.0}
    a = symbol_from_spec({"d": 1, "ell_xi": [1], "terms": [{"coef": 1.0, "alpha": [0], "profile": phi}]})
    u = wave_packets(G1, 1, 1, seed=3)[0]
    x = G1.nodes()[:, 0]
    np.testing.assert_allclose(op_apply(a, 0.0, u).values[:, 0], (1 + 0.5 * np.exp(-x**2 / 2)) * u.values[:, 0],
                               atol=1e-12)


def test_coverage_checks():
    rng = np.random.default_rng(0)
    noise = GridFunction(G1, rng.standard_normal(G1.n_nodes))
    with pytest.raises(CoverageError):
        op_apply(identity(1, 0, 1, [1]), 0.0, noise)
    wide = symbol_from_spec({"d": 1, "ell_xi": [1], "terms": [
        {"coef": 1.0, "alpha": [0], "profile": {"kind": "bump", "base": 1.0, "amp": 1.0, "width": 4.0}}]})
    with pytest.raises(CoverageError):
        op_operator(wide, GridSpec(1, 4.0, 32))
    with pytest.raises(ValueError):
        op_apply(identity(1, 0, 2, [1]), 0.0, fourier_mode(G1, 1))


def test_sobolev_norms():
    u = wave_packets(G1, 1, 1, seed=4)[0]
    assert sobolev_norm(u, 0.0, 3.0) == pytest.approx(u.norm(3.0))
    v = fourier_mode(GridSpec(2, 8.0, 16), (2, -3), np.array([1.0, 2.0j]))
    kappa = np.array([2.0, -3.0]) * math.pi / 8.0
    for ell in [(1, 1), (1, 2)]:
        expect = aniso_bracket(kappa, ell) ** 1.5 * v.norm(4.0)
        assert sobolev_norm(v, 1.5, 4.0, ell) == pytest.approx(expect, rel=1e-12)
    with pytest.raises(ValueError):
        sobolev_norm(u, 1.0, 2.0, (1, 2))


def test_lp_norm_riemann_weights():
    g = GridSpec(1, 2.0, 8)
    assert lp_norm(np.ones((8, 1)), g, 2.0) == pytest.approx(2.0)  # |[-2, 2)|^(1/2)
    assert lp_norm(np.ones((8, 1)), g, 1.0) == pytest.approx(4.0)


def test_binary_roundtrip_and_layout():
    g = GridSpec(2, 4.0, 8)
    u = wave_packets(g, 3, 1, seed=5)[0]
    blob = u.to_bytes()
    assert struct.unpack_from("<iidi", blob) == (2, 8, 4.0, 3)
    assert len(blob) == HEADER.size + 64 * 3 * 16
    np.testing.assert_array_equal(GridFunction.from_bytes(blob).values, u.values)
    with pytest.raises(ValueError):
        GridFunction.from_bytes(blob[:-16])


def test_csv_roundtrip():
    g = GridSpec(2, 4.0, 4)
    u = wave_packets(g, 2, 1, seed=6)[0]
    text = u.to_csv()
    assert text.splitlines()[0] == "x_1,x_2,re_1,im_1,re_2,im_2"
    assert "\r\n" in text
    back = GridFunction.from_csv(text, 4.0)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, u.values)


def test_grid_function_validation():
    with pytest.raises(ValueError):
        GridFunction(G1, np.ones(10))
    with pytest.raises(ValueError):
        GridFunction(G1, np.full(64, np.nan))


def test_wave_packets_consistent_under_refinement():
    coarse = wave_packets(G1, 1, 2, seed=7)
    fine = wave_packets(G1.refine(), 1, 2, seed=7)
    for c, f in zip(coarse, fine):
        np.testing.assert_allclose(f.values[::2], c.values, atol=1e-12)


def test_equivalent_norm_multiplier():
    rep = equivalent_norm_multiplier(2, (1,))
    assert rep.c > 0 and rep.saturated
    assert rep.multiplier(np.zeros((1, 1)))[0] == pytest.approx(1.0)
    rep2 = equivalent_norm_multiplier(2, (1, 2))
    assert rep2.c > 0
    with pytest.raises(ValueError):
        equivalent_norm_multiplier(3, (2,))


def test_w_h_equivalence_constants():
    c, C = w_h_equivalence(G1, 2, (1,), 2.0, samples=8)
    assert 0 < c <= C < math.inf


def test_half_line_projection():
    g = GridSpec(1, 16.0, 128)
    H = half_line_projection(g)
    pos, neg = fourier_mode(g, 4), fourier_mode(g, -4)
    np.testing.assert_allclose(H.apply(pos).values, pos.values, atol=1e-13)
    np.testing.assert_allclose(H.apply(neg).values, 0.0, atol=1e-13)
    rep = hilbert_transform_check(BanachSpaceSpec.euclidean(1), 2.0, g, trials=20)
    assert rep.norm <= 1.0 + 1e-12


def test_hull_membership():
    T = [np.eye(2), np.diag([1.0, -1.0])]
    assert hull_membership(T, np.diag([1.0, 0.0])) == pytest.approx(1.0)
    assert hull_membership(T, np.array([[0.0, 1.0], [0.0, 0.0]])) == math.inf


def test_multiplier_harness_identity_and_bounded():
    g = GridSpec(1, 16.0, 64)
    rep = multiplier_rbound_harness([np.eye(1)], [lambda xi: np.ones(len(xi))], g)
    assert rep.ratio == pytest.approx(1.0)
    rep = multiplier_rbound_harness([np.eye(1)], [lambda xi: xi[:, 0] / np.sqrt(1 + xi[:, 0] ** 2)], g)
    xi = g.frequencies()[:, 0]
    assert 0.9 < rep.rbound_ops.value <= np.max(np.abs(xi / np.sqrt(1 + xi**2))) + 1e-12
    assert rep.rbound_ops.value < 1
    with pytest.raises(ValueError):
        multiplier_rbound_harness([np.eye(1)], [lambda xi: 5.0 * np.ones(len(xi))], g)


def test_op_iteration_identity():
    a = identity(1, 2, 1, [1, 2, 2])
    rep = op_iteration_rbound(a, 0.0, 0.0, [1.0, 10j], GridSpec(1, 8.0, 16))
    assert rep.value == pytest.approx(1.0)
    with pytest.raises(ValueError):
        op_iteration_rbound(identity(1, 0, 1, [1]), 0.0, 0.0, [1.0], G1)


def test_composition_consistency_heat():
    a = build_full_symbol(DifferentialOperatorSpec.laplacian(1))
    pert = DifferentialOperatorSpec.from_dict({"ell": [1], "terms": [
        {"alpha": [2], "coef": -1.0, "profile": {"kind": "bump", "base": 1.0, "amp": 0.5, "width": 1.0}}]})
    lam_sym = PolySymbol([PolyTerm(-np.eye(1, dtype=complex), (0,), 1)], 1, 2, a.ell, (1, 1))
    b = multiply(lam_sym, InverseSymbol(build_full_symbol(pert)))
    assert b.order == 0
    u = wave_packets(GridSpec(1, 16.0, 64), 1, 1, seed=0)[0]
    lams = np.geomspace(10, 1e3, 3)
    rep = composition_consistency(a, b, 1, lams, u)
    assert rep.passed and len(rep.norms) == 3


@settings(max_examples=15, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(0.5, 3.0))
def test_bracket_multiplier_group_property(s, t):
    g = GridSpec(1, 8.0, 16)
    A = bracket_multiplier(g, s, (1,)) @ bracket_multiplier(g, t, (1,))
    B = bracket_multiplier(g, s + t, (1,))
    np.testing.assert_allclose(A.matrix(), B.matrix(), atol=1e-9 * np.max(np.abs(B.matrix())))
