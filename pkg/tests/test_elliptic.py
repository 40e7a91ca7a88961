import math

import numpy as np
import pytest

from anisopsido.aniso import GridSpec, SectorSpec
from anisopsido.elliptic import (DifferentialOperatorSpec, EllipticityError, NonInvertibleError, ellipticity_check,
                                 grid_spectrum, maxreg_experiment, resolvent_rbound, resolvent_via_parametrix)
from anisopsido.rbound import Budget

HALF = SectorSpec.right_half_plane(1.0, n_radii=4, n_angles=5)
BUMP = {"kind": "bump", "base": 1.0, "amp": 0.5, "width": 1.0}


def aniso_op():
    return DifferentialOperatorSpec.from_dict({"ell": [1, 2], "terms": [
        {"alpha": [4, 0], "coef": -1.0}, {"alpha": [0, 2], "coef": -1.0}]})


def test_ellipticity_verdicts():
    assert ellipticity_check(DifferentialOperatorSpec.laplacian(1), HALF).ok
    assert ellipticity_check(aniso_op(), HALF).ok
    bad = ellipticity_check(DifferentialOperatorSpec.laplacian(1, sign=-1.0), HALF)
    assert not bad.ok
    # the witness eigenvalue is +1 on the unit sphere
    assert bad.witness_principal["eigenvalue"][0] == pytest.approx(1.0)


def test_perturbed_heat_is_elliptic():
    A = DifferentialOperatorSpec.from_dict({"ell": [1], "terms": [{"alpha": [2], "coef": -1.0, "profile": BUMP}]})
    assert ellipticity_check(A, HALF).ok


def test_grid_spectrum_heat():
    g = GridSpec(1, 8.0, 16)
    ev = np.sort(grid_spectrum(DifferentialOperatorSpec.laplacian(1), g).real)
    k = np.fft.fftfreq(16, 1 / 16)
    expect = np.sort(-(k * math.pi / 8.0) ** 2)
    # Nyquist averaging keeps the highest mode
    np.testing.assert_allclose(ev, expect, atol=1e-10)


def test_constant_coefficient_parametrix_is_exact():
    g = GridSpec(1, 8.0, 32)
    rep = resolvent_via_parametrix(DifferentialOperatorSpec.laplacian(1), [2.0, 5j, 20.0], 0, g, HALF)
    # away from the excision region the parametrix is the exact inverse symbol
    assert rep.rows[-1].remainder_norm < 1e-12
    for row in rep.rows:
        assert row.discrepancy_band < 1e-10
        assert row.discrepancy_full < 1e-10


def test_parametrix_remainder_decays():
    g = GridSpec(1, 16.0, 64)
    A = DifferentialOperatorSpec.from_dict({"ell": [1], "terms": [{"alpha": [2], "coef": -1.0, "profile": BUMP}]})
    lams = np.geomspace(20, 2000, 4)
    rep = resolvent_via_parametrix(A, lams, 1, g, HALF)
    norms = [r.remainder_norm for r in rep.rows]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert rep.slope < -0.5


def test_heat_resolvent_rbound_is_one():
    g = GridSpec(1, 8.0, 32)
    rep = resolvent_rbound(DifferentialOperatorSpec.laplacian(1), HALF.samples(), g, sector=HALF)
    assert rep.value <= 1 + 1e-9
    lam = 3.0 * np.exp(0.5j * math.pi)
    single = resolvent_rbound(DifferentialOperatorSpec.laplacian(1), [lam], g, sector=HALF,
                              budget=Budget(mode="sample"))
    ev = grid_spectrum(DifferentialOperatorSpec.laplacian(1), g)
    assert single.value == pytest.approx(np.max(np.abs(lam / (ev - lam))), rel=1e-9)


def test_resolvent_rejects_spectrum_in_sector():
    g = GridSpec(1, 8.0, 16)
    with pytest.raises(NonInvertibleError):
        resolvent_rbound(DifferentialOperatorSpec.laplacian(1, sign=-1.0), HALF.samples(), g, sector=HALF)


def test_maxreg_hilbert_constant():
    g = GridSpec(1, 8.0, 32)
    rep = maxreg_experiment(DifferentialOperatorSpec.laplacian(1), g, 2.0, dt=0.01, samples=4)
    assert 0.95 <= rep.C_p <= 1.05


def test_maxreg_rejects_non_elliptic():
    with pytest.raises(EllipticityError):
        maxreg_experiment(DifferentialOperatorSpec.laplacian(1, sign=-1.0), GridSpec(1, 8.0, 16))
