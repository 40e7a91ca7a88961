import os
import subprocess
import sys

import numpy as np
import pytest

from anisopsido import _kernels, _rademacher_py

try:
    from anisopsido import _rademacher_ext
except ImportError:
    _rademacher_ext = None

needs_ext = pytest.mark.skipif(_rademacher_ext is None, reason="compiled extension not built")


def test_backend_reported():
    assert _kernels.BACKEND in ("compiled", "python")


def test_numpy_kernel_small_case():
    # eps_1 = +1 fixed: patterns (1,1) and (1,-1), doubled
    Y = np.array([[1.0 + 0j], [2.0 + 0j]])
    assert _rademacher_py.sign_sum(Y, 2.0, 2.0, 2.0, 1, 1.0) == pytest.approx(2 * (9 + 1))
    assert _rademacher_py.sign_sum(np.zeros((0, 1), complex), 2.0, 2.0, 2.0, 1, 1.0) == 0.0


@needs_ext
@pytest.mark.parametrize("n", [1, 2, 5, 11, 14])
@pytest.mark.parametrize("args", [(2.0, 2.0, 2.0, 4, 1.0), (3.0, 3.0, 3.0, 4, 1.0), (1.5, 2.0, 4.0, 2, 0.25)])
def test_backends_agree(n, args):
    rng = np.random.default_rng(n)
    Y = np.ascontiguousarray(rng.standard_normal((n, 8)) + 1j * rng.standard_normal((n, 8)))
    a = _rademacher_py.sign_sum(Y, *args)
    b = _rademacher_ext.sign_sum(Y, *args)
    assert b == pytest.approx(a, rel=1e-12)


@needs_ext
def test_compiled_gray_code_resync():
    # more than one resync period of the running sum
    rng = np.random.default_rng(0)
    Y = np.ascontiguousarray(rng.standard_normal((15, 3)) * 1e3 + 0j)
    a = _rademacher_py.sign_sum(Y, 2.0, 2.0, 2.0, 3, 1.0)
    assert _rademacher_ext.sign_sum(Y, 2.0, 2.0, 2.0, 3, 1.0) == pytest.approx(a, rel=1e-12)


@needs_ext
def test_compiled_rejects_bad_block():
    with pytest.raises(ValueError):
        _rademacher_ext.sign_sum(np.ones((2, 4), complex), 2.0, 2.0, 2.0, 3, 1.0)


def test_pure_fallback_selected_by_environment():
    env = dict(os.environ, ANISOPSIDO_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from anisopsido import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
