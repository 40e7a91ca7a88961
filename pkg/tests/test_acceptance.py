"""Acceptance suite: one printed PASS/FAIL line per criterion.

Checked-in configs are run twice through the CLI once per session; the
determinism, parametrix, resolvent and maximal-regularity criteria read the
resulting JSON documents.
"""
import json
import math
import time

import numpy as np
import pytest
import yaml

from anisopsido.aniso import GridSpec, peetre_check
from anisopsido.cli import main
from anisopsido.elliptic import DifferentialOperatorSpec, build_full_symbol
from anisopsido.psido import composition_consistency, wave_packets
from anisopsido.rbound import BanachSpaceSpec, Budget, contraction_check, rbound_estimate
from anisopsido.symbols import InverseSymbol, PolySymbol, PolyTerm, multiply

from conftest import ROOT

CONFIGS = ROOT / "configs"


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


def experiment_configs():
    paths = sorted(CONFIGS.glob("*.yaml")) + sorted((CONFIGS / "symbols").glob("*.yaml"))
    return [p for p in paths if "experiment" in (yaml.safe_load(p.read_text()) or {})]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """``{stem: (exit_code, bytes_first, bytes_second, document)}`` for every config."""
    out = {}
    for path in experiment_configs():
        blobs, codes = [], []
        for k in range(2):
            d = tmp_path_factory.mktemp(f"{path.stem}_{k}")
            codes.append(main(["run", "--config", str(path), "--out", str(d)]))
            blobs.append((d / f"{path.stem}.json").read_bytes())
        assert codes[0] == codes[1], path
        out[path.stem] = (codes[0], blobs[0], blobs[1], json.loads(blobs[0]))
    return out


def test_criterion_1_hilbert_oracle(capsys):
    rng = np.random.default_rng(101)
    worst_lo, worst_hi = math.inf, 0.0
    t0 = time.perf_counter()
    for trial in range(50):
        n = int(rng.integers(1, 9))
        dx, dy = (int(v) for v in rng.integers(1, 9, 2))
        T = rng.standard_normal((n, dy, dx)) + 1j * rng.standard_normal((n, dy, dx))
        exact = max(np.linalg.norm(t, 2) for t in T)
        est = rbound_estimate(list(T), BanachSpaceSpec.euclidean(dx), BanachSpaceSpec.euclidean(dy), 2.0,
                              Budget(mode="sample", seed=trial))
        worst_lo = min(worst_lo, est.value / exact)
        worst_hi = max(worst_hi, est.value / exact)
    elapsed = time.perf_counter() - t0
    ok = worst_lo >= 0.95 and worst_hi <= 1.0 + 1e-12 and elapsed < 60
    report(capsys, 1, ok, f"ratio range [{worst_lo:.4f}, {worst_hi:.4f}], {elapsed:.1f} s")
    assert ok


def test_criterion_2_kahane_contraction(capsys):
    rng = np.random.default_rng(202)
    violations, worst = 0, 0.0
    for trial in range(1000):
        n = int(rng.integers(1, 9))
        p = (1.0, 2.0, 3.0, 4.0)[trial % 4]
        x = rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))
        beta = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        shrink = rng.uniform(0, 1, n) * np.exp(2j * math.pi * rng.uniform(size=n))
        res = contraction_check(beta * shrink, beta, x, p)
        worst = max(worst, res.ratio)
        violations += not res.passed
    report(capsys, 2, violations == 0, f"{violations} violations, largest ratio {worst:.4f} (bound 2)")
    assert violations == 0


def test_criterion_3_peetre(capsys):
    rng = np.random.default_rng(303)
    total, worst = 0, 0.0
    for ell in [(1, 1), (1, 2), (2, 3)]:
        k = 33334
        scale = np.exp(rng.uniform(-3, 8, (k, 1)))
        xi = rng.standard_normal((k, 2)) * scale
        xip = rng.standard_normal((k, 2)) * np.exp(rng.uniform(-3, 8, (k, 1)))
        s = rng.uniform(-4, 4, k)
        rep = peetre_check(s, (xi, xip), ell)
        total += rep.violations
        worst = max(worst, rep.max_ratio)
    report(capsys, 3, total == 0, f"{total} violations in 100002 samples, max normalized ratio {worst:.4f}")
    assert total == 0


def test_criterion_4_classical_saturation(capsys, runs):
    stems = sorted(p.stem for p in (CONFIGS / "symbols").glob("*.yaml"))
    growth, ok = 0.0, len(stems) >= 5
    for stem in stems:
        code, _, _, doc = runs[stem]
        ok &= code == 0
        for sn in doc["result"]["seminorms"]:
            growth = max(growth, sn["growth"])
            ok &= sn["saturated"] and all(isinstance(v, float) or isinstance(v, int) for v in sn["values"])
    ok &= growth <= 0.02
    report(capsys, 4, ok, f"{len(stems)} symbols, largest growth under probe doubling {growth:.2e}")
    assert ok


def test_criterion_5_composition_order(capsys):
    g = GridSpec(1, 16.0, 128)
    a = build_full_symbol(DifferentialOperatorSpec.laplacian(1))
    pert = DifferentialOperatorSpec.from_dict({"ell": [1], "terms": [
        {"alpha": [2], "coef": -1.0, "profile": {"kind": "bump", "base": 1.0, "amp": 0.5, "width": 1.0}}]})
    lam = PolySymbol([PolyTerm(-np.eye(1, dtype=complex), (0,), 1)], 1, 2, a.ell, (1, 1))
    b = multiply(lam, InverseSymbol(build_full_symbol(pert)))
    u = wave_packets(g, 1, 1, seed=0)[0]
    lams = np.concatenate([r * np.exp(1j * np.linspace(-math.pi / 2, math.pi / 2, 5))
                           for r in np.geomspace(10, 1e3, 5)])
    ok, parts = True, []
    for N in (0, 1, 2):
        rep = composition_consistency(a, b, N, lams, u, check=False)
        ok &= rep.passed
        parts.append(f"N={N} slope {rep.slope:.3f} <= {rep.bound:.2f}")
    report(capsys, 5, ok, "; ".join(parts))
    assert ok


def test_criterion_6_parametrix(capsys, runs):
    code, _, _, doc = runs["parametrix_perturbed_heat"]
    reps = doc["result"]["reports"]
    ok = code == 0 and doc["result"]["M"] == 128 and [r["N"] for r in reps] == [0, 1, 2]
    parts = []
    for r in reps:
        ok &= r["discrepancy_at_top"] <= 1e-6 and r["slope"] <= r["slope_bound"]
        parts.append(f"N={r['N']} disc {r['discrepancy_at_top']:.1e} slope {r['slope']:.3f} <= {r['slope_bound']:.2f}")
    report(capsys, 6, ok, "; ".join(parts))
    assert ok


def test_criterion_7_resolvent_rbound(capsys, runs):
    code_h, _, _, heat = runs["resolvent_rbound_heat"]
    code_a, _, _, aniso = runs["resolvent_rbound_aniso"]
    v_heat = heat["result"]["value"]
    change = aniso["result"]["refined"]["relative_change"]
    ok = (code_h == 0 and v_heat <= 1 + 1e-9 and code_a == 0 and math.isfinite(aniso["result"]["value"])
          and change <= 0.05)
    report(capsys, 7, ok, f"heat {v_heat:.12f}; anisotropic {aniso['result']['value']:.6f}, "
                          f"change under doubling {change:.2e}")
    assert ok


def test_criterion_8_maxreg(capsys, runs):
    code, _, _, doc = runs["maxreg_heat"]
    table = {int(e["p"]): e for e in doc["result"]["C_p"]}
    c2 = table[2]["C_p"]
    ok = code == 0 and 0.95 <= c2 <= 1.05
    for p in (3, 4):
        ok &= math.isfinite(table[p]["C_p"]) and table[p]["relative_change"] <= 0.10
    code_bad, _, _, bad = runs["maxreg_plus_laplacian"]
    ok &= code_bad == 2 and bad["result"].get("stage") == "ellipticity"
    report(capsys, 8, ok, f"C_2 {c2:.4f}; C_3 {table[3]['C_p']:.4f} (change {table[3]['relative_change']:.1e}); "
                          f"C_4 {table[4]['C_p']:.4f} (change {table[4]['relative_change']:.1e}); "
                          f"+Laplacian exit {code_bad}")
    assert ok


def test_criterion_9_determinism(capsys, runs):
    differ = sorted(stem for stem, (_, a, b, _) in runs.items() if a != b)
    ok = not differ and len(runs) >= 14
    report(capsys, 9, ok, f"{len(runs)} configs, {len(differ)} differing" + (f": {differ}" if differ else ""))
    assert ok
