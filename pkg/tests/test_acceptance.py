"""One test per acceptance criterion, each at its stated tolerance."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from locwp import bounds, sim
from locwp.cli import main
from locwp.cumulants import cumulants_from_moments, hankel_det, moments_from_cumulants
from locwp.matching import MatchTarget, build_match
from locwp.rsums import cumulant_bound_check, random_exact_model, remainder, verify_wf_expansion

from oracles import atom_cumulants, r11_nested, r21_nested


def _battery(count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        nv = int(rng.integers(1, 6))
        out.append(random_exact_model(rng, n_vertices=nv, n_innov=3, extra_edge_prob=float(rng.uniform(0, 0.5))))
    return out


def test_c01_moment_cumulant_round_trip():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    for _ in range(5):
        kap = [Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 10))) for _ in range(12)]
        assert cumulants_from_moments(moments_from_cumulants(kap)) == kap
    # binary64: |kappa_j| <= 1/2 keeps the map well conditioned through order 12
    for _ in range(200):
        kf = [float(x) for x in rng.uniform(-0.5, 0.5, 12)]
        back = cumulants_from_moments(moments_from_cumulants(kf))
        assert all(abs(b - k) <= 1e-10 * max(1.0, abs(k)) for b, k in zip(back, kf))
    assert time.perf_counter() - start < 1.0


def test_c02_gaussian_golden_values():
    mu = moments_from_cumulants([0, 1] + [0] * 8)
    assert [mu[2 * l] for l in range(1, 6)] == [1, 3, 15, 105, 945]
    assert hankel_det([1, 0, 1, 0, 3], 2) == 2


def test_c03_rsum_nested_loop_equivalence():
    start = time.perf_counter()
    for m in _battery(50, 3):
        assert m.probs.size <= 8 and len(m.graph) <= 5
        assert abs(remainder(m, 1, 1.0).value - r11_nested(m)) <= 1e-12
        assert abs(remainder(m, 2, 1.0).value - r21_nested(m)) <= 1e-12
    assert time.perf_counter() - start < 10.0


def test_c04_expansion_identity_polynomials():
    for m in _battery(20, 4):
        for j in range(1, 7):
            assert abs(verify_wf_expansion(m, j)) <= 1e-11


def test_c05_cumulant_bound_strict():
    for m in _battery(20, 4):
        for k in (1, 2, 3):
            chk = cumulant_bound_check(m, k)
            assert chk.lhs < chk.rhs


def test_c06_cumulant_matching_random_targets():
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    for _ in range(100):
        p = float(rng.uniform(1.01, 5.0))
        k = math.ceil(p)
        if k < 2:
            p, k = 2.0, 2
        u = tuple(float(x) for x in rng.uniform(-1e-2, 1e-2, k - 1))
        res = build_match(MatchTarget(u, p))
        kap = atom_cumulants(res.atoms, k + 1)
        for j, uj in enumerate(u, start=1):
            assert abs(kap[j + 1] - res.q ** (j / 2) * uj) <= 1e-8
        assert min(res.hankel_dets) >= 1
        assert math.isfinite(res.abs_moment)
    assert time.perf_counter() - start < 30.0


@pytest.mark.slow
def test_c07_rate_mdep_ma1():
    start = time.perf_counter()
    fits = sim.rate_experiment(lambda n: sim.GeneratorSpec("mdep", n, m=1), [2 ** e for e in range(8, 15)],
                               [1.0, 2.0], 10_000_000, seed=1, batches=200)
    for fit in fits.values():
        assert -0.6 <= fit.slope <= -0.4
    assert time.perf_counter() - start < 600


@pytest.mark.slow
def test_c08_rate_ustat_sum():
    start = time.perf_counter()
    fit = sim.rate_experiment(lambda n: sim.GeneratorSpec("ustat", n, m=2), [2 ** e for e in range(6, 11)],
                              1.0, 2_000_000, seed=1, batches=200)
    assert -0.6 <= fit.slope <= -0.4
    assert time.perf_counter() - start < 600


def test_c09_stein_residual_battery():
    quad = bounds.QuadSpec()
    normal = bounds.normal_atoms()
    ux, uw = np.polynomial.legendre.leggauss(40)
    uniform = (ux * math.sqrt(3), uw / 2)
    rad = (np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
    skew = (np.array([-0.5, 2.0]), np.array([0.8, 0.2]))
    h = {
        "t": lambda t: t, "t2": lambda t: t ** 2, "t3": lambda t: t ** 3, "cos": np.cos,
        "tanh": np.tanh, "exp": lambda t: np.exp(t / 2), "cauchy": lambda t: 1 / (1 + t * t), "abs": np.abs,
    }
    cases = [(normal, "t"), (normal, "t2"), (normal, "cos"), (rad, "t"), (rad, "t2"), (rad, "t3"),
             (skew, "tanh"), (skew, "exp"), (uniform, "cauchy"), (uniform, "abs"), (skew, "t2"), (normal, "abs")]
    assert len(cases) == 12
    for (x, w), name in cases:
        assert abs(bounds.stein_residual(x, w, h[name], quad)) <= 1e-6
    for w0 in (-2.0, 0.0, 1.5):
        assert abs(bounds.stein_solve(h["t"], w0) + 1) <= 1e-6
        assert abs(bounds.stein_solve(h["t2"], w0) + w0) <= 1e-6


@pytest.mark.slow
def test_c10_g_inverse_and_tail_dominance():
    for t in np.linspace(0.2, 6.0, 10):
        for y in np.linspace(0.01, 0.99, 10):
            assert abs(bounds.g_t(bounds.g_inverse(t, y), t, 1.0) - y) <= 1e-12
    spec = sim.GeneratorSpec("mdep", 64, m=1)
    sample = sim.sample_w(spec, 4_000_000, seed=10, batches=200)
    grid = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
    checked = 0
    for p in (1.0, 2.0):
        wp = sim.wasserstein_to_normal(sample, p)
        for est in sim.tail_probability(sample, grid):
            tb = bounds.tail_bound(bounds.TailBoundQuery(est.t, 1.0, p, wp))
            if tb.condition_ok:
                checked += 1
                assert abs(est.prob - float(bounds.norm_sf(est.t))) <= tb.upper + 3 * est.se
    assert checked > 0


def _cli_bytes(tmp_path, capsys, *argv):
    assert main(list(argv)) == 0
    return capsys.readouterr().out.encode()


def test_c11_cli_determinism(tmp_path, capsys):
    sim_cfg = tmp_path / "sim.ini"
    sim_cfg.write_text("[simulate]\nkind = ustat\nm = 2\nkernel = mixed\nlaw = uniform\n"
                       "sizes = 8, 16, 32\np = 1, 2\nreps = 40000\nbatches = 16\nseed = 3\n")
    runs = {}
    for workers in ("1", "4", "1"):
        for name, args in (("bound", ("bound", "--config", "ustat_sum_p2")),
                           ("simulate", ("simulate", "--config", str(sim_cfg)))):
            runs.setdefault(name, []).append(_cli_bytes(tmp_path, capsys, *args, "--workers", workers))
    for outs in runs.values():
        assert outs[0] == outs[1] == outs[2]
