import math

import numpy as np
import pytest
from scipy import stats

from locwp.sim import (
    EmpiricalDist,
    GeneratorSpec,
    SimError,
    derive_rng,
    distance_se,
    fit_rate,
    joint_model,
    mdep_sigma,
    normal_scores,
    rate_experiment,
    sample_field,
    sample_w,
    tail_probability,
    two_column,
    ustat_direct,
    wasserstein_to_normal,
    wasserstein_two_sample,
)


def test_spec_validation():
    with pytest.raises(SimError):
        GeneratorSpec("arma", 4)
    with pytest.raises(SimError):
        GeneratorSpec("mdep", 4, law="cauchy")
    with pytest.raises(SimError):
        GeneratorSpec("ustat", 4, m=3)


def test_m0_single_site_is_pass_through():
    d = sample_w(GeneratorSpec("mdep", 1, m=0), 1000, seed=1, batches=4)
    assert set(np.unique(d.values)) == {-1.0, 1.0}


def test_ma1_sigma_closed_form():
    # Var(sum X) = (1/2)(1 + 4 (n-1) + 1) for MA(1) with unit innovations
    n = 50
    assert mdep_sigma(GeneratorSpec("mdep", n)) ** 2 == pytest.approx((4 * n - 2) / 2)
    d = sample_w(GeneratorSpec("mdep", n, law="uniform"), 200_000, seed=2)
    v = d.values.var()
    se = math.sqrt(2 / len(d.values)) * 1.5
    assert abs(v - 1) <= 3 * se


def test_fast_matches_direct_in_law():
    spec = GeneratorSpec("mdep", 12, m=2, d=2, law="exponential")
    fast = sample_w(spec, 40_000, seed=3, batches=8).values
    direct = sample_w(spec, 40_000, seed=4, batches=8, method="direct").values
    assert stats.ks_2samp(fast, direct).pvalue > 1e-3


def test_field_independence_beyond_m():
    spec = GeneratorSpec("mdep", 10, m=2)
    x = sample_field(spec, 100_000, derive_rng(5, 0))
    far = np.corrcoef(x[:, 0], x[:, 3])[0, 1]
    near = np.corrcoef(x[:, 0], x[:, 2])[0, 1]
    assert abs(far) <= 4 / math.sqrt(len(x))
    assert near == pytest.approx(1 / 3, abs=4 / math.sqrt(len(x)))


def test_ustat_sum_is_scaled_iid_sum():
    n = 8
    x = derive_rng(0, 1).choice([-1.0, 1.0], size=(5, n))
    assert np.allclose(ustat_direct("sum", x), (n + 1) * x.sum(axis=1))
    u = sample_w(GeneratorSpec("ustat", n, m=2), 100_000, seed=6, batches=10).values
    iid = sample_w(GeneratorSpec("mdep", n, m=0), 100_000, seed=7, batches=10).values
    assert wasserstein_two_sample(u, iid, 1.0) <= 0.02


@pytest.mark.parametrize("kernel", ["mixed", "variance"])
def test_ustat_fast_matches_direct(kernel):
    spec = GeneratorSpec("ustat", 6, m=2, law="uniform", kernel=kernel)
    fast = sample_w(spec, 40_000, seed=8, batches=4)
    direct = sample_w(spec, 40_000, seed=9, batches=4, method="direct")
    assert fast.sigma_source == "pilot estimate"
    assert stats.ks_2samp(fast.values, direct.values).pvalue > 1e-3
    assert abs(fast.values.mean()) <= 4 / math.sqrt(40_000)


def test_worker_count_invariance():
    spec = GeneratorSpec("mdep", 64, m=1)
    a = sample_w(spec, 50_000, seed=10, batches=20, workers=1).values
    b = sample_w(spec, 50_000, seed=10, batches=20, workers=4).values
    assert a.tobytes() == b.tobytes()


def test_wasserstein_trivial_cases():
    z = normal_scores(1000)
    assert wasserstein_to_normal(z, 1.0) == 0.0
    assert wasserstein_two_sample(z, z[::-1].copy(), 2.0) == 0.0
    zero = wasserstein_to_normal(np.zeros(1_000_000), 1.0)
    assert abs(zero - math.sqrt(2 / math.pi)) <= 1e-3
    with pytest.raises(SimError):
        wasserstein_to_normal(np.zeros(1), 1.0)


def test_estimator_consistency():
    small, large = [], []
    for s in range(20):
        rng = derive_rng(s, 3)
        small.append(wasserstein_to_normal(rng.standard_normal(1_000), 1.0))
        large.append(wasserstein_to_normal(rng.standard_normal(100_000), 1.0))
    assert np.median(large) < np.median(small)


def test_distance_se_positive():
    x = derive_rng(1, 1).standard_normal(10_000)
    assert 0 < distance_se(x, 1.0) < 0.05


def test_constant_family_not_converging():
    fit = fit_rate([10, 20, 40, 80], [0.5, 0.49, 0.51, 0.5], [0.01] * 4, 1.0, 100, 0)
    assert abs(fit.slope) < 0.1 and not fit.converging
    with pytest.raises(SimError):
        fit_rate([10, 20], [0.5, 0.4], [0, 0], 1.0, 1, 0)


def test_iid_rate_small():
    fit = rate_experiment(lambda n: GeneratorSpec("mdep", n, m=0), [2 ** 8, 2 ** 10, 2 ** 12, 2 ** 14],
                          1.0, 2_000_000, seed=11, batches=20)
    assert -0.6 <= fit.slope <= -0.4 and fit.converging


def test_tail_probability():
    d = EmpiricalDist(derive_rng(12, 0).standard_normal(1_000_000))
    est = tail_probability(d, [-50.0, 0.0, 1.96, 6.0])
    assert est[0].prob == 1.0
    assert abs(est[2].prob - 0.025) <= 3 * est[2].se
    assert [e.prob for e in est] == sorted((e.prob for e in est), reverse=True)
    assert est[3].low_count and not est[2].low_count


def test_two_column():
    assert two_column([1, 2], [0.5, 0.25]) == "1 0.5\n2 0.25\n"


def test_joint_model_matches_sigma():
    spec = GeneratorSpec("mdep", 4, m=1)
    m = joint_model(spec)
    assert m.exact and m.sigma == pytest.approx(mdep_sigma(spec))
    u = joint_model(GeneratorSpec("ustat", 4, m=2, kernel="mixed"))
    assert u.exact and len(u.graph) == 10
