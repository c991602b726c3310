"""Monte Carlo generators, empirical Wasserstein-p distances and rate fits.

Two generator families are provided.

``mdep``
    Moving-average field on the box ``{1..n}^d``:
    ``X_i = (m+1)^{-d/2} sum_{j in i + [0, m]^d} eps_j`` with standardized
    i.i.d. innovations.  Sites further than ``m`` apart in max norm share no
    innovation, so the field is ``m``-dependent.
``ustat``
    ``sum_{i_1 <= i_2} h(X_{i_1}, X_{i_2})`` over an i.i.d. standardized
    sample, recentred by its exact mean (diagonal terms carry ``E h(X, X)``).

Replicates are drawn in batches; batch ``b`` uses the stream
``SeedSequence(seed, spawn_key=(b,))`` so output is identical for any worker
count.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

LAWS = ("rademacher", "uniform", "exponential", "normal")
KERNELS = ("sum", "mixed", "variance")


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    """``kind`` is ``"mdep"`` or ``"ustat"``; ``n`` is the side length or sample size."""

    kind: str
    n: int
    m: int = 1
    d: int = 1
    law: str = "rademacher"
    kernel: str = "sum"

    def __post_init__(self):
        if self.kind not in ("mdep", "ustat"):
            raise SimError(f"unknown generator kind {self.kind!r}")
        if self.law not in LAWS:
            raise SimError(f"unknown innovation law {self.law!r}")
        if self.n < 1 or self.m < 0 or self.d < 1:
            raise SimError("need n >= 1, m >= 0, d >= 1")
        if self.kind == "ustat":
            if self.kernel not in KERNELS:
                raise SimError(f"unknown kernel {self.kernel!r}")
            if self.m != 2:
                raise SimError("builtin U-statistic kernels have order m = 2")

    @property
    def size(self) -> int:
        return self.n ** self.d if self.kind == "mdep" else self.n


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def draw_law(rng: np.random.Generator, law: str, size) -> np.ndarray:
    """Standardized (mean 0, variance 1) draws."""
    if law == "rademacher":
        return rng.integers(0, 2, size=size).astype(float) * 2 - 1
    if law == "uniform":
        return rng.uniform(-math.sqrt(3), math.sqrt(3), size=size)
    if law == "exponential":
        return rng.exponential(size=size) - 1
    return rng.standard_normal(size)


def law_sum(rng: np.random.Generator, law: str, count: int, size: int) -> np.ndarray:
    """Exact draws of a sum of ``count`` standardized innovations."""
    if law == "rademacher":
        return 2.0 * rng.binomial(count, 0.5, size=size) - count
    if law == "exponential":
        return rng.gamma(count, size=size) - count
    if law == "normal":
        return math.sqrt(count) * rng.standard_normal(size)
    out = np.zeros(size)
    step = max(1, 2_000_000 // max(size, 1))
    for a in range(0, count, step):
        out += draw_law(rng, law, (size, min(step, count - a))).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# m-dependent moving average


def _coverage_1d(n: int, m: int) -> np.ndarray:
    """Number of windows ``[i, i+m]``, ``1 <= i <= n``, containing innovation ``j = 1..n+m``."""
    j = np.arange(1, n + m + 1)
    return np.minimum(j, n) - np.maximum(1, j - m) + 1


def mdep_groups(spec: GeneratorSpec) -> list[tuple[float, int]]:
    """Innovations pooled by coefficient in ``sum X_i``: ``(coef, count)`` pairs."""
    cov = _coverage_1d(spec.n, spec.m)
    vals, counts = np.unique(cov, return_counts=True)
    groups = {}
    for combo in itertools.product(range(len(vals)), repeat=spec.d):
        c = int(np.prod([vals[i] for i in combo]))
        groups[c] = groups.get(c, 0) + int(np.prod([counts[i] for i in combo]))
    scale = math.sqrt((spec.m + 1) ** spec.d)
    return [(c / scale, k) for c, k in sorted(groups.items())]


def mdep_sigma(spec: GeneratorSpec) -> float:
    return math.sqrt(sum(c * c * k for c, k in mdep_groups(spec)))


def sample_field(spec: GeneratorSpec, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Direct draws of the whole field, shape ``(reps, n^d)`` in row-major site order."""
    if spec.kind != "mdep":
        raise SimError("sample_field needs an mdep spec")
    n, m, d = spec.n, spec.m, spec.d
    eps = draw_law(rng, spec.law, (reps,) + (n + m,) * d)
    acc = eps
    for ax in range(1, d + 1):
        c = np.cumsum(acc, axis=ax)
        c = np.concatenate([np.zeros_like(np.take(c, [0], axis=ax)), c], axis=ax)
        acc = np.take(c, range(m + 1, n + m + 1), axis=ax) - np.take(c, range(0, n), axis=ax)
    return acc.reshape(reps, -1) / math.sqrt((m + 1) ** d)


def lattice_sites(spec: GeneratorSpec) -> list:
    if spec.d == 1:
        return list(range(1, spec.n + 1))
    return list(itertools.product(range(1, spec.n + 1), repeat=spec.d))


# ---------------------------------------------------------------------------
# U-statistics


def ustat_mean(spec: GeneratorSpec) -> float:
    """Exact mean of the uncentred statistic (only diagonal terms contribute)."""
    n = spec.n
    if spec.kernel == "sum":
        return 0.0
    if spec.kernel == "mixed":
        return float(n)  # E[(S1^2 + S2)/2] with n diagonal terms
    return -float(n)  # sum_{i<j} 1 - n(n+1)/2


def _ustat_from_sums(kernel: str, n: int, s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    if kernel == "sum":
        return (n + 1) * s1
    if kernel == "mixed":
        return (s1 * s1 + s2) / 2 + (n + 1) * s1
    return (n * s2 - s1 * s1) / 2 - n * (n + 1) / 2


def ustat_direct(kernel: str, x: np.ndarray) -> np.ndarray:
    """Brute-force ``sum_{i<=j} h(x_i, x_j)`` per row; for cross-checks."""
    h = {
        "sum": lambda a, b: a + b,
        "mixed": lambda a, b: a * b + a + b,
        "variance": lambda a, b: (a - b) ** 2 / 2 - 1,
    }[kernel]
    n = x.shape[1]
    out = np.zeros(x.shape[0])
    for i in range(n):
        out += h(x[:, i:i + 1], x[:, i:]).sum(axis=1)
    return out


def _ustat_sums(spec: GeneratorSpec, rng, size):
    n = spec.n
    if spec.law == "rademacher":
        return 2.0 * rng.binomial(n, 0.5, size=size) - n, np.full(size, float(n))
    if spec.law == "normal":
        s1 = math.sqrt(n) * rng.standard_normal(size)
        return s1, s1 * s1 / n + rng.chisquare(n - 1, size=size) if n > 1 else s1 * s1
    s1 = np.zeros(size)
    s2 = np.zeros(size)
    step = max(1, 2_000_000 // max(size, 1))
    for a in range(0, n, step):
        x = draw_law(rng, spec.law, (size, min(step, n - a)))
        s1 += x.sum(axis=1)
        s2 += (x * x).sum(axis=1)
    return s1, s2


def ustat_sigma(spec: GeneratorSpec, seed: int = 0, pilot: int = 200_000) -> tuple[float, str]:
    """``sigma_n`` and its source: closed form for ``h = x + y``, pilot estimate otherwise."""
    if spec.kernel == "sum":
        return (spec.n + 1) * math.sqrt(spec.n), "closed form"
    rng = derive_rng(seed, 2 ** 31 - 1)
    s1, s2 = _ustat_sums(spec, rng, pilot)
    u = _ustat_from_sums(spec.kernel, spec.n, s1, s2) - ustat_mean(spec)
    return float(np.sqrt(np.mean(u * u))), "pilot estimate"


# ---------------------------------------------------------------------------
# sampling W


@dataclass
class EmpiricalDist:
    values: np.ndarray
    sigma: float = 1.0
    sigma_source: str = "closed form"

    def __post_init__(self):
        self.values = np.sort(np.asarray(self.values, dtype=float), kind="stable")

    @property
    def size(self) -> int:
        return len(self.values)


def _sigma_for(spec: GeneratorSpec, seed: int):
    if spec.kind == "mdep":
        return mdep_sigma(spec), "closed form"
    return ustat_sigma(spec, seed)


def _raw_batch(spec: GeneratorSpec, size: int, rng, method: str) -> np.ndarray:
    if spec.kind == "mdep":
        if method == "direct":
            return sample_field(spec, size, rng).sum(axis=1)
        out = np.zeros(size)
        for c, k in mdep_groups(spec):
            out += c * law_sum(rng, spec.law, k, size)
        return out
    if method == "direct":
        x = draw_law(rng, spec.law, (size, spec.n))
        return ustat_direct(spec.kernel, x) - ustat_mean(spec)
    s1, s2 = _ustat_sums(spec, rng, size)
    return _ustat_from_sums(spec.kernel, spec.n, s1, s2) - ustat_mean(spec)


def _batch_job(args):
    spec, size, seed, b, method = args
    return _raw_batch(spec, size, derive_rng(seed, b), method)


def sample_w(spec: GeneratorSpec, reps: int, seed: int, batches: int = 200,
             workers: int = 1, method: str = "fast") -> EmpiricalDist:
    """``reps`` draws of ``W = sigma^{-1} sum X_i``, returned sorted.

    ``method="direct"`` builds every ``X_i`` explicitly (slow; for checks).
    """
    if reps < 1:
        raise SimError("reps must be >= 1")
    sigma, source = _sigma_for(spec, seed)
    if not sigma > 0:
        raise SimError("sigma_n = 0")
    batches = max(1, min(batches, reps))
    sizes = [len(c) for c in np.array_split(np.arange(reps), batches)]
    jobs = [(spec, s, seed, b, method) for b, s in enumerate(sizes)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_batch_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        parts = [_batch_job(j) for j in jobs]
    return EmpiricalDist(np.concatenate(parts) / sigma, sigma, source)


# ---------------------------------------------------------------------------
# distances, tails, rate fits


def normal_scores(N: int) -> np.ndarray:
    return special.ndtri((np.arange(1, N + 1) - 0.5) / N)


def wasserstein_to_normal(d: EmpiricalDist | np.ndarray, p: float) -> float:
    """``((1/N) sum |X_(i) - Phi^{-1}((i - 1/2)/N)|^p)^{1/p}``."""
    x = d.values if isinstance(d, EmpiricalDist) else np.sort(np.asarray(d, dtype=float))
    if len(x) < 2:
        raise SimError("need at least two draws")
    return float(np.mean(np.abs(x - normal_scores(len(x))) ** p) ** (1 / p))


def wasserstein_two_sample(a: np.ndarray, b: np.ndarray, p: float) -> float:
    """Quantile coupling of two equal-size samples."""
    a, b = np.sort(a), np.sort(b)
    if len(a) != len(b):
        raise SimError("two-sample coupling needs equal sizes")
    return float(np.mean(np.abs(a - b) ** p) ** (1 / p))


def distance_se(values: np.ndarray, p: float, groups: int = 10, seed: int = 0) -> float:
    """SE of the distance from ``groups`` disjoint random subsamples."""
    rng = derive_rng(seed, 7)
    idx = rng.permutation(len(values))
    ds = [wasserstein_to_normal(np.sort(values[c]), p) for c in np.array_split(idx, groups)]
    return float(np.std(ds, ddof=1) / math.sqrt(groups))


@dataclass
class RateFit:
    sizes: list
    distances: list
    ses: list
    slope: float
    intercept: float
    slope_se: float
    p: float
    reps: int
    seed: int
    converging: bool = True

    def rows(self) -> list:
        return [{"size": s, "p": self.p, "distance": d, "se": e, "reps": self.reps, "seed": self.seed}
                for s, d, e in zip(self.sizes, self.distances, self.ses)]


def fit_rate(sizes, distances, ses, p, reps, seed) -> RateFit:
    if len(sizes) < 3:
        raise SimError("rate fit needs at least 3 sizes")
    if any(d <= 0 for d in distances):
        raise SimError("degenerate fit: non-positive distance")
    res = stats.linregress(np.log(sizes), np.log(distances))
    slope, se = float(res.slope), float(res.stderr)
    # no convergence when the fitted decay is negligible or not significant
    converging = slope < -0.1 and slope + 3 * se < 0
    return RateFit(list(sizes), list(distances), list(ses), slope, float(res.intercept), se,
                   p, reps, seed, converging)


def rate_experiment(family: Callable[[int], GeneratorSpec], sizes: Sequence[int], p,
                    reps: int, seed: int, batches: int = 200, workers: int = 1):
    """Empirical ``W_p`` versus size and a log-log slope fit.

    ``p`` may be a single order or a sequence; one sample per size serves all
    orders.  Returns a :class:`RateFit` or a dict keyed by ``p``.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise SimError("sizes must be at least 3 increasing integers")
    ps = [float(p)] if np.isscalar(p) else [float(x) for x in p]
    dist = {q: [] for q in ps}
    ses = {q: [] for q in ps}
    for r, n in enumerate(sizes):
        sample = sample_w(family(n), reps, seed + r, batches, workers)
        for q in ps:
            dist[q].append(wasserstein_to_normal(sample, q))
            ses[q].append(distance_se(sample.values, q, seed=seed + r))
    fits = {q: fit_rate(sizes, dist[q], ses[q], q, reps, seed) for q in ps}
    return fits[ps[0]] if np.isscalar(p) else fits


@dataclass
class TailEstimate:
    t: float
    prob: float
    se: float
    count: int
    low_count: bool


def tail_probability(d: EmpiricalDist, tgrid: Sequence[float], min_count: int = 10) -> list[TailEstimate]:
    """``P(W >= t)`` with binomial SEs; flags grids points with fewer than ``min_count`` exceedances."""
    x = d.values
    N = len(x)
    out = []
    for t in tgrid:
        c = int(N - np.searchsorted(x, t, side="left"))
        ph = c / N
        out.append(TailEstimate(float(t), ph, math.sqrt(ph * (1 - ph) / N), c, c < min_count))
    return out


def two_column(xs, ys) -> str:
    """Whitespace two-column text for gnuplot."""
    return "".join(f"{x:.17g} {y:.17g}\n" for x, y in zip(xs, ys))


# ---------------------------------------------------------------------------
# generator specs as joint models for the remainder engine


def _window_matrix(spec: GeneratorSpec) -> np.ndarray:
    """``A[site, innovation]`` with ``X = A eps``."""
    n, m, d = spec.n, spec.m, spec.d
    sites = list(itertools.product(range(n), repeat=d))
    innov = {j: r for r, j in enumerate(itertools.product(range(n + m), repeat=d))}
    A = np.zeros((len(sites), len(innov)))
    offs = list(itertools.product(range(m + 1), repeat=d))
    for s, i in enumerate(sites):
        for o in offs:
            A[s, innov[tuple(a + b for a, b in zip(i, o))]] = 1.0
    return A / math.sqrt((m + 1) ** d)


def _kernel(kernel: str):
    return {
        "sum": lambda a, b: a + b,
        "mixed": lambda a, b: a * b + a + b,
        "variance": lambda a, b: (a - b) ** 2 / 2 - 1,
    }[kernel]


def joint_model(spec: GeneratorSpec, reps: int = 20000, seed: int = 0, exact_limit: int = 16):
    """A :class:`~locwp.rsums.JointModel` for a generator spec.

    Rademacher inputs with at most ``exact_limit`` innovations are enumerated
    exactly; everything else uses the sampler backend.
    """
    from .depgraph import build_mdependent_lattice, build_ustat_graph
    from .rsums import ExactDiscrete, JointModel, Sampler

    if spec.kind == "mdep":
        g = build_mdependent_lattice(lattice_sites(spec), spec.m)
        A = _window_matrix(spec)
        n_eps = A.shape[1]
        if spec.law == "rademacher" and n_eps <= exact_limit:
            eps = np.array(list(itertools.product((-1.0, 1.0), repeat=n_eps)))
            return JointModel(g, ExactDiscrete(np.full(len(eps), 1.0 / len(eps)), eps @ A.T))
        return JointModel(g, Sampler(lambda rng, size: draw_law(rng, spec.law, (size, n_eps)) @ A.T,
                                     reps, seed))
    g = build_ustat_graph(spec.n, 2)
    pairs = [(i - 1, j - 1) for i, j in g.vertices]
    h = _kernel(spec.kernel)
    diag_mean = {"sum": 0.0, "mixed": 1.0, "variance": -1.0}[spec.kernel]
    centre = np.array([diag_mean if i == j else 0.0 for i, j in pairs])
    a_idx = np.array([i for i, _ in pairs])
    b_idx = np.array([j for _, j in pairs])

    def values(x):
        return h(x[:, a_idx], x[:, b_idx]) - centre

    if spec.law == "rademacher" and spec.n <= exact_limit:
        x = np.array(list(itertools.product((-1.0, 1.0), repeat=spec.n)))
        return JointModel(g, ExactDiscrete(np.full(len(x), 1.0 / len(x)), values(x)))
    return JointModel(g, Sampler(lambda rng, size: values(draw_law(rng, spec.law, (size, spec.n))),
                                 reps, seed))
