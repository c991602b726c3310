"""Closed-form Wasserstein-p bounds, bracket bounds and non-uniform tail bounds.

None of the constants in these bounds are pinned down, so every report
records the constant policy.  The default ``unit`` policy sets all of them
to 1, which makes each value a rate certificate with constants suppressed.
The tail bound uses the explicit constant ``p^{1/(p+1)} (1 + 1/p)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from scipy import optimize, special

from .rsums import RemainderTable
from .stein import QuadSpec, normal_atoms, normal_expectation, stein_derivative, stein_residual, stein_solve

UNIT_NOTE = "rate certificate, constants suppressed"


@dataclass(frozen=True)
class ConstantPolicy:
    """``unit`` sets every constant to 1; ``user`` reads ``values[tag]`` (default 1)."""

    kind: str = "unit"
    values: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("unit", "user"):
            raise ValueError("constant policy must be 'unit' or 'user'")

    def get(self, tag: str) -> float:
        if self.kind == "unit":
            return 1.0
        return float(self.values.get(tag, 1.0))

    def note(self) -> str:
        if self.kind == "unit":
            return UNIT_NOTE
        return "user constants " + ", ".join(f"{k}={v}" for k, v in sorted(self.values.items()))


@dataclass(frozen=True)
class BoundParams:
    p: float
    policy: ConstantPolicy = ConstantPolicy()

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError("p must be >= 1")

    @property
    def k(self) -> int:
        return math.ceil(self.p)

    @property
    def omega(self) -> float:
        return self.p + 1 - self.k


@dataclass
class BoundReport:
    tag: str
    value: float
    inputs: dict
    policy: str
    terms: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def bound_local_wp(table: RemainderTable, params: BoundParams) -> BoundReport:
    """``C_p (sum_{j<k} R_{j,1}^{1/j} + sum_{j<=k} R_{j,w}^{1/(j+w-1)})``.

    For integer ``p`` (``w = 1``) the first sum repeats terms of the second
    and is dropped, which matches the displayed ``p = 1, 2`` forms.
    """
    k, w = params.k, params.omega
    terms = []
    if w != 1:
        for j in range(1, k):
            terms.append(table.value(j, 1.0) ** (1.0 / j))
    for j in range(1, k + 1):
        terms.append(table.value(j, w) ** (1.0 / (j + w - 1)))
    c = params.policy.get("C_p")
    return BoundReport("localwp", c * math.fsum(terms),
                       {"p": params.p, "omega": w, "remainders": table.rows()},
                       params.policy.note(), terms)


def _moment(sums: Mapping, order: float) -> float:
    for key, v in sums.items():
        if abs(float(key) - order) < 1e-12:
            return float(v)
    raise KeyError(f"moment sum of order {order} is missing")


def bound_local_wp2(M: int, sigma: float, moment_sums: Mapping, params: BoundParams) -> BoundReport:
    """Neighborhood-size form: two terms in ``M``, ``sigma`` and absolute-moment sums."""
    p, w = params.p, params.omega
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    a = M ** (1 + w) * sigma ** (-(w + 2)) * _moment(moment_sums, w + 2)
    b = M ** (p + 1) * sigma ** (-(p + 2)) * _moment(moment_sums, p + 2)
    c = params.policy.get("C_p")
    terms = [c * a ** (1 / w), c * b ** (1 / p)]
    flags = {"hyp_term1_small": a < 1, "hyp_term2_small": b < 1}
    return BoundReport("localwp2", math.fsum(terms),
                       {"M": M, "sigma": sigma, "p": p, "omega": w,
                        "hyp_term1": a, "hyp_term2": b},
                       params.policy.note(), terms, flags)


def bound_bracket(M: float, sigma: float, moment_sum: float, k: int, omega: float,
                  policy: ConstantPolicy = ConstantPolicy()) -> float:
    """``C M^{k+w} sigma^{-(k+1+w)} sum E|X|^{k+1+w}``."""
    return policy.get("C_k_omega") * M ** (k + omega) * sigma ** (-(k + 1 + omega)) * moment_sum


def bound_mdep_field(m: int, d: int, M_nondegen: float, sigma: float, moment_sum_p2: float,
                     params: BoundParams) -> BoundReport:
    """``C m^{(1+w)d/w} M^{(p-w)/(p w)} sigma^{-(p+2)/p} (sum E|X|^{p+2})^{1/p}``."""
    p, w = params.p, params.omega
    if M_nondegen < 1:
        raise ValueError("non-degeneracy constant M must be >= 1")
    val = (params.policy.get("C_p_d") * m ** ((1 + w) * d / w) * M_nondegen ** ((p - w) / (p * w))
           * sigma ** (-(p + 2) / p) * moment_sum_p2 ** (1 / p))
    return BoundReport("mdepfield", val, {"m": m, "d": d, "M": M_nondegen, "sigma": sigma, "p": p},
                       params.policy.note())


def uniform_be_from_wp(abs_moments: Mapping, sigma: float, p: float,
                       policy: ConstantPolicy = ConstantPolicy()) -> float:
    """``C (sum ||X_i||_3^3 / sigma^3 + sum ||X_i||_{p+2}^{1+2/p} / sigma^{1+2/p})``.

    ``abs_moments[order]`` lists ``E|X_i|^order`` per variable; the second sum
    needs each norm separately, not just their total.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    t1 = math.fsum(_per_vertex(abs_moments, 3.0)) / sigma ** 3
    e = 1 + 2 / p
    t2 = math.fsum(m ** (e / (p + 2)) for m in _per_vertex(abs_moments, p + 2)) / sigma ** e
    return policy.get("C_BE") * (t1 + t2)


def _per_vertex(abs_moments: Mapping, order: float) -> Sequence[float]:
    for key, v in abs_moments.items():
        if abs(float(key) - order) < 1e-12:
            return [float(x) for x in v]
    raise KeyError(f"per-variable moments of order {order} are missing")


# ---------------------------------------------------------------------------
# normal functions and the tail bound


def norm_cdf(x):
    return special.ndtr(x)


def norm_sf(x):
    return special.ndtr(-x)


def norm_pdf(x):
    return math.exp(-x * x / 2) / math.sqrt(2 * math.pi)


def norm_ppf(u):
    return special.ndtri(u)


def g_t(x: float, t: float, p: float) -> float:
    """``(1-x)^{p+1} exp(-(x t)^2 / 2)``: strictly decreasing from 1 to 0 on ``[0, 1]``."""
    return (1 - x) ** (p + 1) * math.exp(-(x * t) ** 2 / 2)


def g_inverse(t: float, y: float, p: float = 1.0, tol: float = 1e-12) -> float:
    """The ``x`` in ``[0, 1]`` with ``g_t(x) = y``, by bisection."""
    if not 0 <= y <= 1:
        raise ValueError("y must lie in [0, 1]")
    if t <= 0:
        raise ValueError("t must be positive")
    if y == 1:
        return 0.0
    if y == 0:
        return 1.0
    x = optimize.bisect(lambda z: g_t(z, t, p) - y, 0.0, 1.0, xtol=1e-17, rtol=4 * 2.3e-16, maxiter=400)
    if abs(g_t(x, t, p) - y) > tol:
        raise ArithmeticError(f"bisection missed tolerance at t={t}, y={y}")
    return x


@dataclass(frozen=True)
class TailBoundQuery:
    t: float
    beta: float
    p: float
    wp: float

    def __post_init__(self):
        if self.t <= 0 or self.beta <= 0 or self.p < 1 or self.wp < 0:
            raise ValueError("need t > 0, beta > 0, p >= 1, wp >= 0")


@dataclass
class TailBound:
    upper: float
    lower: float
    condition_ok: bool
    threshold: float


def tail_constant(p: float) -> float:
    return p ** (1 / (p + 1)) * (1 + 1 / p)


def tail_threshold(t: float, beta: float, p: float) -> float:
    """Left side of the validity condition; ``nan`` for ``t < 1`` where ``log t < 0``."""
    if t < 1:
        return math.nan
    return ((math.sqrt(2 * math.pi) * p) ** (1 / (p + 1))
            * (1 - math.sqrt(2 * beta * math.log(t)) / t) * t ** (1 - beta / (p + 1)))


def tail_bound(q: TailBoundQuery) -> TailBound:
    """Bounds on ``P(W >= t) - Phi^c(t)``: ``-lower <= deviation <= upper``."""
    p, t = q.p, q.t
    c = tail_constant(p)
    scale = q.wp ** (p / (p + 1))
    upper = c * scale / t ** (1 + q.beta * p / (p + 1))
    lower = c / t * norm_pdf(t * p / (p + 1)) * scale
    thr = tail_threshold(t, q.beta, p)
    ok = bool(thr >= q.wp) if not math.isnan(thr) else False
    return TailBound(upper, lower, ok, thr)


__all__ = [
    "ConstantPolicy", "BoundParams", "BoundReport", "bound_local_wp", "bound_local_wp2",
    "bound_bracket", "bound_mdep_field", "uniform_be_from_wp", "g_t", "g_inverse",
    "TailBoundQuery", "TailBound", "tail_bound", "tail_threshold", "tail_constant",
    "norm_cdf", "norm_sf", "norm_pdf", "norm_ppf", "QuadSpec", "stein_solve",
    "stein_derivative", "stein_residual", "normal_expectation", "normal_atoms",
]
