"""Moment and cumulant algebra.

All conversions are written against plain arithmetic so they run unchanged on
``float``, :class:`fractions.Fraction` (exact mode) or ``mpmath.mpf``.
Sequences are indexed by order: ``moments[j] = E[X^j]`` with ``moments[0] = 1``
and ``cumulants[j - 1] = kappa_j``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


@lru_cache(maxsize=None)
def _multi_indices(n: int, j: int) -> tuple:
    """Tuples ``(i_1..i_{n-j+1})`` with ``sum i = j`` and ``sum r*i_r = n``."""
    width = n - j + 1
    out = []

    def rec(r, parts_left, weight_left, acc):
        if r > width:
            if parts_left == 0 and weight_left == 0:
                out.append(tuple(acc))
            return
        for c in range(min(parts_left, weight_left // r) + 1):
            acc.append(c)
            rec(r + 1, parts_left - c, weight_left - c * r, acc)
            acc.pop()

    rec(1, j, n, [])
    return tuple(out)


def bell_partial(n: int, j: int, x: Sequence) -> object:
    """Partial exponential Bell polynomial ``B_{n,j}(x_1..x_{n-j+1})``.

    ``x[0]`` holds ``x_1``.
    """
    if not 1 <= j <= n:
        raise ValueError(f"need 1 <= j <= n, got n={n}, j={j}")
    width = n - j + 1
    if len(x) < width:
        raise ValueError(f"B_{{{n},{j}}} needs {width} arguments, got {len(x)}")
    total = 0
    for idx in _multi_indices(n, j):
        coef = math.factorial(n)
        for r, c in enumerate(idx, start=1):
            coef //= math.factorial(c) * math.factorial(r) ** c
        term = coef
        for r, c in enumerate(idx, start=1):
            if c:
                term = term * x[r - 1] ** c
        total = total + term
    return total


def bell_complete(n: int, x: Sequence) -> object:
    if n == 0:
        return 1
    return sum(bell_partial(n, j, x) for j in range(1, n + 1))


def moments_from_cumulants(kappa: Sequence) -> list:
    """``mu_0..mu_N`` from ``kappa_1..kappa_N`` via complete Bell polynomials."""
    kappa = list(kappa)
    one = kappa[0] * 0 + 1 if kappa else 1
    return [one] + [bell_complete(n, kappa) for n in range(1, len(kappa) + 1)]


def cumulants_from_moments(mu: Sequence, method: str = "recursion") -> list:
    """``kappa_1..kappa_N`` from ``mu_0..mu_N``; requires ``mu_0 = 1``.

    ``method="recursion"`` inverts ``mu_n = sum_j C(n-1, j-1) kappa_j mu_{n-j}``;
    ``method="bell"`` sums ``(-1)^{j-1} (j-1)! B_{n,j}(mu)``.  Both are exact on
    rationals.  In binary64 the Bell sum cancels badly at high order, so the
    recursion is the default.
    """
    if mu[0] != 1:
        raise ValueError("mu_0 must equal 1")
    m = list(mu[1:])
    out = []
    if method == "recursion":
        for n in range(1, len(m) + 1):
            s = m[n - 1]
            for j in range(1, n):
                s = s - math.comb(n - 1, j - 1) * out[j - 1] * mu[n - j]
            out.append(s)
        return out
    if method != "bell":
        raise ValueError("method must be 'recursion' or 'bell'")
    for n in range(1, len(m) + 1):
        s = 0
        for j in range(1, n + 1):
            s = s + (-1) ** (j - 1) * math.factorial(j - 1) * bell_partial(n, j, m)
        out.append(s)
    return out


def moment_recursion(kappa: Sequence, mu: Sequence, n: int) -> object:
    """Right-hand side of ``mu_n = sum_j C(n-1, j-1) kappa_j mu_{n-j}``."""
    if n < 1 or len(kappa) < n or len(mu) < n:
        raise ValueError(f"recursion at order {n} needs kappa_1..kappa_{n} and mu_0..mu_{n-1}")
    return sum(math.comb(n - 1, j - 1) * kappa[j - 1] * mu[n - j] for j in range(1, n + 1))


def moments_by_recursion(kappa: Sequence) -> list:
    mu = [kappa[0] * 0 + 1 if kappa else 1]
    for n in range(1, len(kappa) + 1):
        mu.append(moment_recursion(kappa, mu, n))
    return mu


def _det_exact(rows: list) -> Fraction:
    """Fraction-exact determinant by Gaussian elimination."""
    a = [[Fraction(v) for v in row] for row in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        inv = 1 / a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] * inv
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return det


def hankel_matrix(mu: Sequence, j: int) -> list:
    if len(mu) < 2 * j + 1:
        raise ValueError(f"H_{j} needs moments through order {2 * j}")
    return [[mu[a + b] for b in range(j + 1)] for a in range(j + 1)]


def hankel_det(mu: Sequence, j: int, exact: bool = True):
    """Determinant of the ``(j+1) x (j+1)`` Hankel matrix of ``mu_0..mu_{2j}``.

    With ``exact`` the inputs are converted to Fractions (floats convert
    without rounding) and the determinant is exact for those inputs.
    """
    rows = hankel_matrix(mu, j)
    if exact:
        d = _det_exact(rows)
        if all(isinstance(v, (int, Fraction)) for v in mu[: 2 * j + 1]):
            return d
        return float(d)
    return float(np.linalg.det(np.array(rows, dtype=float)))


@dataclass
class Feasibility:
    feasible: bool
    boundary: bool
    first_failing: int | None
    determinants: list

    @property
    def status(self) -> str:
        if not self.feasible:
            return "infeasible"
        return "boundary" if self.boundary else "feasible"


def hamburger_feasible(mu: Sequence) -> Feasibility:
    """Sylvester check on the Hankel determinants ``H_0..H_J`` with ``2J <= N``.

    A zero determinant is reported as a feasible boundary (finite-atom law);
    determinants after a zero must also vanish for the sequence to stay
    feasible.
    """
    if mu[0] != 1:
        raise ValueError("mu_0 must equal 1")
    J = (len(mu) - 1) // 2
    dets = [hankel_det(mu, j) for j in range(J + 1)]
    boundary = False
    for j, d in enumerate(dets):
        if d < 0 or (boundary and d != 0):
            return Feasibility(False, boundary, j, dets)
        if d == 0:
            boundary = True
    return Feasibility(True, boundary, None, dets)


@dataclass
class MomentEstimate:
    moments: np.ndarray
    stderr: np.ndarray
    reps: int
    seed: int | None = None

    def cumulants(self) -> list:
        return cumulants_from_moments(list(self.moments))


def estimate_moments_mc(sampler: Callable, order: int, reps: int, seed=None,
                        blocks: int = 20) -> MomentEstimate:
    """Plug-in raw moments of a scalar sampler with delete-a-block jackknife errors.

    ``sampler(rng, size)`` must return ``size`` draws.  Cumulants obtained from
    these moments are plug-in estimates and carry an ``O(1/reps)`` bias.
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    rng = np.random.default_rng(seed)
    w = np.asarray(sampler(rng, reps), dtype=float)
    if w.shape != (reps,):
        raise ValueError("sampler returned the wrong number of draws")
    powers = np.vander(w, order + 1, increasing=True)
    est = powers.mean(axis=0)
    blocks = min(blocks, reps)
    chunks = np.array_split(np.arange(reps), blocks)
    sums = np.array([powers[c].sum(axis=0) for c in chunks])
    counts = np.array([len(c) for c in chunks])
    total = sums.sum(axis=0)
    loo = (total - sums) / (reps - counts)[:, None]
    jk = np.sqrt((blocks - 1) / blocks * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    return MomentEstimate(est, jk, reps, seed)


def sequence_to_json(values: Sequence, kind: str) -> str:
    return json.dumps({"kind": kind, "order": len(values) - (1 if kind == "moments" else 0),
                       "values": [float(v) for v in values]})


def sequence_from_json(text: str) -> tuple[str, list]:
    obj = json.loads(text)
    values = obj["values"]
    expected = obj["order"] + (1 if obj["kind"] == "moments" else 0)
    if len(values) != expected:
        raise ValueError("order field disagrees with sequence length")
    return obj["kind"], values
