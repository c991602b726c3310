"""Constructive cumulant matching with an auxiliary i.i.d. variable.

Given target ratios ``u_j`` (meant to be ``kappa_{j+2}(W)``) we pick a sample
size ``q`` and build a law for ``xi`` with ``kappa_1 = 0``, ``kappa_2 = 1`` and
``kappa_{j+2}(xi) = q^{j/2} u_j``.  The moment sequence is completed with
zero free odd moments and the explicit even-moment extension, then realised
as a finite atomic law through the Jacobi matrix of its orthogonal
polynomials.

Arithmetic runs in :mod:`mpmath` because the extension constants grow fast.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Sequence

import mpmath

from .cumulants import cumulants_from_moments, moments_from_cumulants

DPS = 60
HANKEL_SLACK = mpmath.mpf(10) ** -40


class MatchingError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MatchTarget:
    """Targets ``u_1..u_{k-1}`` with ``k = ceil(p)`` and starting constant ``cp``."""

    u: tuple
    p: float
    cp: float = 0.5

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not 0 < self.cp < 1:
            raise ValueError("cp must lie in (0, 1)")
        object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        if len(self.u) != self.k - 1:
            raise ValueError(f"need k-1 = {self.k - 1} targets for p={self.p}, got {len(self.u)}")

    @property
    def k(self) -> int:
        return math.ceil(self.p)


@dataclass(frozen=True)
class GaussianBranch:
    """All targets vanish: ``xi ~ N(0,1)`` works with any ``q >> |I|``."""

    default_q: int | None = None
    rule: str = "any q >> |I|"


@dataclass
class MatchResult:
    q: int | None
    cp: float
    gaussian: bool
    xi_cumulants: list
    xi_moments: list
    atoms: list
    hankel_dets: list
    lower_bound: float | None
    abs_moment: float
    abs_moment_bound: float
    retries: int = 0
    default_q: int | None = None

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "gaussian_branch": self.gaussian,
            "default_q": self.default_q,
            "cp": self.cp,
            "retries": self.retries,
            "cumulants": [float(x) for x in self.xi_cumulants],
            "moments": [float(x) for x in self.xi_moments],
            "atoms": [[float(x), float(w)] for x, w in self.atoms],
            "hankel_dets": [float(d) for d in self.hankel_dets],
            "kappa_lower_bound": self.lower_bound,
            "abs_moment_p_plus_2": self.abs_moment,
            "abs_moment_bound": self.abs_moment_bound,
        }


def choose_q(target: MatchTarget, index_size: int | None = None):
    """Sample size ``q = floor(min_j cp^2 |u_j|^{-2/j})`` over nonzero ``u_j``.

    The floor is taken exactly: ``q`` is the largest integer with
    ``q^j u_j^2 <= cp^{2j}`` for every nonzero ``u_j``, with ``u_j`` and ``cp``
    read as the decimal literals of their shortest float representation.
    """
    nz = [(j, Fraction(repr(abs(u)))) for j, u in enumerate(target.u, start=1) if u != 0]
    if not nz:
        default = None
        if index_size is not None:
            default = index_size ** math.ceil(2 * (target.p + 1) / target.p)
        return GaussianBranch(default)
    cp = Fraction(repr(target.cp))
    q = None
    for j, a in nz:
        # float guess, then exact correction
        guess = int(math.floor(float(cp) ** 2 * float(a) ** (-2.0 / j)))
        c = max(guess - 2, 0)
        while (c + 1) ** j * a * a <= cp ** (2 * j):
            c += 1
        while c > 0 and c ** j * a * a > cp ** (2 * j):
            c -= 1
        q = c if q is None else min(q, c)
    if q == 0:
        raise MatchingError(f"targets too large for matching at cp={target.cp}")
    return q


def _hankel(mu, j):
    return mpmath.det(mpmath.matrix([[mu[a + b] for b in range(j + 1)] for a in range(j + 1)]))


def extension_constant(j: int, bound_c) -> object:
    """``C' = (j+1) (j+1)! C^{j+2} + 1``."""
    return (j + 1) * math.factorial(j + 1) * bound_c ** (j + 2) + 1


def extend_moments(mu: Sequence, bound_c) -> object:
    """Next even moment ``mu_{2j+2}`` for a sequence given through order ``2j+1``.

    Raises when ``|mu_l| > bound_c`` for some ``l`` or when ``H_j < 1``.
    """
    if len(mu) % 2 or len(mu) < 2:
        raise ValueError("moments must run through an odd order 2j+1")
    j = (len(mu) - 2) // 2
    with mpmath.workdps(DPS):
        mu = [mpmath.mpf(x) for x in mu]
        if max(abs(x) for x in mu) > bound_c:
            raise MatchingError(f"moment bound C={bound_c} violated")
        if _hankel(mu, j) < 1 - HANKEL_SLACK:
            raise MatchingError(f"H_{j} < 1; extension precondition fails")
        return extension_constant(j, mpmath.mpf(bound_c))


def _recurrence(mu, n):
    """Chebyshev algorithm: ``alpha_0..`` and ``beta_0..`` from ``mu_0..mu_{2n-1}``.

    Stops early when a ``beta`` vanishes (finite support reached).
    """
    scale = max(mpmath.mpf(1), max(abs(x) for x in mu))
    tol = scale * mpmath.mpf(10) ** (-(DPS // 2))
    alpha = [mu[1] / mu[0]]
    beta = [mu[0]]
    prev2 = [mpmath.mpf(0)] * (2 * n)
    prev = list(mu[: 2 * n])
    for k in range(1, n):
        cur = [mpmath.mpf(0)] * (2 * n)
        for ell in range(k, 2 * n - k):
            cur[ell] = prev[ell + 1] - alpha[k - 1] * prev[ell] - beta[k - 1] * prev2[ell]
        if abs(cur[k]) <= tol:
            break
        if cur[k] < 0:
            raise MatchingError(f"negative recurrence coefficient at order {2 * k}; moments infeasible")
        alpha.append(cur[k + 1] / cur[k] - prev[k] / prev[k - 1])
        beta.append(cur[k] / prev[k - 1])
        prev2, prev = prev, cur
    return alpha, beta


def realize_atomic_mp(mu: Sequence) -> list:
    if len(mu) % 2 or len(mu) < 2:
        raise ValueError("realization needs moments through an odd order 2s+1")
    n = len(mu) // 2
    with mpmath.workdps(DPS):
        mu = [mpmath.mpf(x) for x in mu]
        if mu[0] != 1:
            raise ValueError("mu_0 must equal 1")
        alpha, beta = _recurrence(mu, n)
        m = len(alpha)
        J = mpmath.zeros(m, m)
        for i in range(m):
            J[i, i] = alpha[i]
            if i + 1 < m:
                J[i, i + 1] = J[i + 1, i] = mpmath.sqrt(beta[i + 1])
        E, Q = mpmath.eigsy(J)
        atoms = sorted((E[i], beta[0] * Q[0, i] ** 2) for i in range(m))
    return atoms


def realize_atomic(mu: Sequence) -> list[tuple[float, float]]:
    """Atomic law matching ``mu_0..mu_{2s+1}`` with at most ``s+1`` atoms.

    Uses the Chebyshev algorithm for the three-term recurrence and the
    eigen-decomposition of the Jacobi matrix (Golub-Welsch).  A zero
    recurrence coefficient (boundary case) yields fewer atoms.
    """
    return [(float(x), float(w)) for x, w in realize_atomic_mp(mu)]


def _atom_moments(atoms, order):
    return [sum(w * x ** n for x, w in atoms) for n in range(order + 1)]


def _assemble(target: MatchTarget, q, cp, order):
    """Cumulants, full moment list through ``order + 1`` and Hankel values."""
    k = target.k
    kap = [mpmath.mpf(0), mpmath.mpf(1)]
    if q is not None:
        kap += [mpmath.mpf(q) ** (mpmath.mpf(j) / 2) * mpmath.mpf(repr(u))
                for j, u in enumerate(target.u, start=1)]
    else:
        kap += [mpmath.mpf(0)] * (k - 1)
    if q is None:
        # xi ~ N(0,1): use its moments directly
        mu = [mpmath.mpf(0 if n % 2 else math.prod(range(1, n, 2))) for n in range(order + 2)]
        return kap, mu, None
    mu = moments_from_cumulants(kap)  # through k+1
    if len(mu) % 2:
        mu.append(mpmath.mpf(0))  # free odd moment
    while len(mu) < order + 2:
        j = (len(mu) - 2) // 2
        if _hankel(mu, j) < 1 - HANKEL_SLACK:
            return kap, mu, j
        c = max(mpmath.mpf(1), max(abs(x) for x in mu))
        mu.append(extension_constant(j, c))
        mu.append(mpmath.mpf(0))
    return kap, mu, None


def build_match(target: MatchTarget, realize_order: int | None = None,
                index_size: int | None = None, max_retries: int = 20,
                check_tol: float = 1e-8) -> MatchResult:
    """Build ``(q, xi)`` for the targets, shrinking ``cp`` on Hankel failure."""
    k = target.k
    if realize_order is None:
        realize_order = k + 3 + (k + 3) % 2
    if realize_order % 2 or realize_order < k + 3:
        raise ValueError(f"realize_order must be even and >= k+3 = {k + 3}")
    cp = target.cp
    with mpmath.workdps(DPS):
        for attempt in range(max_retries + 1):
            t = MatchTarget(target.u, target.p, cp)
            qv = choose_q(t, index_size)
            gaussian = isinstance(qv, GaussianBranch)
            q = None if gaussian else qv
            kap, mu, failed = _assemble(t, q, cp, realize_order)
            if failed is None:
                break
            cp /= 2
        else:
            raise MatchingError(f"matching infeasible at given targets after {max_retries} retries")
        s = realize_order // 2
        dets = [_hankel(mu, j) for j in range(s + 1)]
        if min(dets) < 1 - HANKEL_SLACK:
            raise MatchingError("Hankel verification failed after extension")
        atoms = realize_atomic_mp(mu)
        am = _atom_moments(atoms, k + 1)
        got = cumulants_from_moments([mpmath.mpf(1)] + [x / am[0] for x in am[1:]])
        for j in range(k + 1):
            if abs(got[j] - kap[j]) > check_tol:
                raise MatchingError(f"atomic law misses kappa_{j + 1} by {float(abs(got[j] - kap[j])):.3g}")
        pe = mpmath.mpf(target.p) + 2
        abs_mom = sum(w * abs(x) ** pe for x, w in atoms)
        e = 2 * math.ceil(k / 2) + 2
        abs_bound = mu[e] ** (pe / e)
        lower = None if gaussian else float(mpmath.mpf(cp) ** target.p / 2 ** (mpmath.mpf(target.p) / 2))
    return MatchResult(
        q=q, cp=cp, gaussian=gaussian,
        xi_cumulants=[float(x) for x in kap],
        xi_moments=[float(x) for x in mu],
        atoms=[(float(x), float(w)) for x, w in atoms],
        hankel_dets=[float(d) for d in dets],
        lower_bound=lower, abs_moment=float(abs_mom), abs_moment_bound=float(abs_bound),
        retries=attempt, default_q=qv.default_q if gaussian else None,
    )
