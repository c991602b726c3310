"""Compositional expectations, S-sums, R-sums and remainder terms.

A :class:`JointModel` pairs a dependency graph with either an exact finite
outcome table or a seeded sampler.  The sampler backend draws one sample,
treats it as an equally weighted outcome table and attaches a delete-a-block
jackknife standard error, so both backends share every code path.

All sums run on values divided by ``sigma = sd(sum X_i)``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .combinat import compositions_star, sign_sequences
from .cumulants import cumulants_from_moments
from .depgraph import DependencyGraph, build_from_edge_list, sorted_vertices


class ModelError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ExactDiscrete:
    """Outcome table: ``probs[r]`` and ``values[r, v]`` in graph vertex order."""

    probs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        x = np.asarray(self.values, dtype=float)
        if p.ndim != 1 or x.ndim != 2 or x.shape[0] != p.shape[0]:
            raise ModelError("probs must be (K,) and values (K, n)")
        if np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
            raise ModelError("outcome probabilities must be positive and sum to 1")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "values", x)


@dataclass(frozen=True)
class Sampler:
    """``draw(rng, size)`` returns an array of shape ``(size, n)``."""

    draw: Callable
    reps: int = 4000
    seed: int = 0
    blocks: int = 20


@dataclass(frozen=True)
class EvalBudget:
    max_nodes: int = 10_000_000


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float = 0.0
    exact: bool = True


@dataclass
class ModelSummary:
    sigma: float
    second_moment_sum: float
    _values: np.ndarray = field(repr=False)
    _probs: np.ndarray = field(repr=False)

    def moment_sum(self, order: float) -> float:
        """``sum_i E|X_i|^order`` on the raw scale."""
        return float(self._probs @ (np.abs(self._values) ** order).sum(axis=1))

    def vertex_moments(self, order: float) -> list:
        """``E|X_i|^order`` per vertex, in vertex order."""
        return [float(x) for x in self._probs @ np.abs(self._values) ** order]


class JointModel:
    """Random vector ``(X_i)`` indexed by the vertices of ``graph``."""

    def __init__(self, graph: DependencyGraph, backend, mean_tol: float = 1e-9):
        self.graph = graph
        self.backend = backend
        if isinstance(backend, ExactDiscrete):
            self.probs, self.values = backend.probs, backend.values
            self.exact = True
        elif isinstance(backend, Sampler):
            rng = np.random.default_rng(backend.seed)
            vals = np.asarray(backend.draw(rng, backend.reps), dtype=float)
            self.values = vals
            self.probs = np.full(vals.shape[0], 1.0 / vals.shape[0])
            self.exact = False
        else:
            raise ModelError("backend must be ExactDiscrete or Sampler")
        if self.values.shape[1] != len(graph):
            raise ModelError(f"model has {self.values.shape[1]} coordinates, graph has {len(graph)}")
        means = self.probs @ self.values
        if self.exact:
            scale = max(1.0, float(np.abs(self.values).max()))
            bad = np.abs(means) > mean_tol * scale
        else:
            sd = self.values.std(axis=0) / math.sqrt(self.values.shape[0])
            bad = np.abs(means) > 6 * sd + 1e-300
        if np.any(bad):
            v = graph.vertices[int(np.argmax(bad))]
            raise ModelError(f"X_{v!r} is not mean zero under the model")
        self.sigma = _sigma(self.probs, self.values)
        if not self.sigma > 0:
            raise ModelError("sigma = 0: the sum is degenerate")

    def summary(self) -> ModelSummary:
        return ModelSummary(self.sigma, float(self.probs @ (self.values ** 2).sum(axis=1)),
                            self.values, self.probs)

    def normalized(self) -> np.ndarray:
        return self.values / self.sigma

    def w_values(self) -> np.ndarray:
        """Per-outcome ``W = sigma^{-1} sum_i X_i``."""
        return self.values.sum(axis=1) / self.sigma

    def subsets(self):
        """Outcome-row subsets for the delete-a-block jackknife (sampler only)."""
        n = self.values.shape[0]
        return np.array_split(np.arange(n), min(self.backend.blocks, n))


def _sigma(probs, values):
    return math.sqrt(float(probs @ values.sum(axis=1) ** 2))


def _jackknife(model: JointModel, fn: Callable) -> Estimate:
    """Apply ``fn(probs, values)`` to the full table; add a jackknife SE for samplers."""
    full = fn(model.probs, model.values)
    if model.exact:
        return Estimate(full, 0.0, True)
    n = model.values.shape[0]
    loo = []
    for idx in model.subsets():
        keep = np.ones(n, dtype=bool)
        keep[idx] = False
        m = int(keep.sum())
        loo.append(fn(np.full(m, 1.0 / m), model.values[keep]))
    loo = np.asarray(loo)
    b = len(loo)
    se = math.sqrt((b - 1) / b * float(((loo - loo.mean()) ** 2).sum()))
    return Estimate(full, se, False)


# ---------------------------------------------------------------------------
# compositional expectations


def abs_var(v):
    """Descriptor for ``|X_v|``."""
    return ("abs", v)


def var(v):
    return ("x", v)


def abs_sum_power(J, omega):
    """Descriptor for ``(sum_{v in J} |X_v|)^omega``."""
    return ("sumpow", tuple(J), omega)


def _resolve(y, graph, x):
    if callable(y):
        return np.asarray(y(x), dtype=float)
    kind = y[0]
    if kind == "abs":
        return np.abs(x[:, graph.index(y[1])])
    if kind == "x":
        return x[:, graph.index(y[1])]
    if kind == "sumpow":
        cols = [graph.index(v) for v in y[1]]
        return np.abs(x[:, cols]).sum(axis=1) ** y[2]
    raise ModelError(f"unknown descriptor {y!r}")


def comp_expectation(eta: Sequence[int], ys: Sequence, model: JointModel,
                     normalize: bool = True) -> Estimate:
    """``E[Y_1..Y_{eta_1}] E[Y_{eta_1+1}..] ...`` for the composition ``eta``.

    Each entry of ``ys`` is a descriptor (:func:`abs_var`, :func:`var`,
    :func:`abs_sum_power`) or a callable mapping the ``(K, n)`` value table to
    a length-``K`` vector.
    """
    if sum(eta) != len(ys) or any(e < 1 for e in eta):
        raise ValueError("composition must sum to the number of quantities")

    def fn(probs, values):
        x = values / _sigma(probs, values) if normalize else values
        out, pos = 1.0, 0
        for e in eta:
            prod = np.ones(len(probs))
            for y in ys[pos:pos + e]:
                prod = prod * _resolve(y, model.graph, x)
            out *= float(probs @ prod)
            pos += e
        return out

    return _jackknife(model, fn)


# ---------------------------------------------------------------------------
# S-sums and R-sums over sign sequences


class _Counter:
    def __init__(self, budget: EvalBudget | None):
        self.limit = None if budget is None else budget.max_nodes
        self.n = 0

    def tick(self):
        self.n += 1
        if self.limit is not None and self.n > self.limit:
            raise BudgetExceeded(f"chain enumeration exceeded {self.limit} node visits")


def _signed_fold(graph, probs, x, t, omega, roots, counter):
    """Sum of compositional expectations for the sign sequence ``t``.

    With ``omega=None`` this is the S-sum on ``x`` (all ``len(t)`` positions
    are summed).  Otherwise the last position is folded into
    ``(sum_{N_k} |x|)^omega`` and ``x`` should already hold absolute values.
    """
    L = len(t)
    if any(tj == 0 for tj in t[1:]):
        return 0.0
    starts = {0} | {j for j, tj in enumerate(t) if tj > 0}
    idx = graph._index
    last = L - 1 if omega is not None else L
    total = 0.0
    chain: list = []

    def rec(j, closed_scalar, block_vec):
        nonlocal total
        if j == last:
            if omega is not None:
                nb = graph.neighborhood_set(chain[: abs(t[last])])
                s = x[:, [idx[v] for v in nb]].sum(axis=1) ** omega
                if last in starts:
                    closed_scalar *= float(probs @ block_vec)
                    block_vec = s
                else:
                    block_vec = block_vec * s
            total += closed_scalar * float(probs @ block_vec)
            return
        cands = graph.vertices if j == 0 else sorted_vertices(graph.neighborhood_set(chain[: abs(t[j])]))
        if j == 0 and roots is not None:
            cands = roots
        for v in cands:
            counter.tick()
            col = x[:, idx[v]]
            if j in starts and j > 0:
                cs, bv = closed_scalar * float(probs @ block_vec), col
                if cs == 0.0:
                    continue
            else:
                cs, bv = closed_scalar, (col if j == 0 else block_vec * col)
            chain.append(v)
            rec(j + 1, cs, bv)
            chain.pop()

    rec(0, 1.0, np.ones(len(probs)))
    return total


def _check_signs(t):
    t = tuple(int(v) for v in t)
    if not t or t[0] != 0:
        raise ValueError("sign sequence must start with t_1 = 0")
    for j, tj in enumerate(t):
        if abs(tj) > j:
            raise ValueError(f"|t_{j + 1}| must be <= {j}")
    return t


def s_sum(model: JointModel, t: Sequence[int], budget: EvalBudget | None = None) -> Estimate:
    """Order-``len(t)`` S-sum (signed)."""
    t = _check_signs(t)

    def fn(probs, values):
        x = values / _sigma(probs, values)
        return _signed_fold(model.graph, probs, x, t, None, None, _Counter(budget))

    return _jackknife(model, fn)


def r_sum(model: JointModel, t: Sequence[int], omega: float = 1.0,
          budget: EvalBudget | None = None) -> Estimate:
    """Order-``len(t)`` R-sum with exponent ``omega`` (absolute values throughout)."""
    t = _check_signs(t)
    if len(t) < 2:
        raise ValueError("R-sums need order >= 2")

    def fn(probs, values):
        x = np.abs(values) / _sigma(probs, values)
        return _signed_fold(model.graph, probs, x, t, omega, None, _Counter(budget))

    return _jackknife(model, fn)


# ---------------------------------------------------------------------------
# remainder terms


def _remainder_exact(graph, probs, x, k, omega, comps, roots, counter):
    """Sum over ``C*(k+2)`` and default chains; ``x`` holds normalized |X|."""
    idx = graph._index
    starts = [np.cumsum((0,) + eta[:-1]) for eta in comps]
    total = 0.0
    chain: list = []
    cols: list = []

    def leaf():
        nb = graph.neighborhood_set(chain)
        s = x[:, [idx[v] for v in nb]].sum(axis=1) ** omega
        ys = cols + [s]
        acc = 0.0
        for eta, st in zip(comps, starts):
            val = 1.0
            for a, e in zip(st, eta):
                prod = ys[a]
                for y in ys[a + 1:a + e]:
                    prod = prod * y
                val *= float(probs @ prod)
            acc += val
        return acc

    def rec(j):
        nonlocal total
        if j == k + 1:
            total += leaf()
            return
        cands = (roots if roots is not None else graph.vertices) if j == 0 \
            else sorted_vertices(graph.neighborhood_set(chain))
        for v in cands:
            counter.tick()
            chain.append(v)
            cols.append(x[:, idx[v]])
            rec(j + 1)
            chain.pop()
            cols.pop()

    rec(0)
    return total


def _remainder_part(args):
    graph, probs, values, k, omega, roots, limit = args
    x = np.abs(values) / _sigma(probs, values)
    counter = _Counter(None if limit is None else EvalBudget(limit))
    val = _remainder_exact(graph, probs, x, k, omega, compositions_star(k + 2), roots, counter)
    return val, counter.n


def remainder(model: JointModel, k: int, omega: float, budget: EvalBudget | None = None,
              workers: int = 1) -> Estimate:
    """``R_{k,omega}`` summed over ``C*(k+2)`` and chains ``i_1..i_{k+1}``.

    The fold is partitioned by ``i_1``; partial sums are combined in vertex
    order so the result does not depend on ``workers``.  The budget caps node
    visits in total; exceeding it raises :class:`BudgetExceeded`.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < omega <= 1:
        raise ValueError("omega must lie in (0, 1]")
    budget = budget or EvalBudget()

    def fn(probs, values):
        if workers > 1 and model.exact:
            jobs = [(model.graph, probs, values, k, omega, (v,), budget.max_nodes)
                    for v in model.graph.vertices]
            with ProcessPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(_remainder_part, jobs))
            if sum(n for _, n in parts) > budget.max_nodes:
                raise BudgetExceeded(f"chain enumeration exceeded {budget.max_nodes} node visits")
            return float(math.fsum(v for v, _ in parts))
        counter = _Counter(budget)
        x = np.abs(values) / _sigma(probs, values)
        comps = compositions_star(k + 2)
        parts = [_remainder_exact(model.graph, probs, x, k, omega, comps, (v,), counter)
                 for v in model.graph.vertices]
        return float(math.fsum(parts))

    return _jackknife(model, fn)


def remainder_by_signs(model: JointModel, k: int, omega: float,
                       budget: EvalBudget | None = None) -> Estimate:
    """``R_{k,omega}`` as the sum of R-sums over ``M_{1,k+2}``."""
    def fn(probs, values):
        x = np.abs(values) / _sigma(probs, values)
        counter = _Counter(budget)
        return float(math.fsum(_signed_fold(model.graph, probs, x, t, omega, None, counter)
                               for t in sign_sequences(k)))

    return _jackknife(model, fn)


@dataclass
class RemainderTable:
    p: float
    entries: dict
    sigma: float

    def value(self, j: int, omega: float) -> float:
        key = (j, _omega_key(omega))
        if key not in self.entries:
            raise KeyError(f"remainder table lacks R_{{{j},{omega}}}")
        return self.entries[key].value

    def rows(self) -> list:
        return [{"j": j, "omega": w, "value": e.value, "se": e.se, "exact": e.exact}
                for (j, w), e in sorted(self.entries.items())]


def _omega_key(omega):
    return round(float(omega), 12)


def required_entries(p: float) -> list:
    """``(j, 1)`` for ``j <= ceil(p)-1`` and ``(j, omega)`` for ``j <= ceil(p)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    k = math.ceil(p)
    omega = _omega_key(p + 1 - k)
    keys = [(j, 1.0) for j in range(1, k)] + [(j, omega) for j in range(1, k + 1)]
    return sorted(set(keys))


def remainder_table(model: JointModel, p: float, budget: EvalBudget | None = None,
                    workers: int = 1) -> RemainderTable:
    entries = {key: remainder(model, key[0], key[1], budget, workers) for key in required_entries(p)}
    return RemainderTable(p, entries, model.sigma)


# ---------------------------------------------------------------------------
# expansion identity and cumulant bound


def w_cumulants(model: JointModel, order: int) -> list:
    w = model.w_values()
    mu = [1.0] + [float(model.probs @ w ** n) for n in range(1, order + 1)]
    return cumulants_from_moments(mu)


def verify_wf_expansion(model: JointModel, f_degree: int) -> float:
    """Residual ``E[W f(W)] - sum_{j<=d} kappa_{j+1}/j! E[f^{(j)}(W)]`` for ``f = x^d``."""
    if not model.exact:
        raise ModelError("expansion check needs the exact backend")
    d = f_degree
    if d < 1 or d > 12:
        raise ValueError("f_degree must lie in 1..12")
    w = model.w_values()
    kap = w_cumulants(model, d + 1)
    lhs = float(model.probs @ w ** (d + 1))
    rhs = 0.0
    for j in range(1, d + 1):
        deriv = math.perm(d, j) * float(model.probs @ w ** (d - j))
        rhs += kap[j] / math.factorial(j) * deriv
    return lhs - rhs


@dataclass
class CumulantCheck:
    lhs: float
    rhs: float
    passed: bool


def cumulant_bound_check(model: JointModel, k: int, budget: EvalBudget | None = None) -> CumulantCheck:
    """``|kappa_{k+2}(W)| <= 4^k R_{k,1}``."""
    if not model.exact:
        raise ModelError("cumulant bound check needs the exact backend")
    lhs = abs(w_cumulants(model, k + 2)[k + 1])
    rhs = 4 ** k * remainder(model, k, 1.0, budget).value
    return CumulantCheck(lhs, rhs, lhs <= rhs)


# ---------------------------------------------------------------------------
# model construction and files


def random_exact_model(rng: np.random.Generator, n_vertices: int = 4, n_innov: int = 3,
                       extra_edge_prob: float = 0.0) -> JointModel:
    """Random locally dependent model on at most ``2**n_innov`` outcomes.

    Each vertex is a centered random function of a non-empty subset of
    independent binary innovations; two vertices are adjacent when their
    subsets meet (plus optional extra edges), so the graph is a valid
    dependency graph.
    """
    ps = rng.uniform(0.2, 0.8, n_innov)
    bits = np.array([[(r >> b) & 1 for b in range(n_innov)] for r in range(2 ** n_innov)])
    probs = np.prod(np.where(bits == 1, ps, 1 - ps), axis=1)
    subsets = []
    for _ in range(n_vertices):
        mask = rng.random(n_innov) < 0.5
        if not mask.any():
            mask[rng.integers(n_innov)] = True
        subsets.append(np.flatnonzero(mask))
    values = np.empty((len(probs), n_vertices))
    for v, sub in enumerate(subsets):
        table = rng.normal(size=2 ** len(sub))
        code = (bits[:, sub] * (2 ** np.arange(len(sub)))).sum(axis=1)
        col = table[code]
        values[:, v] = col - probs @ col
    edges = []
    for a in range(n_vertices):
        for b in range(a + 1, n_vertices):
            if set(subsets[a]) & set(subsets[b]) or rng.random() < extra_edge_prob:
                edges.append((a, b))
    g = build_from_edge_list(edges, vertices=range(n_vertices))
    return JointModel(g, ExactDiscrete(probs, values))


def _vertex_from_json(v):
    return tuple(v) if isinstance(v, list) else v


def load_model_json(text: str) -> JointModel:
    """Exact model file: ``{"vertices": [...], "edges": [[a, b], ...],
    "outcomes": [{"p": prob, "values": [x_v in vertex order]}, ...]}``."""
    obj = json.loads(text)
    for key in ("vertices", "outcomes"):
        if key not in obj:
            raise ModelError(f"model file lacks key '{key}'")
    verts = [_vertex_from_json(v) for v in obj["vertices"]]
    edges = [tuple(_vertex_from_json(v) for v in e) for e in obj.get("edges", [])]
    g = build_from_edge_list(edges, vertices=verts)
    order = [verts.index(v) for v in g.vertices]
    probs = np.array([o["p"] for o in obj["outcomes"]], dtype=float)
    vals = np.array([o["values"] for o in obj["outcomes"]], dtype=float)
    if vals.ndim != 2 or vals.shape[1] != len(verts):
        raise ModelError("each outcome needs one value per declared vertex")
    return JointModel(g, ExactDiscrete(probs, vals[:, order]))


def dump_model_json(model: JointModel) -> str:
    def enc(v):
        return list(v) if isinstance(v, tuple) else v
    return json.dumps({
        "vertices": [enc(v) for v in model.graph.vertices],
        "edges": [[enc(a), enc(b)] for a, b in model.graph.edges()],
        "outcomes": [{"p": float(p), "values": [float(x) for x in row]}
                     for p, row in zip(model.probs, model.values)],
    })
