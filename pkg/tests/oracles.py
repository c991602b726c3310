"""Independent reference implementations used only by the tests."""

import itertools
import math

import numpy as np


def cumulants_by_recursion(mu):
    """kappa_n = mu_n - sum_{m<n} C(n-1, m-1) kappa_m mu_{n-m}; returns [kappa_1..]."""
    kap = []
    for n in range(1, len(mu)):
        s = mu[n]
        for m in range(1, n):
            s -= math.comb(n - 1, m - 1) * kap[m - 1] * mu[n - m]
        kap.append(s)
    return kap


def atom_cumulants(atoms, order):
    x = np.array([a for a, _ in atoms])
    w = np.array([b for _, b in atoms])
    mu = [float(w @ x ** n) / float(w.sum()) for n in range(order + 1)]
    return cumulants_by_recursion(mu)


def _nbhd(g, idx):
    out = set()
    for v in idx:
        out |= g.closed_neighborhood(v)
    return sorted(out, key=g.index)


def r11_nested(model):
    """Displayed R_{1,1}: sum_i sum_{j in N(i)} sum_{k in N(i,j)} (E|XiXjXk| + E|XiXj| E|Xk|) / sigma^3."""
    g, P, X = model.graph, model.probs, np.abs(model.values)
    c = {v: X[:, g.index(v)] for v in g.vertices}
    total = 0.0
    for i in g.vertices:
        for j in _nbhd(g, [i]):
            for k in _nbhd(g, [i, j]):
                total += P @ (c[i] * c[j] * c[k]) + (P @ (c[i] * c[j])) * (P @ c[k])
    return total / model.sigma ** 3


def r21_nested(model):
    """Displayed R_{2,1} with the [4], [3,1] and [2,2] terms, over sigma^4."""
    g, P, X = model.graph, model.probs, np.abs(model.values)
    c = {v: X[:, g.index(v)] for v in g.vertices}
    total = 0.0
    for i in g.vertices:
        for j in _nbhd(g, [i]):
            for k in _nbhd(g, [i, j]):
                for l in _nbhd(g, [i, j, k]):
                    total += (P @ (c[i] * c[j] * c[k] * c[l])
                              + (P @ (c[i] * c[j] * c[k])) * (P @ c[l])
                              + (P @ (c[i] * c[j])) * (P @ (c[k] * c[l])))
    return total / model.sigma ** 4


def brute_joint(values_fn, n_innov):
    """Uniform law over all +-1 innovation vectors mapped through ``values_fn``."""
    eps = np.array(list(itertools.product((-1.0, 1.0), repeat=n_innov)))
    return np.full(len(eps), 1.0 / len(eps)), values_fn(eps)
