"""Numerical solution of the normal Stein equation ``f' - w f = h - Nh``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class QuadSpec:
    """Panel Gauss-Legendre rule for the Stein integral.

    ``cutoff`` truncates the integral where the Gaussian factor drops below
    it; ``fd_step`` scales the central-difference step as ``fd_step*(1+|w|)``.
    """

    panels: int = 48
    order: int = 20
    cutoff: float = 1e-18
    hermite_nodes: int = 120
    fd_step: float = 1e-5


def normal_expectation(h: Callable, quad: QuadSpec = QuadSpec()) -> float:
    """``E h(Z)`` by Gauss-Hermite (probabilists') quadrature."""
    x, w = np.polynomial.hermite_e.hermegauss(quad.hermite_nodes)
    return float(np.dot(w, np.asarray(h(x), dtype=float)) / math.sqrt(2 * math.pi))


def _panel_rule(length: float, quad: QuadSpec):
    x, w = np.polynomial.legendre.leggauss(quad.order)
    edges = np.linspace(0.0, length, quad.panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    return s, ws


def _solve_side(h: Callable, w: float, nh: float, left: bool, quad: QuadSpec) -> float:
    # left:  f(w) =  int_0^inf e^{ w s - s^2/2} (h(w - s) - Nh) ds
    # right: f(w) = -int_0^inf e^{-w s - s^2/2} (h(w + s) - Nh) ds
    a = w if left else -w
    c = -math.log(quad.cutoff)
    smax = a + math.sqrt(a * a + 2 * c)
    s, ws = _panel_rule(smax, quad)
    kern = np.exp(a * s - s * s / 2)
    pts = w - s if left else w + s
    vals = np.asarray(h(pts), dtype=float) - nh
    out = float(np.dot(ws, kern * vals))
    if not math.isfinite(out):
        raise ArithmeticError(f"Stein quadrature did not converge at w={w}")
    return out if left else -out


def stein_solve(h: Callable, w: float, quad: QuadSpec = QuadSpec(), nh: float | None = None,
                side: str | None = None) -> float:
    """``f_h(w)`` from the left integral for ``w <= 0`` and the right one otherwise.

    ``h`` must accept numpy arrays.  ``side`` forces ``"left"`` or ``"right"``.
    """
    if nh is None:
        nh = normal_expectation(h, quad)
    left = (w <= 0) if side is None else side == "left"
    return _solve_side(h, float(w), nh, left, quad)


def stein_derivative(h: Callable, w: float, quad: QuadSpec = QuadSpec(), nh: float | None = None) -> float:
    """Central difference of ``f_h`` evaluated with one fixed representation."""
    if nh is None:
        nh = normal_expectation(h, quad)
    side = "left" if w <= 0 else "right"
    step = quad.fd_step * (1 + abs(w))
    return (stein_solve(h, w + step, quad, nh, side) - stein_solve(h, w - step, quad, nh, side)) / (2 * step)


def stein_residual(atoms: Sequence[float], weights: Sequence[float], h: Callable,
                   quad: QuadSpec = QuadSpec(), nh: float | None = None) -> float:
    """``E[f'(W) - W f(W)] - (E h(W) - Nh)`` for an atomic law of ``W``.

    Continuous laws enter through a quadrature rule (see :func:`normal_atoms`).
    """
    atoms = np.asarray(atoms, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if nh is None:
        nh = normal_expectation(h, quad)
    lhs = 0.0
    for x, p in zip(atoms, weights):
        f = stein_solve(h, x, quad, nh)
        lhs += p * (stein_derivative(h, x, quad, nh) - x * f)
    rhs = float(np.dot(weights, np.asarray(h(atoms), dtype=float))) - nh
    return lhs - rhs


def normal_atoms(n: int = 40):
    """Gauss-Hermite nodes and weights standing in for ``N(0,1)``."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / math.sqrt(2 * math.pi)
