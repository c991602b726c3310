"""Built-in checks of each module against stored golden values."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np


def _checks() -> dict:
    from . import bounds, combinat, cumulants, matching, rsums
    from .depgraph import build_from_edge_list, build_mdependent_lattice, max_neighborhood_size

    def single_vertex():
        g = build_from_edge_list([], vertices=[0])
        m = rsums.JointModel(g, rsums.ExactDiscrete(np.array([0.5, 0.5]), np.array([[-1.0], [1.0]])))
        return rsums.remainder(m, 1, 1.0).value

    def two_vertices():
        g = build_from_edge_list([], vertices=[0, 1])
        x = np.array([[a, b] for a in (-1.0, 1.0) for b in (-1.0, 1.0)])
        m = rsums.JointModel(g, rsums.ExactDiscrete(np.full(4, 0.25), x))
        return rsums.remainder(m, 1, 1.0).value

    def g_roundtrip():
        err = 0.0
        for t in (0.5, 1.0, 3.0):
            for y in (0.1, 0.5, 0.9):
                err = max(err, abs(bounds.g_t(bounds.g_inverse(t, y), t, 1.0) - y))
        return err

    line = build_mdependent_lattice([(i,) for i in range(10)], 1)
    return {
        "compositions_count_5": lambda: len(combinat.compositions(5)),
        "compositions_star_count_4": lambda: len(combinat.compositions_star(4)),
        "sign_sequences_count_2": lambda: len(combinat.sign_sequences(2)),
        "max_neighborhood_line_q2": lambda: max_neighborhood_size(line, 2).value,
        "normal_moment_6": lambda: float(cumulants.moments_from_cumulants([0, 1, 0, 0, 0, 0])[6]),
        "normal_hankel_2": lambda: float(cumulants.hankel_det([1, 0, 1, 0, 3], 2)),
        "remainder_single_rademacher": single_vertex,
        "remainder_two_rademacher": two_vertices,
        "match_q_u001": lambda: matching.choose_q(matching.MatchTarget((0.01,), 2.0)),
        "stein_t2_at_1.5": lambda: bounds.stein_solve(lambda t: t ** 2, 1.5),
        "g_inverse_roundtrip": g_roundtrip,
        "tail_constant_p1": lambda: bounds.tail_constant(1.0),
    }


def _load_golden(path: str | None) -> dict:
    if path is None:
        text = (resources.files("locwp") / "golden" / "selftest.json").read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text)["checks"]


def run_selftest(golden_path: str | None = None):
    """Returns ``(ok, record, rows)``; each row names one check."""
    try:
        golden = _load_golden(golden_path)
        if not isinstance(golden, dict):
            raise TypeError("'checks' must be an object")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        row = {"check": "golden_file", "value": math.nan, "expected": math.nan, "passed": False,
               "note": f"golden file unreadable: {exc}"}
        return False, {"command": "selftest", "passed": False, "checks": [row]}, [row]
    rows = []
    for name, fn in _checks().items():
        value = float(fn())
        entry = golden.get(name)
        try:
            expected, tol = float(entry["value"]), float(entry["tol"])
        except (TypeError, KeyError, ValueError):
            rows.append({"check": name, "value": value, "expected": math.nan, "passed": False,
                         "note": "golden entry missing or malformed"})
            continue
        ok = abs(value - expected) <= tol
        rows.append({"check": name, "value": value, "expected": expected, "passed": ok,
                     "note": "" if ok else f"off by {abs(value - expected):.3g} (tol {tol:g})"})
    passed = all(r["passed"] for r in rows)
    return passed, {"command": "selftest", "passed": passed, "checks": rows}, rows
