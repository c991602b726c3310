"""Command-line front end: ``locwp {bound,simulate,match,tail,stein,selftest}``.

Configuration files are INI-style (``[section]`` then ``key = value``); each
command reads its own section.  See README.md for the grammar.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds, matching, report, rsums, sim
from .depgraph import GraphError, max_neighborhood_size

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


NUMERIC_ERRORS = (ArithmeticError, matching.MatchingError, rsums.ModelError, rsums.BudgetExceeded,
                  sim.SimError, GraphError)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class Section:
    name: str
    data: dict
    base: Path

    def has(self, key):
        return key in self.data

    def str(self, key, default=None):
        if key in self.data:
            return self.data[key].strip()
        if default is None:
            raise ConfigError(f"[{self.name}] missing required key '{key}'")
        return default

    def float(self, key, default=None):
        raw = self.str(key, None if default is None else repr(default))
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] key '{key}': expected a number, got {raw!r}") from None

    def int(self, key, default=None):
        raw = self.str(key, None if default is None else str(default))
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] key '{key}': expected an integer, got {raw!r}") from None

    def floats(self, key, default=None):
        raw = self.str(key, None if default is None else ",".join(map(repr, default)))
        try:
            return [float(x) for x in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"[{self.name}] key '{key}': expected a list of numbers, got {raw!r}") from None

    def ints(self, key):
        raw = self.str(key)
        try:
            return [int(x) for x in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"[{self.name}] key '{key}': expected a list of integers, got {raw!r}") from None

    def path(self, key):
        p = Path(self.str(key))
        if not p.is_absolute():
            p = self.base / p
        if not p.exists():
            raise ConfigError(f"[{self.name}] key '{key}': file {str(p)!r} does not exist")
        return p


def bundled_configs() -> list[str]:
    root = resources.files("locwp") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_config(path: str | None, section: str) -> Section:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    base = Path.cwd()
    if path is None:
        return Section(section, {}, base)
    p = Path(path)
    try:
        if p.exists():
            parser.read_string(p.read_text(), source=str(p))
            base = p.parent
        elif path in bundled_configs():
            parser.read_string((resources.files("locwp") / "configs" / f"{path}.ini").read_text())
        else:
            raise ConfigError(f"config {path!r} not found (bundled: {', '.join(bundled_configs())})")
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    if not parser.has_section(section):
        raise ConfigError(f"config lacks section [{section}]")
    return Section(section, dict(parser.items(section)), base)


def _generator(sec: Section) -> sim.GeneratorSpec:
    kind = sec.str("kind", sec.str("generator", "mdep"))
    try:
        return sim.GeneratorSpec(
            kind=kind, n=sec.int("n", 1), m=sec.int("m", 2 if kind == "ustat" else 1),
            d=sec.int("d", 1), law=sec.str("law", "rademacher"), kernel=sec.str("kernel", "sum"))
    except sim.SimError as exc:
        raise ConfigError(f"[{sec.name}] {exc}") from None


def _policy(sec: Section) -> bounds.ConstantPolicy:
    kind = sec.str("policy", "unit")
    values = {}
    if sec.has("constants"):
        for item in sec.str("constants").split(","):
            if ":" not in item:
                raise ConfigError(f"[{sec.name}] key 'constants': expected tag:value pairs")
            k, v = item.split(":", 1)
            try:
                values[k.strip()] = float(v)
            except ValueError:
                raise ConfigError(f"[{sec.name}] key 'constants': bad value {v!r}") from None
    try:
        return bounds.ConstantPolicy(kind, values)
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] key 'policy': {exc}") from None


def _p(sec: Section, default=None) -> float:
    p = sec.float("p", default)
    if not p >= 1:
        raise ConfigError(f"[{sec.name}] key 'p': must be >= 1")
    return p


# ---------------------------------------------------------------------------
# commands; each returns (name, json-able record, table rows)


def cmd_bound(sec: Section, seed: int, workers: int):
    p = _p(sec)
    if sec.has("model"):
        try:
            model = rsums.load_model_json(sec.path("model").read_text())
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[bound] key 'model': {exc}") from None
        source = {"model": sec.str("model")}
        spec = None
    elif sec.has("kind") or sec.has("generator"):
        spec = _generator(sec)
        model = sim.joint_model(spec, reps=sec.int("reps", 20000), seed=seed)
        source = {"generator": asdict(spec)}
    else:
        raise ConfigError("[bound] needs key 'model' or a generator 'kind'")
    params = bounds.BoundParams(p, _policy(sec))
    budget = rsums.EvalBudget(sec.int("budget", 10_000_000))
    table = rsums.remainder_table(model, p, budget, workers)
    k, w = params.k, params.omega
    summ = model.summary()
    Mq = max_neighborhood_size(model.graph, k + 1)
    reports = [bounds.bound_local_wp(table, params)]
    sums = {w + 2: summ.moment_sum(w + 2), p + 2: summ.moment_sum(p + 2)}
    reports.append(bounds.bound_local_wp2(Mq.value, model.sigma, sums, params))
    brackets = []
    for j, om in sorted(table.entries):
        Mj = max_neighborhood_size(model.graph, j + 1).value
        val = bounds.bound_bracket(Mj, model.sigma, summ.moment_sum(j + 1 + om), j, om, params.policy)
        brackets.append({"j": j, "omega": om, "M": Mj, "bracket": val, "remainder": table.value(j, om)})
    per_vertex = {o: summ.vertex_moments(o) for o in (3.0, p + 2)}
    be = bounds.uniform_be_from_wp(per_vertex, model.sigma, p, params.policy)
    if spec is not None and spec.kind == "mdep":
        nondeg = max(1.0, summ.second_moment_sum / model.sigma ** 2)
        reports.append(bounds.bound_mdep_field(max(spec.m, 1), spec.d, nondeg, model.sigma,
                                               summ.moment_sum(p + 2), params))
    record = {
        "command": "bound", "source": source, "p": p, "omega": w, "seed": seed,
        "sigma": model.sigma, "exact_backend": model.exact,
        "M": {"value": Mq.value, "exact": Mq.exact, "method": Mq.method, "q": k + 1},
        "remainders": table.rows(), "brackets": brackets, "uniform_be": be,
        "reports": [r.to_dict() for r in reports], "constant_policy": params.policy.note(),
    }
    rows = [{"quantity": f"R[{r['j']},{r['omega']}]", "value": r["value"], "se": r["se"]} for r in table.rows()]
    rows += [{"quantity": r.tag, "value": r.value, "se": 0.0} for r in reports]
    rows.append({"quantity": "uniform_be", "value": be, "se": 0.0})
    return record, rows


def cmd_simulate(sec: Section, seed: int, workers: int):
    spec0 = _generator(sec)
    sizes = sec.ints("sizes")
    if len(sizes) < 3 or any(b <= a for a, b in zip(sizes, sizes[1:])) or min(sizes) < 1:
        raise ConfigError("[simulate] key 'sizes': need at least 3 increasing positive integers")
    ps = sec.floats("p", [1.0])
    if any(not q >= 1 for q in ps):
        raise ConfigError("[simulate] key 'p': orders must be >= 1")
    reps = sec.int("reps", 100000)
    batches = sec.int("batches", 200)
    fits = sim.rate_experiment(lambda n: sim.GeneratorSpec(spec0.kind, n, spec0.m, spec0.d, spec0.law, spec0.kernel),
                               sizes, ps, reps, seed, batches, workers)
    rows, fit_rec = [], []
    for q in ps:
        f = fits[q]
        rows += f.rows()
        fit_rec.append({"p": q, "slope": f.slope, "slope_se": f.slope_se, "intercept": f.intercept,
                        "converging": f.converging})
    record = {"command": "simulate", "generator": asdict(spec0), "sizes": sizes, "reps": reps,
              "batches": batches, "seed": seed, "fits": fit_rec, "rows": rows}
    return record, rows


def cmd_match(sec: Section, seed: int, workers: int):
    p = _p(sec)
    u = sec.floats("u", [])
    cp = sec.float("cp", 0.5)
    try:
        target = matching.MatchTarget(tuple(u), p, cp)
    except ValueError as exc:
        raise ConfigError(f"[match] {exc}") from None
    order = sec.int("realize_order") if sec.has("realize_order") else None
    index_size = sec.int("index_size") if sec.has("index_size") else None
    res = matching.build_match(target, order, index_size)
    record = {"command": "match", "u": list(u), "p": p, **res.to_dict()}
    rows = [{"atom": x, "weight": w} for x, w in res.atoms]
    return record, rows


def _grid(sec: Section, key: str):
    raw = sec.str(key)
    if ":" in raw:
        try:
            a, b, n = raw.split(":")
            return list(np.linspace(float(a), float(b), int(n)))
        except ValueError:
            raise ConfigError(f"[{sec.name}] key '{key}': expected start:stop:count") from None
    return sec.floats(key)


def cmd_tail(sec: Section, seed: int, workers: int):
    p = _p(sec)
    beta = sec.float("beta", 1.0)
    ts = _grid(sec, "t")
    mc = None
    if sec.has("wp"):
        wp = sec.float("wp")
        wp_source = "config"
    else:
        spec = _generator(sec)
        sample = sim.sample_w(spec, sec.int("reps", 1_000_000), seed, sec.int("batches", 200), workers)
        wp = sim.wasserstein_to_normal(sample, p)
        wp_source = "empirical"
        mc = {e.t: e for e in sim.tail_probability(sample, ts)}
    rows = []
    for t in ts:
        if t <= 0:
            raise ConfigError("[tail] key 't': grid values must be positive")
        tb = bounds.tail_bound(bounds.TailBoundQuery(t, beta, p, wp))
        row = {"t": t, "upper": tb.upper, "lower": tb.lower, "condition_ok": tb.condition_ok,
               "threshold": tb.threshold}
        if mc is not None:
            e = mc[t]
            row.update({"mc_prob": e.prob, "mc_se": e.se, "deviation": e.prob - float(bounds.norm_sf(t)),
                        "low_count": e.low_count})
        rows.append(row)
    record = {"command": "tail", "p": p, "beta": beta, "wp": wp, "wp_source": wp_source,
              "constant": bounds.tail_constant(p), "seed": seed, "rows": rows}
    return record, rows


H_BUILTIN = {
    "t": lambda t: t, "t2": lambda t: t ** 2, "t3": lambda t: t ** 3, "t4": lambda t: t ** 4,
    "cos": np.cos, "sin": np.sin, "tanh": np.tanh, "abs": np.abs,
    "cauchy": lambda t: 1 / (1 + t * t),
}


def _distribution(sec: Section):
    name = sec.str("distribution", "normal")
    if name == "normal":
        return bounds.normal_atoms()
    if name == "rademacher":
        return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
    if name.startswith("atoms"):
        try:
            pairs = [item.split("@") for item in name.split(None, 1)[1].split(",")]
            x = np.array([float(a) for a, _ in pairs])
            w = np.array([float(b) for _, b in pairs])
        except (IndexError, ValueError):
            raise ConfigError("[stein] key 'distribution': use 'atoms x1@w1, x2@w2, ...'") from None
        return x, w / w.sum()
    raise ConfigError(f"[stein] key 'distribution': unknown law {name!r}")


def cmd_stein(sec: Section, seed: int, workers: int):
    hname = sec.str("h", "t2")
    if hname not in H_BUILTIN:
        raise ConfigError(f"[stein] key 'h': choose one of {', '.join(sorted(H_BUILTIN))}")
    h = H_BUILTIN[hname]
    quad = bounds.QuadSpec()
    nh = bounds.normal_expectation(h, quad)
    rows = []
    for w in sec.floats("w", [-2.0, -1.0, 0.0, 1.0, 2.0]):
        f = bounds.stein_solve(h, w, quad, nh)
        fp = bounds.stein_derivative(h, w, quad, nh)
        rows.append({"w": w, "f": f, "fprime": fp, "ode_residual": fp - w * f - (float(h(w)) - nh)})
    x, pw = _distribution(sec)
    res = bounds.stein_residual(x, pw, h, quad, nh)
    record = {"command": "stein", "h": hname, "Nh": nh, "distribution": sec.str("distribution", "normal"),
              "residual": res, "rows": rows}
    return record, rows


def cmd_selftest(golden_path: str | None):
    from .selftest import run_selftest
    return run_selftest(golden_path)


COMMANDS = {"bound": cmd_bound, "simulate": cmd_simulate, "match": cmd_match,
            "tail": cmd_tail, "stein": cmd_stein}


def _emit(name: str, record, rows, fmt: str, out: str | None) -> str:
    if fmt == "json":
        text = report.to_json(record)
    elif fmt == "csv":
        text = report.to_csv(rows)
    else:
        text = report.to_table(rows)
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        ext = {"json": "json", "csv": "csv", "table": "txt"}[fmt]
        (d / f"{name}.{ext}").write_text(text)
        if name == "simulate":
            for f in record["fits"]:
                sub = [r for r in record["rows"] if r["p"] == f["p"]]
                (d / f"simulate_p{f['p']:g}.dat").write_text(
                    sim.two_column([r["size"] for r in sub], [r["distance"] for r in sub]))
    return text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="locwp", description="Wasserstein-p CLT certificates under local dependence")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("bound", "simulate", "match", "tail", "stein", "selftest"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI file or bundled config name")
        sp.add_argument("--seed", type=int, default=None, help="64-bit unsigned master seed")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", help="output directory (default: $OUTPUT_DIR, else stdout only)")
        sp.add_argument("--format", choices=("json", "csv", "table"), default="json")
        if name == "selftest":
            sp.add_argument("--golden", help="golden value file (default: bundled)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out or os.environ.get("OUTPUT_DIR")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.command == "selftest":
            ok, record, rows = cmd_selftest(args.golden)
            sys.stdout.write(_emit("selftest", record, rows, args.format, out))
            return EXIT_OK if ok else EXIT_NUMERIC
        sec = load_config(args.config, args.command)
        seed = args.seed if args.seed is not None else sec.int("seed", 0)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        record, rows = COMMANDS[args.command](sec, seed, args.workers)
        sys.stdout.write(_emit(args.command, record, rows, args.format, out))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
