"""Command-line surface.

Subcommands: ``evaluate`` (closed-form policy economics), ``simulate``
(Monte Carlo cycles), ``validate`` (identity suite), ``optimize``
(threshold search), ``stationary`` (content distribution table).  One
strictly-parsed config file drives everything; INI-style sections or a
JSON object with the same layout are accepted.  Outputs are deterministic
functions of (config, seed): CSV files carry a schema comment line and
full-precision, locale-independent numbers, and every file is written
atomically (temp file, then rename).

Exit codes: 0 success (an infinite average cost is an answer, not a
failure), 1 identity-suite failure, 2 config error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import math
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .cost_model import CostModel, CostParams, PenaltyFn
from .errors import DomainError
from .ig_core import IGParams
from .optimizer import SearchSpec, optimize
from .passage_laws import Policy
from .quadrature import DEFAULT_QUAD, QuadConfig
from .simulator import SimConfig, estimate_discounted, estimate_stationary, simulate_cycles
from .validation import run_validation

__all__ = ["main", "load_config", "RunConfig", "ConfigError"]

_CSV_SCHEMA_PREFIX = "# schema: igdam"


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


@dataclasses.dataclass
class RunConfig:
    params: IGParams | None = None
    policy: Policy | None = None
    cost: CostParams | None = None
    quad: QuadConfig = DEFAULT_QUAD
    sim: SimConfig | None = None
    search: SearchSpec | None = None
    output_dir: Path = Path("out")

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                section = {"params": "process", "sim": "simulation"}.get(name, name)
                raise ConfigError(f"config section [{section}] is required for this command")


_SCHEMA: dict[str, dict[str, type]] = {
    "process": {"mu": float, "sigma2": float},
    "policy": {"lambda": float, "tau": float, "release_rate": float},
    "cost": {"k1": float, "k2": float, "reward": float, "alpha": float,
             "g": str, "g_star": str},
    "quadrature": {"rel_tol": float, "abs_tol": float, "tail_mass_tol": float,
                   "max_subdivisions": int},
    "simulation": {"dt": float, "refine_factor": float, "refine_stages": int,
                   "n_cycles": int, "horizon": float, "seed": int, "burn_in": float,
                   "chunk": int, "occupancy_bins": int},
    "search": {"lambda_min": float, "lambda_max": float, "tau_min": float,
               "tau_max": float, "release_rate": float, "grid": int,
               "refine_rounds": int, "objective": str, "start": float,
               "min_gap": float},
    "output": {"dir": str},
}


def _parse_penalty(spec: str, where: str) -> PenaltyFn:
    """Penalty syntax: ``constant <c>`` or ``pwl <x>:<y> <x>:<y> ...``
    (piecewise linear between knots, constant outside the knot range)."""
    parts = spec.split()
    try:
        if parts and parts[0] == "constant" and len(parts) == 2:
            return PenaltyFn.constant(float(parts[1]))
        if parts and parts[0] == "pwl" and len(parts) >= 3:
            xs, ys = [], []
            for token in parts[1:]:
                x_str, y_str = token.split(":")
                xs.append(float(x_str))
                ys.append(float(y_str))
            return PenaltyFn.piecewise_linear(xs, ys)
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"{where}: bad penalty spec {spec!r}: {exc}") from exc
    raise ConfigError(
        f"{where}: bad penalty spec {spec!r} (want 'constant <c>' or 'pwl x:y x:y ...')"
    )


def _coerce(section: str, key: str, raw: Any) -> Any:
    want = _SCHEMA[section][key]
    try:
        if want is float:
            return float(raw)
        if want is int:
            v = float(raw)
            if v != int(v):
                raise ValueError("not an integer")
            return int(v)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {want.__name__}") from exc


def _read_sections(path: Path) -> dict[str, dict[str, Any]]:
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError(f"{path}: JSON config must be an object of section objects")
        return {str(k): dict(v) for k, v in data.items()}
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a config file (INI sections or JSON)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    sections = _read_sections(path)
    for section, items in sections.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in items:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    def grab(section: str) -> dict[str, Any] | None:
        if section not in sections:
            return None
        return {k: _coerce(section, k, v) for k, v in sections[section].items()}

    cfg = RunConfig()
    try:
        proc = grab("process")
        if proc is not None:
            cfg.params = IGParams(**proc)
        pol = grab("policy")
        if pol is not None:
            cfg.policy = Policy(lam=pol["lambda"], tau=pol["tau"], M=pol["release_rate"])
        quad = grab("quadrature")
        if quad is not None:
            cfg.quad = QuadConfig(**quad)
        cost = grab("cost")
        if cost is not None:
            cfg.cost = CostParams(
                k1=cost.get("k1", 0.0),
                k2=cost.get("k2", 0.0),
                r=cost.get("reward", 0.0),
                alpha=cost.get("alpha", 0.0),
                g=_parse_penalty(cost.get("g", "constant 0"), "[cost] g"),
                g_star=_parse_penalty(cost.get("g_star", "constant 0"), "[cost] g_star"),
            )
        sim = grab("simulation")
        if sim is not None:
            cfg.sim = SimConfig(**sim)
        search = grab("search")
        if search is not None:
            cfg.search = SearchSpec(
                lambda_range=(search["lambda_min"], search["lambda_max"]),
                tau_range=(search["tau_min"], search["tau_max"]),
                M=search.get("release_rate", 1.0),
                grid=search.get("grid", 8),
                refine_rounds=search.get("refine_rounds", 3),
                objective=search.get("objective", "average"),
                start=search.get("start"),
                min_gap=search.get("min_gap"),
            )
        out = grab("output")
        if out is not None:
            cfg.output_dir = Path(out["dir"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"incomplete config: {exc}") from exc
    except DomainError as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    return cfg


# --- output helpers -------------------------------------------------------

def _fmt(x: Any) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "infinite" if x > 0 else "-infinite"
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    return str(x)


def _json_ready(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return _fmt(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return _json_ready(obj.item())
    return obj


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(path: Path, payload: dict) -> None:
    _write_atomic(path, json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, schema: str, header: list[str], rows: list[list[Any]]) -> None:
    lines = [f"{_CSV_SCHEMA_PREFIX}.{schema}.v1", ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _write_atomic(path, "\n".join(lines) + "\n")


# --- subcommands ------------------------------------------------------------

def cmd_evaluate(cfg: RunConfig, out: Path, args) -> int:
    cfg.require("params", "policy", "cost")
    model = CostModel(cfg.params, cfg.policy, cfg.cost, cfg.quad)
    ev = model.evaluate()
    payload = {
        "discounted_total": ev.discounted_total,
        "discounted_components": ev.discounted_components.as_dict(),
        "average_rate": ev.average_rate,
        "average_components": (
            ev.average_components.as_dict() if ev.average_components else None
        ),
        "cycle_mean": ev.cycle_mean,
    }
    _write_json(out / "evaluation.json", payload)
    rows = [["discounted_total", ev.discounted_total]]
    rows += [[f"discounted_{k}", v] for k, v in ev.discounted_components.as_dict().items()]
    rows += [["average_rate", ev.average_rate]]
    if ev.average_components:
        rows += [[f"average_{k}", v] for k, v in ev.average_components.as_dict().items()]
    rows += [["cycle_mean", ev.cycle_mean]]
    _write_csv(out / "evaluation.csv", "evaluation", ["metric", "value"], rows)
    print(f"discounted_total = {_fmt(ev.discounted_total)}")
    print(f"average_rate = {_fmt(ev.average_rate)}")
    return 0


def cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    cfg.require("params", "policy", "cost", "sim")
    result = simulate_cycles(
        cfg.params, cfg.policy, cfg.cost, cfg.sim, threads=args.threads
    )
    rows = [
        [r.index, r.start_level, r.w_lambda, r.landing, r.w_tau_star, r.duration,
         r.cost_discounted, r.cost_flat, int(r.horizon_exceeded)]
        for r in result.records
    ]
    _write_csv(
        out / "cycles.csv", "cycles",
        ["index", "start_level", "w_lambda", "landing", "w_tau_star", "duration",
         "cost_discounted", "cost_flat", "horizon_exceeded"],
        rows,
    )
    est = result.estimates()
    payload: dict[str, Any] = {
        name: {"value": v, "se": se} for name, (v, se) in est.items()
    }
    if cfg.cost.alpha > 0:
        try:
            v, se = estimate_discounted(result)
            payload["discounted_total"] = {"value": v, "se": se}
        except Exception as exc:  # insufficient blocks is an answer, not a crash
            payload["discounted_total"] = {"error": str(exc)}
    payload["cycles_exceeding_horizon"] = result.n_exceeded
    _write_json(out / "estimates.json", payload)
    grid, occ = estimate_stationary(result)
    _write_csv(
        out / "occupancy.csv", "occupancy", ["z", "F_empirical"],
        [[z, f] for z, f in zip(grid, occ)],
    )
    print(f"simulated {len(result.records)} cycles ({result.n_exceeded} hit the horizon)")
    return 0


def cmd_validate(cfg: RunConfig, out: Path, args) -> int:
    cfg.require("params", "policy")
    u_override = None
    if args.negative_control:
        # deliberate sign flip of the erfc term: the transform identity must fail
        def u_override(alpha: float, y):
            from .resolvents import ResolventDensity

            res = ResolventDensity(cfg.params, alpha, cfg.quad)
            y = np.asarray(y, dtype=float)
            mu, s = cfg.params.mu, cfg.params.sigma
            first = s / np.sqrt(y) * np.exp(-0.5 * y * mu * mu / (s * s)) / math.sqrt(2 * math.pi)
            return 2.0 * first - res.density(y)

    checks = run_validation(cfg.params, cfg.policy, cfg.cost, cfg.quad, u_override)
    width = max(len(c.name) for c in checks)
    failed = 0
    for c in checks:
        if c.skipped:
            status = "SKIP"
            detail = c.note
        else:
            status = "pass" if c.passed else "FAIL"
            detail = f"residual {c.residual:.3e} vs tol {c.tolerance:.1e}"
            failed += 0 if c.passed else 1
        print(f"{c.name:<{width}}  {status}  {detail}")
    print(f"{len(checks)} checks, {failed} failed")
    return 1 if failed else 0


def cmd_optimize(cfg: RunConfig, out: Path, args) -> int:
    cfg.require("params", "cost", "search")
    result = optimize(cfg.params, cfg.cost, cfg.search, cfg.quad)
    _write_csv(
        out / "trace.csv", "trace", ["lambda", "tau", "objective"],
        [list(row) for row in result.trace],
    )
    payload = {
        "status": result.status,
        "objective": result.value,
        "evaluations": result.evaluations,
        "policy": None if result.best is None else {
            "lambda": result.best.lam, "tau": result.best.tau,
            "release_rate": result.best.M,
        },
    }
    _write_json(out / "best.json", payload)
    if result.status == "ok":
        print(
            f"best policy: lambda={_fmt(result.best.lam)} tau={_fmt(result.best.tau)} "
            f"objective={_fmt(result.value)}"
        )
    else:
        print("infeasible: every candidate policy has infinite objective")
    return 0


def cmd_stationary(cfg: RunConfig, out: Path, args) -> int:
    cfg.require("params", "policy")
    model = CostModel(
        cfg.params, cfg.policy,
        cfg.cost or CostParams(0, 0, 0, 0, PenaltyFn.constant(0), PenaltyFn.constant(0)),
        cfg.quad,
    )
    if cfg.sim is not None:
        result = simulate_cycles(
            cfg.params, cfg.policy,
            cfg.cost or CostParams(0, 0, 0, 0, PenaltyFn.constant(0), PenaltyFn.constant(0)),
            cfg.sim, threads=args.threads,
        )
        grid, emp = estimate_stationary(result)
        analytic = model.stationary_cdf(grid)
        rows = [[z, a, e, abs(a - e)] for z, a, e in zip(grid, analytic, emp)]
        header = ["z", "F_analytic", "F_empirical", "gap"]
    else:
        from .simulator import occupancy_grid

        grid = occupancy_grid(cfg.params, cfg.policy)
        analytic = model.stationary_cdf(grid)
        rows = [[z, a] for z, a in zip(grid, analytic)]
        header = ["z", "F_analytic"]
    _write_csv(out / "stationary.csv", "stationary", header, rows)
    print(f"wrote stationary distribution on {len(grid)} levels")
    return 0


_COMMANDS = {
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "optimize": cmd_optimize,
    "stationary": cmd_stationary,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igdam",
        description="Two-threshold release control of an inverse-Gaussian-fed store",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="path to the run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the simulation seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for simulation")
        if name == "validate":
            p.add_argument(
                "--negative-control", action="store_true",
                help="flip a sign inside the resolvent density; the suite must fail",
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None and cfg.sim is not None:
            cfg.sim = dataclasses.replace(cfg.sim, seed=args.seed)
        if args.out is not None:
            cfg.output_dir = Path(args.out)
        out = cfg.output_dir
        return _COMMANDS[args.command](cfg, out, args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
