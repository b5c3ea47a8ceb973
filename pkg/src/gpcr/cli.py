"""Command-line front end.

Every command reads a game from ``--variant`` plus ``--graph`` (an edge-list
file) or from ``--game`` (a JSON game document, ``--variant spec``). Options
may also come from a TOML file given with ``--config``; the command line wins.
Errors print one line ``error[CODE]: message`` on stderr and exit with 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis import BoundaryUndecided, expected_capture_time, p_cop_number
from .game import GameError, GameSpec, loads
from .games import SurvivalProfile, build_temporal, build_variant
from .graph import Graph, GraphError, parse_edge_list
from .oracle import OracleBudgetExceeded, enumerate_value, expectimax_value
from .solver import classify, limit_value, value_iterate
from .ssg import export_ssg, to_ssg

VARIANTS = ("classic", "drunk", "drunk-defending", "random-robber", "fast-defending", "temporal-classic", "temporal-drunk", "spec")


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    variant: str = "classic"
    graph: str | None = None
    game: str | None = None
    temporal: list[str] = field(default_factory=list)
    horizon: int | None = None
    epsilon: float = 1e-12
    max_iter: int | None = None
    p: float = 1.0
    k: int = 1
    k_max: int = 3
    seed: int = 0
    out: str | None = None
    format: str | None = None
    capture: Any = None
    survival: float | None = None
    stay_mode: str = "free"
    phi: str | None = None
    limit: bool = False

    def check(self) -> None:
        if self.variant not in VARIANTS:
            raise CliError("E_CONFIG", f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.horizon is not None and self.horizon < 0:
            raise CliError("E_CONFIG", "horizon must be nonnegative")
        if not 0.0 <= self.p <= 1.0:
            raise CliError("E_CONFIG", "p must lie in [0, 1]")
        if self.k < 1 or self.k_max < 1:
            raise CliError("E_CONFIG", "cop counts must be positive")
        if self.stay_mode not in ("free", "loop"):
            raise CliError("E_CONFIG", "stay-mode must be 'free' or 'loop'")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError("E_IO", f"cannot read {path}: {exc.strerror or exc}") from None


def _load_graph(path: str) -> Graph:
    try:
        return parse_edge_list(_read(path))
    except GraphError as exc:
        raise CliError("E_GRAPH", f"{path}: {exc}") from None


def _capture(value: Any) -> Any:
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [Fraction(str(v)) for v in value]
    if isinstance(value, str) and "," in value:
        return [Fraction(v.strip()) for v in value.split(",")]
    return Fraction(str(value))


def build_game(cfg: RunConfig) -> GameSpec:
    if cfg.variant == "spec":
        if not cfg.game:
            raise CliError("E_CONFIG", "--variant spec needs --game FILE")
        try:
            return loads(_read(cfg.game))
        except (ValueError, KeyError, TypeError) as exc:
            raise CliError("E_GAME", f"{cfg.game}: {exc}") from None
    if cfg.variant.startswith("temporal-"):
        if not cfg.temporal:
            raise CliError("E_CONFIG", "temporal variants need --temporal FILE [FILE ...]")
        return build_temporal([_load_graph(p) for p in cfg.temporal], cfg.variant.split("-", 1)[1])
    if not cfg.graph:
        raise CliError("E_CONFIG", "--graph FILE is required")
    g = _load_graph(cfg.graph)
    phi = None
    if cfg.phi:
        try:
            raw = json.loads(_read(cfg.phi))
            phi = {int(r): {int(x): Fraction(str(p)) for x, p in d.items()} for r, d in raw.items()}
        except (ValueError, AttributeError) as exc:
            raise CliError("E_CONFIG", f"{cfg.phi}: bad robber kernel table: {exc}") from None
    survival = None if cfg.survival is None else SurvivalProfile(Fraction(str(cfg.survival)))
    return build_variant(cfg.variant, g, cops=cfg.k, capture=_capture(cfg.capture), survival=survival, phi=phi, stay_mode=cfg.stay_mode)


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(f"{x:.17g}"))


# ----------------------------------------------------------------------------
# Commands


def cmd_solve(cfg: RunConfig) -> str:
    spec = build_game(cfg)
    fmt = cfg.format or "csv"
    rows: list[tuple[str, str, float, str]] = []
    if cfg.limit:
        res = limit_value(spec, cfg.epsilon, cfg.max_iter)
        for s in range(spec.state_count):
            rows.append(("inf", spec.display(s), float(res.values[s]), spec.cop_action_labels[res.cop(s)]))
    else:
        n = 10 if cfg.horizon is None else cfg.horizon
        table = value_iterate(spec, n, keep_all=True)
        for k in range(n + 1):
            for s in range(spec.state_count):
                a = table.argmax_cop[k, s]
                rows.append((str(k), spec.display(s), float(table.values[k, s]), spec.cop_action_labels[a] if a >= 0 else ""))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["horizon", "state", "value", "cop_action"])
        for h, s, v, a in rows:
            w.writerow([h, s, repr(v), a])
        return buf.getvalue()
    if fmt == "structured":
        return json.dumps([{"horizon": h, "state": s, "value": v, "cop_action": a} for h, s, v, a in rows], indent=1) + "\n"
    raise CliError("E_CONFIG", f"solve supports csv and structured output, not {fmt!r}")


def cmd_classify(cfg: RunConfig) -> str:
    spec = build_game(cfg)
    res = classify(spec, p=cfg.p, n=cfg.horizon, epsilon=max(cfg.epsilon, 1e-12), max_iter=cfg.max_iter)
    return res.label + "\n"


def cmd_strategy(cfg: RunConfig) -> str:
    spec = build_game(cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if cfg.horizon is None:
        res = limit_value(spec, cfg.epsilon, cfg.max_iter)
        w.writerow(["state", "cop_action", "robber_action"])
        for s in range(spec.state_count):
            w.writerow([spec.display(s), spec.cop_action_labels[res.cop(s)], spec.rob_action_labels[res.rob(s)]])
    else:
        table = value_iterate(spec, cfg.horizon)
        w.writerow(["turns_remaining", "state", "cop_action", "robber_action"])
        for k in range(1, cfg.horizon + 1):
            for s in range(spec.state_count):
                w.writerow([k, spec.display(s), spec.cop_action_labels[table.argmax_cop[k, s]], spec.rob_action_labels[table.argmin_rob[k, s]]])
    return buf.getvalue()


def cmd_cop_number(cfg: RunConfig) -> str:
    if cfg.variant in ("spec", "fast-defending") or cfg.variant.startswith("temporal-"):
        raise CliError("E_CONFIG", f"cop-number needs a graph variant with cop teams, not {cfg.variant!r}")
    if not cfg.graph:
        raise CliError("E_CONFIG", "--graph FILE is required")
    g = _load_graph(cfg.graph)
    params = {}
    if cfg.capture is not None:
        params["capture"] = _capture(cfg.capture)
    k = p_cop_number(cfg.variant, g, cfg.p, cfg.horizon, cfg.k_max, epsilon=max(cfg.epsilon, 1e-12), **params)
    return (str(k) if k is not None else f"> {cfg.k_max}") + "\n"


def cmd_capture_time(cfg: RunConfig) -> str:
    spec = build_game(cfg)
    res = limit_value(spec, cfg.epsilon, cfg.max_iter if cfg.max_iter is not None else max(10 * spec.state_count, 100_000))
    return _fmt(expected_capture_time(spec, res.cop, res.rob)) + "\n"


def cmd_export_ssg(cfg: RunConfig) -> str:
    spec = build_game(cfg)
    fmt = cfg.format or "structured"
    if fmt not in ("dot", "structured"):
        raise CliError("E_CONFIG", f"export-ssg supports dot and structured output, not {fmt!r}")
    return export_ssg(to_ssg(spec), fmt)


def cmd_oracle_check(cfg: RunConfig) -> tuple[str, bool]:
    spec = build_game(cfg)
    n = 2 if cfg.horizon is None else cfg.horizon
    solver = float(value_iterate(spec, n, keep_choices=False).final[spec.initial])
    lines = [f"horizon {n}", f"value_iterate {solver!r}"]
    ok = True
    exact = []
    for name, fn in (("enumerate_value", enumerate_value), ("expectimax_value", expectimax_value)):
        try:
            v = fn(spec, n)
        except OracleBudgetExceeded as exc:
            lines.append(f"{name} skipped ({exc})")
            continue
        exact.append(v)
        match = abs(float(v) - solver) <= 1e-9
        ok &= match
        lines.append(f"{name} {v} {'ok' if match else 'MISMATCH'}")
    if len(exact) == 2 and exact[0] != exact[1]:
        ok = False
        lines.append("oracles disagree: MISMATCH")
    if not exact:
        raise OracleBudgetExceeded(f"no oracle fits its budget at horizon {n}")
    lines.append("PASS" if ok else "FAIL")
    return "\n".join(lines) + "\n", ok


COMMANDS = {
    "solve": cmd_solve,
    "classify": cmd_classify,
    "strategy": cmd_strategy,
    "cop-number": cmd_cop_number,
    "capture-time": cmd_capture_time,
    "export-ssg": cmd_export_ssg,
    "oracle-check": cmd_oracle_check,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        print(f"error[E_USAGE]: {message}", file=sys.stderr)
        raise SystemExit(1)


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gpcr", description="Solve and analyse probabilistic cops-and-robbers games.")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML file with default options")
    common.add_argument("--variant", choices=VARIANTS)
    common.add_argument("--graph", help="edge-list file")
    common.add_argument("--game", help="JSON game file (variant 'spec')")
    common.add_argument("--temporal", nargs="+", help="edge-list files G_0 .. G_T")
    common.add_argument("--horizon", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--max-iter", type=int, dest="max_iter")
    common.add_argument("--p", type=float)
    common.add_argument("--k", type=int, help="number of cops")
    common.add_argument("--k-max", type=int, dest="k_max")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "structured", "dot"))
    common.add_argument("--capture", help="capture probability, or comma-separated per-vertex list")
    common.add_argument("--survival", type=float, help="survival probability on watched edges")
    common.add_argument("--stay-mode", dest="stay_mode", choices=("free", "loop"))
    common.add_argument("--phi", help="JSON robber kernel table {r: {r': prob}}")
    common.add_argument("--limit", action="store_true", default=None, help="solve for the limit value")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base: dict[str, Any] = {}
    cfg_dir = Path(".")
    if args.config:
        try:
            base = tomllib.loads(_read(args.config))
        except tomllib.TOMLDecodeError as exc:
            raise CliError("E_CONFIG", f"{args.config}: {exc}") from None
        cfg_dir = Path(args.config).parent
        flat: dict[str, Any] = {}
        for key, val in base.items():
            if isinstance(val, dict):
                flat.update({k.replace("-", "_"): v for k, v in val.items()})
            else:
                flat[key.replace("-", "_")] = val
        base = flat
    known = {f.name for f in fields(RunConfig)}
    unknown = set(base) - known
    if unknown:
        raise CliError("E_CONFIG", f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("graph", "game", "phi"):
        if isinstance(base.get(key), str):
            base[key] = str(cfg_dir / base[key])
    if isinstance(base.get("temporal"), list):
        base["temporal"] = [str(cfg_dir / p) for p in base["temporal"]]
    merged = dict(base)
    for key in known:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise CliError("E_CONFIG", str(exc)) from None
    cfg.check()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        result = COMMANDS[args.command](cfg)
        ok = True
        if isinstance(result, tuple):
            result, ok = result
        if cfg.out:
            try:
                Path(cfg.out).write_text(result)
            except OSError as exc:
                raise CliError("E_IO", f"cannot write {cfg.out}: {exc.strerror or exc}") from None
        else:
            sys.stdout.write(result)
        if not ok:
            print("error[E_MISMATCH]: oracle check failed", file=sys.stderr)
            return 1
        return 0
    except CliError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
    except BoundaryUndecided as exc:
        print(f"error[E_UNDECIDED]: {exc}", file=sys.stderr)
    except GraphError as exc:
        print(f"error[E_GRAPH]: {exc}", file=sys.stderr)
    except GameError as exc:
        print(f"error[E_GAME]: {exc}", file=sys.stderr)
    except OracleBudgetExceeded as exc:
        print(f"error[E_BUDGET]: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
