"""Command-line front end for the benchmark harness.

Emits plot-ready CSV (UTF-8, LF, RFC 4180). Exit codes: 0 success,
1 usage/config/IO error, 2 at least one scheme diverged (data still
written). All output is a pure function of the flag set, seed included.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .experiments import (
    ProblemSpec,
    estimate_order,
    generate_problem,
    run_error_series,
    sweep_stepsizes,
)
from .integrators import SchemeId

_DEFAULTS = {
    "mode": "run",
    "scheme": ["ksl"],
    "rank": 10,
    "eps": 1e-3,
    "h": [1e-3],
    "seed": 0,
    "m": 100,
    "n": 100,
    "core_rank": 10,
    "t_end": 1.0,
    "out": "-",
}


class _Parser(argparse.ArgumentParser):
    # Spec reserves exit code 2 for divergence-with-data; usage errors are 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    p = _Parser(
        prog="dlra",
        description="Low-rank splitting-integrator benchmark runner.",
    )
    p.add_argument("--mode", choices=["run", "order", "sweep"], default=None)
    p.add_argument(
        "--scheme",
        action="append",
        choices=[s.value for s in SchemeId],
        default=None,
        help="scheme to run; repeatable",
    )
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument(
        "--h", action="append", type=float, default=None, help="stepsize; repeatable"
    )
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--core-rank", dest="core_rank", type=int, default=None)
    p.add_argument("--t-end", dest="t_end", type=float, default=None)
    p.add_argument("--out", default=None, help="output CSV path, '-' for stdout")
    p.add_argument("--config", default=None, help="JSON config file; flags override")
    return p


def _load_config(config_path: Optional[str]) -> dict:
    if config_path is None:
        return {}
    with open(config_path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    unknown = set(cfg) - set(_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("scheme", "h"):
        if key in cfg and not isinstance(cfg[key], list):
            cfg[key] = [cfg[key]]
    return cfg


def _merge(args: argparse.Namespace, cfg: dict) -> dict:
    merged = dict(_DEFAULTS)
    merged.update(cfg)
    for key in _DEFAULTS:
        value = getattr(args, key)
        if value is not None:
            merged[key] = value
    return merged


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_rows(out: str, header: Sequence[str], rows: list[Sequence[str]]) -> None:
    text = ",".join(header) + "\n" + "".join(",".join(row) + "\n" for row in rows)
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def cmd_run(options: dict) -> int:
    spec = _spec_from(options)
    schemes = [SchemeId(s) for s in options["scheme"]]
    h = options["h"][0]
    path = generate_problem(spec)
    rows = []
    diverged = False
    for scheme in schemes:
        series = run_error_series(scheme, spec, options["rank"], h, path=path)
        diverged = diverged or series.status != "ok"
        for i, t in enumerate(series.times):
            status = "ok" if series.ok[i] else "diverged"
            rows.append(
                (
                    _fmt(t),
                    scheme.value,
                    _fmt(series.errors[i]),
                    _fmt(series.best_errors[i]),
                    status,
                )
            )
    _write_rows(
        options["out"],
        ("t", "scheme", "error_fro", "best_rank_error", "status"),
        rows,
    )
    return 2 if diverged else 0


def cmd_order(options: dict) -> int:
    spec = _spec_from(options)
    schemes = [SchemeId(s) for s in options["scheme"]]
    h = options["h"][0]
    path = generate_problem(spec)
    rows = []
    failed = False
    for scheme in schemes:
        est = estimate_order(scheme, spec, options["rank"], h, path=path)
        if est.status != "ok":
            rows.append((scheme.value, "failed", "failed"))
            failed = True
        else:
            p = "undefined" if est.p is None else _fmt(est.p)
            rows.append((scheme.value, p, _fmt(est.final_error)))
    _write_rows(options["out"], ("scheme", "p", "final_error"), rows)
    return 2 if failed else 0


def cmd_sweep(options: dict) -> int:
    spec = _spec_from(options)
    schemes = [SchemeId(s) for s in options["scheme"]]
    path = generate_problem(spec)
    cells = sweep_stepsizes(schemes, spec, options["rank"], options["h"], path=path)
    rows = [
        (
            cell.scheme.value,
            _fmt(cell.h),
            _fmt(cell.final_error),
            cell.status,
        )
        for cell in cells
    ]
    _write_rows(options["out"], ("scheme", "h", "final_error", "status"), rows)
    return 2 if any(cell.status != "ok" for cell in cells) else 0


def _spec_from(options: dict) -> ProblemSpec:
    return ProblemSpec(
        m=options["m"],
        n=options["n"],
        core_rank=options["core_rank"],
        eps=options["eps"],
        seed=options["seed"],
        t_end=options["t_end"],
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load_config(args.config)
        options = _merge(args, cfg)
        if not options["h"]:
            raise ValueError("at least one --h is required")
        handler = {"run": cmd_run, "order": cmd_order, "sweep": cmd_sweep}[
            options["mode"]
        ]
        return handler(options)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"dlra: error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
