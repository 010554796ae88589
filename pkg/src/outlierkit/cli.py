"""Command line client of the detection service.

The CLI is a thin client: it parses arguments, reads the input CSV,
posts a request to the service API and renders the response.  By default
the service runs in process (no network); ``--server URL`` targets a
remote instance instead, in which case the remote's cache is used.

Exit codes: 0 a decision was rendered (including "no outliers"),
1 usage or configuration errors, 2 data errors, 3 internal errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import httpx

from . import __version__
from .errors import ConfigError, DataError, OutlierKitError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


# ---------------------------------------------------------------------------
# data ingestion
# ---------------------------------------------------------------------------


def ingest_csv(path: str | Path, column: str | None = None) -> tuple[list[float], list[int]]:
    """Read one numeric column; returns values and 1-based row numbers.

    ``column`` is a 1-based index or a header name; default is the first
    column.  The first row is treated as a header when its target cell
    does not parse as a number.  Cells must be finite decimals.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file {path} does not exist")
    with path.open(newline="", encoding="utf-8") as handle:
        rows = [row for row in csv.reader(handle) if any(cell.strip() for cell in row)]
    if not rows:
        raise DataError(f"{path}: no data rows")

    col_index: int | None = None
    header: list[str] | None = None
    if column is not None:
        try:
            col_index = int(column) - 1
            if col_index < 0:
                raise DataError(f"column index must be >= 1, got {column}")
        except ValueError:
            header = [cell.strip() for cell in rows[0]]
            if column not in header:
                raise DataError(f"{path}: no column named {column!r} in header {header}") from None
            col_index = header.index(column)
    else:
        col_index = 0

    start = 0
    if header is not None:
        start = 1
    else:
        probe = rows[0][col_index] if col_index < len(rows[0]) else ""
        try:
            float(probe)
        except ValueError:
            start = 1  # header row

    values: list[float] = []
    labels: list[int] = []
    for row_number, row in enumerate(rows[start:], start=1):
        if col_index >= len(row):
            raise DataError(f"{path}: row {row_number} has no column {col_index + 1}")
        cell = row[col_index].strip()
        try:
            value = float(cell)
        except ValueError:
            raise DataError(
                f"{path}: row {row_number}, column {col_index + 1}: cannot parse {cell!r}"
            ) from None
        if not math.isfinite(value):
            raise DataError(
                f"{path}: row {row_number}, column {col_index + 1}: value {cell!r} is not finite"
            )
        values.append(value)
        labels.append(row_number)
    if not values:
        raise DataError(f"{path}: no numeric data found")
    return values, labels


# ---------------------------------------------------------------------------
# service client
# ---------------------------------------------------------------------------


class ServiceClient:
    """HTTP client; in-process ASGI by default, remote with --server."""

    def __init__(self, server: str | None, cache: str | None):
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DeprecationWarning)
                from fastapi.testclient import TestClient

            from .service import ServiceSettings, create_app

            settings = ServiceSettings(cache_path=Path(cache) if cache else None)
            self._client = TestClient(create_app(settings))

    def post(self, route: str, payload: dict) -> dict:
        response = self._client.post(route, json=payload)
        if response.status_code >= 500:
            raise OutlierKitError(f"service error {response.status_code}: {response.text}")
        if response.status_code >= 400:
            detail = response.json().get("detail", response.text)
            if isinstance(detail, list):  # pydantic validation errors
                detail = "; ".join(e.get("msg", str(e)) for e in detail)
                raise ConfigError(f"invalid request: {detail}")
            if response.status_code == 422:
                raise DataError(str(detail))
            raise ConfigError(str(detail))
        return response.json()

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _render_detect_text(res: dict) -> str:
    lines = []
    n_out = len(res["outliers"])
    verdict = "no outliers" if res["decision"] == "no_outliers" else f"{n_out} outliers"
    lines.append(f"decision: {verdict} (n={res['n']}, method={res['method']}, family={res['family']})")
    fit = res["fit"]
    lines.append(f"fit: mu={fit['mu']:.6g} sigma={fit['sigma']:.6g} ({fit['estimator']})")
    for cv in res["critical_values"]:
        scope = "asymptotic" if cv["n"] is None else f"n={cv['n']}"
        src = "cache" if cv["cached"] else "simulated"
        lines.append(
            f"critical value [{cv['method']}/{cv['side']}/alpha={cv['alpha']:g}/{scope}]: "
            f"{cv['value']:.6f} ({src}, {cv['replicates']} replicates, seed {cv['seed']})"
        )
    for warning in res["warnings"]:
        lines.append(f"warning: {warning}")
    if res["outliers"]:
        lines.append("outliers:")
        lines.append("  index      value          z  side")
        by_index = {o["index"]: o for o in res["observations"]}
        for idx in res["outliers"]:
            o = by_index[idx]
            lines.append(f"  {idx:<6d} {o['value']:>9.4g}  {o['z']:>9.3f}  {o['classification']}")
    if res["steps"]:
        lines.append("step trail:")
        s_len = len(res["steps"][0]["u_values"])
        head = "  step  side   m    " + "  ".join(f"u({i})" for i in range(1, s_len + 1)) + "    d  rejected"
        lines.append(head)
        for st in res["steps"]:
            u = "  ".join(f"{v:.4f}" for v in st["u_values"])
            rej = "-" if st["rejected_index"] is None else str(st["rejected_index"])
            lines.append(
                f"  {st['step']:<5d} {st['side']:<5s} {st['working_size']:<4d} {u}  {st['d']:>3d}  {rej}"
            )
    return "\n".join(lines)


_EXPERIMENT_COLUMNS = [
    "method", "family", "n", "r", "param",
    "d_oo", "d_on", "d_no", "d_nn", "significance", "M", "seed", "error",
]


def _experiment_csv(rows: list[dict]) -> str:
    out = ["\t".join(_EXPERIMENT_COLUMNS).replace("\t", ",")]
    for row in rows:
        cells = [
            row["method"], row["family"], str(row["n"]), str(row["r"]), row["param"],
            *(("" if row[k] is None else repr(row[k])) for k in ("d_oo", "d_on", "d_no", "d_nn", "significance")),
            str(row["replicates"]), str(row["seed"]),
            row["error"] or "",
        ]
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def _write_output(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--server", help="remote service URL (default: run the service in process)")
    parser.add_argument("--cache", help="critical value cache path (in-process mode)")
    parser.add_argument("--output", help="write the JSON (or CSV) result to this path")
    parser.add_argument("--seed", type=int, default=20210521)
    parser.add_argument("--replicates", type=int, default=100_000,
                        help="replicates for critical value simulation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outlierkit",
        description="Multiple outlier identification for location-scale and shape-scale families",
    )
    parser.add_argument("--version", action="version", version=f"outlierkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    detect = sub.add_parser("detect", help="classify the observations of a CSV column")
    detect.add_argument("--input", required=True, help="input CSV file")
    detect.add_argument("--column", help="1-based column index or header name (default: first)")
    detect.add_argument("--method", default="bp", choices=["bp", "dg", "rosner", "bolshev", "hawkins"])
    detect.add_argument("--family", default="normal")
    detect.add_argument("--side", default="two", choices=["left", "right", "two"])
    detect.add_argument("--alpha", type=float, default=0.05)
    detect.add_argument("--s", type=int)
    detect.add_argument("--estimator", default="robust", choices=["robust", "ml"])
    detect.add_argument("--shape-scale", action="store_true",
                        help="log-transform positive data before classification")
    detect.add_argument("--exact-critical", action="store_true",
                        help="simulate finite-n critical values instead of asymptotic ones")
    detect.add_argument("--force", action="store_true", help="classify even when n <= 15")
    detect.add_argument("--json", action="store_true", help="print the JSON report to stdout")
    _add_common(detect)

    crit = sub.add_parser("simulate-critical", help="simulate and cache a critical value")
    crit.add_argument("--method", default="bp", choices=["bp", "dg", "bolshev", "hawkins"])
    crit.add_argument("--family", default="normal")
    crit.add_argument("--n", type=int, help="sample size; omit for the asymptotic entry (bp)")
    crit.add_argument("--s", type=int, default=5)
    crit.add_argument("--alpha", type=float, default=0.05)
    crit.add_argument("--side", default="two", choices=["left", "right", "two"])
    crit.add_argument("--estimator", default="robust", choices=["robust", "ml"])
    _add_common(crit)

    exp = sub.add_parser("experiment", help="run a masking/swamping experiment grid")
    exp.add_argument("--methods", required=True, help="comma list, e.g. bp,dg,rosner")
    exp.add_argument("--family", default="normal")
    exp.add_argument("--n", required=True, help="comma list of sample sizes")
    exp.add_argument("--r", required=True, help="comma list of contaminant counts")
    exp.add_argument("--contaminant", default="exponential",
                     choices=["exponential", "truncated_normal"])
    exp.add_argument("--theta", help="comma list of exponential scales")
    exp.add_argument("--tn-mu", help="comma list of truncated normal locations")
    exp.add_argument("--tn-rho", type=float, default=0.01, help="truncated normal scale")
    exp.add_argument("--contamination-side", default="both", choices=["left", "right", "both"])
    exp.add_argument("--side", default="two", choices=["left", "right", "two"])
    exp.add_argument("--alpha", type=float, default=0.05)
    exp.add_argument("--alpha-bar", type=float, default=0.05)
    exp.add_argument("--s", help="candidate cap; integer or the literal 0.4n")
    exp.add_argument("--estimator", default="robust", choices=["robust", "ml"])
    exp.add_argument("--M", type=int, required=True, help="replicates per cell")
    _add_common(exp)

    curve = sub.add_parser("significance-curve", help="empirical size along a grid of n")
    curve.add_argument("--method", default="bp", choices=["bp", "dg", "rosner", "bolshev", "hawkins"])
    curve.add_argument("--family", default="normal")
    curve.add_argument("--n-grid", required=True, help="comma list of sample sizes")
    curve.add_argument("--alpha", type=float, default=0.05)
    curve.add_argument("--side", default="two", choices=["left", "right", "two"])
    curve.add_argument("--s", help="candidate cap; integer or the literal 0.4n")
    curve.add_argument("--estimator", default="robust", choices=["robust", "ml"])
    curve.add_argument("--M", type=int, required=True)
    _add_common(curve)

    return parser


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects a comma list of integers, got {text!r}") from None


def _float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects a comma list of numbers, got {text!r}") from None


def _resolve_s(raw: str | None, n: int) -> int | None:
    if raw is None:
        return None
    if raw.strip() == "0.4n":
        return max(1, int(math.floor(0.4 * n)))
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"--s expects an integer or the literal 0.4n, got {raw!r}") from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_detect(args) -> int:
    values, labels = ingest_csv(args.input, args.column)
    payload = {
        "values": values,
        "labels": labels,
        "method": args.method,
        "family": args.family,
        "side": args.side,
        "alpha": args.alpha,
        "s": args.s,
        "estimator": args.estimator,
        "seed": args.seed,
        "critical_replicates": args.replicates,
        "use_exact_critical": args.exact_critical,
        "shape_scale": args.shape_scale,
        "force": args.force,
    }
    client = ServiceClient(args.server, args.cache)
    try:
        result = client.post("/detect", payload)
    finally:
        client.close()
    print(_render_detect_text(result))
    if args.json:
        print(json.dumps(result, indent=2))
    _write_output(args.output, result)
    return EXIT_OK


def _cmd_simulate_critical(args) -> int:
    payload = {
        "method": args.method,
        "family": args.family,
        "estimator": args.estimator,
        "n": args.n,
        "s": args.s,
        "alpha": args.alpha,
        "side": args.side,
        "replicates": args.replicates,
        "seed": args.seed,
    }
    client = ServiceClient(args.server, args.cache)
    try:
        result = client.post("/critical-values", payload)
    finally:
        client.close()
    scope = "asymptotic" if result["n"] is None else f"n={result['n']}"
    src = "cache hit" if result["cached"] else "simulated"
    print(
        f"{result['method']} critical value ({scope}, s={result['s']}, alpha={result['alpha']:g}, "
        f"side={result['side']}): {result['value']!r} [{src}, {result['replicates']} replicates, "
        f"seed {result['seed']}, rng {result['rng_name']}]"
    )
    _write_output(args.output, result)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    sizes = _int_list(args.n, "--n")
    counts = _int_list(args.r, "--r")
    if args.contaminant == "exponential":
        if not args.theta:
            raise ConfigError("--theta is required for exponential contamination")
        params = [("exponential", {"theta": t}) for t in _float_list(args.theta, "--theta")]
    else:
        if not args.tn_mu:
            raise ConfigError("--tn-mu is required for truncated normal contamination")
        params = [
            ("truncated_normal", {"mu": m, "rho": args.tn_rho})
            for m in _float_list(args.tn_mu, "--tn-mu")
        ]

    cells = []
    for method in methods:
        for n in sizes:
            for r in counts:
                for kind, kw in params:
                    cells.append(
                        {
                            "method": method,
                            "family": args.family,
                            "n": n,
                            "r": r,
                            "contaminant": {"kind": kind, **kw},
                            "contamination_side": args.contamination_side,
                            "side": args.side,
                            "alpha": args.alpha,
                            "alpha_bar": args.alpha_bar,
                            "s": _resolve_s(args.s, n),
                            "estimator": args.estimator,
                        }
                    )
    payload = {
        "cells": cells,
        "replicates": args.M,
        "seed": args.seed,
        "critical_replicates": args.replicates,
    }
    client = ServiceClient(args.server, args.cache)
    try:
        result = client.post("/experiments", payload)
    finally:
        client.close()
    text = _experiment_csv(result["rows"])
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    failures = [row for row in result["rows"] if row["error"]]
    if failures:
        print(f"note: {len(failures)} of {len(result['rows'])} cells failed", file=sys.stderr)
    return EXIT_OK


def _cmd_curve(args) -> int:
    grid = _int_list(args.n_grid, "--n-grid")
    payload = {
        "method": args.method,
        "family": args.family,
        "n_grid": grid,
        "alpha": args.alpha,
        "side": args.side,
        "s": _resolve_s(args.s, grid[0]) if args.s and args.s != "0.4n" else None,
        "estimator": args.estimator,
        "replicates": args.M,
        "seed": args.seed,
        "critical_replicates": args.replicates,
    }
    client = ServiceClient(args.server, args.cache)
    try:
        result = client.post("/significance-curve", payload)
    finally:
        client.close()
    lines = ["n,significance"] + [f"{p['n']},{p['significance']!r}" for p in result["points"]]
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {
    "detect": _cmd_detect,
    "simulate-critical": _cmd_simulate_critical,
    "experiment": _cmd_experiment,
    "significance-curve": _cmd_curve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for usage errors
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutlierKitError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except httpx.HTTPError as exc:
        print(f"service connection error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
