"""Command-line entry point: argument parsing, file I/O and exit codes only.

Every subcommand builds a request from its config files, sends it through the
HTTP interface (an in-process client by default, a remote server with
``--server``), and writes the response as report files.  All numerical work
happens behind the service boundary, so the CLI and a remote deployment are
guaranteed to agree.

Exit codes: 0 success, 1 hypothesis/precondition failure, 2 numerical
failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .configs import load_plan, _read_json
from .errors import ConfigError

EXIT_OK = 0
EXIT_BY_CATEGORY = {"hypothesis": 1, "numerical": 2, "config": 3}

PLAN_FIELDS = ("k_min", "k_max", "trials", "seed", "modes_max", "n0", "delta", "workers")


def _default_workers() -> int:
    env = os.environ.get("WEYL_LAB_WORKERS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"WEYL_LAB_WORKERS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _make_client(args):
    if args.server:
        import httpx

        return httpx.Client(base_url=args.server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _post(client, path: str, payload: dict) -> dict:
    try:
        response = client.post(path, json=payload)
    except Exception as exc:
        import httpx

        if not isinstance(exc, httpx.HTTPError):
            raise
        print(f"error [numerical]: cannot reach the service: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_BY_CATEGORY["numerical"]) from None
    if response.status_code == 200:
        return response.json()
    try:
        error = response.json()["error"]
        category, message = error["category"], error["message"]
    except Exception:
        category, message = "numerical", f"service failure (HTTP {response.status_code})"
    print(f"error [{category}]: {message}", file=sys.stderr)
    raise SystemExit(EXIT_BY_CATEGORY.get(category, 2))


def _write_json(path: str, obj) -> str:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_csv(path: str, fieldnames: list[str], rows: list[dict]) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def _emit(args, jsons: list[tuple[str, object]], csvs: list[tuple[str, list[str], list[dict]]],
          summary: str) -> list[str]:
    """Write the selected artifact kinds; a JSON report is always kept."""
    os.makedirs(args.out, exist_ok=True)
    want_json = args.format in ("json", "both") or not csvs
    want_csv = args.format in ("csv", "both")
    paths = []
    if want_json:
        for name, obj in jsons:
            paths.append(_write_json(os.path.join(args.out, name), obj))
    if want_csv:
        for name, fields, rows in csvs:
            paths.append(_write_csv(os.path.join(args.out, name), fields, rows))
    print(summary)
    for p in paths:
        print(f"wrote {p}")
    return paths


def _require(args, flag: str):
    value = getattr(args, flag)
    if value is None:
        raise ConfigError(f"--{flag.replace('_', '-')} is required for this subcommand")
    return value


def _load_weyl_request(args) -> tuple[dict, dict]:
    """Resolve plan + flag overrides into (request payload, plan dict)."""
    plan = load_plan(_require(args, "plan"))
    if args.symbol:
        plan["symbol"] = _read_json(args.symbol)
    if args.pert:
        plan["perturbation"] = _read_json(args.pert)
    if args.sector:
        plan["sector"] = _read_json(args.sector)
    if args.seed is not None:
        plan["seed"] = args.seed
    if args.modes_max is not None:
        plan["modes_max"] = args.modes_max
    plan.setdefault("workers", args.workers)
    if "symbol" not in plan:
        raise ConfigError("the plan (or --symbol) must provide a symbol description")
    plan_part = {k: plan[k] for k in PLAN_FIELDS if k in plan}
    payload = {
        "symbol": plan["symbol"],
        "pert": plan.get("perturbation"),
        "plan": plan_part,
    }
    return payload, plan


# ----------------------------------------------------------- subcommands

def _cmd_symbol_check(args, client) -> int:
    symbol = _read_json(_require(args, "symbol"))
    result = _post(client, "/v1/symbol/check",
                   {"symbol": symbol, "theta0": args.theta, "n0": args.n0})
    _emit(args, [("symbol_check.json", result)], [],
          f"non-degeneracy at theta0={args.theta} N0={args.n0}: {result['verdict']}")
    return EXIT_OK if result["verdict"] == "holds" else EXIT_BY_CATEGORY["hypothesis"]


def _cmd_volume(args, client) -> int:
    payload = {
        "symbol": _read_json(_require(args, "symbol")),
        "sector": _read_json(_require(args, "sector")),
        "mc_samples": args.mc,
        "seed": args.seed if args.seed is not None else 0,
    }
    result = _post(client, "/v1/volume/sector", payload)
    summary = f"volume={result['volume']:.12g} prediction={result['prediction']:.12g}"
    if result.get("mc_volume") is not None:
        summary += f" mc={result['mc_volume']:.6g}+-{result['mc_sigma']:.2g}"
    _emit(args, [("volume.json", result)], [], summary)
    return EXIT_OK


def _cmd_sample(args, client) -> int:
    payload = {
        "pert": _read_json(_require(args, "pert")),
        "seed": args.seed if args.seed is not None else 0,
    }
    result = _post(client, "/v1/potential/sample", payload)
    _emit(args, [("sample.json", result)],
          [("potential.csv", ["j", "mu", "re", "im"], result["rows"])],
          f"sampled {result['cutoff_J']} components, H^s norm {result['hs_norm']:.6g}")
    return EXIT_OK


def _cmd_spectrum(args, client) -> int:
    payload = {
        "symbol": _read_json(_require(args, "symbol")),
        "pert": _read_json(args.pert) if args.pert else None,
        "seed": args.seed if args.seed is not None else 0,
        "modes": args.modes_max if args.modes_max is not None else 64,
        "sector": _read_json(args.sector) if args.sector else None,
    }
    result = _post(client, "/v1/spectrum/solve", payload)
    summary = (f"K={result['modes_K']} trusted={result['n_trusted']} "
               f"radius_max={result['radius_max']:.6g}")
    if result.get("sector_count"):
        c = result["sector_count"]
        summary += f" count={c['count']} prediction={c['prediction']:.6g}"
    _emit(args, [("spectrum.json", result)],
          [("spectrum.csv", ["re", "im", "trusted", "residual"], result["eigenvalues"])],
          summary)
    return EXIT_OK


def _cmd_experiment_weyl(args, client) -> int:
    payload, plan = _load_weyl_request(args)
    if "sector" not in plan:
        raise ConfigError("the plan (or --sector) must provide a sector description")
    payload["sector"] = plan["sector"]
    result = _post(client, "/v1/experiment/weyl", payload)
    report = result["report"]

    from .experiment import weyl_plot_rows, weyl_series_rows

    series = weyl_series_rows(report)
    plot = weyl_plot_rows(report)
    fit = result["fit"]
    slope = fit.get("slope_top_half")
    rel = result.get("largest_annulus_rel_error")
    summary = (f"dyadic k={plan['k_min']}..{plan['k_max']} "
               f"slope_top_half={slope if slope is not None else 'n/a'} "
               f"largest_annulus_rel_error={rel if rel is not None else 'n/a'}")
    _emit(args, [("weyl_report.json", report)],
          [("weyl_series.csv", ["k", "trial", "count", "prediction", "error"], series),
           ("weyl_plot.csv",
            ["log2_lambda", "log2_max_cum_error", "trivial_envelope", "theorem_envelope"],
            plot)],
          summary)
    return EXIT_OK


def _cmd_family_sweep(args, client) -> int:
    payload, plan = _load_weyl_request(args)
    sectors = plan.get("sectors")
    if not sectors:
        if "sector" not in plan:
            raise ConfigError("the plan must provide a 'sectors' list (or a single 'sector')")
        sectors = [plan["sector"]]
    payload["sectors"] = sectors
    result = _post(client, "/v1/experiment/family-sweep", payload)

    from .experiment import weyl_series_rows

    csvs = []
    for i, member in enumerate(result["members"]):
        csvs.append((f"family_member_{i}_series.csv",
                     ["k", "trial", "count", "prediction", "error"],
                     weyl_series_rows(member)))
    worst = result["worst"]
    _emit(args, [("family_sweep.json", result)], csvs,
          f"{len(result['members'])} sectors, worst slope_top_half="
          f"{worst.get('slope_top_half')} worst rel_error={worst.get('largest_annulus_rel_error')}")
    return EXIT_OK


def _cmd_experiment_tailbound(args, client) -> int:
    payload = {"trials": args.trials, "seed": args.seed if args.seed is not None else 20260815}
    if args.c0 is not None:
        payload["c0"] = args.c0
    result = _post(client, "/v1/experiment/tailbound", payload)
    fields = ["n_components", "sigma_top", "sum_sq", "t",
              "empirical", "mc_sigma", "bound_at_calibrated"]
    _emit(args, [("tailbound.json", result)], [("tailbound.csv", fields, result["table"])],
          f"c0={result['c0']} all_dominated={result['all_dominated']} "
          f"single_gaussian_within_3sigma={result['single_gaussian']['within_3sigma']}")
    return EXIT_OK if result["all_dominated"] else EXIT_BY_CATEGORY["hypothesis"]


def _cmd_experiment_sc1(args, client) -> int:
    payload = {
        "m": args.m,
        "h_list": args.h,
        "trials": args.trials,
        "seed": args.seed if args.seed is not None else 20260815,
    }
    if args.pert:
        payload["pert"] = _read_json(args.pert)
    result = _post(client, "/v1/experiment/sc1", payload)
    fields = ["h", "failures", "trials", "failure_prob", "mc_sigma", "bound", "x_scaling"]
    _emit(args, [("sc1.json", result)], [("sc1.csv", fields, result["rows"])],
          f"monotone={result['monotone']} slope={result['slope']}")
    return EXIT_OK


def _cmd_calibrate_c0(args, client) -> int:
    payload = {"trials": args.trials, "seed": args.seed if args.seed is not None else 20260815}
    result = _post(client, "/v1/calibrate/c0", payload)
    fields = ["n_components", "sigma_top", "sum_sq", "t",
              "empirical", "mc_sigma", "bound_at_calibrated"]
    _emit(args, [("calibration.json", result)], [("calibration.csv", fields, result["table"])],
          f"calibrated c0={result['c0']} (default {result['default_c0']})")
    return EXIT_OK


COMMANDS = {
    "symbol-check": _cmd_symbol_check,
    "volume": _cmd_volume,
    "sample": _cmd_sample,
    "spectrum": _cmd_spectrum,
    "experiment-weyl": _cmd_experiment_weyl,
    "experiment-tailbound": _cmd_experiment_tailbound,
    "experiment-sc1": _cmd_experiment_sc1,
    "family-sweep": _cmd_family_sweep,
    "calibrate-c0": _cmd_calibrate_c0,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weyl-lab",
        description="Spectral counting laboratory for perturbed elliptic operators on the circle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--symbol", help="symbol description JSON file")
        p.add_argument("--pert", help="perturbation description JSON file")
        p.add_argument("--sector", help="sector description JSON file")
        p.add_argument("--plan", help="experiment plan JSON file")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides plan)")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--workers", type=int, default=None,
                       help="worker threads (default: WEYL_LAB_WORKERS or CPU count)")
        p.add_argument("--modes-max", type=int, default=None, dest="modes_max",
                       help="resolution cap / single-solve resolution")
        p.add_argument("--format", choices=("json", "csv", "both"), default="both")
        p.add_argument("--server", default=None,
                       help="base URL of a running service (default: in-process)")

    p = sub.add_parser("symbol-check", help="finite-order non-degeneracy verdict at an angle")
    common(p)
    p.add_argument("--theta", type=float, default=0.0, help="angle theta0 of the level set")
    p.add_argument("--n0", type=int, default=1, help="maximal jet order tested")

    p = sub.add_parser("volume", help="phase-space volume of a sector and its count prediction")
    common(p)
    p.add_argument("--mc", type=int, default=0, help="Monte-Carlo cross-check sample count")

    p = sub.add_parser("sample", help="draw one random potential and export its components")
    common(p)

    p = sub.add_parser("spectrum", help="trusted spectrum at one resolution, optional sector count")
    common(p)

    p = sub.add_parser("experiment-weyl", help="dyadic counting experiment from a plan file")
    common(p)

    p = sub.add_parser("experiment-tailbound", help="tail-bound domination test matrix")
    common(p)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--c0", type=float, default=None, help="use this constant instead of calibrating")

    p = sub.add_parser("experiment-sc1", help="norm-concentration failure probabilities across h")
    common(p)
    p.add_argument("--m", type=int, default=2, help="operator order in the h^m scaling")
    p.add_argument("--h", type=lambda s: [float(v) for v in s.split(",")],
                   default=[0.9, 0.7, 0.5, 0.35], help="comma-separated h values")
    p.add_argument("--trials", type=int, default=10_000)

    p = sub.add_parser("family-sweep", help="dyadic experiment over a family of sectors")
    common(p)

    p = sub.add_parser("calibrate-c0", help="calibrate the tail-bound constant on the test matrix")
    common(p)
    p.add_argument("--trials", type=int, default=100_000)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers is None:
        try:
            args.workers = _default_workers()
        except ConfigError as exc:
            print(f"error [config]: {exc}", file=sys.stderr)
            return EXIT_BY_CATEGORY["config"]
    try:
        client = _make_client(args)
        try:
            return COMMANDS[args.command](args, client)
        finally:
            client.close()
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except (ConfigError, OSError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_BY_CATEGORY["config"]


if __name__ == "__main__":
    sys.exit(main())
