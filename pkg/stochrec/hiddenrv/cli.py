#!/usr/bin/env python
# encoding: utf-8

"""
command line driver: `sre-hrv COMMAND --config sre.cfg --out DIR`, each
run writing its data files plus a manifest with content digests
"""

from dataclasses import dataclass, field
import argparse
import hashlib
import json
import logging
import os
import sys
import time

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .errors import ConfigError, HiddenRVError, NotFound, OpenArc, TraceDiverged
from .hiddenrv import HiddenRVAPI, parse_t_grid
from .levelset import trace_level_set
from .mc import ImportanceEngine, empty_batch
from .tails import check_t_grid, fit_slope, joint_tail_scan, marginal_tail_scan, spectral_measure


REPORT_SCHEMA = 1

plt.rcParams["svg.hashsalt"] = "sre-hrv"


@dataclass
class RunManifest:
    command: str
    config: str
    seed: int
    version: str = __version__
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    def stage (self, name, t0):
        self.timings[name] = round((time.time() - t0) * 1000.0, 3)


    def record (self, path):
        with open(path, "rb") as f:
            digest = hashlib.sha256(f.read()).hexdigest()

        self.outputs.append({"path": os.path.basename(path), "sha256": digest})


    def write (self, out_dir):
        path = os.path.join(out_dir, "manifest.json")

        with open(path, "w") as f:
            json.dump(self.__dict__, f, indent=2, sort_keys=True)

        return path


def _write_json (path, data, manifest):
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_jsonable)
        f.write("\n")

    manifest.record(path)


def _jsonable (value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, tuple):
        return list(value)
    return str(value)


def _write_csv (path, result, manifest):
    if hasattr(result, "to_csv"):
        result.to_csv(path)
    else:
        result.to_frame().to_csv(path, index=False, float_format="%.12g")

    manifest.record(path)


def _unwrap (response):
    """
    the payload of a facade response, re-raising a trapped error
    """
    if response.error:
        raise response.error

    return response.meta


def _save_svg (fig, path, manifest):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    manifest.record(path)


######################################################################
## plots

def plot_level_set (trace, point, path, manifest):
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(trace.points[:, 0], trace.points[:, 1], color="tab:blue", label="D")
    ax.plot([1.0, 0.0], [0.0, 1.0], color="grey", linestyle="--", linewidth=0.8, label="ξ1 + ξ2 = 1")

    if point is not None:
        ax.plot(*point.xi_star, marker="o", color="tab:red", label=f"ξ* (h = {point.h:.4f})")

    ax.set_xlim(0.0, 1.05)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("ξ1")
    ax.set_ylabel("ξ2")
    ax.legend(loc="lower left")
    _save_svg(fig, path, manifest)


def plot_scan (scan, path, manifest):
    fig, ax = plt.subplots(figsize=(6, 4))
    keep = scan.raw > 0.0
    ax.errorbar(scan.t[keep], scan.scaled[keep], yerr=scan.scaled_stderr[keep], marker="o", capsize=2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    suffix = " (log t)^1/2" if scan.log_factor else ""
    ax.set_ylabel(f"t^{scan.exponent:.4g}{suffix} P")
    ax.set_title(f"{scan.kind} scan, {scan.estimator}")
    _save_svg(fig, path, manifest)


######################################################################
## commands

def cmd_analyze (api, args, manifest):
    """
    tail indices, assumption report and the certified critical point,
    plus the level-set trace as CSV and SVG
    """
    t0 = time.time()
    alpha = api.indices()
    manifest.stage("alpha", t0)

    t0 = time.time()
    report = api.assumptions().meta
    manifest.stage("assumptions", t0)

    t0 = time.time()
    log = logging.getLogger("HiddenRV")
    trace = None

    try:
        trace = trace_level_set(api.evaluator(), logger=api.logger)
    except (OpenArc, TraceDiverged) as e:
        log.warning("level set trace stopped: %s: %s", type(e).__name__, e)

    point = None
    error = None

    try:
        point = api.xi_star()
    except NotFound as e:
        error = e

    manifest.stage("critical_point", t0)

    data = {
        "schema": REPORT_SCHEMA,
        "model": api.spec.to_dict(),
        "fingerprint": api.spec.fingerprint(),
        "seed": api.seed,
        "alpha": alpha.serialize(),
        "assumptions": report.serialize() if report else None,
        "critical_point": point.serialize() if point else None,
        "xi_star": [round(float(x), 6) for x in point.xi_star] if point else None,
        "h": round(point.h, 6) if point else None,
        "error": f"{type(error).__name__}: {error}" if error else None,
        }

    _write_json(os.path.join(args.out, "report.json"), data, manifest)

    if trace is not None:
        _write_csv(os.path.join(args.out, "level_set.csv"), trace, manifest)
        plot_level_set(trace, point, os.path.join(args.out, "level_set.svg"), manifest)

    if error:
        raise error

    return 0 if point.is_certified else 2


def cmd_check_assumptions (api, args, manifest):
    t0 = time.time()
    report = _unwrap(api.assumptions())
    manifest.stage("assumptions", t0)

    _write_json(os.path.join(args.out, "assumptions.json"), {"schema": REPORT_SCHEMA, "assumptions": report.serialize()}, manifest)
    return 0


def cmd_simulate (api, args, manifest):
    """
    stationary draws as CSV and as a compressed cache
    """
    t0 = time.time()
    alpha = api.sampling_alpha()

    if args.n == 0:
        batch = empty_batch(api.spec, alpha, None)
    else:
        batch = _unwrap(api.simulate(args.n))

    manifest.stage("simulate", t0)

    _write_csv(os.path.join(args.out, "samples.csv"), batch, manifest)
    cache = os.path.join(args.out, "samples.npz")
    batch.save(cache)
    manifest.record(cache)
    return 0


def cmd_tail_scan (api, args, manifest):
    """
    marginal, joint (explicit ξ, no log factor) or hrv (ξ* from a prior
    analyze report, with the log factor and importance sampling)
    """
    values = api.settings["tail_scan"]
    t_grid = check_t_grid(parse_t_grid(args.t_grid or values["t_grid"]))
    alpha = api.indices()
    t0 = time.time()

    if args.mode == "hrv":
        report_path = args.report or os.path.join(args.out, "report.json")

        try:
            with open(report_path) as f:
                xi_star = json.load(f)["critical_point"]["xi_star"]
        except (OSError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"cannot read xi* from `{report_path}`: {e}")

        cfg = api.simulation_config(api.settings["exceedance"]["n_paths"])
        engine = ImportanceEngine(api.spec, alpha, xi_star, cfg, ev=api.evaluator(), logger=api.logger)
        scan = joint_tail_scan(engine, alpha, xi_star, t_grid, use_log_factor=True, logger=api.logger)
    else:
        batch = _unwrap(api.simulate(args.n))

        if args.mode == "marginal":
            scan = marginal_tail_scan(batch, int(args.component or values["component"]), t_grid)
        else:
            xi = args.xi or values["xi"]

            if xi is None:
                raise ConfigError("joint mode needs `xi` (--xi or [tail_scan] xi)")

            scan = joint_tail_scan(batch, alpha, xi, t_grid, use_log_factor=False, logger=api.logger)

        spectral = spectral_measure(batch, float(np.quantile(batch.polar[:, 0], 0.99)))
        _write_csv(os.path.join(args.out, "spectral.csv"), spectral, manifest)

    manifest.stage("scan", t0)
    slope, slope_err = fit_slope(scan)
    summary = scan.descriptor()
    summary.update({"slope": slope, "slope_stderr": slope_err})

    _write_csv(os.path.join(args.out, "scan.csv"), scan, manifest)
    _write_json(os.path.join(args.out, "scan.json"), summary, manifest)
    plot_scan(scan, os.path.join(args.out, "scan.svg"), manifest)
    return 0


def cmd_exceedance (api, args, manifest):
    t0 = time.time()
    estimate = _unwrap(api.exceedance())
    box = _unwrap(api.walk_box())
    manifest.stage("exceedance", t0)

    data = {"schema": REPORT_SCHEMA, "exceedance": estimate.serialize(), "walk_box": box.serialize()}
    _write_json(os.path.join(args.out, "exceedance.json"), data, manifest)
    return 0


def cmd_renewal_check (api, args, manifest):
    """
    renewal measure (split by sign when K is nontrivial) and the
    transverse bound table
    """
    log = logging.getLogger("HiddenRV")
    t0 = time.time()
    estimate = _unwrap(api.renewal())
    ratio = estimate.stability_ratio()
    log.warning("renewal stability ratio %.4f over t in [%g, %g]", ratio, estimate.t_grid[0], estimate.t_grid[-1])

    table = _unwrap(api.carlsson())
    manifest.stage("renewal", t0)

    _write_csv(os.path.join(args.out, "renewal.csv"), estimate, manifest)
    _write_csv(os.path.join(args.out, "carlsson.csv"), table, manifest)

    data = {
        "schema": REPORT_SCHEMA,
        "stability_ratio": ratio,
        "group_slices": sorted(estimate.group_slices),
        "stam_uncertified": estimate.meta["stam_uncertified"],
        "carlsson_max": table.maximum,
        "carlsson_on_axis": table.on_axis,
        "carlsson_bounded": table.bounded,
        }

    _write_json(os.path.join(args.out, "renewal.json"), data, manifest)
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "tail-scan": cmd_tail_scan,
    "exceedance": cmd_exceedance,
    "renewal-check": cmd_renewal_check,
    "check-assumptions": cmd_check_assumptions,
    }


######################################################################
## argument parsing

class _Parser (argparse.ArgumentParser):
    """
    usage errors exit with the configuration error code
    """

    def error (self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def build_parser ():
    parser = _Parser(prog="sre-hrv", description="hidden regular variation of diagonal stochastic recurrence equations")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default="sre.cfg", help="INI model configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the [model] seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")
    parser.add_argument("--t-grid", dest="t_grid", default=None, help="start:stop:points[,log]")
    parser.add_argument("--mode", choices=("marginal", "joint", "hrv"), default="marginal", help="tail-scan mode")
    parser.add_argument("--component", type=int, choices=(1, 2), default=None)
    parser.add_argument("--xi", type=float, nargs=2, default=None, help="joint-scan exponent pair")
    parser.add_argument("--report", default=None, help="analyze report.json holding xi*")
    parser.add_argument("-n", type=int, default=None, help="number of samples")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--profile", action="store_true", help="deterministic profiling to stdout")
    return parser


def main (argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stdout, level=level)
    logger = logging.getLogger("HiddenRV")

    if args.n is not None and args.n < 0:
        logger.error("-n must be nonnegative")
        return ConfigError.exit_code

    try:
        os.makedirs(args.out, exist_ok=True)
        api = HiddenRVAPI(config_file=args.config, logger=logger, seed=args.seed, workers=max(1, args.workers))
    except HiddenRVError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code

    # the seed is on record before any sampling starts
    manifest = RunManifest(command=args.command, config=os.path.abspath(args.config), seed=api.seed)
    pr = api.start_profiling() if args.profile else None

    try:
        code = COMMANDS[args.command](api, args, manifest)
    except HiddenRVError as e:
        logger.error("%s: %s", type(e).__name__, e)
        code = e.exit_code
    finally:
        if pr:
            api.stop_profiling(pr)

    manifest.timings["exit_code"] = code
    manifest.write(args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
