#!/usr/bin/env python
# encoding: utf-8

from .errors import ConfigError, HiddenRVError, NegativeDriftViolated, NoRoot
from .levelset import find_xi_star, trace_level_set
from .mc import SimulationConfig, joint_exceedance_prob, simulate_stationary, walk_box_prob
from .mgf import PhiEvaluator, check_assumptions, solve_tail_indices
from .models import spec_from_config
from .renewal import IncrementLaw, Rectangle, carlsson_bound_check, group_renewal_estimate, renewal_measure_estimate
import cProfile
import configparser
import io
import json
import numpy as np
import os
import pstats
import time


SECTIONS = {
    "simulation": {
        "burn_in": 10_000,
        "n_samples": 100_000,
        "thinning": 1,
        "n_chains": 256,
        },
    "exceedance": {
        "t": 1000.0,
        "eps": 1.0,
        "n_paths": 100_000,
        "ell": 0,
        },
    "tail_scan": {
        "component": 1,
        "xi": None,
        "t_grid": "10:1000:5,log",
        },
    "renewal": {
        "mean": [1.0, 1.0],
        "cov": [[1.0, 0.0], [0.0, 1.0]],
        "region": [[0.0, 0.0], [1.0, 1.0]],
        "t_grid": [10.0, 100.0],
        "n_paths": 10_000,
        "flip_prob": 0.0,
        "group": 1,
        "offsets": [0.0, 1.0, 2.0],
        },
    }


def _decode (value):
    """
    config values are JSON literals; bare words stay strings
    """
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value.strip()


def parse_t_grid (value):
    """
    a list of numbers, or the text "start:stop:points" with an optional
    ",log" suffix for geometric spacing
    """
    if isinstance(value, (list, tuple)):
        return np.asarray(value, dtype=float)

    text = str(value).strip()
    spacing = "linear"

    if "," in text:
        text, spacing = (part.strip() for part in text.split(",", 1))

    try:
        start, stop, points = text.split(":")
        start, stop, points = float(start), float(stop), int(points)
    except ValueError:
        raise ConfigError(f"malformed t grid `{value}`, expected start:stop:points[,log]")

    if points < 1 or spacing not in ("linear", "log"):
        raise ConfigError(f"malformed t grid `{value}`")
    if spacing == "log" and (start <= 0.0 or stop <= 0.0):
        raise ConfigError(f"log-spaced t grid needs positive bounds: `{value}`")

    return np.geomspace(start, stop, points) if spacing == "log" else np.linspace(start, stop, points)


def load_settings (config):
    """
    decode a parsed ConfigParser into per-section dicts, filling the
    documented defaults; unknown sections or keys are errors
    """
    unknown = set(config.sections()) - set(SECTIONS) - {"model"}

    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if not config.has_section("model"):
        raise ConfigError("config has no [model] section")

    settings = {"model": {k: _decode(v) for k, v in config.items("model")}}

    for name, defaults in SECTIONS.items():
        values = dict(defaults)

        if config.has_section(name):
            given = {k: _decode(v) for k, v in config.items(name)}
            extra = set(given) - set(defaults)

            if extra:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")

            values.update(given)

        settings[name] = values

    return settings


class AnalysisResponse:
    """
    the result of one facade call
    """

    def __init__ (self, parent=None, meta=None, timing=None, message=None, error=None):
        self.parent = parent
        self.meta = meta
        self.timing = timing
        self.message = message
        self.error = error


    @property
    def exit_code (self):
        return self.error.exit_code if self.error else 0


    def serialize (self):
        meta = self.meta

        if hasattr(meta, "serialize"):
            meta = meta.serialize()

        return {"meta": meta, "message": self.message}


######################################################################
## federated analysis access

class HiddenRVAPI:
    """
    configuration-driven access to the tail-index solver, assumption
    checks, level-set geometry and Monte Carlo engines for one model
    """

    def __init__ (self, config_file="sre.cfg", logger=None, seed=None, workers=1):
        if not os.path.isfile(config_file):
            raise ConfigError(f"config file `{config_file}` not found")

        self.config = configparser.ConfigParser()
        self.config.optionxform = str
        self.config.read(config_file)
        self.config_file = config_file
        self.logger = logger
        self.workers = workers

        self.settings = load_settings(self.config)

        if seed is not None:
            self.settings["model"]["seed"] = int(seed)

        self.settings["model"].setdefault("seed", 0)
        self.seed = int(self.settings["model"]["seed"])
        self.spec = spec_from_config(self.settings["model"])

        # cached between calls
        self._alpha = None
        self._ev = None
        self._xi_star = None


    @classmethod
    def _mark_elapsed_time (cls, t0):
        """
        mark the elapsed time since the start of the analysis method
        """
        t1 = time.time()
        return (t1 - t0) * 1000.0


    def report_perf (self, timing, name="analysis"):
        """
        report the performance for a given analysis response
        """
        print("\ntime: {:.3f} ms - {}".format(timing, name))


    def _respond (self, name, func, *args, **kwargs):
        """
        run one analysis step, trapping toolkit errors into the response
        """
        meta = None
        message = None
        error = None
        t0 = time.time()

        try:
            meta = func(*args, **kwargs)
        except HiddenRVError as e:
            error = e
            message = f"ERROR: {name}: {type(e).__name__}: {e}"

            if self.logger:
                self.logger.warning(message)

        timing = self._mark_elapsed_time(t0)
        return AnalysisResponse(self, meta, timing, message, error)


    ## cached building blocks

    def indices (self):
        if self._alpha is None:
            self._alpha = solve_tail_indices(self.spec, logger=self.logger)

        return self._alpha


    def evaluator (self):
        if self._ev is None:
            self._ev = PhiEvaluator(self.spec, self.indices(), seed=self.seed, logger=self.logger)

        return self._ev


    def xi_star (self):
        if self._xi_star is None:
            self._xi_star = find_xi_star(self.evaluator(), logger=self.logger)

        return self._xi_star


    def sampling_alpha (self):
        """
        α for polar coordinates of simulated draws; models without a tail
        index (a contraction with bounded A) fall back to α = (1, 1)
        """
        try:
            return self.indices().alpha
        except (NoRoot, NegativeDriftViolated) as e:
            if self.logger:
                self.logger.warning("no tail index (%s), polar coordinates use alpha = (1, 1)", e)

            return np.ones(2)


    def simulation_config (self, n_samples=None):
        values = self.settings["simulation"]
        n = values["n_samples"] if n_samples is None else n_samples
        return SimulationConfig(
            n_samples=int(n),
            burn_in=int(values["burn_in"]),
            seed=self.seed,
            thinning=int(values["thinning"]),
            n_chains=int(values["n_chains"]),
            workers=self.workers,
            )


    def increment_law (self):
        values = self.settings["renewal"]
        return IncrementLaw(
            mean=tuple(values["mean"]),
            cov=tuple(map(tuple, values["cov"])),
            flip_prob=float(values["flip_prob"]),
            group=int(values["group"]),
            )


    def region (self):
        lo, hi = self.settings["renewal"]["region"]
        return Rectangle(lo=tuple(lo), hi=tuple(hi))


    ## response-returning analyses

    def tail_indices (self):
        return self._respond("tail_indices", self.indices)


    def assumptions (self):
        def run ():
            try:
                alpha = self.indices()
            except HiddenRVError:
                alpha = None

            return check_assumptions(self.spec, alpha, seed=self.seed, logger=self.logger)

        return self._respond("assumptions", run)


    def critical_point (self):
        return self._respond("critical_point", self.xi_star)


    def level_set (self, step=1e-2):
        return self._respond("level_set", lambda: trace_level_set(self.evaluator(), step, logger=self.logger))


    def simulate (self, n_samples=None):
        return self._respond(
            "simulate",
            lambda: simulate_stationary(self.spec, self.sampling_alpha(), self.simulation_config(n_samples), logger=self.logger),
            )


    def exceedance (self, t=None, eps=None):
        values = self.settings["exceedance"]

        def run ():
            cfg = self.simulation_config(values["n_paths"])
            return joint_exceedance_prob(
                self.spec, self.indices(), self.xi_star(),
                float(values["t"] if t is None else t),
                float(values["eps"] if eps is None else eps),
                cfg, ev=self.evaluator(), logger=self.logger,
                )

        return self._respond("exceedance", run)


    def walk_box (self, t=None, eps=None, ell=None, shift=0.0):
        values = self.settings["exceedance"]

        def run ():
            cfg = self.simulation_config(values["n_paths"])
            return walk_box_prob(
                self.spec, self.indices(), self.xi_star(),
                float(values["t"] if t is None else t),
                int(values["ell"] if ell is None else ell),
                float(values["eps"] if eps is None else eps),
                cfg, shift=shift, ev=self.evaluator(), logger=self.logger,
                )

        return self._respond("walk_box", run)


    def renewal (self, against=False):
        """
        the renewal measure split by the sign component; `against` places
        the regions at -tρ, where a transient walk leaves no mass
        """
        values = self.settings["renewal"]

        def run ():
            law = self.increment_law()
            args = (law, self.region(), parse_t_grid(values["t_grid"]), int(values["n_paths"]), self.seed)

            if against:
                return renewal_measure_estimate(*args, against=True, workers=self.workers, logger=self.logger)

            return group_renewal_estimate(*args, workers=self.workers, logger=self.logger)

        return self._respond("renewal", run)


    def carlsson (self):
        values = self.settings["renewal"]

        def run ():
            return carlsson_bound_check(
                self.increment_law(), values["offsets"], parse_t_grid(values["t_grid"]),
                int(values["n_paths"]), self.seed, region=self.region(),
                workers=self.workers, logger=self.logger,
                )

        return self._respond("carlsson", run)


    ## profiling utilities

    def start_profiling (self):
        """start profiling"""
        pr = cProfile.Profile()
        pr.enable()

        return pr


    def stop_profiling (self, pr):
        """stop profiling and report"""
        pr.disable()

        s = io.StringIO()
        sortby = "cumulative"
        ps = pstats.Stats(pr, stream=s).sort_stats(sortby)

        ps.print_stats()
        print(s.getvalue())
