"""Command-line driver for the three benchmarks.

Configuration is a flat text file, one ``key: value`` per line, ``#``
comments allowed::

    problem: elliptic
    M: 100
    N: 100000
    seed: 1

Exit codes: 0 success, 2 configuration error, 3 non-convergence (partial
artifacts are still written), 4 any other failure.
"""

import argparse
import csv
import logging
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import _kernels, burgers, elliptic, fem2d, mcoracle, separated, stats, wave
from .errors import ConfigError, NonConvergenceError
from .fdgrid import SpaceTimeGrid

log = logging.getLogger("sepspde")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV, EXIT_INTERNAL = 0, 2, 3, 4

PROBLEMS = ("elliptic", "burgers", "wave")

_DEFAULT_EPS1 = {"elliptic": 1e-6, "burgers": 1e-2, "wave": 1e-2}
_DEFAULT_PROBE = {
    "elliptic": {"probe_x": 0.5, "probe_y": 0.5},
    "burgers": {"probe_x": 1.0, "probe_t": 0.5},
    "wave": {"probe_x": 0.0, "probe_y": 0.0, "probe_t": 1.0},
}


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# key -> (parser, check, message)
_KEYS = {
    "problem": (str, lambda v: v in PROBLEMS, f"must be one of {', '.join(PROBLEMS)}"),
    "M": (int, lambda v: v >= 0, "must be >= 0"),
    "N": (int, lambda v: v >= 2, "must be >= 2"),
    "seed": (int, lambda v: v >= 0, "must be >= 0"),
    "eps1": (float, lambda v: v > 0, "must be > 0"),
    "eps2": (float, lambda v: v > 0, "must be > 0"),
    "max_outer": (int, lambda v: v >= 1, "must be >= 1"),
    "max_inner": (int, lambda v: v >= 1, "must be >= 1"),
    "mesh_nodes": (int, lambda v: v >= 9, "must be >= 9"),
    "coeff_scale": (float, lambda v: v >= 0, "must be >= 0"),
    "Nx": (int, lambda v: v >= 3, "must be >= 3"),
    "Nt": (int, lambda v: v >= 3, "must be >= 3"),
    "gamma": (float, lambda v: v >= 0, "must be >= 0"),
    "initial_amplitude": (float, math.isfinite, "must be finite"),
    "probe_x": (float, math.isfinite, "must be finite"),
    "probe_y": (float, math.isfinite, "must be finite"),
    "probe_t": (float, math.isfinite, "must be finite"),
    "oracle": (_bool, lambda v: True, ""),
    "oracle_samples": (int, lambda v: v >= 100, "must be >= 100"),
    "oracle_seed": (int, lambda v: v >= 0, "must be >= 0"),
    "pdf_points": (int, lambda v: v >= 16, "must be >= 16"),
}


def parse_config(text):
    """Parse and validate a config; returns a dict with defaults filled in."""
    cfg, seen = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ConfigError(f"expected 'key: value', got {raw.strip()!r}", line=lineno)
        key, val = (s.strip() for s in line.split(":", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", line=lineno)
        conv, check, msg = _KEYS[key]
        try:
            v = conv(val)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {val!r}", line=lineno) from None
        if not check(v):
            raise ConfigError(f"{key} {msg}, got {val}", line=lineno)
        cfg[key] = v
        seen[key] = lineno
    if "problem" not in cfg:
        raise ConfigError("missing required key 'problem'")
    prob = cfg["problem"]
    out = {"M": 100, "N": 10000, "seed": 0, "eps1": _DEFAULT_EPS1[prob], "eps2": 1e-3,
           "max_outer": 50, "max_inner": 25, "oracle": False, "oracle_samples": 20000,
           "oracle_seed": None, "pdf_points": 512}
    out.update(_DEFAULT_PROBE[prob])
    out.update(cfg)
    if out["oracle_seed"] is None:
        out["oracle_seed"] = out["seed"]
    if prob != "elliptic" and out["M"] < 1:
        raise ConfigError(f"M must be >= 1 for {prob}", line=seen.get("M"))
    return out


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)


def _fmt(x):
    return format(float(x), ".17g")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


# ---------------------------------------------------------------------------
# per-problem setup
# ---------------------------------------------------------------------------


class _Run:
    """Adapter plus problem-specific artifact writers and oracle."""

    def __init__(self, cfg):
        self.cfg = cfg
        prob = cfg["problem"]
        if prob == "elliptic":
            mesh = fem2d.mesh_square(cfg.get("mesh_nodes", 808))
            self.adapter = elliptic.build_elliptic(cfg["M"], cfg["N"], cfg["seed"], mesh=mesh,
                                                   scale=cfg.get("coeff_scale", 0.3))
        elif prob == "burgers":
            grid = SpaceTimeGrid(Nt=cfg.get("Nt", 101), Nx=cfg.get("Nx", 51))
            amp = cfg.get("initial_amplitude", 0.0)
            self.adapter = burgers.build_burgers(cfg["M"], cfg["N"], cfg["seed"], grid=grid,
                                                 gamma=cfg.get("gamma", 0.0),
                                                 initial_profile=burgers.sine_profile(amp) if amp else None)
        else:
            mesh = fem2d.mesh_disk(cfg.get("mesh_nodes", 549))
            self.adapter = wave.build_wave(cfg["M"], cfg["N"], cfg["seed"], mesh=mesh,
                                           Nt=cfg.get("Nt", 201))

    def probe(self, sol):
        c, a = self.cfg, self.adapter
        if c["problem"] == "elliptic":
            return a.probe_samples(sol, c["probe_x"], c["probe_y"])
        if c["problem"] == "burgers":
            return a.probe_samples(sol, c["probe_x"], c["probe_t"])
        return a.probe_samples(sol, c["probe_x"], c["probe_y"], c["probe_t"])

    def oracle(self, n_mc):
        c, a = self.cfg, self.adapter
        if c["problem"] == "elliptic":
            w = a.probe_functional(c["probe_x"], c["probe_y"])
            return mcoracle.mc_elliptic(a.op, w, n_mc, c["oracle_seed"])
        if c["problem"] == "burgers":
            return mcoracle.mc_burgers(a.config, n_mc, c["oracle_seed"], c["probe_x"], c["probe_t"])
        return mcoracle.mc_wave(a.solver, n_mc, c["oracle_seed"], c["probe_x"], c["probe_y"],
                                c["probe_t"])

    def write_modes(self, sol, path):
        k = len(sol)
        names = [f"d{i + 1}" for i in range(k)]
        prob = self.cfg["problem"]
        if prob == "elliptic":
            mesh = self.adapter.pattern.mesh
            full = [self.adapter.full_field(d) for d in sol.modes]
            rows = ([i, _fmt(mesh.nodes[i, 0]), _fmt(mesh.nodes[i, 1])] + [_fmt(f[i]) for f in full]
                    for i in range(mesh.n_nodes))
            _write_rows(path, ["node", "x", "y"] + names, rows)
        elif prob == "burgers":
            g = self.adapter.grid
            t, x = g.t, g.x
            rows = ([_fmt(t[m]), _fmt(x[i])] + [_fmt(d[m, i]) for d in sol.modes]
                    for m in range(g.Nt) for i in range(g.Nx))
            _write_rows(path, ["t", "x"] + names, rows)
        else:
            s = self.adapter.solver
            free = s.pattern.free
            nodes = self.adapter.config.mesh.nodes
            t = self.adapter.config.t
            rows = ([_fmt(t[m]), int(free[i]), _fmt(nodes[free[i], 0]), _fmt(nodes[free[i], 1])]
                    + [_fmt(d[m, i]) for d in sol.modes]
                    for m in range(t.size) for i in range(free.size))
            _write_rows(path, ["t", "node", "x", "y"] + names, rows)


def _write_artifacts(run, sol, out, oracle_values=None):
    separated.write_history_csv(sol, out / "convergence.csv")
    separated.write_local_trace_csv(sol, out / "local_trace.csv")
    if len(sol) == 0:
        return {}
    run.write_modes(sol, out / "modes.csv")
    L = sol.lambda_matrix()
    _write_rows(out / "lambda_samples.csv", ["sample"] + [f"lambda{i + 1}" for i in range(len(sol))],
                ([n] + [_fmt(v) for v in L[:, n]] for n in range(L.shape[1])))
    vals = run.probe(sol)
    # grid from the separated samples alone so pdf.csv does not depend on --oracle
    grid = stats.default_grid(vals, n=run.cfg["pdf_points"])
    curve = stats.kde(vals, grid)
    stats.write_curve_csv(curve, out / "pdf.csv")
    info = {"probe_mean": float(np.mean(vals)), "probe_std": float(np.std(vals, ddof=1)),
            "pdf_point_mass": curve.point_mass}
    if oracle_values is not None:
        oc = stats.kde(oracle_values, grid)
        stats.write_curve_csv(oc, out / "oracle_pdf.csv")
        info["pdf_l1_distance"] = stats.pdf_l1_distance(curve, oc)
    return info


def _write_summary(path, cfg, sol, info, status, wall):
    lines = [f"status: {status}", f"problem: {cfg['problem']}", f"N: {cfg['N']}", f"M: {cfg['M']}",
             f"seed: {cfg['seed']}", f"eps1: {cfg['eps1']:g}", f"eps2: {cfg['eps2']:g}",
             f"retained_terms: {len(sol)}", f"backend: {_kernels.backend()}"]
    if sol.history:
        lines.append(f"final_eps_global: {sol.history[-1].eps_global:.6e}")
        lines.append(f"stagnated_couples: {sum(r.stagnated for r in sol.history)}")
    for k, v in info.items():
        if v is None:
            continue
        lines.append(f"{k}: {v:.6e}" if isinstance(v, float) else f"{k}: {v}")
    lines.append(f"wall_time_s: {wall:.3f}")
    Path(path).write_text("\n".join(lines) + "\n")


def run(cfg, out_dir, oracle=None, oracle_samples=None):
    """Run one benchmark and write its artifacts; returns an exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    r = _Run(cfg)
    status, code = "converged", EXIT_OK
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", separated.StagnationWarning)
        try:
            start = getattr(r.adapter, "initial_solution", lambda: None)()
            sol = separated.enrich_until_converged(r.adapter, cfg["eps1"], cfg["eps2"],
                                                   cfg["max_outer"], cfg["max_inner"],
                                                   initial=start)
        except NonConvergenceError as exc:
            log.error("%s", exc)
            sol = exc.solution if exc.solution is not None else separated.SeparatedSolution()
            status, code = "not_converged", EXIT_NONCONV
    wall = time.perf_counter() - t0
    use_oracle = cfg["oracle"] if oracle is None else oracle
    oracle_values = None
    if use_oracle:
        res = r.oracle(oracle_samples or cfg["oracle_samples"])
        mcoracle.write_csv(res, out / "oracle_samples.csv")
        oracle_values = res.values
    info = _write_artifacts(r, sol, out, oracle_values)
    if oracle_values is not None:
        info["oracle_mean"] = float(np.mean(oracle_values))
        info["oracle_std"] = float(np.std(oracle_values, ddof=1))
    _write_summary(out / "summary.txt", cfg, sol, info, status, wall)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="sepspde", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    p.add_argument("--oracle", action="store_true", help="also run the Monte Carlo oracle")
    p.add_argument("--oracle-samples", type=int, default=None, help="oracle sample count")
    p.add_argument("--threads", type=int, default=None, help="worker threads for compiled kernels")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.oracle_samples is not None and args.oracle_samples < 100:
            raise ConfigError("--oracle-samples must be >= 100")
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads:
        _kernels.set_threads(args.threads)
    try:
        return run(cfg, args.out, oracle=args.oracle or None, oracle_samples=args.oracle_samples)
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
