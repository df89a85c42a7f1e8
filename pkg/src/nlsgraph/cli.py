"""Command-line front end.

Every subcommand writes its CSV outputs, a plain-text verification report
where applicable and ``manifest.json`` into ``--out``.  CSV files contain no
timestamps and print floats with ``repr``, so a fixed configuration and seed
reproduce them byte for byte.  Exit codes: 0 success, 1 solver or
verification failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .blowup import DEFAULT_CUTOFF, DEFAULT_WINDOW, blowup_report, envelope_profile
from .energy import EnergyParams, MorseConfig, energy, lagrange_multiplier
from .errors import (GraphError, InvalidParameter, MassMismatch, NLSGraphError, NoPeaks, SolverFailure,
                     NoConvergence)
from .graph import EdgeCoordinate, MetricGraph, read_graph, write_graph
from .mesh import Mesh, build_mesh, mesh_h_target, read_function_csv, write_function_csv
from .solvers import (BoundState, MountainPassConfig, centred_soliton_state, constant_state, continuation,
                      make_state, mass_threshold, mountain_pass, mu_descent, newton_refine, normalized_gradient_flow,
                      rho_schedule, verify_solution)
from .solvers.descent import DEFAULT_GROWTH, DEFAULT_REFINE, DEFAULT_RESOLUTION
from .spectral import mesh_eigenpairs

log = logging.getLogger("nlsgraph")

COMMANDS = ("eig", "threshold", "solve-constant", "minimize", "mountain-pass", "continue", "blowup", "verify")
EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved inputs of one run; echoed verbatim into the manifest."""

    command: str
    graph: str | None = None
    p: float | None = None
    rho: float | None = None
    mu: float | None = None
    mu_fraction: float | None = None
    h: float | None = None
    tol: float | None = None
    seed: int = 0
    out: str = "."
    options: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command != "blowup":
            if self.graph is None:
                raise ConfigError("--graph is required")
            if not Path(self.graph).is_file():
                raise ConfigError(f"graph file {self.graph!r} not found")
        if self.p is not None and not self.p > 6:
            raise ConfigError(f"--p must exceed 6, got {self.p}")
        if self.mu is not None and self.mu_fraction is not None:
            raise ConfigError("give either --mu or --mu-fraction, not both")
        for name in ("mu", "mu_fraction", "h", "tol"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ConfigError(f"--{name.replace('_', '-')} must be positive, got {v}")
        if self.seed < 0:
            raise ConfigError("--seed must be non-negative")


# --- output helpers ----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


STATE_HEADER = ["kind", "p", "rho", "mu", "lambda", "energy", "mass", "gradient_norm", "strong_residual",
                "morse_unconstrained", "morse_constrained", "iterations", "n_dofs", "h", "max_value", "min_value"]


def _state_row(s: BoundState, h: float) -> list:
    mi = s.morse
    v = s.u.values
    return [s.kind, s.params.p, s.params.rho, s.params.mu, s.lam, s.energy, s.mass, s.residuals.gradient,
            s.residuals.interior, "" if mi is None else mi.unconstrained,
            "" if mi is None else mi.constrained, s.iterations, s.mesh.n_dofs, h, float(v.max()), float(v.min())]


def _write_state(out: Path, s: BoundState, h: float, verify: bool = True) -> bool:
    write_function_csv(s.u, out / "solution.csv")
    write_csv(out / "state.csv", STATE_HEADER, [_state_row(s, h)])
    if not verify:
        return True
    rep = verify_solution(s)
    (out / "verify.txt").write_text(rep.to_text(), encoding="utf-8")
    return rep.passed


# --- context -----------------------------------------------------------------

class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.summary: dict = {}
        self._graph: MetricGraph | None = None
        self._mesh: Mesh | None = None

    @property
    def graph(self) -> MetricGraph:
        if self._graph is None:
            self._graph = read_graph(self.cfg.graph)
        return self._graph

    @property
    def h(self) -> float:
        return self.cfg.h if self.cfg.h is not None else min(e.length for e in self.graph.edges) / 64.0

    @property
    def mesh(self) -> Mesh:
        if self._mesh is None:
            self._mesh = build_mesh(self.graph, self.h)
        return self._mesh

    def p(self) -> float:
        if self.cfg.p is None:
            raise ConfigError(f"{self.cfg.command} needs --p")
        return self.cfg.p

    def params(self, rho: float | None = None) -> EnergyParams:
        p = self.p()
        if self.cfg.mu is not None:
            mu = self.cfg.mu
        elif self.cfg.mu_fraction is not None:
            th = mass_threshold(self.mesh, p, seed=self.cfg.seed)
            mu = self.cfg.mu_fraction * th.mu1
            self.summary["mu1"] = th.mu1
        else:
            raise ConfigError(f"{self.cfg.command} needs --mu or --mu-fraction")
        self.summary["mu"] = mu
        r = rho if rho is not None else (self.cfg.rho if self.cfg.rho is not None else 1.0)
        return EnergyParams(p, r, mu)


# --- subcommands -------------------------------------------------------------

def _cmd_eig(run: _Run) -> int:
    k = run.cfg.options.get("k", 4)
    res = mesh_eigenpairs(run.mesh, k=k, tol=run.cfg.tol or 1e-10, seed=run.cfg.seed)
    write_csv(run.out / "eigenvalues.csv", ["index", "eigenvalue", "residual"],
              [(i, lam, r) for i, (lam, r) in enumerate(zip(res.eigenvalues, res.residuals))])
    (run.out / "eigenfunctions").mkdir(exist_ok=True)
    for i in range(len(res.eigenvalues)):
        write_function_csv(res.eigenfunction(i), run.out / "eigenfunctions" / f"phi_{i:02d}.csv")
    for i, lam in enumerate(res.eigenvalues):
        print(f"lambda_{i} = {float(lam)!r}")
    run.summary["eigenvalues"] = [float(x) for x in res.eigenvalues]
    return EXIT_OK


def _cmd_threshold(run: _Run) -> int:
    p = run.p()
    th = mass_threshold(run.mesh, p, tol=run.cfg.tol or 1e-10, seed=run.cfg.seed)
    rows = [("p", p), ("total_length", run.graph.total_length), ("lambda2", th.lambda2),
            ("multiplicity", th.multiplicity), ("mu1", th.mu1), ("mu1_lower_bound", th.bound)]
    write_csv(run.out / "threshold.csv", ["quantity", "value"], rows)
    print(f"mu1 = {th.mu1!r}")
    print(f"lambda2 = {th.lambda2!r} (multiplicity {th.multiplicity})")
    print(f"mu1 lower bound = {th.bound!r}")
    run.summary.update(mu1=th.mu1, lambda2=th.lambda2, multiplicity=th.multiplicity, bound=th.bound)
    return EXIT_OK


def _cmd_solve_constant(run: _Run) -> int:
    P = run.params()
    s = constant_state(run.mesh, P, MorseConfig())
    ok = _write_state(run.out, s, run.h)
    print(f"kappa = {float(s.u.values[0])!r}")
    print(f"lambda = {s.lam!r}")
    print(f"energy = {s.energy!r}")
    return EXIT_OK if ok else EXIT_FAILURE


def _cmd_minimize(run: _Run) -> int:
    P = run.params()
    o = run.cfg.options
    mesh = run.mesh
    kappa = constant_state(mesh, P).u.values
    # seeded smooth perturbation: random combination of low eigenfunctions
    res = mesh_eigenpairs(mesh, k=min(5, mesh.n_dofs), seed=run.cfg.seed)
    rng = np.random.default_rng(run.cfg.seed)
    direction = res.eigenvectors[:, 1:] @ rng.standard_normal(res.eigenvectors.shape[1] - 1)
    direction /= np.max(np.abs(direction))
    u0 = mesh.function(kappa + o.get("perturb", 0.5) * kappa[0] * direction)
    flow = normalized_gradient_flow(u0, P, tol=run.cfg.tol or 1e-9, max_iters=o.get("max_iters", 5000),
                                    positive=not o.get("signed", False))
    write_csv(run.out / "history.csv", ["iteration", "energy", "gradient_norm"],
              [(i, e, g) for i, (e, g) in enumerate(flow.history)])
    # the flow stops on a weak-norm tolerance; Newton sharpens the nodal residual
    s = newton_refine(flow.u, flow.lam, P, kind="minimizer", morse_cfg=MorseConfig())
    run.summary.update(flow_iterations=flow.iterations, newton_iterations=s.iterations)
    ok = _write_state(run.out, s, run.h)
    print(f"energy = {s.energy!r}")
    print(f"lambda = {s.lam!r}")
    return EXIT_OK if ok else EXIT_FAILURE


def _mp_config(run: _Run) -> MountainPassConfig:
    o = run.cfg.options
    center = None
    if o.get("bump_edge") is not None:
        center = EdgeCoordinate(o["bump_edge"], o.get("bump_s", 0.0))
    return MountainPassConfig(n_nodes=o.get("nodes", 33), tol_mp=o.get("tol_mp", 1e-3),
                              max_iters=o.get("max_iters", 20000), newton_tol=run.cfg.tol or 1e-10,
                              bump_center=center)


def _cmd_mountain_pass(run: _Run) -> int:
    P = run.params()
    res = mountain_pass(run.mesh, P, _mp_config(run))
    s = res.candidate
    write_csv(run.out / "levels.csv", ["sweep", "level"], enumerate(res.level_history))
    write_csv(run.out / "path.csv", ["node", "energy"], [(i, energy(u, P)) for i, u in enumerate(res.path)])
    ok = _write_state(run.out, s, run.h)
    kappa = constant_state(run.mesh, P)
    print(f"energy = {s.energy!r} (constant state {kappa.energy!r})")
    print(f"lambda = {s.lam!r}")
    print(f"morse = {tuple(s.morse) if s.morse else None}")
    run.summary.update(level=res.level, sweeps=res.iterations)
    return EXIT_OK if ok else EXIT_FAILURE


TRACE_HEADER = ["step", "parameter", "value", "p", "rho", "mu", "lambda", "energy", "mass", "h", "n_dofs",
                "max_value", "morse_unconstrained", "morse_constrained", "newton_iterations", "increment",
                "verified"]


def _cmd_continue(run: _Run) -> int:
    o = run.cfg.options
    param = o.get("param", "rho")
    tol = run.cfg.tol or 1e-10
    if param == "rho":
        rho0 = run.cfg.rho if run.cfg.rho is not None else 0.5
        P = run.params(rho0)
        start = mountain_pass(run.mesh, P, _mp_config(run)).candidate
        schedule = rho_schedule(rho0, o.get("rho_stop", 1.0), o.get("steps", 5))
        trace = continuation(start, schedule, "rho", newton_tol=tol, morse_cfg=MorseConfig())
    elif param == "mu":
        g = run.graph
        if len(g.edges) != 1 or g.edges[0].a == g.edges[0].b:
            raise ConfigError("mass descent needs a single-edge interval graph")
        P = run.params()
        res, growth, refine = o.get("resolution", DEFAULT_RESOLUTION), o.get("growth", DEFAULT_GROWTH), \
            o.get("refine", DEFAULT_REFINE)
        start = centred_soliton_state(g.total_length, P, res, growth, tol)
        trace = mu_descent(start, o.get("halvings", 6), res, growth, refine, tol, MorseConfig())
    else:
        raise ConfigError(f"--param must be rho or mu, got {param!r}")

    rows = []
    ok = True
    for i, e in enumerate(trace.entries):
        s = e.state
        h = mesh_h_target(s.mesh) if param == "mu" else run.h
        step_dir = run.out / "steps" / f"step_{i:03d}"
        step_dir.mkdir(parents=True, exist_ok=True)
        write_graph(s.mesh.graph, step_dir / "graph.g")
        write_function_csv(s.u, step_dir / "solution.csv")
        (step_dir / "verify.txt").write_text(e.report.to_text(), encoding="utf-8")
        mi = s.morse
        rows.append([i, param, e.value, s.params.p, s.params.rho, s.params.mu, s.lam, s.energy, s.mass, h,
                     s.mesh.n_dofs, float(s.u.values.max()), "" if mi is None else mi.unconstrained,
                     "" if mi is None else mi.constrained, s.iterations, e.step, e.report.passed])
        ok &= e.report.passed
        print(f"{param} = {e.value!r}  lambda = {s.lam!r}  verified = {e.report.passed}")
    write_csv(run.out / "trace.csv", TRACE_HEADER, rows)
    st = trace.stats
    run.summary.update(parameter=param, steps=len(trace), stats=asdict(st))
    return EXIT_OK if ok else EXIT_FAILURE


def _load_trace(trace_dir: Path) -> list[tuple[dict, BoundState]]:
    path = trace_dir / "trace.csv"
    if not path.is_file():
        raise ConfigError(f"{trace_dir} holds no trace.csv")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        step_dir = trace_dir / "steps" / f"step_{int(row['step']):03d}"
        g = read_graph(step_dir / "graph.g")
        mesh = build_mesh(g, float(row["h"]))
        u = read_function_csv(step_dir / "solution.csv", mesh)
        P = EnergyParams(float(row["p"]), float(row["rho"]), float(row["mu"]))
        out.append((row, make_state(u, float(row["lambda"]), P)))
    return out


BLOWUP_HEADER = ["step", "value", "lambda", "eps", "n_peaks", "peak", "edge", "s", "u_peak", "peak_bound_ratio",
                 "regime", "eps_ratio", "vertex_distance", "degree", "sup_error", "truncated",
                 "envelope_passed", "envelope_margin", "envelope_tested", "fitted_C2"]


def _cmd_blowup(run: _Run) -> int:
    o = run.cfg.options
    trace_dir = o.get("trace")
    if trace_dir is None:
        raise ConfigError("blowup needs --trace DIR")
    window, cutoff = o.get("window", DEFAULT_WINDOW), o.get("cutoff", DEFAULT_CUTOFF)
    C1, C2 = o.get("C1", 2.0), o.get("C2", 0.25)
    rows = []
    profiles = []
    ok = True
    for row, s in _load_trace(Path(trace_dir)):
        i = int(row["step"])
        try:
            rep = blowup_report(s, window, cutoff, C1, C2)
        except NoPeaks as exc:
            log.error("step %d: %s", i, exc)
            ok = False
            continue
        env = rep.envelope
        bound = s.lam ** (1.0 / (s.params.p - 2.0))
        for k, (pk, prof) in enumerate(zip(rep.peaks.peaks, rep.profiles)):
            rows.append([i, float(row["value"]), s.lam, rep.eps, len(rep.peaks), k, pk.coordinate.edge,
                         pk.coordinate.s, pk.value, pk.value / bound, prof.regime, prof.ratio,
                         prof.vertex_distance, prof.degree, prof.sup_error, prof.truncated, env.passed,
                         env.worst_margin, env.tested, rep.fitted_C2])
            order = np.lexsort((prof.y, prof.branch))
            write_csv(run.out / "profiles" / f"step_{i:03d}_peak_{k}.csv", ["branch", "y", "v", "limit"],
                      zip(prof.branch[order], prof.y[order], prof.v[order], prof.limit[order]))
            profiles.append((i, k))
        dist, envelope, tested = envelope_profile(s, rep.peaks, C1, C2, window)
        order = np.argsort(dist, kind="stable")
        write_csv(run.out / "envelope" / f"step_{i:03d}.csv", ["scaled_distance", "u", "envelope", "tested"],
                  zip(dist[order], s.u.values[order], envelope[order], tested[order]))
        for note in rep.notes:
            log.warning("step %d: %s", i, note)
        print(f"step {i}: lambda = {s.lam!r}  peaks = {len(rep.peaks)}  "
              f"sup_error = {[p.sup_error for p in rep.profiles]}  envelope = {env.passed}  "
              f"fitted_C2 = {rep.fitted_C2!r}")
    write_csv(run.out / "blowup.csv", BLOWUP_HEADER, rows)
    _write_plot_script(run.out, profiles, sorted({r[0] for r in rows}))
    return EXIT_OK if ok else EXIT_FAILURE


def _write_plot_script(out: Path, profiles, steps) -> None:
    lines = ["# gnuplot script: rescaled profiles against the limit profile and u against the envelope",
             "set datafile separator ','", "set key autotitle columnhead", "set terminal svg size 800,500",
             "set xlabel 'y'", ""]
    for i, k in profiles:
        lines += [f"set output 'profile_step_{i:03d}_peak_{k}.svg'",
                  f"set title 'step {i}, peak {k}'",
                  f"plot 'profiles/step_{i:03d}_peak_{k}.csv' using 2:3 with points pt 7 ps 0.4 title 'v', \\",
                  f"     '' using 2:4 with lines title 'limit'", ""]
    lines += ["set logscale y", "set xlabel 'lambda^(1/2) dist to nearest peak'"]
    for i in steps:
        lines += [f"set output 'envelope_step_{i:03d}.svg'", f"set title 'step {i}'",
                  f"plot 'envelope/step_{i:03d}.csv' using 1:2 with points pt 7 ps 0.3 title 'u', \\",
                  f"     '' using 1:3 with lines title 'envelope'", ""]
    (out / "plot.gp").write_text("\n".join(lines), encoding="utf-8")


def _cmd_verify(run: _Run) -> int:
    o = run.cfg.options
    sol = o.get("solution")
    if sol is None:
        raise ConfigError("verify needs --solution FILE")
    P = run.params()
    u = read_function_csv(sol, run.mesh)
    lam = o.get("lam")
    if lam is None:
        lam = lagrange_multiplier(u, P)
    s = make_state(u, lam, P, kind=o.get("kind", "solution"))
    rep = verify_solution(s, morse_cfg=MorseConfig() if s.kind == "mountain-pass" else None)
    text = rep.to_text()
    (run.out / "verify.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_FAILURE


HANDLERS = {"eig": _cmd_eig, "threshold": _cmd_threshold, "solve-constant": _cmd_solve_constant,
            "minimize": _cmd_minimize, "mountain-pass": _cmd_mountain_pass, "continue": _cmd_continue,
            "blowup": _cmd_blowup, "verify": _cmd_verify}


# --- driver ------------------------------------------------------------------

def _versions() -> dict:
    return {"nlsgraph": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "kernel_backend": kernels.BACKEND}


def _write_manifest(run: _Run, code: int, wall: float, error: str | None) -> None:
    cfg = run.cfg
    graph_text = None
    if cfg.graph is not None and Path(cfg.graph).is_file():
        graph_text = Path(cfg.graph).read_text(encoding="utf-8")
    source = None
    if cfg.command == "blowup" and cfg.options.get("trace"):
        m = Path(cfg.options["trace"]) / "manifest.json"
        if m.is_file():
            source = json.loads(m.read_text(encoding="utf-8"))
    outputs = {str(p.relative_to(run.out)): _sha256(p) for p in sorted(run.out.rglob("*"))
               if p.is_file() and p.name != "manifest.json"}
    try:
        h = run.h if cfg.graph else None
    except (GraphError, OSError):
        h = None
    manifest = {"command": cfg.command, "config": asdict(cfg), "resolved": {"h": h},
                "graph_text": graph_text, "source_manifest": source, "versions": _versions(),
                "results": run.summary, "exit_code": code, "error": error, "wall_time_s": wall,
                "outputs": outputs}
    (run.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default)
                                           + "\n", encoding="utf-8")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return str(x)


def run(cfg: RunConfig) -> int:
    """Execute one subcommand; returns the exit code."""
    t0 = time.perf_counter()
    error = None
    try:
        cfg.validate()
    except ConfigError as exc:
        print(f"nlsgraph: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    r = _Run(cfg)
    try:
        code = HANDLERS[cfg.command](r)
    except (ConfigError, GraphError, InvalidParameter, MassMismatch, OSError) as exc:
        error = f"{type(exc).__name__}: {exc}"
        code = EXIT_CONFIG
    except (SolverFailure, NoConvergence, NoPeaks) as exc:
        error = f"{type(exc).__name__}: {exc}"
        code = EXIT_FAILURE
    if error:
        print(f"nlsgraph: error: {error}", file=sys.stderr)
    elif code == EXIT_FAILURE:
        print("nlsgraph: verification failed", file=sys.stderr)
    try:
        _write_manifest(r, code, time.perf_counter() - t0, error)
    except (GraphError, OSError) as exc:
        print(f"nlsgraph: could not write manifest: {exc}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlsgraph", description="Prescribed-mass NLS bound states on metric graphs.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, mass: bool = True):
        sp.add_argument("--graph", required=True, help="graph file ([vertices]/[edges] format)")
        sp.add_argument("--p", type=float, help="nonlinearity exponent (> 6)")
        sp.add_argument("--rho", type=float, help="weight of the nonlinear term, in [1/2, 1]")
        if mass:
            m = sp.add_mutually_exclusive_group()
            m.add_argument("--mu", type=float, help="prescribed mass")
            m.add_argument("--mu-fraction", type=float, help="prescribed mass as a multiple of mu_1")
        sp.add_argument("--h", type=float, help="target mesh spacing (default: shortest edge / 64)")
        sp.add_argument("--tol", type=float, help="solver tolerance")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("-v", "--verbose", action="store_true")

    def mp_flags(sp):
        sp.add_argument("--nodes", type=int, default=33, help="path nodes")
        sp.add_argument("--tol-mp", type=float, default=1e-3, help="relative gradient tolerance at the path top")
        sp.add_argument("--max-iters", type=int, default=20000)
        sp.add_argument("--bump-edge", help="edge id of the bump centre")
        sp.add_argument("--bump-s", type=float, default=0.0, help="arclength of the bump centre on --bump-edge")

    sp = sub.add_parser("eig", help="lowest Kirchhoff Laplacian eigenpairs")
    common(sp, mass=False)
    sp.add_argument("--k", type=int, default=4, help="number of eigenpairs")
    common(sub.add_parser("threshold", help="mass threshold mu_1"), mass=False)
    common(sub.add_parser("solve-constant", help="constant bound state"))
    sp = sub.add_parser("minimize", help="projected gradient flow from a seeded perturbation of the constant")
    common(sp)
    sp.add_argument("--perturb", type=float, default=0.5, help="perturbation amplitude relative to the constant")
    sp.add_argument("--max-iters", type=int, default=5000)
    sp.add_argument("--signed", action="store_true", help="do not replace iterates by their absolute value")
    sp = sub.add_parser("mountain-pass", help="mountain-pass bound state")
    common(sp)
    mp_flags(sp)
    sp = sub.add_parser("continue", help="continuation in rho or mass descent in mu")
    common(sp)
    mp_flags(sp)
    sp.add_argument("--param", choices=("rho", "mu"), default="rho")
    sp.add_argument("--rho-stop", type=float, default=1.0)
    sp.add_argument("--steps", type=int, default=5, help="rho schedule length")
    sp.add_argument("--halvings", type=int, default=6, help="mass halvings")
    sp.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION, help="elements per soliton width")
    sp.add_argument("--growth", type=float, default=DEFAULT_GROWTH, help="grading ratio of the mass-descent mesh")
    sp.add_argument("--refine", type=float, default=DEFAULT_REFINE, help="resolution factor per halving")
    sp = sub.add_parser("blowup", help="concentration diagnostics along a continuation trace")
    sp.add_argument("--trace", required=True, help="output directory of a continue run")
    sp.add_argument("--window", type=float, default=DEFAULT_WINDOW)
    sp.add_argument("--cutoff", type=float, default=DEFAULT_CUTOFF)
    sp.add_argument("--C1", type=float, default=2.0)
    sp.add_argument("--C2", type=float, default=0.25)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=".")
    sp.add_argument("-v", "--verbose", action="store_true")
    sp = sub.add_parser("verify", help="re-check a stored solution")
    common(sp)
    sp.add_argument("--solution", required=True, help="solution CSV (edge,s,value)")
    sp.add_argument("--lambda", dest="lam", type=float, help="multiplier (default: recomputed)")
    sp.add_argument("--kind", choices=("solution", "mountain-pass"), default="solution")
    return ap


_CORE = {"command", "graph", "p", "rho", "mu", "mu_fraction", "h", "tol", "seed", "out", "verbose"}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = vars(ns)
    opts = {k: v for k, v in d.items() if k not in _CORE}
    return RunConfig(command=ns.command, graph=d.get("graph"), p=d.get("p"), rho=d.get("rho"), mu=d.get("mu"),
                     mu_fraction=d.get("mu_fraction"), h=d.get("h"), tol=d.get("tol"), seed=ns.seed,
                     out=ns.out, options=opts)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return run(config_from_args(ns))


if __name__ == "__main__":
    sys.exit(main())
