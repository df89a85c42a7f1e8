"""Compare the compiled quadrature kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 1000 10000 100000] [--repeat 20]

Each kernel is timed on a P1 mesh of a 3-star with the given number of
elements; the table lists the best time of ``--repeat`` calls per backend
and the largest relative difference between their outputs.  A second table
times a gradient flow in a subprocess under each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from nlsgraph import _kernels_py
from nlsgraph.graph import standard_graph
from nlsgraph.mesh import build_mesh

try:
    from nlsgraph import _kernels as _compiled
except ImportError:
    _compiled = None

SOLVE = """
import time
import numpy as np
from nlsgraph.kernels import BACKEND
from nlsgraph.energy import EnergyParams
from nlsgraph.graph import standard_graph
from nlsgraph.mesh import GraphFunction, build_mesh
from nlsgraph.solvers import normalized_gradient_flow
mesh = build_mesh(standard_graph("star", 1.0, m=3), 1.0 / {n})
x = np.linspace(0.0, 1.0, mesh.n_dofs)
u0 = GraphFunction(mesh, 1.0 + 0.3 * np.cos(3.0 * x))
t0 = time.perf_counter()
normalized_gradient_flow(u0, EnergyParams(8.0, 1.0, 1.0), tol=1e-6)
print(BACKEND, time.perf_counter() - t0)
"""

def _calls(mod, u, mesh, s=6.0):
    return {
        "power_integral": lambda: mod.power_integral(u, mesh.left, mesh.right, mesh.h, s + 2.0),
        "nonlinear_load": lambda: mod.nonlinear_load(u, mesh.left, mesh.right, mesh.h, s, mesh.n_dofs),
        "weight_entries": lambda: mod.weight_entries(u, mesh.left, mesh.right, mesh.h, s),
    }


def _flat(x) -> np.ndarray:
    parts = x if isinstance(x, tuple) else (x,)
    return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in parts])


def _rel_diff(a, b) -> float:
    a, b = _flat(a), _flat(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def bench_kernels(sizes, repeat: int) -> None:
    print(f"{'elements':>9} {'kernel':>15} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8} {'rel.diff':>9}")
    rng = np.random.default_rng(0)
    for n in sizes:
        mesh = build_mesh(standard_graph("star", 1.0, m=3), 3.0 / n)
        u = np.ascontiguousarray(rng.uniform(-1.5, 1.5, mesh.n_dofs))
        py = _calls(_kernels_py, u, mesh)
        cy = _calls(_compiled, u, mesh) if _compiled is not None else {}
        for name, f in py.items():
            t_py = min(timeit.repeat(f, number=1, repeat=repeat)) * 1e3
            if name in cy:
                t_cy = min(timeit.repeat(cy[name], number=1, repeat=repeat)) * 1e3
                diff = _rel_diff(cy[name](), f())
                cols = f"{t_cy:12.3f} {t_py / t_cy:8.2f} {diff:9.1e}"
            else:
                cols = f"{'n/a':>12} {'n/a':>8} {'n/a':>9}"
            print(f"{len(mesh.h):9d} {name:>15} {t_py:11.3f} {cols}")


def bench_solve(n: int) -> None:
    print(f"\ngradient flow to the constant state, 3-star with {n} elements per edge")
    for flag in ("", "1"):
        env = dict(os.environ)
        env.pop("NLSGRAPH_PURE_PYTHON", None)
        if flag:
            env["NLSGRAPH_PURE_PYTHON"] = flag
        out = subprocess.run([sys.executable, "-c", SOLVE.format(n=n)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:>7}: {float(out[1]):.3f} s")


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--flow-elements", type=int, default=20000, help="elements per edge in the flow run")
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; only the numpy column is meaningful")
    bench_kernels(args.sizes, args.repeat)
    bench_solve(args.flow_elements)


if __name__ == "__main__":
    main()
