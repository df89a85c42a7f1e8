"""Min-max over paths joining the constant state to a concentrated bump."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..energy import EnergyParams, MorseConfig, dual_norm, energy, gradient, lagrange_multiplier
from ..errors import EdgeTooShort, InvalidParameter, MaxItersExceeded, PathCollapse
from ..graph import EdgeCoordinate
from ..mesh import GraphFunction, Mesh, nonlinear_load, point_distances
from .flow import SobolevStepper, constrained_gradient_norm, renormalize
from .newton import newton_refine
from .state import BoundState, constant_state, make_state, mass_threshold

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MountainPassConfig:
    n_nodes: int = 33
    tol_mp: float = 1e-3
    max_iters: int = 20000
    redistribute_every: int = 5
    step: float = 1.0
    newton_tol: float = 1e-10
    bump_center: EdgeCoordinate | None = None
    morse: MorseConfig = field(default_factory=MorseConfig)

    def __post_init__(self):
        if self.n_nodes < 3:
            raise InvalidParameter("a path needs at least 3 nodes")
        if not self.tol_mp > 0:
            raise InvalidParameter("tol_mp must be positive")


@dataclass(frozen=True)
class MountainPassResult:
    """``level`` is the top node energy of the final path; ``level_history``
    holds the path maximum (nodes and chord interiors) after every sweep."""

    candidate: BoundState
    level: float
    path: tuple[GraphFunction, ...]
    iterations: int
    endpoint_energies: tuple[float, float]
    level_history: tuple[float, ...] = field(default=(), repr=False)


def relative_gradient_norm(u: GraphFunction, params: EnergyParams) -> float:
    """``||g_c||`` measured against the nonlinear term ``||rho N(u)||`` (both in M^-1)."""
    scale = dual_norm(params.rho * nonlinear_load(u, params.p - 2), u.mesh) if params.rho else 1.0
    return constrained_gradient_norm(u, params) / max(scale, 1e-300)


def _bump_profile(dist: np.ndarray, radius: float) -> np.ndarray:
    out = np.zeros_like(dist)
    inside = dist < radius
    out[inside] = np.cos(0.5 * math.pi * dist[inside] / radius) ** 2
    return out


def default_bump_center(g) -> EdgeCoordinate:
    """Pendant end of the longest edge, or its midpoint when both ends are shared.

    A concentrated bump at a pendant vertex has far lower energy than one
    inside an edge, so the path starting from it crosses a much lower ridge.
    """
    longest = max(g.edges, key=lambda e: e.length)
    deg = g.degree
    if not longest.is_loop:
        if deg[longest.b] == 1:
            return EdgeCoordinate(longest.id, longest.length)
        if deg[longest.a] == 1:
            return EdgeCoordinate(longest.id, 0.0)
    return EdgeCoordinate(longest.id, 0.5 * longest.length)


def build_bump(mesh: Mesh, params: EnergyParams, center: EdgeCoordinate | None = None,
               max_doublings: int = 60) -> tuple[GraphFunction, float]:
    """Concentrated cos^2 cap ``w`` of mass ``mu`` with ``E_{1/2}(w) < E_1(kappa)``.

    The cap has support length ``min(l, 1) / t`` around ``center`` (by
    default ``default_bump_center``), with ``l`` the length of the edge
    holding the center; ``t`` doubles from 1 until the energy test holds.
    Returns ``(w, t)``.

    Raises
    ------
    EdgeTooShort
        The cap shrank below three mesh nodes before the test was met.
    """
    g = mesh.graph
    if center is None:
        center = default_bump_center(g)
    base = min(g.edge(center.edge).length, 1.0)
    dist = point_distances(mesh, center)
    target = constant_state(mesh, params.replace(rho=1.0)).energy
    half = params.replace(rho=0.5)
    t = 1.0
    for _ in range(max_doublings + 1):
        prof = _bump_profile(dist, 0.5 * base / t)
        if np.count_nonzero(prof) < 3:
            raise EdgeTooShort(f"bump unresolved at t={t:g}; refine the mesh")
        w = renormalize(prof, mesh, params.mu)
        if energy(w, half) < target:
            return w, t
        t *= 2.0
    raise EdgeTooShort(f"no admissible bump within {max_doublings} doublings")


def _h1(d: np.ndarray, mesh: Mesh) -> float:
    return math.sqrt(max(float(d @ (mesh.K @ d) + d @ (mesh.M @ d)), 0.0))


# Tail segments (past the barrier, below the constant level) count this much
# in the node spacing.  Their energy falls without bound toward concentrated
# states and would otherwise drain all nodes from the barrier.
TAIL_WEIGHT = 0.05
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class _Path:
    """Polygonal path on the mass sphere.

    Segment ``j`` is the renormalized chord between nodes ``j`` and ``j+1``;
    any point of it is again a combination of the two nodes, so inserting
    such a point as a node leaves the path unchanged.
    """

    def __init__(self, vals: list[np.ndarray], mesh: Mesh, params: EnergyParams):
        self.mesh = mesh
        self.params = params
        self.vals = [np.asarray(v, dtype=float) for v in vals]
        self.E = [self.energy(v) for v in self.vals]
        self.S = [self.arc_max(j)[0] for j in range(len(vals) - 1)]

    def __len__(self) -> int:
        return len(self.vals)

    def energy(self, v: np.ndarray) -> float:
        return energy(GraphFunction(self.mesh, v), self.params)

    def point(self, a: np.ndarray, b: np.ndarray, th: float) -> np.ndarray:
        return renormalize((1 - th) * a + th * b, self.mesh, self.params.mu).values

    def chord_max(self, a: np.ndarray, b: np.ndarray, ea: float, eb: float) -> tuple[float, float]:
        """Maximum of the energy along a chord and where it sits (coarse scan, then golden search)."""
        th = np.linspace(0.0, 1.0, 7)
        f = np.empty(7)
        f[0], f[-1] = ea, eb
        for k in range(1, 6):
            f[k] = self.energy(self.point(a, b, th[k]))
        k = int(np.argmax(f))
        if k in (0, 6):
            # an endpoint maximum can still hide a bulge just inside the chord
            end, other = (a, b) if k == 0 else (b, a)
            if self.inward_slope(end, other) <= 0.0:
                return float(f[k]), float(th[k])
        lo, hi = th[max(k - 1, 0)], th[min(k + 1, 6)]
        best, arg = f[k], th[k]
        x1 = hi - GOLDEN * (hi - lo)
        x2 = lo + GOLDEN * (hi - lo)
        f1, f2 = self.energy(self.point(a, b, x1)), self.energy(self.point(a, b, x2))
        for _ in range(10):
            if f1 > f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - GOLDEN * (hi - lo)
                f1 = self.energy(self.point(a, b, x1))
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + GOLDEN * (hi - lo)
                f2 = self.energy(self.point(a, b, x2))
        for x, fx in ((x1, f1), (x2, f2)):
            if fx > best:
                best, arg = fx, x
        return float(best), float(arg)

    def inward_slope(self, end: np.ndarray, other: np.ndarray) -> float:
        """Sign-carrying derivative of the energy leaving ``end`` along the chord toward ``other``."""
        d = other - end
        t = d - (end @ (self.mesh.M @ d)) / self.params.mu * end
        return float(gradient(GraphFunction(self.mesh, end), self.params) @ t)

    def arc_max(self, j: int) -> tuple[float, float]:
        return self.chord_max(self.vals[j], self.vals[j + 1], self.E[j], self.E[j + 1])

    @property
    def top(self) -> int:
        return 1 + int(np.argmax(self.E[1:-1]))

    @property
    def ceiling(self) -> float:
        return max(max(self.E), max(self.S))

    def tail_start(self) -> int:
        """First node past the top below the constant endpoint; the path after it is frozen."""
        i = self.top
        for k in range(i + 1, len(self)):
            if self.E[k] < self.E[0]:
                return k
        return len(self) - 1

    def seg_length(self, j: int, tail: int) -> float:
        h1 = _h1(self.vals[j + 1] - self.vals[j], self.mesh)
        if j >= tail:
            return TAIL_WEIGHT * h1
        # energy variation along the chord, counting an interior bulge twice
        dE = abs(self.S[j] - self.E[j]) + abs(self.S[j] - self.E[j + 1])
        return math.sqrt(h1 * h1 + dE * dE)

    def try_move(self, j: int, v: np.ndarray, e: float, ceiling: float) -> bool:
        """Replace node ``j`` unless an adjacent chord would rise above ``ceiling``."""
        sl = self.chord_max(self.vals[j - 1], v, self.E[j - 1], e)[0]
        if sl > ceiling:
            return False
        sr = self.chord_max(v, self.vals[j + 1], e, self.E[j + 1])[0]
        if sr > ceiling:
            return False
        self.vals[j], self.E[j] = v, e
        self.S[j - 1], self.S[j] = sl, sr
        return True

    def rebalance(self, max_moves: int | None = None) -> int:
        """Move nodes from short segments to the longest head segment.

        A node is removed only when the chord replacing its two segments
        stays below the current ceiling; the inserted node lies on an
        existing segment.  Returns the number of moves.
        """
        moves = 0
        ceiling = self.ceiling
        for _ in range(max_moves or len(self)):
            tail = self.tail_start()
            top = self.top
            L = [self.seg_length(j, tail) for j in range(len(self) - 1)]
            js = int(np.argmax(L[:tail])) if tail > 0 else 0
            done = False
            for k in sorted(range(1, len(self) - 1), key=lambda k: L[k - 1] + L[k]):
                if L[k - 1] + L[k] > 0.5 * L[js]:
                    break
                if k == top or k in (js, js + 1):
                    continue
                merged, _ = self.chord_max(self.vals[k - 1], self.vals[k + 1], self.E[k - 1], self.E[k + 1])
                if merged > ceiling:
                    continue
                self._split(js, k, merged)
                done = True
                break
            if not done:
                break
            moves += 1
        return moves

    def promote_top(self) -> bool:
        """Make the path maximum a node when it lies inside a chord."""
        js = int(np.argmax(self.S))
        if self.S[js] <= max(self.E):
            return False
        tail = self.tail_start()
        L = [self.seg_length(j, tail) for j in range(len(self) - 1)]
        ceiling = self.ceiling
        for k in sorted(range(1, len(self) - 1), key=lambda k: L[k - 1] + L[k]):
            if k in (js, js + 1):
                continue
            merged, _ = self.chord_max(self.vals[k - 1], self.vals[k + 1], self.E[k - 1], self.E[k + 1])
            if merged <= ceiling:
                self._split(js, k, merged, at_top=True)
                return True
        return False

    def _split(self, js: int, k: int, merged: float, at_top: bool = False) -> None:
        # split segment js at its top when that lies inside, else at the middle
        smax, th = self.arc_max(js)
        if not at_top and (not 0.05 < th < 0.95 or smax <= max(self.E[js], self.E[js + 1])):
            th = 0.5
        v = self.point(self.vals[js], self.vals[js + 1], th)
        e = self.energy(v)
        a, b = self.vals[js], self.vals[js + 1]
        ea, eb = self.E[js], self.E[js + 1]
        left = self.chord_max(a, v, ea, e)[0]
        right = self.chord_max(v, b, e, eb)[0]
        # remove node k first when it precedes the split so indices stay valid
        if k < js:
            self._merge(k, merged)
            js -= 1
            self._insert(js, v, e, left, right)
        else:
            self._insert(js, v, e, left, right)
            self._merge(k + 1, merged)

    def _merge(self, k: int, merged: float) -> None:
        del self.vals[k], self.E[k]
        self.S[k - 1:k + 1] = [merged]

    def _insert(self, js: int, v, e, left, right) -> None:
        self.vals.insert(js + 1, v)
        self.E.insert(js + 1, e)
        self.S[js:js + 1] = [left, right]


def _initial_path(kappa: GraphFunction, bump: GraphFunction, params: EnergyParams, n: int) -> _Path:
    """Nodes on the renormalized chord from ``kappa`` to the bump, then rebalanced.

    All start nodes lie on a single chord, so any choice of them describes
    the same path.  The barrier next to ``kappa`` can be much narrower than
    ``1/n`` in the chord parameter, hence the geometric start grid.
    """
    mesh = kappa.mesh
    grid = np.concatenate([[0.0], np.geomspace(1e-4, 1.0, n - 1)])
    vals = [renormalize((1 - s) * kappa.values + s * bump.values, mesh, params.mu).values for s in grid]
    vals[0] = kappa.values.copy()
    vals[-1] = bump.values.copy()
    path = _Path(vals, mesh, params)
    path.rebalance(4 * n)
    return path


def mountain_pass(mesh: Mesh, params: EnergyParams, cfg: MountainPassConfig = MountainPassConfig(),
                  bump: GraphFunction | None = None) -> MountainPassResult:
    """Deform a polygonal path from ``kappa`` to a bump until its top is critical.

    Every sweep the highest node takes one backtracked descent step on the
    mass sphere in the H^1 metric; when that is blocked, its higher
    neighbour steps instead.  Every ``cfg.redistribute_every`` sweeps nodes
    are moved from short segments to long ones in energy-arclength.  No
    change is accepted that lifts any chord above the current path maximum,
    so that maximum never increases.  The top node is finally polished by
    Newton.

    Raises
    ------
    PathCollapse
        The top of the path merged into the constant endpoint.
    MaxItersExceeded
        ``cfg.tol_mp`` not reached; the top node is attached as ``state``.
    """
    th = mass_threshold(mesh, params.p)
    if params.mu >= th.mu1:
        log.warning("mu = %.6g >= mu_1 = %.6g: outside the supported range, proceeding anyway",
                    params.mu, th.mu1)
    kappa = constant_state(mesh, params)
    if bump is None:
        bump, _ = build_bump(mesh, params, cfg.bump_center)
    path = _initial_path(kappa.u, bump, params, cfg.n_nodes)
    sigma = np.full(len(path), cfg.step)
    stepper = None
    levels = []
    iters = 0
    for iters in range(cfg.max_iters + 1):
        path.promote_top()
        i = path.top
        c = path.E[i]
        ceiling = path.ceiling
        levels.append(ceiling)
        if c <= path.E[0] + 1e-12 * abs(path.E[0]):
            raise PathCollapse("path maximum reached the constant endpoint", kappa)
        u = GraphFunction(mesh, path.vals[i])
        if relative_gradient_norm(u, params) <= cfg.tol_mp:
            break
        if iters == cfg.max_iters:
            raise MaxItersExceeded(f"mountain pass: tol_mp not met after {iters} sweeps",
                                   _top_state(u, params))
        lam = lagrange_multiplier(u, params)
        if stepper is None or not 0.5 <= max(1.0, lam) / stepper.alpha <= 2.0:
            stepper = SobolevStepper(mesh, max(1.0, lam))
        if not _descend(path, i, stepper, sigma, cfg, ceiling):
            # two nodes straddling the ridge top block each other: lower the
            # higher neighbour first
            k = max((j for j in (i - 1, i + 1) if 0 < j < len(path) - 1), key=lambda j: path.E[j], default=None)
            if k is not None:
                _descend(path, k, stepper, sigma, cfg, ceiling)
        if (iters + 1) % cfg.redistribute_every == 0 and path.rebalance():
            sigma[:] = cfg.step

    cand = newton_refine(u, lagrange_multiplier(u, params), params, tol=cfg.newton_tol,
                         kind="mountain-pass", morse_cfg=cfg.morse)
    if np.max(np.abs(cand.u.values - kappa.u.values)) <= 1e-3 * kappa.u.values[0]:
        raise PathCollapse("Newton refinement returned the constant state", cand)
    funcs = tuple(GraphFunction(mesh, v) for v in path.vals)
    return MountainPassResult(cand, float(c), funcs, iters, (float(path.E[0]), float(path.E[-1])),
                              tuple(levels))


def _descend(path: _Path, j: int, stepper: SobolevStepper, sigma: np.ndarray, cfg: MountainPassConfig,
             ceiling: float) -> bool:
    """One backtracked descent step for node ``j``, limited to half the distance to its neighbours."""
    mesh = path.mesh
    gap = min(_h1(path.vals[k] - path.vals[j], mesh) for k in (j - 1, j + 1))
    new, e_new, used, _, _ = stepper.step(GraphFunction(mesh, path.vals[j]), path.params, sigma[j],
                                          path.E[j], max_move=0.5 * gap)
    if used == 0:
        sigma[j] = cfg.step
        return False
    if path.try_move(j, new.values, e_new, ceiling):
        sigma[j] = min(1.5 * used, 4.0 * cfg.step)
        return True
    sigma[j] = 0.25 * used
    return False


def _top_state(u: GraphFunction, params: EnergyParams) -> BoundState:
    return make_state(u, lagrange_multiplier(u, params), params, "mountain-pass")
