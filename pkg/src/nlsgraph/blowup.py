"""Concentration diagnostics for bound states with large multiplier.

Peaks are nodal local maxima above ``lam^{1/(p-2)}``.  Around a peak ``P``
the state is rescaled as ``v(y) = eps^{2/(p-2)} u(P + eps y)`` with
``eps = lam^{-1/2}`` and compared with the positive solution of
``-V'' + V = V^{p-1}``.  Away from the peaks an exponential envelope is
tested and the largest admissible decay rate is measured.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.sparse.linalg import splu
from scipy.special import logsumexp

from .energy import EnergyParams, mass
from .errors import Diverged, InvalidParameter, NoPeaks, WindowExceedsGraph
from .graph import EdgeCoordinate, standard_graph
from .mesh import GraphFunction, Mesh, build_mesh, interpolate, nonlinear_load, point_distances, weight_operator
from .solvers.flow import renormalize
from .solvers.state import BoundState, make_state

DEFAULT_WINDOW = 15.0
DEFAULT_CUTOFF = 10.0
PEAK_SLACK = 1e-8
NOISE_FLOOR = 1e-12  # relative to max u; deep tails of a computed state sit on a rounding plateau


# --- limit profiles -----------------------------------------------------------

def _sech(z):
    z = np.abs(np.asarray(z, dtype=float))
    e = np.exp(-z)
    return 2.0 * e / (1.0 + e * e)


@dataclass(frozen=True)
class LineSoliton:
    """``V(x) = A sech^a(b x)`` with ``A = (p/2)^{1/(p-2)}``, ``a = 2/(p-2)``, ``b = (p-2)/2``.

    It is the even positive solution of ``-V'' + V = V^{p-1}`` on the line.
    """

    p: float

    @property
    def amplitude(self) -> float:
        return (self.p / 2.0) ** (1.0 / (self.p - 2.0))

    @property
    def _ab(self) -> tuple[float, float]:
        return 2.0 / (self.p - 2.0), (self.p - 2.0) / 2.0

    def __call__(self, x) -> np.ndarray:
        a, b = self._ab
        return self.amplitude * _sech(b * np.asarray(x, dtype=float)) ** a

    def second_derivative(self, x) -> np.ndarray:
        a, b = self._ab
        z = b * np.asarray(x, dtype=float)
        s = _sech(z)
        t2 = 1.0 - s * s
        return self.amplitude * a * b * b * s ** a * (a * t2 - s * s)

    def residual(self, x) -> np.ndarray:
        """``-V'' + V - V^{p-1}`` evaluated from the closed forms."""
        v = self(x)
        return -self.second_derivative(x) + v - v ** (self.p - 1)

    def mass(self, lam: float = 1.0) -> float:
        """``int (lam^{1/(p-2)} V(lam^{1/2} x))^2 dx = A^2 B(a, 1/2) / b * lam^{2/(p-2) - 1/2}``."""
        a, b = self._ab
        beta = math.gamma(a) * math.sqrt(math.pi) / math.gamma(a + 0.5)
        return self.amplitude ** 2 * beta / b * lam ** (2.0 / (self.p - 2.0) - 0.5)

    def lam_for_mass(self, mu: float) -> float:
        """Multiplier of the line soliton carrying mass ``mu``."""
        return (mu / self.mass(1.0)) ** (1.0 / (2.0 / (self.p - 2.0) - 0.5))

    def scaled(self, x, lam: float) -> np.ndarray:
        """``lam^{1/(p-2)} V(lam^{1/2} x)``, the solution with multiplier ``lam``."""
        return lam ** (1.0 / (self.p - 2.0)) * self(math.sqrt(lam) * np.asarray(x, dtype=float))


def soliton_line(p: float) -> LineSoliton:
    if not p > 2:
        raise InvalidParameter(f"soliton needs p > 2, got {p}")
    return LineSoliton(float(p))


def _newton_fixed_lambda(u0: np.ndarray, lam: float, p: float, mesh: Mesh, tol: float = 1e-12,
                         max_iters: int = 50) -> tuple[np.ndarray, int]:
    """Newton for ``K u + lam M u - N(u) = 0`` without a mass constraint."""
    v = u0.copy()
    A = (mesh.K + lam * mesh.M).tocsr()
    for it in range(max_iters + 1):
        N = nonlinear_load(v, p - 2, mesh)
        F = A @ v - N
        scale = max(np.abs(A @ v).max(), np.abs(N).max(), 1e-300)
        if np.abs(F).max() <= tol * scale:
            return v, it
        if it == max_iters:
            break
        J = (A - (p - 1) * weight_operator(v, p - 2, mesh)).tocsc()
        v = v - splu(J).solve(F)
        if not np.all(np.isfinite(v)):
            break
    raise Diverged(f"fixed-multiplier Newton did not converge in {max_iters} iterations")


def star_soliton(m: int, p: float, L: float = 20.0, h: float | None = None) -> BoundState:
    """Positive solution of ``-V'' + V = V^{p-1}`` on a star with ``m`` edges of length ``L``.

    Kirchhoff holds at the centre and the natural condition at the tips.
    The solution with its maximum at the centre has the same profile on
    every edge, and the discrete equations for such a vector reduce to the
    one-edge problem with a natural condition at the centre.  That problem
    is solved by Newton from ``V`` and copied onto all edges; solving on
    the full star instead would expose Newton to the nearly singular
    translation mode when ``m = 2``.  ``h`` defaults to ``L/2048``.
    """
    if m < 1 or int(m) != m:
        raise InvalidParameter(f"star needs an integer m >= 1, got {m!r}")
    h = L / 2048 if h is None else h
    V = soliton_line(p)
    half = build_mesh(standard_graph("star", lengths=L, m=1), h)
    u0 = interpolate(lambda eid, s: V(s), half)
    w, it = _newton_fixed_lambda(u0.values, 1.0, p, half)
    s_half, prof = GraphFunction(half, w).on_edge("e1")
    mesh = build_mesh(standard_graph("star", lengths=L, m=int(m)), h)
    u = interpolate(lambda eid, s: prof, mesh)
    return make_state(u, 1.0, EnergyParams(p, 1.0, mass(u)), "star-soliton", iterations=it)


def soliton_guess(mesh: Mesh, params: EnergyParams, center: EdgeCoordinate) -> tuple[GraphFunction, float]:
    """Line soliton of mass ``params.mu`` centred at ``center``, renormalized on the mesh.

    Returns the function and the multiplier of the soliton.
    """
    V = soliton_line(params.p)
    # the rho-weighted solution is rho^{-1/(p-2)} times the rho = 1 one
    amp = params.rho ** (-1.0 / (params.p - 2.0))
    lam = V.lam_for_mass(params.mu / amp ** 2)
    d = point_distances(mesh, center)
    return renormalize(amp * V.scaled(d, lam), mesh, params.mu), lam


# --- peaks ----------------------------------------------------------------------

@dataclass(frozen=True)
class Peak:
    dof: int
    coordinate: EdgeCoordinate
    value: float


@dataclass(frozen=True)
class PeakSet:
    """Detected peaks and their scaled separations ``lam^{1/2} dist(P_i, P_j)``.

    ``degenerate`` marks a state that is constant up to rounding: every node
    ties and no peak list is meaningful.
    """

    peaks: tuple[Peak, ...]
    separations: np.ndarray
    lam: float
    window: float
    degenerate: bool = False

    def __len__(self) -> int:
        return len(self.peaks)


def _neighbour_max(v: np.ndarray, A: sp.csr_matrix) -> np.ndarray:
    return np.maximum.reduceat(v[A.indices], A.indptr[:-1])


def detect_peaks(s: BoundState, window: float = DEFAULT_WINDOW, slack: float = PEAK_SLACK) -> PeakSet:
    """Nodal local maxima with ``u(P) >= lam^{1/(p-2)} (1 - slack)``.

    Peaks closer than ``window lam^{-1/2}`` are merged, keeping the larger.

    Raises
    ------
    NoPeaks
        No local maximum clears the bound.
    """
    lam, p = s.lam, s.params.p
    if not lam > 0:
        raise InvalidParameter(f"peak detection needs lam > 0, got {lam}")
    mesh = s.mesh
    v = s.u.values
    if np.ptp(v) <= 1e-12 * max(np.abs(v).max(), 1e-300):
        return PeakSet((), np.zeros((0, 0)), lam, window, degenerate=True)
    bound = lam ** (1.0 / (p - 2.0)) * (1.0 - slack)
    cand = np.flatnonzero((v >= _neighbour_max(v, mesh.adjacency)) & (v >= bound))
    if cand.size == 0:
        raise NoPeaks(f"no local maximum reaches lam^(1/(p-2)) = {bound:.6g}")
    order = sorted(cand, key=lambda i: (-v[i], i))
    radius = window / math.sqrt(lam)
    kept: list[int] = []
    dists: list[np.ndarray] = []
    for i in order:
        if all(d[i] >= radius for d in dists):
            kept.append(int(i))
            dists.append(mesh.node_distances(int(i)))
    sep = np.array([[math.sqrt(lam) * d[j] for j in kept] for d in dists])
    coords = mesh.dof_coordinates
    peaks = tuple(Peak(i, coords[i], float(v[i])) for i in kept)
    return PeakSet(peaks, sep, lam, window)


def branch_vertex_distances(mesh: Mesh) -> np.ndarray:
    """Distance from every node to the nearest vertex of degree other than 2 (inf if none)."""
    verts = [mesh.vertex_dof(x) for x in mesh.graph.branch_vertices]
    if not verts:
        return np.full(mesh.n_dofs, np.inf)
    return np.atleast_2d(mesh.node_distances(verts)).min(axis=0)


# --- rescaling ------------------------------------------------------------------

@dataclass(frozen=True)
class RescaledProfile:
    """Samples of ``v(y) = eps^{2/(p-2)} u(P + eps y)`` inside the window.

    ``y`` is signed along the two directions leaving an interior peak and
    non-negative otherwise; ``branch`` numbers the direction.  ``limit`` is
    the comparison profile and ``sup_error`` is ``max|v - limit| / V(0)``;
    both are NaN when the peak sits near, but not on, a branch vertex.
    """

    peak: Peak
    regime: str
    eps: float
    eps_tilde: float
    vertex_distance: float  # dist(P, branch vertices) / eps
    degree: int
    y: np.ndarray
    branch: np.ndarray
    v: np.ndarray
    limit: np.ndarray
    sup_error: float
    truncated: bool = False

    @property
    def ratio(self) -> float:
        return self.eps_tilde / self.eps


def rescale_at_peak(s: BoundState, peak: Peak, window: float = DEFAULT_WINDOW,
                    cutoff: float = DEFAULT_CUTOFF) -> RescaledProfile:
    """Rescaled profile around ``peak`` and its error against the limit profile.

    The regime is ``interior`` when the peak is more than ``cutoff eps``
    away from every vertex of degree other than 2, ``vertex`` otherwise.
    A peak on a vertex of degree ``m`` is compared with the symmetric star
    solution, which is ``V(|y|)`` on each of the ``m`` edges.

    Raises
    ------
    WindowExceedsGraph
        The whole graph lies inside the window; the profile is attached as
        ``profile``.
    """
    lam, p = s.lam, s.params.p
    if not lam > 0:
        raise InvalidParameter(f"rescaling needs lam > 0, got {lam}")
    mesh = s.mesh
    eps = 1.0 / math.sqrt(lam)
    eps_tilde = peak.value ** (-(p - 2.0) / 2.0)
    d, pred = dijkstra(mesh.adjacency, directed=False, indices=peak.dof, return_predecessors=True)
    inside = np.flatnonzero(d <= window * eps)
    # first node on the shortest route from the peak labels the direction
    first = np.full(mesh.n_dofs, -1)
    for i in np.argsort(d, kind="stable"):
        if i == peak.dof:
            continue
        first[i] = i if pred[i] == peak.dof else first[pred[i]]
    A = mesh.adjacency
    starts = A.indices[A.indptr[peak.dof]:A.indptr[peak.dof + 1]]
    label = {int(n): k for k, n in enumerate(sorted(starts))}
    branch = np.array([label.get(int(first[i]), -1) for i in inside])
    y = d[inside] / eps
    vdist = float(branch_vertex_distances(mesh)[peak.dof]) / eps
    regime = "interior" if vdist > cutoff else "vertex"
    if len(starts) == 2:
        y = np.where(branch == 1, y, -y)
    v = eps ** (2.0 / (p - 2.0)) * s.u.values[inside]
    V = soliton_line(p)
    if regime == "interior" or vdist == 0.0:
        limit = V(np.abs(y))
        sup = float(np.max(np.abs(v - limit)) / V.amplitude)
    else:
        limit = np.full_like(v, np.nan)
        sup = math.nan
    deg = len(starts)
    leaves = np.asarray(np.diff(A.indptr) == 1)
    truncated = bool(np.any(leaves[inside] & (d[inside] < window * eps)))
    prof = RescaledProfile(peak, regime, eps, eps_tilde, vdist, deg, y, branch, v, limit, sup, truncated)
    if inside.size == mesh.n_dofs:
        err = WindowExceedsGraph(f"window of radius {window} eps covers the whole graph")
        err.profile = prof
        raise err
    return prof


# --- decay envelope -------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeCheck:
    C1: float
    C2: float
    passed: bool
    worst_margin: float  # max of u / envelope over the tested nodes
    tested: int


def _log_envelope_parts(s: BoundState, peaks: PeakSet, window: float):
    mesh = s.mesh
    lam = s.lam
    peak_d = [mesh.node_distances(pk.dof) for pk in peaks.peaks]
    vert_d = []
    verts = [mesh.vertex_dof(x) for x in mesh.graph.branch_vertices]
    if verts:
        vert_d = list(np.atleast_2d(mesh.node_distances(verts)))
    dists = np.array(peak_d + vert_d)
    outside = np.ones(mesh.n_dofs, dtype=bool)
    for d in peak_d:
        outside &= d > window / math.sqrt(lam)
    return dists, outside


def decay_envelope_check(s: BoundState, peaks: PeakSet, C1: float = 2.0, C2: float = 0.25,
                         window: float = DEFAULT_WINDOW, floor: float = NOISE_FLOOR) -> EnvelopeCheck:
    """Test ``u(x) <= C1 lam^{1/(p-2)} [sum_i e^{-C2 lam^{1/2} d(x,P_i)} + sum_v e^{-C2 lam^{1/2} d(x,v)}]``.

    Nodes inside the peak windows are skipped; ``v`` runs over the vertices
    of degree other than 2.  Values below ``floor * max u`` are taken as
    zero.  Comparison is done in logarithms so that deep tails do not
    underflow.
    """
    dists, outside = _log_envelope_parts(s, peaks, window)
    margin = _worst_margin(s, dists, outside, C1, C2, floor)
    return EnvelopeCheck(C1, C2, bool(margin <= 1.0), margin, int(outside.sum()))


def _worst_margin(s: BoundState, dists: np.ndarray, outside: np.ndarray, C1: float, C2: float,
                  floor: float) -> float:
    if not outside.any():
        return 0.0
    u = s.u.values[outside]
    u = np.where(u > floor * np.abs(s.u.values).max(), u, 0.0)
    if dists.shape[0] == 0:
        return math.inf if np.any(u > 0) else 0.0
    lam, p = s.lam, s.params.p
    log_env = math.log(C1) + math.log(lam) / (p - 2.0) + logsumexp(
        -C2 * math.sqrt(lam) * dists[:, outside], axis=0)
    with np.errstate(divide="ignore", over="ignore"):
        log_u = np.log(u)
        return float(np.exp(np.max(log_u - log_env)))


def envelope_profile(s: BoundState, peaks: PeakSet, C1: float = 2.0, C2: float = 0.25,
                     window: float = DEFAULT_WINDOW) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per node: scaled distance ``lam^{1/2} min_i d(x, P_i)``, the envelope, and whether it is tested."""
    dists, outside = _log_envelope_parts(s, peaks, window)
    lam, p = s.lam, s.params.p
    n = s.mesh.n_dofs
    if dists.shape[0] == 0:
        return np.full(n, np.inf), np.zeros(n), outside
    npk = len(peaks)
    near = dists[:npk].min(axis=0) if npk else np.full(n, np.inf)
    log_env = math.log(C1) + math.log(lam) / (p - 2.0) + logsumexp(-C2 * math.sqrt(lam) * dists, axis=0)
    return math.sqrt(lam) * near, np.exp(log_env), outside


def fit_decay_rate(s: BoundState, peaks: PeakSet, C1: float = 2.0, window: float = DEFAULT_WINDOW,
                   rtol: float = 1e-6, floor: float = NOISE_FLOOR) -> float:
    """Largest ``C2`` for which the envelope with ``C1`` holds (0 if none does)."""
    dists, outside = _log_envelope_parts(s, peaks, window)

    def ok(c2: float) -> bool:
        return _worst_margin(s, dists, outside, C1, c2, floor) <= 1.0

    if not ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            return math.inf
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


# --- report ---------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupReport:
    lam: float
    eps: float
    peaks: PeakSet
    profiles: tuple[RescaledProfile, ...]
    envelope: EnvelopeCheck
    fitted_C2: float
    window: float = DEFAULT_WINDOW
    cutoff: float = DEFAULT_CUTOFF
    notes: tuple[str, ...] = field(default=())


def blowup_report(s: BoundState, window: float = DEFAULT_WINDOW, cutoff: float = DEFAULT_CUTOFF,
                  C1: float = 2.0, C2: float = 0.25) -> BlowupReport:
    peaks = detect_peaks(s, window)
    notes = []
    profiles = []
    for pk in peaks.peaks:
        try:
            profiles.append(rescale_at_peak(s, pk, window, cutoff))
        except WindowExceedsGraph as exc:
            profiles.append(exc.profile)
            notes.append(f"peak at {pk.coordinate}: window truncated by the graph")
    env = decay_envelope_check(s, peaks, C1, C2, window)
    fit = fit_decay_rate(s, peaks, C1, window)
    return BlowupReport(s.lam, 1.0 / math.sqrt(s.lam), peaks, tuple(profiles), env, fit, window, cutoff,
                        tuple(notes))
