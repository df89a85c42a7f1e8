import math

import mpmath as mp
import numpy as np
import pytest

from nlsgraph.blowup import (LineSoliton, blowup_report, decay_envelope_check, detect_peaks, fit_decay_rate,
                             rescale_at_peak, soliton_line, star_soliton)
from nlsgraph.energy import EnergyParams
from nlsgraph.errors import InvalidParameter, NoPeaks, WindowExceedsGraph
from nlsgraph.graph import standard_graph
from nlsgraph.mesh import GraphFunction, build_mesh, interpolate
from nlsgraph.solvers import centred_soliton_state, constant_state, make_state, mu_descent


def _mp_soliton(p):
    p = mp.mpf(p)
    A = (p / 2) ** (1 / (p - 2))
    return lambda x: A * mp.sech((p - 2) / 2 * x) ** (2 / (p - 2))


@pytest.fixture(scope="module")
def deep_state():
    """Single-peak interval state after two mass halvings."""
    P = EnergyParams(8.0, 1.0, 1.6)
    s = centred_soliton_state(20.0, P)
    return mu_descent(s, 2).final


def test_peak_value():
    assert soliton_line(8.0)(0.0) == pytest.approx(4 ** (1 / 6), rel=1e-15)
    assert soliton_line(8.0)(0.0) == pytest.approx(1.259921, abs=1e-6)


def test_even_and_decaying():
    V = soliton_line(8.0)
    x = np.linspace(0, 25, 501)
    assert (V(x) == V(-x)).all()
    assert V(20.0) < 1e-6 and V(-20.0) < 1e-6


@pytest.mark.parametrize("p", [7.0, 8.0, 10.0, 13.5])
def test_closed_form_against_high_precision(p):
    V = soliton_line(p)
    for x in (0.0, 0.3, 1.7, 4.0, 9.0):
        with mp.workdps(40):
            ref = _mp_soliton(p)
            v = ref(x)
            d2 = mp.diff(ref, x, 2)
            ode = -d2 + v - v ** (p - 1)
        assert float(V(x)) == pytest.approx(float(v), rel=1e-14)
        assert float(V.second_derivative(x)) == pytest.approx(float(d2), rel=1e-11, abs=1e-14)
        # the high-precision profile solves the ODE
        assert abs(float(ode)) < 1e-25
    x = np.linspace(-20, 20, 4001)
    assert np.abs(V.residual(x)).max() <= 1e-10


@pytest.mark.parametrize("p", [7.0, 8.0, 10.0])
def test_mass_against_quadrature(p):
    with mp.workdps(30):
        ref = _mp_soliton(p)
        m = 2 * mp.quad(lambda x: ref(x) ** 2, [0, 1, 5, mp.inf])
    V = soliton_line(p)
    assert V.mass() == pytest.approx(float(m), rel=1e-13)
    lam = 3.7
    assert V.mass(lam) == pytest.approx(float(m) * lam ** (2 / (p - 2) - 0.5), rel=1e-13)
    assert V.lam_for_mass(V.mass(lam)) == pytest.approx(lam, rel=1e-12)


def test_soliton_needs_p_above_two():
    with pytest.raises(InvalidParameter):
        soliton_line(2.0)


def test_two_edge_star_matches_line():
    s = star_soliton(2, 8.0)
    V = soliton_line(8.0)
    x = np.array([c.s for c in s.mesh.dof_coordinates])
    err = np.abs(s.u.values - V(x)).max() / V.amplitude
    assert err <= 1e-4


def test_one_edge_star_is_half_soliton():
    s = star_soliton(1, 8.0)
    x, v = s.u.on_edge("e1")
    V = soliton_line(8.0)
    assert np.argmax(v) == 0
    assert np.abs(v - V(x)).max() <= 1e-4 * V.amplitude
    # zero slope at the centre, to second order in h
    h = x[1]
    assert abs(v[1] - v[0]) / h <= 2 * h


@pytest.mark.parametrize("m", [3, 4])
def test_star_kirchhoff(m):
    s = star_soliton(m, 8.0)
    scale = s.u.values.max() ** 7
    assert abs(s.residuals.kirchhoff["c"]) / s.mesh.lumped[0] / scale <= 1e-8


def test_constant_is_degenerate(star3):
    k = constant_state(build_mesh(star3, 0.05), EnergyParams(8.0, 1.0, 1.0))
    ps = detect_peaks(k)
    assert ps.degenerate and len(ps) == 0


def test_two_far_solitons():
    g = standard_graph("interval", 60.0)
    mesh = build_mesh(g, 0.02)
    V = soliton_line(8.0)
    u = interpolate(lambda e, s: V(s - 15.0) + V(s - 45.0), mesh)
    s = make_state(u, 1.0, EnergyParams(8.0, 1.0, float(u.values @ (mesh.M @ u.values))))
    ps = detect_peaks(s)
    assert len(ps) == 2
    assert ps.separations[0, 1] == pytest.approx(30.0, rel=1e-3)


def test_no_peak_above_bound():
    mesh = build_mesh(standard_graph("interval", 40.0), 0.05)
    V = soliton_line(8.0)
    u = interpolate(lambda e, s: V(s - 20.0), mesh)
    # declared multiplier much larger than the profile supports
    s = make_state(u, 100.0, EnergyParams(8.0, 1.0, float(u.values @ (mesh.M @ u.values))))
    with pytest.raises(NoPeaks):
        detect_peaks(s)


def test_rescaling_identities(deep_state):
    s = deep_state
    ps = detect_peaks(s)
    assert len(ps) == 1
    pk = ps.peaks[0]
    p = s.params.p
    assert pk.value >= s.lam ** (1 / (p - 2)) * (1 - 1e-6)
    prof = rescale_at_peak(s, pk)
    assert prof.regime == "interior"
    assert 0 < prof.ratio <= 1.0
    assert prof.sup_error <= 0.05


def test_peak_ratio_identity(deep_state):
    s = deep_state
    pk = detect_peaks(s).peaks[0]
    prof = rescale_at_peak(s, pk)
    p = s.params.p
    v0 = prof.v[np.argmin(np.abs(prof.y))]
    # v(0) = eps^{2/(p-2)} u(P) = (eps / eps_tilde)^{2/(p-2)}
    assert v0 == pytest.approx((prof.eps / prof.eps_tilde) ** (2 / (p - 2)), rel=1e-12)


def test_vertex_peak_against_star_solution():
    s = star_soliton(3, 8.0)
    pk = detect_peaks(s).peaks[0]
    assert pk.dof == s.mesh.vertex_dof("c")
    prof = rescale_at_peak(s, pk)
    assert prof.regime == "vertex" and prof.degree == 3
    assert prof.sup_error <= 1e-4
    assert set(np.unique(prof.branch)) >= {0, 1, 2}


def test_window_covering_graph():
    s = star_soliton(1, 8.0)
    pk = detect_peaks(s).peaks[0]
    with pytest.raises(WindowExceedsGraph) as err:
        rescale_at_peak(s, pk, window=1e3)
    assert err.value.profile.v.size == s.mesh.n_dofs


def test_envelope_near_vertices_for_constant(interval):
    mesh = build_mesh(interval, 1 / 64)
    k = constant_state(mesh, EnergyParams(8.0, 1.0, 1.0))
    ps = detect_peaks(k)
    env = decay_envelope_check(k, ps, C1=1.0, C2=0.25)
    # kappa = lam^{1/(p-2)} exactly, and the vertex terms reach 1 at the vertices
    assert env.passed


def test_envelope_on_deep_state(deep_state):
    ps = detect_peaks(deep_state)
    assert decay_envelope_check(deep_state, ps, 2.0, 0.25).passed
    assert not decay_envelope_check(deep_state, ps, 2.0, 10.0).passed
    c2 = fit_decay_rate(deep_state, ps, 2.0)
    assert c2 >= 0.25
    assert decay_envelope_check(deep_state, ps, 2.0, c2).passed
    assert not decay_envelope_check(deep_state, ps, 2.0, c2 * 1.01).passed


def test_report_collects_everything(deep_state):
    rep = blowup_report(deep_state)
    assert len(rep.profiles) == len(rep.peaks) == 1
    assert rep.eps == pytest.approx(1 / math.sqrt(deep_state.lam))
    assert rep.envelope.passed and rep.window == 15.0 and rep.cutoff == 10.0
