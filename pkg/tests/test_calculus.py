import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from stochetd import DegenerateDirection, InvalidConfig, SdeProblem
from stochetd.calculus import (Commutativity, CommutativityReport, commutativity_report,
                               default_eps, default_probe_states, directional_derivative,
                               lie_bracket)
from stochetd.models import (ConstantAdvection, SineDecay, SmoothBump, SpdeCoefficients,
                             SpectralGrid1D, build_problem, gaussian_initial,
                             soliton_domain, soliton_initial)

X = sp.symbols("x")


# -- a small nonlinear system with an exact bracket --------------------------------

U = sp.symbols("u0 u1")
F_SYM = sp.Matrix([U[1] ** 2, U[0] * U[1]])
G_SYM = sp.Matrix([sp.sin(U[1]), sp.cos(U[0]) + U[0]])
# [F, G] = DG F - DF G
BRACKET_SYM = G_SYM.jacobian(U) * F_SYM - F_SYM.jacobian(U) * G_SYM
F = sp.lambdify([U], list(F_SYM), "numpy")
G = sp.lambdify([U], list(G_SYM), "numpy")
BR = sp.lambdify([U], list(BRACKET_SYM), "numpy")
Fv = lambda u: np.array(F(u), dtype=float)
Gv = lambda u: np.array(G(u), dtype=float)

small = st.floats(-2, 2)


@settings(max_examples=40, deadline=None)
@given(small, small)
def test_bracket_matches_jacobians(a, b):
    u = np.array([a, b])
    exact = np.array(BR(u), dtype=float)
    got = lie_bracket(Fv, Gv, u)
    assert np.linalg.norm(got - exact) <= 1e-7 * max(np.linalg.norm(exact), 1.0)


@settings(max_examples=40, deadline=None)
@given(small, small, st.floats(-3, 3))
def test_antisymmetry_and_scaling(a, b, alpha):
    u = np.array([a, b])
    ab = lie_bracket(Fv, Gv, u)
    ba = lie_bracket(Gv, Fv, u)
    scale = max(np.linalg.norm(ab), 1.0)
    assert np.linalg.norm(ab + ba) <= 1e-7 * scale
    scaled = lie_bracket(lambda v: alpha * Fv(v), Gv, u)
    assert np.linalg.norm(scaled - alpha * ab) <= 1e-7 * scale * max(abs(alpha), 1.0)


def test_fd_error_is_second_order():
    u = np.array([0.4, -0.9])
    exact = np.array(BR(u), dtype=float)
    errs = [np.linalg.norm(lie_bracket(Fv, Gv, u, eps) - exact) for eps in (1e-2, 5e-3, 2.5e-3)]
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(rates - 2) < 0.2)


def test_commuting_linear_fields():
    A = np.array([1.0, -2.0, 0.5])
    B = np.array([3.0, 0.1, -1.0])
    u = np.array([0.3, 0.2, -1.0])
    assert np.linalg.norm(lie_bracket(lambda v: A * v, lambda v: B * v, u)) < 1e-9


def test_degenerate_direction():
    with pytest.raises(DegenerateDirection):
        directional_derivative(Fv, np.ones(2), np.zeros(2))
    # a zero field in the bracket contributes nothing
    zero = lambda v: np.zeros(2)
    assert np.all(lie_bracket(zero, Gv, np.ones(2)) == 0)
    with pytest.raises(InvalidConfig):
        directional_derivative(Fv, np.ones(2), np.ones(2), eps=0.0)


def test_default_eps():
    assert default_eps(np.zeros(3)) == 1e-5
    assert default_eps(np.array([300.0, 400.0])) == pytest.approx(5e-3)


# -- spectral brackets ---------------------------------------------------------------

def _g(xi, w):
    return -sp.diff(xi * w, X)


def test_sine_pair_bracket_analytic():
    xi1 = sp.sin(2 * sp.pi * X) / 100
    xi2 = sp.sin(4 * sp.pi * X) / 200
    u = 1 + sp.cos(2 * sp.pi * X) + sp.sin(4 * sp.pi * X) / 2
    # [g1, g2](u) = Dg2[g1(u)] - Dg1[g2(u)]; each g is linear in u
    from_definition = _g(xi2, _g(xi1, u)) - _g(xi1, _g(xi2, u))
    corrected = sp.diff((xi2 * sp.diff(xi1, X) - xi1 * sp.diff(xi2, X)) * u, X)
    assert sp.simplify(from_definition - corrected) == 0
    expanded = ((xi2 * sp.diff(xi1, X, 2) - xi1 * sp.diff(xi2, X, 2)) * u
                + (xi2 * sp.diff(xi1, X) - xi1 * sp.diff(xi2, X)) * sp.diff(u, X))
    assert sp.simplify(from_definition - expanded) == 0

    grid = SpectralGrid1D(64)
    prob = build_problem(grid, SpdeCoefficients.kdv(), SineDecay(2))
    u_hat = grid.to_spectral(sp.lambdify(X, u, "numpy")(grid.x))
    g1 = lambda v: prob.diffusions[0](0.0, v)
    g2 = lambda v: prob.diffusions[1](0.0, v)
    got = lie_bracket(g1, g2, u_hat)
    ref = grid.to_spectral(sp.lambdify(X, from_definition, "numpy")(grid.x))
    assert np.linalg.norm(got - ref) <= 1e-4 * np.linalg.norm(ref)


def _soliton_setup(n=256, beta=64.0):
    lo, L = soliton_domain(beta)
    grid = SpectralGrid1D(n, L, lo)
    prob = build_problem(grid, SpdeCoefficients.kdv(), ConstantAdvection(1.0))
    return prob, soliton_initial(grid, beta)


def test_constant_advection_drift_bracket_small():
    prob, u = _soliton_setup()
    f = lambda v: prob.drift(0.0, v)
    g = lambda v: prob.diffusions[0](0.0, v)
    assert np.linalg.norm(lie_bracket(f, g, u)) <= 1e-6 * np.linalg.norm(u)


def _unit_interval(kind, n=1024):
    grid = SpectralGrid1D(n)
    basis = SineDecay(3) if kind == "sine" else SmoothBump(3)
    return build_problem(grid, SpdeCoefficients.kdv(), basis), gaussian_initial(grid)


def test_classifier_three_setups():
    prob, u0 = _unit_interval("sine")
    assert commutativity_report(prob, default_probe_states(u0)).classification is \
        Commutativity.NON_COMMUTATIVE
    prob, u0 = _unit_interval("bump")
    assert commutativity_report(prob, default_probe_states(u0)).classification is \
        Commutativity.COMMUTATIVE
    prob, u0 = _soliton_setup()
    assert commutativity_report(prob, default_probe_states(u0)).classification is \
        Commutativity.DRIFT_COMMUTATIVE


def test_report_structure(tmp_path):
    prob, u0 = _unit_interval("sine", 128)
    rep = commutativity_report(prob, default_probe_states(u0, n_random=1))
    assert rep.noise_brackets.shape == (3, 3)
    assert np.all(np.diag(rep.noise_brackets) == 0)
    assert np.allclose(rep.noise_brackets, rep.noise_brackets.T)
    assert rep.n_probes == 2
    # classification is a function of the thresholded ratios
    nc = np.any(rep.noise_relative >= rep.tolerance)
    assert (rep.classification is Commutativity.NON_COMMUTATIVE) == nc
    data = json.loads(rep.to_json(tmp_path / "r.json"))
    assert set(data) >= {"drift_brackets", "noise_brackets", "classification"}
    assert data["classification"] == "NonCommutative"


def test_report_needs_probes():
    prob, _ = _unit_interval("sine", 32)
    with pytest.raises(InvalidConfig):
        commutativity_report(prob, [])


def test_probe_states_deterministic():
    u0 = np.ones(9, complex)
    a = default_probe_states(u0, seed=3)
    b = default_probe_states(u0, seed=3)
    assert len(a) == 3 and all(np.array_equal(x, y) for x, y in zip(a, b))
    assert a[1][0] == u0[0]
