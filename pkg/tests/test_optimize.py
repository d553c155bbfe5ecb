import numpy as np
import pytest

from nsalpha.fixtures import taylor_green, tracking_fixture
from nsalpha.optimize import (
    AdmissibleSet,
    ControlProblem,
    CostWeights,
    StagnationError,
    check_optimality,
    eval_cost,
    project_admissible,
    projected_gradient,
    reduced_gradient,
    vi_residual,
)
from nsalpha.spectral import ModeSet, SolenoidalField, l2_norm, random_field
from nsalpha.state import PhysicalParams
from nsalpha.trajectory import Trajectory


def random_control(modes, t_final, m, rng, scale=1.0):
    return Trajectory.from_fields([random_field(modes, rng, scale) for _ in range(m)],
                                  0.0, t_final, staggered=True)


def tracking_problem(modes, admissible=AdmissibleSet(), kind="J"):
    p = PhysicalParams(0.1, 0.1, 1.0)
    fx = tracking_fixture(modes, p, 32, seed=1)
    return ControlProblem(modes, p, 32, fx.u0, CostWeights(0.05, 1, 0.5), kind, admissible,
                          u_d=fx.u_d, u_T=fx.u_T), fx


# -- validation ------------------------------------------------------------------

@pytest.mark.parametrize("w", [(-1, 0, 1), (0, 0, 0)])
def test_weights_validation(w):
    with pytest.raises(ValueError):
        CostWeights(*w)


@pytest.mark.parametrize("kw", [dict(kind="ball"), dict(kind="ball", radius=0.0),
                                dict(kind="unconstrained", radius=1.0), dict(kind="box")])
def test_admissible_validation(kw):
    with pytest.raises(ValueError):
        AdmissibleSet(**kw)


def test_problem_validation(modes2):
    p = PhysicalParams(0.1, 0.1, 1.0)
    u0 = taylor_green(modes2, 0.5)
    with pytest.raises(ValueError):
        ControlProblem(modes2, p, 8, u0, CostWeights(1, 1, 0))
    with pytest.raises(ValueError):
        ControlProblem(modes2, p, 8, u0, CostWeights(), kind="L2")
    with pytest.raises(ValueError):
        ControlProblem(modes2, p, 8, u0, CostWeights(), u_d=Trajectory.zeros(modes2, 0, 1, 4))
    # a ball makes gamma_f = 0 admissible
    ControlProblem(modes2, p, 8, u0, CostWeights(1, 1, 0), admissible=AdmissibleSet.ball(1.0))


# -- cost ------------------------------------------------------------------------

def test_cost_of_zero_everything(modes2):
    u = Trajectory.zeros(modes2, 0, 1, 4)
    f = Trajectory.zeros(modes2, 0, 1, 4, staggered=True)
    for kind in ("J", "J0"):
        assert eval_cost(u, f, None, None, CostWeights(1, 1, 1), kind) == 0.0


def test_control_cost_constant_in_time(modes2, rng):
    a = random_field(modes2, rng, scale=1.3)
    t_final = 0.7
    f = Trajectory.constant(a, 0.0, t_final, 5, staggered=True)
    u = Trajectory.zeros(modes2, 0.0, t_final, 5)
    w = CostWeights(0, 0, 2.0)
    assert eval_cost(u, f, None, None, w) == pytest.approx(t_final * l2_norm(a) ** 2, rel=1e-13)
    assert eval_cost(u, f * 2, None, None, w) == pytest.approx(4 * eval_cost(u, f, None, None, w), rel=1e-13)


def test_tracking_cost_trapezoid(modes2, rng):
    a = random_field(modes2, rng)
    u = Trajectory.from_fields([a * 0, a, a * 2], 0.0, 1.0)
    f = Trajectory.zeros(modes2, 0.0, 1.0, 2, staggered=True)
    from nsalpha.spectral import da_norm, l4_norm

    # trapezoid with dt = 1/2: weights 1/4, 1/2, 1/4
    j = eval_cost(u, f, None, None, CostWeights(1, 0, 0), "J")
    assert j == pytest.approx(0.5 * (0.5 + 0.25 * 4) * da_norm(a) ** 2, rel=1e-13)
    j0 = eval_cost(u, f, None, None, CostWeights(1, 0, 0), "J0")
    assert j0 == pytest.approx(0.5 * (0.5 + 0.25 * 256) * l4_norm(a) ** 8, rel=1e-12)
    jt = eval_cost(u, f, None, a, CostWeights(0, 3, 0))
    assert jt == pytest.approx(1.5 * l2_norm(a) ** 2, rel=1e-13)


def test_cost_mesh_checks(modes2):
    u = Trajectory.zeros(modes2, 0, 1, 4)
    with pytest.raises(ValueError):
        eval_cost(u, Trajectory.zeros(modes2, 0, 1, 4), None, None, CostWeights())
    with pytest.raises(ValueError):
        eval_cost(u, Trajectory.zeros(modes2, 0, 1, 3, staggered=True), None, None, CostWeights())


def test_reduced_gradient(modes2, rng):
    f, lam = random_control(modes2, 1, 4, rng), random_control(modes2, 1, 4, rng)
    g = reduced_gradient(f, lam, 0.5)
    assert np.allclose(g.data, 0.5 * f.data + lam.data)


# -- projections -----------------------------------------------------------------

def test_projection_unconstrained_is_identity(modes2, rng):
    f = random_control(modes2, 1, 4, rng)
    assert project_admissible(AdmissibleSet(), f) is f


def test_projection_onto_ball(modes2, rng):
    f = random_control(modes2, 1, 4, rng)
    r = f.norm()
    assert project_admissible(AdmissibleSet.ball(2 * r), f) is f
    half = project_admissible(AdmissibleSet.ball(r / 2), f)
    assert np.allclose(half.data, f.data / 2) and half.norm() == pytest.approx(r / 2, rel=1e-14)


def test_projection_nonexpansive(modes2, rng):
    ball = AdmissibleSet.ball(0.5)
    for _ in range(20):
        a, b = random_control(modes2, 1, 3, rng), random_control(modes2, 1, 3, rng, scale=0.3)
        pa, pb = project_admissible(ball, a), project_admissible(ball, b)
        assert (pa - pb).norm() <= (a - b).norm() * (1 + 1e-14)
        assert project_admissible(ball, pa).norm() == pytest.approx(pa.norm(), rel=1e-15)


def test_vi_residual_unconstrained_equals_gradient_norm(modes2, rng):
    f, g = random_control(modes2, 1, 4, rng), random_control(modes2, 1, 4, rng)
    assert vi_residual(AdmissibleSet(), f, g) == pytest.approx(g.norm(), rel=1e-13)


# -- projected gradient ----------------------------------------------------------

def test_trivial_problem_converges_immediately(modes2):
    p = PhysicalParams(0.1, 0.2, 0.5)
    problem = ControlProblem(modes2, p, 8, SolenoidalField.zeros(modes2), CostWeights(1, 1, 1))
    rep = projected_gradient(problem)
    assert rep.converged and rep.iterations == 0 and rep.J == 0.0
    assert not np.any(rep.control.data)


def test_pure_control_cost_one_step(modes2, rng):
    """J = ||f||^2 / 2 with gamma_f = 1 is solved by the first full step."""
    p = PhysicalParams(0.1, 0.2, 0.5)
    problem = ControlProblem(modes2, p, 8, SolenoidalField.zeros(modes2), CostWeights(0, 0, 1))
    f0 = random_control(modes2, 0.5, 8, rng)
    rep = projected_gradient(problem, f_init=f0)
    assert rep.converged and rep.iterations <= 2
    assert rep.control.norm() <= 1e-8


@pytest.fixture(scope="module")
def tracking_run():
    problem, fx = tracking_problem(ModeSet(2, 8))
    return problem, fx, projected_gradient(problem, tol=5e-9, max_iters=300)


def test_tracking_converges(tracking_run):
    problem, _, rep = tracking_run
    assert rep.converged and rep.vi_residual <= 5e-9
    hist = rep.history
    assert [h["iter"] for h in hist] == list(range(len(hist)))
    assert {h["armijo_test"] for h in hist[1:]} <= {"value", "gradient"}


def test_tracking_cost_monotone(tracking_run):
    _, _, rep = tracking_run
    for prev, cur in zip(rep.history, rep.history[1:]):
        slack = 1e-13 * abs(prev["J"]) if cur["armijo_test"] == "gradient" else 0.0
        assert cur["J"] <= prev["J"] + slack


def test_tracking_error_decreases(tracking_run):
    problem, _, rep = tracking_run
    u_init = problem.solve_state(problem.zero_control())
    w = CostWeights(problem.weights.gamma_u, problem.weights.gamma_T, 0.0)
    before = eval_cost(u_init, problem.zero_control(), problem.u_d, problem.u_T, w)
    after = eval_cost(rep.state, rep.control, problem.u_d, problem.u_T, w)
    assert after < before


def test_tracking_optimality(tracking_run):
    problem, _, rep = tracking_run
    value = check_optimality(rep.control, rep.adjoint, problem.admissible, problem.weights.gamma_f)
    assert value <= 10 * 5e-9


def test_report_fields_consistent(tracking_run):
    problem, _, rep = tracking_run
    J, g, u, lam = problem.gradient(rep.control)
    assert J == rep.J
    assert np.array_equal(lam.data, rep.adjoint.data)
    assert g.norm() == pytest.approx(rep.history[-1]["grad_norm"])


def test_active_ball_constraint(tracking_run):
    problem, _, rep = tracking_run
    radius = 0.5 * rep.control.norm()
    ball = ControlProblem(problem.modes, problem.params, problem.m_steps, problem.u0, problem.weights,
                          problem.kind, AdmissibleSet.ball(radius), problem.u_d, problem.u_T)
    res = projected_gradient(ball, tol=1e-8, max_iters=300)
    assert res.converged
    assert abs(res.control.norm() - radius) <= 1e-10
    assert res.J > rep.J


def test_stagnation_carries_report(modes2, rng):
    p = PhysicalParams(0.1, 0.2, 0.5)
    problem = ControlProblem(modes2, p, 4, SolenoidalField.zeros(modes2), CostWeights(0, 0, 1))
    with pytest.raises(StagnationError) as info:
        projected_gradient(problem, f_init=random_control(modes2, 0.5, 4, rng), c1=10.0)
    assert info.value.report.iterations == 0 and len(info.value.report.history) == 1


def test_max_iters_without_convergence(tracking_run):
    problem, _, _ = tracking_run
    rep = projected_gradient(problem, max_iters=2)
    assert not rep.converged and rep.iterations == 2


# -- check_optimality ------------------------------------------------------------

def test_optimality_exact_stationary_point(modes2, rng):
    f = random_control(modes2, 1, 4, rng)
    assert check_optimality(f, f * -0.5, AdmissibleSet(), 0.5) == pytest.approx(0.0, abs=1e-15)


def test_optimality_detects_perturbation(modes2, rng):
    f = random_control(modes2, 1, 4, rng)
    bad = f * -0.5 + random_control(modes2, 1, 4, rng, scale=1e-3)
    assert check_optimality(f, bad, AdmissibleSet(), 0.5) > 1e-4


def test_optimality_on_ball_boundary(modes2, rng):
    # on the boundary with lambda pointing inward the VI holds: f = R d, lam = -c d
    d = random_control(modes2, 1, 4, rng)
    d = d * (1 / d.norm())
    ball = AdmissibleSet.ball(1.0)
    assert check_optimality(d, d * -3.0, ball, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert check_optimality(d, d * 3.0, ball, 1.0) > 0.1
