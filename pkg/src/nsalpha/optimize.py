"""Cost functionals, reduced gradient and projected-gradient descent.

Controls live in the discrete solenoidal space, sampled at step midpoints.
The state equation only sees the solenoidal part of a force, so restricting
controls to it loses nothing and keeps the admissible-set projections in
closed form.  One inner product, midpoint-in-time x Parseval-in-space, is
used for gradients, projections and residuals alike.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import (
    COST_KINDS,
    AdjointSource,
    TerminalCondition,
    integrate_adjoint,
    tracking_value,
)
from .spectral import ModeSet, SolenoidalField, inner_coeff, random_field
from .state import PhysicalParams, integrate_state
from .trajectory import Trajectory

log = logging.getLogger(__name__)

ARMIJO_C1 = 1e-4
MAX_HALVINGS = 40
# relative size of J differences treated as rounding noise in the line search
COST_NOISE = 1e-12


@dataclass(frozen=True)
class CostWeights:
    gamma_u: float = 0.0
    gamma_T: float = 0.0
    gamma_f: float = 1.0

    def __post_init__(self):
        if min(self.gamma_u, self.gamma_T, self.gamma_f) < 0:
            raise ValueError("cost weights must be non-negative")
        if self.gamma_u == self.gamma_T == self.gamma_f == 0:
            raise ValueError("cost weights must not all vanish")

    def scaled(self, c: float) -> "CostWeights":
        return CostWeights(c * self.gamma_u, c * self.gamma_T, c * self.gamma_f)


@dataclass(frozen=True)
class AdmissibleSet:
    """Unconstrained controls, or the ball ||f||_L2(Q) <= radius."""

    kind: str = "unconstrained"
    radius: float | None = None

    def __post_init__(self):
        if self.kind == "unconstrained":
            if self.radius is not None:
                raise ValueError("unconstrained set takes no radius")
        elif self.kind == "ball":
            if self.radius is None or not self.radius > 0:
                raise ValueError("ball radius must be > 0")
        else:
            raise ValueError(f"unknown admissible set {self.kind!r}")

    @classmethod
    def ball(cls, radius: float) -> "AdmissibleSet":
        return cls("ball", radius)

    @property
    def bounded(self) -> bool:
        return self.kind == "ball"


def project_admissible(admissible: AdmissibleSet, g: Trajectory) -> Trajectory:
    """Exact L2(Q) projection onto the admissible set."""
    if admissible.kind == "unconstrained":
        return g
    norm = g.norm()
    if norm <= admissible.radius:
        return g
    return g * (admissible.radius / norm)


@dataclass(frozen=True)
class ControlProblem:
    """Everything that defines one optimal control problem.

    ``u_d`` (node trajectory) and ``u_T`` default to zero targets.
    """

    modes: ModeSet
    params: PhysicalParams
    m_steps: int
    u0: SolenoidalField
    weights: CostWeights
    kind: str = "J"
    admissible: AdmissibleSet = AdmissibleSet()
    u_d: Trajectory | None = None
    u_T: SolenoidalField | None = None
    scheme: str = "cn"

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.m_steps < 1:
            raise ValueError("m_steps must be >= 1")
        if self.weights.gamma_f == 0 and not self.admissible.bounded:
            raise ValueError("gamma_f > 0 is required for an unbounded admissible set")
        if self.u_d is not None:
            self.node_mesh().check_mesh(self.u_d, "tracking target u_d")

    def node_mesh(self) -> Trajectory:
        return Trajectory.zeros(self.modes, 0.0, self.params.t_final, self.m_steps)

    def zero_control(self) -> Trajectory:
        return Trajectory.zeros(self.modes, 0.0, self.params.t_final, self.m_steps, staggered=True)

    def with_alpha(self, alpha: float) -> "ControlProblem":
        return replace(self, params=replace(self.params, alpha=alpha))

    @property
    def source(self) -> AdjointSource:
        return AdjointSource(self.kind, self.u_d, self.weights.gamma_u)

    @property
    def terminal(self) -> TerminalCondition:
        return TerminalCondition(self.weights.gamma_T, self.u_T)

    def solve_state(self, f: Trajectory) -> Trajectory:
        return integrate_state(self.u0, f, self.params, self.m_steps, self.scheme)[0]

    def cost(self, u: Trajectory, f: Trajectory) -> float:
        return eval_cost(u, f, self.u_d, self.u_T, self.weights, self.kind)

    def adjoint(self, u: Trajectory, f: Trajectory) -> Trajectory:
        return integrate_adjoint(u, self.source, self.terminal, self.params, self.scheme, forcing=f)

    def gradient(self, f: Trajectory):
        """(J, gradient, state, adjoint) at control f."""
        u = self.solve_state(f)
        lam = self.adjoint(u, f)
        return self.cost(u, f), reduced_gradient(f, lam, self.weights.gamma_f), u, lam


def eval_cost(u: Trajectory, f: Trajectory, u_d: Trajectory | None, u_T: SolenoidalField | None,
              weights: CostWeights, kind: str = "J") -> float:
    """Discrete J (kind "J", D(A) tracking) or J0 (kind "J0", L4^8 tracking).

    Tracking integrals use the trapezoid rule on the state nodes, the
    control term the midpoint rule on the control samples.
    """
    if u.staggered or not f.staggered:
        raise ValueError("state must be node-sampled and control midpoint-sampled")
    if f.m_steps != u.m_steps or f.modes != u.modes:
        raise ValueError("state and control are not on the same mesh")
    total = 0.0
    if weights.gamma_u:
        if u_d is not None:
            u.check_mesh(u_d, "tracking target u_d")
        dev = u.data if u_d is None else u.data - u_d.data
        track = sum(w * tracking_value(u.modes, dev[n], kind) for n, w in enumerate(u.weights))
        total += 0.5 * weights.gamma_u * track
    if weights.gamma_T:
        g = u.data[-1] if u_T is None else u.data[-1] - u_T.coeff
        total += 0.5 * weights.gamma_T * float(inner_coeff(u.modes, g, g))
    if weights.gamma_f:
        total += 0.5 * weights.gamma_f * f.inner(f)
    return float(total)


def reduced_gradient(f: Trajectory, lam: Trajectory, gamma_f: float) -> Trajectory:
    """gamma_f f + lambda, the Riesz representative of dJ/df."""
    f.check_mesh(lam, "adjoint")
    return f * gamma_f + lam


def vi_residual(admissible: AdmissibleSet, f: Trajectory, g: Trajectory, s0: float = 1.0) -> float:
    """||f - Proj(f - s0 g)||, zero exactly at stationary points."""
    return (f - project_admissible(admissible, f - g * s0)).norm()


class StagnationError(RuntimeError):
    def __init__(self, report: "OptimalityReport"):
        super().__init__(f"line search failed after {MAX_HALVINGS} halvings "
                         f"at iteration {report.iterations}")
        self.report = report


@dataclass
class OptimalityReport:
    J: float
    history: list[dict] = field(default_factory=list)
    control: Trajectory | None = None
    state: Trajectory | None = None
    adjoint: Trajectory | None = None
    converged: bool = False

    @property
    def iterations(self) -> int:
        return max(len(self.history) - 1, 0)

    @property
    def vi_residual(self) -> float:
        return self.history[-1]["vi_residual"] if self.history else float("nan")


def projected_gradient(problem: ControlProblem, f_init: Trajectory | None = None,
                       max_iters: int = 200, tol: float = 1e-8, s0: float = 1.0,
                       c1: float = ARMIJO_C1) -> OptimalityReport:
    """Projected-gradient descent with Armijo backtracking.

    Stops when ||f - Proj(f - s0 g)|| <= tol or after ``max_iters`` steps.
    Raises :class:`StagnationError` (carrying the partial report) when the
    line search fails.

    Near a minimizer the decrease J(f) - J(f+) can drop below the rounding
    noise of J itself.  When it is within ``COST_NOISE * |J|`` the Armijo
    test uses the trapezoid estimate -<g + g+, f+ - f>/2 instead, which
    needs the trial adjoint but no cancellation-prone difference.  The
    history records which test accepted each step.
    """
    adm = problem.admissible
    f = project_admissible(adm, problem.zero_control() if f_init is None else f_init)
    J, g, u, lam = problem.gradient(f)
    report = OptimalityReport(J)
    step, test = 0.0, ""
    for it in range(max_iters + 1):
        vi = vi_residual(adm, f, g, s0)
        report.history.append({"iter": it, "J": J, "step": step, "grad_norm": g.norm(),
                               "vi_residual": vi, "armijo_test": test})
        report.J, report.control, report.state, report.adjoint = J, f, u, lam
        log.debug("iter %d J=%.12g vi=%.3e", it, J, vi)
        if vi <= tol:
            report.converged = True
            break
        if it == max_iters:
            break
        s = s0
        for _ in range(MAX_HALVINGS + 1):
            f_new = project_admissible(adm, f - g * s)
            u_new = problem.solve_state(f_new)
            J_new = problem.cost(u_new, f_new)
            lam_new = None
            decrease, test = J - J_new, "value"
            if abs(decrease) <= COST_NOISE * abs(J):
                lam_new = problem.adjoint(u_new, f_new)
                g_new = reduced_gradient(f_new, lam_new, problem.weights.gamma_f)
                decrease, test = -0.5 * (g + g_new).inner(f_new - f), "gradient"
            dstep = (f - f_new) * (1.0 / s)
            if decrease >= c1 * s * dstep.inner(dstep):
                break
            s *= 0.5
        else:
            raise StagnationError(report)
        step = s
        f, u = f_new, u_new
        lam = problem.adjoint(u, f) if lam_new is None else lam_new
        J, g = J_new, reduced_gradient(f, lam, problem.weights.gamma_f)
    return report


def check_optimality(f: Trajectory, lam: Trajectory, admissible: AdmissibleSet, gamma_f: float,
                     n_probe: int = 8, seed: int = 0) -> float:
    """Violation of the variational inequality plus the fixed-point gap.

    Probes are Proj(f + d) for random unit directions d; the first term is
    max(0, -min <gamma_f f + lambda, probe - f>).  The second term is
    ||f - Proj(-lambda / gamma_f)|| when gamma_f > 0.
    """
    g = reduced_gradient(f, lam, gamma_f)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probe):
        d = Trajectory.from_fields([random_field(f.modes, rng) for _ in range(len(f))],
                                   f.t0, f.t_final, staggered=True)
        d = d * (1.0 / d.norm())
        probe = project_admissible(admissible, f + d)
        worst = min(worst, g.inner(probe - f))
    gap = 0.0
    if gamma_f > 0:
        gap = (f - project_admissible(admissible, lam * (-1.0 / gamma_f))).norm()
    return max(0.0, -worst) + gap
