"""Invariant suite run by ``nsalpha verify``."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .adjoint import adjoint_B_star, linearized_B
from .fixtures import smooth_control, taylor_green, unit_mode
from .optimize import AdmissibleSet, ControlProblem, CostWeights, project_admissible
from .spectral import (
    ModeSet,
    da_norm,
    inner_coeff,
    l2_inner,
    l2_norm,
    leray_project,
    random_field,
    to_physical,
    to_spectral,
)
from .state import PhysicalParams, integrate_state, nonlinear_B
from .trajectory import Trajectory

ALPHAS = (0.0, 0.1, 1.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.threshold)


def skew_defect(modes: ModeSet, rng: np.random.Generator, pairs: int, alphas=ALPHAS) -> float:
    """max |(B(u, v), u)| / (||u|| ||v|| ||A u||) over random pairs."""
    worst = 0.0
    for alpha in alphas:
        for _ in range(pairs):
            u, v = random_field(modes, rng), random_field(modes, rng)
            scale = l2_norm(u) * l2_norm(v) * da_norm(u)
            worst = max(worst, abs(l2_inner(nonlinear_B(u, v, alpha), u)) / scale)
    return worst


def transpose_defect(modes: ModeSet, rng: np.random.Generator, triples: int, alphas=ALPHAS) -> float:
    """max |<B'* lam, w> - <lam, B' w>| relative to the size of either side."""
    worst = 0.0
    for alpha in alphas:
        for _ in range(triples):
            u, lam, w = (random_field(modes, rng) for _ in range(3))
            bw = linearized_B(u, w, alpha)
            bl = adjoint_B_star(u, lam, alpha)
            scale = max(l2_norm(lam) * l2_norm(bw), l2_norm(w) * l2_norm(bl))
            worst = max(worst, abs(l2_inner(bl, w) - l2_inner(lam, bw)) / scale)
    return worst


def random_control(modes: ModeSet, t_final: float, m_steps: int, rng: np.random.Generator,
                   scale: float = 1.0) -> Trajectory:
    return Trajectory.from_fields([random_field(modes, rng, scale) for _ in range(m_steps)],
                                  0.0, t_final, staggered=True)


MIN_DIRECTION_COSINE = 1e-3


def fd_direction(g: Trajectory, rng: np.random.Generator) -> Trajectory:
    """Random unit direction, redrawn while nearly orthogonal to g.

    Along such a direction the directional derivative is close to zero and
    the relative finite-difference error measures only roundoff in J.
    """
    gn = g.norm()
    while True:
        d = random_control(g.modes, g.t_final - g.t0, g.m_steps, rng)
        d = d * (1.0 / d.norm())
        if gn == 0 or abs(g.inner(d)) >= MIN_DIRECTION_COSINE * gn:
            return d


def gradient_fd_error(problem: ControlProblem, f: Trajectory, rng: np.random.Generator,
                      directions: int = 1, eps: float = 1e-5) -> float:
    """Worst relative gap between <g, d> and the central difference of J along random d."""
    _, g, _, _ = problem.gradient(f)
    worst = 0.0
    for _ in range(directions):
        d = fd_direction(g, rng)
        jp = problem.cost(problem.solve_state(f + d * eps), f + d * eps)
        jm = problem.cost(problem.solve_state(f - d * eps), f - d * eps)
        fd = (jp - jm) / (2 * eps)
        worst = max(worst, abs(g.inner(d) - fd) / max(abs(fd), 1e-300))
    return worst


def gradient_problem(modes: ModeSet, alpha: float, kind: str, admissible: AdmissibleSet,
                     m_steps: int, rng: np.random.Generator, scheme: str = "cn"):
    """Random tracking problem and a control point for finite-difference tests."""
    t_final = 0.5
    params = PhysicalParams(0.1, alpha, t_final)
    u0 = taylor_green(modes, 0.5)
    u_d = Trajectory.from_fields([random_field(modes, rng, 0.3) for _ in range(m_steps + 1)], 0.0, t_final)
    problem = ControlProblem(modes, params, m_steps, u0, CostWeights(1.0, 1.0, 0.5), kind,
                             admissible, u_d=u_d, u_T=random_field(modes, rng, 0.3), scheme=scheme)
    f = project_admissible(admissible, smooth_control(modes, t_final, m_steps, rng))
    return problem, f


def decay_error(modes: ModeSet, alphas=(0.0, 0.5, 1.0), nu: float = 0.1, t_final: float = 1.0,
                m_steps: int = 128) -> float:
    """Relative error of ||u(T)|| against exp(-nu |k|^2 T) ||u0|| for a unit-|k| mode."""
    u0 = unit_mode(modes)
    worst = 0.0
    for alpha in alphas:
        traj, _ = integrate_state(u0, None, PhysicalParams(nu, alpha, t_final), m_steps)
        exact = np.exp(-nu * t_final) * l2_norm(u0)
        worst = max(worst, abs(l2_norm(traj.final) - exact) / exact)
    return worst


def projection_defect(modes: ModeSet, rng: np.random.Generator, samples: int = 100) -> float:
    """Idempotence and non-expansiveness of the Leray and ball projections (0 when exact)."""
    worst = 0.0
    for _ in range(samples):
        raw = to_spectral(modes, rng.standard_normal(modes.field_shape))
        p = leray_project(modes, raw)
        raw_norm = float(np.sqrt(inner_coeff(modes, raw, raw)))
        worst = max(worst, l2_norm(leray_project(modes, p.coeff) - p) / raw_norm,
                    max(0.0, l2_norm(p) - raw_norm) / raw_norm)
    ball = AdmissibleSet.ball(1.0)
    for _ in range(10):
        a = random_control(modes, 1.0, 4, rng, 2.0)
        b = random_control(modes, 1.0, 4, rng, 0.5)
        pa, pb = project_admissible(ball, a), project_admissible(ball, b)
        worst = max(worst, max(0.0, (pa - pb).norm() - (a - b).norm()),
                    (project_admissible(ball, pa) - pa).norm(), max(0.0, pa.norm() - 1.0))
    return worst


def roundtrip_defect(modes: ModeSet, rng: np.random.Generator, samples: int = 10) -> float:
    worst = 0.0
    for _ in range(samples):
        u = random_field(modes, rng)
        back = to_spectral(modes, to_physical(u))
        worst = max(worst, float(np.abs(back - u.coeff).max() / np.abs(u.coeff).max()))
    return worst


def run_verification(dim: int = 2, n: int = 8, m_steps: int = 32, seed: int = 0) -> list[CheckResult]:
    """Run every invariant check; the thresholds are the acceptance tolerances."""
    modes = ModeSet(dim, n)
    rng = np.random.default_rng(seed)
    results = []

    def timed(name, threshold, fn):
        t = time.perf_counter()
        value = float(fn())
        results.append(CheckResult(name, value, threshold, time.perf_counter() - t))

    timed("transform round-trip", 1e-13, lambda: roundtrip_defect(modes, rng))
    timed("projections", 1e-12, lambda: projection_defect(modes, rng))
    timed("skew-symmetry", 1e-12, lambda: skew_defect(modes, rng, 20))
    timed("transpose identity", 1e-11, lambda: transpose_defect(modes, rng, 20))
    timed("single-mode decay", 1e-6, lambda: decay_error(modes))

    def gradients():
        worst = 0.0
        for kind in ("J", "J0"):
            for alpha in ALPHAS:
                for adm in (AdmissibleSet(), AdmissibleSet.ball(1.0)):
                    problem, f = gradient_problem(modes, alpha, kind, adm, m_steps, rng)
                    worst = max(worst, gradient_fd_error(problem, f, rng))
        return worst

    timed("gradient vs finite differences", 1e-6, gradients)
    return results


def format_table(results: list[CheckResult]) -> str:
    lines = [f"{'check':34s} {'value':>11s} {'threshold':>10s} {'time[s]':>8s}  result"]
    for r in results:
        lines.append(f"{r.name:34s} {r.value:11.3e} {r.threshold:10.1e} {r.seconds:8.2f}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
