"""alpha -> 0 sweep: optimality systems of the regularized model versus alpha = 0.

Every row is solved on the same mesh with the same data; the alpha = 0 row
is the reference.  The harness reports gaps and uniform-bound monitors and
checks monotone decrease; it makes no claim about rates.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import adjoint_B_star, bstar_coeff, ee7_monitors
from .io import format_value, write_csv
from .optimize import ControlProblem, OptimalityReport, StagnationError, projected_gradient
from .spectral import (
    SolenoidalField,
    coeff_to_grid,
    grid_to_coeff,
    inner_coeff,
    leray_project,
    random_field,
)
from .state import advection_coeff, nonlinear_B
from .trajectory import Trajectory

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("alpha", "J", "gap_state_L2V", "gap_state_LinfL2", "gap_adj_L2V",
                 "gap_adj_L2L2", "ee7_sup", "iters", "converged")


def halving_alphas(start: float = 1.0, stop: float = 1 / 64) -> list[float]:
    """[start, start/2, ..., stop, 0]."""
    out = [start]
    while out[-1] / 2 >= stop * (1 - 1e-12):
        out.append(out[-1] / 2)
    return out + [0.0]


@dataclass(frozen=True)
class SweepConfig:
    alphas: tuple[float, ...]
    problem: ControlProblem
    kind: str = "J0"
    max_iters: int = 200
    tol: float = 1e-8
    threads: int = 1

    def __post_init__(self):
        a = tuple(float(x) for x in self.alphas)
        object.__setattr__(self, "alphas", a)
        if not a or a[-1] != 0.0:
            raise ValueError("alphas must end with 0")
        if any(x <= 0 for x in a[:-1]):
            raise ValueError("alphas before the final 0 must be positive")
        if any(x <= y for x, y in zip(a, a[1:])):
            raise ValueError("alphas must be strictly decreasing")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def problem_at(self, alpha: float) -> ControlProblem:
        return replace(self.problem.with_alpha(alpha), kind=self.kind)


@dataclass
class SweepRow:
    alpha: float
    J: float
    gap_state_L2V: float
    gap_state_LinfL2: float
    gap_adj_L2V: float
    gap_adj_L2L2: float
    ee7_sup: float
    iters: int
    converged: bool
    ee7: dict = field(default_factory=dict, repr=False)

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


@dataclass
class SweepResult:
    rows: list[SweepRow]
    reports: dict[float, OptimalityReport]
    limit_residual: float
    truncation_estimate: float

    @property
    def baseline(self) -> OptimalityReport:
        return self.reports[0.0]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def _gap(a: Trajectory, b: Trajectory, power: int, sup: bool) -> float:
    d = a - b
    return d.sup_norm(power) if sup else d.l2_norm(power)


def _solve(problem: ControlProblem, max_iters: int, tol: float) -> OptimalityReport:
    try:
        return projected_gradient(problem, max_iters=max_iters, tol=tol)
    except StagnationError as exc:
        log.warning("alpha=%g: line search stagnated", problem.params.alpha)
        return exc.report


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Solve the optimality system for every alpha and tabulate gaps versus alpha = 0.

    Rows that do not reach ``cfg.tol`` are kept and flagged ``converged=False``.
    """
    base = _solve(cfg.problem_at(0.0), cfg.max_iters, cfg.tol)
    positive = [a for a in cfg.alphas if a > 0]

    def job(alpha):
        return alpha, _solve(cfg.problem_at(alpha), cfg.max_iters, cfg.tol)

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            solved = dict(pool.map(job, positive))
    else:
        solved = dict(map(job, positive))
    solved[0.0] = base

    rows = []
    for alpha in cfg.alphas:
        rep = solved[alpha]
        mon = ee7_monitors(rep.adjoint, alpha)
        rows.append(SweepRow(
            alpha=alpha, J=rep.J,
            gap_state_L2V=_gap(rep.state, base.state, 1, False),
            gap_state_LinfL2=_gap(rep.state, base.state, 0, True),
            gap_adj_L2V=_gap(rep.adjoint, base.adjoint, 1, False),
            gap_adj_L2L2=_gap(rep.adjoint, base.adjoint, 0, False),
            ee7_sup=mon["sup_l2"] + mon["sup_alpha2_gradl2"],
            iters=rep.iterations, converged=rep.converged, ee7=mon))
        if not rep.converged:
            log.warning("alpha=%g did not converge (vi=%.3e)", alpha, rep.vi_residual)
    problem0 = cfg.problem_at(0.0)
    res = limit_adjoint_residual(base.state, base.adjoint, problem0)
    tau = truncation_estimate(base.state, base.adjoint, problem0)
    return SweepResult(rows, solved, res, tau)


def is_monotone_decreasing(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))


# -- the alpha = 0 adjoint equation ------------------------------------------

def _limit_operator(u: np.ndarray, lam: np.ndarray, problem: ControlProblem) -> np.ndarray:
    """nu A lam + B'*(u) lam at alpha = 0."""
    modes = problem.modes
    return problem.params.nu * modes.k2 * lam + bstar_coeff(modes, u, lam, 0.0)


def _interior_residuals(u: Trajectory, lam: Trajectory, problem: ControlProblem) -> np.ndarray:
    h = lam.dt
    src = problem.source
    out = []
    for n in range(1, lam.m_steps):
        lo, hi = lam.data[n - 1], lam.data[n]
        mid = 0.5 * (lo + hi)
        r = -(hi - lo) / h + _limit_operator(u.data[n], mid, problem) - src.rhs(u, n)
        out.append(r)
    return np.array(out)


def limit_adjoint_residual(u: Trajectory, lam: Trajectory, problem: ControlProblem) -> float:
    """Largest L2 residual of the alpha = 0 adjoint equation along (u, lam).

    The equation -lam' + nu A lam + B'*(u) lam = source(u) is evaluated at
    the interior state nodes, with lam differenced and averaged between the
    neighbouring midpoint samples.  The terminal condition
    lam(T) = gamma_T (u(T) - u_T) is checked by linear extrapolation of the
    last two samples and included in the maximum.
    """
    if problem.params.alpha != 0:
        raise ValueError("limit_adjoint_residual needs the alpha = 0 problem")
    modes = problem.modes
    res = _interior_residuals(u, lam, problem)
    norms = np.sqrt(inner_coeff(modes, res, res)) if len(res) else np.zeros(0)
    lam_T = problem.terminal.lambda_T(u.final, 0.0).coeff
    if lam.m_steps >= 2:
        end = 1.5 * lam.data[-1] - 0.5 * lam.data[-2]
    else:
        end = lam.data[-1]
    term = np.sqrt(inner_coeff(modes, end - lam_T, end - lam_T))
    return float(max(norms.max(initial=0.0), term))


def truncation_estimate(u: Trajectory, lam: Trajectory, problem: ControlProblem) -> float:
    """Local truncation error of the residual stencil, from differences of lam.

    Central differencing costs h^2/24 |lam'''|, midpoint averaging h^2/8 |L lam''|
    and the terminal extrapolation 3h^2/8 |lam''|; derivatives are estimated by
    finite differences of the samples.
    """
    modes = problem.modes
    h = lam.dt
    d = lam.data
    m = len(d)

    def norm(c):
        return np.sqrt(inner_coeff(modes, c, c))

    est = 0.0
    if m >= 3:
        d2 = (d[2:] - 2 * d[1:-1] + d[:-2]) / h ** 2
        for j in range(len(d2)):
            node = j + 1
            est = max(est, h ** 2 / 8 * norm(_limit_operator(u.data[node], d2[j], problem)))
        est = max(est, 3 * h ** 2 / 8 * norm(d2[-1]))
    if m >= 4:
        d3 = (d[3:] - 3 * d[2:-1] + 3 * d[1:-2] - d[:-3]) / h ** 3
        est += h ** 2 / 24 * float(np.max(norm(d3)))
    return float(est)


# -- structural checks at alpha = 0 -------------------------------------------

def alpha_zero_reductions(modes, rng: np.random.Generator, samples: int = 5) -> dict[str, float]:
    """Relative defects of the alpha = 0 operator identities on random fields."""
    worst = {"helmholtz": 0.0, "B_is_advection": 0.0, "bstar_is_limit_advection": 0.0}
    worst["helmholtz"] = float(np.max(np.abs(modes.helmholtz_multiplier(0.0) - 1.0)))
    for _ in range(samples):
        u = random_field(modes, rng)
        lam = random_field(modes, rng)
        b = nonlinear_B(u, u, 0.0)
        adv = SolenoidalField(modes, advection_coeff(modes, u.coeff))
        worst["B_is_advection"] = max(worst["B_is_advection"],
                                      np.abs((b - adv).coeff).max() / max(np.abs(adv.coeff).max(), 1e-300))
        got = adjoint_B_star(u, lam, 0.0)
        ref = _limit_advection(u, lam)
        worst["bstar_is_limit_advection"] = max(worst["bstar_is_limit_advection"],
                                                np.abs((got - ref).coeff).max()
                                                / max(np.abs(ref.coeff).max(), 1e-300))
    return worst


def _limit_advection(u: SolenoidalField, lam: SolenoidalField) -> SolenoidalField:
    """P[-u.grad lam - (grad lam)^T u], written out independently of bstar_coeff."""
    modes = u.modes
    d = modes.dim
    ug = coeff_to_grid(modes, u.coeff)
    dl = coeff_to_grid(modes, modes.ik[:, None] * lam.coeff[None])   # dl[i, j] = d_i lam_j
    adv = sum(ug[i] * dl[i] for i in range(d))
    transp = np.stack([sum(dl[j, i] * ug[i] for i in range(d)) for j in range(d)])
    return leray_project(modes, grid_to_coeff(modes, -adv - transp))


# -- output -------------------------------------------------------------------

def write_sweep_csv(rows: list[SweepRow], path) -> None:
    write_csv(path, SWEEP_COLUMNS, (r.values() for r in rows))


def write_sweep_dat(rows: list[SweepRow], path) -> None:
    """Whitespace-separated table with a '#' header, readable by gnuplot."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(SWEEP_COLUMNS) + "\n")
        for r in rows:
            fh.write(" ".join(format_value(v) for v in r.values()) + "\n")
