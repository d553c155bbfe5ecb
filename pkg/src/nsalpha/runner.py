"""Turn a validated RunConfig into solver objects, run one mode, write artifacts."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .adjoint import ee7_monitors
from .alpha_limit import SweepConfig, halving_alphas, run_sweep, write_sweep_csv, write_sweep_dat
from .config import RunConfig, resolve_path
from .fixtures import initial_condition, smooth_control, tracking_fixture
from .optimize import AdmissibleSet, ControlProblem, CostWeights, projected_gradient
from .spectral import ModeSet, SolenoidalField, leray_project
from .state import PhysicalParams, apriori_bound, integrate_state
from .trajectory import Trajectory
from .verify import format_table, run_verification

log = logging.getLogger(__name__)


class SolverFailure(RuntimeError):
    """A solve finished without a usable result (non-convergence)."""


@dataclass
class Outcome:
    ok: bool
    summary: str
    artifacts: list[Path]


# -- building blocks ----------------------------------------------------------

def build_modes(cfg: RunConfig) -> ModeSet:
    return ModeSet(cfg.mesh.dim, cfg.mesh.n)


def build_params(cfg: RunConfig, alpha: float | None = None) -> PhysicalParams:
    p = cfg.physics
    return PhysicalParams(p.nu, p.alpha if alpha is None else alpha, p.t_final)


def _read_field(path, base) -> SolenoidalField:
    modes, data = io.read_snapshot(resolve_path(path, base))
    return leray_project(modes, data[0])


def build_u0(cfg: RunConfig, modes: ModeSet, base=".") -> SolenoidalField:
    ic = cfg.initial_condition
    if ic.file is not None:
        return _read_field(ic.file, base)
    return initial_condition(ic.fixture, modes, seed=cfg.seed, amplitude=ic.amplitude)


def build_forcing(cfg: RunConfig, modes: ModeSet, base=".") -> Trajectory | None:
    fc, m, t_final = cfg.forcing, cfg.mesh.m_steps, cfg.physics.t_final
    if fc.file is not None:
        return io.read_trajectory(resolve_path(fc.file, base), 0.0, t_final, staggered=True)
    if fc.fixture == "zero" or fc.scale == 0:
        return None
    return smooth_control(modes, t_final, m, np.random.default_rng(cfg.seed), fc.scale)


def build_targets(cfg: RunConfig, modes: ModeSet, u0: SolenoidalField, base="."):
    """(u_d, u_T); None stands for a zero target."""
    tg, m, t_final = cfg.target, cfg.mesh.m_steps, cfg.physics.t_final
    if tg.fixture == "zero":
        return None, None
    if tg.fixture == "tracking":
        fx = tracking_fixture(modes, build_params(cfg), m, seed=cfg.seed, u0=u0,
                              control_scale=tg.control_scale, target_alpha=tg.alpha)
        return fx.u_d, fx.u_T
    u_d = io.read_trajectory(resolve_path(tg.u_d, base), 0.0, t_final) if tg.u_d else None
    u_T = _read_field(tg.u_T, base) if tg.u_T else None
    return u_d, u_T


def build_problem(cfg: RunConfig, base=".") -> ControlProblem:
    modes = build_modes(cfg)
    u0 = build_u0(cfg, modes, base)
    u_d, u_T = build_targets(cfg, modes, u0, base)
    w = cfg.weights
    adm = (AdmissibleSet.ball(cfg.admissible.radius) if cfg.admissible.kind == "ball"
           else AdmissibleSet())
    return ControlProblem(modes, build_params(cfg), cfg.mesh.m_steps, u0,
                          CostWeights(w.gamma_u, w.gamma_T, w.gamma_f), cfg.cost, adm,
                          u_d=u_d, u_T=u_T, scheme=cfg.scheme)


def _manifest_base(cfg: RunConfig, mode: str) -> dict:
    return {
        "mode": mode,
        "seed": cfg.seed,
        "scheme": cfg.scheme,
        "mesh": cfg.mesh.model_dump(),
        "params": cfg.physics.model_dump(),
        "weights": cfg.weights.model_dump(),
        "cost": cfg.cost,
        "set": cfg.admissible.model_dump(),
        "time_layout": {"state": "nodes", "control": "midpoints", "adjoint": "midpoints"},
    }


# -- modes --------------------------------------------------------------------

def run_simulate(cfg: RunConfig, out: Path, base=".") -> Outcome:
    t = time.perf_counter()
    modes = build_modes(cfg)
    u0 = build_u0(cfg, modes, base)
    f = build_forcing(cfg, modes, base)
    params = build_params(cfg)
    traj, ledger = integrate_state(u0, f, params, cfg.mesh.m_steps, cfg.scheme)
    forcing = f if f is not None else Trajectory.zeros(modes, 0.0, params.t_final, cfg.mesh.m_steps, True)
    lhs, rhs = apriori_bound(traj, forcing, params.nu, params.alpha)
    elapsed = time.perf_counter() - t

    paths = [out / "state.nsaf", out / "forcing.nsaf", out / "energy.csv", out / "manifest.json"]
    io.write_trajectory(paths[0], traj)
    io.write_trajectory(paths[1], forcing)
    ledger.to_csv(paths[2])
    manifest = _manifest_base(cfg, "simulate")
    manifest.update({
        "energy": {"max_identity_residual": ledger.max_residual, "sup_V": ledger.sup_v,
                   "L2_DA": ledger.l2_da, "apriori_bound_holds": bool(np.all(lhs <= rhs * (1 + 1e-12)))},
        "timings": {"solve_seconds": elapsed},
    })
    io.write_manifest(paths[3], manifest)
    return Outcome(True, f"simulated {cfg.mesh.m_steps} steps; max energy residual "
                         f"{ledger.max_residual:.3e}", paths)


def run_optimize(cfg: RunConfig, out: Path, base=".") -> Outcome:
    t = time.perf_counter()
    problem = build_problem(cfg, base)
    opt = cfg.optimizer
    report = projected_gradient(problem, max_iters=opt.max_iters, tol=opt.tol, s0=opt.s0)
    elapsed = time.perf_counter() - t

    paths = [out / "history.csv", out / "control.nsaf", out / "state.nsaf", out / "adjoint.nsaf",
             out / "ee7.csv", out / "manifest.json"]
    io.write_history_csv(paths[0], report.history)
    io.write_trajectory(paths[1], report.control)
    io.write_trajectory(paths[2], report.state)
    io.write_trajectory(paths[3], report.adjoint)
    io.write_ee7_csv(paths[4], [ee7_monitors(report.adjoint, problem.params.alpha)])
    manifest = _manifest_base(cfg, "optimize")
    manifest.update({
        "J": report.J,
        "converged": report.converged,
        "control_norm": report.control.norm(),
        "iterations": report.history,
        "timings": {"solve_seconds": elapsed},
    })
    io.write_manifest(paths[5], manifest)
    summary = (f"J={report.J:.12g} after {report.iterations} iterations, "
               f"VI residual {report.vi_residual:.3e}")
    if not report.converged:
        raise SolverFailure(f"optimizer did not reach tol={opt.tol:g}: {summary}")
    return Outcome(True, summary, paths)


def run_sweep_alpha(cfg: RunConfig, out: Path, base=".", threads: int = 1) -> Outcome:
    t = time.perf_counter()
    sw = cfg.sweep
    alphas = tuple(sw.alphas) if sw.alphas is not None else tuple(halving_alphas(sw.start, sw.stop))
    scfg = SweepConfig(alphas, build_problem(cfg, base), cfg.cost, cfg.optimizer.max_iters,
                       cfg.optimizer.tol, threads)
    result = run_sweep(scfg)
    elapsed = time.perf_counter() - t

    paths = [out / "sweep.csv", out / "sweep.dat", out / "ee7.csv", out / "manifest.json"]
    write_sweep_csv(result.rows, paths[0])
    write_sweep_dat(result.rows, paths[1])
    io.write_ee7_csv(paths[2], [r.ee7 for r in result.rows])
    manifest = _manifest_base(cfg, "sweep-alpha")
    manifest.update({
        "alphas": list(alphas),
        "limit_adjoint_residual": result.limit_residual,
        "truncation_estimate": result.truncation_estimate,
        "all_converged": all(r.converged for r in result.rows),
        "timings": {"solve_seconds": elapsed},
    })
    io.write_manifest(paths[3], manifest)
    flagged = [r.alpha for r in result.rows if not r.converged]
    summary = f"{len(result.rows)} rows" + (f", not converged at alpha={flagged}" if flagged else "")
    return Outcome(True, summary, paths)


def run_verify(cfg: RunConfig, out: Path) -> Outcome:
    results = run_verification(cfg.mesh.dim, cfg.mesh.n, cfg.mesh.m_steps, cfg.seed)
    table = format_table(results)
    path = out / "verify.csv"
    io.write_csv(path, ("check", "value", "threshold", "passed"),
                 ((r.name, r.value, r.threshold, r.passed) for r in results))
    return Outcome(all(r.passed for r in results), table, [path])


def run(cfg: RunConfig, mode: str | None = None, base=".", threads: int = 1) -> Outcome:
    mode = mode or cfg.mode
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    if mode == "simulate":
        return run_simulate(cfg, out, base)
    if mode == "optimize":
        return run_optimize(cfg, out, base)
    if mode == "sweep-alpha":
        return run_sweep_alpha(cfg, out, base, threads)
    if mode == "verify":
        return run_verify(cfg, out)
    raise ValueError(f"unknown mode {mode!r}")
