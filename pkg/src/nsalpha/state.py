"""Forward solver for the Navier-Stokes-alpha state equation.

Per retained mode the Galerkin system reads

    m_a(k) du/dt + nu m_a(k) |k|^2 u = f - B(u, u),      m_a(k) = 1 + alpha^2 |k|^2

where B(u, v) = P[(u.grad) w + (grad u)^T w] with w = (I - alpha^2 Lap) v.
The linear part is diagonal and treated with Crank-Nicolson; B and the
forcing are explicit (Heun predictor-corrector), giving a second-order IMEX
scheme.  A first-order IMEX-Euler variant is available as ``scheme="euler"``.

The forcing is sampled once per step at the step midpoint (a staggered
:class:`~nsalpha.trajectory.Trajectory`), i.e. it is piecewise constant in
time.  The optimizer uses the same convention.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .spectral import (
    ModeSet,
    SolenoidalField,
    check_same,
    coeff_to_grid,
    grid_to_coeff,
    inner_coeff,
    project_coeff,
)
from .io import write_csv
from .trajectory import Trajectory

log = logging.getLogger(__name__)

SCHEMES = ("cn", "euler")
BLOWUP_FACTOR = 1e8


class BlowUpError(RuntimeError):
    def __init__(self, step: int, message: str = "non-finite or exploding field"):
        super().__init__(f"{message} at step {step}")
        self.step = step


@dataclass(frozen=True)
class PhysicalParams:
    nu: float
    alpha: float
    t_final: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be > 0")
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not self.t_final > 0:
            raise ValueError("t_final must be > 0")


# -- nonlinear operator -------------------------------------------------------

def _grad(modes: ModeSet, c: np.ndarray) -> np.ndarray:
    """Spectral gradient, result[i, j] = d_i c_j."""
    return modes.ik[:, None] * c[None, :]


def b_coeff(modes: ModeSet, u: np.ndarray, v: np.ndarray, alpha: float) -> np.ndarray:
    d = modes.dim
    q = v * modes.helmholtz_multiplier(alpha)
    stacked = np.concatenate([u, q, _grad(modes, u).reshape((d * d,) + modes.shape),
                              _grad(modes, q).reshape((d * d,) + modes.shape)])
    g = coeff_to_grid(modes, stacked)
    ug, qg = g[:d], g[d:2 * d]
    du = g[2 * d:2 * d + d * d].reshape((d, d) + modes.shape)   # du[j, i] = d_j u_i
    dq = g[2 * d + d * d:].reshape((d, d) + modes.shape)        # dq[i, j] = d_i q_j
    prod = np.einsum("i...,ij...->j...", ug, dq) + np.einsum("ji...,i...->j...", du, qg)
    return project_coeff(modes, grid_to_coeff(modes, prod))


def nonlinear_B(u: SolenoidalField, v: SolenoidalField, alpha: float) -> SolenoidalField:
    """B(u, v) for the NS-alpha model, dealiased and Leray-projected.

    Satisfies (B(u, v), u) = 0 to round-off for every pair in the discrete
    space.  At alpha = 0, B(u, u) = P[(u.grad) u].
    """
    modes = check_same(u.modes, v.modes)
    return SolenoidalField(modes, b_coeff(modes, u.coeff, v.coeff, alpha))


def advection_coeff(modes: ModeSet, u: np.ndarray) -> np.ndarray:
    """P[(u.grad) u], the Navier-Stokes nonlinearity."""
    d = modes.dim
    g = coeff_to_grid(modes, np.concatenate([u, _grad(modes, u).reshape((d * d,) + modes.shape)]))
    du = g[d:].reshape((d, d) + modes.shape)
    return project_coeff(modes, grid_to_coeff(modes, np.einsum("i...,ij...->j...", g[:d], du)))


# -- energy bookkeeping -------------------------------------------------------

def _energy(modes, c, alpha):
    return inner_coeff(modes, c, c * modes.helmholtz_multiplier(alpha))


def _dissipation(modes, c, nu, alpha):
    return nu * inner_coeff(modes, c, c * modes.k2 * modes.helmholtz_multiplier(alpha))


def energy_residual(u_prev: SolenoidalField, u_next: SolenoidalField, f_mid: SolenoidalField,
                    nu: float, alpha: float, dt: float) -> float:
    """Defect of the energy identity over one step, midpoint quadrature.

    |dE/(2 dt) + nu ||grad u||^2 + nu alpha^2 ||A u||^2 - (f, u)| with
    E = ||u||^2 + alpha^2 ||grad u||^2 and the last three terms evaluated at
    u_mid = (u_prev + u_next) / 2.
    """
    modes = check_same(u_prev.modes, u_next.modes, f_mid.modes)
    mid = 0.5 * (u_prev.coeff + u_next.coeff)
    de = _energy(modes, u_next.coeff, alpha) - _energy(modes, u_prev.coeff, alpha)
    value = de / (2 * dt) + _dissipation(modes, mid, nu, alpha) - inner_coeff(modes, f_mid.coeff, mid)
    return float(abs(value))


@dataclass(frozen=True)
class EnergyLedger:
    """Energy budget of a state trajectory.

    Node quantities (length m+1): ``kinetic`` = ||u||^2, ``gradient`` =
    alpha^2 ||grad u||^2.  Step quantities (length m, midpoint values):
    ``dissipation``, ``work`` = (f, u) and the identity ``residual``.
    """

    times: np.ndarray
    kinetic: np.ndarray
    gradient: np.ndarray
    dissipation: np.ndarray
    work: np.ndarray
    residual: np.ndarray
    sup_v: float
    l2_da: float

    @property
    def max_residual(self) -> float:
        return float(self.residual.max()) if len(self.residual) else 0.0

    def rows(self):
        """CSV rows; row 0 carries the initial state with zero step terms."""
        yield ("step", "t", "kinetic", "gradient", "dissipation", "work", "residual")
        for n, t in enumerate(self.times):
            step = (0.0, 0.0, 0.0) if n == 0 else (
                self.dissipation[n - 1], self.work[n - 1], self.residual[n - 1])
            yield (n, t, self.kinetic[n], self.gradient[n]) + tuple(step)

    def to_csv(self, path) -> None:
        rows = self.rows()
        write_csv(path, next(rows), rows)


def build_ledger(traj: Trajectory, f: Trajectory, nu: float, alpha: float) -> EnergyLedger:
    modes = traj.modes
    data, dt = traj.data, traj.dt
    mid = 0.5 * (data[1:] + data[:-1])
    m_a = modes.helmholtz_multiplier(alpha)
    kinetic = inner_coeff(modes, data, data)
    gradient = alpha ** 2 * inner_coeff(modes, data, data * modes.k2)
    dissipation = nu * inner_coeff(modes, mid, mid * modes.k2 * m_a)
    work = inner_coeff(modes, f.data, mid)
    de = np.diff(kinetic + gradient)
    residual = np.abs(de / (2 * dt) + dissipation - work)
    da2 = inner_coeff(modes, data * modes.k2, data * modes.k2)
    return EnergyLedger(traj.times, kinetic, gradient, dissipation, work, residual,
                        sup_v=traj.sup_norm(1), l2_da=float(np.sqrt(np.dot(traj.weights, da2))))


def apriori_bound(traj: Trajectory, f: Trajectory, nu: float, alpha: float):
    """Both sides of the discrete a-priori energy estimate at every node.

    lhs(t) = ||u(t)||^2 + alpha^2 ||grad u(t)||^2
             + nu int_0^t (||grad u||^2 + 2 alpha^2 ||A u||^2)
    rhs(t) = C int_0^t ||f||^2 + ||u0||^2 + alpha^2 ||grad u0||^2

    with C = 1 / (nu * lambda_1), lambda_1 = min |k|^2 the Poincare constant.
    """
    modes = traj.modes
    data, dt = traj.data, traj.dt
    mid = 0.5 * (data[1:] + data[:-1])
    energy = _energy(modes, data, alpha)
    integrand = nu * (inner_coeff(modes, mid, mid * modes.k2)
                      + 2 * alpha ** 2 * inner_coeff(modes, mid * modes.k2, mid * modes.k2))
    lhs = energy + np.concatenate([[0.0], np.cumsum(dt * integrand)])
    c = 1.0 / (nu * modes.min_k2)
    rhs = energy[0] + c * np.concatenate([[0.0], np.cumsum(dt * inner_coeff(modes, f.data, f.data))])
    return lhs, rhs


# -- time integration ---------------------------------------------------------

def as_forcing(f: Trajectory | None, modes: ModeSet, t_final: float, m_steps: int) -> Trajectory:
    """Staggered forcing; node trajectories are averaged to step midpoints."""
    if f is None:
        return Trajectory.zeros(modes, 0.0, t_final, m_steps, staggered=True)
    check_same(f.modes, modes)
    if f.m_steps != m_steps or not np.isclose(f.t_final - f.t0, t_final):
        raise ValueError("forcing is not sampled on the integrator's time mesh")
    if not f.staggered:
        f = Trajectory(modes, f.t0, f.t_final, 0.5 * (f.data[1:] + f.data[:-1]), staggered=True)
    return f


def step_operators(modes: ModeSet, nu: float, alpha: float, dt: float, scheme: str):
    minv = 1.0 / modes.helmholtz_multiplier(alpha)
    lin = nu * modes.k2
    if scheme == "cn":
        return minv, 1.0 / (1.0 + 0.5 * dt * lin), 1.0 - 0.5 * dt * lin
    if scheme == "euler":
        return minv, 1.0 / (1.0 + dt * lin), None
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def integrate_state(u0: SolenoidalField, f: Trajectory | None, p: PhysicalParams, m_steps: int,
                    scheme: str = "cn", check_skew: bool = False) -> tuple[Trajectory, EnergyLedger]:
    """Integrate the state equation from u(0) = u0 over [0, p.t_final].

    Returns the node trajectory (m_steps + 1 fields) and its energy ledger.
    With ``check_skew`` every evaluation of B(u, u) is checked for
    (B(u, u), u) = 0.
    """
    if m_steps < 1:
        raise ValueError("m_steps must be >= 1")
    modes = u0.modes
    f = as_forcing(f, modes, p.t_final, m_steps)
    dt = p.t_final / m_steps
    minv, r, s = step_operators(modes, p.nu, p.alpha, dt, scheme)

    out = np.empty((m_steps + 1,) + modes.field_shape, dtype=complex)
    stages = np.empty((m_steps,) + modes.field_shape, dtype=complex) if scheme == "cn" else None
    out[0] = u0.coeff
    scale = float(np.sqrt(inner_coeff(modes, u0.coeff, u0.coeff)))
    scale += p.t_final * float(np.sqrt(inner_coeff(modes, f.data, f.data).max()))
    umax = np.abs(coeff_to_grid(modes, u0.coeff)).max()
    log.info("advisory stability number max|u0|*dt*n = %.3g", umax * dt * modes.n)

    def bterm(c):
        b = b_coeff(modes, c, c, p.alpha)
        if check_skew:
            defect = abs(inner_coeff(modes, b, c))
            bound = 1e-12 * (np.sqrt(inner_coeff(modes, b, b) * inner_coeff(modes, c, c)) + 1e-300)
            if defect > bound:
                raise RuntimeError(f"skew-symmetry violated: |(B(u,u),u)| = {defect:.3e}")
        return b

    u = out[0]
    for n in range(m_steps):
        force = minv * f.data[n]
        bn = minv * bterm(u)
        if scheme == "cn":
            ut = r * (s * u + dt * (force - bn))
            stages[n] = ut
            u = r * (s * u + dt * force - 0.5 * dt * (bn + minv * bterm(ut)))
        else:
            u = r * (u + dt * (force - bn))
        norm = np.sqrt(inner_coeff(modes, u, u))
        if not np.isfinite(norm) or (scale > 0 and norm > BLOWUP_FACTOR * scale):
            raise BlowUpError(n + 1)
        out[n + 1] = u

    traj = Trajectory(modes, 0.0, p.t_final, out, staggered=False, stages=stages)
    ledger = build_ledger(traj, f, p.nu, p.alpha)
    umax = np.abs(coeff_to_grid(modes, out[-1])).max()
    log.info("advisory stability number max|u(T)|*dt*n = %.3g", umax * dt * modes.n)
    return traj, ledger
