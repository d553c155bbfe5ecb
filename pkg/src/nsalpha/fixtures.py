"""Built-in initial conditions, forcings and tracking targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import ModeSet, SolenoidalField, leray_project, random_field, single_mode, to_spectral
from .state import PhysicalParams, integrate_state
from .trajectory import Trajectory

INITIAL_FIXTURES = ("zero", "single-mode", "taylor-green", "random")
TARGET_FIXTURES = ("zero", "tracking")
FORCING_FIXTURES = ("zero", "smooth")


def unit_mode(modes: ModeSet, amplitude: float = 1.0) -> SolenoidalField:
    """amplitude * cos(x_1) e_2, a single mode with |k|^2 = 1."""
    k = np.zeros(modes.dim, int)
    a = np.zeros(modes.dim)
    k[0], a[1] = 1, amplitude
    return single_mode(modes, tuple(k), a)


def taylor_green(modes: ModeSet, amplitude: float = 1.0) -> SolenoidalField:
    """Taylor-Green vortex: (sin x cos y, -cos x sin y[, 0]) (x cos z in 3D)."""
    x = modes.grid()
    u = np.zeros(modes.field_shape)
    zfac = np.cos(x[2]) if modes.dim == 3 else 1.0
    u[0] = np.sin(x[0]) * np.cos(x[1]) * zfac
    u[1] = -np.cos(x[0]) * np.sin(x[1]) * zfac
    return leray_project(modes, to_spectral(modes, amplitude * u))


def smooth_control(modes: ModeSet, t_final: float, m_steps: int, rng: np.random.Generator,
                   scale: float = 1.0) -> Trajectory:
    """Midpoint-sampled control a + b sin(pi t / T) with random smooth a, b."""
    a = random_field(modes, rng, scale, decay=2.0)
    b = random_field(modes, rng, scale, decay=2.0)
    t = (np.arange(m_steps) + 0.5) * (t_final / m_steps)
    amp = np.sin(np.pi * t / t_final).reshape((-1,) + (1,) * b.coeff.ndim)
    data = a.coeff[None] + amp * b.coeff[None]
    return Trajectory(modes, 0.0, t_final, data, staggered=True)


@dataclass(frozen=True)
class TrackingFixture:
    u0: SolenoidalField
    f_star: Trajectory
    u_d: Trajectory
    u_T: SolenoidalField


def tracking_fixture(modes: ModeSet, params: PhysicalParams, m_steps: int, seed: int = 0,
                     u0: SolenoidalField | None = None, control_scale: float = 1.0,
                     target_alpha: float | None = None) -> TrackingFixture:
    """Targets generated by running the state equation with a known control.

    ``u0`` defaults to a Taylor-Green vortex of amplitude 1/2.
    ``target_alpha`` selects the model that generates the targets (default:
    the alpha of ``params``).
    """
    rng = np.random.default_rng(seed)
    u0 = taylor_green(modes, 0.5) if u0 is None else u0
    f_star = smooth_control(modes, params.t_final, m_steps, rng, control_scale)
    gen = params if target_alpha is None else PhysicalParams(params.nu, target_alpha, params.t_final)
    u_d, _ = integrate_state(u0, f_star, gen, m_steps)
    return TrackingFixture(u0, f_star, u_d.with_data(u_d.data), u_d.final)


def initial_condition(name: str, modes: ModeSet, seed: int = 0, amplitude: float = 1.0) -> SolenoidalField:
    if name == "zero":
        return SolenoidalField.zeros(modes)
    if name == "single-mode":
        return unit_mode(modes, amplitude)
    if name == "taylor-green":
        return taylor_green(modes, amplitude)
    if name == "random":
        return random_field(modes, np.random.default_rng(seed), amplitude, decay=2.0)
    raise ValueError(f"unknown initial-condition fixture {name!r}")


def smooth_fixture(modes: ModeSet, nu: float = 0.1, t_final: float = 0.5, m_steps: int = 32,
                   seed: int = 1) -> TrackingFixture:
    """Short-horizon targets from a known Navier-Stokes (alpha = 0) run."""
    return tracking_fixture(modes, PhysicalParams(nu, 0.0, t_final), m_steps, seed=seed)
