"""Linearized operator, its adjoint, and the backward adjoint sweep.

The adjoint state lambda solves, backward in time,

    -m_a dlambda/dt + nu m_a |k|^2 lambda + B'(u, u)^* lambda = source(u),
    m_a lambda(T) = gamma_T (u(T) - u_T)

The sweep below is the exact transpose of the forward integrator in
:mod:`nsalpha.state` (discretize-then-optimize), so ``gamma_f f + lambda``
is the exact gradient of the discrete cost.  lambda is returned at the step
midpoints, where the control lives; as an approximation of the continuous
adjoint it has the same order as the forward scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    ModeSet,
    SolenoidalField,
    check_same,
    coeff_to_grid,
    grid_to_coeff,
    helmholtz_solve,
    l4_power4_coeff,
    padded_grid,
    padded_to_coeff,
    project_coeff,
)
from .state import BlowUpError, PhysicalParams, _grad, as_forcing, b_coeff, step_operators
from .trajectory import Trajectory

COST_KINDS = ("J", "J0")


# -- operators ----------------------------------------------------------------

def linearized_B(u_hat: SolenoidalField, w: SolenoidalField, alpha: float) -> SolenoidalField:
    """B'(u_hat, u_hat) w = B(u_hat, w) + B(w, u_hat)."""
    modes = check_same(u_hat.modes, w.modes)
    c = b_coeff(modes, u_hat.coeff, w.coeff, alpha) + b_coeff(modes, w.coeff, u_hat.coeff, alpha)
    return SolenoidalField(modes, c)


def bstar_coeff(modes: ModeSet, u: np.ndarray, lam: np.ndarray, alpha: float) -> np.ndarray:
    d = modes.dim
    a2 = alpha * alpha
    m_a = modes.helmholtz_multiplier(alpha)
    flat = (d * d,) + modes.shape
    parts = [u, lam, u * m_a, _grad(modes, lam).reshape(flat)]
    if a2:
        parts += [_grad(modes, u).reshape(flat), _grad(modes, -modes.k2 * u).reshape(flat)]
    g = coeff_to_grid(modes, np.concatenate(parts))
    ug, lg, qg = g[:d], g[d:2 * d], g[2 * d:3 * d]
    dl = g[3 * d:3 * d + d * d].reshape((d, d) + modes.shape)          # dl[i, j] = d_i lam_j
    adv = np.einsum("i...,ij...->j...", ug, dl)                       # u . grad lam
    transp = np.einsum("ij...,j...->i...", dl, qg)                    # (grad lam)^T q
    out = -m_a * grid_to_coeff(modes, adv) - grid_to_coeff(modes, transp)
    if a2:
        du = g[3 * d + d * d:3 * d + 2 * d * d].reshape((d, d) + modes.shape)
        dlap = g[3 * d + 2 * d * d:].reshape((d, d) + modes.shape)
        stretch = np.einsum("i...,ij...->j...", lg, du)                # lam . grad u
        lap_adv = np.einsum("i...,ij...->j...", lg, dlap)              # lam . grad (Lap u)
        out = out + a2 * modes.k2 * grid_to_coeff(modes, stretch) + a2 * grid_to_coeff(modes, lap_adv)
    return project_coeff(modes, out)


def adjoint_B_star(u_hat: SolenoidalField, lam: SolenoidalField, alpha: float) -> SolenoidalField:
    """Transpose of ``w -> linearized_B(u_hat, w)`` in the discrete L2 product.

    Evaluates P[-u.grad lam + a^2 Lap(u.grad lam) - a^2 Lap(lam.grad u)
    - (grad lam)^T (I - a^2 Lap) u + a^2 lam.grad(Lap u)] pseudospectrally.
    """
    modes = check_same(u_hat.modes, lam.modes)
    return SolenoidalField(modes, bstar_coeff(modes, u_hat.coeff, lam.coeff, alpha))


# -- sources ------------------------------------------------------------------

def l4_cubic_coeff(modes: ModeSet, g: np.ndarray) -> np.ndarray:
    """P[|g|^2 g], exact for band-limited g."""
    grid = padded_grid(modes, g)
    mag2 = np.sum(grid * grid, axis=0)
    return project_coeff(modes, padded_to_coeff(modes, mag2 * grid))


def rhs_coeff(modes: ModeSet, g: np.ndarray, kind: str, gamma_u: float) -> np.ndarray:
    """Gradient of the instantaneous tracking cost with respect to u.

    J:  gamma_u/2 ||A g||^2      ->  gamma_u |k|^4 g
    J0: gamma_u/2 ||g||_L4^8     ->  4 gamma_u ||g||_L4^4 P[|g|^2 g]
    """
    if kind == "J":
        return gamma_u * modes.k2 ** 2 * g
    if kind == "J0":
        return 4.0 * gamma_u * l4_power4_coeff(modes, g) * l4_cubic_coeff(modes, g)
    raise ValueError(f"unknown cost kind {kind!r}; expected one of {COST_KINDS}")


def tracking_value(modes: ModeSet, g: np.ndarray, kind: str) -> float:
    """||A g||^2 (J) or ||g||_L4^8 (J0) for one time sample."""
    if kind == "J":
        w = g * modes.k2
        return float(modes.volume * np.sum((np.conj(w) * w).real))
    if kind == "J0":
        return float(l4_power4_coeff(modes, g)) ** 2
    raise ValueError(f"unknown cost kind {kind!r}; expected one of {COST_KINDS}")


@dataclass(frozen=True)
class AdjointSource:
    """Distributed adjoint forcing; ``target`` None means u_d = 0."""

    kind: str = "J"
    target: Trajectory | None = None
    gamma_u: float = 0.0

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.gamma_u < 0:
            raise ValueError("gamma_u must be >= 0")
        if self.target is not None and self.target.staggered:
            raise ValueError("tracking target must be sampled at the state nodes")

    def deviation(self, u: Trajectory, n: int) -> np.ndarray:
        return u.data[n] - self.target.data[n] if self.target is not None else u.data[n]

    def rhs(self, u: Trajectory, n: int) -> np.ndarray:
        if self.gamma_u == 0:
            return np.zeros(u.modes.field_shape, complex)
        return rhs_coeff(u.modes, self.deviation(u, n), self.kind, self.gamma_u)


def adjoint_rhs(u: SolenoidalField, u_d: SolenoidalField | None, kind: str,
                gamma_u: float) -> SolenoidalField:
    """Adjoint forcing at one instant for g = u - u_d."""
    g = u.coeff if u_d is None else (u - u_d).coeff
    return SolenoidalField(u.modes, rhs_coeff(u.modes, g, kind, gamma_u))


@dataclass(frozen=True)
class TerminalCondition:
    gamma_T: float = 0.0
    target: SolenoidalField | None = None

    def __post_init__(self):
        if self.gamma_T < 0:
            raise ValueError("gamma_T must be >= 0")

    def misfit(self, u_final: SolenoidalField) -> SolenoidalField:
        return u_final - self.target if self.target is not None else u_final

    def lambda_T(self, u_final: SolenoidalField, alpha: float) -> SolenoidalField:
        """lambda(T) with (I - alpha^2 Lap) lambda(T) = gamma_T (u(T) - u_T)."""
        return helmholtz_solve(self.misfit(u_final) * self.gamma_T, alpha)


# -- backward sweep -----------------------------------------------------------

def integrate_adjoint(u: Trajectory, source: AdjointSource, tc: TerminalCondition,
                      p: PhysicalParams, scheme: str = "cn",
                      forcing: Trajectory | None = None) -> Trajectory:
    """Backward adjoint sweep along the state trajectory ``u``.

    ``u`` must come from :func:`nsalpha.state.integrate_state` with the same
    ``scheme``; for the second-order scheme its predictor stages are reused,
    or recomputed from ``forcing`` when the trajectory was loaded from disk.
    Returns lambda at the step midpoints.
    """
    if u.staggered:
        raise ValueError("state trajectory must be sampled at nodes")
    if source.target is not None:
        u.check_mesh(source.target, "tracking target")
    if not np.isclose(u.t_final - u.t0, p.t_final):
        raise ValueError("state trajectory does not span [0, t_final]")
    modes, m, dt = u.modes, u.m_steps, u.dt
    minv, r, s = step_operators(modes, p.nu, p.alpha, dt, scheme)
    weights = u.weights
    stages = u.stages
    if scheme == "cn" and stages is None:
        if forcing is None:
            raise ValueError("predictor stages unavailable: pass the forcing used for the state")
        f = as_forcing(forcing, modes, p.t_final, m)
        stages = np.stack([
            r * (s * u.data[n] + dt * minv * (f.data[n] - b_coeff(modes, u.data[n], u.data[n], p.alpha)))
            for n in range(m)])

    lam = np.empty((m,) + modes.field_shape, dtype=complex)
    ubar = tc.gamma_T * tc.misfit(u.final).coeff + weights[m] * source.rhs(u, m)
    for n in range(m - 1, -1, -1):
        y = r * ubar
        if scheme == "cn":
            abar = r * (-0.5 * dt) * bstar_coeff(modes, stages[n], minv * y, p.alpha)
            lam[n] = minv * (y + abar)
            ubar = s * (y + abar) - bstar_coeff(modes, u.data[n], minv * (0.5 * dt * y + dt * abar), p.alpha)
        else:
            lam[n] = minv * y
            ubar = y - dt * bstar_coeff(modes, u.data[n], minv * y, p.alpha)
        if n > 0:
            ubar = ubar + weights[n] * source.rhs(u, n)
        if not np.all(np.isfinite(lam[n])):
            raise BlowUpError(n, "non-finite adjoint")
    return Trajectory(modes, u.t0, u.t_final, lam, staggered=True)


def ee7_monitors(lam: Trajectory, alpha: float) -> dict[str, float]:
    """Uniform-in-alpha adjoint bounds: sup/L2-in-time norms of lambda."""
    a2 = alpha * alpha
    return {
        "alpha": alpha,
        "sup_l2": lam.sup_norm(0),
        "sup_alpha2_gradl2": a2 * lam.sup_norm(1),
        "l2l2_grad": lam.l2_norm(1),
        "l2l2_alpha2_A": a2 * lam.l2_norm(2),
    }
