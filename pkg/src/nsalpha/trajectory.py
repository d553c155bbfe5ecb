"""Uniform-in-time sequences of solenoidal fields."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import ModeMismatchError, ModeSet, SolenoidalField, check_same, inner_coeff


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Fields on a uniform time mesh of ``m_steps`` steps over [t0, t_final].

    Node trajectories (states, targets) hold m_steps + 1 fields at
    t0 + n*dt.  Staggered trajectories (controls, adjoints) hold m_steps
    fields at the step midpoints t0 + (n + 1/2)*dt, which is where the
    time integrator samples the forcing.

    Time integrals use the trapezoid rule on nodes and the midpoint rule on
    staggered samples; :meth:`inner` is the discrete L2(Q) inner product.
    """

    modes: ModeSet
    t0: float
    t_final: float
    data: np.ndarray
    staggered: bool = False
    # predictor states of the second-order integrator, kept for the adjoint sweep
    stages: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != self.modes.dim + 2 or data.shape[1:] != self.modes.field_shape:
            raise ModeMismatchError(
                f"trajectory data shape {data.shape} does not match {self.modes.field_shape}")
        if not self.t_final > self.t0:
            raise ValueError("t_final must exceed t0")
        if self.m_steps_of(data) < 1:
            raise ValueError("a trajectory needs at least one step")
        if data.flags.writeable:
            data = data.copy()
            data.flags.writeable = False
        object.__setattr__(self, "data", data)

    def m_steps_of(self, data) -> int:
        return len(data) if self.staggered else len(data) - 1

    @classmethod
    def zeros(cls, modes: ModeSet, t0: float, t_final: float, m_steps: int,
              staggered: bool = False) -> "Trajectory":
        count = m_steps if staggered else m_steps + 1
        return cls(modes, t0, t_final, np.zeros((count,) + modes.field_shape, complex), staggered)

    @classmethod
    def constant(cls, u: SolenoidalField, t0: float, t_final: float, m_steps: int,
                 staggered: bool = False) -> "Trajectory":
        count = m_steps if staggered else m_steps + 1
        return cls(u.modes, t0, t_final, np.broadcast_to(u.coeff, (count,) + u.coeff.shape), staggered)

    @classmethod
    def from_fields(cls, fields, t0: float, t_final: float, staggered: bool = False) -> "Trajectory":
        fields = list(fields)
        modes = check_same(*[f.modes for f in fields])
        return cls(modes, t0, t_final, np.stack([f.coeff for f in fields]), staggered)

    @property
    def m_steps(self) -> int:
        return self.m_steps_of(self.data)

    @property
    def dt(self) -> float:
        return (self.t_final - self.t0) / self.m_steps

    @property
    def times(self) -> np.ndarray:
        offset = 0.5 if self.staggered else 0.0
        return self.t0 + (np.arange(len(self.data)) + offset) * self.dt

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights for time integrals over [t0, t_final]."""
        w = np.full(len(self.data), self.dt)
        if not self.staggered:
            w[0] = w[-1] = 0.5 * self.dt
        return w

    def __len__(self):
        return len(self.data)

    def __getitem__(self, i: int) -> SolenoidalField:
        return SolenoidalField(self.modes, self.data[i])

    def __iter__(self):
        for i in range(len(self.data)):
            yield self[i]

    @property
    def final(self) -> SolenoidalField:
        return self[len(self.data) - 1]

    def same_mesh(self, other: "Trajectory") -> bool:
        return (self.modes == other.modes and self.staggered == other.staggered
                and self.m_steps == other.m_steps
                and np.isclose(self.t0, other.t0) and np.isclose(self.t_final, other.t_final))

    def check_mesh(self, other: "Trajectory", what: str = "trajectory") -> None:
        if not self.same_mesh(other):
            raise ModeMismatchError(f"{what} is not on the same space-time mesh")

    def with_data(self, data: np.ndarray) -> "Trajectory":
        return replace(self, data=data, stages=None)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        self.check_mesh(other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        self.check_mesh(other)
        return self.with_data(self.data - other.data)

    def __neg__(self):
        return self.with_data(-self.data)

    def __mul__(self, c: float) -> "Trajectory":
        return self.with_data(self.data * c)

    __rmul__ = __mul__

    def pointwise_inner(self, other: "Trajectory") -> np.ndarray:
        self.check_mesh(other)
        return inner_coeff(self.modes, self.data, other.data)

    def inner(self, other: "Trajectory") -> float:
        """Discrete L2(Q) inner product."""
        return float(np.dot(self.weights, self.pointwise_inner(other)))

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def sq_norms(self, power: int = 0) -> np.ndarray:
        """||(-Laplacian)^(power/2) u(t)||^2 per sample (power 0: L2, 1: V, 2: D(A))."""
        w = self.data * self.modes.k2 ** (power / 2.0) if power else self.data
        return inner_coeff(self.modes, w, w)

    def sup_norm(self, power: int = 0) -> float:
        """L-infinity in time of the spatial norm selected by ``power``."""
        return float(np.sqrt(self.sq_norms(power).max()))

    def l2_norm(self, power: int = 0) -> float:
        """L2 in time of the spatial norm selected by ``power``."""
        return float(np.sqrt(np.dot(self.weights, self.sq_norms(power))))
