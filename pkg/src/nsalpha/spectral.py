"""Fourier representation of solenoidal fields on the periodic torus [0, 2*pi)^d.

Normalization
-------------
A field is stored by its Fourier coefficients ``c(k)`` in the numpy FFT
layout, one complex array of shape ``(d, n, ..., n)``::

    u(x) = sum_k c(k) exp(i k.x)        c = fftn(u_grid) / n**d

With this convention every inner product is the true integral over the
torus, ``(u, v) = (2*pi)**d * sum_k Re(conj(c_u(k)) . c_v(k))``, and the grid
quadrature ``(2*pi/n)**d * sum_x u(x).v(x)`` gives exactly the same number
(discrete Parseval).

The discrete space is the Galerkin space of divergence-free, mean-free modes
that survive the 2/3 dealiasing rule.  Products of two such fields computed
on the n-point grid are exact on the retained modes, which is what makes the
discrete skew-symmetry and transpose identities hold to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi


class ModeMismatchError(ValueError):
    """Fields or arrays defined on different mode sets were combined."""


@dataclass(frozen=True)
class ModeSet:
    """Truncated Fourier basis on the 2*pi-periodic torus.

    ``cutoff`` is the largest integer c with 3c < n, so every retained
    wavevector satisfies |k_i| <= c <= n/3 and quadratic products never alias
    back onto retained modes.  For n not divisible by 3 this is floor(n/3).
    """

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"n must be even and >= 4, got {self.n}")

    period = TWO_PI

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def field_shape(self) -> tuple[int, ...]:
        return (self.dim,) + self.shape

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def volume(self) -> float:
        return TWO_PI ** self.dim

    @property
    def cutoff(self) -> int:
        return (self.n - 1) // 3

    @cached_property
    def k1d(self) -> np.ndarray:
        # FFT ordering with the Nyquist index reported as +n/2
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        k[self.n // 2] = self.n // 2
        return k

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavevectors, shape (dim, n, ..., n)."""
        return np.stack(np.meshgrid(*([self.k1d] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k.astype(float) ** 2, axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.all(np.abs(self.k) <= self.cutoff, axis=0)

    @cached_property
    def active(self) -> np.ndarray:
        """Retained modes: dealiased and not the mean mode."""
        return self.dealias_mask & (self.k2 > 0)

    @cached_property
    def k2_safe(self) -> np.ndarray:
        k2 = self.k2.copy()
        k2[k2 == 0] = 1.0
        return k2

    @cached_property
    def ik(self) -> np.ndarray:
        return 1j * self.k.astype(float)

    @cached_property
    def min_k2(self) -> float:
        return float(self.k2[self.active].min())

    def zeros(self) -> np.ndarray:
        return np.zeros(self.field_shape, dtype=complex)

    def grid(self) -> np.ndarray:
        """Physical grid coordinates, shape (dim, n, ..., n)."""
        x = np.arange(self.n) * (TWO_PI / self.n)
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def helmholtz_multiplier(self, alpha: float) -> np.ndarray:
        return 1.0 + alpha * alpha * self.k2

    # -- zero padding for quartic products -----------------------------------

    @property
    def pad_n(self) -> int:
        return 2 * self.n

    @cached_property
    def _pad_index(self):
        ks = np.arange(-self.cutoff, self.cutoff + 1)
        src = np.ix_(*([ks % self.n] * self.dim))
        dst = np.ix_(*([ks % self.pad_n] * self.dim))
        return src, dst


def check_same(*modes: ModeSet) -> ModeSet:
    first = modes[0]
    for m in modes[1:]:
        if m != first:
            raise ModeMismatchError(f"mode sets differ: {first} vs {m}")
    return first


class SolenoidalField:
    """Spectral coefficients of a real, mean-free, divergence-free field.

    Instances are immutable; arithmetic returns new fields.  The constructor
    trusts its input; use :func:`leray_project` to build a field from
    arbitrary coefficients.
    """

    __slots__ = ("modes", "coeff")

    def __init__(self, modes: ModeSet, coeff: np.ndarray):
        coeff = np.asarray(coeff, dtype=complex)
        if coeff.shape != modes.field_shape:
            raise ModeMismatchError(
                f"coefficient shape {coeff.shape} does not match {modes.field_shape}")
        if coeff.flags.writeable:
            coeff = coeff.copy()
            coeff.flags.writeable = False
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeff", coeff)

    def __setattr__(self, name, value):
        raise AttributeError("SolenoidalField is immutable")

    @classmethod
    def zeros(cls, modes: ModeSet) -> "SolenoidalField":
        return cls(modes, modes.zeros())

    def _other(self, other: "SolenoidalField") -> np.ndarray:
        check_same(self.modes, other.modes)
        return other.coeff

    def __add__(self, other):
        return SolenoidalField(self.modes, self.coeff + self._other(other))

    def __sub__(self, other):
        return SolenoidalField(self.modes, self.coeff - self._other(other))

    def __neg__(self):
        return SolenoidalField(self.modes, -self.coeff)

    def __mul__(self, c: float):
        return SolenoidalField(self.modes, self.coeff * c)

    __rmul__ = __mul__

    def __truediv__(self, c: float):
        return SolenoidalField(self.modes, self.coeff / c)

    def __repr__(self):
        return f"SolenoidalField(dim={self.modes.dim}, n={self.modes.n}, l2={l2_norm(self):.6g})"

    def max_divergence(self) -> float:
        """max_k |k . c(k)|."""
        return float(np.max(np.abs(np.sum(self.modes.k * self.coeff, axis=0))))

    def hermitian_defect(self) -> float:
        """max_k |c(-k) - conj(c(k))| over retained modes."""
        flipped = np.conj(np.flip(self.coeff, axis=self.modes.axes))
        # flip maps index j -> n-1-j; roll by one restores -k at index (n-j) mod n
        flipped = np.roll(flipped, 1, axis=self.modes.axes)
        return float(np.max(np.abs(self.coeff - flipped)))


# -- projections and multipliers ---------------------------------------------

def project_coeff(modes: ModeSet, raw: np.ndarray) -> np.ndarray:
    """Leray projection + truncation on raw coefficient arrays.

    Leading axes beyond the field shape are treated as a batch.
    """
    k = modes.k
    div = np.sum(k * raw, axis=-modes.dim - 1, keepdims=True)
    out = raw - k * (div / modes.k2_safe)
    return out * modes.active


def leray_project(modes: ModeSet, raw: np.ndarray) -> SolenoidalField:
    """Orthogonal L2 projection onto the discrete solenoidal space.

    Per retained mode k != 0 the output is (I - k k^T/|k|^2) raw(k); the mean
    mode and every mode outside the dealiasing mask are zeroed.
    """
    raw = np.asarray(raw, dtype=complex)
    if raw.shape != modes.field_shape:
        raise ModeMismatchError(
            f"raw coefficients of shape {raw.shape} do not match {modes.field_shape}")
    return SolenoidalField(modes, project_coeff(modes, raw))


def helmholtz_apply(u: SolenoidalField, alpha: float) -> SolenoidalField:
    """Apply I - alpha^2 Laplacian (multiplier 1 + alpha^2 |k|^2)."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return SolenoidalField(u.modes, u.coeff * u.modes.helmholtz_multiplier(alpha))


def helmholtz_solve(u: SolenoidalField, alpha: float) -> SolenoidalField:
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return SolenoidalField(u.modes, u.coeff / u.modes.helmholtz_multiplier(alpha))


def stokes_apply(u: SolenoidalField) -> SolenoidalField:
    """Stokes operator A = -P Laplacian, multiplier |k|^2 on solenoidal fields."""
    return SolenoidalField(u.modes, u.coeff * u.modes.k2)


# -- transforms ---------------------------------------------------------------

def coeff_to_grid(modes: ModeSet, coeff: np.ndarray) -> np.ndarray:
    """Inverse transform of any (..., n, ..., n) coefficient array."""
    scale = modes.n ** modes.dim
    return sfft.ifftn(coeff, axes=modes.axes).real * scale


def grid_to_coeff(modes: ModeSet, grid: np.ndarray) -> np.ndarray:
    scale = modes.n ** modes.dim
    return sfft.fftn(grid, axes=modes.axes) / scale


def to_physical(u: SolenoidalField) -> np.ndarray:
    """Grid samples u(x_j) at x_j = 2*pi*j/n, shape (dim, n, ..., n)."""
    return coeff_to_grid(u.modes, u.coeff)


def to_spectral(modes: ModeSet, grid: np.ndarray) -> np.ndarray:
    """Raw coefficients of grid samples (no projection applied)."""
    grid = np.asarray(grid, dtype=float)
    if grid.shape[-modes.dim:] != modes.shape:
        raise ModeMismatchError(f"grid shape {grid.shape} does not match {modes.shape}")
    return grid_to_coeff(modes, grid)


def padded_grid(modes: ModeSet, coeff: np.ndarray) -> np.ndarray:
    """Evaluate band-limited coefficients on the 2n-point grid."""
    src, dst = modes._pad_index
    lead = coeff.shape[: coeff.ndim - modes.dim]
    padded = np.zeros(lead + (modes.pad_n,) * modes.dim, dtype=complex)
    padded[(Ellipsis,) + dst] = coeff[(Ellipsis,) + src]
    return sfft.ifftn(padded, axes=modes.axes).real * modes.pad_n ** modes.dim


def padded_to_coeff(modes: ModeSet, grid: np.ndarray) -> np.ndarray:
    """Forward transform on the 2n grid, truncated back to the n layout."""
    src, dst = modes._pad_index
    full = sfft.fftn(grid, axes=modes.axes) / modes.pad_n ** modes.dim
    lead = grid.shape[: grid.ndim - modes.dim]
    out = np.zeros(lead + modes.shape, dtype=complex)
    out[(Ellipsis,) + src] = full[(Ellipsis,) + dst]
    return out


# -- inner products and norms -------------------------------------------------

def inner_coeff(modes: ModeSet, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """L2 inner products summed over the trailing field axes (batched)."""
    axes = tuple(range(-modes.dim - 1, 0))
    return modes.volume * np.sum((np.conj(a) * b).real, axis=axes)


def l2_inner(u: SolenoidalField, v: SolenoidalField) -> float:
    check_same(u.modes, v.modes)
    return float(inner_coeff(u.modes, u.coeff, v.coeff))


def l2_norm(u: SolenoidalField) -> float:
    return float(np.sqrt(inner_coeff(u.modes, u.coeff, u.coeff)))


def v_norm(u: SolenoidalField) -> float:
    """||grad u||, the V norm on mean-free fields."""
    w = u.coeff * np.sqrt(u.modes.k2)
    return float(np.sqrt(inner_coeff(u.modes, w, w)))


def da_norm(u: SolenoidalField) -> float:
    """||A u||."""
    w = u.coeff * u.modes.k2
    return float(np.sqrt(inner_coeff(u.modes, w, w)))


def l4_power4_coeff(modes: ModeSet, coeff: np.ndarray) -> np.ndarray:
    """int |u|^4 dx, exact for band-limited fields (2n-point quadrature)."""
    g = padded_grid(modes, coeff)
    mag2 = np.sum(g * g, axis=-modes.dim - 1)
    axes = tuple(range(-modes.dim, 0))
    return np.sum(mag2 * mag2, axis=axes) * (modes.volume / modes.pad_n ** modes.dim)


def l4_norm(u: SolenoidalField) -> float:
    return float(l4_power4_coeff(u.modes, u.coeff)) ** 0.25


# -- construction helpers -----------------------------------------------------

def random_field(modes: ModeSet, rng: np.random.Generator, scale: float = 1.0,
                 decay: float = 1.0) -> SolenoidalField:
    """Random real solenoidal field with spectrum |c(k)| ~ |k|^-decay.

    The result is normalized so that ||u|| = scale.
    """
    grid = rng.standard_normal(modes.field_shape)
    raw = grid_to_coeff(modes, grid) * modes.k2_safe ** (-decay / 2.0)
    u = leray_project(modes, raw)
    norm = l2_norm(u)
    return u * (scale / norm) if norm > 0 else u


def single_mode(modes: ModeSet, k: tuple[int, ...], amplitude: np.ndarray | tuple) -> SolenoidalField:
    """The field a cos(k.x) with a perpendicular to k."""
    k = np.asarray(k, dtype=int)
    a = np.asarray(amplitude, dtype=float)
    if k.shape != (modes.dim,) or a.shape != (modes.dim,):
        raise ModeMismatchError("wavevector and amplitude must have length dim")
    if abs(float(k @ a)) > 1e-14 * np.linalg.norm(a) * np.linalg.norm(k):
        raise ValueError("amplitude must be perpendicular to k")
    if np.any(np.abs(k) > modes.cutoff) or not np.any(k):
        raise ValueError(f"wavevector {tuple(k)} is not a retained mode")
    coeff = modes.zeros()
    plus = tuple(int(v) % modes.n for v in k)
    minus = tuple(int(-v) % modes.n for v in k)
    coeff[(slice(None),) + plus] += a / 2.0
    coeff[(slice(None),) + minus] += a / 2.0
    return SolenoidalField(modes, coeff)
