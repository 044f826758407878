"""Two-tiered bosonic environments and the damped response kernel.

The immediate environment is a set of harmonic modes, each weakly damped
toward thermal equilibrium by a wider heat bath at inverse temperature
beta (hbar = k_B = 1, frequencies in rad/ps = 1/ps).  The damping shows
up as an exponential cutoff of the two-time response kernel

    alpha_gamma(tau) = sum_k g_k^2 e^{-gamma_k tau / 2}
                       cosh(beta omega_k / 2 - i omega_k tau) / sinh(beta omega_k / 2)
                     = D_gamma(tau) + i D_1gamma(tau),

    D_gamma(tau)  =  sum_k g_k^2 e^{-gamma_k tau/2} coth(beta omega_k/2) cos(omega_k tau)
    D_1gamma(tau) = -sum_k g_k^2 e^{-gamma_k tau/2} sin(omega_k tau)

with the continuum analogue obtained by replacing sum_k g_k^2 with
integral dw J(w) over the spectral density J(w) = sum_k g_k^2 delta(w - w_k).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigurationError, ValidationError

__all__ = [
    "DampedMode",
    "DiscreteSet",
    "OhmicFamily",
    "Tabulated",
    "ThermalParams",
    "KernelSamples",
    "QuadratureNodes",
    "kernel",
    "thermal_occupation",
    "coth_half",
    "frequency_quadrature",
]


@dataclass(frozen=True)
class DampedMode:
    """A harmonic mode of frequency ``omega`` coupled with strength ``g``
    and damped by the wider universe at rate ``gamma`` (all in 1/ps).

    The damped-oscillator master equation behind ``gamma`` assumes
    gamma << omega; a warning (not an error) is emitted past gamma > 0.2 omega.
    """

    omega: float
    g: float
    gamma: float = 0.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValidationError(f"mode frequency must be positive, got {self.omega}")
        if self.g < 0 or self.gamma < 0:
            raise ValidationError("coupling and damping rate must be non-negative")
        if self.gamma > 0.2 * self.omega:
            warnings.warn(
                f"mode damping gamma={self.gamma} exceeds 0.2*omega={0.2 * self.omega}; "
                "the weak-damping Lindblad model is questionable here",
                stacklevel=2,
            )


@dataclass(frozen=True)
class DiscreteSet:
    """A finite collection of damped modes."""

    modes: tuple[DampedMode, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))


GammaProfile = Union[None, float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class OhmicFamily:
    """Power-law spectral density with cutoff: J(w) = alpha w^s cut(w/w_c).

    cutoff_form "gaussian" gives cut(x) = exp(-x^2) (s = 3 reproduces
    J(w) = alpha w^3 exp(-w^2/w_c^2)); "exponential" gives exp(-x).
    ``gamma_profile`` is the universe damping rate gamma(w) for the
    continuum modes: None or 0 for an undamped bath, a constant, or a
    callable w -> gamma(w).
    """

    alpha: float
    s: float
    omega_c: float
    cutoff_form: str = "gaussian"
    gamma_profile: GammaProfile = None
    omega_max: Optional[float] = None  # default 5 * omega_c
    n_nodes: int = 200

    def __post_init__(self):
        if self.alpha < 0 or self.omega_c <= 0:
            raise ValidationError("OhmicFamily needs alpha >= 0 and omega_c > 0")
        if self.cutoff_form not in ("gaussian", "exponential"):
            raise ValidationError(f"unknown cutoff_form {self.cutoff_form!r}")
        if isinstance(self.gamma_profile, (int, float)) and self.gamma_profile < 0:
            raise ValidationError("gamma profile must be non-negative")
        if self.n_nodes < 2:
            raise ValidationError("n_nodes must be at least 2")

    def j(self, omega: np.ndarray) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        x = omega / self.omega_c
        cut = np.exp(-x * x) if self.cutoff_form == "gaussian" else np.exp(-x)
        return self.alpha * np.power(omega, self.s) * cut

    def gamma(self, omega: np.ndarray) -> np.ndarray:
        return _eval_gamma(self.gamma_profile, omega)


@dataclass(frozen=True)
class Tabulated:
    """Spectral density sampled on an ascending frequency grid."""

    omega: np.ndarray
    j: np.ndarray
    gamma: Optional[np.ndarray] = None

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        j = np.asarray(self.j, dtype=float)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "j", j)
        if omega.ndim != 1 or omega.shape != j.shape:
            raise ValidationError("omega and j grids must be 1-d and the same length")
        if np.any(np.diff(omega) <= 0) or omega[0] < 0:
            raise ValidationError("omega grid must be non-negative and strictly ascending")
        if np.any(j < 0):
            raise ValidationError("spectral density must be non-negative")
        if self.gamma is not None:
            g = np.asarray(self.gamma, dtype=float)
            object.__setattr__(self, "gamma", g)
            if g.shape != omega.shape or np.any(g < 0):
                raise ValidationError("gamma table must match the omega grid and be >= 0")


SpectralDensity = Union[DiscreteSet, OhmicFamily, Tabulated]


@dataclass(frozen=True)
class ThermalParams:
    """Inverse temperature beta in ps (hbar = k_B = 1)."""

    beta: float

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise ValidationError(f"beta must be positive and finite, got {self.beta}")

    @classmethod
    def from_kt(cls, k_t: float) -> "ThermalParams":
        if k_t <= 0:
            raise ValidationError(f"k_B T must be positive, got {k_t}")
        return cls(beta=1.0 / k_t)

    @property
    def kt(self) -> float:
        return 1.0 / self.beta


@dataclass(frozen=True)
class QuadratureNodes:
    """Discretized environment: frequencies, squared-coupling weights and
    damping rates, such that sum_j w_j f(omega_j) ~ integral J(w) f(w) dw
    (exact mode sums for discrete sets)."""

    omega: np.ndarray
    weight: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class KernelSamples:
    """D_gamma and D_1gamma sampled on a uniform tau grid (ps)."""

    tau: np.ndarray
    D: np.ndarray
    D1: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        """Complex response kernel alpha_gamma(tau) = D + i D1."""
        return self.D + 1j * self.D1

    @property
    def dt(self) -> float:
        return float(self.tau[1] - self.tau[0])

    def __add__(self, other: "KernelSamples") -> "KernelSamples":
        if self.tau.shape != other.tau.shape or np.abs(self.tau - other.tau).max() > 1e-12:
            raise ConfigurationError("cannot add kernels sampled on different tau grids")
        return KernelSamples(tau=self.tau, D=self.D + other.D, D1=self.D1 + other.D1)

    def memory_time(self, rel: float = 1e-6) -> Optional[float]:
        """Smallest grid time after which |alpha| stays below rel*|alpha(0)|.

        Returns None when the kernel has not decayed by the end of the grid.
        """
        mag = np.abs(self.alpha)
        ref = mag[0]
        if ref == 0.0:
            return float(self.tau[0])
        above = np.nonzero(mag >= rel * ref)[0]
        if len(above) == 0:
            return float(self.tau[0])
        last = above[-1]
        if last == len(self.tau) - 1:
            return None
        return float(self.tau[last + 1])

    def truncated(self, tau_cut: float) -> "KernelSamples":
        """Copy with samples beyond ``tau_cut`` set to zero (memory cutoff)."""
        keep = self.tau <= tau_cut + 1e-15
        return KernelSamples(tau=self.tau, D=np.where(keep, self.D, 0.0), D1=np.where(keep, self.D1, 0.0))


def coth_half(beta: float, omega: np.ndarray) -> np.ndarray:
    """coth(beta*omega/2), overflow-safe: 1 + 2/(e^{beta omega} - 1)."""
    x = beta * np.asarray(omega, dtype=float)
    return 1.0 + 2.0 / np.expm1(x)


def thermal_occupation(omega: float, thermal: ThermalParams) -> float:
    """Mean occupation N = 1 / (e^{beta omega} - 1) of a mode at equilibrium."""
    if omega <= 0:
        raise ValidationError(f"thermal occupation needs omega > 0, got {omega}")
    with np.errstate(over="ignore"):
        return float(1.0 / np.expm1(thermal.beta * omega))


def frequency_quadrature(spec: SpectralDensity) -> QuadratureNodes:
    """Deterministic discretization of a spectral density.

    Discrete sets pass through with weights g_k^2.  OhmicFamily uses
    Gauss-Legendre on [0, omega_max] (default 5 omega_c); doubling the
    node count should move kernel samples by <~1e-8, which is checked in
    the test suite.  Tabulated densities get trapezoid weights.
    """
    if isinstance(spec, DiscreteSet):
        if not spec.modes:
            raise ValidationError("empty mode set")
        omega = np.array([m.omega for m in spec.modes])
        weight = np.array([m.g**2 for m in spec.modes])
        gamma = np.array([m.gamma for m in spec.modes])
        return QuadratureNodes(omega=omega, weight=weight, gamma=gamma)

    if isinstance(spec, OhmicFamily):
        omega_max = spec.omega_max if spec.omega_max is not None else 5.0 * spec.omega_c
        if omega_max <= 0:
            raise ValidationError("omega_max must be positive")
        jmax = spec.j(np.linspace(omega_max / spec.n_nodes, omega_max, 64)).max()
        if spec.alpha > 0 and spec.j(np.asarray(omega_max)) > 1e-6 * jmax:
            raise ConfigurationError(
                f"spectral density has not decayed by omega_max={omega_max}; "
                "raise omega_max to resolve the kernel integral"
            )
        x, w = np.polynomial.legendre.leggauss(spec.n_nodes)
        omega = 0.5 * omega_max * (x + 1.0)
        weight = 0.5 * omega_max * w * spec.j(omega)
        return QuadratureNodes(omega=omega, weight=weight, gamma=spec.gamma(omega))

    if isinstance(spec, Tabulated):
        omega = spec.omega
        w = _trapezoid_weights(omega) * spec.j
        gamma = spec.gamma if spec.gamma is not None else np.zeros_like(omega)
        keep = omega > 0  # omega = 0 carries no oscillator
        return QuadratureNodes(omega=omega[keep], weight=w[keep], gamma=gamma[keep])

    raise ValidationError(f"unknown spectral density type {type(spec).__name__}")


def kernel(
    spec: SpectralDensity,
    thermal: ThermalParams,
    tau_grid: np.ndarray,
) -> KernelSamples:
    """Sample D_gamma(tau) and D_1gamma(tau) for one environment tier.

    Discrete and continuous environments go through the same node form;
    kernels of disjoint environments add (the kernel is linear in J), so
    combined discrete + smooth environments are built with ``+``.
    """
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or len(tau) < 2:
        raise ValidationError("tau grid must be a 1-d array with at least two points")
    if tau[0] < 0 or np.any(np.diff(tau) <= 0):
        raise ValidationError("tau grid must be non-negative and ascending")

    nodes = frequency_quadrature(spec)
    coth = coth_half(thermal.beta, nodes.omega)
    # (nodes, tau) outer products; memory stays small for <=1e3 nodes.
    phase = np.outer(nodes.omega, tau)
    damp = np.exp(-0.5 * np.outer(nodes.gamma, tau))
    D = np.einsum("k,k,kt,kt->t", nodes.weight, coth, damp, np.cos(phase))
    D1 = -np.einsum("k,kt,kt->t", nodes.weight, damp, np.sin(phase))
    return KernelSamples(tau=tau, D=D, D1=D1)


def _eval_gamma(profile: GammaProfile, omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if profile is None:
        return np.zeros_like(omega)
    if callable(profile):
        g = np.asarray(profile(omega), dtype=float)
        if np.any(g < 0):
            raise ValidationError("gamma profile returned negative damping")
        return np.broadcast_to(g, omega.shape).copy()
    return np.full_like(omega, float(profile))


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w
