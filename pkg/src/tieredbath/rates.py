"""Closed-form rates and the Born-Markov weak-coupling baseline.

Two-level system H = (eps/2) sigma_z + (Delta/2) sigma_x coupled through
sigma_z to damped modes.  With Omega = sqrt(eps^2 + Delta^2) and a mode
(omega, g, gamma) at inverse temperature beta:

  Gamma_relax   = g^2 coth(bw/2) (Delta/Omega)^2
                  [ gamma/((g/2)^2+(Omega-omega)^2) + gamma/((g/2)^2+(Omega+omega)^2) ]
  Gamma_dephase = Gamma_relax/2
                  + 2 g^2 coth(bw/2) (eps/Omega)^2 gamma/((gamma/2)^2+omega^2)
  lamb_shift    = g^2 coth(bw/2) (Delta/Omega)^2
                  [ (Omega-omega)/((g/2)^2+(Omega-omega)^2) + (Omega+omega)/(...) ]
                  (coefficient of sigma_tilde_z / 2, where H_S = Omega sigma_tilde_z / 2)

and the long-time polarization along the system eigenaxis

  <sigma_tilde_z>_inf = - 2 Omega omega / ((gamma/2)^2 + Omega^2 + omega^2) * tanh(bw/2),

from which k_B T_eff = Omega / (2 artanh(-<sigma_tilde_z>_inf)).  Only at
gamma -> 0 and omega -> Omega does this reduce to the bath's own
temperature.  Multimode environments sum the same expressions per mode;
the steady polarization generalizes to the ratio of the summed
emission-absorption imbalance over the summed relaxation weight.

The weak-coupling master-equation (WCME) baseline for smooth spectral
densities J(w) follows the standard Born-Markov-secular recipe (Breuer &
Petruccione, ch. 3):

  Gamma_relax   = 2 pi (Delta/Omega)^2 J(Omega) coth(beta Omega / 2)
  Gamma_dephase = Gamma_relax/2 + 4 pi (eps/Omega)^2 k_B T lim_{w->0} J(w)/w
  lamb_shift    = 2 (Delta/Omega)^2 P int_0^inf dw J(w) coth(bw/2) Omega/(Omega^2-w^2)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import (
    DampedMode,
    DiscreteSet,
    OhmicFamily,
    SpectralDensity,
    Tabulated,
    ThermalParams,
    coth_half,
    frequency_quadrature,
)
from .errors import ConfigurationError, UnsupportedConfigurationError, ValidationError
from .su_basis import SuBasis, superop_to_matrix

__all__ = [
    "RateReport",
    "rabi_rates",
    "multimode_rates",
    "wcme_rates",
    "wcme_generator",
    "generator_trajectory",
    "eigenaxis_operators",
]

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


@dataclass(frozen=True)
class RateReport:
    """Relaxation/dephasing rates (1/ps), Lamb-shift coefficient of
    sigma_tilde_z/2, effective temperature (as k_B T_eff, 1/ps) and the
    steady polarization <sigma_tilde_z>.  ``thermalizes`` is False when
    every damping rate vanishes: the rates are then zero and the reported
    steady state is never actually reached."""

    gamma_relax: float
    gamma_dephase: float
    lamb_shift: float
    t_eff: float
    steady_sigma_z_tilde: float
    thermalizes: bool = True

    def as_dict(self) -> dict:
        return {
            "gamma_relax": self.gamma_relax,
            "gamma_dephase": self.gamma_dephase,
            "lamb_shift": self.lamb_shift,
            "t_eff": self.t_eff,
            "steady_sigma_z_tilde": self.steady_sigma_z_tilde,
            "thermalizes": self.thermalizes,
        }


def _rabi_omega(eps: float, delta: float) -> float:
    omega_r = float(np.hypot(eps, delta))
    if omega_r <= 0:
        raise ValidationError("need Omega = sqrt(eps^2 + Delta^2) > 0")
    return omega_r


def _teff_from_polarization(omega_r: float, p: float) -> float:
    """k_B T_eff matching exp(-H_tilde / k_B T_eff) to polarization p > 0."""
    if p <= 0.0:
        return float("inf")
    if p >= 1.0:
        return 0.0
    return omega_r / (2.0 * np.arctanh(p))


def _mode_rate_sums(eps, delta, omegas, weights, gammas, thermal):
    """Per-mode Lorentzian sums entering all discrete-environment rates."""
    omega_r = _rabi_omega(eps, delta)
    a2 = (delta / omega_r) ** 2
    e2 = (eps / omega_r) ** 2
    coth = coth_half(thermal.beta, omegas)
    half = 0.5 * gammas
    lm = gammas / (half**2 + (omega_r - omegas) ** 2)
    lp = gammas / (half**2 + (omega_r + omegas) ** 2)
    relax = a2 * float(np.sum(weights * coth * (lm + lp)))
    dephase = 0.5 * relax + 2.0 * e2 * float(
        np.sum(weights * coth * gammas / (half**2 + omegas**2))
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        shift_m = np.where(
            (half == 0) & (omegas == omega_r),
            np.nan,
            (omega_r - omegas) / (half**2 + (omega_r - omegas) ** 2),
        )
    shift_p = (omega_r + omegas) / (half**2 + (omega_r + omegas) ** 2)
    lamb = a2 * float(np.sum(weights * coth * (shift_m + shift_p)))
    # steady polarization: emission/absorption imbalance over total weight
    num = float(np.sum(weights * (lm - lp)))
    den = float(np.sum(weights * coth * (lm + lp)))
    return relax, dephase, lamb, num, den, omega_r


def rabi_rates(eps: float, delta: float, mode: DampedMode, thermal: ThermalParams) -> RateReport:
    """Rates and steady state for a single damped mode.

    gamma = 0 is flagged: the Lorentzians collapse to zero width, the
    rates vanish and the system never thermalizes through this mode.
    """
    omega_r = _rabi_omega(eps, delta)
    p = (
        2.0
        * omega_r
        * mode.omega
        / ((0.5 * mode.gamma) ** 2 + omega_r**2 + mode.omega**2)
        * np.tanh(0.5 * thermal.beta * mode.omega)
    )
    if mode.gamma == 0.0:
        detune = omega_r - mode.omega
        # (Omega - omega)/((gamma/2)^2 + (Omega - omega)^2) vanishes on
        # resonance for every gamma, so its gamma = 0 limit there is 0
        lamb = (
            mode.g**2
            * coth_half(thermal.beta, mode.omega)
            * (delta / omega_r) ** 2
            * ((1.0 / detune if detune != 0.0 else 0.0) + 1.0 / (omega_r + mode.omega))
        )
        return RateReport(
            gamma_relax=0.0,
            gamma_dephase=0.0,
            lamb_shift=float(lamb),
            t_eff=_teff_from_polarization(omega_r, p),
            steady_sigma_z_tilde=-p,
            thermalizes=False,
        )
    relax, dephase, lamb, num, den, _ = _mode_rate_sums(
        eps,
        delta,
        np.array([mode.omega]),
        np.array([mode.g**2]),
        np.array([mode.gamma]),
        thermal,
    )
    return RateReport(
        gamma_relax=relax,
        gamma_dephase=dephase,
        lamb_shift=lamb,
        t_eff=_teff_from_polarization(omega_r, num / den),
        steady_sigma_z_tilde=-num / den,
    )


def multimode_rates(
    eps: float,
    delta: float,
    spec: SpectralDensity,
    thermal: ThermalParams,
) -> RateReport:
    """Per-mode sums of the single-mode rate formulas.

    Continuous densities are evaluated on their quadrature nodes; with an
    identically vanishing damping profile the Lorentzians degenerate to
    delta functions and the computation is delegated to :func:`wcme_rates`.
    """
    nodes = frequency_quadrature(spec)
    if not isinstance(spec, DiscreteSet) and np.all(nodes.gamma == 0.0):
        return wcme_rates(eps, delta, spec, thermal)
    relax, dephase, lamb, num, den, omega_r = _mode_rate_sums(
        eps, delta, nodes.omega, nodes.weight, nodes.gamma, thermal
    )
    if den == 0.0:
        return RateReport(
            gamma_relax=relax,
            gamma_dephase=dephase,
            lamb_shift=lamb,
            t_eff=float("inf"),
            steady_sigma_z_tilde=0.0,
            thermalizes=False,
        )
    return RateReport(
        gamma_relax=relax,
        gamma_dephase=dephase,
        lamb_shift=lamb,
        t_eff=_teff_from_polarization(omega_r, num / den),
        steady_sigma_z_tilde=-num / den,
    )


def _j_callable(spec: SpectralDensity):
    if isinstance(spec, OhmicFamily):
        return spec.j
    if isinstance(spec, Tabulated):
        return lambda w: np.interp(np.asarray(w, dtype=float), spec.omega, spec.j, left=0.0, right=0.0)
    raise UnsupportedConfigurationError(
        "WCME rates need a smooth spectral density; J(Omega) is undefined for a discrete mode set"
    )


def _j_over_omega_limit(spec: SpectralDensity) -> float:
    if isinstance(spec, OhmicFamily):
        if spec.s > 1.0:
            return 0.0
        if spec.s == 1.0:
            return spec.alpha
        raise UnsupportedConfigurationError("sub-ohmic exponents s < 1 are out of scope")
    # tabulated: ratio at the first strictly positive node
    pos = spec.omega > 0
    w0 = spec.omega[pos][0]
    return float(spec.j[pos][0] / w0)


def lamb_shift_principal_value(
    spec: SpectralDensity,
    thermal: ThermalParams,
    omega_r: float,
    omega_max: float | None = None,
    n_cells: int = 4000,
) -> float:
    """P int_0^wmax J(w) coth(bw/2) Omega/(Omega^2 - w^2) dw by symmetric
    exclusion: the uniform grid is laid so the pole sits exactly mid-cell
    and the 1/(Omega - w) contributions of node pairs cancel in the sum.
    A node landing on Omega is a configuration error.
    """
    j = _j_callable(spec)
    if omega_max is None:
        if isinstance(spec, OhmicFamily):
            omega_max = spec.omega_max if spec.omega_max is not None else 5.0 * spec.omega_c
        else:
            omega_max = float(spec.omega[-1])
    if omega_max <= omega_r:
        raise ConfigurationError("omega_max must exceed Omega for the principal-value integral")
    h_target = omega_max / n_cells
    k = max(int(round(omega_r / h_target - 0.5)), 0)
    h = omega_r / (k + 0.5)
    n = int(np.ceil(omega_max / h))
    grid = h * np.arange(n + 1)
    if np.abs(grid - omega_r).min() < 1e-9 * h:
        raise ConfigurationError("quadrature node coincides with Omega; shift the grid")

    jw = j(grid)
    val = np.empty_like(grid)
    pos = grid > 0
    val[pos] = jw[pos] * coth_half(thermal.beta, grid[pos]) * omega_r / (omega_r**2 - grid[pos] ** 2)
    # w -> 0 limit: J coth(bw/2) -> (2/beta) lim J/w, pole factor -> 1/Omega
    val[~pos] = (2.0 / thermal.beta) * _j_over_omega_limit(spec) / omega_r
    weights = np.full(len(grid), h)
    weights[0] = weights[-1] = 0.5 * h
    return float(np.sum(weights * val))


def wcme_rates(
    eps: float,
    delta: float,
    spec: SpectralDensity,
    thermal: ThermalParams,
) -> RateReport:
    """Born-Markov weak-coupling rates for a smooth spectral density.

    The steady state is the bath thermal state in the system eigenbasis:
    <sigma_tilde_z> = -tanh(beta Omega / 2), T_eff = 1/beta.
    """
    omega_r = _rabi_omega(eps, delta)
    j = _j_callable(spec)
    j_at = float(j(np.asarray(omega_r)))
    a2 = (delta / omega_r) ** 2
    e2 = (eps / omega_r) ** 2
    relax = 2.0 * np.pi * a2 * j_at * coth_half(thermal.beta, omega_r)
    dephase = 0.5 * relax + 4.0 * np.pi * e2 * thermal.kt * _j_over_omega_limit(spec)
    lamb = 2.0 * a2 * lamb_shift_principal_value(spec, thermal, omega_r)
    p = np.tanh(0.5 * thermal.beta * omega_r)
    return RateReport(
        gamma_relax=float(relax),
        gamma_dephase=float(dephase),
        lamb_shift=float(lamb),
        t_eff=thermal.kt,
        steady_sigma_z_tilde=float(-p),
    )


def eigenaxis_operators(eps: float, delta: float):
    """sigma_tilde_{z,x,y,+,-} for the eigenaxis of H_S = Omega stz / 2."""
    omega_r = _rabi_omega(eps, delta)
    stz = (delta * _SX + eps * _SZ) / omega_r
    stx = (eps * _SX - delta * _SZ) / omega_r
    sty = _SY
    return stz, stx, sty, 0.5 * (stx + 1j * sty), 0.5 * (stx - 1j * sty)


def wcme_generator(
    eps: float,
    delta: float,
    spec: SpectralDensity,
    thermal: ThermalParams,
    basis: SuBasis,
) -> np.ndarray:
    """Full vectorized WCME Liouvillian (Hamiltonian + Lamb shift +
    secular dissipator) as an n^2 x n^2 matrix on P vectors; two-level
    systems only.  Used as the Markovian trajectory baseline.
    """
    if basis.n != 2:
        raise UnsupportedConfigurationError("WCME generator implemented for n = 2 only")
    omega_r = _rabi_omega(eps, delta)
    j = _j_callable(spec)
    j_at = float(j(np.asarray(omega_r)))
    occ = 1.0 / np.expm1(thermal.beta * omega_r)
    a2 = (delta / omega_r) ** 2
    e2 = (eps / omega_r) ** 2
    rate_down = 2.0 * np.pi * a2 * j_at * (occ + 1.0)
    rate_up = 2.0 * np.pi * a2 * j_at * occ
    rate_phi = 2.0 * np.pi * e2 * thermal.kt * _j_over_omega_limit(spec)
    lamb = 2.0 * a2 * lamb_shift_principal_value(spec, thermal, omega_r)

    stz, _, _, st_plus, st_minus = eigenaxis_operators(eps, delta)
    h_coh = 0.5 * eps * _SZ + 0.5 * delta * _SX + 0.5 * lamb * stz

    def dissip(l_op, rho):
        ld = l_op.conj().T
        return l_op @ rho @ ld - 0.5 * (ld @ l_op @ rho + rho @ ld @ l_op)

    def liouville(rho):
        out = -1j * (h_coh @ rho - rho @ h_coh)
        out = out + rate_down * dissip(st_minus, rho)
        out = out + rate_up * dissip(st_plus, rho)
        out = out + rate_phi * dissip(stz, rho)
        return out

    return superop_to_matrix(liouville, basis)


def generator_trajectory(gen: np.ndarray, p0: np.ndarray, t_grid: np.ndarray) -> np.ndarray:
    """P(t) = expm(gen t) P(0) on a grid, for any static generator."""
    import scipy.linalg

    t = np.asarray(t_grid, dtype=float)
    out = np.empty((len(t), len(p0)), dtype=complex)
    # eigendecomposition is fine here: generic generators are diagonalizable
    w, v = np.linalg.eig(gen)
    cond = np.linalg.cond(v)
    if np.isfinite(cond) and cond < 1e8:
        c = np.linalg.solve(v, p0.astype(complex))
        out = np.einsum("ij,tj->ti", v, np.exp(np.outer(t, w)) * c)
    else:
        for i, ti in enumerate(t):
            out[i] = scipy.linalg.expm(gen * ti) @ p0
    return out
