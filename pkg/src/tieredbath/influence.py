"""Reduced dynamics rho_s(t) = U(t) exp(Theta(t)) rho_s(0).

U(t) is the bare-system propagator in the coefficient representation,
dU/dt = -i H^x U, U(0) = 1, and all environmental influence is carried by
the exponent matrix

    Theta(t) = -int_0^t dt' int_0^t' dt''  Vt^x(t')
               [ D_g(t'-t'') Vt^x(t'') + i D_1g(t'-t'') Vt^o(t'') ],

with Vt(t) = U^-1(t) V U(t) and the damped kernels D_g, D_1g from
:mod:`tieredbath.bath`.  Theta is evaluated to second order in the
system-environment coupling; each environmental mode contributes
additively at this order.

For the unbiased two-level case (H = Delta/2 sigma_x, V = sigma_z) the
double integral collapses to single integrals and splits into named
relaxation / Lamb-shift / thermalization / counter-rotating pieces; both
code paths are kept and cross-checked in the tests.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.fft
import scipy.linalg

from .bath import KernelSamples
from .errors import (
    ConfigurationError,
    DegenerateKernelError,
    UnsupportedConfigurationError,
    ValidationError,
)
from .su_basis import PVector, SuBasis, build_hcross, build_vcirc, build_vcross, devectorize

__all__ = [
    "SystemModel",
    "InfluenceMatrix",
    "SpinBosonTheta",
    "ReducedTrajectory",
    "ReorgTimes",
    "propagator",
    "propagator_grid",
    "heisenberg_pair",
    "theta_quadrature",
    "theta_spinboson",
    "evolve",
    "reorg_times",
    "steady_state_spinboson",
]

_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class SystemModel:
    """System Hamiltonian schedule and coupling operator coefficients.

    ``h_segments`` holds one coefficient vector (length n^2 - 1) per
    piecewise-constant segment; ``breakpoints`` are the switching times
    (one fewer than segments, strictly ascending, > 0).  Past the last
    breakpoint the final segment extends indefinitely.  ``v_coeffs`` has
    length n^2: traceless part plus identity component of the coupling
    operator V (time-independent).
    """

    n: int
    h_segments: tuple
    breakpoints: tuple
    v_coeffs: np.ndarray

    def __post_init__(self):
        m = self.n * self.n - 1
        segs = tuple(np.asarray(h, dtype=float) for h in self.h_segments)
        object.__setattr__(self, "h_segments", segs)
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "v_coeffs", np.asarray(self.v_coeffs, dtype=float))
        if len(segs) == 0:
            raise ValidationError("need at least one Hamiltonian segment")
        for h in segs:
            if h.shape != (m,):
                raise ValidationError(f"each H segment must have length {m}")
        if len(self.breakpoints) != len(segs) - 1:
            raise ValidationError("need exactly one breakpoint less than segments")
        if any(b <= 0 for b in self.breakpoints) or np.any(np.diff(self.breakpoints) <= 0):
            raise ValidationError("breakpoints must be positive and strictly ascending")
        if self.v_coeffs.shape != (self.n * self.n,):
            raise ValidationError(f"V coefficients must have length {self.n * self.n}")

    @classmethod
    def two_level(cls, eps: float, delta: float, v_coeffs=(0.0, 0.0, 1.0, 0.0)) -> "SystemModel":
        """H = (eps/2) sigma_z + (Delta/2) sigma_x with V = sigma_z by default."""
        return cls(n=2, h_segments=(np.array([delta / 2.0, 0.0, eps / 2.0]),),
                   breakpoints=(), v_coeffs=np.asarray(v_coeffs, dtype=float))

    @property
    def static(self) -> bool:
        return len(self.h_segments) == 1

    def segment_index(self, t: float) -> int:
        return int(np.searchsorted(self.breakpoints, t, side="right"))

    def h_at(self, t: float) -> np.ndarray:
        return self.h_segments[self.segment_index(t)]


@dataclass(frozen=True)
class InfluenceMatrix:
    """Theta(t) sampled on a time grid: complex (T, n^2, n^2) array."""

    t: np.ndarray
    theta: np.ndarray


@dataclass(frozen=True)
class SpinBosonTheta:
    """Closed-form exponent of the unbiased spin-boson model, split as

    Theta = relax + lamb_shift + thermal + rotating

    in the (sigma_x, sigma_y, sigma_z, I) coefficient basis:

      relax(t)      = -2 q_c(t) diag(2, 1, 1, 0),
      lamb_shift(t) = -2 q_s(t)  [(y,z) antisymmetric block],
      thermal(t)    = +4 p_s(t)  [(x,I) corner],
      rotating(t)   = -2 r(t) [[0,0,0,0],[0,cos Dt,-sin Dt,0],
                               [0,-sin Dt,-cos Dt,0],[0,0,0,0]],

    with q_c(t) = int_0^t D(tau)(t-tau)cos(D tau) dtau, q_s/p_s the sine
    analogues against D / D1, and r(t) = int_0^t D(tau) sin(D(t-tau))/D dtau.
    """

    t: np.ndarray
    delta: float
    relax: np.ndarray
    lamb_shift: np.ndarray
    thermal: np.ndarray
    rotating: np.ndarray

    def total(self) -> InfluenceMatrix:
        theta = self.relax + self.lamb_shift + self.thermal + self.rotating
        return InfluenceMatrix(t=self.t, theta=theta.astype(complex))

    @property
    def relaxation_exponent(self) -> np.ndarray:
        """theta_relax(t): the sigma_x diagonal entry of the relax part.

        Its asymptotic slope is -Gamma_relax; 1/2 + 1/2 exp(theta_relax)
        is the decay envelope of the excited-state population.
        """
        return self.relax[:, 0, 0].real

    @property
    def envelope(self) -> np.ndarray:
        return 0.5 + 0.5 * np.exp(self.relaxation_exponent)


@dataclass(frozen=True)
class ReducedTrajectory:
    """System trajectory in P-vector form: coeffs[t] = [P_1..P_{n^2}].

    The trace component is constant by construction; ``herm_residual`` is
    the largest imaginary part dropped when realifying the coefficients
    (Hermiticity monitor, expected <= 1e-10).
    """

    t: np.ndarray
    coeffs: np.ndarray
    herm_residual: float

    def expectations(self) -> np.ndarray:
        """<nu_i>(t) = 2 P_i(t), shape (T, n^2 - 1)."""
        return 2.0 * self.coeffs[:, :-1]

    def states(self, basis: SuBasis) -> np.ndarray:
        return np.stack([devectorize(c, basis) for c in self.coeffs])

    def min_eigenvalue(self, basis: SuBasis) -> float:
        """Most negative density-matrix eigenvalue along the trajectory.

        Positivity is not guaranteed at second order; transient dips are
        monitored and reported, never silently clipped.
        """
        return float(min(np.linalg.eigvalsh(rho).min() for rho in self.states(basis)))


@dataclass(frozen=True)
class ReorgTimes:
    """First-moment over zeroth-moment kernel times (may be negative).

    A component whose zeroth moment vanishes (e.g. the sine-weighted ones
    at zero detuning) is reported as None rather than guessed.
    """

    relax: Optional[float]
    lamb_shift: Optional[float]
    thermal: Optional[float]


def _segment_eigs(model: SystemModel, basis: SuBasis):
    """Eigendecompositions of the top (m x m) blocks of H^x per segment."""
    out = []
    for h in model.h_segments:
        hx = build_hcross(h, basis).matrix[: basis.m, : basis.m]
        w, v = np.linalg.eigh(hx)
        out.append((w, v))
    return out


def _block_prop(w, v, dt_arr: np.ndarray) -> np.ndarray:
    """exp(-i Hb t) for an array of times; (T, m, m)."""
    phases = np.exp(-1j * np.outer(dt_arr, w))
    out = np.einsum("ab,tb,cb->tac", v, phases, v.conj())
    out[dt_arr == 0.0] = np.eye(len(w), dtype=complex)  # exact at zero offset
    return out


def propagator_grid(model: SystemModel, basis: SuBasis, t_grid: np.ndarray) -> np.ndarray:
    """U(t) on an ascending grid of non-negative times, shape (T, n^2, n^2).

    U is unitary on the traceless block (H^x is Hermitian) and exactly the
    identity on the trace component: the last row and column never mix.
    Times beyond the schedule extend the final segment.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t[0] < 0 or np.any(np.diff(t) < 0):
        raise ValidationError("time grid must be 1-d, non-negative and ascending")
    m = basis.m
    eigs = _segment_eigs(model, basis)
    starts = (0.0,) + model.breakpoints

    seg_idx = np.searchsorted(model.breakpoints, t, side="right")
    # cumulative propagators up to each breakpoint
    boundary = [np.eye(m, dtype=complex)]
    for k, b in enumerate(model.breakpoints):
        w, v = eigs[k]
        step = _block_prop(w, v, np.array([b - starts[k]]))[0]
        boundary.append(step @ boundary[-1])

    out = np.zeros((len(t), basis.dim, basis.dim), dtype=complex)
    out[:, m, m] = 1.0
    for k in np.unique(seg_idx):
        sel = seg_idx == k
        w, v = eigs[k]
        blocks = _block_prop(w, v, t[sel] - starts[k])
        out[sel, :m, :m] = blocks @ boundary[k]
    return out


def propagator(model: SystemModel, basis: SuBasis, t: float) -> np.ndarray:
    """U(t) for a single time (see :func:`propagator_grid`)."""
    if t < 0:
        raise ValidationError("propagator time must be non-negative")
    return propagator_grid(model, basis, np.array([0.0, t]))[1]


def heisenberg_pair(model: SystemModel, basis: SuBasis, t_grid: np.ndarray):
    """Cached Vt^x(t) = U^-1 V^x U and Vt^o(t) on the grid.

    Built once per grid; the inverse uses unitarity of the traceless block.
    Returns two (T, n^2, n^2) arrays.
    """
    u = propagator_grid(model, basis, t_grid)
    uinv = u.conj().transpose(0, 2, 1)
    vx = build_vcross(model.v_coeffs, basis).matrix
    vc = build_vcirc(model.v_coeffs, basis).matrix
    vxt = np.einsum("tij,jk,tkl->til", uinv, vx, u)
    vct = np.einsum("tij,jk,tkl->til", uinv, vc, u)
    return vxt, vct


def _fastest_frequency(model: SystemModel, basis: SuBasis) -> float:
    return max(np.abs(w).max() if len(w) else 0.0 for w, _ in _segment_eigs(model, basis))


def _uniform_step(t: np.ndarray, what: str) -> float:
    dt = np.diff(t)
    if len(dt) == 0 or dt[0] <= 0 or np.abs(dt - dt[0]).max() > _GRID_RTOL * dt[0]:
        raise ConfigurationError(f"{what} requires a uniform ascending time grid")
    return float(dt[0])


def _resolve_kernel_arrays(
    kern: KernelSamples,
    t: np.ndarray,
    h: float,
    tau_cut: Union[str, float, None],
):
    """Kernel samples aligned with the t grid, zeroed beyond the memory time."""
    if abs(kern.tau[0]) > 1e-12:
        raise ConfigurationError("kernel grid must start at tau = 0")
    if abs(kern.dt - h) > _GRID_RTOL * h:
        raise ConfigurationError(
            f"kernel grid spacing {kern.dt} does not match the time step {h}"
        )
    if tau_cut == "auto":
        cut = kern.memory_time()
    else:
        cut = tau_cut
    needed = t[-1] if cut is None else min(t[-1], cut)
    if kern.tau[-1] < needed - 1e-9 * max(needed, 1.0):
        raise ConfigurationError(
            f"kernel grid ends at {kern.tau[-1]} ps but min(t_max, tau_b) = {needed} ps is needed"
        )
    n = len(t)
    Dv = np.zeros(n)
    D1v = np.zeros(n)
    take = min(n, len(kern.tau))
    Dv[:take] = kern.D[:take]
    D1v[:take] = kern.D1[:take]
    if cut is not None:
        dead = t > cut + 1e-15
        Dv[dead] = 0.0
        D1v[dead] = 0.0
    return Dv, D1v


def _causal_convolution(weights: np.ndarray, series: np.ndarray) -> np.ndarray:
    """S_i = sum_{j<=i} weights[i-j] * series[j] via FFT; series is (T, ...)."""
    n = len(weights)
    flat = series.reshape(n, -1)
    nfft = scipy.fft.next_fast_len(2 * n - 1)
    fw = np.fft.fft(weights, nfft)
    fs = np.fft.fft(flat, nfft, axis=0)
    conv = np.fft.ifft(fw[:, None] * fs, axis=0)[:n]
    return conv.reshape(series.shape)


def theta_quadrature(
    model: SystemModel,
    basis: SuBasis,
    kern: KernelSamples,
    t_grid: np.ndarray,
    tau_cut: Union[str, float, None] = "auto",
) -> InfluenceMatrix:
    """Second-order exponent by iterated trapezoid on a uniform grid.

    Both time integrals share the grid step h; kernel values beyond the
    memory time tau_b (|alpha| < 1e-6 |alpha(0)| by default) are treated
    as zero.  The convolution structure over t' - t'' is evaluated by FFT,
    which is algebraically identical to the direct trapezoid sum.
    """
    t = np.asarray(t_grid, dtype=float)
    h = _uniform_step(t, "theta_quadrature")
    if abs(t[0]) > 1e-12:
        raise ConfigurationError("theta grid must start at t = 0")

    wmax = _fastest_frequency(model, basis)
    if wmax > 0 and h > (2.0 * np.pi / wmax) / 20.0:
        warnings.warn(
            f"time step {h} ps does not resolve the fastest system frequency "
            f"(want <= {(2 * np.pi / wmax) / 20.0:.4g} ps); expect degraded accuracy",
            stacklevel=2,
        )

    Dv, D1v = _resolve_kernel_arrays(kern, t, h, tau_cut)
    vxt, vct = heisenberg_pair(model, basis, t)

    sd = _causal_convolution(Dv, vxt)
    sd1 = _causal_convolution(D1v, vct)
    # trapezoid endpoint corrections for the inner integral
    wd = h * (sd - 0.5 * Dv[:, None, None] * vxt[0] - 0.5 * Dv[0] * vxt)
    wd1 = h * (sd1 - 0.5 * D1v[:, None, None] * vct[0] - 0.5 * D1v[0] * vct)
    g = np.einsum("tij,tjk->tik", vxt, wd + 1j * wd1)
    cum = np.cumsum(g, axis=0)
    theta = -h * (cum - 0.5 * g[0] - 0.5 * g)
    theta[0] = 0.0
    return InfluenceMatrix(t=t, theta=theta)


def _require_unbiased_spinboson(model: SystemModel, basis: SuBasis) -> float:
    if basis.n != 2 or model.n != 2:
        raise UnsupportedConfigurationError("closed form exists for two-level systems only")
    if not model.static:
        raise UnsupportedConfigurationError("closed form requires a static Hamiltonian")
    h = model.h_segments[0]
    if abs(h[1]) > 1e-12 or abs(h[2]) > 1e-12:
        raise UnsupportedConfigurationError(
            "closed form requires eps = 0 (H = Delta/2 sigma_x); use theta_quadrature"
        )
    v = model.v_coeffs
    if np.abs(v - np.array([0.0, 0.0, 1.0, 0.0])).max() > 1e-12:
        raise UnsupportedConfigurationError("closed form requires V = sigma_z")
    delta = 2.0 * h[0]
    if delta == 0.0:
        raise UnsupportedConfigurationError("closed form requires Delta != 0")
    return delta


def theta_spinboson(
    model: SystemModel,
    basis: SuBasis,
    kern: KernelSamples,
    t_grid: np.ndarray,
    tau_cut: Union[str, float, None] = "auto",
) -> SpinBosonTheta:
    """Named-component exponent for H = Delta/2 sigma_x, V = sigma_z.

    Uses cumulative trapezoids of D(tau){1, tau}cos/sin(Delta tau) and the
    identity sin(Delta(t - tau)) = sin(Dt)cos(Dtau) - cos(Dt)sin(Dtau) for
    the counter-rotating part, whose matrix carries explicit cos/sin of the
    outer time.  The component sum equals :func:`theta_quadrature` up to
    quadrature error on the same grid.
    """
    delta = _require_unbiased_spinboson(model, basis)
    t = np.asarray(t_grid, dtype=float)
    h = _uniform_step(t, "theta_spinboson")
    if abs(t[0]) > 1e-12:
        raise ConfigurationError("theta grid must start at t = 0")
    Dv, D1v = _resolve_kernel_arrays(kern, t, h, tau_cut)

    c = np.cos(delta * t)
    s = np.sin(delta * t)

    def cumtrap(y):
        acc = np.cumsum(y)
        return h * (acc - 0.5 * y[0] - 0.5 * y)

    i0c = cumtrap(Dv * c)           # int D cos
    i1c = cumtrap(Dv * c * t)       # int tau D cos
    i0s = cumtrap(Dv * s)
    i1s = cumtrap(Dv * s * t)
    j0s = cumtrap(D1v * s)
    j1s = cumtrap(D1v * s * t)

    q_c = t * i0c - i1c             # int D (t - tau) cos
    q_s = t * i0s - i1s
    p_s = t * j0s - j1s
    r = (s * i0c - c * i0s) / delta  # int D sin(Delta (t - tau)) / Delta

    nt = len(t)
    relax = np.zeros((nt, 4, 4))
    relax[:, 0, 0] = -4.0 * q_c
    relax[:, 1, 1] = -2.0 * q_c
    relax[:, 2, 2] = -2.0 * q_c

    lamb = np.zeros((nt, 4, 4))
    lamb[:, 1, 2] = -2.0 * q_s
    lamb[:, 2, 1] = 2.0 * q_s

    th = np.zeros((nt, 4, 4))
    th[:, 0, 3] = 4.0 * p_s

    rw = np.zeros((nt, 4, 4))
    rw[:, 1, 1] = -2.0 * r * c
    rw[:, 1, 2] = 2.0 * r * s
    rw[:, 2, 1] = 2.0 * r * s
    rw[:, 2, 2] = 2.0 * r * c

    return SpinBosonTheta(t=t, delta=delta, relax=relax, lamb_shift=lamb, thermal=th, rotating=rw)


def _expm_trace_structured(theta: np.ndarray) -> np.ndarray:
    """exp of exponent matrices whose last row vanishes identically.

    The exact exponential then has last row (0, ..., 0, 1); the computed
    one is overwritten with that row to keep the trace component exact by
    construction rather than to roundoff.
    """
    w = scipy.linalg.expm(theta)
    w[..., -1, :] = 0.0
    w[..., -1, -1] = 1.0
    return w


def evolve(
    model: SystemModel,
    basis: SuBasis,
    theta: InfluenceMatrix,
    rho0: PVector,
) -> ReducedTrajectory:
    """Propagate rho_s(t) = U(t) exp(Theta(t)) rho_s(0) on theta's grid."""
    p0 = np.asarray(rho0.coeffs, dtype=complex)
    if p0.shape != (basis.dim,):
        raise ValidationError(f"initial P vector must have length {basis.dim}")
    if abs(p0[-1] - 1.0 / basis.n) > 1e-12:
        raise ValidationError("initial state is not trace-normalized (P_last != 1/n)")
    if np.abs(theta.theta[..., -1, :]).max() > 1e-12:
        raise ValidationError("influence matrix has a non-zero last row; not trace-preserving")

    u = propagator_grid(model, basis, theta.t)
    w = _expm_trace_structured(theta.theta)
    p = np.einsum("tij,tj->ti", u, np.einsum("tij,j->ti", w, p0))
    herm = float(np.abs(p.imag).max())
    return ReducedTrajectory(t=theta.t, coeffs=p.real.copy(), herm_residual=herm)


def _kernel_moments(kern: KernelSamples, delta: float, rel_decay: float):
    tb = kern.memory_time(rel_decay)
    if tb is None:
        raise DegenerateKernelError(
            "kernel has not decayed below the 1e-6 threshold within its grid; "
            "moment integrals with an infinite upper limit are undefined here"
        )
    sl = kern.tau <= tb + 1e-15
    tau = kern.tau[sl]
    c = np.cos(delta * tau)
    s = np.sin(delta * tau)
    D = kern.D[sl]
    D1 = kern.D1[sl]

    def mom(y):
        return float(np.trapezoid(y, tau)), float(np.trapezoid(tau * y, tau))

    return mom(D * c), mom(D * s), mom(D1 * s)


def reorg_times(kern: KernelSamples, delta: float, rel_decay: float = 1e-6) -> ReorgTimes:
    """Reorganization times t^R = first moment / zeroth moment of the
    kernel-weighted integrands (cos for relaxation, sin for the Lamb shift
    against D, sin against D1 for thermalization).  Negative values are
    legitimate; a vanishing denominator makes that component None, and the
    call fails only when every component is degenerate.
    """
    (dc0, dc1), (ds0, ds1), (d1s0, d1s1) = _kernel_moments(kern, delta, rel_decay)
    out = []
    for num, den in ((dc1, dc0), (ds1, ds0), (d1s1, d1s0)):
        out.append(None if abs(den) < 1e-12 else num / den)
    if all(v is None for v in out):
        raise DegenerateKernelError(
            "all zeroth-moment denominators are below 1e-12; reorganization "
            "times are undefined for this kernel/detuning"
        )
    return ReorgTimes(relax=out[0], lamb_shift=out[1], thermal=out[2])


def steady_state_spinboson(kern: KernelSamples, delta: float, rel_decay: float = 1e-6) -> PVector:
    """Long-time state of the unbiased spin-boson model,

        rho_inf = 1/2 + (sigma_x / 2) * int D1 sin(D tau) / int D cos(D tau),

    returned as the P vector (ratio/2, 0, 0, 1/2), i.e. <sigma_x> = ratio.
    """
    (dc0, _), _, (d1s0, _) = _kernel_moments(kern, delta, rel_decay)
    if abs(dc0) < 1e-12:
        raise DegenerateKernelError(
            "zeroth-moment denominator below 1e-12; steady state undefined"
        )
    ratio = d1s0 / dc0
    return PVector(coeffs=np.array([0.5 * ratio, 0.0, 0.0, 0.5]))
