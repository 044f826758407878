"""Numerically exact benchmarks.

* :func:`lindblad_evolve` integrates the joint system (x) damped-modes
  master equation

      drho/dt = -i[H, rho] + sum_k gamma_k (N_k+1) D[a_k] rho
                           + gamma_k N_k D[a_k^dag] rho,
      D[L] rho = L rho L^dag - {L^dag L, rho}/2,

  on a truncated Fock space, starting from rho_s(0) (x) thermal modes,
  and returns the reduced system states.  This replaces the wider
  universe by its Lindblad description exactly, so it benchmarks
  everything except the Fock truncation and integrator tolerances.

* :func:`lindblad_steady_state` solves L rho = 0 directly (inverse
  iteration on the sparse Liouvillian), giving the t -> infinity state
  without time stepping.

* :func:`tcl2_reference` is a deliberately independent implementation of
  the second-order time-convolutionless generator

      dPt/dt = K2(t) Pt,   K2(t) = -Vt^x(t) int_0^t ds [D(t-s) Vt^x(s)
                                                        + i D1(t-s) Vt^o(s)],

  propagated in generator form (RK4), used to validate the exponent
  quadrature at vanishing universe damping and as the reference curve for
  method-ordering comparisons.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply, splu

from .bath import KernelSamples, ThermalParams, thermal_occupation
from .errors import (
    ConfigurationError,
    NumericalError,
    UnsupportedConfigurationError,
    ValidationError,
)
from .influence import ReducedTrajectory, SystemModel, _uniform_step, propagator_grid
from .su_basis import PVector, SuBasis, build_vcirc, build_vcross, devectorize, operator_coeffs

__all__ = [
    "FockConfig",
    "OracleTrajectory",
    "auto_n_fock",
    "lindblad_evolve",
    "lindblad_steady_state",
    "tcl2_reference",
    "tcl2_generator_integral",
]

_TAIL_TARGET = 1e-8


@dataclass(frozen=True)
class FockConfig:
    """Truncation and integrator settings for the exact benchmark.

    ``method`` selects the propagation: "adaptive" (DOP853 with rtol/atol),
    "krylov" (scipy expm_multiply on the static Liouvillian, exact to
    machine precision, uniform grids only), or "cn" (fixed-step
    Crank-Nicolson at the grid step, one sparse LU reused across steps --
    the cheap choice for long relaxation horizons where only slow
    dynamics matters; second-order accurate in the step).
    """

    modes: tuple
    n_fock: int
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "adaptive"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValidationError("oracle needs at least one mode")
        if self.n_fock < 2:
            raise ValidationError("Fock truncation must be >= 2")
        if self.method not in ("adaptive", "krylov", "cn"):
            raise ValidationError(f"unknown oracle method {self.method!r}")

    def hilbert_dim(self, n_sys: int) -> int:
        return n_sys * self.n_fock ** len(self.modes)


@dataclass(frozen=True)
class OracleTrajectory:
    """Reduced system states after tracing out the modes.

    trace_dev / herm_dev track the worst joint-state trace deviation and
    reduced-state Hermiticity asymmetry over the run.
    """

    t: np.ndarray
    rho: np.ndarray  # (T, n, n)
    trace_dev: float
    herm_dev: float

    def expect(self, op: np.ndarray) -> np.ndarray:
        return np.einsum("tij,ji->t", self.rho, op).real

    def pvector_coeffs(self, basis: SuBasis) -> np.ndarray:
        """(T, n^2) real coefficient rows matching ReducedTrajectory."""
        out = np.empty((len(self.t), basis.dim))
        for i, r in enumerate(self.rho):
            out[i] = operator_coeffs(r, basis).real
        return out

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh(r).min() for r in self.rho))


def auto_n_fock(omega: float, thermal: ThermalParams, tail: float = _TAIL_TARGET) -> int:
    """Smallest truncation whose thermal tail mass 1 - P(n < K) < ``tail``.

    The tail of a thermal state is (N/(N+1))^K.
    """
    occ = thermal_occupation(omega, thermal)
    if occ <= 0.0:
        return 2
    r = occ / (occ + 1.0)
    k = int(math.ceil(math.log(tail) / math.log(r)))
    return max(k, 2)


def thermal_tail(n_fock: int, omega: float, thermal: ThermalParams) -> float:
    occ = thermal_occupation(omega, thermal)
    if occ <= 0.0:
        return 0.0
    return (occ / (occ + 1.0)) ** n_fock


def _destroy(k: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, k)), offsets=1, format="csr")


def _thermal_dm(k: int, occ: float) -> np.ndarray:
    if occ <= 0.0:
        p = np.zeros(k)
        p[0] = 1.0
    else:
        p = (occ / (occ + 1.0)) ** np.arange(k)
        p /= p.sum()
    return np.diag(p).astype(complex)


def _joint_operators(model: SystemModel, basis: SuBasis, fock: FockConfig):
    """Sparse H and damping channels on system (x) mode_1 (x) ... space."""
    if not model.static:
        raise UnsupportedConfigurationError(
            "the Fock-space oracle supports static system Hamiltonians only"
        )
    n = basis.n
    k = fock.n_fock
    n_modes = len(fock.modes)

    h_sys = sum(c * basis.nu[i] for i, c in enumerate(model.h_segments[0]))
    v_sys = devectorize(model.v_coeffs, basis)

    def lift(op_sys: Optional[np.ndarray], mode_ops: dict) -> sp.csr_matrix:
        factors = [sp.csr_matrix(op_sys) if op_sys is not None else sp.identity(n, format="csr")]
        for j in range(n_modes):
            factors.append(mode_ops.get(j, sp.identity(k, format="csr")))
        out = factors[0]
        for fct in factors[1:]:
            out = sp.kron(out, fct, format="csr")
        return out

    a_ops = [lift(None, {j: _destroy(k)}) for j in range(n_modes)]
    h = lift(h_sys, {})
    for j, mode in enumerate(fock.modes):
        num = a_ops[j].conj().T @ a_ops[j]
        h = h + mode.omega * num
        h = h + mode.g * (lift(v_sys, {}) @ (a_ops[j] + a_ops[j].conj().T))
    return h.tocsr(), a_ops


def _liouvillian(h: sp.csr_matrix, channels) -> sp.csr_matrix:
    """Vectorized generator for row-major flattening: vec(A rho B) =
    (A kron B^T) vec(rho)."""
    d = h.shape[0]
    eye = sp.identity(d, format="csr")
    lv = -1j * (sp.kron(h, eye, format="csr") - sp.kron(eye, h.T, format="csr"))
    for op, rate in channels:
        if rate == 0.0:
            continue
        opd = op.conj().T
        lv = lv + rate * (
            sp.kron(op, op.conj(), format="csr")
            - 0.5 * sp.kron(opd @ op, eye, format="csr")
            - 0.5 * sp.kron(eye, (opd @ op).T, format="csr")
        )
    return lv.tocsr()


def _build_liouvillian(model, basis, fock, thermal):
    h, a_ops = _joint_operators(model, basis, fock)
    channels = []
    for j, mode in enumerate(fock.modes):
        occ = thermal_occupation(mode.omega, thermal)
        channels.append((a_ops[j], mode.gamma * (occ + 1.0)))
        channels.append((a_ops[j].conj().T, mode.gamma * occ))
    return _liouvillian(h, channels)


def _initial_joint(rho0, basis, fock, thermal) -> np.ndarray:
    if isinstance(rho0, PVector):
        rho_s = devectorize(rho0, basis)
    else:
        rho_s = np.asarray(rho0, dtype=complex)
        if rho_s.shape != (basis.n, basis.n):
            raise ValidationError(f"initial state must be {basis.n}x{basis.n} or a PVector")
    joint = rho_s
    for mode in fock.modes:
        occ = thermal_occupation(mode.omega, thermal)
        joint = np.kron(joint, _thermal_dm(fock.n_fock, occ))
    return joint


def _partial_trace_modes(joint: np.ndarray, n: int, k_total: int) -> np.ndarray:
    return joint.reshape(n, k_total, n, k_total).trace(axis1=1, axis2=3)


def lindblad_evolve(
    model: SystemModel,
    basis: SuBasis,
    fock: FockConfig,
    thermal: ThermalParams,
    rho0,
    t_grid: np.ndarray,
) -> OracleTrajectory:
    """Exact reduced dynamics from the truncated-Fock master equation.

    The joint state starts factorized as rho_s(0) (x) thermal modes.  A
    convergence warning is emitted when the thermal tail outside the
    truncation exceeds 1e-8 (results may still be fine; the tests check
    n_fock -> n_fock + 10 stability where it matters).
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 2 or t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValidationError("time grid must be 1-d, non-negative and strictly ascending")
    for mode in fock.modes:
        tail = thermal_tail(fock.n_fock, mode.omega, thermal)
        if tail >= _TAIL_TARGET:
            warnings.warn(
                f"thermal tail beyond n_fock={fock.n_fock} is {tail:.2e} >= 1e-8 for mode "
                f"omega={mode.omega}; consider a larger truncation",
                stacklevel=2,
            )

    lv = _build_liouvillian(model, basis, fock, thermal)
    y0 = _initial_joint(rho0, basis, fock, thermal).ravel()
    d = int(round(np.sqrt(y0.size)))

    if fock.method == "krylov":
        _uniform_step(t, "krylov oracle propagation")
        if abs(t[0]) > 1e-12:
            raise ConfigurationError("krylov propagation expects the grid to start at t = 0")
        ys = expm_multiply(lv, y0.astype(complex), start=t[0], stop=t[-1], num=len(t), endpoint=True)
    elif fock.method == "cn":
        h = _uniform_step(t, "crank-nicolson oracle propagation")
        if abs(t[0]) > 1e-12:
            raise ConfigurationError("cn propagation expects the grid to start at t = 0")
        eye = sp.identity(lv.shape[0], format="csc")
        lu = splu((eye - 0.5 * h * lv).tocsc())
        rhs = (eye + 0.5 * h * lv).tocsr()
        ys = np.empty((len(t), y0.size), dtype=complex)
        ys[0] = y0
        for i in range(len(t) - 1):
            ys[i + 1] = lu.solve(rhs @ ys[i])
    else:
        sol = solve_ivp(
            lambda _t, y: lv @ y,
            (t[0], t[-1]),
            y0.astype(complex),
            method="DOP853",
            t_eval=t,
            rtol=fock.rtol,
            atol=fock.atol,
        )
        if not sol.success:
            raise NumericalError(
                f"oracle integration failed: {sol.message} "
                f"(reached t={sol.t[-1] if len(sol.t) else t[0]}, nfev={sol.nfev})"
            )
        ys = sol.y.T

    n = basis.n
    k_total = d // n
    rho_out = np.empty((len(t), n, n), dtype=complex)
    trace_dev = 0.0
    herm_dev = 0.0
    for i, y in enumerate(ys):
        joint = y.reshape(d, d)
        trace_dev = max(trace_dev, abs(np.trace(joint).real - 1.0) + abs(np.trace(joint).imag))
        red = _partial_trace_modes(joint, n, k_total)
        herm_dev = max(herm_dev, float(np.abs(red - red.conj().T).max()))
        rho_out[i] = 0.5 * (red + red.conj().T)
    return OracleTrajectory(t=t, rho=rho_out, trace_dev=trace_dev, herm_dev=herm_dev)


def lindblad_steady_state(
    model: SystemModel,
    basis: SuBasis,
    fock: FockConfig,
    thermal: ThermalParams,
    tol: float = 1e-10,
    max_iter: int = 60,
):
    """Null vector of the joint Liouvillian by shifted inverse iteration.

    Returns (reduced system state, joint state).  Requires at least one
    damped mode, otherwise the stationary state is not unique.
    """
    if all(m.gamma == 0.0 for m in fock.modes):
        raise UnsupportedConfigurationError(
            "steady state is not unique without damping; give some mode gamma > 0"
        )
    lv = _build_liouvillian(model, basis, fock, thermal).tocsc()
    d2 = lv.shape[0]
    d = int(round(np.sqrt(d2)))
    scale = abs(lv).sum(axis=1).max()  # cheap upper bound on ||L||_inf
    shift = 1e-12 * scale
    try:
        lu = splu(lv - shift * sp.identity(d2, format="csc"))
    except RuntimeError as exc:
        raise NumericalError(f"sparse factorization of the Liouvillian failed: {exc}") from exc

    v = _initial_joint(np.eye(basis.n) / basis.n, basis, fock, thermal).ravel().astype(complex)
    residual = np.inf
    for _ in range(max_iter):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
        residual = np.linalg.norm(lv @ v) / scale
        if residual < tol:
            break
    if residual >= tol:
        raise NumericalError(
            f"inverse iteration did not reach residual {tol} (got {residual:.2e})"
        )
    joint = v.reshape(d, d)
    joint = 0.5 * (joint + joint.conj().T)
    joint /= np.trace(joint).real
    reduced = _partial_trace_modes(joint, basis.n, d // basis.n)
    return reduced, joint


def _tcl2_generators(model, basis, kern, t, tau_cut):
    """K2(t_i) on the grid by direct trapezoid sums (no FFT reuse)."""
    h = _uniform_step(t, "tcl2 reference")
    if abs(kern.dt - h) > 1e-9 * h:
        raise ConfigurationError("tcl2 kernel grid spacing must match the time grid")
    if tau_cut == "auto":
        cut = kern.memory_time()
    else:
        cut = tau_cut
    n = len(t)
    Dv = np.zeros(n)
    D1v = np.zeros(n)
    take = min(n, len(kern.tau))
    Dv[:take] = kern.D[:take]
    D1v[:take] = kern.D1[:take]
    if cut is not None:
        Dv[t > cut + 1e-15] = 0.0
        D1v[t > cut + 1e-15] = 0.0

    u = propagator_grid(model, basis, t)
    uinv = u.conj().transpose(0, 2, 1)
    vx = build_vcross(model.v_coeffs, basis).matrix
    vc = build_vcirc(model.v_coeffs, basis).matrix
    vxt = np.einsum("tij,jk,tkl->til", uinv, vx, u)
    vct = np.einsum("tij,jk,tkl->til", uinv, vc, u)

    gen = np.zeros_like(vxt)
    for i in range(1, n):
        w = np.full(i + 1, h)
        w[0] = w[-1] = 0.5 * h
        integrand = (
            Dv[i::-1, None, None] * vxt[: i + 1] + 1j * D1v[i::-1, None, None] * vct[: i + 1]
        )
        inner = np.tensordot(w, integrand, axes=(0, 0))
        gen[i] = -vxt[i] @ inner
    return gen


def tcl2_generator_integral(
    model: SystemModel,
    basis: SuBasis,
    kern: KernelSamples,
    t_grid: np.ndarray,
    tau_cut: Union[str, float, None] = "auto",
) -> np.ndarray:
    """int_0^t K2(t') dt' on the grid; equals the exponent matrix of the
    quadrature path identically (same trapezoid algebra, independent code)."""
    t = np.asarray(t_grid, dtype=float)
    gen = _tcl2_generators(model, basis, kern, t, tau_cut)
    h = _uniform_step(t, "tcl2 reference")
    cum = np.cumsum(gen, axis=0)
    out = h * (cum - 0.5 * gen[0] - 0.5 * gen)
    out[0] = 0.0
    return out


def tcl2_reference(
    model: SystemModel,
    basis: SuBasis,
    spec,
    thermal: ThermalParams,
    rho0: PVector,
    t_grid: np.ndarray,
    tau_cut: Union[str, float, None] = "auto",
) -> ReducedTrajectory:
    """Second-order TCL trajectory in generator form (not exponentiated).

    Supports undamped environments only (gamma(w) = 0 everywhere); there
    the integrated generator coincides with the exponent of the influence
    ansatz, while the trajectories still differ through time ordering --
    that gap is what this reference quantifies.  The kernel is sampled
    here, on a doubled grid, so the RK4 midpoint stages use genuine
    kernel values rather than interpolants.
    """
    from .bath import frequency_quadrature, kernel as sample_kernel

    specs = tuple(spec) if isinstance(spec, (list, tuple)) else (spec,)
    for one in specs:
        if np.any(frequency_quadrature(one).gamma != 0.0):
            raise UnsupportedConfigurationError(
                "tcl2 reference is defined for undamped environments (gamma = 0)"
            )
    t = np.asarray(t_grid, dtype=float)
    h = _uniform_step(t, "tcl2 reference")
    if abs(t[0]) > 1e-12:
        raise ConfigurationError("tcl2 reference expects the grid to start at t = 0")
    fine = t[0] + 0.5 * h * np.arange(2 * (len(t) - 1) + 1)
    kern_fine = sample_kernel(specs[0], thermal, fine)
    for one in specs[1:]:
        kern_fine = kern_fine + sample_kernel(one, thermal, fine)
    gen_fine = _tcl2_generators(model, basis, kern_fine, fine, tau_cut)

    p0 = np.asarray(rho0.coeffs, dtype=complex)
    if p0.shape != (basis.dim,):
        raise ValidationError(f"initial P vector must have length {basis.dim}")
    pt = np.empty((len(t), basis.dim), dtype=complex)
    pt[0] = p0
    for i in range(len(t) - 1):
        k_a = gen_fine[2 * i]
        k_mid = gen_fine[2 * i + 1]
        k_b = gen_fine[2 * i + 2]
        y = pt[i]
        s1 = k_a @ y
        s2 = k_mid @ (y + 0.5 * h * s1)
        s3 = k_mid @ (y + 0.5 * h * s2)
        s4 = k_b @ (y + h * s3)
        pt[i + 1] = y + (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)

    u = propagator_grid(model, basis, t)
    p = np.einsum("tij,tj->ti", u, pt)
    herm = float(np.abs(p.imag).max())
    return ReducedTrajectory(t=t, coeffs=p.real.copy(), herm_residual=herm)
