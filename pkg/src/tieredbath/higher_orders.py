"""Higher orders of the environment exponent via moment recursion.

For discrete damped modes the perturbation series is organized through
matrix-valued moments chi_n({a_k},{b_k}; t) (one non-negative integer
pair per mode), satisfying

  chi_n({a},{b}; t) = int_0^t dtau
      exp(-sum_k [ i w_k (a_k - b_k) + gamma_k (a_k + b_k)/2 ] (t - tau))
      S_n({a},{b}; tau),

  S_n = sum_k gamma_k N_k a_k b_k chi_n(a_k-1, b_k-1; t)
      - i Vt^x(t) sum_k g_k [ chi_{n-1}(a_k+1) + chi_{n-1}(b_k+1)
                              + (a_k/2) chi_{n-1}(a_k-1) + (b_k/2) chi_{n-1}(b_k-1) ]
      - (i/2) Vt^o(t) sum_k g_k [ a_k chi_{n-1}(a_k-1) - b_k chi_{n-1}(b_k-1) ],

with single-index shifts (all other indices fixed; the first source term
shifts a_k and b_k together), anchored by the thermal moments

  chi_0({a},{b}) = prod_k a_k! N_k^{a_k}   if a_k = b_k for all k, else 0.

Every chi with odd n + sum(a+b) vanishes identically (odd coupling powers
drop for a factorized thermal start), which emerges from the recursion
rather than being imposed.  The exponent series is assembled as

  Theta = Theta_2 + Theta_4 + ...                 (couplings kept in g_k)
  Theta_2 = chi_2(0; t)
  Theta_4 = chi_4(0; t) - Theta_2^2 / 2!
  Theta_6 = chi_6(0; t) - (Theta_2 Theta_4 + Theta_4 Theta_2)/2! - Theta_2^3/3!
  Theta_8 = chi_8(0; t) - (Theta_4^2 + Theta_6 Theta_2 + Theta_2 Theta_6)/2!
            - (Theta_2 Theta_4 Theta_4 + perms)/3! - Theta_2^4/4!

with equal-time matrix products.  Only orders 2 and 4 are evaluated here;
the order-6/8 assembly above is documentation for a later extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bath import DampedMode, ThermalParams, thermal_occupation
from .errors import CapabilityError, ValidationError
from .influence import SystemModel, _uniform_step, heisenberg_pair
from .su_basis import SuBasis

__all__ = ["MomentIndex", "ChiEvaluator", "chi", "theta_series"]

_MAX_ORDER = 4


@dataclass(frozen=True)
class MomentIndex:
    """Per-mode moment exponents ({a_k}, {b_k})."""

    a: tuple
    b: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(int(x) for x in self.a))
        object.__setattr__(self, "b", tuple(int(x) for x in self.b))
        if len(self.a) != len(self.b):
            raise ValidationError("a and b index tuples must have equal length")
        if any(x < 0 for x in self.a + self.b):
            raise ValidationError("moment indices must be non-negative")

    @classmethod
    def zero(cls, n_modes: int) -> "MomentIndex":
        return cls(a=(0,) * n_modes, b=(0,) * n_modes)

    def shift(self, which: str, k: int, by: int) -> "MomentIndex":
        if which == "a":
            a = list(self.a)
            a[k] += by
            return MomentIndex(a=tuple(a), b=self.b)
        b = list(self.b)
        b[k] += by
        return MomentIndex(a=self.a, b=tuple(b))

    @property
    def weight(self) -> int:
        return sum(self.a) + sum(self.b)


class ChiEvaluator:
    """Memoized top-down evaluation of the moment recursion on one grid.

    The memo table is filled deterministically (single-threaded) and read
    only afterwards; each entry is a (T, n^2, n^2) complex array.
    """

    def __init__(
        self,
        modes: Sequence[DampedMode],
        model: SystemModel,
        basis: SuBasis,
        thermal: ThermalParams,
        t_grid: np.ndarray,
        max_order: int = _MAX_ORDER,
    ):
        if len(modes) == 0:
            raise ValidationError("need at least one mode")
        self.modes = tuple(modes)
        self.basis = basis
        self.t = np.asarray(t_grid, dtype=float)
        self.h = _uniform_step(self.t, "moment recursion")
        if abs(self.t[0]) > 1e-12:
            raise ValidationError("moment recursion grid must start at t = 0")
        self.max_order = max_order
        self.occ = np.array([thermal_occupation(m.omega, thermal) for m in modes])
        self.vxt, self.vct = heisenberg_pair(model, basis, self.t)
        self._memo: dict = {}
        self._eye = np.broadcast_to(
            np.eye(basis.dim, dtype=complex), (len(self.t), basis.dim, basis.dim)
        )

    def chi(self, order: int, idx: MomentIndex) -> np.ndarray:
        if order < 0:
            raise ValidationError("order must be non-negative")
        if order > self.max_order:
            raise CapabilityError(
                f"moment recursion evaluated up to order {self.max_order}; got {order}"
            )
        if len(idx.a) != len(self.modes):
            raise ValidationError("moment index length must match the number of modes")
        key = (order, idx.a, idx.b)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = self._evaluate(order, idx)
        self._memo[key] = out
        return out

    def _evaluate(self, order: int, idx: MomentIndex) -> np.ndarray:
        if order == 0:
            if idx.a != idx.b:
                return np.zeros_like(self._eye)
            c = 1.0
            for ak, nk in zip(idx.a, self.occ):
                c *= float(math.factorial(ak)) * nk**ak
            return c * self._eye.copy()

        source = np.zeros_like(self._eye)
        for k, mode in enumerate(self.modes):
            ak, bk = idx.a[k], idx.b[k]
            if ak > 0 and bk > 0:
                source = source + (
                    mode.gamma
                    * self.occ[k]
                    * ak
                    * bk
                    * self.chi(order, idx.shift("a", k, -1).shift("b", k, -1))
                )
            cross = self.chi(order - 1, idx.shift("a", k, 1)) + self.chi(
                order - 1, idx.shift("b", k, 1)
            )
            circ = np.zeros_like(self._eye)
            if ak > 0:
                down_a = self.chi(order - 1, idx.shift("a", k, -1))
                cross = cross + 0.5 * ak * down_a
                circ = circ + ak * down_a
            if bk > 0:
                down_b = self.chi(order - 1, idx.shift("b", k, -1))
                cross = cross + 0.5 * bk * down_b
                circ = circ - bk * down_b
            source = source - 1j * mode.g * np.einsum("tij,tjk->tik", self.vxt, cross)
            source = source - 0.5j * mode.g * np.einsum("tij,tjk->tik", self.vct, circ)

        decay = sum(
            1j * m.omega * (idx.a[k] - idx.b[k]) + 0.5 * m.gamma * (idx.a[k] + idx.b[k])
            for k, m in enumerate(self.modes)
        )
        return _exp_weighted_cumtrapz(source, decay, self.h)


def _exp_weighted_cumtrapz(source: np.ndarray, decay: complex, h: float) -> np.ndarray:
    """I(t_i) = int_0^{t_i} e^{-decay (t_i - tau)} source(tau) dtau,
    incremental trapezoid: I_{i} = e^{-decay h} I_{i-1}
    + h/2 (e^{-decay h} S_{i-1} + S_i)."""
    out = np.zeros_like(source)
    fade = np.exp(-decay * h)
    for i in range(1, source.shape[0]):
        out[i] = fade * out[i - 1] + 0.5 * h * (fade * source[i - 1] + source[i])
    return out


def chi(
    order: int,
    idx: MomentIndex,
    modes: Sequence[DampedMode],
    model: SystemModel,
    basis: SuBasis,
    thermal: ThermalParams,
    t_grid: np.ndarray,
) -> np.ndarray:
    """One-shot moment evaluation (builds a fresh memo table)."""
    ev = ChiEvaluator(modes, model, basis, thermal, t_grid)
    return ev.chi(order, idx)


def theta_series(
    modes: Sequence[DampedMode],
    model: SystemModel,
    basis: SuBasis,
    thermal: ThermalParams,
    t_grid: np.ndarray,
    max_order: int = 4,
) -> dict:
    """Theta_2 and (optionally) Theta_4 with couplings kept inside g_k.

    Theta_2 = chi_2(0;t) reproduces the double-integral quadrature path;
    Theta_4 = chi_4(0;t) - Theta_2(t)^2 / 2 with an equal-time matrix
    square.  Theta_2 is additive over modes, Theta_4 is not (cross
    terms); both facts are exercised in the tests.
    """
    if max_order not in (2, 4):
        raise ValidationError("max_order must be 2 or 4")
    ev = ChiEvaluator(modes, model, basis, thermal, t_grid, max_order=max_order)
    zero = MomentIndex.zero(len(ev.modes))
    out = {2: ev.chi(2, zero)}
    if max_order == 4:
        chi4 = ev.chi(4, zero)
        theta2 = out[2]
        out[4] = chi4 - 0.5 * np.einsum("tij,tjk->tik", theta2, theta2)
    return out
