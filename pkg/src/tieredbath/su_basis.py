"""Generalized Gell-Mann basis and superoperator vectorization.

Any n x n operator A is expanded over the identity and the n^2 - 1
traceless Hermitian basis matrices nu_i,

    A = A_{n^2} * I + A_i nu_i,       A_i = Tr[A nu_i] / 2,
    A_{n^2} = Tr[A] / n,              Tr[nu_i nu_j] = 2 delta_ij,

which turns commutator / anticommutator superoperators into ordinary
(n^2 x n^2) matrices acting on the coefficient vector
[A_1, ..., A_{n^2-1}, A_{n^2}].  Products close through the structure
constants,

    nu_i nu_j   = (2/n) delta_ij I + (d_ijk + i f_ijk) nu_k,
    [nu_i, nu_j]  = 2 i f_ijk nu_k,
    {nu_i, nu_j}  = (4/n) delta_ij I + 2 d_ijk nu_k,

with f totally antisymmetric and d totally symmetric.  For n = 2 the
nu_i are the Pauli matrices (f = Levi-Civita, d = 0); for n = 3 the
Gell-Mann matrices.

Basis ordering is fixed once and for all (it differs from the textbook
interleaved ordering for n >= 3): first all symmetric off-diagonal pairs
E_jk + E_kj for j < k in lexicographic (j, k) order, then all
antisymmetric pairs -i(E_jk - E_kj), then the n - 1 diagonal matrices
sqrt(2/(l(l+1))) (sum_{m<=l} E_mm - l E_{l+1,l+1}).  For n = 2 this is
exactly (sigma_x, sigma_y, sigma_z).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "SuBasis",
    "PVector",
    "VectorizedOperator",
    "build_basis",
    "vectorize",
    "devectorize",
    "operator_coeffs",
    "build_hcross",
    "build_vcross",
    "build_vcirc",
    "superop_to_matrix",
]

_HERM_TOL = 1e-10
_TRACE_TOL = 1e-10


@dataclass(frozen=True)
class SuBasis:
    """Operator basis for an n-level system.

    Attributes
    ----------
    n : system dimension
    nu : (n^2-1, n, n) complex array of traceless Hermitian matrices
    f : (m, m, m) real totally antisymmetric structure constants
    d : (m, m, m) real totally symmetric structure constants
    """

    n: int
    nu: np.ndarray
    f: np.ndarray
    d: np.ndarray

    @property
    def m(self) -> int:
        """Number of traceless basis elements, n^2 - 1."""
        return self.n * self.n - 1

    @property
    def dim(self) -> int:
        """Length of a coefficient vector, n^2."""
        return self.n * self.n

    def labels(self) -> list[str]:
        """Column labels for the expectation values 2*P_i."""
        if self.n == 2:
            return ["sx", "sy", "sz"]
        return [f"nu{i + 1}" for i in range(self.m)]


@dataclass(frozen=True)
class PVector:
    """Vectorized Hermitian operator: [P_1, ..., P_{n^2-1}, P_{n^2}].

    For a density matrix the last component is fixed at 1/n by trace
    normalization and the expectation values are <nu_i> = 2 P_i.
    """

    coeffs: np.ndarray

    @property
    def trace_component(self) -> float:
        return float(self.coeffs[-1])

    def expectations(self) -> np.ndarray:
        """<nu_i> = 2 P_i for the traceless basis elements."""
        return 2.0 * self.coeffs[:-1]


@dataclass(frozen=True)
class VectorizedOperator:
    """An (n^2 x n^2) superoperator matrix in the coefficient basis."""

    kind: str  # "Hcross" | "Vcross" | "Vcirc"
    matrix: np.ndarray


def build_basis(n: int) -> SuBasis:
    """Construct the generalized Gell-Mann basis for dimension ``n``.

    The structure constants are evaluated from the trace formulas
    f_ijk = Tr([nu_i, nu_j] nu_k) / (4i), d_ijk = Tr({nu_i, nu_j} nu_k) / 4
    and stored dense (n stays small in practice; beyond n ~ 8 the rank-3
    tensors become wasteful).
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValidationError(f"system dimension must be an integer >= 2, got {n!r}")
    n = int(n)

    mats = []
    for j in range(n):
        for k in range(j + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[j, k] = 1.0
            m[k, j] = 1.0
            mats.append(m)
    for j in range(n):
        for k in range(j + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[j, k] = -1.0j
            m[k, j] = 1.0j
            mats.append(m)
    for l in range(1, n):
        m = np.zeros((n, n), dtype=complex)
        norm = np.sqrt(2.0 / (l * (l + 1)))
        for mm in range(l):
            m[mm, mm] = norm
        m[l, l] = -l * norm
        mats.append(m)
    nu = np.array(mats)

    prod = np.einsum("iab,jbc->ijac", nu, nu)
    comm = prod - prod.transpose(1, 0, 2, 3)
    anti = prod + prod.transpose(1, 0, 2, 3)
    f = np.einsum("ijab,kba->ijk", comm, nu) / 4.0j
    d = np.einsum("ijab,kba->ijk", anti, nu) / 4.0
    if max(np.abs(f.imag).max(), np.abs(d.imag).max()) > 1e-12:
        raise ValidationError("structure constants came out non-real; basis is broken")
    return SuBasis(n=n, nu=nu, f=f.real, d=d.real)


def operator_coeffs(op: np.ndarray, basis: SuBasis) -> np.ndarray:
    """Raw coefficient vector of an arbitrary operator (no validation).

    Returns complex coefficients; for Hermitian input they are real up to
    roundoff.  Used internally to build superoperator matrices.
    """
    op = np.asarray(op, dtype=complex)
    coeffs = np.empty(basis.dim, dtype=complex)
    coeffs[:-1] = np.einsum("ab,iba->i", op, basis.nu) / 2.0
    coeffs[-1] = np.trace(op) / basis.n
    return coeffs


def vectorize(rho: np.ndarray, basis: SuBasis) -> PVector:
    """Map a Hermitian unit-trace density matrix onto its P vector.

    P_i = Tr[rho nu_i] / 2 and P_{n^2} = 1/n.  Hermiticity and trace are
    enforced to 1e-10.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (basis.n, basis.n):
        raise ValidationError(f"expected a {basis.n}x{basis.n} matrix, got shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > _HERM_TOL:
        raise ValidationError("density matrix is not Hermitian within 1e-10")
    tr = np.trace(rho)
    if abs(tr - 1.0) > _TRACE_TOL:
        raise ValidationError(f"density matrix trace {tr} differs from 1 beyond 1e-10")
    coeffs = operator_coeffs(rho, basis)
    return PVector(coeffs=coeffs.real.copy())


def devectorize(p: PVector | np.ndarray, basis: SuBasis) -> np.ndarray:
    """Reconstruct the operator P_{n^2} I + P_i nu_i."""
    coeffs = p.coeffs if isinstance(p, PVector) else np.asarray(p)
    if coeffs.shape != (basis.dim,):
        raise ValidationError(f"coefficient vector must have length {basis.dim}")
    return coeffs[-1] * np.eye(basis.n, dtype=complex) + np.einsum(
        "i,iab->ab", coeffs[:-1].astype(complex), basis.nu
    )


def build_hcross(h_coeffs: np.ndarray, basis: SuBasis) -> VectorizedOperator:
    """Matrix of the commutator superoperator for H = H_k nu_k.

    [H^x]_ij = -2i H_k f_kij with vanishing last row and column, so that
    -i H^x applied to a P vector reproduces -i[H, rho].  H^x is Hermitian.
    """
    h = np.asarray(h_coeffs, dtype=float)
    if h.shape != (basis.m,):
        raise ValidationError(f"H coefficients must have length {basis.m}, got {h.shape}")
    mat = np.zeros((basis.dim, basis.dim), dtype=complex)
    mat[: basis.m, : basis.m] = -2.0j * np.einsum("k,kij->ij", h, basis.f)
    return VectorizedOperator(kind="Hcross", matrix=mat)


def build_vcross(v_coeffs: np.ndarray, basis: SuBasis) -> VectorizedOperator:
    """Matrix equivalent of [V, .] for V = V_k nu_k + V_{n^2} I.

    (V^x)_ij = -2i V_k f_kij; the identity component of V commutes with
    everything, so the last row, last column and corner vanish.
    """
    v = _check_v(v_coeffs, basis)
    mat = np.zeros((basis.dim, basis.dim), dtype=complex)
    mat[: basis.m, : basis.m] = -2.0j * np.einsum("k,kij->ij", v[: basis.m], basis.f)
    return VectorizedOperator(kind="Vcross", matrix=mat)


def build_vcirc(v_coeffs: np.ndarray, basis: SuBasis) -> VectorizedOperator:
    """Matrix equivalent of the anticommutator {V, .}.

    (V^o)_ij = 2 V_k d_kij + 2 V_{n^2} delta_ij,
    (V^o)_{i,n^2} = 2 V_i,  (V^o)_{n^2,i} = (4/n) V_i,
    (V^o)_{n^2,n^2} = 2 V_{n^2}.
    """
    v = _check_v(v_coeffs, basis)
    m = basis.m
    mat = np.zeros((basis.dim, basis.dim), dtype=complex)
    mat[:m, :m] = 2.0 * np.einsum("k,kij->ij", v[:m], basis.d) + 2.0 * v[m] * np.eye(m)
    mat[:m, m] = 2.0 * v[:m]
    mat[m, :m] = (4.0 / basis.n) * v[:m]
    mat[m, m] = 2.0 * v[m]
    return VectorizedOperator(kind="Vcirc", matrix=mat)


def superop_to_matrix(apply_op, basis: SuBasis) -> np.ndarray:
    """Matrix of an arbitrary superoperator in the coefficient basis.

    ``apply_op`` maps an n x n matrix to an n x n matrix; column j of the
    result holds the coefficients of apply_op(nu_j) (identity in the last
    column).  Used for Lindblad dissipators and as a test oracle for the
    closed-form V^x / V^o constructions.
    """
    cols = []
    for j in range(basis.m):
        cols.append(operator_coeffs(apply_op(basis.nu[j]), basis))
    cols.append(operator_coeffs(apply_op(np.eye(basis.n, dtype=complex)), basis))
    return np.stack(cols, axis=1)


def _check_v(v_coeffs: np.ndarray, basis: SuBasis) -> np.ndarray:
    v = np.asarray(v_coeffs, dtype=float)
    if v.shape != (basis.dim,):
        raise ValidationError(
            f"V coefficients must have length {basis.dim} "
            f"(traceless part plus identity component), got {v.shape}"
        )
    return v
