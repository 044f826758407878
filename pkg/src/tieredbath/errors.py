"""Exception types shared across the package.

The CLI maps these onto exit codes: validation/configuration problems
exit with 1, numerical failures with 2 (threshold violations in
``compare`` use 3 and are not exceptions).
"""


class TieredBathError(Exception):
    """Base class for all package errors."""


class ValidationError(TieredBathError):
    """Invalid user input: bad values, shapes, schema violations."""


class ConfigurationError(TieredBathError):
    """Inputs are individually valid but mutually inconsistent.

    Examples: kernel grid shorter than the requested time span, spectral
    density that has not decayed by the quadrature cutoff.
    """


class UnsupportedConfigurationError(TieredBathError):
    """A documented capability limit was hit (e.g. biased spin-boson
    closed form, oracle with a continuous bath)."""


class CapabilityError(TieredBathError):
    """Recursion order beyond the supported depth of the moment expansion."""


class DegenerateKernelError(TieredBathError):
    """Kernel moment integrals are ill-defined: the kernel does not decay
    on its grid, or a zeroth-moment denominator vanishes."""


class NumericalError(TieredBathError):
    """An integrator or linear solver failed to converge."""
