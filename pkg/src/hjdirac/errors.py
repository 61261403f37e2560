"""Error types shared across the package.

Every guard that a caller can trip deliberately gets its own class so that
callers (and the CLI) can distinguish bad input (usage) from failed checks.
"""


class HJDiracError(Exception):
    """Base class for all package errors."""


class UsageError(HJDiracError):
    """Malformed configuration or arguments (CLI exit code 2)."""


class NullVector(HJDiracError):
    """Minkowski square |v.v| within the null tolerance; spectral pairing degenerates."""


class BadSignature(HJDiracError):
    """Metric eigenvalue signs are not (+, -, ..., -) at the sampled point."""


class SingularMetric(HJDiracError):
    """Metric matrix numerically singular (condition number above guard)."""


class SingularJacobian(HJDiracError):
    """Chart Jacobian numerically singular at the sampled point."""


class DomainBoundary(HJDiracError):
    """Field evaluated outside its declared region (finite differences would leave it)."""


class NonMonotone(HJDiracError):
    """Reparameterization psi is not monotone on the needed range; no inverse branch."""


class NonTimelikeSeparation(HJDiracError):
    """Separation from the base point is null or spacelike; no real proper time."""


class IllConditioned(HJDiracError):
    """Least-squares normal matrix singular; the fit does not determine the constants."""


class NotCommuting(HJDiracError):
    """Slashed operators do not commute; no simultaneous eigenvector exists."""


class OffShell(HJDiracError):
    """Momentum violates p.p = m0^2 beyond tolerance."""


class NonSeparable(HJDiracError):
    """Leapfrog requested for a Hamiltonian without a T(p) + V(x) split."""


class StepRejected(HJDiracError):
    """Integrator produced a non-finite state component."""


class TooLarge(HJDiracError):
    """Occupation enumeration bounds exceeded."""


class DegenerateData(HJDiracError):
    """Data set carries no usable information (e.g. zero elapsed time)."""


class NotIntegrable(HJDiracError):
    """Slice carries non-negligible mass on the grid boundary."""


class BoundaryIndex(HJDiracError):
    """Central difference requested at the first or last sample."""
