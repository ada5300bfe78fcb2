"""Exception hierarchy.

Every error carries a machine-readable ``category`` (its class name), which
the CLI emits on failure.  Errors that abort mid-computation keep whatever
partial state is useful for diagnosis as attributes.
"""


class DiracWeylError(Exception):
    """Base class for all library errors."""

    @property
    def category(self):
        return type(self).__name__


# -- boundary data / scalar arguments ---------------------------------------

class NotNormalized(DiracWeylError):
    """alpha @ alpha* deviates from the identity beyond tolerance."""


class NotLagrangian(DiracWeylError):
    """alpha @ J @ alpha* deviates from zero beyond tolerance."""


class DegenerateArguments(DiracWeylError):
    """Sign factor or Weyl machinery called with s = t or real z."""


# -- potential model ---------------------------------------------------------

class NonHermitianPiece(DiracWeylError):
    """A potential piece evaluates to a non-Hermitian matrix."""


class OutOfDomain(DiracWeylError):
    """Evaluation point outside the declared domain of the potential."""


class EmptyWindow(DiracWeylError):
    """Truncation window [x0, y0] with y0 <= x0."""


# -- propagation -------------------------------------------------------------

class IntegrationFailure(DiracWeylError):
    """The ODE integrator failed (step-size underflow or non-finite state)."""


class MismatchedEvaluation(DiracWeylError):
    """Symplectic check called on fundamental systems with incompatible data."""


class NoCompactSupport(DiracWeylError):
    """Volterra solver needs a potential with bounded support."""


class IterationDivergence(DiracWeylError):
    """Successive approximations stopped contracting within the budget."""


# -- Weyl disk / M-functions -------------------------------------------------

class EigenvalueHit(DiracWeylError):
    """beta @ Phi(z, c) is (numerically) singular: z is an eigenvalue of the
    regular boundary value problem on [x0, c]."""

    def __init__(self, msg, cond=None):
        super().__init__(msg)
        self.cond = cond


class NoConvergence(DiracWeylError):
    """Half-line truncation sweep exhausted its range budget."""

    def __init__(self, msg, best=None, tail=None):
        super().__init__(msg)
        self.best = best
        self.tail = tail


class SingularDenominator(DiracWeylError):
    """Linear fractional transform hit a singular denominator."""


# -- Riccati / Cayley --------------------------------------------------------

class PoleEncountered(DiracWeylError):
    """Riccati trajectory blew up (u1 near-singular)."""

    def __init__(self, msg, last_x=None):
        super().__init__(msg)
        self.last_x = last_x


class SingularCayley(DiracWeylError):
    """Cayley transform undefined: I -/+ i*sigma*M singular."""


class ContractivityLost(DiracWeylError):
    """Compactified trajectory left the closed unit ball: the initial matrix
    was outside the Weyl disk."""

    def __init__(self, msg, x=None, monitor=None):
        super().__init__(msg)
        self.x = x
        self.monitor = monitor


class NotContractive(DiracWeylError):
    """Initial Cayley state has norm beyond 1 + tol."""


# -- full line ---------------------------------------------------------------

class SingularDifference(DiracWeylError):
    """M_minus - M_plus is numerically singular (z at the spectrum within
    resolution)."""


class LogBranchFailure(DiracWeylError):
    """Principal matrix logarithm undefined (zero or non-finite eigenvalue)."""


# -- asymptotics -------------------------------------------------------------

class InsufficientDerivatives(DiracWeylError):
    """Expansion order exceeds the derivative data available."""


class IllConditionedFit(DiracWeylError):
    """Expansion fit rejected: sample magnitudes too clustered or too few."""


class SectorViolation(DiracWeylError):
    """Fit sample outside the declared upper half-plane sector."""


# -- spectral analysis -------------------------------------------------------

class DifferentiationFailure(DiracWeylError):
    """Numerical z-derivative of log M unusable (samples too noisy)."""


class NotPeriodic(DiracWeylError):
    """Operation requires a periodic potential."""


class DifferenceBelowNoise(DiracWeylError):
    """All decay-fit samples sit below the solver noise floor (the two
    potentials are indistinguishable at this resolution)."""


# -- gauge -------------------------------------------------------------------

class NotHermitianOmega(DiracWeylError):
    """Gauge twist parameter omega must be Hermitian."""
