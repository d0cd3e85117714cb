"""Exception hierarchy shared by all ionops modules."""


class IonopsError(Exception):
    """Base class for domain errors raised by ionops."""


# angular
class NonTransversePolarization(IonopsError):
    """Polarization vector has a component along the propagation direction."""


# registry
class ParseError(IonopsError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ValidationError(IonopsError):
    def __init__(self, entity, rule):
        self.entity = entity
        self.rule = rule
        super().__init__(f"{entity}: {rule}")


class DegenerateTransition(IonopsError):
    """Upper and lower level energies coincide."""


class NoDecayChannels(IonopsError):
    """Level has no downward transitions in the registry."""


# fields
class MissingHyperfineConstant(IonopsError):
    """Level with J > 0 lacks a hyperfine constant."""


class LabelCrossing(IonopsError):
    """Adiabatic label continuation is ambiguous at the requested field."""


class NoSignChange(IonopsError):
    """The first-order sensitivity does not change sign on the bracket."""


# coupling
class MultipoleMismatch(IonopsError):
    """Matrix element does not connect the supplied manifolds."""


class FieldMismatch(IonopsError):
    """Dressed-state sets were computed at different bias fields."""


class DetuningTooSmall(IonopsError):
    """Adiabatic elimination of the excited states is not justified."""


# dynamics
class MissingChannel(IonopsError):
    """A decay channel between supplied manifolds is absent from the registry."""


class ToleranceNotMet(IonopsError):
    """The integrator could not reach the requested tolerance."""


class NonPhysicalState(IonopsError):
    """Density matrix acquired a significantly negative eigenvalue."""


class NonLinearChannel(IonopsError):
    """Supplied channel map failed the linearity spot check."""


# protocols
class NoResonance(IonopsError):
    """No transition satisfies the requested resonance condition."""


class AmbiguousTarget(IonopsError):
    """Target-state selection has a tie."""


class LoopClosureFailure(IonopsError):
    """Phase-space loop could not be closed."""


class ForbiddenM1(IonopsError):
    """States are not connected by a magnetic-dipole matrix element."""


# spectra
class ForbiddenTransition(IonopsError):
    """Levels are not connected by an electric-dipole transition."""


class SingularNormalMatrix(IonopsError):
    """Normal matrix of the least-squares problem is singular."""


class NoConvergence(IonopsError):
    """Fit did not converge; the best parameters so far are attached."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)
