"""Exception and warning types shared across the engine."""


class MfwbError(Exception):
    """Base class for all engine errors."""

    def to_json(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


# -- dataset ingestion ------------------------------------------------------

class MalformedManifest(MfwbError):
    pass


class DimensionMismatch(MfwbError):
    pass


class DuplicateId(MfwbError):
    pass


class ZeroVector(MfwbError):
    pass


class UnknownId(MfwbError):
    pass


class UnknownConcept(MfwbError):
    pass


class KTooLarge(MfwbError):
    pass


class InsufficientImages(MfwbError):
    pass


# -- distance / projection --------------------------------------------------

class TooFewPoints(MfwbError):
    pass


class MissingPoint(MfwbError):
    pass


class InvalidDistanceMatrix(MfwbError):
    pass


class ZeroProjectedNorm(MfwbError):
    pass


class NonFiniteLoss(MfwbError):
    """Training diverged; carries the loss trace accumulated so far."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace or []


class TrainingCancelled(MfwbError):
    pass


# -- quality metrics --------------------------------------------------------

class NormalizerNonpositive(MfwbError):
    pass


class SetTooSmall(MfwbError):
    pass


# -- density ----------------------------------------------------------------

class EmptyInput(MfwbError):
    pass


class NonFiniteWeight(MfwbError):
    pass


class LevelOutOfRange(MfwbError):
    pass


# -- alignment --------------------------------------------------------------

class EmptySet(MfwbError):
    pass


class DegenerateDirective(MfwbError):
    pass


class ZeroResultant(MfwbError):
    pass


# -- warnings ---------------------------------------------------------------

class DegenerateVarianceWarning(UserWarning):
    """A Pearson term saw zero variance and was defined as 0."""


class DegenerateCohortWarning(UserWarning):
    """An axis cohort had no similarity spread; positions collapsed to l/2."""


class RankDeficientWarning(UserWarning):
    """PCA input had fewer than 2 informative directions."""


class DegenerateMeanWarning(UserWarning):
    """A distance submatrix mean was ~0; left unnormalized."""
