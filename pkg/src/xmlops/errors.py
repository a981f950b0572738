"""Exception hierarchy shared by every component.

Validation problems (bad input, unknown ids, contract violations) map to CLI
exit code 1; anything else escaping a handler is an internal error, exit 2.
"""

from __future__ import annotations


class XmlopsError(Exception):
    """Base class for all platform errors."""


class ValidationError(XmlopsError):
    """Caller-supplied input violates a precondition."""


class UnknownEntityError(ValidationError):
    """Referenced entity id does not exist in the store."""

    def __init__(self, kind: str, entity_id: str):
        super().__init__(f"unknown {kind}: {entity_id}")
        self.kind = kind
        self.entity_id = entity_id


class ImmutabilityError(XmlopsError):
    """Mutation attempted on sealed or content-addressed state."""


class ExcludedSampleError(ValidationError):
    """Sample carries an exclusion mark and may not enter new datasets."""

    def __init__(self, sample_id: str):
        super().__init__(f"sample is marked bad and excluded: {sample_id}")
        self.sample_id = sample_id


class ArchitectureError(ValidationError):
    """Operation is not defined for the model's architecture."""


class DivergenceError(XmlopsError):
    """Training produced a non-finite loss."""


class SingularMatrixError(ValidationError):
    """Normal equations are singular; advise a positive ridge penalty."""


class DeploymentStateError(ValidationError):
    """Deployment is retired or its scheme forbids the operation."""


class TriggerConsumedError(ValidationError):
    """Retrain trigger was already consumed."""


class StoreVersionError(XmlopsError):
    """Store schema version is newer than this build understands."""


class StoreCorruptionError(XmlopsError):
    """Manifest or log failed its integrity check."""
