"""Exception types shared across the package."""


class ReplicaPlanError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(ReplicaPlanError, ValueError):
    """An argument value lies outside its documented domain."""


class StructuralError(ReplicaPlanError):
    """Inputs are structurally inconsistent (shape mismatch, empty replicator set, ...)."""


class ConnectivityError(ReplicaPlanError):
    """The network graph is not connected, so pairwise costs are undefined."""


class CapacityError(ReplicaPlanError):
    """A placement does not fit within server storage."""


class ConstraintError(ReplicaPlanError):
    """An operation would violate placement validity."""


class PreconditionError(ReplicaPlanError):
    """An operation was invoked in a state it does not accept."""


class TraceError(ReplicaPlanError):
    """A failure-trace file is malformed or internally inconsistent."""
