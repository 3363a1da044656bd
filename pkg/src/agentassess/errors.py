"""Exception types raised across the assessment harness.

Every error that callers are expected to catch is defined here so that
modules do not need to import each other just for exception handling.
"""

from __future__ import annotations


class AssessError(Exception):
    """Base class for all harness errors."""


# --- trace document errors ---------------------------------------------------


class MalformedRecord(AssessError):
    """A trace line is not a valid span record."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateSeq(AssessError):
    """Two records in one trace share a seq value."""

    def __init__(self, seq: int, line: int):
        super().__init__(f"line {line}: duplicate seq {seq}")
        self.seq = seq
        self.line = line


class NonMonotonicSeq(AssessError):
    """A record's seq is lower than an earlier record's seq."""

    def __init__(self, seq: int, line: int):
        super().__init__(f"line {line}: seq {seq} is not monotonically increasing")
        self.seq = seq
        self.line = line


class UnknownSeq(AssessError):
    """A span lookup referenced a seq that is not in the trace."""

    def __init__(self, seq: int):
        super().__init__(f"no span with seq {seq}")
        self.seq = seq


# --- scenario document errors ------------------------------------------------


class SchemaViolation(AssessError):
    """A structured document does not match its declared shape."""


class DanglingReference(SchemaViolation):
    """A contract entry references a tool, policy, or memory id that does not exist."""

    def __init__(self, kind: str, name: str):
        super().__init__(f"unknown {kind}: {name}")
        self.kind = kind
        self.name = name


class CyclicOrderConstraint(SchemaViolation):
    """The order-constraint graph contains a cycle."""

    def __init__(self, cycle: list[str]):
        super().__init__("order constraints form a cycle: " + " -> ".join(cycle))
        self.cycle = cycle


# --- simulation errors -------------------------------------------------------


class GuardrailDenied(AssessError):
    """An action was blocked by the policy layer."""


class SchemaError(AssessError):
    """Tool parameters failed schema validation."""


class ToolError(AssessError):
    """A tool behavior failed (unknown resource, injected fault, invalid transition)."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class UnknownTool(AssessError):
    """A call referenced a tool that is not in the registry."""

    def __init__(self, name: str):
        super().__init__(f"unknown tool: {name}")
        self.name = name


class UnknownSnapshot(AssessError):
    """reset() referenced a snapshot id that was never taken."""

    def __init__(self, snapshot_id: str):
        super().__init__(f"unknown snapshot: {snapshot_id}")
        self.snapshot_id = snapshot_id


class BadPath(AssessError):
    """A state path could not be resolved against the world."""

    def __init__(self, path: str):
        super().__init__(f"unresolvable state path: {path}")
        self.path = path


# --- agent script errors -----------------------------------------------------


class UnknownTarget(AssessError):
    """A failure injection referenced a step that is not in the script."""

    def __init__(self, target):
        super().__init__(f"no script step matching target: {target!r}")
        self.target = target


# --- metric input errors -----------------------------------------------------


class EmptyCaseList(AssessError):
    """A metric was asked to average over zero cases."""


# --- judge errors ------------------------------------------------------------


class BackendUnavailable(AssessError):
    """The judge backend could not be reached or is not configured."""


class UnparseableVerdict(AssessError):
    """The judge response could not be parsed after the repair retry."""

    def __init__(self, raw: str):
        super().__init__("judge response is not a valid verdict")
        self.raw = raw


class EmptyCard(AssessError):
    """An agent card declares no capabilities, so no audit can be generated."""


class WorkerTimeout(AssessError):
    """A capability test's worker exceeded its action budget."""

    def __init__(self, capability_id: str):
        super().__init__(f"worker exceeded budget on capability {capability_id}")
        self.capability_id = capability_id
