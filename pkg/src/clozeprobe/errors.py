"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class ClozeProbeError(Exception):
    """Base class for all toolkit errors."""


# --- templating ---------------------------------------------------------


class MissingTypeArgument(ClozeProbeError):
    """A prompt type requires a domain/range type label that was not supplied."""


class SurfaceCollision(ClozeProbeError):
    """A surface form (subject or type label) contains the mask placeholder."""


# --- constraints --------------------------------------------------------


class NetworkError(ClozeProbeError):
    """The constraint endpoint was unreachable or kept failing after retries."""


class EmptyConstraint(ClozeProbeError):
    """A property has no domain/range constraint statements at the source."""


class NoFallbackAvailable(ClozeProbeError):
    """All constraint sources are empty and no manual default covers the relation."""

    def __init__(self, relation_id: str, slot: str):
        self.relation_id = relation_id
        self.slot = slot
        super().__init__(f"no {slot} constraint for relation {relation_id!r} and no manual default")


class CorruptCache(ClozeProbeError):
    """Cache file could not be parsed. Treated as a miss by the cache itself."""


# --- corpus -------------------------------------------------------------


class UnreadableFile(ClozeProbeError):
    """Corpus/vocabulary file missing or unreadable."""


class SchemaMismatch(ClozeProbeError):
    """Required fields absent from corpus lines (raised only in strict mode)."""

    def __init__(self, path: str, line_numbers: list[int]):
        self.path = path
        self.line_numbers = line_numbers
        shown = ", ".join(str(n) for n in line_numbers[:10])
        more = "" if len(line_numbers) <= 10 else f" (+{len(line_numbers) - 10} more)"
        super().__init__(f"{path}: schema mismatch on lines {shown}{more}")


class MissingConstraint(ClozeProbeError):
    """A relation present in the triples has no resolved constraint set."""


# --- scorer client ------------------------------------------------------


class MaskCountError(ClozeProbeError):
    """Prompt text does not contain exactly one mask placeholder."""


class OversizedBatch(ClozeProbeError):
    """Batch exceeds the configured maximum request count."""


class EndpointUnavailable(ClozeProbeError):
    """Scoring endpoint unreachable after retries."""


class MalformedResponse(ClozeProbeError):
    """Scoring endpoint returned a payload that does not match the protocol."""


class BatchRejected(ClozeProbeError):
    """Endpoint rejected the batch; carries the ids it reported as failed."""

    def __init__(self, message: str, failed_ids: list[str]):
        self.failed_ids = failed_ids
        super().__init__(f"{message} (failed ids: {failed_ids})")


# --- probe generation ---------------------------------------------------


class EmptyCandidates(ClozeProbeError):
    """Completion strategy invoked with no candidate type labels."""


class SyntaxMismatch(ClozeProbeError):
    """Combined prompt construction given choices from different syntax families."""


class SinkFull(ClozeProbeError):
    """Probe sink cannot accept further shards."""


# --- metrics ------------------------------------------------------------


class EmptyGroup(ClozeProbeError):
    """A metric was asked to aggregate over zero records."""


class CoverageMismatch(ClozeProbeError):
    """Two record sets that must cover the same triples do not."""


class TooManySets(ClozeProbeError):
    """Consistency partition supports between 2 and 8 sets."""


# --- pipeline / CLI -----------------------------------------------------


class StageMismatch(ClozeProbeError):
    """A pipeline stage is missing artifacts a previous stage should have produced."""


class ConfigError(ClozeProbeError):
    """Run configuration is invalid or references missing paths."""
