from __future__ import annotations


class PreconditionError(ValueError):
    """An operation was called outside its domain (the message names the condition)."""


class FrameRejected(PreconditionError):
    """Compact-frame probes could not certify the uniformity constant."""


class EstimateRejected(PreconditionError):
    """A numerical estimate carries more integration error than it can absorb."""
