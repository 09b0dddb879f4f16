"""Exception hierarchy shared across the engine."""
from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""


class ValidationError(EngineError):
    """Input data violates a documented invariant or file schema."""


class StoreError(EngineError):
    """Persistence-layer failure, carries record context in the message."""


class ProviderError(EngineError):
    """A model provider call failed."""


class RetryableProviderError(ProviderError):
    """Transient provider failure; the caller may retry within its budget."""


class ContractViolationError(ProviderError):
    """A provider response broke the declared contract (bad enum, count, ...)."""
