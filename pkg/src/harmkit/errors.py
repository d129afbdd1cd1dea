"""Shared exception types.

The CLI maps these onto process exit codes, so every pipeline stage raises
from this hierarchy instead of bare ValueError where the failure is one a
caller is expected to handle.
"""

from __future__ import annotations


class HarmkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(HarmkitError):
    """Invalid or missing configuration (exit code 2)."""


class DataValidationError(HarmkitError):
    """Malformed or inconsistent input data (exit code 3)."""


class ShortfallError(HarmkitError):
    """A balanced selection could not be satisfied (exit code 5).

    Carries the per-category deficit so callers (and the annotation API)
    can report exactly which categories are short and by how much.
    """

    def __init__(self, requested: int, counts: dict):
        self.requested = requested
        # category name -> available count, only for deficient categories
        self.counts = dict(counts)
        detail = ", ".join(f"{name}: {have}/{requested}"
                           for name, have in sorted(self.counts.items()))
        super().__init__(f"insufficient samples for m={requested} ({detail})")


class ProviderError(HarmkitError):
    """Base class for LLM provider failures (exit code 4)."""

    retryable = False


class AuthError(ProviderError):
    """Credential rejected; never retried."""


class RateLimitedError(ProviderError):
    """Provider signalled throttling; retried, surfaces after exhaustion."""

    retryable = True


class ProviderTimeout(ProviderError):
    """No response within the configured timeout."""

    retryable = True


class TransientProviderError(ProviderError):
    """5xx-class upstream failure; retried."""

    retryable = True


class MalformedResponseError(ProviderError):
    """Response did not match the expected wire shape."""


class ContentRefusedByProvider(ProviderError):
    """Provider-side safety system rejected the request outright."""
