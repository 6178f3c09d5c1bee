"""Exception hierarchy shared across the engine.

Every operational failure raises a subclass of SchemqaError so callers
(CLI, service) can map the whole family to exit code 1 / HTTP 4xx-5xx
without enumerating modules.
"""

from __future__ import annotations


class SchemqaError(Exception):
    """Base class for all engine errors."""


# --- corpus ---------------------------------------------------------------


class MissingFile(SchemqaError):
    """A file referenced by a bundle manifest does not exist."""


class DuplicateId(SchemqaError):
    """Two documents or images in one bundle share an id."""


class MalformedManifest(SchemqaError):
    """The bundle manifest is not parseable or violates its schema."""


class InvalidChunkParams(SchemqaError):
    """window/stride combination outside the allowed range."""


# --- retrieval ------------------------------------------------------------


class EmptyCorpus(SchemqaError):
    """Retrieval requested against an index with no passages."""


class DimMismatch(SchemqaError):
    """Embedding dimensionality differs from the index dimensionality."""


class ProviderUnavailable(SchemqaError):
    """An embedding/rerank provider could not serve the request."""


# --- selection ------------------------------------------------------------


class CandidateParseFailure(SchemqaError):
    """No answer candidates could be parsed from the model response."""


class TemplateError(SchemqaError):
    """A prompt template is missing or leaves a placeholder unbound."""


# --- backends -------------------------------------------------------------


class BackendError(SchemqaError):
    """Generic model-backend failure."""


class FixtureMiss(BackendError):
    """Strict scripted backend had no fixture for (kind, key)."""


class RecordConflict(BackendError):
    """Recording produced two different responses for the same fixture key."""


class HttpError(BackendError):
    """HTTP backend received a non-retryable error response."""


class Timeout(BackendError):
    """HTTP backend exhausted its retry budget."""


# --- orchestrator / tools -------------------------------------------------


class ToolNotFound(SchemqaError):
    """A ReAct action named a tool that is not registered."""


# --- memory ---------------------------------------------------------------


class StorageFailure(SchemqaError):
    """A memory store could not persist or load its records."""


class NotAccepted(SchemqaError):
    """Promotion requested for a turn whose answer was not accepted."""


class UnknownTurn(SchemqaError):
    """Promotion requested for a session turn that does not exist."""


# --- metrics --------------------------------------------------------------


class EmptyReference(SchemqaError):
    """A reference-normalized metric received an empty reference."""


class LengthMismatch(SchemqaError):
    """Paired prediction/gold lists differ in length."""


class InvalidBox(SchemqaError):
    """Bounding box with non-positive extent."""


# --- service / config -----------------------------------------------------


class ConfigError(SchemqaError):
    """Engine configuration is invalid or unreadable."""
