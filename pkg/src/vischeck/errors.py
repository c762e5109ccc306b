"""Shared exception types."""

from __future__ import annotations


class ExpertUnavailable(Exception):
    """An expert backend failed (transport error, bad status, malformed reply).

    Aborts the assessment of the current response; callers should not treat
    this as a Fail verdict.
    """


class AnnotationMissing(Exception):
    """No scene annotation is known for the requested image id."""


class GeneratorUnavailable(ExpertUnavailable):
    """The text generator failed while extracting one aspect."""

    def __init__(self, aspect, message: str):
        self.aspect = aspect
        super().__init__(f"text generator failed for aspect {aspect.value}: {message}")


class EmptyDetections(ValueError):
    """A geometric check was invoked with an empty box list (callers must skip instead)."""


class EmptyBatch(ValueError):
    """A batch reduction was invoked with no items."""


class MixedImages(ValueError):
    """Preference pairing was given responses from different images."""


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration."""
