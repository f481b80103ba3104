"""Exception types shared across the toolkit."""
from __future__ import annotations


class PersonagenError(Exception):
    """Base class for everything raised deliberately by this package."""


class NameListError(PersonagenError):
    """Name list unusable: empty after filtering, missing attributes, etc."""


class DegenerateInputError(PersonagenError):
    """Zero-variance or otherwise statistically degenerate input."""


class CorpusError(PersonagenError):
    """Prompt corpus violates the template contract."""


class TrainingError(PersonagenError):
    """Training aborted; ``record`` carries the offending log record if any."""

    def __init__(self, message: str, record=None):
        super().__init__(message)
        self.record = record


class CheckpointError(PersonagenError):
    """Checkpoint unreadable or incompatible with the requested run."""


class IdentityFileError(PersonagenError):
    """Identity file unreadable or bound to a different base model."""


class RenderError(PersonagenError):
    """Rendering refused or failed."""


class StoryRenderError(RenderError):
    """One or more scenes of a story failed; ``failures`` maps index -> error."""

    def __init__(self, failures: list[tuple[int, Exception]]):
        self.failures = failures
        indices = ", ".join(str(i) for i, _ in failures)
        super().__init__(f"{len(failures)} scene(s) failed (index {indices})")


class EvalError(PersonagenError):
    """Evaluation grid or metric computation invalid."""
