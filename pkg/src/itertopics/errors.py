"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all itertopics errors."""


class EmptyVocabulary(PipelineError):
    """No term survived the document-frequency filters."""


class DimensionTooLarge(PipelineError):
    """Requested reduced dimension exceeds what the matrix supports."""


class MissingId(PipelineError):
    """An expected document id is absent from an embeddings file."""

    def __init__(self, doc_id: str):
        super().__init__(f"missing id: {doc_id!r}")
        self.doc_id = doc_id


class DuplicateId(PipelineError):
    """A document id occurs more than once where ids must be unique."""

    def __init__(self, doc_id: str):
        super().__init__(f"duplicate id: {doc_id!r}")
        self.doc_id = doc_id


class ExtraId(PipelineError):
    """An embeddings file contains an id that was not expected."""

    def __init__(self, doc_id: str):
        super().__init__(f"unexpected id: {doc_id!r}")
        self.doc_id = doc_id


class DimensionMismatch(PipelineError):
    """A row's width disagrees with the file header."""


class ParseError(PipelineError):
    """A line of an input file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TooFewPoints(PipelineError):
    """Not enough points for the requested neighborhood size."""


class InsufficientOverlap(PipelineError):
    """Two partitions share fewer than two document ids."""


class UniverseMismatch(PipelineError):
    """An operation requires two partitions over the same id set."""


class UniverseTooSmall(PipelineError):
    """Remaining documents cannot support another clustering round."""


class DegenerateRun(PipelineError):
    """The iteration cannot proceed (e.g. the topic count bottomed out)."""
