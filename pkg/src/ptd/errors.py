"""Exception types shared across the toolkit."""


class PtdError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PtdError):
    """Invalid configuration (bad descriptor table, bad arguments)."""


class WordLookupError(PtdError):
    """A descriptor word is not present in its category list."""

    def __init__(self, word: str, category: str):
        super().__init__(f"unknown word {word!r} in category {category!r}")
        self.word = word
        self.category = category


class FeatureFormatError(PtdError):
    """Feature file is malformed (bad magic, truncation, ragged rows...)."""


class ScoreError(PtdError):
    """A per-image score cannot be computed (degenerate input)."""


class TransportError(PtdError):
    """Generation backend unreachable after exhausting retries."""


class NumericalError(PtdError):
    """A numerical routine failed its validity checks."""
