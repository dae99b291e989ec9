"""Toolkit exception types."""


class CaleError(Exception):
    """Base class for all toolkit-specific errors."""


class CorpusError(CaleError):
    """Malformed corpus, taxonomy, or pair files (message carries file/line context)."""


class FormatError(CaleError):
    """Corrupt or truncated binary artifacts (embedding / adapter files)."""


class ConfigError(CaleError):
    """Invalid or unknown configuration keys/values."""
