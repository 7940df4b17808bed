"""Exception hierarchy shared across the toolkit."""


class MtxError(Exception):
    """Base class for all toolkit errors."""


class DatasetError(MtxError):
    """Malformed grid, field, or dataset file."""


class TraitError(MtxError):
    """Invalid trait, metric, or attribute mapping specification."""
