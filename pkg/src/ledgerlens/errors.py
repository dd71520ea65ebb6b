"""Exception hierarchy. Every error raised on purpose derives from LedgerLensError."""


class LedgerLensError(Exception):
    pass


# imaging
class DimensionError(LedgerLensError, ValueError):
    pass


class SingularTransformError(LedgerLensError, ValueError):
    pass


class DegenerateQuadError(LedgerLensError, ValueError):
    pass


# alignment
class NoFeaturesError(LedgerLensError, ValueError):
    pass


class InsufficientCorrespondencesError(LedgerLensError, ValueError):
    pass


class DegenerateConfigurationError(LedgerLensError, RuntimeError):
    pass


# segmentation
class HeaderNotFoundError(LedgerLensError, LookupError):
    pass


class SegmentationFailure(LedgerLensError, RuntimeError):
    pass


# ocr
class BackendUnavailableError(LedgerLensError, RuntimeError):
    pass


class ProtocolError(LedgerLensError, ValueError):
    pass


class InvalidCharactersError(LedgerLensError, ValueError):
    pass


# ingest / model / eval
class InvalidIdentifierError(LedgerLensError, ValueError):
    pass


class SchemaError(LedgerLensError, ValueError):
    pass


class InsufficientDataError(LedgerLensError, ValueError):
    pass


class ParameterError(LedgerLensError, ValueError):
    pass


class DomainError(LedgerLensError, ValueError):
    pass


class JoinError(LedgerLensError, KeyError):
    def __init__(self, missing_ids):
        self.missing_ids = list(missing_ids)
        shown = ", ".join(self.missing_ids[:10])
        more = "" if len(self.missing_ids) <= 10 else f" (+{len(self.missing_ids) - 10} more)"
        super().__init__(f"{len(self.missing_ids)} parcel(s) have no tract row: {shown}{more}")

    def __str__(self):
        return self.args[0]


class ConfigError(LedgerLensError, ValueError):
    pass
