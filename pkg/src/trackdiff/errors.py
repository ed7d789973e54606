"""Exception hierarchy shared across the package."""


class TrackdiffError(Exception):
    """Base class for all trackdiff errors."""


# --- track / channel validation ---

class NonMonotonicTime(TrackdiffError):
    pass


class NonFinite(TrackdiffError):
    pass


class EmptyChannel(TrackdiffError):
    pass


class DuplicateChannel(TrackdiffError):
    pass


class GridTooSmall(TrackdiffError):
    pass


# --- metrics ---

class LengthMismatch(TrackdiffError):
    pass


class KOutOfRange(TrackdiffError):
    pass


class BandTooNarrow(TrackdiffError):
    pass


class NoSharedChannels(TrackdiffError):
    pass


class TypeMismatch(TrackdiffError):
    pass


class InsufficientLabels(TrackdiffError):
    pass


# --- compression ---

class KnotSpanError(TrackdiffError):
    pass


class SingularFit(TrackdiffError):
    pass


# --- store ---

class DuplicateTrackId(TrackdiffError):
    pass


class NotFound(TrackdiffError):
    pass


class CorruptArchive(TrackdiffError):
    pass


class ManifestMissing(TrackdiffError):
    pass


class IoFailure(TrackdiffError):
    pass


# --- service ---

class BindFailure(TrackdiffError):
    pass


class StoreOpenFailure(TrackdiffError):
    pass


# --- analysis / learn ---

class TargetNotFound(TrackdiffError):
    pass


class SingleClass(TrackdiffError):
    pass


class EmptyTrainSet(TrackdiffError):
    pass


class TooFewExamples(TrackdiffError):
    pass
