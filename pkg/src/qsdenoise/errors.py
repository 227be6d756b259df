"""Exception hierarchy shared by all qsdenoise modules.

Every error raised on a contract violation subclasses QsdenoiseError so
callers (and the CLI exit-code mapping) can catch one base type.
"""


class QsdenoiseError(Exception):
    """Base class for all qsdenoise errors."""


# ---- image IO ----

class MalformedHeader(QsdenoiseError):
    """Header file is unreadable or misses a required field."""


class TruncatedData(QsdenoiseError):
    """Pixel byte count disagrees with the declared dimensions."""


class OutOfBounds(QsdenoiseError):
    """Patch coordinates fall outside the slice."""


class PatchTooLarge(QsdenoiseError):
    """Requested patch size exceeds the slice dimensions."""


# ---- similarity ----

class SizeMismatch(QsdenoiseError):
    """The two inputs do not have identical dimensions."""


class DegenerateRange(QsdenoiseError):
    """Intensity range has lo >= hi."""


class EmptyHistogram(QsdenoiseError):
    """Histogram holds zero total counts."""


class ZeroVariance(QsdenoiseError):
    """Pearson correlation is undefined for a constant input."""


class NonpositiveSigma(QsdenoiseError):
    """RBF bandwidth must be > 0."""


# ---- matcher ----

class DimensionMismatch(QsdenoiseError):
    """Slices being matched do not share dimensions."""


class EmptyTarget(QsdenoiseError):
    """The target volume set contains no slices."""


class EmptyInput(QsdenoiseError):
    """An operation that needs at least one element got none."""


class MalformedManifest(QsdenoiseError):
    """Pair-manifest file violates the qsmatch line format."""


class MissingVolume(QsdenoiseError):
    """A manifest record references a volume id that was not supplied."""


# ---- metrics ----

class NonpositiveMax(QsdenoiseError):
    """PSNR peak value must be > 0."""


class NonpositiveRange(QsdenoiseError):
    """SSIM dynamic range must be > 0."""


# ---- losses ----

class OutOfDomain(QsdenoiseError):
    """Discriminator output lies outside the open interval (0, 1)."""


class WeightOutOfRange(QsdenoiseError):
    """Pair weight lies outside [0, 1]."""


# ---- trainer ----

class EmptySet(QsdenoiseError):
    """Weighted pair set contains no pairs."""


class AllZeroWeights(QsdenoiseError):
    """Every pair weight is zero; the weighted mean is undefined."""


class Divergence(QsdenoiseError):
    """Training objective grew far above its initial value."""


class RankDeficient(QsdenoiseError):
    """Design matrix does not have full column rank."""


class ImageTooSmall(QsdenoiseError):
    """Image is smaller than the denoiser kernel."""


# ---- cli ----

class ConfigError(QsdenoiseError):
    """Run configuration is missing, malformed, or violates an invariant."""
