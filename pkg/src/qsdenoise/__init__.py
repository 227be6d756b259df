"""Quasi-supervised patch pairing and denoising toolkit.

Pairs unpaired low-dose / normal-dose CT slices patch-by-patch under a
configurable similarity measure, records the scores as loss weights in
a plain-text manifest, and provides the numerics around that pipeline:
similarity measures, weighted disentanglement-loss algebra, image
quality metrics, classical baseline filters, and a desk-scale weighted
linear trainer with a closed-form oracle.
"""

from qsdenoise.backend import active_backend
from qsdenoise.baselines import (
    FreqFilterConfig,
    gaussian_lowpass_freq,
    median_filter_3x3,
)
from qsdenoise.imgio import (
    DatasetEntry,
    DatasetManifest,
    ImageVolume,
    Patch,
    extract_patch,
    load_volume,
    save_raw,
    tile_patches,
)
from qsdenoise.losses import (
    DisentangleBundle,
    DiscriminatorOutputs,
    LossReport,
    LossWeights,
    adversarial_loss,
    artifact_consistency_loss,
    batch_total_loss,
    l1_mean,
    reconstruction_loss,
    self_reduction_loss,
    total_loss,
)
from qsdenoise.matcher import (
    MatchConfig,
    PairManifest,
    PatchMatch,
    SliceMatch,
    build_manifest,
    match_patches,
    match_slices,
    nmi_histogram,
    read_manifest,
    truly_paired_scores,
    write_manifest,
)
from qsdenoise.metrics import mse, psnr, ssim
from qsdenoise.similarity import (
    JointHistogram,
    SimilarityMetric,
    entropy,
    joint_histogram,
    mutual_information,
    nmi,
    pearson,
    rbf,
    similarity,
    weight_from_score,
)
from qsdenoise.trainer import (
    LinearDenoiser,
    TrainConfig,
    WeightedPairSet,
    closed_form_weighted_ls,
    denoise,
    gd_train,
    pairs_from_manifest,
    weighted_mse_objective,
)

__version__ = "0.1.0"
