import numpy as np
import pytest

from conftest import make_volume
from qsdenoise.errors import (
    AllZeroWeights,
    Divergence,
    EmptySet,
    ImageTooSmall,
    MissingVolume,
    RankDeficient,
)
from qsdenoise.matcher import PairManifest, PatchMatch
from qsdenoise.similarity import SimilarityMetric
from qsdenoise.trainer import (
    LinearDenoiser,
    TrainConfig,
    WeightedPairSet,
    closed_form_weighted_ls,
    denoise,
    gd_train,
    neighborhood_matrix,
    pairs_from_manifest,
    weighted_mse_objective,
)


def standard_fixture(seed=7, n=64, p=4):
    """Correlated noisy->clean pairs in [0,1] with random weights."""
    r = np.random.default_rng(seed)
    clean = r.random((n, p, p))
    noisy = np.clip(clean + r.normal(0, 0.1, (n, p, p)), 0, 1)
    return WeightedPairSet(noisy, clean, r.random(n))


def identity_kernel(k):
    kern = np.zeros((k, k))
    kern[k // 2, k // 2] = 1.0
    return LinearDenoiser(kernel=kern, bias=0.0)


# ------------------------------------------------------------ objective


def test_objective_zero_for_identity_on_equal_pairs(rng):
    x = rng.random((8, 4, 4))
    s = WeightedPairSet(x, x, np.full(8, 0.5))
    assert weighted_mse_objective(identity_kernel(3), s) == 0.0


def test_objective_all_zero_weights():
    x = np.zeros((2, 4, 4))
    s = WeightedPairSet(x, x, np.zeros(2))
    with pytest.raises(AllZeroWeights):
        weighted_mse_objective(identity_kernel(1), s)


def test_objective_empty_set():
    with pytest.raises(EmptySet):
        WeightedPairSet.from_pairs([])


def test_objective_single_pair_hand_quadratic():
    # one 2-pixel patch, k=1 kernel theta=(a, b):
    # J = w*[(a*x1+b-y1)^2 + (a*x2+b-y2)^2] / w
    a, b = 1.5, -0.25
    x1, x2, y1, y2 = 0.2, 0.8, 0.5, 0.1
    s = WeightedPairSet(
        np.array([[[x1, x2]]]), np.array([[[y1, y2]]]), np.array([0.7])
    )
    d = LinearDenoiser(kernel=np.array([[a]]), bias=b)
    expected = (a * x1 + b - y1) ** 2 + (a * x2 + b - y2) ** 2
    assert weighted_mse_objective(d, s) == pytest.approx(expected, abs=1e-15)


def test_objective_weight_scaling_by_two_is_exact():
    s = standard_fixture()
    doubled = WeightedPairSet(s.ld, s.nd, s.weights * 0.5)
    d = identity_kernel(3)
    # halving every weight leaves the weighted mean bit-identical
    assert weighted_mse_objective(d, s) == weighted_mse_objective(d, doubled)


# ------------------------------------------------------------ closed form


def test_closed_form_identity_data():
    s = standard_fixture()
    perfect = WeightedPairSet(s.ld, s.ld, s.weights)
    model = closed_form_weighted_ls(perfect, 3)
    assert np.allclose(model.kernel, identity_kernel(3).kernel, atol=1e-10)
    assert model.bias == pytest.approx(0.0, abs=1e-10)


def test_closed_form_duplicate_equals_doubled_weight(rng):
    x = rng.random((8, 4, 4))
    y = np.clip(x + rng.normal(0, 0.1, x.shape), 0, 1)
    w = np.full(8, 0.5)
    doubled = WeightedPairSet(
        np.concatenate([x, x[:1]]),
        np.concatenate([y, y[:1]]),
        np.concatenate([w, [0.5]]),
    )
    reweighted = WeightedPairSet(x, y, np.concatenate([[1.0], w[1:]]))
    a = closed_form_weighted_ls(doubled, 3).theta()
    b = closed_form_weighted_ls(reweighted, 3).theta()
    assert np.allclose(a, b, atol=1e-10)


def test_closed_form_normal_equation_residual():
    s = standard_fixture(seed=11)
    model = closed_form_weighted_ls(s, 3)
    from qsdenoise.trainer import _design

    a, b, wpix = _design(s, 3)
    residual = a.T @ (wpix * (a @ model.theta() - b))
    assert np.abs(residual).max() < 1e-8


def test_closed_form_rank_deficient():
    const = np.full((4, 4, 4), 0.5)
    s = WeightedPairSet(const, const, np.ones(4))
    with pytest.raises(RankDeficient):
        closed_form_weighted_ls(s, 3)


# ------------------------------------------------------------ gd training


def test_gd_identity_pairs_converge_to_identity():
    r = np.random.default_rng(3)
    x = r.random((32, 4, 4))
    s = WeightedPairSet(x, x, np.ones(32))
    model = gd_train(s, 1, TrainConfig(learning_rate=0.02, epochs=4000))
    assert abs(model.kernel[0, 0] - 1.0) < 1e-4
    assert abs(model.bias) < 1e-4


def test_gd_bias_absorbs_constant_shift():
    r = np.random.default_rng(4)
    x = r.random((32, 4, 4)) * 0.5
    s = WeightedPairSet(x, x + 0.25, np.ones(32))
    model = gd_train(s, 1, TrainConfig(learning_rate=0.02, epochs=4000))
    assert abs(model.kernel[0, 0] - 1.0) < 1e-4
    assert abs(model.bias - 0.25) < 1e-4


def test_gd_matches_closed_form_oracle():
    s = standard_fixture()
    star = closed_form_weighted_ls(s, 3)
    model = gd_train(s, 3, TrainConfig())
    assert np.abs(model.theta() - star.theta()).max() < 1e-6


def test_gd_equals_ols_when_all_weights_one():
    s = standard_fixture()
    uniform = WeightedPairSet(s.ld, s.nd, np.ones(len(s)))
    from qsdenoise.trainer import _design

    a, b, _ = _design(uniform, 3)
    ols = np.linalg.lstsq(a, b, rcond=None)[0]
    model = gd_train(uniform, 3, TrainConfig())
    assert np.abs(model.theta() - ols).max() < 1e-6


def test_gd_objective_non_increasing_at_default_rate():
    s = standard_fixture()
    _, history = gd_train(s, 3, TrainConfig(), return_history=True)
    for before, after in zip(history, history[1:]):
        assert after <= before + 1e-12 * max(1.0, before)


def test_gd_zero_weight_pair_has_no_influence_bit_for_bit():
    s = standard_fixture()
    weights = s.weights.copy()
    weights[5] = 0.0
    perturbed_nd = s.nd.copy()
    perturbed_nd[5] += 0.123  # change only the zero-weight pair's target
    a = gd_train(WeightedPairSet(s.ld, s.nd, weights), 3, TrainConfig())
    b = gd_train(WeightedPairSet(s.ld, perturbed_nd, weights), 3, TrainConfig())
    assert a.theta().tobytes() == b.theta().tobytes()


def test_gd_weight_rescaling_leaves_theta_nearly_unchanged():
    s = standard_fixture()
    halved = WeightedPairSet(s.ld, s.nd, s.weights * 0.5)
    a = closed_form_weighted_ls(s, 3).theta()
    b = closed_form_weighted_ls(halved, 3).theta()
    assert np.allclose(a, b, atol=1e-10)


def test_gd_divergence_detected():
    s = standard_fixture()
    with pytest.raises(Divergence):
        gd_train(s, 3, TrainConfig(learning_rate=1.0, epochs=200))


# ------------------------------------------------------------ denoise


def test_denoise_identity_kernel_is_identity(rng):
    img = rng.random((16, 16))
    assert np.array_equal(denoise(identity_kernel(3), img), img)


def test_denoise_box_kernel_on_constant(rng):
    box = LinearDenoiser(kernel=np.full((3, 3), 1.0 / 9.0), bias=0.0)
    img = np.full((8, 8), 0.6)
    assert np.allclose(denoise(box, img), 0.6, atol=1e-15)


def test_denoise_box_kernel_on_impulse():
    box = LinearDenoiser(kernel=np.full((3, 3), 1.0 / 9.0), bias=0.0)
    img = np.zeros((9, 9))
    img[4, 4] = 1.0
    out = denoise(box, img)
    expected = np.zeros((9, 9))
    expected[3:6, 3:6] = 1.0 / 9.0
    assert np.array_equal(out, expected)


def test_denoise_image_too_small():
    with pytest.raises(ImageTooSmall):
        denoise(identity_kernel(5), np.zeros((4, 4)))


def test_neighborhood_matrix_replicates_borders():
    img = np.arange(4.0).reshape(2, 2)
    rows = neighborhood_matrix(img, 3)
    # top-left pixel neighborhood under replicate padding
    assert np.array_equal(rows[0], [0, 0, 1, 0, 0, 1, 2, 2, 3])


# ------------------------------------------------------------ manifest


def test_pairs_from_manifest_extracts_and_normalizes(rng):
    data = np.floor(rng.random((2, 16, 16)) * 100)
    ld = make_volume("ldv", data, lo=0.0, hi=100.0)
    nd = make_volume("ndv", data / 2.0, lo=0.0, hi=50.0)
    metric = SimilarityMetric.nmi_metric()
    rec = PatchMatch("ldv", 0, 4, 8, "ndv", 1, 2, 6, 8, metric, 0.9, 0.9)
    manifest = PairManifest(
        p=8, stride=8, metric=metric, threshold=0.1, top_k=1, records=(rec,)
    )
    pairs = pairs_from_manifest(manifest, {"ldv": ld, "ndv": nd})
    assert len(pairs) == 1
    assert pairs.weights[0] == 0.9
    assert np.array_equal(pairs.ld[0], data[0, 4:12, 8:16] / 100.0)
    assert np.array_equal(pairs.nd[0], data[1, 2:10, 6:14] / 2.0 / 50.0)
    with pytest.raises(MissingVolume):
        pairs_from_manifest(manifest, {"ldv": ld})
