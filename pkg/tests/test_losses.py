import math

import numpy as np
import pytest

from qsdenoise.errors import OutOfDomain, SizeMismatch, WeightOutOfRange
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


def random_bundle(rng, shape=(8, 8)):
    return DisentangleBundle(*(rng.random(shape) for _ in range(7)))


def mid_outputs():
    return DiscriminatorOutputs(0.7, 0.4, 0.6, 0.3)


# ------------------------------------------------------------ l1


def test_l1_identical_is_zero(rng):
    a = rng.random((6, 6))
    assert l1_mean(a, a) == 0.0


def test_l1_constant_offset():
    assert l1_mean(np.zeros((3, 3)), np.full((3, 3), -4.0)) == 4.0


def test_l1_two_pixel_value():
    assert l1_mean(np.array([[1.0, -2.0]]), np.zeros((1, 2))) == 1.5


def test_l1_size_mismatch():
    with pytest.raises(SizeMismatch):
        l1_mean(np.zeros((2, 2)), np.zeros((2, 3)))


# ------------------------------------------------------------ adversarial


def test_adversarial_literal_form_at_one_over_e():
    v = 1.0 / math.e
    d = DiscriminatorOutputs(v, v, v, v)
    # log(1/e) = -1 for real terms, 1 - log(1/e) = 2 for fake terms
    assert adversarial_loss(d) == pytest.approx(2.0, abs=1e-12)


def test_adversarial_standard_form_at_half():
    d = DiscriminatorOutputs(0.5, 0.5, 0.5, 0.5)
    value = adversarial_loss(d, standard_gan_form=True)
    assert value == pytest.approx(4.0 * math.log(0.5), abs=1e-12)
    assert value == pytest.approx(-2.7726, abs=1e-4)


def test_discriminator_outputs_domain():
    with pytest.raises(OutOfDomain):
        DiscriminatorOutputs(0.0, 0.5, 0.5, 0.5)
    with pytest.raises(OutOfDomain):
        DiscriminatorOutputs(0.5, 1.0, 0.5, 0.5)


# ------------------------------------------------------------ components


def test_reconstruction_perfect_is_zero(rng):
    x_a, y = rng.random((4, 4)), rng.random((4, 4))
    b = DisentangleBundle(x_a, y, y, y, x_a, x_a, y)
    assert reconstruction_loss(b) == 0.0


def test_reconstruction_offset_one(rng):
    x_a, y = rng.random((4, 4)), rng.random((4, 4))
    b = DisentangleBundle(x_a, y, y, y, x_a + 1.0, x_a, y)
    assert reconstruction_loss(b) == pytest.approx(1.0, abs=1e-12)


def test_reconstruction_compositional(rng):
    b = random_bundle(rng)
    expected = l1_mean(b.x_a_hat, b.x_a) + l1_mean(b.y_hat, b.y)
    assert reconstruction_loss(b) == expected


def test_artifact_consistency_shared_artifact(rng):
    y = rng.random((4, 4))
    x_hat = rng.random((4, 4))
    artifact = rng.random((4, 4))
    b = DisentangleBundle(
        x_hat + artifact, y, x_hat, y, x_hat, y + artifact, y
    )
    assert artifact_consistency_loss(b) == pytest.approx(0.0, abs=1e-12)


def test_artifact_consistency_constant_gap(rng):
    y = rng.random((4, 4))
    x_hat = rng.random((4, 4))
    artifact = rng.random((4, 4))
    b = DisentangleBundle(
        x_hat + artifact, y, x_hat, y, x_hat, y + artifact + 2.0, y
    )
    assert artifact_consistency_loss(b) == pytest.approx(2.0, abs=1e-12)


def test_artifact_consistency_direct_recomputation(rng):
    b = random_bundle(rng)
    expected = float(np.mean(np.abs((b.x_a - b.x_hat) - (b.y_a_hat - b.y))))
    assert artifact_consistency_loss(b) == expected


def test_self_reduction(rng):
    b = random_bundle(rng)
    assert self_reduction_loss(b) == l1_mean(b.y_tilde, b.y)
    perfect = DisentangleBundle(
        b.x_a, b.y, b.x_hat, b.y_hat, b.x_a_hat, b.y_a_hat, b.y
    )
    assert self_reduction_loss(perfect) == 0.0
    shifted = DisentangleBundle(
        b.x_a, b.y, b.x_hat, b.y_hat, b.x_a_hat, b.y_a_hat, b.y + 3.0
    )
    assert self_reduction_loss(shifted) == pytest.approx(3.0, abs=1e-12)


def test_bundle_shape_mismatch(rng):
    imgs = [rng.random((4, 4)) for _ in range(6)]
    with pytest.raises(SizeMismatch):
        DisentangleBundle(*imgs, rng.random((4, 5)))


# ------------------------------------------------------------ total


def test_total_weight_zero_is_adversarial_exactly(rng):
    b = random_bundle(rng)
    d = mid_outputs()
    report = total_loss(b, d, LossWeights(), w=0.0)
    assert report.total == report.l_adv


def test_total_weight_one_equals_unweighted_composition(rng):
    b = random_bundle(rng)
    d = mid_outputs()
    lw = LossWeights(lambda_rec=20.0, lambda_art=20.0, lambda_self=20.0)
    r = total_loss(b, d, lw, w=1.0)
    unweighted = r.l_adv + 20.0 * r.l_rec + 20.0 * r.l_art + 20.0 * r.l_self
    assert r.total == pytest.approx(unweighted, abs=1e-12)


def test_total_half_weight_composition(rng):
    b = random_bundle(rng)
    d = mid_outputs()
    lw = LossWeights(20.0, 20.0, 20.0)
    r = total_loss(b, d, lw, w=0.5)
    assert r.total == pytest.approx(
        r.l_adv + 10.0 * (r.l_rec + r.l_art + r.l_self), abs=1e-12
    )


def test_total_weight_out_of_range(rng):
    b = random_bundle(rng)
    with pytest.raises(WeightOutOfRange):
        total_loss(b, mid_outputs(), LossWeights(), w=1.5)
    with pytest.raises(WeightOutOfRange):
        total_loss(b, mid_outputs(), LossWeights(), w=-0.1)


def test_linearity_in_weight(rng):
    b = random_bundle(rng)
    d = mid_outputs()
    lw = LossWeights(7.0, 3.0, 11.0)
    full = total_loss(b, d, lw, w=1.0)
    span = full.total - full.l_adv
    for w in (0.0, 0.25, 0.5, 1.0):
        r = total_loss(b, d, lw, w=w)
        assert r.total - r.l_adv == pytest.approx(w * span, abs=1e-12)


def test_report_reproduces_composition(rng):
    b = random_bundle(rng)
    lw = LossWeights(5.0, 9.0, 2.0)
    w = 0.3
    r = total_loss(b, mid_outputs(), lw, w=w)
    recomposed = r.l_adv + w * (
        lw.lambda_rec * r.l_rec + lw.lambda_art * r.l_art + lw.lambda_self * r.l_self
    )
    assert r.total == pytest.approx(recomposed, abs=1e-12)


def test_nonnegativity_of_l1_components(rng):
    for _ in range(20):
        b = random_bundle(rng)
        assert reconstruction_loss(b) >= 0.0
        assert artifact_consistency_loss(b) >= 0.0
        assert self_reduction_loss(b) >= 0.0


def test_permutation_consistency(rng):
    b = random_bundle(rng)
    perm = rng.permutation(64)

    def shuffle(img):
        return img.ravel()[perm].reshape(8, 8)

    pb = DisentangleBundle(*(shuffle(getattr(b, f)) for f in (
        "x_a", "y", "x_hat", "y_hat", "x_a_hat", "y_a_hat", "y_tilde"
    )))
    assert reconstruction_loss(pb) == pytest.approx(
        reconstruction_loss(b), abs=1e-12
    )
    assert artifact_consistency_loss(pb) == pytest.approx(
        artifact_consistency_loss(b), abs=1e-12
    )
    assert self_reduction_loss(pb) == pytest.approx(
        self_reduction_loss(b), abs=1e-12
    )


def test_batch_total_is_mean_of_item_totals(rng):
    lw = LossWeights(4.0, 6.0, 8.0)
    items = [
        (random_bundle(rng), mid_outputs(), w) for w in (0.2, 0.9, 1.0)
    ]
    reports = [total_loss(b, d, lw, w) for b, d, w in items]
    batch = batch_total_loss(items, lw)
    assert batch.total == pytest.approx(
        sum(r.total for r in reports) / 3.0, abs=1e-12
    )
    assert batch.l_rec == pytest.approx(
        sum(r.l_rec for r in reports) / 3.0, abs=1e-12
    )
    assert isinstance(batch, LossReport)
