"""Standard desk-scale synthetic benchmarks.

Two fixed setups shared by the test suite and the experiment scripts: the
main complementary-views benchmark (each view blind to a different pair of
unknown classes) and a smaller, noisier setup prone to epoch-to-epoch
oscillation. The learning rate here is a plain MLP rate; the TrainConfig
default of 5e-5 is an encoder-tuning rate and barely moves a small
from-scratch network in a few thousand steps.

Accuracy comparisons on the main benchmark read the k-means evaluation
source. With exactly coincident confusion-pair means, a view's pseudo-labels
can never separate its blind pair, and the cross-view pair loss plus the
consistency term drive both heads toward the coarsest common partition, so
head argmax cannot express the refinement that lives in the co-trained
projections. The oscillation setup keeps the head source: epoch-to-epoch
prediction churn is precisely what the consistency weight damps.
"""

from __future__ import annotations

from .losses import LossConfig
from .synthgen import SynthConfig
from .trainer import TrainConfig

BENCHMARK_LR = 1e-3


def benchmark_synth_config(seed: int = 0) -> SynthConfig:
    """8 known + 8 unknown classes, 200 each; two confusion pairs per view."""
    return SynthConfig(
        num_known_classes=8,
        num_unknown_classes=8,
        per_class_count=200,
        dim_view1=16,
        dim_view2=16,
        noise_sigma=1.0,
        confusion_pairs_view1=[(8, 9), (10, 11)],
        confusion_pairs_view2=[(12, 13), (14, 15)],
        test_fraction=0.15,
        seed=seed,
    )


def benchmark_train_config(seed: int = 0, views: str = "both") -> TrainConfig:
    return TrainConfig(
        seed=seed,
        batch_size=32,
        lr=BENCHMARK_LR,
        pretrain_epochs=3,
        train_epochs=15,
        loss=LossConfig(),
        k=8,
        eval_every=0,
        eval_source="kmeans",
        views=views,
    )


def oscillation_synth_config(seed: int = 0) -> SynthConfig:
    """Smaller and noisier; the views disagree on three pairs each."""
    return SynthConfig(
        num_known_classes=4,
        num_unknown_classes=8,
        per_class_count=100,
        dim_view1=8,
        dim_view2=8,
        noise_sigma=1.5,
        confusion_pairs_view1=[(4, 5), (6, 7), (8, 9)],
        confusion_pairs_view2=[(5, 6), (7, 8), (10, 11)],
        test_fraction=0.2,
        seed=seed,
    )


def oscillation_train_config(seed: int = 0, beta: float = 0.2) -> TrainConfig:
    return TrainConfig(
        seed=seed,
        batch_size=32,
        lr=BENCHMARK_LR,
        pretrain_epochs=3,
        train_epochs=31,
        loss=LossConfig(beta=beta),
        k=8,
        eval_every=1,
        views="both",
    )
