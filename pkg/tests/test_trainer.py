import dataclasses
import io
import json

import numpy as np
import pytest

from ngc.dataset import SyntheticConfig, generate_synthetic
from ngc.losses import cross_entropy_loss
from ngc.model import ToyModel, forward, predict_proba
from ngc.propagation import PropagationParams, TemporalEnsemble
from ngc.selection import SelectionState
from ngc.trainer import (
    Hyper,
    TrainingError,
    TrainParams,
    corrected_label_error,
    fit,
    train_epoch,
    warmup,
)


@pytest.fixture(scope="module")
def small():
    cfg = SyntheticConfig(samples_per_class=40, num_ood=0, test_num_ood=0)
    return generate_synthetic(cfg)


def _hyper(**train):
    return Hyper(train=TrainParams(**train))


def test_warmup_zero_epochs_is_identity(small):
    m = ToyModel.init(small.dim, small.num_classes, rng=0)
    out = warmup(m, small, 0, 0.05, 64, np.random.default_rng(0))
    assert all(np.array_equal(a, b) for a, b in zip(m.params().values(), out.params().values()))
    with pytest.raises(ValueError):
        warmup(m, small, -1, 0.05, 64, np.random.default_rng(0))


def test_warmup_fits_clean_separable_data(small):
    m = ToyModel.init(small.dim, small.num_classes, rng=0)
    m = warmup(m, small, 10, 0.05, 64, np.random.default_rng(0))
    acc = np.mean(predict_proba(m, small.embeddings).argmax(axis=1) == small.true_labels)
    assert acc > 0.95


def test_warmup_loss_decreases_on_average(small):
    m = ToyModel.init(small.dim, small.num_classes, rng=0)
    losses = []
    for epoch in range(6):
        logits, _, _ = forward(m, small.embeddings)
        losses.append(cross_entropy_loss(logits, small.given_labels)[0])
        m = warmup(m, small, 1, 0.01, 32, np.random.default_rng(epoch))
    assert np.mean(np.diff(losses)) < 0
    assert losses[-1] < losses[0]


def test_zero_lr_leaves_model_but_selects(small):
    hyper = _hyper(lr=0.0)
    m = ToyModel.init(small.dim, small.num_classes, rng=1)
    te = TemporalEnsemble.zeros(small.num_samples, small.num_classes)
    res = train_epoch(m, small, te, SelectionState.empty(small.num_samples), hyper, np.random.default_rng(0), 1)
    assert all(np.array_equal(a, b) for a, b in zip(m.params().values(), res.model.params().values()))
    assert res.selection.selected.any()
    assert res.ensemble.step == 1


def test_clean_data_selected_noise_zero_after_one_epoch(small):
    res = fit(small, dataclasses.replace(_hyper(), train=TrainParams(epochs=1)), seed=0)
    assert res.log[0]["selected_noise_rate"] == 0.0
    assert res.log[0]["selected_count"] > 0


def test_epoch_report_is_reproducible(small):
    hyper = _hyper(epochs=3, warmup_epochs=1)
    a, b = io.StringIO(), io.StringIO()
    ra = fit(small, hyper, seed=5, log_stream=a)
    fit(small, hyper, seed=5, log_stream=b)
    assert a.getvalue() == b.getvalue()
    lines = a.getvalue().splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert {"epoch", "loss_ce", "loss_inst", "loss_subgraph", "selected_count", "selected_noise_rate"} <= set(first)
    assert ra.prototypes is not None
    c = io.StringIO()
    fit(small, hyper, seed=6, log_stream=c)
    assert c.getvalue() != a.getvalue()


def test_zero_epochs_gives_no_prototypes(small):
    res = fit(small, _hyper(epochs=0, warmup_epochs=1), seed=0)
    assert res.prototypes is None and res.log == []


def test_solver_failure_names_epoch(small):
    hyper = Hyper(propagation=PropagationParams(alpha=0.99, cg_tolerance=1e-15, cg_max_iters=1),
                  train=TrainParams(epochs=2, warmup_epochs=0))
    with pytest.raises(TrainingError, match="epoch 1"):
        fit(small, hyper, seed=0)


def test_noisy_labels_get_corrected():
    cfg = SyntheticConfig(samples_per_class=60, num_ood=30, sym_noise_level=0.5)
    ds = generate_synthetic(cfg)
    res = fit(ds, _hyper(epochs=10), seed=0)
    assert res.log[-1]["corrected_label_error"] < 0.1
    assert res.log[-1]["selected_label_noise_rate"] < 0.1
    assert res.initial_noise_rate == pytest.approx(ds.is_noisy().mean())


def test_corrected_label_error_ignores_ood():
    assert corrected_label_error([0, 1, 0, 1], [0, 0, -1, -1]) == 0.5


@pytest.mark.parametrize(
    "kwargs", [{"batch_size": 0}, {"lr": -1.0}, {"eta": 1.5}, {"ensemble_momentum": 1.0}, {"clean_rows_from": "x"}]
)
def test_train_params_validation(kwargs):
    with pytest.raises(ValueError):
        TrainParams(**kwargs).validate()
