import numpy as np
import pytest

from ngc.losses import Batch, LossParams, total_loss
from ngc.model import (
    ToyModel,
    augment_embedding,
    backward,
    forward,
    load_arrays,
    load_model,
    predict_proba,
    save_arrays,
    save_model,
    sgd_step,
)


def test_identity_model_passes_unit_input_through():
    m = ToyModel(np.eye(3), np.zeros((3, 2)), np.zeros(2), np.eye(3))
    x = np.array([[0.6, 0.8, 0.0]])
    _, z, _ = forward(m, x)
    assert np.allclose(z, x)


def test_zero_weights_give_uniform_softmax():
    m = ToyModel(np.zeros((4, 5)), np.zeros((5, 3)), np.zeros(3), np.zeros((5, 2)))
    assert np.allclose(predict_proba(m, np.ones((2, 4))), 1 / 3)
    _, z, _ = forward(m, np.ones((2, 4)))
    assert np.all(z == 0)


def test_rows_independent_of_batch(rng):
    m = ToyModel.init(6, 3, rng=rng)
    x = rng.standard_normal((5, 6))
    logits, z, _ = forward(m, x)
    for i in range(5):
        li, zi, _ = forward(m, x[i:i + 1])
        assert np.allclose(li[0], logits[i]) and np.allclose(zi[0], z[i])
    with pytest.raises(ValueError):
        forward(m, np.ones((2, 5)))


def test_init_is_isometric_when_shapes_allow(rng):
    m = ToyModel.init(16, 4, hidden_dim=32, proj_dim=16, rng=rng)
    pe = m.encoder @ m.projector
    assert np.allclose(pe.T @ pe, np.eye(16), atol=1e-12)


def test_augment_embedding(rng):
    x = rng.standard_normal((4, 3))
    assert np.array_equal(augment_embedding(x, 0.0, rng), x)
    a = augment_embedding(x, 0.5, np.random.default_rng(9))
    b = augment_embedding(x, 0.5, np.random.default_rng(9))
    assert np.array_equal(a, b)
    big = np.zeros((20000, 5))
    sq = np.sum((augment_embedding(big, 0.3, rng) - big) ** 2, axis=1).mean()
    assert sq == pytest.approx(5 * 0.09, rel=0.03)
    with pytest.raises(ValueError):
        augment_embedding(x, -1.0, rng)


def _objective(model, xa, xb, labels, selected, params):
    logits, za, _ = forward(model, xa)
    _, zb, _ = forward(model, xb)
    total, *_ = total_loss(Batch(np.vstack([za, zb]), labels, selected, logits), params)
    return total


@pytest.mark.parametrize("seed", range(5))
def test_parameter_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    model = ToyModel.init(4, 3, hidden_dim=5, proj_dim=3, rng=rng)
    model.classifier_bias[...] = rng.standard_normal(3)
    xa, xb = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
    labels, selected = rng.integers(0, 3, 6), rng.random(6) < 0.7
    params = LossParams(tau1=0.5, tau2=0.8)

    logits, za, ca = forward(model, xa)
    _, zb, cb = forward(model, xb)
    _, _, dz, dlogits = total_loss(Batch(np.vstack([za, zb]), labels, selected, logits), params)
    grads = backward(model, ca, dlogits=dlogits, dz=dz[:6])
    for name, g in backward(model, cb, dz=dz[6:]).items():
        grads[name] += g

    for name, p in model.params().items():
        numeric = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + 1e-5
            up = _objective(model, xa, xb, labels, selected, params)
            p[idx] = old - 1e-5
            down = _objective(model, xa, xb, labels, selected, params)
            p[idx] = old
            numeric[idx] = (up - down) / 2e-5
        err = np.linalg.norm(grads[name] - numeric) / max(np.linalg.norm(grads[name]) + np.linalg.norm(numeric), 1e-12)
        assert err < 1e-4, name


def test_sgd_step_zero_lr_is_noop(rng):
    m = ToyModel.init(3, 2, rng=rng)
    before = m.copy()
    grads = {k: np.ones_like(v) for k, v in m.params().items()}
    sgd_step(m, grads, 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(m.params().values(), before.params().values()))
    sgd_step(m, grads, 0.1)
    assert np.allclose(m.encoder, before.encoder - 0.1)


def test_model_file_round_trip(tmp_path, rng):
    m = ToyModel.init(5, 3, hidden_dim=7, proj_dim=4, rng=rng)
    save_model(m, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    for a, b in zip(m.params().values(), back.params().values()):
        assert a.tobytes() == b.tobytes()
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw[:4] == b"NGCM" and raw[4:8] == (1).to_bytes(4, "little")


def test_model_file_errors(tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + bytes(8))
    with pytest.raises(ValueError, match="magic"):
        load_arrays(tmp_path / "bad.bin")
    save_arrays(tmp_path / "a.bin", {"encoder": np.ones((2, 2))})
    with pytest.raises(ValueError, match="missing"):
        load_model(tmp_path / "a.bin")
    data = (tmp_path / "a.bin").read_bytes()
    (tmp_path / "t.bin").write_bytes(data[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_arrays(tmp_path / "t.bin")
    (tmp_path / "v.bin").write_bytes(b"NGCM" + (2).to_bytes(4, "little") + bytes(4))
    with pytest.raises(ValueError, match="version"):
        load_arrays(tmp_path / "v.bin")
