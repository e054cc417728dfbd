"""Linear encoder with a classification head and a normalised projection head."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .dataset import normalize_rows

PARAM_NAMES = ("encoder", "classifier", "classifier_bias", "projector")


@dataclass
class ToyModel:
    encoder: np.ndarray  # (D, H)
    classifier: np.ndarray  # (H, K)
    classifier_bias: np.ndarray  # (K,)
    projector: np.ndarray  # (H, P)

    @classmethod
    def init(cls, dim: int, num_classes: int, hidden_dim: int = 32, proj_dim: int = 16, rng=None) -> "ToyModel":
        """Random weights with ``projector o encoder`` as close to an isometry as the shapes allow.

        The k-NN graph is built on the projection, so at initialisation it
        sees the cosine geometry of the raw inputs rather than a distorted
        random image of it.
        """
        rng = np.random.default_rng(rng)
        encoder = _semi_orthogonal(dim, hidden_dim, rng)
        projector = encoder.T @ _semi_orthogonal(dim, proj_dim, rng)
        return cls(
            encoder,
            rng.standard_normal((hidden_dim, num_classes)) / np.sqrt(hidden_dim),
            np.zeros(num_classes),
            projector,
        )

    def params(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "ToyModel":
        return ToyModel(*(p.copy() for p in self.params().values()))

    @property
    def input_dim(self) -> int:
        return self.encoder.shape[0]

    @property
    def num_classes(self) -> int:
        return self.classifier.shape[1]


def _semi_orthogonal(rows, cols, rng):
    q, r = np.linalg.qr(rng.standard_normal((max(rows, cols), min(rows, cols))))
    q *= np.sign(np.diag(r))
    return q if rows >= cols else q.T


@dataclass
class ForwardCache:
    x: np.ndarray
    hidden: np.ndarray
    proj: np.ndarray
    z: np.ndarray


def forward(model: ToyModel, x):
    """Return ``(logits, z, cache)`` with ``z`` the unit-norm projection."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"expected inputs of shape (n, {model.input_dim}), got {x.shape}")
    hidden = x @ model.encoder
    logits = hidden @ model.classifier + model.classifier_bias
    proj = hidden @ model.projector
    z, _ = normalize_rows(proj)
    return logits, z, ForwardCache(x, hidden, proj, z)


def normalize_backward(proj, z, dz):
    """Gradient w.r.t. the unnormalised rows given the gradient w.r.t. ``z``."""
    norms = np.linalg.norm(proj, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    dproj = (dz - z * np.sum(z * dz, axis=1, keepdims=True)) / safe
    return np.where(norms > 0, dproj, 0.0)


def backward(model: ToyModel, cache: ForwardCache, dlogits=None, dz=None) -> dict:
    """Parameter gradients for upstream gradients on logits and/or ``z``."""
    grads = {name: np.zeros_like(p) for name, p in model.params().items()}
    dhidden = np.zeros_like(cache.hidden)
    if dlogits is not None:
        grads["classifier"] += cache.hidden.T @ dlogits
        grads["classifier_bias"] += dlogits.sum(axis=0)
        dhidden += dlogits @ model.classifier.T
    if dz is not None:
        dproj = normalize_backward(cache.proj, cache.z, dz)
        grads["projector"] += cache.hidden.T @ dproj
        dhidden += dproj @ model.projector.T
    grads["encoder"] += cache.x.T @ dhidden
    return grads


def sgd_step(model: ToyModel, grads: dict, lr: float) -> None:
    for name, g in grads.items():
        getattr(model, name)[...] -= lr * g


def predict_proba(model: ToyModel, x) -> np.ndarray:
    logits, _, _ = forward(model, x)
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def augment_embedding(x, jitter_sigma: float, rng) -> np.ndarray:
    """Additive isotropic Gaussian jitter; the identity when ``jitter_sigma`` is 0."""
    x = np.asarray(x, dtype=np.float64)
    if jitter_sigma < 0:
        raise ValueError("jitter_sigma must be >= 0")
    if jitter_sigma == 0:
        return x.copy()
    return x + jitter_sigma * rng.standard_normal(x.shape)


# binary persistence ------------------------------------------------------
#
# layout: b"NGCM" | u32 version | u32 count | count * (u16 name_len | name |
# u8 ndim | ndim * u64 shape | little-endian float64 payload)

MAGIC = b"NGCM"
FORMAT_VERSION = 1


def save_arrays(path, arrays: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", FORMAT_VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)) + encoded)
            fh.write(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_arrays(path) -> dict:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a model file (bad magic)")
    version, count = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    pos = 12
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + name_len].decode()
        pos += name_len
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        size = int(np.prod(shape, dtype=np.int64)) * 8
        if pos + size > len(data):
            raise ValueError(f"{path}: truncated array {name!r}")
        out[name] = np.frombuffer(data, dtype="<f8", count=size // 8, offset=pos).reshape(shape).copy()
        pos += size
    return out


def save_model(model: ToyModel, path) -> None:
    save_arrays(path, model.params())


def load_model(path) -> ToyModel:
    arrays = load_arrays(path)
    missing = [n for n in PARAM_NAMES if n not in arrays]
    if missing:
        raise ValueError(f"{path}: missing arrays {missing}")
    return ToyModel(*(arrays[n] for n in PARAM_NAMES))
