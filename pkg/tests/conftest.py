"""Shared fixtures: synthetic data, fabricated dataset files, data discovery."""

import gzip
import os
import struct
from pathlib import Path

import numpy as np
import pytest

from hebbcl.datasets import DATA_ROOT_ENV


def make_blobs(n_classes=4, per_class=30, dim=36, active=6, proto_value=0.9,
               noise=0.05, seed=0):
    """Class-sorted synthetic patterns: sparse prototypes plus clipped jitter.

    Each class activates its own block of `active` pixels at `proto_value`;
    samples add Gaussian jitter and clip back to [0, 1]. Low noise keeps
    within-class samples tight enough for the freeze criterion to trigger.
    """
    assert n_classes * active <= dim
    rng = np.random.default_rng(seed)
    features, labels = [], []
    for c in range(n_classes):
        proto = np.zeros(dim, dtype=np.float32)
        proto[c * active:(c + 1) * active] = proto_value
        samples = proto + rng.normal(0.0, noise, size=(per_class, dim)).astype(np.float32)
        features.append(np.clip(samples, 0.0, 1.0))
        labels.append(np.full(per_class, c, dtype=np.int64))
    return np.concatenate(features), np.concatenate(labels)


def write_idx_pair(directory: Path, images: np.ndarray, labels: np.ndarray,
                   prefix: str, gzipped: bool = False):
    """Write an IDX image/label file pair; images are (N, H, W) uint8."""
    n, h, w = images.shape
    img_bytes = struct.pack(">IIII", 0x00000803, n, h, w) + images.tobytes()
    lbl_bytes = struct.pack(">II", 0x00000801, n) + labels.astype(np.uint8).tobytes()
    suffix = ".gz" if gzipped else ""
    img_path = directory / f"{prefix}-images-idx3-ubyte{suffix}"
    lbl_path = directory / f"{prefix}-labels-idx1-ubyte{suffix}"
    img_path.write_bytes(gzip.compress(img_bytes) if gzipped else img_bytes)
    lbl_path.write_bytes(gzip.compress(lbl_bytes) if gzipped else lbl_bytes)
    return img_path, lbl_path


def make_mnist_fixture_root(root: Path, n_classes=10, per_class=12, side=28,
                            seed=0, test_per_class=4):
    """A data root holding a tiny fabricated MNIST-format dataset.

    Digits are distinguishable blocky patterns so that training on them is
    actually learnable, not pure noise.
    """
    rng = np.random.default_rng(seed)
    mnist_dir = root / "mnist"
    mnist_dir.mkdir(parents=True, exist_ok=True)

    def render(c, count):
        images = np.zeros((count, side, side), dtype=np.uint8)
        r0, c0 = divmod(c, 4)
        top, left = 2 + r0 * 6, 2 + c0 * 6
        images[:, top:top + 5, left:left + 5] = 230
        jitter = rng.integers(0, 25, size=images.shape, dtype=np.uint8)
        return np.clip(images.astype(np.int32) + jitter, 0, 255).astype(np.uint8)

    def build(per):
        images = np.concatenate([render(c, per) for c in range(n_classes)])
        labels = np.repeat(np.arange(n_classes, dtype=np.uint8), per)
        return images, labels

    write_idx_pair(mnist_dir, *build(per_class), prefix="train")
    write_idx_pair(mnist_dir, *build(test_per_class), prefix="t10k")
    return root


@pytest.fixture()
def blob_data():
    return make_blobs()


@pytest.fixture()
def fixture_data_root(tmp_path):
    return make_mnist_fixture_root(tmp_path / "data")


def real_data_root():
    """The data root for full-scale runs, or None when absent."""
    root = Path(os.environ.get(DATA_ROOT_ENV, "data"))
    return root if root.is_dir() else None


def has_real_mnist():
    root = real_data_root()
    if root is None:
        return False
    base = root / "mnist"
    names = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte",
             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
    return all((base / n).exists() or (base / (n + ".gz")).exists() for n in names)


def has_real_cifar10():
    root = real_data_root()
    if root is None:
        return False
    return any((root / sub / "data_batch_1.bin").exists()
               for sub in ("cifar10/cifar-10-batches-bin", "cifar-10-batches-bin", "cifar10"))


def has_real_omniglot():
    root = real_data_root()
    if root is None:
        return False
    omni = root / "omniglot"
    return omni.is_dir() and any(omni.iterdir())
