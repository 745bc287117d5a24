"""Bit-exact dataset loaders and class-incremental stream construction.

Loaders parse the raw distribution formats directly (MNIST IDX, CIFAR-10
binary batches, the Omniglot image tree) and never download anything; the
fetch script in scripts/ documents the source URLs. Features are f32 in
[0, 1], flattened; the only preprocessing is the 1/255 scaling (and stroke
inversion for Omniglot, where informative pixels must be the nonzero ones).
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DatasetMissingError, InvalidArgumentError

DATA_ROOT_ENV = "HEBBCL_DATA_ROOT"

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

CIFAR_RECORD_BYTES = 1 + 3072
CIFAR_BATCH_RECORDS = 10000

OMNIGLOT_SIDE = 105
OMNIGLOT_TRAIN_PER_CHAR = 15
OMNIGLOT_TEST_PER_CHAR = 5


@dataclass
class LabeledDataset:
    """Flat f32 feature vectors with integer labels and image shape metadata."""

    features: np.ndarray
    labels: np.ndarray
    image_shape: tuple[int, int, int]
    class_names: list[str] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        c, h, w = self.image_shape
        if self.features.ndim != 2 or self.features.shape[1] != c * h * w:
            raise InvalidArgumentError(
                f"features {self.features.shape} inconsistent with image shape {self.image_shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise InvalidArgumentError(
                f"labels shape {self.labels.shape} does not match {self.features.shape[0]} samples")
        if self.features.size and (self.features.min() < 0.0 or self.features.max() > 1.0):
            raise InvalidArgumentError("features must lie in [0, 1]")
        if self.labels.size and self.labels.min() < 0:
            raise InvalidArgumentError("labels must be nonnegative")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def classes(self) -> list[int]:
        return [int(c) for c in np.unique(self.labels)]


def _maybe_gzip_read(path: Path) -> bytes:
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def _parse_idx_images(data: bytes, path) -> np.ndarray:
    if len(data) < 16:
        raise DataFormatError(f"{path}: IDX header truncated at offset {len(data)} (need 16 bytes)")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise DataFormatError(
            f"{path}: bad image magic 0x{magic:08x} at offset 0 (expected 0x{IDX_IMAGE_MAGIC:08x})")
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise DataFormatError(
            f"{path}: payload ends at offset {len(data)}, expected {expected} "
            f"for {count} images of {rows}x{cols}")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols), (rows, cols)


def _parse_idx_labels(data: bytes, path) -> np.ndarray:
    if len(data) < 8:
        raise DataFormatError(f"{path}: IDX header truncated at offset {len(data)} (need 8 bytes)")
    magic, count = struct.unpack(">II", data[:8])
    if magic != IDX_LABEL_MAGIC:
        raise DataFormatError(
            f"{path}: bad label magic 0x{magic:08x} at offset 0 (expected 0x{IDX_LABEL_MAGIC:08x})")
    if len(data) != 8 + count:
        raise DataFormatError(
            f"{path}: payload ends at offset {len(data)}, expected {8 + count} for {count} labels")
    return np.frombuffer(data, dtype=np.uint8, offset=8)


def load_mnist(images_path: str | Path, labels_path: str | Path) -> LabeledDataset:
    """Parse an IDX image/label file pair (optionally gzipped) into a dataset."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    images, (rows, cols) = _parse_idx_images(_maybe_gzip_read(images_path), images_path)
    labels = _parse_idx_labels(_maybe_gzip_read(labels_path), labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{images_path} has {images.shape[0]} images but {labels_path} "
            f"has {labels.shape[0]} labels")
    return LabeledDataset(
        features=images.astype(np.float32) / 255.0,
        labels=labels.astype(np.int64),
        image_shape=(1, rows, cols),
        class_names=[str(d) for d in range(10)],
    )


CIFAR_CLASS_NAMES = ["airplane", "automobile", "bird", "cat", "deer",
                     "dog", "frog", "horse", "ship", "truck"]


def _parse_cifar_batch(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = path.read_bytes()
    if len(data) % CIFAR_RECORD_BYTES != 0:
        raise DataFormatError(
            f"{path}: size {len(data)} is not a multiple of the {CIFAR_RECORD_BYTES}-byte "
            f"record (first ragged record at offset {len(data) - len(data) % CIFAR_RECORD_BYTES})")
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise DataFormatError(
            f"{path}: label byte {labels[bad]} at offset {bad * CIFAR_RECORD_BYTES} out of range 0-9")
    features = records[:, 1:].astype(np.float32) / 255.0
    return features, labels


def load_cifar10(batch_dir: str | Path) -> tuple[LabeledDataset, LabeledDataset]:
    """Read the five binary training batches plus the test batch."""
    batch_dir = Path(batch_dir)
    train_files = [batch_dir / f"data_batch_{i}.bin" for i in range(1, 6)]
    test_file = batch_dir / "test_batch.bin"
    missing = [str(p) for p in train_files + [test_file] if not p.exists()]
    if missing:
        raise DatasetMissingError(f"missing CIFAR-10 batch files: {missing}")

    parts = [_parse_cifar_batch(p) for p in train_files]
    train = LabeledDataset(
        features=np.concatenate([f for f, _ in parts]),
        labels=np.concatenate([l for _, l in parts]),
        image_shape=(3, 32, 32),
        class_names=list(CIFAR_CLASS_NAMES),
    )
    tf, tl = _parse_cifar_batch(test_file)
    test = LabeledDataset(tf, tl, (3, 32, 32), list(CIFAR_CLASS_NAMES))
    return train, test


def _omniglot_alphabet_dirs(root: Path) -> list[Path]:
    split_dirs = [root / "images_background", root / "images_evaluation"]
    if any(d.is_dir() for d in split_dirs):
        dirs = []
        for d in split_dirs:
            if d.is_dir():
                dirs.extend(p for p in d.iterdir() if p.is_dir())
    else:
        dirs = [p for p in root.iterdir() if p.is_dir()]
    return sorted(dirs, key=lambda p: p.name)


def load_omniglot(root_dir: str | Path) -> tuple[LabeledDataset, LabeledDataset]:
    """Walk the alphabet/character/sample tree; alphabets become the classes.

    Per character the filename-sorted first 15 samples go to the training set
    and the last 5 to the test set. Pixels are inverted so strokes are 1 and
    background 0; otherwise the white background would dominate every
    distance and norm.
    """
    from PIL import Image

    root = Path(root_dir)
    if not root.is_dir():
        raise DatasetMissingError(f"Omniglot root {root} does not exist")
    alphabets = _omniglot_alphabet_dirs(root)
    if not alphabets:
        raise DataFormatError(f"{root}: no alphabet directories found")

    dim = OMNIGLOT_SIDE * OMNIGLOT_SIDE
    train_x, train_y, test_x, test_y = [], [], [], []
    for label, alphabet in enumerate(alphabets):
        characters = sorted((p for p in alphabet.iterdir() if p.is_dir()),
                            key=lambda p: p.name)
        if not characters:
            raise DataFormatError(f"{alphabet}: alphabet has no character directories")
        for char_dir in characters:
            samples = sorted(p for p in char_dir.iterdir() if p.is_file())
            if len(samples) != OMNIGLOT_TRAIN_PER_CHAR + OMNIGLOT_TEST_PER_CHAR:
                raise DataFormatError(
                    f"{char_dir}: expected {OMNIGLOT_TRAIN_PER_CHAR + OMNIGLOT_TEST_PER_CHAR} "
                    f"samples, found {len(samples)}")
            for i, sample in enumerate(samples):
                with Image.open(sample) as img:
                    gray = np.asarray(img.convert("L"), dtype=np.uint8)
                if gray.shape != (OMNIGLOT_SIDE, OMNIGLOT_SIDE):
                    raise DataFormatError(
                        f"{sample}: image is {gray.shape[1]}x{gray.shape[0]}, "
                        f"expected {OMNIGLOT_SIDE}x{OMNIGLOT_SIDE}")
                vec = 1.0 - gray.reshape(dim).astype(np.float32) / 255.0
                if i < OMNIGLOT_TRAIN_PER_CHAR:
                    train_x.append(vec)
                    train_y.append(label)
                else:
                    test_x.append(vec)
                    test_y.append(label)

    names = [a.name for a in alphabets]
    shape = (1, OMNIGLOT_SIDE, OMNIGLOT_SIDE)
    train = LabeledDataset(np.stack(train_x), np.array(train_y), shape, names)
    test = LabeledDataset(np.stack(test_x), np.array(test_y), shape, names)
    return train, test


@dataclass
class StreamSpec:
    """A class-incremental presentation order over a dataset.

    Iterating yields minibatches: bare feature arrays when labeled=False (the
    unsupervised trainers' view, no label accessor at all), or
    (features, labels) pairs when labeled=True. Every sample appears exactly
    once; all samples of one class precede the next class; batches never span
    a class boundary. Iteration is deterministic and repeatable.
    """

    dataset: LabeledDataset
    class_order: list[int]
    batch_size: int
    seed: int
    labeled: bool = False
    _per_class: dict[int, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        present = set(self.dataset.classes())
        ordered = list(self.class_order)
        if sorted(ordered) != sorted(present) or len(set(ordered)) != len(ordered):
            raise InvalidArgumentError(
                f"class_order {ordered} is not a permutation of present classes {sorted(present)}")
        self._per_class = {
            c: np.flatnonzero(self.dataset.labels == c) for c in ordered
        }

    @property
    def n_samples(self) -> int:
        return self.dataset.n_samples

    def __iter__(self):
        rng = np.random.default_rng(self.seed)
        feats, labels = self.dataset.features, self.dataset.labels
        for c in self.class_order:
            idx = self._per_class[c]
            idx = idx[rng.permutation(idx.size)]
            for start in range(0, idx.size, self.batch_size):
                chosen = idx[start:start + self.batch_size]
                if self.labeled:
                    yield feats[chosen], labels[chosen]
                else:
                    yield feats[chosen]


def make_stream(ds: LabeledDataset, class_order: list[int] | None = None,
                batch_size: int = 64, seed: int = 0,
                labeled: bool = False) -> StreamSpec:
    """Build a class-incremental stream; natural class order by default."""
    if class_order is None:
        class_order = ds.classes()
    return StreamSpec(ds, list(class_order), batch_size, seed, labeled)


# -- locating data on disk ---------------------------------------------------

FETCH_HINT = ("run scripts/fetch_data.py --dest <root>, or point "
              f"${DATA_ROOT_ENV} (or --data-root) at an existing copy")

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def default_data_root() -> Path:
    return Path(os.environ.get(DATA_ROOT_ENV, "data"))


def _find_idx_file(candidates: list[Path]) -> Path | None:
    for base in candidates:
        for path in (base, base.with_name(base.name + ".gz")):
            if path.is_file():
                return path
    return None


def load_dataset(name: str, data_root: str | Path | None = None
                 ) -> tuple[LabeledDataset, LabeledDataset]:
    """Load a named benchmark from the data root; raises with a fetch hint."""
    root = Path(data_root) if data_root else default_data_root()
    name = name.lower()
    if name == "mnist":
        base = root / "mnist"
        found = {}
        for key, fname in MNIST_FILES.items():
            path = _find_idx_file([base / fname, root / fname])
            if path is None:
                raise DatasetMissingError(
                    f"MNIST file {fname}[.gz] not found under {base} or {root}; {FETCH_HINT}")
            found[key] = path
        train = load_mnist(found["train_images"], found["train_labels"])
        test = load_mnist(found["test_images"], found["test_labels"])
        return train, test
    if name == "cifar10":
        for candidate in (root / "cifar10" / "cifar-10-batches-bin",
                          root / "cifar-10-batches-bin", root / "cifar10"):
            if candidate.is_dir() and (candidate / "data_batch_1.bin").exists():
                return load_cifar10(candidate)
        raise DatasetMissingError(
            f"CIFAR-10 binary batches not found under {root}; {FETCH_HINT}")
    if name == "omniglot":
        candidate = root / "omniglot"
        if candidate.is_dir() and _omniglot_alphabet_dirs(candidate):
            return load_omniglot(candidate)
        raise DatasetMissingError(
            f"Omniglot alphabet tree not found under {candidate}; {FETCH_HINT}")
    raise InvalidArgumentError(f"unknown dataset {name!r} (mnist, cifar10, omniglot)")
