"""The growing weight matrix and its encoder.

A Network is a dense row-per-neuron weight matrix with per-row frozen flags
and optional per-row class tags. Rows are only ever appended, never removed;
a frozen row is immutable for the rest of the network's life. Storage is a
preallocated capacity buffer so growth never reallocates, which keeps views
stable and appends O(D).

Single-writer: training calls need exclusive access. Reads (activations,
encode, save) are safe to share across threads.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import CapacityError, CheckpointFormatError, InvalidArgumentError

CHECKPOINT_MAGIC = b"HBCL"
CHECKPOINT_VERSION = 1

NO_CLASS = -1


def k_winners(a: np.ndarray, k: int) -> np.ndarray:
    """Zero all but the k largest entries of a 1-D vector.

    The survivors keep their original values and positions. Ties at the k-th
    value are broken by lowest index first, so the result is deterministic.
    """
    a = np.asarray(a)
    if a.ndim != 1:
        raise InvalidArgumentError(f"expected 1-D vector, got shape {a.shape}")
    if not 1 <= k <= a.shape[0]:
        raise InvalidArgumentError(f"k must be in [1, {a.shape[0]}], got {k}")
    if k == a.shape[0]:
        return a.copy()
    # Stable sort on the negated values keeps lower indices first among ties.
    top = np.argsort(-a, kind="stable")[:k]
    out = np.zeros_like(a)
    out[top] = a[top]
    return out


class Network:
    """Weight matrix with frozen flags, class tags and a seedable growth RNG."""

    def __init__(self, input_dim: int, n_neurons: int, init_scale: float,
                 seed: int, max_neurons: int | None = None):
        if input_dim <= 0:
            raise InvalidArgumentError(f"input_dim must be positive, got {input_dim}")
        if n_neurons <= 0:
            raise InvalidArgumentError(f"n_neurons must be positive, got {n_neurons}")
        if init_scale <= 0:
            raise InvalidArgumentError(f"init_scale must be positive, got {init_scale}")
        if max_neurons is None:
            max_neurons = 4 * n_neurons
        if max_neurons < n_neurons:
            raise InvalidArgumentError(
                f"max_neurons ({max_neurons}) below initial width ({n_neurons})")

        self.input_dim = input_dim
        self.init_scale = float(init_scale)
        self.max_neurons = max_neurons
        self.rng = np.random.default_rng(seed)

        self._n = n_neurons
        self._weights = np.zeros((max_neurons, input_dim), dtype=np.float32)
        self._frozen = np.zeros(max_neurons, dtype=bool)
        self._class_group = np.full(max_neurons, NO_CLASS, dtype=np.int32)
        self._weights[:n_neurons] = self._init_rows(n_neurons)

    def _init_rows(self, count: int) -> np.ndarray:
        # i.i.d. uniform in [0, init_scale); nonnegative like the pixel inputs.
        return self.rng.random((count, self.input_dim), dtype=np.float32) \
            * np.float32(self.init_scale)

    # -- views ------------------------------------------------------------

    @property
    def n_neurons(self) -> int:
        return self._n

    @property
    def weights(self) -> np.ndarray:
        """Live (R, D) view of the weight rows. Mutating it mutates the network."""
        return self._weights[:self._n]

    @property
    def frozen(self) -> np.ndarray:
        """Live (R,) boolean view of the frozen flags."""
        return self._frozen[:self._n]

    @property
    def class_group(self) -> np.ndarray:
        """Live (R,) int32 view of per-row class ids (NO_CLASS = untagged)."""
        return self._class_group[:self._n]

    @property
    def frozen_count(self) -> int:
        return int(self.frozen.sum())

    def unfrozen_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen)

    # -- encoder ----------------------------------------------------------

    def activations(self, x: np.ndarray) -> np.ndarray:
        """Raw activation vector W @ x."""
        x = np.asarray(x, dtype=np.float32)
        if x.shape != (self.input_dim,):
            raise InvalidArgumentError(
                f"input must have shape ({self.input_dim},), got {x.shape}")
        return self.weights @ x

    def encode(self, x: np.ndarray, k: int) -> np.ndarray:
        """Sparse code: k-winners applied to the activations."""
        return k_winners(self.activations(x), k)

    # -- mutation ---------------------------------------------------------

    def freeze_neuron(self, j: int) -> None:
        """Mark row j immutable. Idempotent."""
        if not 0 <= j < self._n:
            raise InvalidArgumentError(f"row {j} out of range [0, {self._n})")
        self._frozen[j] = True

    def add_neuron(self, class_id: int | None = None) -> int:
        """Append one freshly initialized unfrozen row; returns its index."""
        if self._n >= self.max_neurons:
            raise CapacityError(f"neuron cap reached ({self.max_neurons})")
        j = self._n
        self._weights[j] = self._init_rows(1)[0]
        self._frozen[j] = False
        self._class_group[j] = NO_CLASS if class_id is None else int(class_id)
        self._n += 1
        return j

    # -- persistence ------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the checkpoint format: magic, version, R, D, weights, flags, tags."""
        r, d = self._n, self.input_dim
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<II", CHECKPOINT_VERSION, r))
            f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(self.weights, dtype="<f4").tobytes())
            f.write(self.frozen.astype(np.uint8).tobytes())
            f.write(np.ascontiguousarray(self.class_group, dtype="<i4").tobytes())

    def fingerprint(self) -> str:
        """SHA-256 over dims, weight bytes, frozen flags and class tags."""
        h = hashlib.sha256()
        h.update(struct.pack("<II", self._n, self.input_dim))
        h.update(np.ascontiguousarray(self.weights, dtype="<f4").tobytes())
        h.update(self.frozen.astype(np.uint8).tobytes())
        h.update(np.ascontiguousarray(self.class_group, dtype="<i4").tobytes())
        return h.hexdigest()

    def __repr__(self):
        return (f"Network(R={self._n}, D={self.input_dim}, "
                f"frozen={self.frozen_count}, cap={self.max_neurons})")


def create_network(input_dim: int, n_neurons: int, init_scale: float = 0.01,
                   seed: int = 0, max_neurons: int | None = None) -> Network:
    """Fresh network with i.i.d. uniform [0, init_scale) rows, nothing frozen."""
    return Network(input_dim, n_neurons, init_scale, seed, max_neurons)


def save_checkpoint(net: Network, path: str | Path) -> None:
    net.save(path)


def _read_exact(f, n: int, offset: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointFormatError(
            f"truncated checkpoint: expected {n} bytes for {what} at offset {offset}, "
            f"got {len(data)}")
    return data


def load_checkpoint(path: str | Path, seed: int = 0,
                    max_neurons: int | None = None) -> Network:
    """Read a checkpoint back. The round trip is bit-exact.

    The growth RNG is not part of the format; `seed` reseeds it. `max_neurons`
    defaults to 4x the stored width so a loaded network can keep growing.
    """
    with open(path, "rb") as f:
        offset = 0
        magic = _read_exact(f, 4, offset, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointFormatError(
                f"bad magic at offset 0: expected {CHECKPOINT_MAGIC!r}, got {magic!r}")
        offset += 4
        version, = struct.unpack("<I", _read_exact(f, 4, offset, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointFormatError(
                f"unsupported version {version} at offset {offset}")
        offset += 4
        r, = struct.unpack("<I", _read_exact(f, 4, offset, "row count"))
        offset += 4
        d, = struct.unpack("<I", _read_exact(f, 4, offset, "input dim"))
        offset += 4
        if r == 0 or d == 0:
            raise CheckpointFormatError(
                f"degenerate dimensions R={r}, D={d} in header (offset 8)")

        weights = np.frombuffer(
            _read_exact(f, 4 * r * d, offset, "weights"), dtype="<f4").reshape(r, d)
        offset += 4 * r * d
        frozen_raw = np.frombuffer(
            _read_exact(f, r, offset, "frozen flags"), dtype=np.uint8)
        bad = np.flatnonzero(frozen_raw > 1)
        if bad.size:
            raise CheckpointFormatError(
                f"frozen flag byte at offset {offset + int(bad[0])} is "
                f"{int(frozen_raw[bad[0]])}, expected 0 or 1")
        offset += r
        groups = np.frombuffer(
            _read_exact(f, 4 * r, offset, "class groups"), dtype="<i4")
        offset += 4 * r
        trailing = f.read(1)
        if trailing:
            raise CheckpointFormatError(f"unexpected trailing bytes at offset {offset}")

    if max_neurons is None:
        max_neurons = 4 * r
    net = Network(d, r, init_scale=0.01, seed=seed, max_neurons=max(max_neurons, r))
    net.weights[:] = weights
    net.frozen[:] = frozen_raw.astype(bool)
    net.class_group[:] = groups
    return net
