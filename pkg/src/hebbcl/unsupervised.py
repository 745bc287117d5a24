"""Unsupervised trainer: winner-take-all Hebbian updates on a boundary-free stream.

Per minibatch, in order:
  1. each sample pulls its winning row toward itself (W_m += eps * (x - W_m)),
  2. every row touched this minibatch is divided by phi, the largest absolute
     weight in the whole matrix after the updates,
  3. unfrozen rows whose normalized squared distance to some batch sample falls
     below the threshold are frozen, and (expansion on, cap permitting) one
     fresh row is appended per freeze.

The trainer never sees labels or task boundaries; it consumes bare feature
batches. Samples are strictly sequential because each update changes the
argmax for the next one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .config import FrozenWinnerPolicy, TrainConfig
from .errors import CapacityError, InvalidArgumentError
from .network import Network


@dataclass
class TrainStats:
    """Telemetry accumulated across minibatches."""

    samples_seen: int = 0
    neurons_frozen_total: int = 0
    neurons_added_total: int = 0
    current_R: int = 0
    mean_delta_norm: float = 0.0
    _updates: int = 0

    def merge_batch(self, other: "TrainStats") -> None:
        total_updates = self._updates + other._updates
        if total_updates:
            self.mean_delta_norm = (
                self.mean_delta_norm * self._updates
                + other.mean_delta_norm * other._updates) / total_updates
        self._updates = total_updates
        self.samples_seen += other.samples_seen
        self.neurons_frozen_total += other.neurons_frozen_total
        self.neurons_added_total += other.neurons_added_total
        self.current_R = other.current_R

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("_updates")
        return d


def hebbian_step(net: Network, x: np.ndarray, epsilon: float,
                 policy: FrozenWinnerPolicy = FrozenWinnerPolicy.SKIP_UPDATE) -> int:
    """One winner-take-all update; returns the winning row index.

    Under SKIP_UPDATE every row may win but a frozen winner is left untouched;
    under EXCLUDE_FROM_ARGMAX only unfrozen rows compete. Ties break to the
    lowest index.
    """
    x = np.asarray(x, dtype=np.float32)
    a = net.activations(x)
    if policy is FrozenWinnerPolicy.EXCLUDE_FROM_ARGMAX:
        frozen = net.frozen
        if frozen.all():
            raise CapacityError("all neurons frozen; no eligible winner")
        a = np.where(frozen, -np.inf, a)
    m = int(np.argmax(a))
    if not net.frozen[m]:
        w = net.weights[m]
        w += np.float32(epsilon) * (x - w)
    return m


def normalize_updated(net: Network, touched_rows: Iterable[int]) -> float:
    """Divide the touched rows by phi, the max |w| over the entire matrix.

    Frozen rows contribute to phi but are never divided (they must stay
    bit-identical). phi == 0 (all-zero matrix) is a no-op. Returns phi.
    """
    touched = np.asarray(sorted(set(int(r) for r in touched_rows)), dtype=np.intp)
    if touched.size and net.frozen[touched].any():
        raise InvalidArgumentError("touched rows must all be unfrozen")
    phi = float(np.abs(net.weights).max()) if net.n_neurons else 0.0
    if phi == 0.0 or touched.size == 0:
        return phi
    net.weights[touched] /= np.float32(phi)
    return phi


def freeze_scan(net: Network, batch: np.ndarray, threshold: float,
                expand: bool = True) -> list[int]:
    """Freeze converged rows; optionally append one fresh row per freeze.

    A row converged when min_i ||W_j - x_i||^2 / ||x_i||_1 < threshold over the
    batch. Samples with zero l1 norm are skipped (the distance is undefined
    there). Only rows existing at call time are scanned; rows appended here are
    first scanned on the next call. Cap exhaustion quietly stops expansion.
    Returns the indices frozen by this call.
    """
    batch = np.asarray(batch, dtype=np.float32)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise InvalidArgumentError(f"batch must be a nonempty (B, D) array, got {batch.shape}")
    rows = net.unfrozen_indices()
    if rows.size == 0:
        return []

    l1 = np.abs(batch).sum(axis=1)
    usable = l1 > 0
    if not usable.any():
        return []
    x = batch[usable]
    x_l1 = l1[usable]

    w = net.weights[rows]
    # ||w - x||^2 expanded through one GEMM; clamp tiny negatives from rounding.
    d2 = (np.sum(w * w, axis=1)[:, None]
          + np.sum(x * x, axis=1)[None, :]
          - 2.0 * (w @ x.T))
    np.maximum(d2, 0.0, out=d2)
    min_dist = (d2 / x_l1[None, :]).min(axis=1)

    frozen_now = [int(j) for j in rows[min_dist < threshold]]
    for j in frozen_now:
        net.freeze_neuron(j)
        if expand and net.n_neurons < net.max_neurons:
            net.add_neuron()
    return frozen_now


def train_minibatch(net: Network, batch: np.ndarray, cfg: TrainConfig) -> TrainStats:
    """Run one minibatch through the update / normalize / freeze pipeline."""
    batch = np.asarray(batch, dtype=np.float32)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise InvalidArgumentError(f"batch must be a nonempty (B, D) array, got {batch.shape}")
    if batch.shape[1] != net.input_dim:
        raise InvalidArgumentError(
            f"batch dim {batch.shape[1]} does not match input_dim {net.input_dim}")

    stats = TrainStats(current_R=net.n_neurons)
    touched: set[int] = set()
    delta_norms = []
    if cfg.ablation.hebbian:
        for x in batch:
            a_before = None
            m = hebbian_step(net, x, cfg.epsilon, cfg.frozen_winner_policy)
            if not net.frozen[m]:
                touched.add(m)
                # delta before the update was (x - w_old); reconstruct from w_new:
                # w_new = w_old + eps*(x - w_old)  =>  x - w_old = (x - w_new)/(1 - eps)
                # cheaper and exact enough for telemetry: measure x - w_new scaled back.
                if cfg.epsilon != 1.0:
                    delta = (x - net.weights[m]) / np.float32(1.0 - cfg.epsilon)
                else:
                    delta = x - net.weights[m]
                delta_norms.append(float(np.linalg.norm(delta)))
    normalize_updated(net, touched)
    if cfg.ablation.freezing:
        frozen = freeze_scan(net, batch, cfg.threshold, expand=cfg.ablation.expansion)
        stats.neurons_frozen_total = len(frozen)
        stats.neurons_added_total = net.n_neurons - stats.current_R

    stats.samples_seen = batch.shape[0]
    stats.current_R = net.n_neurons
    if delta_norms:
        stats.mean_delta_norm = float(np.mean(delta_norms))
        stats._updates = len(delta_norms)
    return stats


def train_stream(net: Network, stream: Iterable[np.ndarray], cfg: TrainConfig,
                 stats_log: str | Path | IO[str] | None = None) -> TrainStats:
    """Single pass over a stream of unlabeled minibatches, in presentation order.

    `stream` must yield bare (B, D) feature arrays; labels never reach this
    function. When `stats_log` is given, one JSON record per minibatch is
    appended to it.
    """
    labeled = getattr(stream, "labeled", False)
    if labeled:
        raise InvalidArgumentError(
            "train_stream consumes unlabeled streams; build one with labeled=False")

    total = TrainStats(current_R=net.n_neurons)
    own_handle = isinstance(stats_log, (str, Path))
    log = open(stats_log, "w") if own_handle else stats_log
    try:
        for i, batch in enumerate(stream):
            delta = train_minibatch(net, batch, cfg)
            total.merge_batch(delta)
            if log is not None:
                record = {"minibatch": i, **delta.to_dict()}
                log.write(json.dumps(record) + "\n")
    finally:
        if own_handle and log is not None:
            log.close()
    return total
