"""Supervised class-incremental trainer and group-sum inference.

With labels available the freeze/expand machinery simplifies: each class gets
the currently unfrozen rows, trains them for EPOCHS passes with the same
winner-take-all rule (winner chosen among unfrozen rows only; the frozen ones
belong to earlier classes), then everything is frozen and n fresh rows are
appended for the next class.

Prediction sums raw activations within each class's row group and picks the
group with the largest total. No task id is ever consulted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SEED_EPOCH_SHUFFLE, FrozenWinnerPolicy, TrainConfig
from .errors import InvalidArgumentError, InvalidStateError
from .network import NO_CLASS, Network, k_winners
from .unsupervised import TrainStats, hebbian_step, normalize_updated


@dataclass
class ClassSchedule:
    """Ordered (class id, examples) pairs plus the per-class training knobs."""

    entries: list[tuple[int, np.ndarray]]
    epochs: int
    neurons_per_class: int

    def __post_init__(self):
        ids = [c for c, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError(f"duplicate class ids in schedule: {ids}")
        for c, examples in self.entries:
            if len(examples) == 0:
                raise InvalidArgumentError(f"class {c} has no training examples")


def schedule_from_dataset(features: np.ndarray, labels: np.ndarray,
                          class_order: list[int], cfg: TrainConfig) -> ClassSchedule:
    """Group a labeled training set into per-class example blocks."""
    labels = np.asarray(labels)
    entries = []
    for c in class_order:
        mask = labels == c
        if not mask.any():
            raise InvalidArgumentError(f"class {c} not present in the dataset")
        entries.append((int(c), np.asarray(features[mask], dtype=np.float32)))
    return ClassSchedule(entries, cfg.epochs, cfg.neurons_per_class)


def train_class(net: Network, examples: np.ndarray, class_id: int,
                cfg: TrainConfig) -> TrainStats:
    """Train the unfrozen rows on one class, then freeze all and expand.

    Tags every currently unfrozen row with `class_id`, runs cfg.epochs shuffled
    passes of winner-take-all updates restricted to unfrozen rows (normalizing
    touched rows after each minibatch), then freezes the whole matrix and
    appends cfg.neurons_per_class fresh rows. The freeze and the expansion are
    individually governed by the ablation switches.
    """
    examples = np.asarray(examples, dtype=np.float32)
    if examples.ndim != 2 or examples.shape[0] == 0:
        raise InvalidArgumentError(f"examples must be a nonempty (N, D) array, got {examples.shape}")
    unfrozen = net.unfrozen_indices()
    if unfrozen.size == 0:
        raise InvalidStateError("no unfrozen neurons left to train")
    net.class_group[unfrozen] = class_id

    stats = TrainStats(current_R=net.n_neurons)
    shuffle_rng = np.random.default_rng(cfg.seed + SEED_EPOCH_SHUFFLE + class_id)
    delta_norms = []
    if cfg.ablation.hebbian:
        for _ in range(cfg.epochs):
            order = shuffle_rng.permutation(examples.shape[0])
            for start in range(0, examples.shape[0], cfg.batch_size):
                batch_idx = order[start:start + cfg.batch_size]
                touched: set[int] = set()
                for x in examples[batch_idx]:
                    m = hebbian_step(net, x, cfg.epsilon,
                                     FrozenWinnerPolicy.EXCLUDE_FROM_ARGMAX)
                    touched.add(m)
                    if cfg.epsilon != 1.0:
                        delta = (x - net.weights[m]) / np.float32(1.0 - cfg.epsilon)
                        delta_norms.append(float(np.linalg.norm(delta)))
                normalize_updated(net, touched)
        stats.samples_seen = cfg.epochs * examples.shape[0]

    if cfg.ablation.freezing:
        newly_frozen = int((~net.frozen).sum())
        net.frozen[:] = True
        stats.neurons_frozen_total = newly_frozen
    if cfg.ablation.expansion:
        for _ in range(cfg.neurons_per_class):
            net.add_neuron()
        stats.neurons_added_total = cfg.neurons_per_class

    stats.current_R = net.n_neurons
    if delta_norms:
        stats.mean_delta_norm = float(np.mean(delta_norms))
        stats._updates = len(delta_norms)
    return stats


def train_sequence(net: Network, schedule: ClassSchedule, cfg: TrainConfig,
                   on_class_end=None) -> TrainStats:
    """Apply train_class per schedule entry, in order.

    The trailing rows appended after the final class stay in the network (and
    its checkpoints) but carry no class tag, so prediction ignores them.
    `on_class_end(net, class_id, stats_delta)` runs after each class when given.
    """
    if int((~net.frozen).sum()) != cfg.neurons_per_class:
        raise InvalidStateError(
            f"expected {cfg.neurons_per_class} unfrozen rows at sequence start, "
            f"found {int((~net.frozen).sum())}")
    total = TrainStats(current_R=net.n_neurons)
    for class_id, examples in schedule.entries:
        delta = train_class(net, examples, class_id, cfg)
        total.merge_batch(delta)
        if on_class_end is not None:
            on_class_end(net, class_id, delta)
    return total


def _group_matrix(net: Network) -> tuple[np.ndarray, np.ndarray]:
    """(sorted class ids, R x C indicator matrix), ignoring untagged rows."""
    tags = net.class_group
    classes = np.unique(tags[tags != NO_CLASS])
    if classes.size == 0:
        raise InvalidStateError("no class-tagged rows; train a supervised model first")
    indicator = (tags[:, None] == classes[None, :]).astype(np.float32)
    return classes, indicator


def predict(net: Network, x: np.ndarray, k_mask: int | None = None) -> int:
    """Class whose row group has the largest total activation.

    Scores use raw activations; pass `k_mask` to zero all but the k highest
    activations first (experimental scoring variant). Ties go to the lowest
    class id.
    """
    a = net.activations(x)
    if k_mask is not None:
        a = k_winners(a, k_mask)
    classes, indicator = _group_matrix(net)
    scores = a @ indicator
    return int(classes[int(np.argmax(scores))])


@dataclass
class AccuracyReport:
    """Pooled and (optionally) per-task class-incremental accuracy."""

    overall_accuracy_pct: float
    n_correct: int
    n_total: int
    per_task_accuracy_pct: list[float] = field(default_factory=list)
    task_mean_accuracy_pct: float | None = None
    task_partition: list[list[int]] = field(default_factory=list)


def evaluate_accuracy(net: Network, features: np.ndarray, labels: np.ndarray,
                      task_partition: list[list[int]] | None = None,
                      k_mask: int | None = None) -> AccuracyReport:
    """Prediction accuracy over a test set, never consulting task identity.

    When `task_partition` lists the class groups of each task (e.g. five
    two-class tasks), per-task accuracies over the corresponding test subsets
    and their unweighted mean are reported alongside the pooled accuracy.
    """
    features = np.asarray(features, dtype=np.float32)
    labels = np.asarray(labels)
    classes, indicator = _group_matrix(net)
    acts = features @ net.weights.T
    if k_mask is not None:
        acts = np.stack([k_winners(row, k_mask) for row in acts])
    scores = acts @ indicator
    preds = classes[np.argmax(scores, axis=1)]

    correct = preds == labels
    report = AccuracyReport(
        overall_accuracy_pct=100.0 * float(correct.mean()) if labels.size else 0.0,
        n_correct=int(correct.sum()),
        n_total=int(labels.size),
    )
    if task_partition is not None:
        for task_classes in task_partition:
            mask = np.isin(labels, task_classes)
            if not mask.any():
                report.per_task_accuracy_pct.append(0.0)
                continue
            report.per_task_accuracy_pct.append(100.0 * float(correct[mask].mean()))
        report.task_mean_accuracy_pct = float(np.mean(report.per_task_accuracy_pct))
        report.task_partition = [list(map(int, t)) for t in task_partition]
    return report


def paired_tasks(classes: list[int], task_size: int = 2) -> list[list[int]]:
    """Chunk a class order into consecutive tasks (split-benchmark protocol)."""
    return [list(classes[i:i + task_size]) for i in range(0, len(classes), task_size)]
