"""Training configuration: every hyperparameter plus gap-filling defaults.

All randomness flows from a single root seed; per-subsystem generators are
derived from it with the fixed offsets below so that runs are reproducible
bit for bit from the config echo alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import InvalidArgumentError

# Fixed offsets added to the root seed, one per RNG consumer.
SEED_NETWORK = 0
SEED_STREAM = 1
SEED_KMEANS = 2
SEED_EPOCH_SHUFFLE = 3


class FrozenWinnerPolicy(str, enum.Enum):
    """What to do when a frozen row wins the activation argmax.

    SKIP_UPDATE: frozen rows may win but receive no update (an input that
    already matches a stored pattern needs no new learning).
    EXCLUDE_FROM_ARGMAX: frozen rows never win; the best unfrozen row does.
    """

    SKIP_UPDATE = "skip_update"
    EXCLUDE_FROM_ARGMAX = "exclude_from_argmax"


@dataclass
class AblationFlags:
    """Switches for the four algorithm ingredients (variant grid columns H/F/E/K)."""

    hebbian: bool = True
    freezing: bool = True
    expansion: bool = True
    kwta: bool = True

    @classmethod
    def from_letters(cls, letters: str) -> "AblationFlags":
        """Build flags from a compact variant tag such as "hfek" or "hk"."""
        letters = letters.lower().strip()
        unknown = set(letters) - set("hfek")
        if unknown:
            raise InvalidArgumentError(f"unknown ablation letters: {sorted(unknown)}")
        return cls(
            hebbian="h" in letters,
            freezing="f" in letters,
            expansion="e" in letters,
            kwta="k" in letters,
        )

    def letters(self) -> str:
        out = ""
        for flag, ch in ((self.hebbian, "h"), (self.freezing, "f"),
                         (self.expansion, "e"), (self.kwta, "k")):
            if flag:
                out += ch
        return out


@dataclass
class TrainConfig:
    """Hyperparameters for both trainers.

    Defaults fill the gaps the method leaves open: epsilon/threshold/k were
    chosen for a 500-neuron MNIST net (5% sparsity) and are meant to be tuned
    on a validation split.

    init_scale is regime-dependent. The tiny default (0.01) suits supervised
    runs, where group-sum inference needs never-trained rows to vote with
    near-zero weight. Unsupervised streams want data-scale init (1.0 for
    unit-range pixels): fresh rows must win the activation argmax against
    already-trained ones or they are never recruited and a single row
    monopolizes learning. The service layer picks the right one when the
    request leaves init_scale unset.
    """

    epsilon: float = 0.05
    threshold: float = 0.1
    k_winners: int = 25
    batch_size: int = 64
    epochs: int = 3
    neurons_per_class: int = 64
    initial_neurons: int = 500
    max_neurons: int | None = None  # None -> 4 * initial_neurons
    init_scale: float = 0.01
    seed: int = 0
    ablation: AblationFlags = field(default_factory=AblationFlags)
    frozen_winner_policy: FrozenWinnerPolicy = FrozenWinnerPolicy.SKIP_UPDATE

    def __post_init__(self):
        if isinstance(self.ablation, dict):
            self.ablation = AblationFlags(**self.ablation)
        if isinstance(self.frozen_winner_policy, str):
            self.frozen_winner_policy = FrozenWinnerPolicy(self.frozen_winner_policy)
        for name in ("epsilon", "threshold", "init_scale"):
            value = getattr(self, name)
            if not value > 0:
                raise InvalidArgumentError(f"{name} must be > 0, got {value}")
        for name in ("k_winners", "batch_size", "epochs",
                     "neurons_per_class", "initial_neurons"):
            value = getattr(self, name)
            if not (isinstance(value, int) and value >= 1):
                raise InvalidArgumentError(f"{name} must be a positive integer, got {value}")
        if self.max_neurons is not None and self.max_neurons < self.initial_neurons:
            raise InvalidArgumentError(
                f"max_neurons ({self.max_neurons}) below initial_neurons ({self.initial_neurons})")

    @property
    def effective_max_neurons(self) -> int:
        return self.max_neurons if self.max_neurons is not None else 4 * self.initial_neurons

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frozen_winner_policy"] = self.frozen_winner_policy.value
        return d


def parse_config_file(path: str | Path) -> dict:
    """Parse a flat key=value config file into a dict of raw strings.

    Lines starting with '#' and blank lines are ignored; inline '#' comments
    are stripped. Raises InvalidArgumentError with the offending line number.
    """
    values: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise InvalidArgumentError(f"{path}:{lineno}: empty key")
        values[key] = value.strip()
    return values
