"""Hebbian continual learning with conditional freezing and dynamic expansion.

A single wide layer learns by pulling each sample's winning row toward the
input; converged rows freeze permanently (so nothing learned is ever
overwritten) and fresh rows are appended to keep capacity. Sparse k-winner
codes feed the clustering / k-NN evaluation harness, and a supervised variant
handles class-incremental classification by group-summed activations.
"""

from .config import AblationFlags, FrozenWinnerPolicy, TrainConfig
from .datasets import LabeledDataset, StreamSpec, load_cifar10, load_dataset, \
    load_mnist, load_omniglot, make_stream
from .errors import CapacityError, CheckpointFormatError, DataFormatError, \
    DatasetMissingError, HebbCLError, InvalidArgumentError, InvalidStateError
from .evaluation import EvalReport, KMeansResult, cluster_accuracy, kmeans, \
    knn_error, represent_dataset
from .network import Network, create_network, k_winners, load_checkpoint, \
    save_checkpoint
from .supervised import AccuracyReport, ClassSchedule, evaluate_accuracy, \
    paired_tasks, predict, schedule_from_dataset, train_class, train_sequence
from .unsupervised import TrainStats, freeze_scan, hebbian_step, \
    normalize_updated, train_minibatch, train_stream
from .visualization import render_grid, save_image, save_ppm, weight_to_image

__version__ = "0.1.0"
