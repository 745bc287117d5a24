"""End-to-end behavior on real handwriting data at desk scale.

sklearn's bundled 8x8 digits are written out as IDX files so these runs
exercise the same loader -> stream -> trainer -> evaluation path the full
benchmarks use, just smaller. Expected values were measured once on the
pinned seeds and asserted with margin.
"""

import hashlib

import numpy as np
import pytest

from conftest import write_idx_pair
from hebbcl import (TrainConfig, create_network, evaluate_accuracy,
                    paired_tasks, schedule_from_dataset, train_sequence)
from hebbcl.service import handlers
from hebbcl.service.schemas import (AblateRequest, TrainSupervisedRequest,
                                    TrainUnsupervisedRequest)

sklearn_datasets = pytest.importorskip("sklearn.datasets")


@pytest.fixture(scope="module")
def digits_root(tmp_path_factory):
    """The bundled digits dataset, 75/25 split per class, in IDX files."""
    d = sklearn_datasets.load_digits()
    images = np.round(d.images * (255.0 / 16.0)).astype(np.uint8)
    labels = d.target.astype(np.uint8)
    train_idx, test_idx = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        cut = int(len(idx) * 0.75)
        train_idx.extend(idx[:cut])
        test_idx.extend(idx[cut:])
    root = tmp_path_factory.mktemp("digits") / "data"
    (root / "mnist").mkdir(parents=True)
    write_idx_pair(root / "mnist", images[np.array(train_idx)],
                   labels[np.array(train_idx)], "train")
    write_idx_pair(root / "mnist", images[np.array(test_idx)],
                   labels[np.array(test_idx)], "t10k")
    return root


def digits_arrays(root):
    from hebbcl import load_dataset

    return load_dataset("mnist", root)


class TestUnsupervisedPipeline:
    def test_stream_learns_clusterable_codes(self, digits_root, tmp_path):
        req = TrainUnsupervisedRequest(
            dataset={"name": "mnist", "data_root": str(digits_root)},
            config={"initial_neurons": 32, "k_winners": 8, "epsilon": 0.05,
                    "threshold": 0.1, "batch_size": 64, "seed": 0},
            checkpoint_path=str(tmp_path / "digits.ckpt"),
            eval_clusters=10, eval_knn_k=10)
        report = handlers.run_train_unsupervised(req).report
        # measured 68.5 / 21.6 on this seed; asserted with margin
        assert report.cluster_accuracy_pct >= 60.0
        assert report.knn_error_pct <= 30.0
        assert report.frozen_count > 0
        assert report.final_R > 32  # expansion happened
        assert report.final_R == 32 + report.frozen_count

    def test_ingredient_ablation_ordering(self, digits_root, tmp_path):
        resp = handlers.run_ablate(AblateRequest(
            dataset={"name": "mnist", "data_root": str(digits_root)},
            config={"initial_neurons": 16, "k_winners": 8, "epsilon": 0.05,
                    "threshold": 0.1, "batch_size": 64, "seed": 0},
            grid=["hfek", "hfk", "hfe"], n_clusters=10, knn_k=10,
            csv_path=str(tmp_path / "ablation.csv")))
        acc = {row.variant: row.report.cluster_accuracy_pct for row in resp.rows}
        # measured: hfek 62.3, hfk 50.9, hfe 38.8
        assert acc["hfek"] - acc["hfk"] >= 5.0, \
            f"expansion should matter: {acc}"
        assert acc["hfek"] - acc["hfe"] >= 10.0, \
            f"sparse codes should matter: {acc}"

    def test_no_expansion_keeps_width_fixed(self, digits_root, tmp_path):
        resp = handlers.run_ablate(AblateRequest(
            dataset={"name": "mnist", "data_root": str(digits_root)},
            config={"initial_neurons": 16, "k_winners": 8, "seed": 0},
            grid=["hfk"], n_clusters=5, knn_k=3,
            csv_path=str(tmp_path / "hfk.csv")))
        report = resp.rows[0].report
        assert report.final_R == 16
        assert report.frozen_count > 0


class TestSupervisedPipeline:
    def test_split_digits_accuracy(self, digits_root, tmp_path):
        resp = handlers.run_train_supervised(TrainSupervisedRequest(
            dataset={"name": "mnist", "data_root": str(digits_root)},
            config={"neurons_per_class": 16, "epochs": 3, "epsilon": 0.05,
                    "batch_size": 32, "seed": 0},
            checkpoint_path=str(tmp_path / "sup.ckpt")))
        report = resp.report
        assert report.final_R == 16 * 11
        assert report.frozen_count == 160
        assert len(report.per_task_accuracy_pct) == 5
        # measured 76.6 on this seed
        assert report.task_mean_accuracy_pct >= 65.0
        assert report.overall_accuracy_pct >= 65.0

    def test_forgetting_guard_with_and_without_freezing(self, digits_root):
        train, test = digits_arrays(digits_root)
        task1_mask = np.isin(test.labels, [0, 1])

        def run(freezing):
            cfg = TrainConfig(neurons_per_class=16, initial_neurons=16,
                              epochs=3, epsilon=0.05, batch_size=32, seed=0,
                              init_scale=0.01,
                              ablation={"hebbian": True, "freezing": freezing,
                                        "expansion": True, "kwta": True})
            net = create_network(64, 16, 0.01, seed=0, max_neurons=16 * 11)
            schedule = schedule_from_dataset(train.features, train.labels,
                                             list(range(10)), cfg)
            class0_rows = list(range(16))
            hashes = {}

            def snap(net_, class_id, _stats):
                h = hashlib.sha256()
                for j in class0_rows:
                    h.update(net_.weights[j].tobytes())
                hashes[class_id] = h.hexdigest()

            train_sequence(net, schedule, cfg, on_class_end=snap)
            acc = evaluate_accuracy(net, test.features[task1_mask],
                                    test.labels[task1_mask],
                                    task_partition=paired_tasks(list(range(10))))
            return hashes, acc.overall_accuracy_pct

        frozen_hashes, frozen_task1 = run(freezing=True)
        assert frozen_hashes[1] == frozen_hashes[9], \
            "class-0 rows must be bit-identical from task 1 through task 5"

        open_hashes, open_task1 = run(freezing=False)
        assert open_hashes[1] != open_hashes[9], \
            "without freezing the class-0 rows must drift"
        assert frozen_task1 - open_task1 >= 20.0, \
            f"freezing should protect task 1: {frozen_task1} vs {open_task1}"
