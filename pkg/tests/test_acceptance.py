"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest -v -s tests/test_acceptance.py`. Criteria 1-5 and 7 need the
real benchmark datasets under $HEBBCL_DATA_ROOT (see scripts/fetch_data.py);
without them they skip and say so. Criterion 6's property battery always runs
and must finish inside its 60-second budget.
"""

import hashlib
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import (has_real_cifar10, has_real_mnist, has_real_omniglot,
                      make_blobs, make_mnist_fixture_root, real_data_root)
from hebbcl import (AblationFlags, TrainConfig, cluster_accuracy, create_network,
                    evaluate_accuracy, hebbian_step, k_winners, kmeans, knn_error,
                    load_checkpoint, load_dataset, make_stream, normalize_updated,
                    paired_tasks, predict, represent_dataset, schedule_from_dataset,
                    train_sequence, train_stream, freeze_scan)
from hebbcl.service import handlers
from hebbcl.service.schemas import TrainUnsupervisedRequest
from oracles import (exhaustive_min_sse, naive_cluster_accuracy, naive_knn_error)

UNSUP_DEFAULTS = dict(epsilon=0.05, threshold=0.1, k_winners=25, batch_size=64,
                      initial_neurons=500, init_scale=handlers.UNSUP_INIT_SCALE)
SUP_MNIST = dict(neurons_per_class=64, epochs=3, epsilon=0.05, batch_size=64,
                 init_scale=handlers.SUP_INIT_SCALE)
SUP_CIFAR = dict(neurons_per_class=200, epochs=3, epsilon=0.05, batch_size=64,
                 init_scale=handlers.SUP_INIT_SCALE)

_c6_seconds: dict[str, float] = {}


@contextmanager
def criterion(num, title):
    start = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"\n[criterion {num}] FAIL - {title}")
        raise
    else:
        print(f"\n[criterion {num}] PASS - {title} "
              f"({time.perf_counter() - start:.1f}s)")


@contextmanager
def budgeted(key):
    start = time.perf_counter()
    yield
    _c6_seconds[key] = time.perf_counter() - start


def require_data(flag, what):
    if not flag:
        pytest.skip(f"{what} not present under $HEBBCL_DATA_ROOT; "
                    "see scripts/fetch_data.py")


def _unsup_run(train, seed, ablation=None, max_neurons=None):
    cfg = TrainConfig(seed=seed, ablation=ablation or AblationFlags(),
                      max_neurons=max_neurons, **UNSUP_DEFAULTS)
    net = create_network(train.input_dim, cfg.initial_neurons, cfg.init_scale,
                         seed, cfg.effective_max_neurons)
    stream = make_stream(train, None, cfg.batch_size, seed + 1)
    t0 = time.perf_counter()
    train_stream(net, stream, cfg)
    return net, cfg, time.perf_counter() - t0


def _representation_scores(net, cfg, train, test, clusters, seed):
    k = cfg.k_winners if cfg.ablation.kwta else None
    test_reps = represent_dataset(net, test.features, k)
    train_reps = represent_dataset(net, train.features, k)
    scores = {}
    for n_clusters in clusters:
        km = kmeans(test_reps, n_clusters, seed=seed + 2)
        scores[n_clusters] = cluster_accuracy(km.assignments, test.labels)
    err = knn_error(train_reps, train.labels, test_reps, test.labels, 10)
    return scores, err


@pytest.mark.skipif(not has_real_mnist(), reason="criterion 1 SKIP: real MNIST missing")
def test_c1_unsupervised_mnist():
    with criterion(1, "unsupervised MNIST: cluster acc >=72% @50 / >=68% @25, "
                      "10-NN error <=9%, train <=15 min"):
        train, test = load_dataset("mnist", real_data_root())
        results = []
        for seed in (0, 1, 2):
            net, cfg, train_s = _unsup_run(train, seed)
            assert train_s <= 900, f"seed {seed}: 60k stream took {train_s:.0f}s"
            scores, err = _representation_scores(net, cfg, train, test,
                                                 (50, 25), seed)
            results.append((scores[50], scores[25], err))
            print(f"  seed {seed}: acc50={scores[50]:.2f} acc25={scores[25]:.2f} "
                  f"knn={err:.2f} train={train_s:.0f}s")
        assert any(a50 >= 72.0 and a25 >= 68.0 and err <= 9.0
                   for a50, a25, err in results), f"no seed met all bars: {results}"


@pytest.mark.skipif(not has_real_omniglot(),
                    reason="criterion 2 SKIP (optional): real Omniglot missing")
def test_c2_unsupervised_omniglot():
    with criterion(2, "unsupervised Omniglot: cluster acc >=12% @100, "
                      "10-NN error <=78%, train <=30 min"):
        train, test = load_dataset("omniglot", real_data_root())
        net, cfg, train_s = _unsup_run(train, 0)
        assert train_s <= 1800, f"stream took {train_s:.0f}s"
        scores, err = _representation_scores(net, cfg, train, test, (100,), 0)
        print(f"  acc100={scores[100]:.2f} knn={err:.2f} train={train_s:.0f}s")
        assert scores[100] >= 12.0
        assert err <= 78.0


def _supervised_run(train, test, params, seed, freezing=True, snapshots=None):
    cfg = TrainConfig(seed=seed, initial_neurons=params["neurons_per_class"],
                      ablation=AblationFlags(freezing=freezing), **params)
    classes = train.classes()
    net = create_network(train.input_dim, cfg.neurons_per_class, cfg.init_scale,
                         seed, cfg.neurons_per_class * (len(classes) + 1))
    schedule = schedule_from_dataset(train.features, train.labels, classes, cfg)
    t0 = time.perf_counter()
    train_sequence(net, schedule, cfg, on_class_end=snapshots)
    elapsed = time.perf_counter() - t0
    report = evaluate_accuracy(net, test.features, test.labels,
                               task_partition=paired_tasks(classes))
    return net, report, elapsed


@pytest.mark.skipif(not has_real_mnist(), reason="criterion 3 SKIP: real MNIST missing")
def test_c3_supervised_split_mnist():
    with criterion(3, "split MNIST class-incremental accuracy >=88% "
                      "with 64 neurons/class, <=10 min"):
        train, test = load_dataset("mnist", real_data_root())
        _, report, elapsed = _supervised_run(train, test, SUP_MNIST, 0)
        print(f"  task_mean={report.task_mean_accuracy_pct:.2f} "
              f"overall={report.overall_accuracy_pct:.2f} train={elapsed:.0f}s")
        assert elapsed <= 600
        assert report.task_mean_accuracy_pct >= 88.0


@pytest.mark.skipif(not has_real_cifar10(), reason="criterion 4 SKIP: real CIFAR-10 missing")
def test_c4_supervised_split_cifar10():
    with criterion(4, "split CIFAR-10 class-incremental accuracy >=34% "
                      "with 200 neurons/class, <=45 min"):
        train, test = load_dataset("cifar10", real_data_root())
        _, report, elapsed = _supervised_run(train, test, SUP_CIFAR, 0)
        print(f"  task_mean={report.task_mean_accuracy_pct:.2f} "
              f"overall={report.overall_accuracy_pct:.2f} train={elapsed:.0f}s")
        assert elapsed <= 2700
        assert report.task_mean_accuracy_pct >= 34.0


@pytest.mark.skipif(not has_real_mnist(), reason="criterion 5 SKIP: real MNIST missing")
def test_c5_ablation_ordering_mnist():
    with criterion(5, "MNIST @10 clusters: full beats no-expansion by >=15 pts "
                      "and no-kwta by >=10 pts"):
        train, test = load_dataset("mnist", real_data_root())
        acc = {}
        for tag, flags in (("hfek", AblationFlags()),
                           ("hfk", AblationFlags(expansion=False)),
                           ("hfe", AblationFlags(kwta=False))):
            net, cfg, _ = _unsup_run(train, 0, ablation=flags)
            scores, _ = _representation_scores(net, cfg, train, test, (10,), 0)
            acc[tag] = scores[10]
            print(f"  {tag}: acc10={scores[10]:.2f}")
        assert acc["hfek"] - acc["hfk"] >= 15.0, acc
        assert acc["hfek"] - acc["hfe"] >= 10.0, acc


# --- criterion 6: the property battery (no datasets, < 60 s total) ----------

def test_c6a_frozen_immutability_1000_steps():
    with criterion("6a", "frozen rows bit-identical across 1000 random training steps"):
        with budgeted("6a"):
            rng = np.random.default_rng(0)
            net = create_network(16, 24, 1.0, seed=0, max_neurons=48)
            for j in range(8):
                net.freeze_neuron(j)
            frozen_bytes = {j: net.weights[j].tobytes() for j in range(8)}

            def check():
                for j, blob in frozen_bytes.items():
                    assert net.weights[j].tobytes() == blob, f"frozen row {j} changed"

            touched = set()
            for step in range(1000):
                x = rng.random(16).astype(np.float32)
                m = hebbian_step(net, x, epsilon=0.1)
                if not net.frozen[m]:
                    touched.add(m)
                if (step + 1) % 100 == 0:
                    normalize_updated(net, [j for j in touched if not net.frozen[j]])
                    touched.clear()
                    batch = rng.random((16, 16)).astype(np.float32)
                    for j in freeze_scan(net, batch, threshold=0.25):
                        frozen_bytes[j] = net.weights[j].tobytes()
                    check()
            check()
            assert len(frozen_bytes) > 8, "freeze scan never fired; test is too weak"


def test_c6b_k_winners_properties_1000_vectors():
    with criterion("6b", "k_winners idempotence, permutation equivariance, "
                         "sparsity <= k on 1000 random vectors"):
        with budgeted("6b"):
            rng = np.random.default_rng(1)
            for _ in range(1000):
                n = int(rng.integers(2, 60))
                a = rng.random(n).astype(np.float32)  # continuous: no ties
                k = int(rng.integers(1, n + 1))
                out = k_winners(a, k)
                assert np.count_nonzero(out) <= k
                assert np.array_equal(k_winners(out, k), out)
                perm = rng.permutation(n)
                assert np.array_equal(k_winners(a[perm], k), out[perm])


def test_c6c_kmeans_sse_monotone_and_tiny_optimum():
    with criterion("6c", "kmeans SSE monotone per iteration; tiny-instance SSE "
                         "vs exhaustive-partition oracle"):
        with budgeted("6c"):
            rng = np.random.default_rng(2)
            points = rng.random((150, 6)).astype(np.float32)
            result = kmeans(points, 5, seed=0)
            for before, after in zip(result.sse_history, result.sse_history[1:]):
                assert after <= before * (1 + 1e-4) + 1e-9

            hits = 0
            for seed in range(100):
                pts = np.random.default_rng(seed).random((12, 2)).astype(np.float32)
                best = exhaustive_min_sse(pts, 3)
                if kmeans(pts, 3, seed=seed).sse <= best * 1.05 + 1e-9:
                    hits += 1
            assert hits >= 95, f"{hits}/100 within 5% of the exhaustive optimum"


def test_c6d_metric_oracles_100_instances():
    with criterion("6d", "knn_error and cluster_accuracy equal brute-force "
                         "oracles on 100 random small instances"):
        with budgeted("6d"):
            rng = np.random.default_rng(3)
            for _ in range(100):
                assignments = rng.integers(0, 5, size=40)
                labels = rng.integers(0, 4, size=40)
                assert cluster_accuracy(assignments, labels) == pytest.approx(
                    naive_cluster_accuracy(assignments, labels))
            for trial in range(100):
                train_x = rng.random((30, 4)).astype(np.float32)
                train_y = rng.integers(0, 3, size=30)
                test_x = rng.random((10, 4)).astype(np.float32)
                test_y = rng.integers(0, 3, size=10)
                k = int(rng.integers(1, 11))
                assert knn_error(train_x, train_y, test_x, test_y, k) == pytest.approx(
                    naive_knn_error(train_x, train_y, test_x, test_y, k))


def test_c6e_single_input_convergence():
    with criterion("6e", "single-input distance non-increasing over 100 "
                         "presentations for eps in {0.01, 0.1, 0.5}"):
        with budgeted("6e"):
            rng = np.random.default_rng(4)
            x = rng.random(24).astype(np.float32)
            for eps in (0.01, 0.1, 0.5):
                net = create_network(24, 1, 0.01, seed=1)
                prev = None
                for _ in range(100):
                    hebbian_step(net, x, epsilon=eps)
                    normalize_updated(net, [0])
                    diff = net.weights[0].astype(np.float64) - x.astype(np.float64)
                    dist = float((diff ** 2).sum() / np.abs(x).sum())
                    if prev is not None:
                        assert dist <= prev * (1 + 1e-6) + 1e-9, f"eps={eps}"
                    prev = dist
                assert prev < 0.05, f"eps={eps} did not approach the input"


def test_c6f_supervised_invariants():
    with criterion("6f", "supervised group partition invariants and predict "
                         "positive-scale invariance"):
        with budgeted("6f"):
            features, labels = make_blobs(n_classes=5, per_class=20, dim=30,
                                          active=5, seed=5)
            cfg = TrainConfig(neurons_per_class=4, initial_neurons=4, epochs=2,
                              epsilon=0.1, batch_size=16, seed=0, init_scale=0.01)
            net = create_network(30, 4, 0.01, seed=0, max_neurons=4 * 6)
            schedule = schedule_from_dataset(features, labels, list(range(5)), cfg)
            train_sequence(net, schedule, cfg)
            for c in range(5):
                rows = np.flatnonzero(net.class_group == c)
                assert rows.tolist() == list(range(4 * c, 4 * (c + 1)))
            assert net.frozen[:20].all() and not net.frozen[20:].any()
            assert (net.class_group[20:] == -1).all()

            rng = np.random.default_rng(6)
            for _ in range(50):
                x = rng.normal(size=30).astype(np.float32)
                base = predict(net, x)
                for alpha in (0.1, 2.0, 40.0):
                    assert predict(net, (alpha * x).astype(np.float32)) == base


def test_c6g_checkpoint_and_determinism(tmp_path):
    with criterion("6g", "checkpoint round-trip bit-exact; fixed seed gives "
                         "identical checkpoints across full runs"):
        with budgeted("6g"):
            rng = np.random.default_rng(7)
            net = create_network(48, 20, 0.5, seed=3)
            net.weights[:] = rng.normal(size=net.weights.shape).astype(np.float32)
            for j in (1, 5, 13):
                net.freeze_neuron(j)
            net.class_group[4] = 2
            path = tmp_path / "round.ckpt"
            net.save(path)
            assert load_checkpoint(path).fingerprint() == net.fingerprint()

            root = make_mnist_fixture_root(tmp_path / "data")
            digests = []
            for name in ("one", "two"):
                ckpt = tmp_path / f"{name}.ckpt"
                handlers.run_train_unsupervised(TrainUnsupervisedRequest(
                    dataset={"name": "mnist", "data_root": str(root)},
                    config={"initial_neurons": 16, "k_winners": 4,
                            "batch_size": 16, "seed": 11},
                    checkpoint_path=str(ckpt), skip_eval=True))
                digests.append(hashlib.sha256(ckpt.read_bytes()).hexdigest())
            assert digests[0] == digests[1]


def test_c6z_property_battery_budget():
    with criterion("6", f"property battery total runtime < 60 s "
                        f"(measured {sum(_c6_seconds.values()):.1f}s)"):
        assert len(_c6_seconds) == 7, "a property test did not record its time"
        assert sum(_c6_seconds.values()) < 60.0, _c6_seconds


@pytest.mark.skipif(not has_real_mnist(), reason="criterion 7 SKIP: real MNIST missing")
def test_c7_forgetting_mechanism_split_mnist():
    with criterion(7, "split MNIST: class-0 rows bit-stable with freezing; "
                      "without it they drift and task-1 accuracy drops >=20 pts"):
        train, test = load_dataset("mnist", real_data_root())
        task1_mask = np.isin(test.labels, [0, 1])

        def run(freezing):
            hashes = {}

            def snap(net_, class_id, _stats):
                h = hashlib.sha256()
                for j in range(SUP_MNIST["neurons_per_class"]):
                    h.update(net_.weights[j].tobytes())
                hashes[class_id] = h.hexdigest()

            net, report, _ = _supervised_run(train, test, SUP_MNIST, 0,
                                             freezing=freezing, snapshots=snap)
            task1 = evaluate_accuracy(net, test.features[task1_mask],
                                      test.labels[task1_mask]).overall_accuracy_pct
            return hashes, task1

        frozen_hashes, frozen_task1 = run(freezing=True)
        assert frozen_hashes[1] == frozen_hashes[9]
        open_hashes, open_task1 = run(freezing=False)
        print(f"  task-1 acc: frozen={frozen_task1:.2f} no-freeze={open_task1:.2f}")
        assert open_hashes[1] != open_hashes[9]
        assert frozen_task1 - open_task1 >= 20.0
