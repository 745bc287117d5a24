"""Orchestration behind the service endpoints.

Each handler is a plain function from request model to response model; the
FastAPI routes and the CLI both call these, so local runs and remote runs
execute identical code.
"""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np

from ..config import SEED_KMEANS, SEED_NETWORK, SEED_STREAM, AblationFlags, TrainConfig
from ..datasets import LabeledDataset, load_dataset, make_stream
from ..errors import InvalidArgumentError
from ..evaluation import CSV_COLUMNS, EvalReport, assign_to_centroids, \
    cluster_accuracy, kmeans, knn_error, report_csv_row, represent_dataset
from ..network import Network, create_network, load_checkpoint
from ..supervised import evaluate_accuracy, paired_tasks, schedule_from_dataset, \
    train_sequence
from ..unsupervised import TrainStats, train_stream
from ..visualization import render_grid, save_image
from .schemas import AblateRequest, AblateResponse, AblationRowModel, \
    EvalReportModel, EvalRequest, EvalResponse, TrainStatsModel, \
    TrainSupervisedRequest, TrainSupervisedResponse, TrainUnsupervisedRequest, \
    TrainUnsupervisedResponse, VisualizeRequest, VisualizeResponse

DEFAULT_ABLATION_GRID = ["hfek", "hfk", "hk", "hfe", "h"]

# Trainer-appropriate init scales used when a request leaves init_scale unset.
UNSUP_INIT_SCALE = 1.0
SUP_INIT_SCALE = 0.01


def _stats_model(stats: TrainStats) -> TrainStatsModel:
    return TrainStatsModel(**stats.to_dict())


def _report_model(report: EvalReport) -> EvalReportModel:
    return EvalReportModel(**report.to_dict())


def _representation_metrics(net: Network, train: LabeledDataset,
                            test: LabeledDataset, cfg: TrainConfig,
                            n_clusters: int, knn_k: int,
                            fit_on_train: bool = False) -> EvalReport:
    """Cluster accuracy and k-NN error over encoded representations."""
    start = time.perf_counter()
    k = cfg.k_winners if cfg.ablation.kwta else None
    test_reps = represent_dataset(net, test.features, k)
    train_reps = represent_dataset(net, train.features, k)

    if fit_on_train:
        result = kmeans(train_reps, n_clusters, seed=cfg.seed + SEED_KMEANS)
        assignments = assign_to_centroids(test_reps, result.centroids)
    else:
        result = kmeans(test_reps, n_clusters, seed=cfg.seed + SEED_KMEANS)
        assignments = result.assignments

    acc = cluster_accuracy(assignments, test.labels)
    err = knn_error(train_reps, train.labels, test_reps, test.labels, knn_k)

    return EvalReport(
        final_R=net.n_neurons,
        frozen_count=net.frozen_count,
        seed=cfg.seed,
        config=cfg.to_dict(),
        cluster_accuracy_pct=acc,
        knn_error_pct=err,
        n_clusters=n_clusters,
        knn_k=knn_k,
        wall_time_s=round(time.perf_counter() - start, 3),
        notes={"cluster_fit": "train" if fit_on_train else "test",
               "kwta_k": k},
    )


def _subsample(ds: LabeledDataset, cap: int) -> LabeledDataset:
    """Deterministic per-class proportional subsample, preserving order."""
    if cap >= ds.n_samples:
        return ds
    frac = cap / ds.n_samples
    keep: list[np.ndarray] = []
    for c in ds.classes():
        idx = np.flatnonzero(ds.labels == c)
        quota = max(1, int(round(idx.size * frac)))
        keep.append(idx[:quota])
    chosen = np.sort(np.concatenate(keep))
    return LabeledDataset(ds.features[chosen], ds.labels[chosen],
                          ds.image_shape, ds.class_names)


def run_train_unsupervised(req: TrainUnsupervisedRequest) -> TrainUnsupervisedResponse:
    cfg = req.config.to_config(default_init_scale=UNSUP_INIT_SCALE)
    train, test = load_dataset(req.dataset.name, req.dataset.data_root)
    t0 = time.perf_counter()

    net = create_network(train.input_dim, cfg.initial_neurons, cfg.init_scale,
                         cfg.seed + SEED_NETWORK, cfg.effective_max_neurons)
    stream = make_stream(train, req.class_order, cfg.batch_size,
                         cfg.seed + SEED_STREAM, labeled=False)
    stats = train_stream(net, stream, cfg, stats_log=req.stats_log_path)
    net.save(req.checkpoint_path)

    if req.skip_eval:
        report = EvalReport(final_R=net.n_neurons, frozen_count=net.frozen_count,
                            seed=cfg.seed, config=cfg.to_dict(),
                            wall_time_s=round(time.perf_counter() - t0, 3),
                            notes={"eval": "skipped"})
    else:
        report = _representation_metrics(net, train, test, cfg,
                                         req.eval_clusters, req.eval_knn_k)
        report.wall_time_s = round(time.perf_counter() - t0, 3)
    report.notes["dataset"] = req.dataset.name
    if req.report_path:
        report.write_json(req.report_path)
    return TrainUnsupervisedResponse(
        checkpoint_path=str(req.checkpoint_path),
        stats=_stats_model(stats),
        report=_report_model(report),
    )


def run_train_supervised(req: TrainSupervisedRequest) -> TrainSupervisedResponse:
    cfg = req.config.to_config(default_init_scale=SUP_INIT_SCALE)
    train, test = load_dataset(req.dataset.name, req.dataset.data_root)
    order = req.class_order if req.class_order is not None else train.classes()
    t0 = time.perf_counter()

    # Every class freezes its block and appends a fresh one, so the cap must
    # cover (classes + 1) blocks unless the caller pinned one explicitly.
    cap = cfg.max_neurons if cfg.max_neurons is not None \
        else cfg.neurons_per_class * (len(order) + 1)
    net = create_network(train.input_dim, cfg.neurons_per_class, cfg.init_scale,
                         cfg.seed + SEED_NETWORK, cap)
    schedule = schedule_from_dataset(train.features, train.labels, order, cfg)
    stats = train_sequence(net, schedule, cfg)
    net.save(req.checkpoint_path)

    acc = evaluate_accuracy(net, test.features, test.labels,
                            task_partition=paired_tasks(order, req.task_size))
    report = EvalReport(
        final_R=net.n_neurons,
        frozen_count=net.frozen_count,
        seed=cfg.seed,
        config=cfg.to_dict(),
        overall_accuracy_pct=acc.overall_accuracy_pct,
        per_task_accuracy_pct=acc.per_task_accuracy_pct,
        task_mean_accuracy_pct=acc.task_mean_accuracy_pct,
        wall_time_s=round(time.perf_counter() - t0, 3),
        notes={"dataset": req.dataset.name, "class_order": [int(c) for c in order],
               "task_partition": acc.task_partition},
    )
    if req.report_path:
        report.write_json(req.report_path)
    return TrainSupervisedResponse(
        checkpoint_path=str(req.checkpoint_path),
        stats=_stats_model(stats),
        report=_report_model(report),
    )


def run_eval(req: EvalRequest) -> EvalResponse:
    net = load_checkpoint(req.checkpoint_path, seed=req.seed)
    train, test = load_dataset(req.dataset.name, req.dataset.data_root)
    if test.input_dim != net.input_dim:
        raise InvalidArgumentError(
            f"checkpoint input_dim {net.input_dim} does not match "
            f"dataset dim {test.input_dim}")
    cfg = TrainConfig(seed=req.seed,
                      k_winners=min(req.k_winners, net.n_neurons),
                      ablation=AblationFlags(kwta=req.use_kwta))
    report = _representation_metrics(net, train, test, cfg, req.n_clusters,
                                     req.knn_k, fit_on_train=req.fit_on_train)
    report.notes["dataset"] = req.dataset.name
    report.notes["checkpoint"] = str(req.checkpoint_path)
    if req.report_path:
        report.write_json(req.report_path)
    if req.csv_path:
        _append_csv_row(req.csv_path, report)
    return EvalResponse(report=_report_model(report))


def _append_csv_row(path: str | Path, report: EvalReport, variant: str = "") -> None:
    path = Path(path)
    new_file = not path.exists()
    with open(path, "a", newline="") as f:
        writer = csv.writer(f)
        if new_file:
            writer.writerow(CSV_COLUMNS)
        writer.writerow(report_csv_row(report, variant=variant))


def run_visualize(req: VisualizeRequest) -> VisualizeResponse:
    net = load_checkpoint(req.checkpoint_path)
    image = render_grid(net, req.image_shape, cols=req.cols, annotate=req.annotate)
    files = save_image(image, req.out_path)
    return VisualizeResponse(files=[str(p) for p in files],
                             width=image.shape[1], height=image.shape[0])


def run_ablate(req: AblateRequest) -> AblateResponse:
    grid = req.grid if req.grid is not None else list(DEFAULT_ABLATION_GRID)
    variants = [AblationFlags.from_letters(tag) for tag in grid]

    train, test = load_dataset(req.dataset.name, req.dataset.data_root)
    if req.max_train_samples is not None:
        train = _subsample(train, req.max_train_samples)

    rows: list[AblationRowModel] = []
    csv_rows: list[list[str]] = []
    for tag, flags in zip(grid, variants):
        cfg = req.config.to_config(default_init_scale=UNSUP_INIT_SCALE)
        cfg.ablation = flags
        t0 = time.perf_counter()
        net = create_network(train.input_dim, cfg.initial_neurons, cfg.init_scale,
                             cfg.seed + SEED_NETWORK, cfg.effective_max_neurons)
        stream = make_stream(train, None, cfg.batch_size,
                             cfg.seed + SEED_STREAM, labeled=False)
        train_stream(net, stream, cfg)
        report = _representation_metrics(net, train, test, cfg,
                                         req.n_clusters, req.knn_k)
        report.wall_time_s = round(time.perf_counter() - t0, 3)
        report.notes["dataset"] = req.dataset.name
        report.notes["variant"] = flags.letters()
        rows.append(AblationRowModel(variant=tag, report=_report_model(report)))
        csv_rows.append(report_csv_row(report, variant=tag))

    path = Path(req.csv_path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        writer.writerows(csv_rows)
    return AblateResponse(csv_path=str(path), rows=rows)
