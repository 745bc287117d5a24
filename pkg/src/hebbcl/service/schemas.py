"""Pydantic request/response models for the training and evaluation service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..config import AblationFlags, TrainConfig


class AblationModel(BaseModel):
    hebbian: bool = True
    freezing: bool = True
    expansion: bool = True
    kwta: bool = True

    def to_flags(self) -> AblationFlags:
        return AblationFlags(**self.model_dump())


class TrainSettings(BaseModel):
    """Wire form of TrainConfig; validation mirrors its invariants.

    init_scale=None picks the trainer-appropriate default: data-scale (1.0)
    for unsupervised streams, where fresh rows must compete with trained ones
    to be recruited, and tiny (0.01) for supervised runs, where group-sum
    inference needs never-trained rows to vote with near-zero weight.
    """

    epsilon: float = Field(default=0.05, gt=0)
    threshold: float = Field(default=0.1, gt=0)
    k_winners: int = Field(default=25, ge=1)
    batch_size: int = Field(default=64, ge=1)
    epochs: int = Field(default=3, ge=1)
    neurons_per_class: int = Field(default=64, ge=1)
    initial_neurons: int = Field(default=500, ge=1)
    max_neurons: Optional[int] = Field(default=None, ge=1)
    init_scale: Optional[float] = Field(default=None, gt=0)
    seed: int = 0
    ablation: AblationModel = Field(default_factory=AblationModel)
    frozen_winner_policy: Literal["skip_update", "exclude_from_argmax"] = "skip_update"

    def to_config(self, default_init_scale: float = 0.01) -> TrainConfig:
        d = self.model_dump()
        d["ablation"] = self.ablation.to_flags()
        if d["init_scale"] is None:
            d["init_scale"] = default_init_scale
        return TrainConfig(**d)


class DatasetRef(BaseModel):
    name: Literal["mnist", "cifar10", "omniglot"]
    data_root: Optional[str] = None


class TrainStatsModel(BaseModel):
    samples_seen: int
    neurons_frozen_total: int
    neurons_added_total: int
    current_R: int
    mean_delta_norm: float


class EvalReportModel(BaseModel):
    final_R: int
    frozen_count: int
    seed: int
    config: dict = Field(default_factory=dict)
    cluster_accuracy_pct: Optional[float] = None
    knn_error_pct: Optional[float] = None
    n_clusters: Optional[int] = None
    knn_k: Optional[int] = None
    overall_accuracy_pct: Optional[float] = None
    per_task_accuracy_pct: list[float] = Field(default_factory=list)
    task_mean_accuracy_pct: Optional[float] = None
    wall_time_s: float = 0.0
    notes: dict = Field(default_factory=dict)


class TrainUnsupervisedRequest(BaseModel):
    dataset: DatasetRef
    config: TrainSettings = Field(default_factory=TrainSettings)
    class_order: Optional[list[int]] = None
    checkpoint_path: str = "hebbcl-unsup.ckpt"
    stats_log_path: Optional[str] = None
    report_path: Optional[str] = None
    eval_clusters: int = Field(default=50, ge=1)
    eval_knn_k: int = Field(default=10, ge=1)
    skip_eval: bool = False


class TrainUnsupervisedResponse(BaseModel):
    checkpoint_path: str
    stats: TrainStatsModel
    report: EvalReportModel


class TrainSupervisedRequest(BaseModel):
    dataset: DatasetRef
    config: TrainSettings = Field(default_factory=TrainSettings)
    class_order: Optional[list[int]] = None
    task_size: int = Field(default=2, ge=1)
    checkpoint_path: str = "hebbcl-sup.ckpt"
    report_path: Optional[str] = None


class TrainSupervisedResponse(BaseModel):
    checkpoint_path: str
    stats: TrainStatsModel
    report: EvalReportModel


class EvalRequest(BaseModel):
    checkpoint_path: str
    dataset: DatasetRef
    n_clusters: int = Field(default=50, ge=1)
    knn_k: int = Field(default=10, ge=1)
    k_winners: int = Field(default=25, ge=1)
    use_kwta: bool = True
    fit_on_train: bool = False
    seed: int = 0
    report_path: Optional[str] = None
    csv_path: Optional[str] = None  # append one table row per eval


class EvalResponse(BaseModel):
    report: EvalReportModel


class VisualizeRequest(BaseModel):
    checkpoint_path: str
    out_path: str = "weights"
    annotate: Literal["none", "frozen", "class"] = "none"
    cols: int = Field(default=25, ge=1)
    image_shape: Optional[tuple[int, int, int]] = None


class VisualizeResponse(BaseModel):
    files: list[str]
    width: int
    height: int


class AblateRequest(BaseModel):
    dataset: DatasetRef
    config: TrainSettings = Field(default_factory=TrainSettings)
    grid: Optional[list[str]] = None  # variant tags like "hfek"; None -> the five standard rows
    n_clusters: int = Field(default=10, ge=1)
    knn_k: int = Field(default=10, ge=1)
    csv_path: str = "ablation.csv"
    max_train_samples: Optional[int] = Field(default=None, ge=1)


class AblationRowModel(BaseModel):
    variant: str
    report: EvalReportModel


class AblateResponse(BaseModel):
    csv_path: str
    rows: list[AblationRowModel]


class HealthResponse(BaseModel):
    status: str
    version: str
