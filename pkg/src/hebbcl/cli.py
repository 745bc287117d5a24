"""Command-line client for the training/evaluation service.

Every subcommand builds the same request model the HTTP API accepts and
either runs it in-process (default) or posts it to a running service
(--server URL). Exit codes: 0 success, 1 runtime failure, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import json
import sys

import pydantic

from .config import AblationFlags, parse_config_file
from .errors import DataFormatError, DatasetMissingError, CheckpointFormatError, \
    HebbCLError, InvalidArgumentError
from .service import handlers
from .service.schemas import AblateRequest, DatasetRef, EvalRequest, \
    TrainSettings, TrainSupervisedRequest, TrainUnsupervisedRequest, \
    VisualizeRequest

USAGE_EXIT = 2
RUNTIME_EXIT = 1


class RemoteServiceError(HebbCLError):
    """An HTTP error from --server mode, carrying the exit code to use."""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code

_ABLATE_TOKENS = {
    "no-hebbian": "hebbian",
    "no-freeze": "freezing",
    "no-freezing": "freezing",
    "no-expand": "expansion",
    "no-expansion": "expansion",
    "no-kwta": "kwta",
}

# TrainSettings fields every training subcommand may override.
_SETTING_FLAGS = {
    "eps": "epsilon",
    "threshold": "threshold",
    "k": "k_winners",
    "batch_size": "batch_size",
    "epochs": "epochs",
    "neurons_per_class": "neurons_per_class",
    "neurons": "initial_neurons",
    "max_neurons": "max_neurons",
    "init_scale": "init_scale",
    "seed": "seed",
    "policy": "frozen_winner_policy",
}


def _add_setting_flags(parser: argparse.ArgumentParser, supervised: bool) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="flat key=value config file; explicit flags win")
    parser.add_argument("--eps", type=float, help="learning rate")
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--init-scale", type=float, dest="init_scale")
    parser.add_argument("--max-neurons", type=int, dest="max_neurons")
    parser.add_argument("--ablate", metavar="LIST",
                        help="comma list of no-hebbian,no-freeze,no-expand,no-kwta")
    if supervised:
        parser.add_argument("--neurons-per-class", type=int, dest="neurons_per_class")
        parser.add_argument("--epochs", type=int)
    else:
        parser.add_argument("--neurons", type=int, help="initial width")
        parser.add_argument("--threshold", type=float, help="freeze threshold")
        parser.add_argument("--k", type=int, help="winners kept by the sparse code")
        parser.add_argument("--policy",
                            choices=["skip_update", "exclude_from_argmax"],
                            help="what to do when a frozen row wins")


def _parse_ablate(spec: str) -> dict:
    flags = AblationFlags()
    for token in spec.split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token not in _ABLATE_TOKENS:
            raise InvalidArgumentError(
                f"unknown --ablate token {token!r} (expected {sorted(set(_ABLATE_TOKENS))})")
        setattr(flags, _ABLATE_TOKENS[token], False)
    return {"hebbian": flags.hebbian, "freezing": flags.freezing,
            "expansion": flags.expansion, "kwta": flags.kwta}


def _build_settings(args: argparse.Namespace) -> TrainSettings:
    """defaults <- config file <- explicit flags, validated by pydantic."""
    values: dict = {}
    if getattr(args, "config", None):
        raw = parse_config_file(args.config)
        ablation = raw.pop("ablation", None)
        if ablation is not None:
            values["ablation"] = {"hebbian": "h" in ablation, "freezing": "f" in ablation,
                                  "expansion": "e" in ablation, "kwta": "k" in ablation}
            AblationFlags.from_letters(ablation)  # validate the letters
        values.update(raw)
    for flag, field in _SETTING_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[field] = value
    if getattr(args, "ablate", None) is not None:
        values["ablation"] = _parse_ablate(args.ablate)
    return TrainSettings(**values)


def _dataset_ref(args: argparse.Namespace) -> DatasetRef:
    return DatasetRef(name=args.dataset, data_root=args.data_root)


def _class_order(args: argparse.Namespace) -> list[int] | None:
    raw = getattr(args, "class_order", None)
    if raw is None:
        return None
    try:
        return [int(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise InvalidArgumentError(f"--class-order must be a comma list of ints: {exc}")


def _dispatch(args: argparse.Namespace, endpoint: str, request, handler):
    """Run in-process, or POST to --server when given. Returns a plain dict."""
    if args.server:
        import httpx

        url = args.server.rstrip("/") + endpoint
        resp = httpx.post(url, json=request.model_dump(), timeout=None)
        if resp.status_code >= 400:
            detail = resp.text
            try:
                detail = resp.json().get("detail", detail)
            except ValueError:
                pass
            code = USAGE_EXIT if resp.status_code in (404, 422, 400) else RUNTIME_EXIT
            raise RemoteServiceError(f"({resp.status_code}) {detail}", code)
        return resp.json()
    return handler(request).model_dump()


def cmd_train_unsupervised(args) -> dict:
    req = TrainUnsupervisedRequest(
        dataset=_dataset_ref(args),
        config=_build_settings(args),
        class_order=_class_order(args),
        checkpoint_path=args.checkpoint,
        stats_log_path=args.stats_log,
        report_path=args.report,
        eval_clusters=args.clusters,
        eval_knn_k=args.knn_k,
        skip_eval=args.skip_eval,
    )
    return _dispatch(args, "/train/unsupervised", req, handlers.run_train_unsupervised)


def cmd_train_supervised(args) -> dict:
    req = TrainSupervisedRequest(
        dataset=_dataset_ref(args),
        config=_build_settings(args),
        class_order=_class_order(args),
        task_size=args.task_size,
        checkpoint_path=args.checkpoint,
        report_path=args.report,
    )
    return _dispatch(args, "/train/supervised", req, handlers.run_train_supervised)


def cmd_eval(args) -> dict:
    req = EvalRequest(
        checkpoint_path=args.checkpoint,
        dataset=_dataset_ref(args),
        n_clusters=args.clusters,
        knn_k=args.knn_k,
        k_winners=args.k,
        use_kwta=not args.no_kwta,
        fit_on_train=args.fit_on_train,
        seed=args.seed,
        report_path=args.report,
        csv_path=args.csv,
    )
    return _dispatch(args, "/eval", req, handlers.run_eval)


def cmd_visualize(args) -> dict:
    shape = None
    if args.image_shape:
        parts = [int(tok) for tok in args.image_shape.split(",")]
        if len(parts) != 3:
            raise InvalidArgumentError("--image-shape must be C,H,W")
        shape = tuple(parts)
    req = VisualizeRequest(
        checkpoint_path=args.checkpoint,
        out_path=args.out,
        annotate=args.annotate,
        cols=args.cols,
        image_shape=shape,
    )
    return _dispatch(args, "/visualize", req, handlers.run_visualize)


def cmd_ablate(args) -> dict:
    grid = None
    if args.grid is not None:
        grid = [tok.strip() for tok in args.grid.split(",") if tok.strip()]
    req = AblateRequest(
        dataset=_dataset_ref(args),
        config=_build_settings(args),
        grid=grid,
        n_clusters=args.clusters,
        knn_k=args.knn_k,
        csv_path=args.csv,
        max_train_samples=args.max_train_samples,
    )
    return _dispatch(args, "/ablate", req, handlers.run_ablate)


def cmd_serve(args) -> dict:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hebbcl",
        description="Hebbian continual learning: train, evaluate, visualize.")
    parser.add_argument("--server", metavar="URL",
                        help="send the request to a running service instead of running locally")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_dataset(p):
        p.add_argument("--dataset", required=True,
                       choices=["mnist", "cifar10", "omniglot"])
        p.add_argument("--data-root", dest="data_root",
                       help="dataset cache directory (default $HEBBCL_DATA_ROOT or ./data)")

    p = sub.add_parser("train-unsup", help="unsupervised training on a class-incremental stream")
    add_dataset(p)
    _add_setting_flags(p, supervised=False)
    p.add_argument("--class-order", dest="class_order", metavar="LIST")
    p.add_argument("--checkpoint", default="hebbcl-unsup.ckpt")
    p.add_argument("--stats-log", dest="stats_log", metavar="PATH")
    p.add_argument("--report", metavar="PATH", help="write the final report JSON here")
    p.add_argument("--clusters", type=int, default=50)
    p.add_argument("--knn-k", dest="knn_k", type=int, default=10)
    p.add_argument("--skip-eval", dest="skip_eval", action="store_true")
    p.set_defaults(func=cmd_train_unsupervised)

    p = sub.add_parser("train-sup", help="supervised class-incremental training")
    add_dataset(p)
    _add_setting_flags(p, supervised=True)
    p.add_argument("--class-order", dest="class_order", metavar="LIST")
    p.add_argument("--task-size", dest="task_size", type=int, default=2)
    p.add_argument("--checkpoint", default="hebbcl-sup.ckpt")
    p.add_argument("--report", metavar="PATH")
    p.set_defaults(func=cmd_train_supervised)

    p = sub.add_parser("eval", help="evaluate a checkpoint's representations")
    add_dataset(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clusters", type=int, default=50)
    p.add_argument("--knn-k", dest="knn_k", type=int, default=10)
    p.add_argument("--k", type=int, default=25, help="sparse-code width")
    p.add_argument("--no-kwta", dest="no_kwta", action="store_true",
                   help="evaluate raw activations instead of sparse codes")
    p.add_argument("--fit-on-train", dest="fit_on_train", action="store_true",
                   help="fit clusters on train representations, assign the test set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", metavar="PATH")
    p.add_argument("--csv", metavar="PATH", help="append one result row to this CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("visualize", help="render neuron weights as an image grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default="weights", help="output basename (.ppm, .png)")
    p.add_argument("--annotate", choices=["none", "frozen", "class"], default="none")
    p.add_argument("--cols", type=int, default=25)
    p.add_argument("--image-shape", dest="image_shape", metavar="C,H,W")
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("ablate", help="run the ingredient-ablation grid, emit CSV")
    add_dataset(p)
    _add_setting_flags(p, supervised=False)
    p.add_argument("--grid", metavar="LIST",
                   help='comma list of variant tags like "hfek,hfk,hk" (default: five standard rows; "" for none)')
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--knn-k", dest="knn_k", type=int, default=10)
    p.add_argument("--csv", default="ablation.csv")
    p.add_argument("--max-train-samples", dest="max_train_samples", type=int)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
    except RemoteServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (DatasetMissingError, InvalidArgumentError, DataFormatError,
            CheckpointFormatError, pydantic.ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except HebbCLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    if result:
        print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
