"""Command-line surface: align, gradcheck, datagen, train, eval.

File format ("sequence file"): a header line `rows cols`, then one
whitespace-separated row of reals per line. Values are written with 17
significant digits so write-then-read round-trips exactly; NaN and
infinity tokens are rejected on read.

Reports are flat `key value` lines on stdout; diagnostics go to stderr.
Exit codes: 0 success, 1 usage/parse error, 2 tolerance failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .alignment import (
    _path_count_capped,
    brute_force_softdtw,
    classical_dtw,
    softdtw_forward,
    softdtw_gradient,
)
from .core import FeatureSequence, PianoRoll, pianoroll_validate
from .cost import CostKind, build_cost_matrix
from .metrics import DEFAULT_THRESHOLD, evaluate
from .targets import LabelVariant
from .training import (
    LossKind,
    SyntheticExcerpt,
    TrainConfig,
    TOY_DATASET_PARAMS,
    TOY_EPOCHS,
    TOY_LEARNING_RATE,
    TOY_MOMENTUM,
    generate_synthetic_dataset,
    train,
)

ORACLE_CHECK_PATH_LIMIT = 10**5


class SequenceFileError(ValueError):
    """Raised when a sequence file cannot be parsed."""


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)  # shortest exact round-trip
    return str(value)


def write_sequence_file(path, matrix) -> None:
    arr = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    lines = [f"{arr.shape[0]} {arr.shape[1]}"]
    for row in arr:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_sequence_file(path) -> np.ndarray:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SequenceFileError(f"{path}: empty file")
    header = lines[0].split()
    if len(header) != 2:
        raise SequenceFileError(f"{path}: header must be 'rows cols'")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError as exc:
        raise SequenceFileError(f"{path}: bad header {lines[0]!r}") from exc
    if rows < 1 or cols < 1 or len(lines) - 1 != rows:
        raise SequenceFileError(f"{path}: expected {rows} data rows, found {len(lines) - 1}")
    data = np.empty((rows, cols))
    for i, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != cols:
            raise SequenceFileError(f"{path}: row {i + 1} has {len(parts)} values, expected {cols}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise SequenceFileError(f"{path}: row {i + 1} has a non-numeric token") from exc
        if not all(np.isfinite(vals)):
            raise SequenceFileError(f"{path}: row {i + 1} contains NaN or infinity")
        data[i] = vals
    return data


def _emit(out, key, value) -> None:
    print(f"{key} {_fmt(value)}", file=out)


def _norm_rel_err(candidate: np.ndarray, reference: np.ndarray) -> float:
    """Max-norm relative error: ||candidate - reference||_inf / ||reference||_inf."""
    denom = float(np.abs(reference).max())
    if denom == 0.0:
        return float(np.abs(candidate - reference).max())
    return float(np.abs(candidate - reference).max() / denom)


def finite_difference_gradient(costs: np.ndarray, gamma: float, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the forward cost over every cell."""
    c = np.array(costs, dtype=np.float64)
    grad = np.empty_like(c)
    for idx in np.ndindex(c.shape):
        keep = c[idx]
        c[idx] = keep + h
        hi = softdtw_forward(c, gamma).cost
        c[idx] = keep - h
        lo = softdtw_forward(c, gamma).cost
        c[idx] = keep
        grad[idx] = (hi - lo) / (2.0 * h)
    return grad


def _cmd_align(args, out) -> int:
    x = FeatureSequence(read_sequence_file(args.x_file))
    y = FeatureSequence(read_sequence_file(args.y_file))
    if x.dim != y.dim:
        print(
            f"error: sequence dimensions differ: {args.x_file} has {x.dim}, "
            f"{args.y_file} has {y.dim}",
            file=sys.stderr,
        )
        return 1
    costs = build_cost_matrix(CostKind(args.cost), x, y)
    result = softdtw_forward(costs, args.gamma)
    _emit(out, "rows_x", len(x))
    _emit(out, "rows_y", len(y))
    _emit(out, "dim", x.dim)
    _emit(out, "gamma", float(args.gamma))
    _emit(out, "softdtw_cost", result.cost)
    if args.hard:
        hard_cost, path = classical_dtw(costs)
        _emit(out, "dtw_cost", hard_cost)
        _emit(out, "dtw_path_length", len(path))
        for k, (n, m) in enumerate(path):
            print(f"dtw_path.{k} {n} {m}", file=out)
    if args.grad is not None:
        write_sequence_file(args.grad, softdtw_gradient(costs, args.gamma))
        _emit(out, "grad_file", args.grad)
    return 0


def _cmd_gradcheck(args, out) -> int:
    if args.rows < 1 or args.cols < 1 or args.dim < 1 or args.trials < 1:
        print("error: rows, cols, dim and trials must be >= 1", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    run_oracle = (
        _path_count_capped(args.rows, args.cols, ORACLE_CHECK_PATH_LIMIT + 1)
        <= ORACLE_CHECK_PATH_LIMIT
    )
    worst_fd = 0.0
    worst_oracle_cost = 0.0
    worst_oracle_grad = 0.0
    for _ in range(args.trials):
        x = FeatureSequence(rng.standard_normal((args.rows, args.dim)))
        y = FeatureSequence(rng.standard_normal((args.cols, args.dim)))
        costs = build_cost_matrix(CostKind.SQUARED_EUCLIDEAN, x, y)
        grad = softdtw_gradient(costs, args.gamma)
        fd = finite_difference_gradient(costs, args.gamma)
        worst_fd = max(worst_fd, _norm_rel_err(grad, fd))
        if run_oracle:
            oracle_cost, oracle_grad = brute_force_softdtw(costs, args.gamma)
            dp_cost = softdtw_forward(costs, args.gamma).cost
            denom = max(abs(oracle_cost), 1e-300)
            worst_oracle_cost = max(worst_oracle_cost, abs(dp_cost - oracle_cost) / denom)
            worst_oracle_grad = max(worst_oracle_grad, _norm_rel_err(grad, oracle_grad))
    _emit(out, "rows", args.rows)
    _emit(out, "cols", args.cols)
    _emit(out, "dim", args.dim)
    _emit(out, "gamma", float(args.gamma))
    _emit(out, "trials", args.trials)
    _emit(out, "oracle_checked", run_oracle)
    _emit(out, "max_rel_err_fd", worst_fd)
    ok = worst_fd < args.fd_tolerance
    if run_oracle:
        _emit(out, "max_rel_err_oracle_cost", worst_oracle_cost)
        _emit(out, "max_rel_err_oracle_grad", worst_oracle_grad)
        ok = ok and worst_oracle_cost < args.oracle_tolerance
        ok = ok and worst_oracle_grad < args.oracle_tolerance
    _emit(out, "pass", ok)
    return 0 if ok else 2


def _dataset_paths(directory: Path, index: int) -> dict[str, Path]:
    stem = f"excerpt_{index:03d}"
    return {
        "input": directory / f"{stem}_input.txt",
        "strong": directory / f"{stem}_strong.txt",
        "score": directory / f"{stem}_score.txt",
    }


def _cmd_datagen(args, out) -> int:
    dataset = generate_synthetic_dataset(
        seed=args.seed,
        excerpt_count=args.excerpts,
        frames=args.frames,
        polyphony=args.polyphony,
        noise_level=args.noise,
    )
    directory = Path(args.out)
    directory.mkdir(parents=True, exist_ok=True)
    for i, excerpt in enumerate(dataset):
        paths = _dataset_paths(directory, i)
        write_sequence_file(paths["input"], excerpt.input.frames)
        write_sequence_file(paths["strong"], excerpt.strong_target.frames)
        write_sequence_file(paths["score"], excerpt.score_target.frames)
    manifest = directory / "dataset.txt"
    with manifest.open("w") as fh:
        _emit(fh, "excerpts", args.excerpts)
        _emit(fh, "frames", args.frames)
        _emit(fh, "polyphony", args.polyphony)
        _emit(fh, "noise_level", float(args.noise))
        _emit(fh, "seed", args.seed)
    _emit(out, "out_dir", directory)
    _emit(out, "excerpts", args.excerpts)
    return 0


def _load_dataset(directory: Path) -> list[SyntheticExcerpt]:
    excerpts = []
    index = 0
    while True:
        paths = _dataset_paths(directory, index)
        if not paths["input"].exists():
            break
        excerpts.append(
            SyntheticExcerpt(
                input=FeatureSequence(read_sequence_file(paths["input"])),
                strong_target=pianoroll_validate(read_sequence_file(paths["strong"])),
                score_target=pianoroll_validate(read_sequence_file(paths["score"])),
            )
        )
        index += 1
    if not excerpts:
        raise SequenceFileError(f"no excerpt files found in {directory}")
    return excerpts


def _cmd_train(args, out) -> int:
    if args.data_dir is not None:
        dataset = _load_dataset(Path(args.data_dir))
    else:
        dataset = generate_synthetic_dataset(
            seed=args.data_seed,
            excerpt_count=args.excerpts,
            frames=args.frames,
            polyphony=args.polyphony,
            noise_level=args.noise,
        )
    config = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        gamma=args.gamma,
        momentum=args.momentum,
        seed=args.seed,
        variant=LabelVariant(args.variant),
        loss_kind=LossKind(args.loss),
        threshold=args.threshold,
    )
    model, history = train(dataset, config)

    lines: list[tuple[str, object]] = [
        ("tool_version", __version__),
        ("config.variant", config.variant.value),
        ("config.loss", config.loss_kind.value),
        ("config.gamma", config.gamma),
        ("config.learning_rate", config.learning_rate),
        ("config.momentum", config.momentum),
        ("config.epochs", config.epochs),
        ("config.seed", config.seed),
        ("config.threshold", config.threshold),
        ("data.excerpts", len(dataset)),
        ("first_batch_loss", history[0].batch_losses[0]),
    ]
    for record in history:
        lines.append((f"epoch.{record.epoch}.loss", record.mean_loss))
    final = history[-1].report
    lines += [
        ("final.cosine_similarity", final.cosine_similarity),
        ("final.precision", final.precision),
        ("final.recall", final.recall),
        ("final.f_measure", final.f_measure),
        ("final.accuracy", final.accuracy),
        ("final.average_precision", final.average_precision),
    ]
    for key, value in lines:
        _emit(out, key, value)
    if args.report is not None:
        with Path(args.report).open("w") as fh:
            for key, value in lines:
                _emit(fh, key, value)
    if args.model_out is not None:
        # one row per output bin: the input weights followed by the bias
        write_sequence_file(args.model_out, np.hstack([model.weight, model.bias[:, None]]))
    return 0


def _cmd_eval(args, out) -> int:
    pred = FeatureSequence(read_sequence_file(args.pred_file))
    ref = pianoroll_validate(read_sequence_file(args.ref_file))
    report = evaluate(pred, ref, args.threshold)
    _emit(out, "threshold", float(report.threshold))
    _emit(out, "cosine_similarity", report.cosine_similarity)
    _emit(out, "precision", report.precision)
    _emit(out, "recall", report.recall)
    _emit(out, "f_measure", report.f_measure)
    _emit(out, "accuracy", report.accuracy)
    _emit(out, "average_precision", report.average_precision)
    return 0


class _Parser(argparse.ArgumentParser):
    # usage problems must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="softalign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_align = sub.add_parser("align", help="soft alignment cost between two sequence files")
    p_align.add_argument("x_file")
    p_align.add_argument("y_file")
    p_align.add_argument("--gamma", type=float, default=10.0)
    p_align.add_argument("--cost", default="squared_euclidean", choices=[k.value for k in CostKind])
    p_align.add_argument("--hard", action="store_true", help="also run classical DTW and print its path")
    p_align.add_argument("--grad", default=None, help="write the occupancy matrix to this file")

    p_grad = sub.add_parser("gradcheck", help="verify gradients against the oracle and finite differences")
    p_grad.add_argument("--rows", type=int, default=8)
    p_grad.add_argument("--cols", type=int, default=7)
    p_grad.add_argument("--dim", type=int, default=4)
    p_grad.add_argument("--gamma", type=float, default=1.0)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--trials", type=int, default=20)
    p_grad.add_argument("--fd-tolerance", type=float, default=1e-5)
    p_grad.add_argument("--oracle-tolerance", type=float, default=1e-9)

    p_data = sub.add_parser("datagen", help="write a synthetic dataset to a directory")
    p_data.add_argument("--out", required=True)
    p_data.add_argument("--seed", type=int, default=TOY_DATASET_PARAMS["seed"])
    p_data.add_argument("--excerpts", type=int, default=TOY_DATASET_PARAMS["excerpt_count"])
    p_data.add_argument("--frames", type=int, default=TOY_DATASET_PARAMS["frames"])
    p_data.add_argument("--polyphony", type=int, default=TOY_DATASET_PARAMS["polyphony"])
    p_data.add_argument("--noise", type=float, default=TOY_DATASET_PARAMS["noise_level"])

    p_train = sub.add_parser("train", help="train the per-frame model and report metrics")
    p_train.add_argument("--variant", default="w2", choices=[v.value for v in LabelVariant])
    p_train.add_argument("--loss", default="softdtw", choices=[k.value for k in LossKind])
    p_train.add_argument("--gamma", type=float, default=10.0)
    p_train.add_argument("--lr", type=float, default=TOY_LEARNING_RATE)
    p_train.add_argument("--momentum", type=float, default=TOY_MOMENTUM)
    p_train.add_argument("--epochs", type=int, default=TOY_EPOCHS)
    p_train.add_argument("--seed", type=int, default=1)
    p_train.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p_train.add_argument("--data-dir", default=None, help="load a datagen directory instead of generating")
    p_train.add_argument("--data-seed", type=int, default=TOY_DATASET_PARAMS["seed"])
    p_train.add_argument("--excerpts", type=int, default=TOY_DATASET_PARAMS["excerpt_count"])
    p_train.add_argument("--frames", type=int, default=TOY_DATASET_PARAMS["frames"])
    p_train.add_argument("--polyphony", type=int, default=TOY_DATASET_PARAMS["polyphony"])
    p_train.add_argument("--noise", type=float, default=TOY_DATASET_PARAMS["noise_level"])
    p_train.add_argument("--report", default=None, help="also write the report to this file")
    p_train.add_argument("--model-out", default=None, help="write final parameters (bias in last column)")

    p_eval = sub.add_parser("eval", help="evaluate a prediction file against a reference roll")
    p_eval.add_argument("pred_file")
    p_eval.add_argument("ref_file")
    p_eval.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)

    return parser


_HANDLERS = {
    "align": _cmd_align,
    "gradcheck": _cmd_gradcheck,
    "datagen": _cmd_datagen,
    "train": _cmd_train,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args, sys.stdout)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
