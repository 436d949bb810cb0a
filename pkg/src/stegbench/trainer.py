"""Mini-batch SGD training loop with per-epoch accuracy tracking.

The learning rate decays per update: lr_t = lr0 / (1 + decay * t) with t
counting cumulative updates from 0.  Batch gradients are the arithmetic
mean of per-sample gradients, so the learning rate's meaning does not
depend on batch size.  The parameters with the best test accuracy seen
so far are retained separately from the final ones.

Prediction ties (equal log-probabilities) resolve to cover (class 0);
freshly initialized symmetric networks start exactly tied.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import Corpus
from .network import NetworkSpec, ParameterStore, backward_batch, forward_batch


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 100
    lr0: float = 0.5
    lr_decay: float = 5e-7
    momentum: float = 0.0
    max_epochs: int = 200
    patience: int | None = None  # early stop after this many stale epochs
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr0 <= 0 or self.lr_decay < 0 or self.momentum < 0:
            raise ValueError("lr0 must be positive; lr_decay and momentum non-negative")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 when set")


@dataclass
class EpochRecord:
    epoch: int
    train_acc: float
    test_acc: float
    mean_loss: float
    lr: float
    seconds: float  # wall time; diagnostic only, excluded from reproducibility


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def best_epoch(self) -> int:
        """Epoch index (1-based) of the first maximal test accuracy."""
        if not self.records:
            raise ValueError("empty history has no best epoch")
        accs = [r.test_acc for r in self.records]
        return int(np.argmax(accs)) + 1


@dataclass
class DetectionReport:
    """Confusion matrix (rows: actual cover/stego, cols: predicted) plus
    the three accuracy columns of the standard result tables."""

    matrix: np.ndarray
    cover_acc: float
    stego_acc: float
    total_acc: float

    def table_lines(self) -> list[str]:
        return [
            "Cover     Stego     Total",
            f"{self.cover_acc * 100:6.2f}%   {self.stego_acc * 100:6.2f}%   {self.total_acc * 100:6.2f}%",
        ]


def learning_rate(cfg: TrainConfig, step_index: int) -> float:
    return cfg.lr0 / (1.0 + cfg.lr_decay * step_index)


def sgd_step(
    params: ParameterStore,
    grads: ParameterStore,
    step_index: int,
    cfg: TrainConfig,
    velocity: ParameterStore | None = None,
) -> ParameterStore:
    """One parameter update (in place); returns params for chaining.

    With momentum m: v <- m*v - lr_t*g; w <- w + v.  The velocity store is
    required when momentum > 0 and carries state across steps.
    """
    lr = learning_rate(cfg, step_index)
    if cfg.momentum > 0.0:
        if velocity is None:
            raise ValueError("momentum > 0 requires a velocity store")
        for w, g, v in zip(params.arrays(), grads.arrays(), velocity.arrays()):
            if w.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {w.shape}")
            v *= cfg.momentum
            v -= lr * g
            w += v
    else:
        for w, g in zip(params.arrays(), grads.arrays()):
            if w.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {w.shape}")
            w -= lr * g
    return params


def predict(logprobs: np.ndarray) -> np.ndarray:
    """Argmax labels with ties resolved to cover (0)."""
    return (logprobs[:, 1] > logprobs[:, 0]).astype(np.int64)


def evaluate(params: ParameterStore, spec: NetworkSpec, corpus: Corpus) -> DetectionReport:
    """Cover/stego/total accuracies and the 2x2 confusion matrix."""
    if not corpus.normalized:
        raise ValueError("evaluate expects a normalized corpus")
    images, labels = corpus.images(), corpus.labels()
    predicted = predict(forward_batch(params, spec, images))
    matrix = np.zeros((2, 2), dtype=np.int64)
    for actual, pred in zip(labels, predicted):
        matrix[actual, pred] += 1
    covers, stegos = matrix[0].sum(), matrix[1].sum()
    cover_acc = matrix[0, 0] / covers if covers else 0.0
    stego_acc = matrix[1, 1] / stegos if stegos else 0.0
    total_acc = (matrix[0, 0] + matrix[1, 1]) / max(len(corpus), 1)
    return DetectionReport(matrix, float(cover_acc), float(stego_acc), float(total_acc))


@dataclass
class TrainResult:
    final_params: ParameterStore
    best_params: ParameterStore
    history: TrainHistory


def train(
    params: ParameterStore,
    spec: NetworkSpec,
    train_corpus: Corpus,
    test_corpus: Corpus,
    cfg: TrainConfig,
) -> TrainResult:
    """Run mini-batch SGD; returns final params, best params, and history.

    Per epoch the training set is reshuffled (seeded), gradients are
    averaged per batch, and both train and test accuracy are recorded.
    ``best`` tracks the parameters at the first maximum of test accuracy.
    Early stopping halts after ``patience`` epochs without improvement.
    """
    if not train_corpus.items or not test_corpus.items:
        raise ValueError("training and test corpora must be non-empty")
    if not (train_corpus.normalized and test_corpus.normalized):
        raise ValueError("corpora must be normalized before training")
    n = len(train_corpus)
    if cfg.batch_size > n:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds training-set size {n}")

    images, labels = train_corpus.images(), train_corpus.labels()
    rng = np.random.default_rng(cfg.shuffle_seed)
    velocity = params.zeros_like() if cfg.momentum > 0.0 else None

    history = TrainHistory()
    best_params = params.copy()
    best_acc = -1.0
    best_epoch = 0
    step = 0

    for epoch in range(1, cfg.max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grads, logprobs = backward_batch(params, spec, images[batch], labels[batch])
            loss_sum += float(-logprobs[np.arange(len(batch)), labels[batch]].sum())
            sgd_step(params, grads, step, cfg, velocity)
            step += 1
        train_acc = evaluate(params, spec, train_corpus).total_acc
        test_acc = evaluate(params, spec, test_corpus).total_acc
        history.records.append(
            EpochRecord(
                epoch=epoch,
                train_acc=train_acc,
                test_acc=test_acc,
                mean_loss=loss_sum / n,
                lr=learning_rate(cfg, step - 1),
                seconds=time.perf_counter() - started,
            )
        )
        if test_acc > best_acc:
            best_acc = test_acc
            best_epoch = epoch
            best_params = params.copy()
        if cfg.patience is not None and epoch - best_epoch >= cfg.patience:
            break
    return TrainResult(params, best_params, history)


# --- CSV emission -------------------------------------------------------

HISTORY_COLUMNS = ("epoch", "train_acc", "test_acc", "mean_loss", "lr")


def write_history_csv(history: TrainHistory, path, header: str | None = None) -> None:
    """Reproducible history CSV (no timing; see ``write_timing_csv``)."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header:
            for line in header.splitlines():
                handle.write(f"# {line}\n")
        handle.write(",".join(HISTORY_COLUMNS) + "\n")
        for r in history.records:
            handle.write(
                f"{r.epoch},{r.train_acc:.17g},{r.test_acc:.17g},"
                f"{r.mean_loss:.17g},{r.lr:.17g}\n"
            )


def write_timing_csv(history: TrainHistory, path) -> None:
    """Wall-time sidecar; intentionally outside the reproducibility contract."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("epoch,seconds\n")
        for r in history.records:
            handle.write(f"{r.epoch},{r.seconds:.3f}\n")


def read_history_csv(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        columns = None
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if columns is None:
                columns = line.split(",")
                continue
            values = line.split(",")
            row = dict(zip(columns, values))
            rows.append(
                {
                    "epoch": int(row["epoch"]),
                    "train_acc": float(row["train_acc"]),
                    "test_acc": float(row["test_acc"]),
                    "mean_loss": float(row["mean_loss"]),
                    "lr": float(row["lr"]),
                }
            )
    return rows
