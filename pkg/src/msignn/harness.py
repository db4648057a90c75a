"""Training loop, two-stage grid search and result aggregation."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .graph import Graph, SplitMasks
from .models import Model, ModelConfig, Propagation, save_checkpoint
from .structure import (MsiConfig, SelectedStructure, build_msi_layer, igr_scores,
                        rank_columns, select_from_ranking)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    patience: int = 200
    lr: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.patience < self.epochs:
            raise ValueError("need 0 < patience < epochs")


class Workspace:
    """Per-graph caches: propagation operators and per-split column rankings."""

    def __init__(self, graph: Graph, prop: Propagation | None = None):
        self.graph = graph
        self.prop = prop or Propagation(graph)
        self._rankings = {}

    def ranking(self, split: SplitMasks, hop: int):
        key = (split.train.tobytes(), hop)
        if key not in self._rankings:
            hops = self.prop.hop_adjacency(hop)
            self._rankings[key] = rank_columns(hops[hop - 1], self.graph.labels, split.train)
        return self._rankings[key]

    def selections(self, split: SplitMasks, msi: MsiConfig) -> list[SelectedStructure]:
        hops = self.prop.hop_adjacency(msi.max_hop)
        out = []
        for i, c in enumerate(msi.c_a, start=1):
            if c == 0:
                out.append(SelectedStructure(i, np.zeros(0, np.int64), hops[i - 1].matrix[:, :0]))
            else:
                out.append(select_from_ranking(hops[i - 1], self.ranking(split, i), msi.t, msi.n))
        return out

    def inputs(self, split: SplitMasks, config: ModelConfig):
        """0-th layer input matrix and the structural selections behind it."""
        if config.msi is None:
            return self.graph.features, []
        sel = self.selections(split, config.msi)
        return build_msi_layer(self.graph.features, sel, config.msi), sel


@dataclass
class TrainResult:
    model: Model | None
    best_epoch: int
    epochs_run: int
    val_loss: float
    train_acc: float
    val_acc: float
    test_acc: float
    failed: bool = False
    error: str = ""
    history: list = field(default_factory=list, repr=False)
    selected: list = field(default_factory=list, repr=False)


def accuracy(logits: np.ndarray, labels, rows) -> float:
    rows = np.asarray(rows)
    return float((logits[rows].argmax(axis=1) == np.asarray(labels)[rows]).mean())


def train_once(graph: Graph, split: SplitMasks, config: ModelConfig,
               train: TrainConfig = TrainConfig(), workspace: Workspace | None = None,
               inputs=None, keep_history=False) -> TrainResult:
    """Full-batch Adam training with early stopping on validation loss.

    Stops once the validation loss has not strictly improved for
    ``train.patience`` epochs and returns the model restored to its
    best-validation-loss epoch.
    """
    ws = workspace or Workspace(graph)
    selected = []
    if inputs is None:
        inputs, selected = ws.inputs(split, config)
    x = ad.Tensor(inputs)
    init_rng = np.random.default_rng([train.seed, 0])
    drop_rng = np.random.default_rng([train.seed, 1])
    model = Model(config, x.shape[1], graph.num_classes, init_rng)
    opt = ad.Adam(model.params.values(), lr=train.lr,
                  weight_decay=config.weight_decay, decay=model.decay_mask())
    labels = graph.labels
    best_loss, best_state, best_logits, best_epoch = np.inf, None, None, 0
    history, stale, epoch = [], 0, 0
    try:
        for epoch in range(1, train.epochs + 1):
            logits = model.forward(x, ws.prop, drop_rng, training=True)
            loss = ad.softmax_cross_entropy(logits, labels, split.train)
            loss.backward()
            opt.step()
            out = model.forward(x, ws.prop, training=False).value
            val_loss = float(-ad.log_softmax(out[split.val])[
                np.arange(len(split.val)), labels[split.val]].mean())
            if not np.isfinite(val_loss):
                raise ad.NonFiniteError("validation loss is not finite")
            if keep_history:
                history.append((float(loss.value.item()), val_loss))
            if val_loss < best_loss:
                best_loss, best_state, best_logits, best_epoch = val_loss, model.state(), out, epoch
                stale = 0
            else:
                stale += 1
                if stale >= train.patience:
                    break
    except ad.NonFiniteError as exc:
        log.warning("%s diverged at epoch %d: %s", config.name, epoch, exc)
        return TrainResult(None, best_epoch, epoch, float("nan"), 0.0, 0.0, 0.0,
                           failed=True, error=str(exc), history=history, selected=selected)
    model.load_state(best_state)
    return TrainResult(
        model, best_epoch, epoch, best_loss,
        accuracy(best_logits, labels, split.train),
        accuracy(best_logits, labels, split.val),
        accuracy(best_logits, labels, split.test),
        history=history, selected=selected)


# --------------------------------------------------------------------------
# evaluation over splits

@dataclass
class ExperimentResult:
    dataset: str
    model: str
    config: dict
    accuracies: list            # test accuracy per split, percent
    val_accuracies: list
    best_epochs: list
    seeds: list
    wall_clock: list
    failed_splits: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def mean_val(self) -> float:
        return float(np.mean(self.val_accuracies))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(mean=self.mean, std=self.std)
        return d


def _run_split(graph, split, config, train, index, ckpt_dir=None, workspace=None):
    t0 = time.perf_counter()
    res = train_once(graph, split, config, train, workspace)
    if ckpt_dir is not None and not res.failed:
        meta = {"config": config.to_dict(), "split_index": index, "split_seed": split.seed,
                "train_seed": train.seed,
                "msi_columns": {str(s.hop): s.column_nodes.tolist() for s in res.selected}}
        save_checkpoint(Path(ckpt_dir) / f"split{index:02d}.npz", res.model.state(), meta)
    return index, res.test_acc, res.val_acc, res.best_epoch, res.failed, time.perf_counter() - t0


def _run_split_task(args):
    return _run_split(*args)


def evaluate(graph: Graph, splits: Sequence[SplitMasks], config: ModelConfig,
             train: TrainConfig = TrainConfig(), jobs: int = 1,
             checkpoint_dir=None, workspace: Workspace | None = None) -> ExperimentResult:
    """Train one model per split and report test accuracy at the best epoch.

    Split ``k`` trains with seed ``train.seed + k``. Diverged runs count as
    0% and are listed in ``failed_splits``.
    """
    tasks = [(graph, s, config, replace(train, seed=train.seed + k), k, checkpoint_dir)
             for k, s in enumerate(splits)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_split_task, tasks))
    else:
        ws = workspace or Workspace(graph)
        rows = [_run_split(*t, workspace=ws) for t in tasks]
    rows.sort()
    return ExperimentResult(
        dataset=graph.name, model=config.name, config=config.to_dict(),
        accuracies=[100.0 * r[1] for r in rows],
        val_accuracies=[100.0 * r[2] for r in rows],
        best_epochs=[r[3] for r in rows],
        seeds=[train.seed + r[0] for r in rows],
        wall_clock=[r[5] for r in rows],
        failed_splits=[r[0] for r in rows if r[4]])


def write_results(result: ExperimentResult, out_dir, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = result.to_dict()
    if extra:
        payload.update(extra)
    (out / "results.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    with (out / "results.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "model", "mean_acc", "std"])
        w.writerow([result.dataset, result.model, f"{result.mean:.2f}", f"{result.std:.2f}"])
    return out


# --------------------------------------------------------------------------
# duplicated-vector study

def duplicated_inputs(graph: Graph, split: SplitMasks, c_useful: int, c_noise: int,
                      dim: int = 100, seed: int = 0) -> np.ndarray:
    """Concatenate ``c_useful`` copies of a useful block and ``c_noise`` of a noise block.

    The useful block is the ``dim`` feature columns with the highest gain
    ratio on the split's training nodes (features binarized at > 0). The
    noise block is ``dim`` uniform random 0/1 columns drawn from ``seed``.
    """
    if c_useful < 0 or c_noise < 0 or c_useful + c_noise == 0:
        raise ValueError("need non-negative combined numbers, not both zero")
    x = np.asarray(graph.features)
    scores, _ = igr_scores((x > 0).astype(np.float64), graph.labels, split.train)
    order = np.lexsort((np.arange(len(scores)), -np.round(scores, 12)))
    useful = x[:, np.sort(order[:dim])]
    noise = np.random.default_rng(seed).integers(0, 2, size=(graph.num_nodes, dim)).astype(float)
    return np.hstack([useful] * c_useful + [noise] * c_noise)


def duplication_study(graph: Graph, splits: Sequence[SplitMasks], config: ModelConfig,
                      c_useful: int, c_noise_values: Sequence[int],
                      train: TrainConfig = TrainConfig(), dim: int = 100) -> dict:
    """Mean test accuracy (percent) for each noise-block combined number."""
    ws = Workspace(graph)
    out = {}
    for c_noise in c_noise_values:
        accs = []
        for k, split in enumerate(splits):
            x = duplicated_inputs(graph, split, c_useful, c_noise, dim, seed=train.seed + k)
            res = train_once(graph, split, config, replace(train, seed=train.seed + k), ws,
                             inputs=x)
            accs.append(100.0 * res.test_acc)
        out[c_noise] = float(np.mean(accs))
    return out


# --------------------------------------------------------------------------
# grid search

@dataclass(frozen=True)
class SearchSpace:
    dropout: tuple = (0.0, 0.5)
    weight_decay: tuple = (5e-4, 1e-5)
    activation: tuple = ("relu", "none")
    stage1_t: int = 1000
    stage1_lam: float = 0.5
    t: tuple = (10, 100, 1000)
    lam: tuple = (0.1, 0.5, 1.0)
    c_x: tuple = (0, 1)
    c_a: tuple = (0, 1, 4, 8)
    n: int = 1
    max_hop: int = 2

    @classmethod
    def published(cls, citation: bool = False) -> "SearchSpace":
        return cls(c_a=(0, 1)) if citation else cls()

    def combined_numbers(self):
        """All (c_x, (c_a1, ..., c_am)) except the all-zero one."""
        for c_x, *c_a in itertools.product(self.c_x, *[self.c_a] * self.max_hop):
            if c_x or any(c_a):
                yield c_x, tuple(c_a)


@dataclass
class SearchResult:
    best: ModelConfig
    scores: list          # (config, mean validation accuracy) in grid order
    stage1_best: ModelConfig | None = None


def search_configs(graph, splits, candidates: Sequence[ModelConfig],
                   train: TrainConfig = TrainConfig(), jobs: int = 1,
                   workspace: Workspace | None = None) -> SearchResult:
    """Pick the candidate with the highest mean validation accuracy.

    Ties go to the earliest candidate; failed splits score 0.
    """
    if not candidates:
        raise ValueError("empty search grid")
    ws = workspace or Workspace(graph)
    scores = []
    for cand in candidates:
        res = evaluate(graph, splits, cand, train, jobs=jobs, workspace=None if jobs > 1 else ws)
        scores.append((cand, res.mean_val))
        log.info("%s val=%.2f", cand, res.mean_val)
    best = max(range(len(scores)), key=lambda i: (scores[i][1], -i))
    return SearchResult(scores[best][0], scores)


def stage1_grid(base: ModelConfig, space: SearchSpace, msi: bool) -> list[ModelConfig]:
    acts = space.activation if base.kind == "h2gcn" else (base.activation,)
    out = []
    for dr, wd, act in itertools.product(space.dropout, space.weight_decay, acts):
        cfg = replace(base, dropout=dr, weight_decay=wd, activation=act, msi=None)
        if not msi:
            out.append(cfg)
            continue
        for c_x, c_a in space.combined_numbers():
            out.append(replace(cfg, msi=MsiConfig(space.stage1_t, space.n, space.stage1_lam, c_x, c_a)))
    return out


def stage2_grid(fixed: ModelConfig, space: SearchSpace) -> list[ModelConfig]:
    return [replace(fixed, msi=MsiConfig(t, space.n, lam, c_x, c_a))
            for t, lam in itertools.product(space.t, space.lam)
            for c_x, c_a in space.combined_numbers()]


def grid_search(graph, splits, base: ModelConfig, space: SearchSpace | None = None,
                train: TrainConfig = TrainConfig(), bypass: ModelConfig | None = None,
                jobs: int = 1) -> SearchResult:
    """Two-stage search.

    Stage 1 fixes ``t`` and ``lam`` and searches dropout, weight decay,
    activation (H2GCN) and combined numbers. Stage 2 keeps the stage-1
    GNN settings and searches ``t``, ``lam`` and combined numbers. Plain
    models (``base.msi is None``) only run stage 1. With ``bypass`` the
    given config is returned untouched.
    """
    if bypass is not None:
        return SearchResult(bypass, [], None)
    space = space or SearchSpace()
    ws = Workspace(graph)
    msi = base.msi is not None
    first = search_configs(graph, splits, stage1_grid(base, space, msi), train, jobs, ws)
    if not msi:
        return first
    second = search_configs(graph, splits, stage2_grid(first.best, space), train, jobs, ws)
    return SearchResult(second.best, first.scores + second.scores, first.best)
