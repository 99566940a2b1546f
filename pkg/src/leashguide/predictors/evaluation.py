"""K-fold comparison of velocity predictors with an "Avg (StdDev)" report."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..nn import ModelSpec
from .baselines import GeoCBaseline, NeuralPredictor, baseline_linear, baseline_vdcm
from .data import SequenceDataset
from .training import TrainConfig, train_predictor

Factory = Callable[[SequenceDataset, int], object]


def velocity_errors(pred, true) -> tuple[float, float, float]:
    """Joint RMSE of the velocity vector and per-axis RMSE.

    The joint error satisfies ``e**2 == e_x**2 + e_y**2``.
    """
    d = np.asarray(pred, float) - np.asarray(true, float)
    if d.size == 0:
        return 0.0, 0.0, 0.0
    ms = np.mean(d * d, axis=0)
    return float(np.sqrt(ms.sum())), float(np.sqrt(ms[0])), float(np.sqrt(ms[1]))


def format_avg_std(mean: float, std: float, digits: int = 3) -> str:
    return f"{mean:.{digits}f} ({std:.{digits}f})"


def sample_std(x) -> float:
    x = np.asarray(x, float)
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


@dataclass
class ModelScore:
    name: str
    fold_e: np.ndarray
    fold_ex: np.ndarray
    fold_ey: np.ndarray

    def summary(self):
        return tuple((float(np.mean(a)), sample_std(a)) for a in (self.fold_e, self.fold_ex, self.fold_ey))


@dataclass
class FoldSplit:
    fold: int
    group: str
    train_idx: np.ndarray
    test_idx: np.ndarray


@dataclass
class EvalReport:
    scores: list
    k_folds: int
    splits: list = field(default_factory=list)
    # name -> list of (test_idx, predictions) in split order
    predictions: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def score(self, name: str) -> ModelScore:
        for s in self.scores:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def best(self) -> str:
        return min(self.scores, key=lambda s: float(np.mean(s.fold_e))).name

    def to_text(self, title: str = "") -> str:
        header = ["Model", "Joint Error e", "e_x", "e_y"]
        body = []
        best = self.best
        for s in self.scores:
            (e, es), (x, xs), (y, ys) = s.summary()
            mark = " *" if s.name == best else ""
            body.append([s.name + mark, format_avg_std(e, es), format_avg_std(x, xs), format_avg_std(y, ys)])
        widths = [max(len(r[i]) for r in [header] + body) for i in range(4)]
        line = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
        out = []
        if title:
            out.append(title)
        out += [line(header), "  ".join("-" * w for w in widths)]
        out += [line(r) for r in body]
        out.append(f"Values are: Avg (StdDev) over {self.k_folds} folds, m/s. * marks the best model.")
        out += self.notes
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "e_mean", "e_std", "ex_mean", "ex_std", "ey_mean", "ey_std", "folds", "best"])
        best = self.best
        for s in self.scores:
            (e, es), (x, xs), (y, ys) = s.summary()
            w.writerow([s.name] + [repr(v) for v in (e, es, x, xs, y, ys)] + [self.k_folds, int(s.name == best)])
        return buf.getvalue()


def _purge(train_idx, test_idx, ds: SequenceDataset):
    """Drop training samples whose rows overlap any test sample's rows."""
    span = ds.window + ds.rollout_k
    tr_rows = ds.sample_rows[train_idx]
    te_rows = np.sort(ds.sample_rows[test_idx])
    if len(te_rows) == 0:
        return train_idx
    pos = np.searchsorted(te_rows, tr_rows)
    lo = te_rows[np.clip(pos - 1, 0, len(te_rows) - 1)]
    hi = te_rows[np.clip(pos, 0, len(te_rows) - 1)]
    # rows are global, so a neighbour across a log boundary is purged too (conservative)
    near = (np.abs(tr_rows - lo) <= span) | (np.abs(hi - tr_rows) <= span)
    return train_idx[~near]


def make_folds(ds: SequenceDataset, k_folds: int, per_subject: bool = False) -> list:
    """Contiguous fold assignment.

    Pooled: logs are grouped into ``k_folds`` contiguous blocks. Per subject:
    each subject's logs are grouped the same way when it has enough of them,
    otherwise its samples are cut into contiguous time blocks and training
    samples overlapping a test block are purged.
    """
    if k_folds < 2:
        raise ValueError("k_folds must be at least 2")
    splits = []
    if not per_subject:
        if ds.n_logs < k_folds:
            raise ValueError(f"{ds.n_logs} logs cannot form {k_folds} folds")
        blocks = np.array_split(np.arange(ds.n_logs), k_folds)
        for f, logs in enumerate(blocks):
            test = ds.select_logs(logs)
            train = np.setdiff1d(np.arange(len(ds)), test)
            splits.append(FoldSplit(f, "all", train, test))
        return splits
    subjects = list(dict.fromkeys(ds.log_subjects))
    for sid in subjects:
        logs = np.array([i for i, s in enumerate(ds.log_subjects) if s == sid])
        mine = ds.select_logs(logs)
        if len(logs) >= k_folds:
            for f, blk in enumerate(np.array_split(logs, k_folds)):
                test = ds.select_logs(blk)
                splits.append(FoldSplit(f, sid, np.setdiff1d(mine, test), test))
        else:
            if len(mine) < 2 * k_folds:
                raise ValueError(f"subject {sid!r} has too few samples for {k_folds} folds")
            for f, test in enumerate(np.array_split(mine, k_folds)):
                train = _purge(np.setdiff1d(mine, test), test, ds)
                splits.append(FoldSplit(f, sid, train, test))
    return splits


def kfold_evaluate(ds: SequenceDataset, factories, k_folds: int = 5, seed: int = 0,
                   per_subject: bool = False, keep_predictions: bool = True) -> EvalReport:
    """Cross-validated errors for each ``(name, factory)``.

    ``factory(train_dataset, seed)`` returns an object with
    ``predict(dataset, idx)``. In per-subject mode one predictor is trained
    per subject and fold; a fold's error pools all subjects' test samples.
    """
    factories = list(factories.items()) if isinstance(factories, dict) else list(factories)
    splits = make_folds(ds, k_folds, per_subject)
    scores, preds = [], {}
    for name, factory in factories:
        per_fold = [[] for _ in range(k_folds)]
        preds[name] = []
        for sp in splits:
            if len(sp.train_idx) == 0:
                raise ValueError(f"fold {sp.fold} of {sp.group!r} has no training samples")
            predictor = factory(ds.subset(sp.train_idx), seed + 1000 * sp.fold)
            p = predictor.predict(ds, sp.test_idx)
            per_fold[sp.fold].append((sp.test_idx, p))
            if keep_predictions:
                preds[name].append((sp.test_idx, p))
        e, ex, ey = [], [], []
        for parts in per_fold:
            idx = np.concatenate([i for i, _ in parts])
            p = np.concatenate([q for _, q in parts])
            a = velocity_errors(p, ds.labels(idx))
            e.append(a[0]), ex.append(a[1]), ey.append(a[2])
        scores.append(ModelScore(name, np.array(e), np.array(ex), np.array(ey)))
    return EvalReport(scores, k_folds, splits, preds if keep_predictions else {})


# standard factories ---------------------------------------------------------

def neural_factory(spec: ModelSpec, config: TrainConfig) -> Factory:
    def make(train: SequenceDataset, seed: int):
        cfg = TrainConfig(**{**config.__dict__, "seed": config.seed + seed})
        model, _ = train_predictor(train, spec, cfg)
        return NeuralPredictor(model)
    return make


def linear_factory(train: SequenceDataset, seed: int = 0):
    return baseline_linear(train)


def geoc_factory(train: SequenceDataset, seed: int = 0):
    return GeoCBaseline()


def vdcm_factory(train: SequenceDataset, seed: int = 0):
    return baseline_vdcm(train)
