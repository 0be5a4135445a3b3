"""Nested cross-validation with contiguous folds and (seed, fold, repeat) rng streams."""

from dataclasses import dataclass, field

import numpy as np

from .. import stats


class FoldError(RuntimeError):
    """A training or evaluation step failed inside a specific fold/repeat."""

    def __init__(self, fold, repeat, cause):
        super().__init__(f"fold {fold}, repeat {repeat}: {type(cause).__name__}: {cause}")
        self.fold, self.repeat, self.cause = fold, repeat, cause


def contiguous_folds(count, k):
    """Index blocks ``[0..a), [a..b), ...`` whose sizes differ by at most one."""
    if k < 1:
        raise ValueError("fold count must be >= 1")
    if count < k:
        raise ValueError(f"cannot split {count} items into {k} folds")
    return [np.asarray(b, dtype=np.intp) for b in np.array_split(np.arange(count), k)]


def derive_seed(master, *keys):
    """Deterministic 63-bit seed for a (master, key...) stream."""
    ss = np.random.SeedSequence([int(master)] + [int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# stream tags, so the same (fold, repeat) never reuses a stream for two purposes
SELECT_STREAM, FIT_STREAM, EVAL_STREAM = 1, 2, 3


@dataclass(frozen=True)
class CvPlan:
    outer_folds: int = 10
    inner_folds: int = 9
    seed: int = 0
    repeats: int = 20
    inner_per_repeat: bool = False

    def __post_init__(self):
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ValueError("outer_folds and inner_folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    def outer(self, count):
        return contiguous_folds(count, self.outer_folds)

    def select_seed(self, fold, repeat, inner):
        rep = repeat if self.inner_per_repeat else 0
        return derive_seed(self.seed, SELECT_STREAM, fold, rep, inner)

    def fit_seed(self, fold, repeat):
        return derive_seed(self.seed, FIT_STREAM, fold, repeat)

    def eval_seed(self, fold, repeat):
        return derive_seed(self.seed, EVAL_STREAM, fold, repeat)


@dataclass
class FoldOutcome:
    fold: int
    repeat: int
    epochs: object
    seeds: dict
    auc: dict
    curves: dict
    h0: dict
    h1: dict
    extra: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    outcomes: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)

    @property
    def detectors(self):
        names = []
        for o in self.outcomes:
            names.extend(k for k in o.auc if k not in names)
        return names

    def records(self):
        """``(fold, repeat, detector, auc)`` rows in (fold, repeat, detector) order."""
        rows = []
        for o in sorted(self.outcomes, key=lambda o: (o.fold, o.repeat)):
            rows.extend((o.fold, o.repeat, d, o.auc[d]) for d in self.detectors if d in o.auc)
        return rows

    def aucs(self, detector):
        return np.array([o.auc[detector] for o in sorted(self.outcomes, key=lambda o: (o.fold, o.repeat))
                         if detector in o.auc])

    def repeat_means(self, detector):
        """Mean AUC over folds for every repeat (index = repeat)."""
        reps = sorted({o.repeat for o in self.outcomes})
        return np.array([np.mean([o.auc[detector] for o in self.outcomes
                                  if o.repeat == r and detector in o.auc]) for r in reps])

    def summary(self):
        """Median and 2.5/97.5 percentiles of AUC pooled over folds and repeats."""
        out = {}
        for d in self.detectors:
            a = self.aucs(d)
            lo, med, hi = np.percentile(a, [2.5, 50.0, 97.5])
            out[d] = {"median": float(med), "p2.5": float(lo), "p97.5": float(hi), "count": int(a.size)}
        return out

    def pooled_curve(self, detector, repeat=None):
        """ROC from all test-fold statistics of one repeat (or all repeats)."""
        sel = [o for o in self.outcomes if detector in o.h0 and (repeat is None or o.repeat == repeat)]
        if not sel:
            return None
        return stats.roc(np.concatenate([o.h0[detector] for o in sel]),
                         np.concatenate([o.h1[detector] for o in sel]))


def select_epochs(train_seqs, plan, select_fn, fold, repeat):
    """Median over inner folds of the early-stopping epoch returned by ``select_fn``."""
    inner = contiguous_folds(len(train_seqs), plan.inner_folds)
    best, seeds = [], []
    for j, val_idx in enumerate(inner):
        mask = np.ones(len(train_seqs), dtype=bool)
        mask[val_idx] = False
        seed = plan.select_seed(fold, repeat, j)
        seeds.append(seed)
        best.append(int(select_fn(train_seqs[mask], train_seqs[val_idx], seed)))
    return max(1, int(np.round(np.median(best)))), best, seeds


def _select_from_seeds(train_seqs, plan, select_fn, seeds):
    inner = contiguous_folds(len(train_seqs), plan.inner_folds)
    best = []
    for val_idx, seed in zip(inner, seeds, strict=True):
        mask = np.ones(len(train_seqs), dtype=bool)
        mask[val_idx] = False
        best.append(int(select_fn(train_seqs[mask], train_seqs[val_idx], seed)))
    return max(1, int(np.round(np.median(best)))), best, list(seeds)


def run_fold(ds_seqs, plan, fold, repeat, fit_fn, eval_fn, select_fn=None, selection=None,
             seeds=None):
    """One (outer fold, repeat) cell.

    ``selection`` reuses an earlier epoch selection; ``seeds`` (as recorded in
    an outcome) replaces the plan-derived seeds.
    """
    folds = plan.outer(len(ds_seqs))
    test_idx = folds[fold]
    mask = np.ones(len(ds_seqs), dtype=bool)
    mask[test_idx] = False
    trainval, test = ds_seqs[mask], ds_seqs[test_idx]
    given = seeds
    seeds = {}
    try:
        epochs = None
        if select_fn is not None:
            if given is not None:
                selection = _select_from_seeds(trainval, plan, select_fn, given["inner"])
            elif selection is None:
                selection = select_epochs(trainval, plan, select_fn, fold, repeat)
            epochs, inner_best, seeds["inner"] = selection
            seeds["inner_best_epochs"] = inner_best
        seeds["fit"] = given["fit"] if given is not None else plan.fit_seed(fold, repeat)
        seeds["eval"] = given["eval"] if given is not None else plan.eval_seed(fold, repeat)
        model = fit_fn(trainval, epochs, seeds["fit"])
        scored = eval_fn(model, test, np.random.default_rng(seeds["eval"]))
    except Exception as exc:  # noqa: BLE001 - re-raised with fold context
        raise FoldError(fold, repeat, exc) from exc
    extra = {}
    if isinstance(scored, tuple):
        scored, extra = scored
    auc, curves, h0, h1 = {}, {}, {}, {}
    for name, (s0, s1) in scored.items():
        curve = stats.roc(s0, s1)
        auc[name], curves[name] = curve.auc, curve
        h0[name], h1[name] = np.asarray(s0), np.asarray(s1)
    outcome = FoldOutcome(fold, repeat, epochs, seeds, auc, curves, h0, h1, extra)
    return outcome, model, selection


def nested_cv(ds, plan, fit_fn, eval_fn, select_fn=None, *, folds=None, repeats=None,
              on_progress=None):
    """Outer CV over contiguous folds, repeated ``plan.repeats`` times.

    fit_fn(trainval, epochs, seed) -> model
    eval_fn(model, test, rng) -> {detector: (h0_statistics, h1_statistics)}, optionally
        paired with a dict of extra per-cell values
    select_fn(train, val, seed) -> best epoch, or None when nothing is tuned.

    With ``plan.inner_per_repeat`` false, the inner selection runs once per
    outer fold and is shared by its repeats, which still refit from fresh
    seeds and draw fresh signal phases.
    """
    seqs = ds.sequences if hasattr(ds, "sequences") else np.asarray(ds, dtype=np.float64)
    if len(seqs) < plan.outer_folds:
        raise ValueError(f"dataset has {len(seqs)} sequences, fewer than {plan.outer_folds} folds")
    result = ExperimentResult()
    fold_ids = range(plan.outer_folds) if folds is None else folds
    repeat_ids = range(plan.repeats) if repeats is None else repeats
    for fold in fold_ids:
        shared = None
        for repeat in repeat_ids:
            outcome, model, sel = run_fold(seqs, plan, fold, repeat, fit_fn, eval_fn, select_fn,
                                           None if plan.inner_per_repeat else shared)
            shared = sel
            result.outcomes.append(outcome)
            result.models[(fold, repeat)] = model
            if on_progress is not None:
                on_progress(outcome)
    return result
