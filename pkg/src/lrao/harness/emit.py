"""Write experiment results to a directory: CSV tables, model files, manifest."""

import hashlib
import platform
import sys
from pathlib import Path

import numpy as np
import scipy
import sklearn

from .. import __version__
from . import io
from .experiments import CNN, GM_COLUMNS, asymptotic_curve

MANIFEST = "manifest.json"


class EmitError(OSError):
    """An output file could not be written."""


def versions():
    return {"lrao": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "scikit-learn": sklearn.__version__}


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Emitter:
    """Collects written files so the manifest can list them with checksums."""

    def __init__(self, out):
        self.out = Path(out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise EmitError(f"{self.out}: {exc.strerror}") from None
        self.files = []

    def path(self, name):
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return p

    def write(self, name, fn, *args, **kwargs):
        p = self.path(name)
        try:
            fn(p, *args, **kwargs)
        except OSError as exc:
            raise EmitError(f"{p}: {exc.strerror}") from None
        return p

    def manifest(self, command, seed, config, **sections):
        doc = {"command": command, "seed": int(seed), "config": config, "versions": versions(),
               "argv": sys.argv[1:],
               "outputs": {name: _sha256(self.out / name) for name in sorted(set(self.files))}}
        doc.update(sections)
        try:
            io.write_manifest(self.out / MANIFEST, doc)
        except OSError as exc:
            raise EmitError(f"{self.out / MANIFEST}: {exc.strerror}") from None
        return doc


def _statistics_rows(h0, h1):
    m = max(len(h0), len(h1))
    col = lambda a, i: float(a[i]) if i < len(a) else float("nan")  # noqa: E731
    return [(i, col(h0, i), col(h1, i)) for i in range(m)]


def emit_cauchy(result, out):
    em = Emitter(out)
    val, trn = result.normalized_validation, result.normalized_train
    rows = [(e, float(trn[e]) if e < trn.size else float("nan"), float(val[e]))
            for e in range(val.size)]
    em.write("training_curve.csv", io.write_table_csv,
             ("epoch", "train_normalized_trace", "validation_normalized_trace"), rows)
    em.write("model.json", io.save_model, result.params,
             train_config=result.config["train"], extra={"filter_ar": list(result.filter.coeffs)})
    summary_rows, evals = [], {}
    for ev in result.evaluations:
        em.write(f"roc_{ev.label}.csv", io.write_roc_csv, ev.curve)
        em.write(f"asymptotic_{ev.label}.csv", io.write_roc_csv, ev.asymptotic)
        em.write(f"statistics_{ev.label}.csv", io.write_table_csv, ("trial", "h0", "h1"),
                 _statistics_rows(ev.h0, ev.h1))
        summary_rows += [(0, 0, f"lrao_{ev.label}", ev.curve.auc),
                         (0, 0, f"asymptotic_{ev.label}", ev.asymptotic.auc)]
        evals[ev.label] = {"n": ev.n, "snr_db": ev.snr_db, "auc": ev.curve.auc,
                           "asymptotic_auc": ev.asymptotic.auc, "noncentrality": ev.noncentrality,
                           "empirical_fpr": ev.empirical_fpr, "h0_mean": float(np.mean(ev.h0))}
    em.write("summary.csv", io.write_summary_csv, summary_rows)
    summary = {"fisher_trace": result.fisher_trace, "best_normalized_trace": result.best_ratio,
               "best_epoch": result.trace.best_epoch, "stopped_reason": result.trace.stopped_reason,
               "filter_ar": list(result.filter.coeffs), "evaluations": evals}
    return em.manifest("simulate-cauchy", result.seed, result.config, seeds=result.seeds,
                       summary=summary)


def emit_gm_demo(result, cfg, seed, out):
    em = Emitter(out)
    em.write("gm_demo.csv", io.write_table_csv, GM_COLUMNS, result.rows)
    summary = {"fisher_information": result.fisher_information, "crlb_sd": result.crlb_sd,
               "threshold": result.threshold}
    return em.manifest("gm-demo", seed, cfg, seeds=result.seeds, summary=summary)


def emit_sensor(result, cfg, seed, out, dataset=None):
    em = Emitter(out)
    em.write("summary.csv", io.write_summary_csv, result.records())
    for det in cfg["detectors"]:
        em.write(f"roc_{det}.csv", io.write_roc_csv, result.pooled_curve(det))
    if CNN in cfg["detectors"]:
        em.write(f"asymptotic_{CNN}.csv", io.write_roc_csv,
                 asymptotic_curve(result, cfg["fpr_grid_points"]))
    for (fold, repeat), models in sorted(result.models.items()):
        if CNN in models:
            em.write(f"models/fold{fold}_repeat{repeat}.json", io.save_model,
                     models[CNN].transformer_.params_, train_config=cfg["train"])
    cells = [{"fold": o.fold, "repeat": o.repeat, "epochs": o.epochs, "seeds": o.seeds,
              "extra": o.extra} for o in sorted(result.outcomes, key=lambda o: (o.fold, o.repeat))]
    ds_info = None
    if dataset is not None:
        ds_info = {"provenance": dataset.provenance, "preproc": dataset.preproc,
                   "sequences": len(dataset), "n": dataset.n}
    return em.manifest("sensor-cv", seed, cfg, cells=cells, dataset=ds_info,
                       summary={"auc": result.summary(), "pooling": "folds x repeats"})
