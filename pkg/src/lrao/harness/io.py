"""Series ingestion, segmentation, and the on-disk formats (model file, CSV, manifest).

Floats are written with 17 significant digits, which round-trips every double.
Text files use LF line endings regardless of platform.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..nnet import ConvNetParams, InputScaling

MODEL_FORMAT = "lrao-convnet"
MODEL_VERSION = 1
ROC_COLUMNS = ("fpr", "tpr")
SUMMARY_COLUMNS = ("fold", "repeat", "detector", "auc")


class DataFormatError(ValueError):
    """A record in an input file could not be parsed."""


def fmt(x):
    """Decimal text of a float with 17 significant digits."""
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return format(x, ".17g")


@dataclass
class Dataset:
    sequences: np.ndarray
    provenance: str = ""
    preproc: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sequences = np.asarray(self.sequences, dtype=np.float64)
        if self.sequences.ndim != 2:
            raise ValueError("sequences must be 2-D (count, length)")

    def __len__(self):
        return self.sequences.shape[0]

    @property
    def n(self):
        return self.sequences.shape[1]


def load_series(path):
    """One numeric sample per line; blank lines and ``#`` comments are skipped."""
    path = Path(path)
    values = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                v = float(text)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: cannot parse {text!r} as a number") from None
            if not math.isfinite(v):
                raise DataFormatError(f"{path}:{lineno}: non-finite sample {text!r}")
            values.append(v)
    return np.asarray(values, dtype=np.float64)


def save_series(path, x):
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for v in np.asarray(x, dtype=np.float64).ravel():
            fh.write(fmt(v) + "\n")


def segment(series, n, provenance=""):
    """Non-overlapping length-``n`` sequences; the trailing remainder is dropped."""
    x = np.asarray(series, dtype=np.float64).ravel()
    if n < 1:
        raise ValueError("segment length must be >= 1")
    count = x.size // n
    if count == 0:
        raise ValueError(f"series of length {x.size} is shorter than one segment of {n}")
    return Dataset(x[:count * n].reshape(count, n).copy(), provenance=provenance,
                   preproc={"segment_length": n, "dropped_samples": int(x.size - count * n)})


# ---------------------------------------------------------------------------
# model file


def _array_text(a):
    a = np.asarray(a)
    if a.ndim == 1:
        return "[" + ", ".join(fmt(v) for v in a) + "]"
    return "[" + ", ".join(_array_text(sub) for sub in a) + "]"


def save_model(path, params, *, train_config=None, extra=None):
    """Write a versioned JSON model file with weights at 17 significant digits."""
    scaling = params.meta.get("scaling", InputScaling())
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "package_version": __version__,
        "architecture": {
            "num_layers": params.num_layers,
            "channels": params.channels,
            "filter_width": params.filter_width,
            "activation": "tanh",
            "bias": False,
        },
        "gain": None,
        "seed": params.seed,
        "input_scaling": {"mode": scaling.mode, "location": None, "scale": None},
        "train_config": train_config or {},
        "extra": extra or {},
        "kernels": [],
    }
    # numbers that must keep 17 digits are spliced in as raw JSON text
    raw = {"gain": fmt(params.gain), "location": fmt(scaling.location),
           "scale": fmt(scaling.scale),
           "kernels": "[" + ", ".join(_array_text(k) for k in params.kernels) + "]"}
    doc["gain"] = "@@gain@@"
    doc["input_scaling"]["location"] = "@@location@@"
    doc["input_scaling"]["scale"] = "@@scale@@"
    doc["kernels"] = "@@kernels@@"
    text = json.dumps(doc, indent=2, sort_keys=False)
    for key, value in raw.items():
        text = text.replace(f'"@@{key}@@"', value)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def load_model(path):
    """Read a model file; returns ``(params, document)``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not a valid model file ({exc})") from None
    if doc.get("format") != MODEL_FORMAT:
        raise DataFormatError(f"{path}: unknown model format {doc.get('format')!r}")
    if doc.get("version") != MODEL_VERSION:
        raise DataFormatError(f"{path}: unsupported model version {doc.get('version')!r}")
    sc = doc["input_scaling"]
    params = ConvNetParams([np.asarray(k, dtype=np.float64) for k in doc["kernels"]],
                           gain=float(doc["gain"]), seed=doc.get("seed"))
    params.meta["scaling"] = InputScaling(sc["mode"], float(sc["location"]), float(sc["scale"]))
    return params, doc


# ---------------------------------------------------------------------------
# CSV and manifest


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_roc_csv(path, curve):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(ROC_COLUMNS)
        if curve is not None:
            for f, t in zip(curve.fpr, curve.tpr):
                w.writerow((fmt(f), fmt(t)))


def read_roc_csv(path):
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != ROC_COLUMNS:
        raise DataFormatError(f"{path}: expected header {','.join(ROC_COLUMNS)}")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64).reshape(-1, 2)
    return data[:, 0], data[:, 1]


def write_table_csv(path, columns, rows):
    """Generic CSV: floats at 17 significant digits, other values as text."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_table_csv(path):
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    return rows[0], rows[1:]


def write_summary_csv(path, records):
    """``records``: iterable of (fold, repeat, detector, auc)."""
    write_table_csv(path, SUMMARY_COLUMNS, [(int(f), int(r), str(d), float(a))
                                            for f, r, d, a in records])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(path, manifest):
    text = json.dumps(_jsonable(manifest), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def read_manifest(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
