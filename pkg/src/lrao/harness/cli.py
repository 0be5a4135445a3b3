"""Command-line entry point (``lrao``).

Each command takes ``--config FILE`` (YAML, or a manifest from an earlier
run), ``--set key=value`` overrides, and one flag per config key
(``--train.learning_rate 1e-3``). Failures print a single line
``error: <Kind>: <message>`` to stderr and exit nonzero.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import stats
from ..estimators import GlrtReferenceDetector, LfiNetTransformer, LRaoDetector
from ..nnet import robust_normalize
from . import config as config_mod
from . import emit, experiments, io
from .config import ConfigError

EXIT_USAGE = 2
EXIT_FAILURE = 1

EXPERIMENTS = ("simulate-cauchy", "gm-demo", "train", "sensor-cv", "surrogate-gen")
HELP = {
    "simulate-cauchy": "train on filtered Cauchy noise and evaluate LRao at two lengths",
    "gm-demo": "LBLUE / LRao sweep on Gaussian-mixture noise, raw vs score transform",
    "train": "train the network on a noise-only series and write a model file",
    "detect": "LRao or reference statistics for each sequence of a series",
    "roc": "ROC curve from H0 and H1 statistic files written by detect",
    "sensor-cv": "nested cross-validation of CNN+LRao against the reference detectors",
    "surrogate-gen": "write a spiky-Gaussian surrogate noise series",
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_flags(parser, command):
    group = parser.add_argument_group("configuration keys")
    for key, value in config_mod.flatten(config_mod.defaults(command)).items():
        names = [f"--{key}"]
        if "_" in key:
            names.append(f"--{key.replace('_', '-')}")
        group.add_argument(*names, dest=f"cfg:{key}", metavar="VALUE", default=argparse.SUPPRESS,
                           help=f"(default: {json.dumps(value)})")


def build_parser():
    parser = _Parser(prog="lrao", description="Weak-signal detection with learned LRao detectors.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for command, text in HELP.items():
        p = sub.add_parser(command, help=text, description=text)
        p.add_argument("--config", type=Path, help="YAML config or a manifest.json to re-run")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        if command in EXPERIMENTS:
            p.add_argument("--seed", type=int, required=True, help="master random seed")
        if command == "detect":
            p.add_argument("--model", type=Path, help="model file (cnn_lrao detector)")
            p.add_argument("--noise", type=Path, required=True,
                           help="noise-only series used to fit the detector")
            p.add_argument("--input", type=Path, required=True, help="series to score")
        if command == "roc":
            p.add_argument("--h0", type=Path, required=True, help="statistics under H0")
            p.add_argument("--h1", type=Path, required=True, help="statistics under H1")
        _add_config_flags(p, command)
    return parser


def _overrides(args):
    pairs = []
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), config_mod.parse_value(value)))
    for dest, value in vars(args).items():
        if dest.startswith("cfg:"):
            pairs.append((dest[4:], config_mod.parse_value(value)))
    return pairs


def _progress(outcome):
    logging.getLogger("lrao").info(
        "fold %d repeat %d: %s", outcome.fold, outcome.repeat,
        ", ".join(f"{k}={v:.3f}" for k, v in outcome.auc.items()))


# ---------------------------------------------------------------------------
# commands


def cmd_simulate_cauchy(args, cfg):
    result = experiments.run_cauchy_experiment(cfg, args.seed)
    emit.emit_cauchy(result, args.out)
    return {"best_normalized_trace": result.best_ratio,
            "auc": {e.label: e.curve.auc for e in result.evaluations}}


def cmd_gm_demo(args, cfg):
    result = experiments.run_gm_demo(cfg, args.seed)
    emit.emit_gm_demo(result, cfg, args.seed, args.out)
    return {"fisher_information": result.fisher_information, "crlb_sd": result.crlb_sd}


def cmd_sensor_cv(args, cfg):
    ds = experiments.sensor_dataset(cfg, args.seed)
    result = experiments.run_sensor_experiment(cfg, args.seed, ds=ds, on_progress=_progress)
    emit.emit_sensor(result, cfg, args.seed, args.out, dataset=ds)
    return {d: s["median"] for d, s in result.summary().items()}


def _dataset(cfg, key="series"):
    if cfg[key] is None:
        raise ConfigError(f"{key} must name a noise series file")
    series = io.load_series(cfg[key])
    mode = cfg["normalization"]
    if mode == "global":
        series = robust_normalize(series)
    elif mode != "none":
        raise ConfigError(f"normalization must be 'global' or 'none', got {mode!r}")
    return io.segment(series, cfg["signal"]["n"], str(cfg[key]))


def cmd_train(args, cfg):
    ds = _dataset(cfg)
    sig = cfg["signal"]
    tcfg = config_mod.train_config(cfg["train"], args.seed)
    est = LfiNetTransformer(f0=sig["f0"], n_harmonics=sig["n_harmonics"],
                            validation_fraction=cfg["validation_fraction"],
                            **{k: v for k, v in tcfg.to_dict().items()
                               if k in LfiNetTransformer._get_param_names()},
                            random_state=tcfg.seed)
    est.fit(ds.sequences)
    em = emit.Emitter(args.out)
    em.write("model.json", io.save_model, est.params_, train_config=cfg["train"],
             extra={"signal": sig})
    tr = est.trace_
    rows = [(e, float(tr.train_cost[e]) if e < len(tr.train_cost) else float("nan"),
             float(tr.validation_cost[e])) for e in range(len(tr.validation_cost))]
    em.write("training_curve.csv", io.write_table_csv, ("epoch", "train_cost", "validation_cost"),
             rows)
    em.manifest("train", args.seed, cfg, dataset={"provenance": ds.provenance,
                                                   "preproc": ds.preproc, "sequences": len(ds)},
                summary={"best_epoch": tr.best_epoch, "stopped_reason": tr.stopped_reason})
    return {"best_epoch": tr.best_epoch, "best_validation_cost": min(tr.validation_cost)}


def cmd_surrogate_gen(args, cfg):
    series = experiments.surrogate_series(cfg, args.seed)
    em = emit.Emitter(args.out)
    em.write("series.txt", io.save_series, series)
    em.manifest("surrogate-gen", args.seed, cfg,
                seeds={"surrogate": experiments.derive_seed(args.seed, experiments.SURROGATE)})
    return {"samples": int(series.size)}


def cmd_detect(args, cfg):
    sig = cfg["signal"]
    noise = io.load_series(args.noise)
    data = io.load_series(args.input)
    if cfg["normalization"] == "global":
        # the input is scaled with the noise reference so a present signal does not move it
        med = float(np.median(noise))
        scale = 1.483 * float(np.median(np.abs(noise - med)))
        if scale <= 0:
            raise ConfigError("noise series has zero MAD")
        noise, data = (noise - med) / scale, (data - med) / scale
    elif cfg["normalization"] != "none":
        raise ConfigError("normalization must be 'global' or 'none'")
    W = io.segment(noise, sig["n"]).sequences
    X = io.segment(data, sig["n"]).sequences
    kind = cfg["detector"]
    if kind == experiments.CNN:
        if args.model is None:
            raise UsageError("detector cnn_lrao needs --model")
        params, doc = io.load_model(args.model)
        net = LfiNetTransformer.from_params(params, f0=sig["f0"], n_harmonics=sig["n_harmonics"])
        det = LRaoDetector(net, f0=sig["f0"], n_harmonics=sig["n_harmonics"],
                           step=doc["train_config"].get("step_dtheta", 1e-2),
                           alpha=cfg["fpr_alpha"]).fit(W)
    elif kind == "lrao_identity":
        det = LRaoDetector(None, f0=sig["f0"], n_harmonics=sig["n_harmonics"],
                           alpha=cfg["fpr_alpha"]).fit(W)
    elif kind in experiments.REFERENCE_KINDS:
        det = GlrtReferenceDetector(kind, f0=sig["f0"], n_harmonics=sig["n_harmonics"],
                                    alpha=cfg["fpr_alpha"]).fit(W)
    else:
        raise ConfigError(f"unknown detector {kind!r}")
    t = det.decision_function(X)
    decision = (t > det.threshold_).astype(int)
    em = emit.Emitter(args.out)
    em.write("statistics.csv", io.write_table_csv, ("sequence", "statistic", "decision"),
             [(i, float(v), int(d)) for i, (v, d) in enumerate(zip(t, decision))])
    em.manifest("detect", 0, cfg, inputs={"model": args.model, "noise": args.noise,
                                          "input": args.input},
                summary={"threshold": float(det.threshold_), "detections": int(decision.sum())})
    return {"sequences": int(t.size), "detections": int(decision.sum())}


def _read_statistics(path):
    header, rows = io.read_table_csv(path)
    if "statistic" not in header:
        raise io.DataFormatError(f"{path}: no 'statistic' column")
    j = header.index("statistic")
    try:
        return np.array([float(r[j]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise io.DataFormatError(f"{path}: {exc}") from None


def cmd_roc(args, cfg):
    curve = stats.roc(_read_statistics(args.h0), _read_statistics(args.h1))
    em = emit.Emitter(args.out)
    em.write("roc.csv", io.write_roc_csv, curve)
    em.manifest("roc", 0, cfg, inputs={"h0": args.h0, "h1": args.h1}, summary={"auc": curve.auc})
    return {"auc": curve.auc}


COMMANDS = {"simulate-cauchy": cmd_simulate_cauchy, "gm-demo": cmd_gm_demo, "train": cmd_train,
            "detect": cmd_detect, "roc": cmd_roc, "sensor-cv": cmd_sensor_cv,
            "surrogate-gen": cmd_surrogate_gen}


def _fail(kind, message, code):
    print(f"error: {kind}: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required (see --help)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg, _ = config_mod.resolve(args.command, args.config, _overrides(args))
        summary = COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        return _fail(type(exc).__name__, exc, EXIT_USAGE)
    except KeyboardInterrupt:
        return _fail("Interrupted", "interrupted", 130)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one parsable line
        return _fail(type(exc).__name__, exc, EXIT_FAILURE)
    print(json.dumps({"status": "ok", "command": args.command, "out": str(args.out),
                      "summary": summary}, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
