"""The experiments behind the CLI: Cauchy simulation, Gaussian-mixture demo, sensor CV.

Every random draw comes from a stream derived from the master seed and a
fixed tag, so a run is reproducible from ``(config, seed)`` alone.
"""

from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.optimize import brentq
from sklearn.preprocessing import FunctionTransformer

from .. import lfi, sigmodel, simnoise, stats
from ..estimators import GlrtReferenceDetector, LfiNetTransformer, LRaoDetector
from ..nnet import robust_normalize, train, train_epochs
from .config import ConfigError, train_config
from .cv import CvPlan, derive_seed, nested_cv, run_fold
from .io import load_series, segment

# stream tags
FILTER, TRAIN_DATA, NET, EVAL, EVAL_LONG, CONTEXT_LONG, CONTEXT = 101, 102, 103, 104, 105, 106, 107
SURROGATE = 201
GM_CONTEXT, GM_TRIALS = 301, 302

REFERENCE_KINDS = ("limiter3", "sign", "identity")
CNN = "cnn_lrao"


def _rng(seed, tag):
    return np.random.default_rng(derive_seed(seed, tag))


def _observation(sig, n=None):
    return sigmodel.periodic_observation_matrix(n or sig["n"], sig["f0"], sig["n_harmonics"])


def _theta_at_snr(hm, theta, snr, noise_scale):
    """Rescale ``theta`` so the synthesized signal has the requested SNR."""
    current = sigmodel.snr_db(sigmodel.synth_signal(hm, theta), noise_scale)
    return np.asarray(theta, dtype=np.float64) * 10.0 ** ((snr - current) / 20.0)


def _label(n, snr):
    return f"n{n}_snr{snr}" if isinstance(snr, str) else f"n{n}_snr{snr:g}"


def _fpr_grid(points):
    return np.linspace(0.0, 1.0, int(points) + 1)[1:-1]


# ---------------------------------------------------------------------------
# Cauchy simulation


@dataclass
class Evaluation:
    label: str
    n: int
    snr_db: float
    h0: np.ndarray
    h1: np.ndarray
    curve: stats.RocCurve
    asymptotic: stats.RocCurve
    noncentrality: float
    empirical_fpr: float


@dataclass
class CauchyResult:
    config: dict
    seed: int
    filter: simnoise.ArFilter
    fisher_trace: float
    params: object
    trace: object
    detector: LRaoDetector
    detector_long: LRaoDetector
    evaluations: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)

    @property
    def normalized_validation(self):
        return -np.asarray(self.trace.validation_cost) / self.fisher_trace

    @property
    def normalized_train(self):
        return -np.asarray(self.trace.train_cost) / self.fisher_trace

    @property
    def best_ratio(self):
        return float(self.normalized_validation.max())


def cauchy_filter(cfg, seed):
    noise = cfg["noise"]
    if noise["reflection"] is not None:
        return simnoise.ArFilter(tuple(simnoise.reflection_to_ar(noise["reflection"])))
    return simnoise.random_stable_ar(int(noise["ar_order"]), _rng(seed, FILTER))


def calibrated_snr(det, hm, base_theta, noise_scale, fpr, tpr):
    """SNR at which the asymptotic LRao curve of ``det`` passes through (fpr, tpr).

    The noncentrality scales with the signal power, so one root solve in
    the noncentrality suffices.
    """
    if not 0 < fpr < tpr < 1:
        raise ConfigError("calibration needs 0 < fpr < tpr < 1")
    theta0 = _theta_at_snr(hm, base_theta, 0.0, noise_scale)
    lam0 = det.noncentrality(theta0)
    gamma = lfi.lrao_threshold(hm.l, fpr)
    lam = brentq(lambda x: lfi.lrao_asymptotic_tpr(hm.l, x, gamma) - tpr, 0.0, 1e4, xtol=1e-12)
    return float(10.0 * np.log10(lam / lam0))


def _evaluate_detector(det, model, hm, snr, ev, noise_scale, base_theta, rng, label):
    trials = int(ev["trials"])
    if snr == "auto":
        if ev["phases"] != "fixed":
            raise ConfigError("snr 'auto' requires evaluation.phases = 'fixed'")
        cal = ev["calibration"]
        snr = calibrated_snr(det, hm, base_theta, noise_scale, cal["fpr"], cal["tpr"])
    elif isinstance(snr, str):
        raise ConfigError(f"snr entries must be numbers or 'auto', got {snr!r}")
    h0 = det.decision_function(simnoise.generate(model, trials, rng))
    if ev["phases"] == "fixed":
        theta = _theta_at_snr(hm, base_theta, snr, noise_scale)
        sig = sigmodel.synth_signal(hm, theta)
        lam = det.noncentrality(theta)
    elif ev["phases"] == "random":
        a = sigmodel.equal_amplitude_for_snr(snr, noise_scale, hm.l // 2)
        thetas = np.array([sigmodel.random_equal_amplitude_params(a, hm.l // 2, rng)
                           for _ in range(trials)])
        sig = thetas @ hm.h.T
        lam = float(np.mean([det.noncentrality(t) for t in thetas]))
    else:
        raise ConfigError(f"evaluation.phases must be 'fixed' or 'random', got {ev['phases']!r}")
    h1 = det.decision_function(simnoise.generate(model, trials, rng) + sig)
    curve = stats.roc(h0, h1)
    asym = stats.asymptotic_roc(hm.l, lam, _fpr_grid(ev["fpr_grid_points"]))
    fpr = float(np.mean(h0 > lfi.lrao_threshold(hm.l, ev["fpr_alpha"])))
    return Evaluation(label, hm.n, float(snr), h0, h1, curve, asym, lam, fpr)


@dataclass
class CauchyTraining:
    filter: simnoise.ArFilter
    model: simnoise.CauchyNoiseModel
    w_train: np.ndarray
    w_val: np.ndarray
    params: object
    trace: object
    fisher_trace: float
    train_config: object

    @property
    def best_ratio(self):
        return float(-min(self.trace.validation_cost) / self.fisher_trace)


def train_cauchy(cfg, seed):
    """Generate the training/validation noise for ``seed`` and train the network."""
    sig, data = cfg["signal"], cfg["data"]
    hm = _observation(sig)
    ar = cauchy_filter(cfg, seed)
    model = simnoise.CauchyNoiseModel(ar, sig["n"], bool(cfg["noise"]["burn_in"]))
    rng = _rng(seed, TRAIN_DATA)
    w_train = simnoise.generate(model, int(data["train"]), rng)
    w_val = simnoise.generate(model, int(data["validation"]), rng)
    tcfg = train_config(cfg["train"], derive_seed(seed, NET))
    params, trace = train(w_train, w_val, hm, tcfg)
    fisher = float(np.trace(simnoise.analytic_fi(model, hm)))
    return CauchyTraining(ar, model, w_train, w_val, params, trace, fisher, tcfg)


def run_cauchy_experiment(cfg, seed, training=None):
    """Train (unless ``training`` is given), then evaluate LRao at both lengths."""
    sig, data, ev = cfg["signal"], cfg["data"], cfg["evaluation"]
    hm = _observation(sig)
    tr = training if training is not None else train_cauchy(cfg, seed)
    ar, model, w_train, w_val = tr.filter, tr.model, tr.w_train, tr.w_val
    params, trace, fisher, tcfg = tr.params, tr.trace, tr.fisher_trace, tr.train_config
    net_seed = tcfg.seed

    net = LfiNetTransformer.from_params(params, f0=sig["f0"], n_harmonics=sig["n_harmonics"])
    if int(data["context"]) > 0:
        # independent noise: the training sequences would overstate the Jacobian of an overfit net
        context = simnoise.generate(model, int(data["context"]), _rng(seed, CONTEXT))
    else:
        context = np.concatenate([w_train, w_val])
    det = LRaoDetector(net, f0=sig["f0"], n_harmonics=sig["n_harmonics"],
                       step=tcfg.step_dtheta, mu0=tcfg.mu0).fit(context)
    n_long = int(cfg["n_long"])
    model_long = simnoise.CauchyNoiseModel(ar, n_long, bool(cfg["noise"]["burn_in"]))
    hm_long = _observation(sig, n_long)
    det_long = LRaoDetector(net, f0=sig["f0"], n_harmonics=sig["n_harmonics"],
                            step=tcfg.step_dtheta, mu0=tcfg.mu0).fit(
        simnoise.generate(model_long, int(data["context_long"]), _rng(seed, CONTEXT_LONG)))

    noise_scale = sigmodel.robust_scale(w_train)
    result = CauchyResult(cfg, seed, ar, fisher, params, trace, det, det_long,
                          seeds={"master": seed, "filter": derive_seed(seed, FILTER),
                                 "train_data": derive_seed(seed, TRAIN_DATA), "network": net_seed,
                                 "evaluation": derive_seed(seed, EVAL),
                                 "evaluation_long": derive_seed(seed, EVAL_LONG),
                                 "context": derive_seed(seed, CONTEXT),
                                 "context_long": derive_seed(seed, CONTEXT_LONG)})
    rng_eval = _rng(seed, EVAL)
    base = sigmodel.random_equal_amplitude_params(1.0, sig["n_harmonics"], rng_eval)
    for snr in ev["snr_db"]:
        result.evaluations.append(_evaluate_detector(det, model, hm, snr, ev, noise_scale, base,
                                                     rng_eval, _label(sig["n"], snr)))
    rng_long = _rng(seed, EVAL_LONG)
    for snr in ev["snr_db_long"]:
        result.evaluations.append(_evaluate_detector(det_long, model_long, hm_long, snr, ev,
                                                     noise_scale, base, rng_long,
                                                     _label(n_long, snr)))
    return result


# ---------------------------------------------------------------------------
# Gaussian-mixture demo


GM_COLUMNS = ("shift", "transform", "lblue_mean", "lblue_p2_5", "lblue_p97_5", "crlb_p2_5",
              "crlb_p97_5", "lrao_median", "lrao_p2_5", "lrao_p97_5", "detection_rate")


@dataclass
class GmDemoResult:
    rows: list
    fisher_information: float
    crlb_sd: float
    threshold: float
    seeds: dict


def run_gm_demo(cfg, seed):
    mix = stats.GaussianMixture1D(tuple(cfg["mixture"]["weights"]), tuple(cfg["mixture"]["means"]),
                                  tuple(cfg["mixture"]["sigmas"]))
    n = int(cfg["n"])
    hm = sigmodel.ObservationMatrix(np.ones((n, 1)))
    ctx_noise = stats.sample_gm(mix, int(cfg["context_sequences"]) * n,
                                _rng(seed, GM_CONTEXT)).reshape(-1, n)
    score = FunctionTransformer(partial(stats.gm_shift_score, mix))
    dets = {"raw": LRaoDetector(None, observation=hm, step=cfg["step"]),
            "score": LRaoDetector(score, observation=hm, step=cfg["step"])}
    for d in dets.values():
        d.fit(ctx_noise)
    fi = stats.gm_shift_fi(mix)
    crlb_sd = float(np.sqrt(1.0 / (n * fi)))
    threshold = lfi.lrao_threshold(1, cfg["fpr_alpha"])
    trials = int(cfg["trials"])
    shifts = np.linspace(cfg["shifts"]["start"], cfg["shifts"]["stop"], int(cfg["shifts"]["count"]))
    rng = _rng(seed, GM_TRIALS)
    rows = []
    for shift in shifts:
        x = stats.sample_gm(mix, trials * n, rng).reshape(trials, n) + shift
        for name, d in dets.items():
            est = d.estimate(x)[:, 0]
            t = d.decision_function(x)
            rows.append((float(shift), name, float(est.mean()),
                         *map(float, np.percentile(est, [2.5, 97.5])),
                         float(shift - 1.959963984540054 * crlb_sd),
                         float(shift + 1.959963984540054 * crlb_sd),
                         *map(float, np.percentile(t, [50.0, 2.5, 97.5])),
                         float(np.mean(t > threshold))))
    return GmDemoResult(rows, float(fi), crlb_sd, float(threshold),
                        {"master": seed, "context": derive_seed(seed, GM_CONTEXT),
                         "trials": derive_seed(seed, GM_TRIALS)})


# ---------------------------------------------------------------------------
# sensor nested CV


def surrogate_series(cfg, seed):
    """A single spiky-Gaussian surrogate series (cfg keys as for ``surrogate-gen``)."""
    ar = simnoise.ArFilter(tuple(simnoise.reflection_to_ar(cfg["reflection"])))
    return simnoise.spiky_gaussian_surrogate(int(cfg["length"]), 1, cfg["spike_rate"],
                                             cfg["spike_scale"], ar, _rng(seed, SURROGATE))[0]


def sensor_dataset(cfg, seed):
    """Segment the configured series (or a surrogate); optionally normalize it globally."""
    n = cfg["signal"]["n"]
    if cfg["series"] is not None:
        series, provenance = load_series(cfg["series"]), str(cfg["series"])
    else:
        series = surrogate_series(cfg["surrogate"], seed)
        provenance = f"surrogate(seed={seed})"
    mode = cfg["normalization"]
    if mode == "global":
        series = robust_normalize(series)
    elif mode != "fold":
        raise ConfigError(f"normalization must be 'global' or 'fold', got {mode!r}")
    ds = segment(series, n, provenance)
    ds.preproc["normalization"] = mode
    return ds


class SensorTask:
    """fit/evaluate/select callables for :func:`nested_cv`."""

    def __init__(self, cfg):
        self.cfg = cfg
        sig = cfg["signal"]
        self.hm = _observation(sig)
        self.detectors = list(cfg["detectors"])
        unknown = set(self.detectors) - {CNN, *REFERENCE_KINDS}
        if unknown:
            raise ConfigError(f"unknown detectors {sorted(unknown)}")
        train_config(cfg["train"], 0)  # validate early

    def _scaler(self, trainval):
        if self.cfg["normalization"] == "fold":
            med = float(np.median(trainval))
            scale = sigmodel.robust_scale(trainval)
            return lambda X: (X - med) / scale
        return lambda X: X

    def select(self, train_seqs, val_seqs, seed):
        tcfg = train_config(self.cfg["train"], seed)
        _, trace = train(train_seqs, val_seqs, self.hm, tcfg)
        return max(trace.best_epoch, 1)

    def fit(self, trainval, epochs, seed):
        scale = self._scaler(trainval)
        tv = scale(trainval)
        sig = self.cfg["signal"]
        models = {"scale": scale, "noise_scale": sigmodel.robust_scale(tv)}
        if CNN in self.detectors:
            tcfg = train_config(self.cfg["train"], seed)
            params, _ = train_epochs(tv, self.hm, int(epochs), tcfg)
            net = LfiNetTransformer.from_params(params, f0=sig["f0"], n_harmonics=sig["n_harmonics"])
            models[CNN] = LRaoDetector(net, f0=sig["f0"], n_harmonics=sig["n_harmonics"],
                                       step=tcfg.step_dtheta, mu0=tcfg.mu0).fit(tv)
        for kind in REFERENCE_KINDS:
            if kind in self.detectors:
                models[kind] = GlrtReferenceDetector(kind, f0=sig["f0"],
                                                     n_harmonics=sig["n_harmonics"]).fit(tv)
        return models

    def evaluate(self, models, test, rng):
        x0 = models["scale"](test)
        k = self.cfg["signal"]["n_harmonics"]
        a = sigmodel.equal_amplitude_for_snr(self.cfg["snr_db"], models["noise_scale"], k)
        draws = int(self.cfg["h1_draws"])
        thetas = np.array([sigmodel.random_equal_amplitude_params(a, k, rng)
                           for _ in range(draws * len(x0))])
        x1 = np.repeat(x0, draws, axis=0) + thetas @ self.hm.h.T
        scores = {d: (models[d].decision_function(x0), models[d].decision_function(x1))
                  for d in self.detectors}
        extra = {}
        if CNN in models:
            extra["noncentrality"] = float(np.mean([models[CNN].noncentrality(t) for t in thetas]))
        return scores, extra


def sensor_plan(cfg, seed):
    cv = cfg["cv"]
    return CvPlan(int(cv["outer_folds"]), int(cv["inner_folds"]), int(seed), int(cv["repeats"]),
                  bool(cv["inner_per_repeat"]))


def run_sensor_experiment(cfg, seed, *, ds=None, folds=None, repeats=None, on_progress=None):
    ds = ds if ds is not None else sensor_dataset(cfg, seed)
    task = SensorTask(cfg)
    plan = sensor_plan(cfg, seed)
    select = task.select if CNN in task.detectors else None
    result = nested_cv(ds, plan, task.fit, task.evaluate, select, folds=folds, repeats=repeats,
                       on_progress=on_progress)
    result.config = cfg
    if not cfg["save_models"]:
        result.models = {}
    return result


def rerun_sensor_cell(cfg, seed, fold, repeat, seeds):
    """Recompute one (fold, repeat) cell from the seeds recorded in a manifest."""
    ds = sensor_dataset(cfg, seed)
    task = SensorTask(cfg)
    plan = sensor_plan(cfg, seed)
    select = task.select if CNN in task.detectors else None
    outcome, _, _ = run_fold(ds.sequences, plan, fold, repeat, task.fit, task.evaluate, select,
                             seeds=seeds)
    return outcome


def asymptotic_curve(result, points):
    lams = [o.extra["noncentrality"] for o in result.outcomes if "noncentrality" in o.extra]
    if not lams:
        return None
    hm_l = 2 * result.config["signal"]["n_harmonics"]
    return stats.asymptotic_roc(hm_l, float(np.mean(lams)), _fpr_grid(points))
