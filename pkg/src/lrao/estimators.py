"""scikit-learn style wrappers around the functional core.

All estimators are fitted on noise-only sequences (rows of ``X``). The
observation matrix is rebuilt for the fitted sequence length from ``f0`` and
``n_harmonics`` unless an explicit ``observation`` is supplied.
"""

from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from . import lfi, refdet, sigmodel
from ._validation import check_batch
from .nnet import TrainConfig, forward, train, train_epochs

FORWARD_SAMPLES = 1 << 18  # samples per forward chunk; bounds activation memory


def _observation(est, n):
    if est.observation is not None:
        if est.observation.n != n:
            raise ValueError(f"observation matrix has n={est.observation.n}, data has {n}")
        return est.observation
    return sigmodel.periodic_observation_matrix(n, est.f0, est.n_harmonics)


class LfiNetTransformer(TransformerMixin, BaseEstimator):
    """Convolutional net trained to maximize the spectral LFI trace of its output.

    With ``n_epochs=None`` the trailing ``validation_fraction`` of the rows is
    held out for early stopping; otherwise all rows are trained on for exactly
    ``n_epochs`` epochs.
    """

    def __init__(self, *, f0=0.1, n_harmonics=4, observation=None, num_layers=3, channels=20,
                 filter_width=3, learning_rate=1e-4, weight_decay=1e-5, step_dtheta=1e-2,
                 patience=3, max_epochs=500, margin=None, input_scaling="sequence", mu0="zero",
                 freeze_psd=False, n_epochs=None, validation_fraction=0.2, random_state=0):
        self.f0 = f0
        self.n_harmonics = n_harmonics
        self.observation = observation
        self.num_layers = num_layers
        self.channels = channels
        self.filter_width = filter_width
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.step_dtheta = step_dtheta
        self.patience = patience
        self.max_epochs = max_epochs
        self.margin = margin
        self.input_scaling = input_scaling
        self.mu0 = mu0
        self.freeze_psd = freeze_psd
        self.n_epochs = n_epochs
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def train_config(self):
        return TrainConfig(step_dtheta=self.step_dtheta, learning_rate=self.learning_rate,
                           weight_decay=self.weight_decay, patience=self.patience,
                           max_epochs=self.max_epochs, seed=self.random_state,
                           num_layers=self.num_layers, channels=self.channels,
                           filter_width=self.filter_width, margin=self.margin, mu0=self.mu0,
                           freeze_psd=self.freeze_psd, input_scaling=self.input_scaling)

    def fit(self, X, y=None, X_val=None):
        X = check_batch(X, name="X")
        hm = _observation(self, X.shape[1])
        cfg = self.train_config()
        if self.n_epochs is not None:
            self.params_, self.costs_ = train_epochs(X, hm, int(self.n_epochs), cfg)
            self.trace_ = None
        else:
            if X_val is None:
                n_val = int(round(self.validation_fraction * X.shape[0]))
                if not 0 < n_val < X.shape[0]:
                    raise ValueError("validation_fraction leaves an empty training or validation set")
                X, X_val = X[:-n_val], X[-n_val:]
            self.params_, self.trace_ = train(X, check_batch(X_val, name="X_val"), hm, cfg)
        self.n_features_in_ = hm.n
        return self

    @classmethod
    def from_params(cls, params, **kwargs):
        """Wrap already-trained network parameters."""
        est = cls(**kwargs)
        est.params_ = params
        est.trace_ = None
        return est

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_batch(X, name="X")
        scaling = self.params_.meta["scaling"]
        return forward(self.params_, scaling(X), chunk=max(1, FORWARD_SAMPLES // X.shape[1]))


class _Identity(TransformerMixin, BaseEstimator):
    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return check_batch(X, name="X")


class LRaoDetector(BaseEstimator):
    """LRao detector (and LBLUE estimator) on top of a data transform.

    ``transformer=None`` means the identity transform. An unfitted
    transformer is cloned and fitted on the same noise.
    """

    def __init__(self, transformer=None, *, f0=0.1, n_harmonics=4, observation=None,
                 step=1e-2, mu0="zero", psd_method="mean", alpha=0.05):
        self.transformer = transformer
        self.f0 = f0
        self.n_harmonics = n_harmonics
        self.observation = observation
        self.step = step
        self.mu0 = mu0
        self.psd_method = psd_method
        self.alpha = alpha

    def fit(self, X, y=None):
        X = check_batch(X, name="X")
        if self.transformer is None:
            self.transformer_ = _Identity()
        else:
            try:
                check_is_fitted(self.transformer)
                self.transformer_ = self.transformer
            except NotFittedError:
                self.transformer_ = clone(self.transformer).fit(X)
        self.hm_ = _observation(self, X.shape[1])
        self.context_ = lfi.build_context(self.transformer_.transform, X, self.hm_, step=self.step,
                                          mu0=self.mu0, psd_method=self.psd_method)
        self.threshold_ = lfi.lrao_threshold(self.hm_.l, self.alpha)
        self.n_features_in_ = self.hm_.n
        return self

    def _transformed(self, X):
        check_is_fitted(self, "context_")
        return self.transformer_.transform(check_batch(X, name="X"))

    def decision_function(self, X):
        y = self._transformed(X)
        return lfi.lrao(self.context_, y)

    def predict(self, X):
        """1 where the statistic exceeds the asymptotic threshold for ``alpha``."""
        return (self.decision_function(X) > self.threshold_).astype(int)

    def estimate(self, X, theta0=None):
        """LBLUE of the signal parameters for each row."""
        y = self._transformed(X)
        return lfi.lblue(self.context_, y, theta0)

    def llmp(self, X):
        y = self._transformed(X)
        return lfi.llmp(self.context_, y)

    def noncentrality(self, theta1):
        check_is_fitted(self, "context_")
        return lfi.noncentrality(self.context_, theta1)


class GlrtReferenceDetector(BaseEstimator):
    """Median-PSD whitening, a fixed nonlinearity, then the Gaussian GLRT."""

    def __init__(self, kind="limiter3", *, f0=0.1, n_harmonics=4, observation=None, alpha=0.05):
        self.kind = kind
        self.f0 = f0
        self.n_harmonics = n_harmonics
        self.observation = observation
        self.alpha = alpha

    def fit(self, X, y=None):
        X = check_batch(X, name="X")
        self.hm_ = _observation(self, X.shape[1])
        self.detector_ = refdet.build_reference(X, self.hm_, self.kind)
        self.threshold_ = lfi.lrao_threshold(self.hm_.l, self.alpha)
        self.n_features_in_ = self.hm_.n
        return self

    def decision_function(self, X):
        check_is_fitted(self, "detector_")
        return refdet.detect(self.detector_, check_batch(X, name="X"))

    def predict(self, X):
        return (self.decision_function(X) > self.threshold_).astype(int)
