"""Scikit-learn style estimators wrapping the two network flavors.

Both flavors fit on (state, state-derivative) rows and predict the learned
vector field, so they drop into sklearn pipelines, grid search, and
cross-validation. The functional core (training.train, forecast.integrate)
stays importable on its own; these classes only add the estimator surface.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import _kernels, mlp
from .dataset import TrainingPair
from .forecast import LearnedField, Trajectory, integrate
from .mlp import NetSpec
from .training import OptimizerConfig, train
from .validation import check_phase_matrix, check_state_vector


class _DynamicsNetBase(RegressorMixin, BaseEstimator):

    _flavor = None  # set by subclasses

    def __init__(self, hidden_layers=2, width=32, learning_rate=1e-3,
                 batch_size=1, epochs=16, random_state=0):
        self.hidden_layers = hidden_layers
        self.width = width
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state

    def fit(self, X, y):
        """Fit on phase-space rows X = [q, p] and derivative targets
        y = [qdot, pdot] (accelerations equal forces at unit mass, so the
        same rows serve both flavors).

        Returns self.
        """
        X = check_phase_matrix(X, "X")
        y = check_phase_matrix(y, "y")
        if y.shape != X.shape:
            raise ValueError(f"X and y shapes differ: {X.shape} vs {y.shape}")
        pairs = [
            TrainingPair(flavor=self._flavor, input=xi, target=yi)
            for xi, yi in zip(X, y)
        ]
        spec = NetSpec(
            input_dim=X.shape[1],
            output_dim=X.shape[1] if self._flavor == "nn" else 1,
            hidden_layers=self.hidden_layers,
            width=self.width,
            seed=self.random_state,
        )
        config = OptimizerConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.random_state,
        )
        report = train(spec, pairs, config)
        self.n_features_in_ = X.shape[1]
        self.params_ = report.params
        self.epoch_costs_ = report.epoch_costs
        self.total_inputs_ = report.total_inputs
        return self

    def predict(self, X):
        """Learned vector field [qdot, pdot] at each row of X."""
        check_is_fitted(self, "params_")
        X = check_phase_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} columns, fitted for {self.n_features_in_}"
            )
        flavor = _kernels.NN if self._flavor == "nn" else _kernels.HNN
        sizes = np.asarray(self.params_.layer_sizes, dtype=np.int64)
        return _kernels.learned_field_batch(flavor, mlp.pack(self.params_), sizes, X)

    def as_field(self) -> LearnedField:
        check_is_fitted(self, "params_")
        return LearnedField(flavor=self._flavor, params=self.params_,
                            d=self.n_features_in_ // 2)

    def forecast(self, state0, T, dt, method="rk4") -> Trajectory:
        """Roll the fitted model forward from one initial state."""
        check_is_fitted(self, "params_")
        state0 = check_state_vector(state0, self.n_features_in_)
        return integrate(self.as_field(), state0, T, dt, method=method)


class VectorFieldRegressor(_DynamicsNetBase):
    """Conventional flavor: the network outputs the field components
    directly and is trained on the squared output error."""

    _flavor = "nn"


class HamiltonianRegressor(_DynamicsNetBase):
    """Hamiltonian flavor: the network outputs one energy-like scalar whose
    input-gradient, read through Hamilton's recipe, is the field. Training
    matches that gradient field to the targets, which builds conservation
    into every forecast."""

    _flavor = "hnn"

    def energy(self, X):
        """Learned scalar at each row of X. Only its gradient is trained,
        so values are meaningful up to one global additive constant."""
        check_is_fitted(self, "params_")
        X = check_phase_matrix(X, "X")
        sizes = np.asarray(self.params_.layer_sizes, dtype=np.int64)
        return _kernels.forward_batch(mlp.pack(self.params_), sizes, X)[:, 0]
