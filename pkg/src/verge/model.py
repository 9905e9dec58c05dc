"""Domain types, validation and standardization shared by the sampler modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np


class VergeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(VergeError, ValueError):
    pass


class NumericalFault(VergeError, ArithmeticError):
    """A factorization failed during sampling.

    ``iteration`` is the zero-based iteration at which the fault occurred and
    ``dump_path`` points at an ``.npz`` snapshot of the chain state, when one
    could be written.
    """

    def __init__(self, message, iteration=None, dump_path=None):
        super().__init__(message)
        self.iteration = iteration
        self.dump_path = dump_path


class EmptyTraceError(VergeError, ValueError):
    pass


class PredictionError(VergeError, ValueError):
    pass


RHO_FLOOR = 1e-6


@dataclass(frozen=True)
class Standardizer:
    """Affine constants fitted on a training set.

    Predictors are centered and scaled by the sample standard deviation
    (denominator n - 1), the response is centered, and each covariate column
    is mapped onto [0, 1] using its training minimum and range.
    """

    y_mean: float
    x_mean: np.ndarray
    x_sd: np.ndarray
    z_min: np.ndarray
    z_range: np.ndarray

    def transform_X(self, raw_X):
        return (np.asarray(raw_X, dtype=float) - self.x_mean) / self.x_sd

    def transform_Z(self, raw_Z):
        return (np.asarray(raw_Z, dtype=float) - self.z_min) / self.z_range

    def transform_y(self, raw_y):
        return np.asarray(raw_y, dtype=float) - self.y_mean

    def inverse_y(self, y):
        return np.asarray(y, dtype=float) + self.y_mean

    def inverse_Z(self, Z):
        return np.asarray(Z, dtype=float) * self.z_range + self.z_min

    def to_dict(self):
        return {
            "y_mean": float(self.y_mean),
            "x_mean": self.x_mean.tolist(),
            "x_sd": self.x_sd.tolist(),
            "z_min": self.z_min.tolist(),
            "z_range": self.z_range.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            y_mean=float(d["y_mean"]),
            x_mean=np.asarray(d["x_mean"], dtype=float),
            x_sd=np.asarray(d["x_sd"], dtype=float),
            z_min=np.asarray(d["z_min"], dtype=float),
            z_range=np.asarray(d["z_range"], dtype=float),
        )


@dataclass(frozen=True)
class Dataset:
    """Standardized training data.

    ``y`` is centered, ``X`` has zero-mean unit-sd columns and every entry
    of ``Z`` lies in the unit cube. ``standardizer`` keeps the training
    constants so new rows can be mapped onto the same scale.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    standardizer: Standardizer

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def P(self) -> int:
        return self.X.shape[1]

    @property
    def K(self) -> int:
        return self.Z.shape[1]


def _as_matrix(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValidationError(f"{name} must be a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite values")
    return a


def standardize(raw_y, raw_X, raw_Z) -> Dataset:
    """Center ``y``, standardize ``X`` and rescale ``Z`` to the unit cube.

    Raises
    ------
    ValidationError
        If a column of ``raw_X`` or ``raw_Z`` is constant, or the row counts
        disagree. The message names the offending column index.
    """
    y = np.asarray(raw_y, dtype=float).ravel()
    X = _as_matrix(raw_X, "X")
    Z = _as_matrix(raw_Z, "Z")
    n = y.shape[0]
    if X.shape[0] != n or Z.shape[0] != n:
        raise ValidationError(
            f"row count mismatch: y has {n}, X has {X.shape[0]}, Z has {Z.shape[0]}"
        )
    if n < 2:
        raise ValidationError("at least two observations are required")
    if not np.all(np.isfinite(y)):
        raise ValidationError("y contains non-finite values")

    # exact test: the sample sd of identical values can round to a tiny positive number
    for j in np.flatnonzero(X.max(axis=0) == X.min(axis=0)):
        raise ValidationError(f"predictor column {j} is constant")
    for k in np.flatnonzero(Z.max(axis=0) == Z.min(axis=0)):
        raise ValidationError(f"covariate column {k} is constant")
    x_mean = X.mean(axis=0)
    x_sd = X.std(axis=0, ddof=1)
    z_min = Z.min(axis=0)
    z_range = Z.max(axis=0) - z_min

    st = Standardizer(float(y.mean()), x_mean, x_sd, z_min, z_range)
    return Dataset(st.transform_y(y), st.transform_X(X), st.transform_Z(Z), st)


@dataclass(frozen=True)
class Hyperparameters:
    """Fixed prior constants.

    Gamma priors are parametrized by shape and rate. The jitter precision
    prior (shape 10, rate 0.1, mean 100) keeps the nugget small relative to
    the smooth part of each kernel, so a freshly drawn curve rarely looks
    like pure noise.
    """

    nu0: float = 0.05
    nu1: float = 5.0
    lambda_diag: float = 1.0
    pi_edge: float = 0.1
    a_mrf: float = math.log(0.1)
    b_mrf: float = 0.5
    a0: float = 0.01
    b0: float = 0.01
    a_r: float = 10.0
    b_r: float = 0.1
    a_lambda: float = 1.0
    b_lambda: float = 1.0
    a_z: float = 1.0
    b_z: float = 1.0
    alpha_cov: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f"hyperparameter {f.name} must be a finite number")
        positive = ("nu0", "nu1", "lambda_diag", "a0", "b0", "a_r", "b_r",
                    "a_lambda", "b_lambda", "a_z", "b_z")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValidationError(f"hyperparameter {name} must be positive")
        if not self.nu0 < self.nu1:
            raise ValidationError("nu0 must be smaller than nu1")
        if not 0 < self.pi_edge < 1:
            raise ValidationError("pi_edge must lie in (0, 1)")
        if not 0 < self.alpha_cov < 1:
            raise ValidationError("alpha_cov must lie in (0, 1)")

    def with_overrides(self, **overrides) -> "Hyperparameters":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValidationError(f"unknown hyperparameter(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def default_hyperparameters(P: int, **overrides) -> Hyperparameters:
    """Default prior constants for ``P`` predictors.

    The edge probability is ``2 / (P - 1)``, capped at 0.5 so that it stays a
    valid probability for very small graphs.
    """
    if P < 2:
        raise ValidationError("at least two predictors are required")
    hyper = Hyperparameters(pi_edge=min(2.0 / (P - 1), 0.5))
    return hyper.with_overrides(**overrides) if overrides else hyper


@dataclass(frozen=True)
class KernelParams:
    """Gaussian-process kernel parameters of one predictor."""

    gamma_tilde: np.ndarray
    rho: np.ndarray
    lambda_a: float
    lambda_z: float
    r: float

    def __post_init__(self):
        gt = np.asarray(self.gamma_tilde)
        rho = np.asarray(self.rho, dtype=float)
        if gt.shape != rho.shape:
            raise ValidationError("gamma_tilde and rho must have the same length")
        if np.any(rho <= 0) or np.any(rho > 1) or not np.all(np.isfinite(rho)):
            raise ValidationError("rho values must lie in (0, 1]")
        if np.any((gt == 0) != (rho == 1.0)):
            raise ValidationError("rho must equal 1 exactly where gamma_tilde is 0")
        for name in ("lambda_a", "lambda_z", "r"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValidationError(f"{name} must be a positive finite number")


@dataclass
class ChainState:
    """All latent variables of one MCMC chain.

    The graph is held as a symmetric boolean adjacency matrix ``adj``;
    :meth:`edges` lists it as sorted ``(i, j)`` pairs with ``i < j``.
    """

    gamma: np.ndarray
    gamma_tilde: np.ndarray
    rho: np.ndarray
    lambda_a: np.ndarray
    lambda_z: np.ndarray
    r: np.ndarray
    Omega: np.ndarray
    adj: np.ndarray
    tau2: float
    beta: np.ndarray

    @classmethod
    def initial(cls, P, K, n, *, tau2=1.0):
        """Empty model, identity precision matrix and no edges."""
        return cls(
            gamma=np.zeros(P, dtype=np.int8),
            gamma_tilde=np.zeros((P, K), dtype=np.int8),
            rho=np.ones((P, K)),
            lambda_a=np.ones(P),
            lambda_z=np.ones(P),
            r=np.ones(P),
            Omega=np.eye(P),
            adj=np.zeros((P, P), dtype=bool),
            tau2=float(tau2),
            beta=np.zeros((P, n)),
        )

    @property
    def P(self) -> int:
        return self.gamma.shape[0]

    @property
    def included(self) -> np.ndarray:
        return np.flatnonzero(self.gamma)

    def edges(self):
        i, j = np.nonzero(np.triu(self.adj, 1))
        return list(zip(i.tolist(), j.tolist()))

    def kernel_params(self, j) -> KernelParams:
        return KernelParams(self.gamma_tilde[j].copy(), self.rho[j].copy(),
                            float(self.lambda_a[j]), float(self.lambda_z[j]), float(self.r[j]))

    def set_kernel_params(self, j, params: KernelParams):
        self.gamma_tilde[j] = params.gamma_tilde
        self.rho[j] = params.rho
        self.lambda_a[j] = params.lambda_a
        self.lambda_z[j] = params.lambda_z
        self.r[j] = params.r

    def reset_predictor(self, j):
        """Drop predictor ``j`` and discard its kernel parameters."""
        self.gamma[j] = 0
        self.gamma_tilde[j] = 0
        self.rho[j] = 1.0
        self.lambda_a[j] = 1.0
        self.lambda_z[j] = 1.0
        self.r[j] = 1.0
        self.beta[j] = 0.0

    def copy(self) -> "ChainState":
        return ChainState(**{f.name: (getattr(self, f.name).copy()
                                      if isinstance(getattr(self, f.name), np.ndarray)
                                      else getattr(self, f.name))
                             for f in fields(self)})

    def check(self):
        """Raise :class:`ValidationError` if any state invariant is violated."""
        if not np.array_equal(self.Omega, self.Omega.T):
            raise ValidationError("Omega is not symmetric")
        try:
            np.linalg.cholesky(self.Omega)
        except np.linalg.LinAlgError:
            raise ValidationError("Omega is not positive definite") from None
        if not np.array_equal(self.adj, self.adj.T) or self.adj.diagonal().any():
            raise ValidationError("adjacency matrix must be symmetric with empty diagonal")
        if np.any((self.gamma_tilde == 0) != (self.rho == 1.0)):
            raise ValidationError("rho must equal 1 exactly where gamma_tilde is 0")
        if np.any((self.rho <= 0) | (self.rho > 1)):
            raise ValidationError("rho out of (0, 1]")
        if np.any(self.beta[self.gamma == 0] != 0):
            raise ValidationError("beta rows of excluded predictors must be zero")
        if not self.tau2 > 0:
            raise ValidationError("tau2 must be positive")


@dataclass
class TraceRecord:
    """One retained iteration.

    Kernel parameters and coefficient curves are kept only for included
    predictors; ``beta`` and ``params`` are keyed by predictor index.
    """

    gamma: np.ndarray
    gamma_tilde: np.ndarray
    edges: list
    tau2: float
    beta: dict
    params: dict

    @classmethod
    def from_state(cls, state: ChainState):
        inc = state.included.tolist()
        return cls(
            gamma=state.gamma.copy(),
            gamma_tilde=state.gamma_tilde.copy(),
            edges=state.edges(),
            tau2=float(state.tau2),
            beta={j: state.beta[j].copy() for j in inc},
            params={j: state.kernel_params(j) for j in inc},
        )

    def beta_row(self, j, n):
        b = self.beta.get(j)
        return np.zeros(n) if b is None else b


@dataclass
class Trace:
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @property
    def P(self) -> int:
        return self.records[0].gamma.shape[0]

    @property
    def K(self) -> int:
        return self.records[0].gamma_tilde.shape[1]

    def gamma_matrix(self):
        return np.array([rec.gamma for rec in self.records])

    def gamma_tilde_array(self):
        return np.array([rec.gamma_tilde for rec in self.records])


def expected_record_count(total_iterations, burn_in, thin):
    return (total_iterations - burn_in) // thin
