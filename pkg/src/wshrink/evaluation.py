"""Sample moments, the linear shrinkage baseline, Stein's loss, and
cross-validation machinery for tuning the ambiguity radius or mixing weight."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EstimationError, SingularMatrixError
from .gaussian import RANK_RTOL, as_symmetric


@dataclass(frozen=True)
class SampleMoments:
    """Sample mean and covariance with an explicit degrees-of-freedom divisor.

    The default divisor is ``n`` (the biased maximum-likelihood convention);
    pass ``n - 1`` for the Bessel-corrected version or ``n - n_classes`` for
    pooled within-class use.  Up to scaling, changing the divisor is
    equivalent to shrinking the ambiguity radius.
    """

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int
    divisor: float


def sample_moments(data, divisor: float | None = None) -> SampleMoments:
    """Mean and covariance of rows of ``data`` (n observations x p variables)."""
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("data must be a nonempty 2-D array of observations")
    if not np.isfinite(X).all():
        raise ValueError("data contains non-finite entries")
    n = X.shape[0]
    div = float(n) if divisor is None else float(divisor)
    if div < 1.0:
        raise ValueError("divisor must be >= 1")
    mean = X.mean(axis=0)
    resid = X - mean
    cov = as_symmetric(resid.T @ resid / div, rtol=1.0)
    return SampleMoments(mean=mean, covariance=cov, sample_count=n, divisor=div)


def _covariance_of(moments_or_matrix) -> np.ndarray:
    if isinstance(moments_or_matrix, SampleMoments):
        return moments_or_matrix.covariance
    return as_symmetric(moments_or_matrix, name="covariance")


def linear_shrinkage(moments, alpha: float) -> np.ndarray:
    """Precision estimate from blending the covariance with its diagonal.

    Inverts ``(1 - alpha) cov + alpha diag(cov)``.  Raises
    ``SingularMatrixError`` when the blend is numerically singular (for
    example ``alpha = 0`` with a rank-deficient covariance).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    cov = _covariance_of(moments)
    blend = (1.0 - alpha) * cov + alpha * np.diag(np.diag(cov))
    w = np.linalg.eigvalsh(blend)
    if w[0] <= RANK_RTOL * max(float(w[-1]), 0.0) or w[0] <= 0.0:
        raise SingularMatrixError(
            f"blended covariance is singular at alpha={alpha:g} (min eigenvalue {w[0]:.3e})"
        )
    L = np.linalg.cholesky(blend)
    precision = scipy.linalg.cho_solve((L, True), np.eye(blend.shape[0]))
    return as_symmetric(precision, rtol=1.0)


def stein_loss(precision, reference_cov) -> float:
    """Stein's loss ``-log det(X S) + <X, S> - p`` of a precision estimate
    against a reference covariance; zero only at the exact inverse."""
    X = as_symmetric(precision, name="precision")
    S = as_symmetric(reference_cov, name="reference covariance")
    if X.shape != S.shape:
        raise ValueError("dimension mismatch")
    p = X.shape[0]
    try:
        LX = np.linalg.cholesky(X)
        LS = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"stein_loss requires positive definite inputs: {exc}") from exc
    logdet = 2.0 * (np.log(np.diag(LX)).sum() + np.log(np.diag(LS)).sum())
    return float(-logdet + np.sum(X * S) - p)


@dataclass(frozen=True)
class TuningGrid:
    """Strictly increasing positive candidate values for one parameter."""

    name: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if vals.size < 1:
            raise ValueError("grid must be nonempty")
        if not np.isfinite(vals).all() or (vals <= 0.0).any():
            raise ValueError("grid values must be positive finite reals")
        if (np.diff(vals) <= 0.0).any():
            raise ValueError("grid values must be strictly increasing (duplicates rejected)")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_log10(cls, name: str, log10_from: float, log10_to: float, points: int) -> "TuningGrid":
        if points < 1:
            raise ValueError("points must be >= 1")
        return cls(name, np.logspace(log10_from, log10_to, points))


# grids used by the classification and portfolio pipelines
CLASSIFICATION_RHO_GRID = TuningGrid.from_log10("rho", -1.0, 2.0, 61)
CLASSIFICATION_ALPHA_GRID = TuningGrid.from_log10("alpha", -3.0, 0.0, 61)
PORTFOLIO_RHO_GRID = TuningGrid.from_log10("rho", -2.0, 0.0, 201)
PORTFOLIO_ALPHA_GRID = TuningGrid.from_log10("alpha", -2.0, 0.0, 201)


def make_folds(n: int, scheme: str, seed: int = 0):
    """Deterministic fold assignment; a pure function of ``(n, scheme, seed)``.

    ``scheme`` is ``"loo"`` or ``"kfold:K"``.
    """
    if scheme == "loo":
        k = n
        if n < 2:
            raise ValueError("leave-one-out needs at least 2 observations")
    elif scheme.startswith("kfold:"):
        k = int(scheme.split(":", 1)[1])
        if k < 2:
            raise ValueError("kfold needs K >= 2")
        if n < k:
            raise ValueError(f"need at least K={k} observations, got {n}")
    else:
        raise ValueError(f"unknown scheme {scheme!r} (expected 'loo' or 'kfold:K')")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


def gaussian_validation_nll(precision, train_moments: SampleMoments, validation_data) -> float:
    """Held-out Gaussian negative log-likelihood, up to constants.

    ``-log det X + <S_val, X>`` with the validation second moment taken
    around the training mean.  Equals Stein's loss against the validation
    covariance up to a parameter-independent constant, but stays finite when
    that covariance is rank deficient (e.g. single-row validation folds).
    """
    X = np.asarray(precision, dtype=np.float64)
    V = np.atleast_2d(np.asarray(validation_data, dtype=np.float64))
    resid = V - train_moments.mean
    S_val = resid.T @ resid / V.shape[0]
    sign, logdet = np.linalg.slogdet(X)
    if sign <= 0.0:
        raise SingularMatrixError("precision estimate is not positive definite")
    return float(-logdet + np.sum(S_val * X))


@dataclass(frozen=True)
class CVReport:
    """Cross-validation sweep results.

    ``fold_scores[k, g]`` is the score of grid value ``g`` on fold ``k``
    (``inf`` marks an estimator failure at that point); the selected value
    optimizes the mean score, ties resolved toward the smallest value.
    """

    param_name: str
    values: np.ndarray
    fold_scores: np.ndarray
    mean_scores: np.ndarray
    selected: float
    mode: str
    scheme: str
    seed: int


def cross_validate(
    data,
    estimator,
    grid: TuningGrid,
    scheme: str = "loo",
    score=None,
    mode: str = "min",
    seed: int = 0,
    divisor_policy: str = "n",
) -> CVReport:
    """Sweep a tuning grid with cross-validation.

    ``estimator(moments, value) -> precision`` is fitted on each training
    fold; ``score(precision, train_moments, validation_data) -> float``
    defaults to the held-out Gaussian negative log-likelihood.  ``mode`` is
    ``"min"`` (losses) or ``"max"`` (e.g. classification accuracy).
    Estimator or score failures at a grid point score ``inf`` (``-inf`` when
    maximizing) and stay visible in the report.
    """
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    if divisor_policy not in ("n", "n-1"):
        raise ValueError("divisor_policy must be 'n' or 'n-1'")
    X = np.atleast_2d(np.asarray(data, dtype=np.float64))
    n = X.shape[0]
    folds = make_folds(n, scheme, seed)
    score = gaussian_validation_nll if score is None else score
    failure = np.inf if mode == "min" else -np.inf

    fold_scores = np.empty((len(folds), grid.values.size))
    for k, fold in enumerate(folds):
        train_mask = np.ones(n, dtype=bool)
        train_mask[fold] = False
        train = X[train_mask]
        div = float(train.shape[0] - 1) if divisor_policy == "n-1" else None
        moments = sample_moments(train, divisor=div)
        for g, value in enumerate(grid.values):
            try:
                precision = estimator(moments, float(value))
                fold_scores[k, g] = score(precision, moments, X[fold])
            except (ValueError, np.linalg.LinAlgError, EstimationError):
                fold_scores[k, g] = failure

    mean_scores = fold_scores.mean(axis=0)
    best = int(np.argmin(mean_scores)) if mode == "min" else int(np.argmax(mean_scores))
    return CVReport(
        param_name=grid.name,
        values=grid.values,
        fold_scores=fold_scores,
        mean_scores=mean_scores,
        selected=float(grid.values[best]),
        mode=mode,
        scheme=scheme,
        seed=seed,
    )


def kfold_stein(folds, estimator, divisor: float | None = None) -> np.ndarray:
    """Stein loss of per-fold estimates against the complement covariance.

    ``folds`` is a sequence of observation blocks (e.g. one per year).  Fold
    ``k`` trains ``estimator(moments_k)``, which is scored against the sample
    covariance of all remaining folds.  A singular complement covariance
    raises; the caller decides how to regularize.
    """
    blocks = [np.atleast_2d(np.asarray(b, dtype=np.float64)) for b in folds]
    if len(blocks) < 2:
        raise ValueError("need at least 2 folds")
    losses = np.empty(len(blocks))
    for k, block in enumerate(blocks):
        rest = np.vstack([b for i, b in enumerate(blocks) if i != k])
        precision = estimator(sample_moments(block, divisor=divisor))
        reference = sample_moments(rest, divisor=divisor).covariance
        losses[k] = stein_loss(precision, reference)
    return losses
