"""Campaign accounting: feature matrix, logistic fit, final report.

The feature map here is the single source of truth; the victim model
evaluates its visit probabilities through the same function, so a fit on
simulated outcomes can recover the planted coefficients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .sampler import TargetRecord

SECONDS_PER_YEAR = 31_557_600  # Julian year
DAYS_PER_YEAR = SECONDS_PER_YEAR / 86400.0

FEATURE_COLUMNS = (
    "intercept",
    "theme_politics",
    "theme_entertainment",
    "log1p_followers",
    "log1p_following",
    "log1p_posts",
    "age_years",
    "follower_rank",
)


def feature_row(target: TargetRecord) -> np.ndarray:
    """Feature vector for one target; sports is the theme reference level."""
    if min(target.followers_count, target.following_count, target.post_count) < 0:
        raise ValueError(f"negative count in target {target.pseudonym}")
    return np.array(
        [
            1.0,
            1.0 if target.theme == "politics" else 0.0,
            1.0 if target.theme == "entertainment" else 0.0,
            np.log1p(target.followers_count),
            np.log1p(target.following_count),
            np.log1p(target.post_count),
            target.age_days / DAYS_PER_YEAR,
            target.follower_rank,
        ]
    )


@dataclass
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...] = FEATURE_COLUMNS

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != len(self.columns):
            raise ValueError("feature matrix shape does not match columns")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("label length mismatch")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("non-finite feature value")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("labels must be 0/1")


def build_features(targets: Sequence[TargetRecord], visited: Sequence[int]) -> FeatureMatrix:
    """Stack targets into the documented column order with 0/1 visit labels."""
    if len(targets) != len(visited):
        raise ValueError("targets and labels differ in length")
    X = np.array([feature_row(t) for t in targets], dtype=np.float64)
    y = np.asarray(visited, dtype=np.float64)
    return FeatureMatrix(X=X, y=y)


def write_features_csv(path, matrix: FeatureMatrix) -> None:
    header = ",".join(matrix.columns + ("visited",))
    body = np.column_stack([matrix.X, matrix.y])
    with open(path, "w", encoding="utf-8") as f:
        f.write(header + "\n")
        for row in body:
            f.write(",".join(repr(v) for v in row.tolist()) + "\n")


def read_features_csv(path) -> FeatureMatrix:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        rows = [[float(v) for v in line.split(",")] for line in f if line.strip()]
    if tuple(header[:-1]) != FEATURE_COLUMNS or header[-1] != "visited":
        raise ValueError(f"unexpected feature CSV header: {header}")
    arr = np.array(rows, dtype=np.float64)
    return FeatureMatrix(X=arr[:, :-1], y=arr[:, -1])


# ---------------------------------------------------------------------------
# Logistic regression by iteratively reweighted least squares


@dataclass
class FitOptions:
    ridge: float = 1e-6
    grad_tol: float = 1e-8
    max_iter: int = 100


@dataclass
class RegressionFit:
    coefficients: np.ndarray
    standard_errors: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float
    columns: tuple[str, ...] = FEATURE_COLUMNS
    diagnostic: Optional[str] = None

    def wald_z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coefficients / self.standard_errors

    def as_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "coefficients": [float(c) for c in self.coefficients],
            "standard_errors": [float(s) for s in self.standard_errors],
            "wald_z": [float(z) for z in self.wald_z()],
            "converged": self.converged,
            "iterations": self.iterations,
            "log_likelihood": float(self.log_likelihood),
            "diagnostic": self.diagnostic,
        }


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def penalized_log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray,
                             ridge: float) -> float:
    """Bernoulli log-likelihood with an L2 penalty on all coefficients."""
    z = X @ beta
    # log(sigma(z)) and log(1-sigma(z)) via the stable logaddexp form
    ll = -np.sum(np.logaddexp(0.0, -z) * y + np.logaddexp(0.0, z) * (1.0 - y))
    return float(ll - 0.5 * ridge * beta @ beta)


def log_likelihood_gradient(X: np.ndarray, y: np.ndarray, beta: np.ndarray,
                            ridge: float) -> np.ndarray:
    p = _sigmoid(X @ beta)
    return X.T @ (y - p) - ridge * beta


def fit_logistic(matrix: FeatureMatrix, options: Optional[FitOptions] = None) -> RegressionFit:
    """Maximize the ridge-penalized Bernoulli likelihood via IRLS.

    Newton steps with step halving whenever the penalized likelihood
    would decrease. Standard errors come from the inverse observed
    information at the optimum. Raises on degenerate (single-class)
    labels; perfect separation is reported as converged=False with the
    ridge keeping the coefficients finite.
    """
    opt = options or FitOptions()
    X, y = matrix.X, matrix.y
    n, k = X.shape
    if n < k + 1:
        raise ValueError(f"need at least {k + 1} rows, got {n}")
    if np.all(y == y[0]):
        raise ValueError("degenerate labels: all outcomes identical")

    beta = np.zeros(k)
    ll = penalized_log_likelihood(X, y, beta, opt.ridge)
    converged = False
    iterations = 0
    ridge_eye = opt.ridge * np.eye(k)

    while iterations < opt.max_iter:
        p = _sigmoid(X @ beta)
        grad = X.T @ (y - p) - opt.ridge * beta
        if np.max(np.abs(grad)) <= opt.grad_tol:
            converged = True
            break
        info = X.T @ (X * (p * (1.0 - p))[:, None]) + ridge_eye
        step = np.linalg.solve(info, grad)
        scale = 1.0
        while scale > 1e-12:
            ll_new = penalized_log_likelihood(X, y, beta + scale * step, opt.ridge)
            if ll_new >= ll:
                break
            scale *= 0.5
        beta = beta + scale * step
        ll = penalized_log_likelihood(X, y, beta, opt.ridge)
        iterations += 1

    p = _sigmoid(X @ beta)
    info = X.T @ (X * (p * (1.0 - p))[:, None]) + ridge_eye
    se = np.sqrt(np.diag(np.linalg.inv(info)))
    diagnostic = None
    if not converged:
        diagnostic = "did not converge; labels may be perfectly separated"
    return RegressionFit(
        coefficients=beta,
        standard_errors=se,
        converged=converged,
        iterations=iterations,
        log_likelihood=ll,
        diagnostic=diagnostic,
    )


# ---------------------------------------------------------------------------
# Campaign report


class CorruptedRunError(RuntimeError):
    pass


@dataclass
class CampaignReport:
    stimuli_by_theme: dict[str, int]
    hits_by_theme: dict[str, int]
    ledger: dict
    fit: Optional[RegressionFit]
    metadata: dict = field(default_factory=dict)
    rank_histogram: Optional[dict[str, list[int]]] = None

    def as_dict(self) -> dict:
        return {
            "stimuli_by_theme": dict(sorted(self.stimuli_by_theme.items())),
            "stimuli_total": int(sum(self.stimuli_by_theme.values())),
            "hits_by_theme": dict(sorted(self.hits_by_theme.items())),
            "hits_total": int(sum(self.hits_by_theme.values())),
            "ledger": self.ledger,
            "fit": self.fit.as_dict() if self.fit is not None else None,
            "rank_histogram": self.rank_histogram,
            "metadata": self.metadata,
        }


def write_report(path, report: CampaignReport) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.as_dict(), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def summarize_report(
    attack_events: Sequence[dict],
    targets: Sequence[TargetRecord],
    ledger_snapshot: dict,
    landing_events: Sequence[dict],
    metadata: dict,
    fit: Optional[RegressionFit] = None,
    rank_histogram: Optional[dict[str, list[int]]] = None,
) -> CampaignReport:
    """Cross-check run artifacts and assemble the final report.

    A stimulus is one attack tweet to one pseudonym; a hit is any counted
    landing interaction attributed to a target. Any disagreement between
    the run log and the sampled targets is treated as a corrupted run.
    """
    stimulated = {t.pseudonym: t for t in targets if t.stimulated_at is not None}
    by_theme: dict[str, int] = {}
    seen = set()
    for ev in attack_events:
        pseud = ev["target"]
        if pseud in seen:
            raise CorruptedRunError(f"duplicate stimulus for {pseud}")
        seen.add(pseud)
        rec = stimulated.get(pseud)
        if rec is None:
            raise CorruptedRunError(f"attack event for unsampled target {pseud}")
        by_theme[rec.theme] = by_theme.get(rec.theme, 0) + 1
    if len(seen) != len(stimulated):
        raise CorruptedRunError(
            f"{len(stimulated)} stimulated targets vs {len(seen)} attack events"
        )

    theme_of = {t.pseudonym: t.theme for t in targets}
    hits: dict[str, int] = {}
    for ev in landing_events:
        theme = theme_of.get(ev.get("pseudonym") or "")
        if theme is not None:
            hits[theme] = hits.get(theme, 0) + 1

    return CampaignReport(
        stimuli_by_theme=by_theme,
        hits_by_theme=hits,
        ledger=ledger_snapshot,
        fit=fit,
        metadata=metadata,
        rank_histogram=rank_histogram,
    )
