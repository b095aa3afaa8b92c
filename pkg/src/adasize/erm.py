"""Loss models and the regularized empirical risk.

The risk over the first n training samples is

    R_n(w) = L_n(w) + (c * V_n / 2) * ||w||^2,

where L_n is the average per-sample loss and V_n = gamma / n^alpha is the
statistical-accuracy level of an n-sample set.  R_n is strongly convex with
modulus c*V_n and has (M + c*V_n)-Lipschitz gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import schedule
from .data import Dataset, DatasetView, Sample

LOSSES = ("logistic", "squared")


class EmptyViewError(ValueError):
    pass


def _check_loss(loss: str) -> None:
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")


@dataclass(frozen=True)
class RiskSpec:
    """Parameters defining R_n for every n.

    c scales the adaptive regularizer, alpha in [0.5, 1] is the statistical
    accuracy decay exponent, gamma its numerator, and M the gradient
    Lipschitz constant used by solver step sizes.
    """

    loss: str = "logistic"
    c: float = 1.0
    alpha: float = 0.5
    gamma: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        _check_loss(self.loss)
        if not 0.5 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0.5, 1], got {self.alpha}")
        for field in ("c", "gamma", "M"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be positive, got {getattr(self, field)}")


def loss_value(loss: str, w: np.ndarray, z: Sample) -> float:
    """Per-sample loss, overflow-safe for arbitrarily large margins."""
    _check_loss(loss)
    idx0 = np.asarray(z.indices) - 1
    if idx0.size and idx0.max() >= w.shape[0]:
        raise ValueError("weight vector shorter than sample feature index")
    t = float(np.asarray(z.values) @ w[idx0])
    if loss == "logistic":
        # log(1 + exp(-y*t)) via logaddexp; no overflow, no negative underflow
        return float(np.logaddexp(0.0, -z.label * t))
    return 0.5 * (t - z.label) ** 2


def _loss_terms(loss: str, margins: np.ndarray, y: np.ndarray):
    """Per-sample loss values and d(loss)/d(margin) coefficients."""
    if loss == "logistic":
        values = np.logaddexp(0.0, -y * margins)
        coefs = -y * expit(-y * margins)
    else:
        resid = margins - y
        values = 0.5 * resid**2
        coefs = resid
    return values, coefs


def empirical_loss_and_grad(loss: str, w: np.ndarray, view: DatasetView):
    """Average loss over the view and its exact gradient."""
    _check_loss(loss)
    if w.shape[0] != view.dim:
        raise ValueError(f"weight dim {w.shape[0]} != feature dim {view.dim}")
    margins = view.x @ w
    values, coefs = _loss_terms(loss, margins, view.y)
    n = view.count
    grad = (coefs / n) @ view.x
    return float(values.mean()), np.asarray(grad).ravel()


def risk_value(spec: RiskSpec, w: np.ndarray, view: DatasetView) -> float:
    """R_n(w) without the gradient (cheap measurement path)."""
    margins = view.x @ w
    values, _ = _loss_terms(spec.loss, margins, view.y)
    v_n = schedule.statistical_accuracy(spec, view.count)
    return float(values.mean()) + 0.5 * spec.c * v_n * float(w @ w)


def risk_value_and_grad(spec: RiskSpec, w: np.ndarray, view: DatasetView):
    """(R_n(w), grad R_n(w), ||grad R_n(w)||)."""
    l_n, g = empirical_loss_and_grad(spec.loss, w, view)
    v_n = schedule.statistical_accuracy(spec, view.count)
    reg = spec.c * v_n
    r_n = l_n + 0.5 * reg * float(w @ w)
    g = g + reg * w
    return r_n, g, float(np.linalg.norm(g))


def sample_loss_coef(loss: str, margin: float, label: float) -> float:
    """d(loss)/d(margin) for one sample; the per-sample gradient is coef * x."""
    if loss == "logistic":
        return float(-label * expit(-label * margin))
    return float(margin - label)


def smoothness_constant(loss: str, d: Dataset, mode: str = "tight") -> float:
    """Gradient Lipschitz constant of the empirical loss.

    `paper_conservative` is the unit constant appropriate for normalized
    data; `tight` uses the exact per-loss curvature bound from the largest
    sample norm.
    """
    _check_loss(loss)
    if mode == "paper_conservative":
        return 1.0
    if mode != "tight":
        raise ValueError(f"unknown mode {mode!r}; expected paper_conservative or tight")
    if d.n_samples == 0:
        raise EmptyViewError("smoothness constant needs a nonempty dataset")
    max_sq = float(np.max(d.row_norms()) ** 2)
    return max_sq / 4.0 if loss == "logistic" else max_sq


def test_error(loss: str, w: np.ndarray, test: Dataset) -> float:
    """Fraction of test samples misclassified by sign(w.x); sign(0) counts as +1."""
    _check_loss(loss)
    if test.n_samples == 0:
        raise EmptyViewError("test set is empty")
    margins = test.x @ w
    preds = np.where(margins >= 0.0, 1.0, -1.0)
    return float(np.mean(preds != test.y))
