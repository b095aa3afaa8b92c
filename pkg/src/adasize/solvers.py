"""Inner stage solvers: GD, Nesterov-accelerated GD, and SVRG epochs.

Each update returns a fresh state and adds its exact per-sample
gradient-evaluation cost to the state counter: n for a GD or AGD step, 2n
for an SVRG epoch (full gradient at the anchor plus n inner steps).
Gradient-norm measurements made for stopping rules or traces are not
counted; the counter is the unit the complexity bounds are written in.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from . import erm, schedule
from .data import DatasetView
from .erm import RiskSpec

METHODS = ("gd", "agd", "svrg")


class DivergenceError(RuntimeError):
    """An iterate left the finite range; usually a mis-set c or gamma."""


class BudgetError(ValueError):
    pass


@dataclass
class SolverState:
    """Iterate plus the auxiliary sequences of the active method."""

    method: str
    w: np.ndarray
    agd_y: np.ndarray | None = None          # momentum lookahead sequence
    svrg_anchor: np.ndarray | None = None    # outer-loop anchor
    svrg_full_grad: np.ndarray | None = None  # risk gradient at the anchor used last epoch
    rng: np.random.Generator | None = None
    grad_evals: int = 0


def init_state(method: str, dim: int, seed: int = 0) -> SolverState:
    """Fresh zero-initialized state; SVRG sampling is driven by a counter-based generator."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    w = np.zeros(dim)
    state = SolverState(method=method, w=w)
    if method == "agd":
        state.agd_y = w.copy()
    elif method == "svrg":
        state.svrg_anchor = w.copy()
        state.rng = np.random.Generator(np.random.Philox(seed))
    return state


def reset_aux(state: SolverState) -> SolverState:
    """Re-anchor the auxiliary sequences at the current iterate (stage warm start)."""
    out = replace(state)
    if state.method == "agd":
        out.agd_y = state.w.copy()
    elif state.method == "svrg":
        out.svrg_anchor = state.w.copy()
        out.svrg_full_grad = None
    return out


@dataclass
class StepBudget:
    """Either run until a gradient-norm threshold or for a fixed iteration count."""

    mode: str  # until_threshold | fixed_iterations
    threshold: float | None = None
    iterations: int | None = None
    max_iterations: int = 10**6

    def __post_init__(self):
        if self.mode == "until_threshold":
            if self.threshold is None or self.iterations is not None:
                raise BudgetError("until_threshold budget needs threshold only")
        elif self.mode == "fixed_iterations":
            if self.iterations is None or self.threshold is not None:
                raise BudgetError("fixed_iterations budget needs iterations only")
            if self.iterations < 0:
                raise BudgetError(f"iterations must be >= 0, got {self.iterations}")
        else:
            raise BudgetError(f"unknown budget mode {self.mode!r}")
        if self.max_iterations < 1:
            raise BudgetError(f"max_iterations must be >= 1, got {self.max_iterations}")


class SolveResult(NamedTuple):
    state: SolverState
    iterations: int
    exit_grad_norm: float
    budget_exhausted: bool


def _ensure_finite(w: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(w)):
        raise DivergenceError(f"non-finite iterate during {context}")


def gd_step(state: SolverState, spec: RiskSpec, view: DatasetView) -> SolverState:
    """w <- w - eta * grad R_n(w) with eta = 1/(M + cV_n)."""
    if state.method != "gd":
        raise ValueError(f"gd_step on {state.method!r} state")
    eta = schedule.gd_step_size(spec, view.count)
    _, g, _ = erm.risk_value_and_grad(spec, state.w, view)
    w_new = state.w - eta * g
    _ensure_finite(w_new, f"gd step at n={view.count}")
    return replace(state, w=w_new, grad_evals=state.grad_evals + view.count)


def agd_step(state: SolverState, spec: RiskSpec, view: DatasetView) -> SolverState:
    """Advance both accelerated sequences one step.

    w_{k+1} = y_k - eta * grad R_n(y_k);  y_{k+1} = w_{k+1} + beta (w_{k+1} - w_k).
    """
    if state.method != "agd" or state.agd_y is None:
        raise ValueError("agd_step needs an agd state with the momentum sequence set")
    eta, beta = schedule.agd_params(spec, view.count)
    _, g, _ = erm.risk_value_and_grad(spec, state.agd_y, view)
    w_new = state.agd_y - eta * g
    y_new = w_new + beta * (w_new - state.w)
    _ensure_finite(w_new, f"agd step at n={view.count}")
    return replace(state, w=w_new, agd_y=y_new, grad_evals=state.grad_evals + view.count)


def svrg_direction(spec: RiskSpec, view: DatasetView, i: int, w_hat: np.ndarray,
                   anchor: np.ndarray, full_grad: np.ndarray) -> np.ndarray:
    """Variance-reduced direction for inner sample i.

    grad f(w_hat, z_i) + cV_n w_hat - grad f(anchor, z_i) - cV_n anchor + grad R_n(anchor);
    its average over i in {1..n} equals grad R_n(w_hat) exactly.
    """
    idx, vals, y = view.sample_arrays(i)
    cv = spec.c * schedule.statistical_accuracy(spec, view.count)
    coef_hat = erm.sample_loss_coef(spec.loss, float(vals @ w_hat[idx]), y)
    coef_anchor = erm.sample_loss_coef(spec.loss, float(vals @ anchor[idx]), y)
    d = full_grad + cv * (w_hat - anchor)
    d[idx] += (coef_hat - coef_anchor) * vals
    return d


def svrg_epoch(state: SolverState, spec: RiskSpec, view: DatasetView) -> SolverState:
    """One outer loop: full gradient at the anchor, then n variance-reduced inner steps.

    The inner iterate starts at the anchor and the last inner iterate becomes
    the next anchor.  Inner indices are drawn uniformly with replacement from
    the state generator, so the epoch is deterministic given the state.
    """
    if state.method != "svrg" or state.svrg_anchor is None or state.rng is None:
        raise ValueError("svrg_epoch needs an svrg state with anchor and generator set")
    n = view.count
    q, eta, _ = schedule.svrg_params(spec, n)
    anchor = state.w
    _, full_grad, _ = erm.risk_value_and_grad(spec, anchor, view)
    picks = state.rng.integers(0, n, size=q)
    w_hat = anchor.copy()
    for i in picks:
        w_hat -= eta * svrg_direction(spec, view, int(i), w_hat, anchor, full_grad)
    _ensure_finite(w_hat, f"svrg epoch at n={n}")
    return replace(
        state,
        w=w_hat,
        svrg_anchor=w_hat.copy(),
        svrg_full_grad=full_grad,
        grad_evals=state.grad_evals + 2 * n,
    )


_STEPPERS: dict[str, Callable[..., SolverState]] = {
    "gd": gd_step,
    "agd": agd_step,
    "svrg": svrg_epoch,
}


def step(state: SolverState, spec: RiskSpec, view: DatasetView) -> SolverState:
    """One update of the state's method; one SVRG iteration is one epoch."""
    return _STEPPERS[state.method](state, spec, view)


def grad_norm_at(state: SolverState, spec: RiskSpec, view: DatasetView) -> float:
    """Stopping-rule measurement at the current iterate; not counted in grad_evals."""
    _, _, gnorm = erm.risk_value_and_grad(spec, state.w, view)
    return gnorm


def solve(state: SolverState, spec: RiskSpec, view: DatasetView, budget: StepBudget,
          callback: Callable[[SolverState, int], None] | None = None) -> SolveResult:
    """Run the state's method on the view under the given budget.

    In until_threshold mode the gradient norm at the iterate is checked
    before every step; hitting max_iterations sets the exhausted flag
    rather than raising.  The callback, if given, runs after every step.
    """
    iterations = 0
    exhausted = False
    if budget.mode == "until_threshold":
        while True:
            gnorm = grad_norm_at(state, spec, view)
            if gnorm <= budget.threshold:
                break
            if iterations >= budget.max_iterations:
                exhausted = True
                break
            state = step(state, spec, view)
            iterations += 1
            if callback is not None:
                callback(state, iterations)
    else:
        if budget.iterations > budget.max_iterations:
            raise BudgetError(
                f"fixed iteration count {budget.iterations} exceeds cap {budget.max_iterations}")
        for _ in range(budget.iterations):
            state = step(state, spec, view)
            iterations += 1
            if callback is not None:
                callback(state, iterations)
        gnorm = grad_norm_at(state, spec, view)
    return SolveResult(state, iterations, gnorm, exhausted)
