"""Measurement utilities: reference optima, effective passes, trace CSVs, comparisons.

Suboptimality is always measured against a high-accuracy reference
minimizer computed once per risk; one effective pass is N per-sample
gradient evaluations where N is the full training-set size.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import erm, schedule, solvers
from .data import Dataset, DatasetView
from .erm import RiskSpec

TRACE_CSV_HEADER = "effective_passes,grad_evals,stage_n,suboptimality,grad_norm,test_error"
SUMMARY_CSV_HEADER = (
    "method,adaptive,passes_to_VN,passes_to_min_test_error,min_test_error,speedup_vs_fixed"
)


@dataclass(frozen=True)
class TraceEvent:
    grad_evals: int
    stage_n: int
    risk_value: float      # full-set risk R_N at the iterate
    grad_norm: float       # current-stage gradient norm
    test_error: float | None = None


@dataclass
class Trace:
    """Append-only event log of one run; meta echoes the run configuration."""

    events: list[TraceEvent] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, event: TraceEvent) -> None:
        # keep grad_evals strictly increasing; measurements at an unchanged
        # counter supersede the previous event at that counter
        if self.events and event.grad_evals == self.events[-1].grad_evals:
            self.events[-1] = event
            return
        if self.events and event.grad_evals < self.events[-1].grad_evals:
            raise ValueError("trace events must have nondecreasing grad_evals")
        self.events.append(event)


@dataclass(frozen=True)
class ReferenceOptimum:
    n: int
    w_star_n: np.ndarray
    risk_star: float
    grad_norm_at_star: float
    tolerance: float


def reference_optimum(spec: RiskSpec, view: DatasetView, tolerance: float = 1e-10,
                      max_iterations: int = 10**7) -> ReferenceOptimum:
    """High-accuracy minimizer of the view's risk, used as the suboptimality oracle.

    Runs the accelerated solver with the tight smoothness constant of the
    view until the gradient norm is below `tolerance`; any iterate w then
    has suboptimality R_n(w) - risk_star accurate to tolerance^2 / (2 c V_n).
    """
    if tolerance <= 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    max_sq = float(np.max(np.asarray(view.x.multiply(view.x).sum(axis=1)).ravel()))
    tight_m = max_sq / 4.0 if spec.loss == "logistic" else max_sq
    tight_spec = RiskSpec(loss=spec.loss, c=spec.c, alpha=spec.alpha,
                          gamma=spec.gamma, M=max(tight_m, 1e-12))
    state = solvers.init_state("agd", view.dim)
    budget = solvers.StepBudget(mode="until_threshold", threshold=tolerance,
                                max_iterations=max_iterations)
    result = solvers.solve(state, tight_spec, view, budget)
    if result.budget_exhausted:
        raise solvers.BudgetError(
            f"reference solve at n={view.count} did not reach {tolerance} "
            f"within {max_iterations} iterations")
    risk_star = erm.risk_value(spec, result.state.w, view)
    return ReferenceOptimum(
        n=view.count,
        w_star_n=result.state.w,
        risk_star=risk_star,
        grad_norm_at_star=result.exit_grad_norm,
        tolerance=tolerance,
    )


def effective_passes(grad_evals: int, N: int) -> float:
    """Work in units of full-set passes: grad_evals / N."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return grad_evals / N


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit_csv(trace: Trace, ref: ReferenceOptimum, sink) -> None:
    """Write the trace as CSV; suboptimality is measured against ref and clamped at 0."""
    N = trace.meta.get("N")
    if N is None:
        raise ValueError("trace meta missing N")
    if ref.n != N:
        raise ValueError(f"reference optimum is for n={ref.n}, trace final stage is N={N}")
    sink.write(TRACE_CSV_HEADER + "\n")
    for ev in trace.events:
        sub = max(0.0, ev.risk_value - ref.risk_star)
        cells = [
            _fmt(effective_passes(ev.grad_evals, N)),
            str(ev.grad_evals),
            str(ev.stage_n),
            _fmt(sub),
            _fmt(ev.grad_norm),
            "" if ev.test_error is None else _fmt(ev.test_error),
        ]
        sink.write(",".join(cells) + "\n")


def trace_csv_text(trace: Trace, ref: ReferenceOptimum) -> str:
    out = io.StringIO()
    emit_csv(trace, ref, out)
    return out.getvalue()


def load_trace_csv(source) -> list[dict]:
    """Parse an emitted trace CSV back into rows of numbers (None for empty cells)."""
    if isinstance(source, str):
        source = io.StringIO(source)
    rows = []
    for rec in csv.DictReader(source):
        rows.append(
            {
                "effective_passes": float(rec["effective_passes"]),
                "grad_evals": int(rec["grad_evals"]),
                "stage_n": int(rec["stage_n"]),
                "suboptimality": float(rec["suboptimality"]),
                "grad_norm": float(rec["grad_norm"]),
                "test_error": float(rec["test_error"]) if rec["test_error"] else None,
            }
        )
    return rows


@dataclass
class CompareRow:
    method: str
    adaptive: bool
    passes_to_target: float | None = None      # first time suboptimality <= V_N
    passes_to_min_test_error: float | None = None
    min_test_error: float | None = None
    speedup_vs_fixed: float | None = None
    diverged: bool = False


def _scan_trace(trace: Trace, ref: ReferenceOptimum, target: float, N: int):
    passes_to_target = None
    best_err = None
    passes_at_best = None
    for ev in trace.events:
        sub = max(0.0, ev.risk_value - ref.risk_star)
        if passes_to_target is None and sub <= target:
            passes_to_target = effective_passes(ev.grad_evals, N)
        if ev.test_error is not None and (best_err is None or ev.test_error < best_err):
            best_err = ev.test_error
            passes_at_best = effective_passes(ev.grad_evals, N)
    return passes_to_target, passes_at_best, best_err


def compare_matrix(configs: list, spec: RiskSpec, train: Dataset,
                   test: Dataset | None = None, return_traces: bool = False):
    """Run every config on the shared data and summarize time-to-target per method.

    Rows for adaptive configs carry the speedup ratio against the fixed run
    of the same method when both reached the target.  With `return_traces`
    the per-config traces come back too (None for diverged runs).
    """
    from . import driver  # run machinery; deferred to avoid a module cycle

    N_values = {cfg.N for cfg in configs}
    if len(N_values) != 1:
        raise ValueError("all configs in a comparison must share N")
    N = N_values.pop()
    full = train.prefix(N)
    ref = reference_optimum(spec, full)
    target = schedule.statistical_accuracy(spec, N)

    rows = []
    traces = []
    for cfg in configs:
        row = CompareRow(method=cfg.method, adaptive=cfg.adaptive)
        try:
            if cfg.adaptive:
                _, trace, _ = driver.adaptive_run(cfg, spec, train, test)
            else:
                _, trace = driver.fixed_run(cfg, spec, train, test)
        except solvers.DivergenceError:
            row.diverged = True
            rows.append(row)
            traces.append((cfg, None))
            continue
        row.passes_to_target, row.passes_to_min_test_error, row.min_test_error = _scan_trace(
            trace, ref, target, N)
        rows.append(row)
        traces.append((cfg, trace))

    fixed_passes = {
        r.method: r.passes_to_target for r in rows if not r.adaptive and not r.diverged
    }
    for row in rows:
        if row.adaptive and not row.diverged and row.passes_to_target is not None:
            base = fixed_passes.get(row.method)
            if base is not None:
                row.speedup_vs_fixed = (
                    math.inf if row.passes_to_target == 0 else base / row.passes_to_target)
    if return_traces:
        return rows, traces
    return rows


def format_summary_table(rows: list[CompareRow]) -> str:
    headers = ["method", "adaptive", "passes_to_VN", "passes_to_min_test_error",
               "min_test_error", "speedup_vs_fixed"]
    table = [headers]
    for r in rows:
        if r.diverged:
            table.append([r.method, str(r.adaptive).lower(), "diverged", "", "", ""])
            continue
        table.append([
            r.method,
            str(r.adaptive).lower(),
            "" if r.passes_to_target is None else f"{r.passes_to_target:.4g}",
            "" if r.passes_to_min_test_error is None else f"{r.passes_to_min_test_error:.4g}",
            "" if r.min_test_error is None else f"{r.min_test_error:.4g}",
            "" if r.speedup_vs_fixed is None else f"{r.speedup_vs_fixed:.3g}",
        ])
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
    return "\n".join(lines) + "\n"


def write_summary_csv(rows: list[CompareRow], sink) -> None:
    sink.write(SUMMARY_CSV_HEADER + "\n")
    for r in rows:
        if r.diverged:
            sink.write(f"{r.method},{str(r.adaptive).lower()},diverged,,,\n")
            continue
        cells = [
            r.method,
            str(r.adaptive).lower(),
            "" if r.passes_to_target is None else _fmt(r.passes_to_target),
            "" if r.passes_to_min_test_error is None else _fmt(r.passes_to_min_test_error),
            "" if r.min_test_error is None else _fmt(r.min_test_error),
            "" if r.speedup_vs_fixed is None else _fmt(r.speedup_vs_fixed),
        ]
        sink.write(",".join(cells) + "\n")
