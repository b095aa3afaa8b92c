"""Empirical checks of the scheme's guarantees against independent oracles.

Gradient correctness is checked by central finite differences through a
scalar summation path that is independent of the vectorized evaluation.
The variance-reduced direction is checked by exact enumeration over inner
indices.  The statistical inequalities (loss-difference bound, optimum-norm
bound, warm-start bound, sufficiency of the per-stage iteration counts)
are checked at the level of Monte-Carlo means, because that is the level
at which they hold; per-draw excursions are reported as diagnostics only.

The statistical-accuracy level of a k-sample set is not observable, so the
checks estimate it empirically against the full base set as a stand-in for
the expectation, over a fixed 32-point probe grid (the supremum over all
weight vectors is not computable; this is a documented limitation).  Slack
factors absorb the proxy error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import bench, driver, erm, schedule, solvers
from .data import Dataset, DatasetView
from .driver import RunConfig
from .erm import RiskSpec

PROBE_COUNT = 32
LEMMA1_SLACK = 0.25
LEMMA2_SLACK = 0.10
PROP1_SLACK = 0.25


@dataclass
class CheckReport:
    """Outcome of one check; margin is (bound - observed), so >= 0 passes.

    worst_margin is the smallest margin seen across the check's inequality
    instances; violations counts instances with a negative margin.
    """

    name: str
    trials: int
    violations: int
    worst_margin: float
    passed: bool
    notes: str = ""

    def csv_line(self) -> str:
        return (f"{self.name},{self.trials},{self.violations},"
                f"{self.worst_margin:.6g},{str(self.passed).lower()}")


def _risk_value_scalar(spec: RiskSpec, w: np.ndarray, view: DatasetView) -> float:
    """Compensated scalar risk evaluation, independent of the vectorized path."""
    terms = []
    for i in range(view.count):
        idx, vals, y = view.sample_arrays(i)
        t = float(vals @ w[idx])
        if spec.loss == "logistic":
            z = -y * t
            # softplus(z), branch keeps exp bounded
            terms.append(z + math.log1p(math.exp(-z)) if z > 0 else math.log1p(math.exp(z)))
        else:
            terms.append(0.5 * (t - y) ** 2)
    v_n = schedule.statistical_accuracy(spec, view.count)
    return math.fsum(terms) / view.count + 0.5 * spec.c * v_n * float(w @ w)


def fd_gradient_check(spec: RiskSpec, view: DatasetView, trials: int, seed: int = 0,
                      rel_tol: float = 1e-5, abs_tol: float = 1e-9,
                      h: float = 1e-6, coords_per_trial: int = 5) -> CheckReport:
    """Central finite differences vs the analytic risk gradient.

    A coordinate passes when |fd - analytic| <= abs_tol + rel_tol * |analytic|;
    the absolute floor covers coordinates whose analytic partial vanishes.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    dim = view.dim
    k = min(coords_per_trial, dim)
    violations = 0
    worst = math.inf
    for _ in range(trials):
        w = rng.uniform(-1.0, 1.0, dim)
        _, grad, _ = erm.risk_value_and_grad(spec, w, view)
        for j in rng.choice(dim, size=k, replace=False):
            wp = w.copy()
            wp[j] += h
            wm = w.copy()
            wm[j] -= h
            fd = (_risk_value_scalar(spec, wp, view) - _risk_value_scalar(spec, wm, view)) / (2 * h)
            err = abs(fd - grad[j])
            margin = abs_tol + rel_tol * abs(grad[j]) - err
            worst = min(worst, margin)
            if margin < 0:
                violations += 1
    return CheckReport(
        name=f"fd_gradient_{spec.loss}",
        trials=trials,
        violations=violations,
        worst_margin=worst,
        passed=violations == 0,
        notes=f"{trials} weight draws x {k} coordinates, h={h:g}, rel_tol={rel_tol:g}",
    )


def svrg_direction_check(spec: RiskSpec, view: DatasetView, trials: int,
                         seed: int = 0, abs_tol: float = 1e-12) -> CheckReport:
    """Enumerate every inner index: the mean direction must equal the risk gradient."""
    n = view.count
    if n > 50:
        raise ValueError(f"enumeration check needs n <= 50, got {n}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    violations = 0
    worst = math.inf
    for _ in range(trials):
        w_hat = rng.uniform(-1.0, 1.0, view.dim)
        anchor = rng.uniform(-1.0, 1.0, view.dim)
        _, full_grad, _ = erm.risk_value_and_grad(spec, anchor, view)
        mean_dir = np.zeros(view.dim)
        for i in range(n):
            mean_dir += solvers.svrg_direction(spec, view, i, w_hat, anchor, full_grad)
        mean_dir /= n
        _, grad_hat, _ = erm.risk_value_and_grad(spec, w_hat, view)
        err = float(np.max(np.abs(mean_dir - grad_hat)))
        margin = abs_tol - err
        worst = min(worst, margin)
        if margin < 0:
            violations += 1
    return CheckReport(
        name=f"svrg_direction_n{n}",
        trials=trials,
        violations=violations,
        worst_margin=worst,
        passed=violations == 0,
        notes=f"exact enumeration over {n} indices, abs_tol={abs_tol:g}",
    )


def _probe_grid(dim: int, seed: int, count: int = PROBE_COUNT) -> np.ndarray:
    """(dim, count) probe points: origin, a few +/- unit axes, seeded uniform draws."""
    rng = np.random.default_rng(seed)
    cols = [np.zeros(dim)]
    axes = rng.choice(dim, size=min(dim, 6), replace=False)
    for pos, j in enumerate(axes):
        e = np.zeros(dim)
        e[j] = 1.0 if pos % 2 == 0 else -1.0
        cols.append(e)
    while len(cols) < count:
        cols.append(rng.uniform(-1.0, 1.0, dim))
    return np.column_stack(cols[:count])


def _loss_matrix(loss: str, base: Dataset, probes: np.ndarray) -> np.ndarray:
    """Per-sample losses at every probe point, shape (n_samples, n_probes)."""
    margins = base.x @ probes
    values, _ = erm._loss_terms(loss, margins, base.y[:, None])
    return values


def _shuffled_copy(base: Dataset, perm: np.ndarray, k: int | None = None) -> Dataset:
    k = base.n_samples if k is None else k
    return Dataset(base.x[perm[:k]], base.y[perm[:k]], name=base.name, dim=base.dim)


def unregularized_optimum_proxy(loss: str, base: Dataset, l2: float = 1e-10):
    """Stand-in for the statistical optimum: full-base loss minimizer, tiny ridge."""
    view = base.full_view()

    def fg(w):
        value, grad = erm.empirical_loss_and_grad(loss, w, view)
        return value + 0.5 * l2 * float(w @ w), grad + l2 * w

    res = optimize.minimize(fg, np.zeros(base.dim), jac=True, method="L-BFGS-B",
                            options={"maxiter": 5000, "gtol": 1e-8, "ftol": 1e-16})
    w = np.asarray(res.x)
    return w, float(w @ w)


def lemma1_check(spec: RiskSpec, base: Dataset, m: int, n: int, draws: int,
                 seed: int = 0) -> CheckReport:
    """Mean |L_n - L_m| at each probe vs ((n-m)/n)(V_{n-m} + V_m), estimated accuracies."""
    if not m < n <= base.n_samples:
        raise ValueError(f"need m < n <= base size, got m={m}, n={n}, base={base.n_samples}")
    if draws < 100:
        raise ValueError(f"need draws >= 100 for a usable estimate, got {draws}")
    if m == 0:
        raise ValueError("m must be positive")
    ss = np.random.SeedSequence(seed)
    probe_seed, draw_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    probes = _probe_grid(base.dim, probe_seed)
    losses = _loss_matrix(spec.loss, base, probes)
    l_full = losses.mean(axis=0)

    rng = np.random.default_rng(draw_seed)
    sum_diff = np.zeros(probes.shape[1])
    sup_m_total = 0.0
    sup_nm_total = 0.0
    for _ in range(draws):
        perm = rng.permutation(base.n_samples)
        l_m = losses[perm[:m]].mean(axis=0)
        l_nm = losses[perm[m:n]].mean(axis=0)
        l_n = (m * l_m + (n - m) * l_nm) / n
        sum_diff += np.abs(l_n - l_m)
        sup_m_total += float(np.max(np.abs(l_full - l_m)))
        sup_nm_total += float(np.max(np.abs(l_full - l_nm)))
    v_m_hat = sup_m_total / draws
    v_nm_hat = sup_nm_total / draws
    bound = ((n - m) / n) * (v_nm_hat + v_m_hat) * (1.0 + LEMMA1_SLACK)
    mean_diff = sum_diff / draws
    margins = bound - mean_diff
    violations = int(np.sum(margins < 0))
    return CheckReport(
        name=f"lemma1_m{m}_n{n}",
        trials=probes.shape[1],
        violations=violations,
        worst_margin=float(np.min(margins)),
        passed=violations == 0,
        notes=(f"{draws} draws; V_hat({m})={v_m_hat:.4g}, V_hat({n - m})={v_nm_hat:.4g}, "
               f"slack {LEMMA1_SLACK:.0%}"),
    )


def lemma2_check(spec: RiskSpec, base: Dataset, n: int, draws: int,
                 seed: int = 0) -> CheckReport:
    """Mean squared norm of the regularized optimum vs 4/c + ||w*||^2 (proxy)."""
    if n > base.n_samples // 4:
        raise ValueError(f"need n <= base/4 to keep the proxy held out, got n={n}")
    if draws < 1:
        raise ValueError("draws must be >= 1")
    _, wsq = unregularized_optimum_proxy(spec.loss, base)
    rng = np.random.default_rng(seed)
    norms = []
    for _ in range(draws):
        perm = rng.permutation(base.n_samples)
        subset = _shuffled_copy(base, perm, n)
        ref = bench.reference_optimum(spec, subset.full_view(), tolerance=1e-8)
        norms.append(float(ref.w_star_n @ ref.w_star_n))
    mean_norm = float(np.mean(norms))
    raw_bound = 4.0 / spec.c + wsq
    bound = raw_bound * (1.0 + LEMMA2_SLACK)
    margin = bound - mean_norm
    exceed = sum(1 for v in norms if v > raw_bound)
    return CheckReport(
        name=f"lemma2_n{n}",
        trials=draws,
        violations=0 if margin >= 0 else 1,
        worst_margin=margin,
        passed=margin >= 0,
        notes=(f"mean ||w_n*||^2 = {mean_norm:.4g} vs 4/c + ||w*||^2 = {raw_bound:.4g}; "
               f"{exceed}/{draws} draws above the unslacked bound"),
    )


def _solve_to_threshold(spec: RiskSpec, view: DatasetView) -> np.ndarray:
    """Stage solve from zero under the gradient-norm rule, tight-constant steps."""
    max_sq = float(np.max(np.asarray(view.x.multiply(view.x).sum(axis=1)).ravel()))
    tight_m = max_sq / 4.0 if spec.loss == "logistic" else max_sq
    tight = RiskSpec(loss=spec.loss, c=spec.c, alpha=spec.alpha, gamma=spec.gamma,
                     M=max(tight_m, 1e-12))
    state = solvers.init_state("agd", view.dim)
    budget = solvers.StepBudget(mode="until_threshold",
                                threshold=schedule.stop_threshold(spec, view.count))
    return solvers.solve(state, tight, view, budget).state.w


def proposition1_check(spec: RiskSpec, base: Dataset, m: int, draws: int,
                       seed: int = 0) -> CheckReport:
    """Warm-start suboptimality after doubling vs its closed-form bound, in the mean."""
    n = 2 * m
    if n > base.n_samples:
        raise ValueError(f"need 2m <= base size, got m={m}, base={base.n_samples}")
    if draws < 1:
        raise ValueError("draws must be >= 1")
    ss = np.random.SeedSequence(seed)
    probe_seed, draw_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    _, wsq = unregularized_optimum_proxy(spec.loss, base)
    probes = _probe_grid(base.dim, probe_seed)
    losses = _loss_matrix(spec.loss, base, probes)
    l_full = losses.mean(axis=0)

    rng = np.random.default_rng(draw_seed)
    lhs_values = []
    sup = {m: 0.0, n - m: 0.0, n: 0.0}
    for _ in range(draws):
        perm = rng.permutation(base.n_samples)
        nested = _shuffled_copy(base, perm, n)
        w_m = _solve_to_threshold(spec, nested.prefix(m))
        ref_n = bench.reference_optimum(spec, nested.full_view(), tolerance=1e-9)
        lhs_values.append(erm.risk_value(spec, w_m, nested.full_view()) - ref_n.risk_star)
        l_m = losses[perm[:m]].mean(axis=0)
        l_nm = losses[perm[m:n]].mean(axis=0)
        sup[m] += float(np.max(np.abs(l_full - l_m)))
        sup[n - m] += float(np.max(np.abs(l_full - l_nm)))
        sup[n] += float(np.max(np.abs(l_full - (m * l_m + (n - m) * l_nm) / n)))
    v_m_hat = sup[m] / draws
    v_nm_hat = sup[n - m] / draws
    v_n_hat = sup[n] / draws
    delta_m = schedule.statistical_accuracy(spec, m)  # certified by the threshold rule
    bound = (
        delta_m
        + (2.0 * (n - m) / n) * (v_nm_hat + v_m_hat)
        + 2.0 * (v_m_hat - v_n_hat)
        + 0.5 * spec.c * (v_m_hat - v_n_hat) * wsq
    )
    slacked = bound * (1.0 + PROP1_SLACK)
    mean_lhs = float(np.mean(lhs_values))
    margin = slacked - mean_lhs
    exceed = sum(1 for v in lhs_values if v > bound)
    return CheckReport(
        name=f"proposition1_m{m}",
        trials=draws,
        violations=0 if margin >= 0 else 1,
        worst_margin=margin,
        passed=margin >= 0,
        notes=(f"mean warm-start gap {mean_lhs:.4g} vs bound {bound:.4g} "
               f"(slack {PROP1_SLACK:.0%}); {exceed}/{draws} draws above the raw bound"),
    )


def theorem_sn_sufficiency_check(method: str, spec: RiskSpec, base: Dataset, m0: int,
                                 draws: int, seed: int = 0) -> CheckReport:
    """Run the fixed-iteration schedule; per-stage mean suboptimality must be within accuracy.

    The bootstrap stage is excluded: its guarantee comes from the threshold
    rule, not from the per-stage iteration count.
    """
    if method not in ("agd", "svrg"):
        raise ValueError(f"iteration-count guarantee covers agd and svrg, got {method!r}")
    if draws < 1:
        raise ValueError("draws must be >= 1")
    _, wsq = unregularized_optimum_proxy(spec.loss, base)
    rng = np.random.default_rng(seed)
    N = base.n_samples
    per_stage: dict[int, list[float]] = {}
    per_draw_violations = 0
    total_stage_measurements = 0
    for _ in range(draws):
        perm = rng.permutation(N)
        shuffled = _shuffled_copy(base, perm)
        cfg = RunConfig(
            method=method,
            adaptive=True,
            m0=m0,
            N=N,
            budget_mode="theoretical_s_n",
            seed=int(rng.integers(2**62)),
            eval_every=10**9,
            wstar_norm_sq=wsq,
        )
        exits: list[tuple[int, np.ndarray]] = []
        driver.adaptive_run(cfg, spec, shuffled,
                            on_stage_exit=lambda st, rep: exits.append((rep.n, st.w.copy())))
        draw_bad = False
        for stage_n, w_exit in exits[1:]:  # skip bootstrap
            view = shuffled.prefix(stage_n)
            ref = bench.reference_optimum(spec, view, tolerance=1e-9)
            gap = erm.risk_value(spec, w_exit, view) - ref.risk_star
            per_stage.setdefault(stage_n, []).append(gap)
            total_stage_measurements += 1
            if gap > schedule.statistical_accuracy(spec, stage_n):
                draw_bad = True
        if draw_bad:
            per_draw_violations += 1

    violations = 0
    worst = math.inf
    stage_notes = []
    for stage_n in sorted(per_stage):
        mean_gap = float(np.mean(per_stage[stage_n]))
        v_n = schedule.statistical_accuracy(spec, stage_n)
        margin = v_n - mean_gap
        worst = min(worst, margin)
        if margin < 0:
            violations += 1
        stage_notes.append(f"n={stage_n}: mean {mean_gap:.3g} vs {v_n:.3g}")
    notes = f"{draws} draws; per-draw excursions {per_draw_violations}/{draws}; " + \
        "; ".join(stage_notes)
    if draws == 1:
        notes = "LOW POWER (single draw); " + notes
    return CheckReport(
        name=f"theorem_sn_{method}",
        trials=draws,
        violations=violations,
        worst_margin=worst,
        passed=violations == 0,
        notes=notes,
    )
