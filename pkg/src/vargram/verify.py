"""Empirical theorem checks with explicit margins and error budgets.

Each check runs the relevant energies or matrix conditions on supplied
samples and reports per-sample margins against an additive error budget.
Verdict semantics: any margin beyond its budget on the wrong side is a
"fail" (a numerical counterexample); failed hypotheses or non-convergent
extrapolations make the run "inconclusive" rather than silently passing;
"pass" means every sample landed on the right side within budget.
Numerical evidence witnesses theorems on samples, it does not prove them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import energy as energy_mod
from .energy import (EnergyValue, LadderError, LinePath, diff_controllability_fb,
                     diff_observability, incr_controllability_fb, incr_observability,
                     path_energy_integral, quadratic_limit)
from .gramian import (lyap_residual_ctrl, lyap_residual_obs, pd_scan, grid_points)
from .integrate import DivergenceError, IntegrationError, Trajectory, integrate_ivp
from .rank import ctrl_bracket_matrix, obs_codistribution
from .systems import (SystemModel, closed_loop_prolonged, dual_closed_loop, prolong,
                      two_copy, feedback_signal)

EQUALITY_TOL = 1e-4


@dataclass
class DecayEstimate:
    """Exponential fit |signal| ~ c * exp(-lam * |t|) toward the far end."""

    c: float
    lam: float
    fit_window: tuple[float, float]
    residual: float
    flagged: bool = False
    note: str = ""

    def as_dict(self) -> dict:
        return {"c": self.c, "lam": self.lam,
                "fit_window": list(self.fit_window), "residual": self.residual,
                "flagged": self.flagged, "note": self.note}


@dataclass
class Sample:
    """One tested relation: margin = lhs - rhs, judged against budget."""

    inputs: dict
    lhs: float
    rhs: float
    budget: float
    relation: str = "ge"  # "ge": lhs >= rhs - budget; "eq": |lhs - rhs| <= budget
    note: str = ""

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    def ok(self) -> bool:
        if self.relation == "eq":
            return abs(self.margin) <= self.budget
        return self.margin >= -self.budget

    def as_dict(self) -> dict:
        d = {"inputs": self.inputs, "lhs": self.lhs, "rhs": self.rhs,
             "margin": self.margin, "budget": self.budget,
             "relation": self.relation}
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class Report:
    """Outcome of one theorem check over a sample set."""

    theorem_id: str
    verdict: str
    samples: list = field(default_factory=list)
    decay_fits: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"theorem": self.theorem_id, "verdict": self.verdict,
                "samples": [s.as_dict() for s in self.samples],
                "decay_fits": [d.as_dict() if isinstance(d, DecayEstimate) else d
                               for d in self.decay_fits],
                "notes": list(self.notes)}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"


def _settle(samples: Sequence[Sample], failures: Sequence[str]) -> str:
    """Counterexamples dominate, then failed hypotheses, then pass."""
    if any(not s.ok() for s in samples):
        return "fail"
    if failures:
        return "inconclusive"
    return "pass"


def _floor(*values: float) -> float:
    """Additive budget floor for the integrator's relative tolerance."""
    return 1e-9 * sum(abs(v) for v in values) + 1e-12


def fit_decay(signal, direction: str = "forward") -> DecayEstimate:
    """Least-squares exponential fit on the far half of a sampled signal.

    signal is a Trajectory (state norms are fitted) or a (times, values)
    pair.  direction 'forward' expects decay as t grows; 'backward'
    expects decay as t falls toward the most negative times.  A fitted
    rate lam <= 0 flags the hypothesis as violated instead of raising.
    """
    if isinstance(signal, Trajectory):
        times = np.asarray(signal.times, dtype=float)
        values = np.array([float(np.linalg.norm(row)) for row in signal.states])
    else:
        times, values = signal
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    t_lo, t_hi = float(times.min()), float(times.max())
    mid = 0.5 * (t_lo + t_hi)
    mask = times >= mid if direction == "forward" else times <= mid
    window_t = times[mask]
    window_v = values[mask]
    if window_t.size < 10:
        raise ValueError("need at least 10 samples in the fit window")
    if np.any(window_v <= 0.0):
        raise ValueError("signal must be positive on the fit window")
    logs = np.log(window_v)
    slope, intercept = np.polyfit(window_t, logs, 1)
    lam = -float(slope) if direction == "forward" else float(slope)
    resid = float(np.sqrt(np.mean((logs - (slope * window_t + intercept)) ** 2)))
    flagged = lam <= 0.0
    return DecayEstimate(
        c=float(math.exp(intercept)), lam=lam,
        fit_window=(float(window_t.min()), float(window_t.max())),
        residual=resid, flagged=flagged,
        note="no decay on fit window" if flagged else "")


def _sampled_norms(aug, z0, block: str, duration: float = 20.0,
                   points: int = 201):
    """Simulate an augmented field and return (times, |block|) samples."""
    traj = integrate_ivp(aug.rhs, z0, (0.0, float(duration)))
    times = np.linspace(0.0, float(duration), points)
    sl = aug.layout[block]
    vals = np.array([float(np.linalg.norm(traj.at(t)[sl])) for t in times])
    return times, vals


def _pair_decay(system: SystemModel, x0, x0p, closed_loop: bool) -> DecayEstimate:
    """Fit the gap decay of a trajectory pair (reversed time when closed-loop)."""
    if closed_loop:
        fb = feedback_signal(system)
        aug = two_copy(system, fb, fb)
        rhs = lambda t, z: -aug.rhs(t, z)
    else:
        aug = two_copy(system)
        rhs = aug.rhs
    z0 = aug.pack(x=x0, x2=x0p)
    traj = integrate_ivp(rhs, z0, (0.0, 20.0))
    times = np.linspace(0.0, 20.0, 201)
    n = system.n
    vals = np.array([float(np.linalg.norm(traj.at(t)[n:] - traj.at(t)[:n]))
                     for t in times])
    return fit_decay((times, vals), "forward")


def check_thm1(system: SystemModel, pairs: Sequence, tol: float = 1e-8,
               gl_order: int = 8) -> Report:
    """Path integral of the backward feedback energy bounds the pair energy.

    For each pair (x0, x0'): LHS integrates diff_controllability_fb along
    the straight segment, RHS is incr_controllability_fb(x0, x0').
    """
    report = Report("thm1", "inconclusive")
    failures: list[str] = []
    for idx, (x0, x0p) in enumerate(pairs):
        x0 = np.asarray(x0, dtype=float)
        x0p = np.asarray(x0p, dtype=float)
        inputs = {"index": idx, "x0": x0.tolist(), "x0p": x0p.tolist()}
        try:
            if not np.allclose(x0, x0p):
                fit = _pair_decay(system, x0, x0p, closed_loop=True)
                report.decay_fits.append(fit)
                if fit.flagged:
                    failures.append(f"sample {idx}: backward gap does not decay")
                    continue
            lhs = path_energy_integral(
                lambda a, v: diff_controllability_fb(system, a, v, tol=tol),
                LinePath.between(x0, x0p), gl_order=gl_order)
            rhs = incr_controllability_fb(system, x0, x0p, tol=tol)
        except (IntegrationError, ValueError) as exc:
            failures.append(f"sample {idx}: {exc}")
            continue
        budget = lhs.error_estimate + rhs.error_estimate + _floor(lhs.value, rhs.value)
        report.samples.append(Sample(inputs, lhs.value, rhs.value, budget))
    report.verdict = _settle(report.samples, failures)
    report.notes.extend(failures)
    return report


def check_thm3(system: SystemModel, pairs: Sequence, tol: float = 1e-8,
               gl_order: int = 8) -> Report:
    """Path integral of the forward output energy bounds the pair energy."""
    report = Report("thm3", "inconclusive")
    failures: list[str] = []
    for idx, (x0, x0p) in enumerate(pairs):
        x0 = np.asarray(x0, dtype=float)
        x0p = np.asarray(x0p, dtype=float)
        inputs = {"index": idx, "x0": x0.tolist(), "x0p": x0p.tolist()}
        try:
            if not np.allclose(x0, x0p):
                fit = _pair_decay(system, x0, x0p, closed_loop=False)
                report.decay_fits.append(fit)
                if fit.flagged:
                    failures.append(f"sample {idx}: forward gap does not decay")
                    continue
            lhs = path_energy_integral(
                lambda a, v: diff_observability(system, a, v, tol=tol),
                LinePath.between(x0, x0p), gl_order=gl_order)
            rhs = incr_observability(system, x0, x0p, tol=tol)
        except (IntegrationError, ValueError) as exc:
            failures.append(f"sample {idx}: {exc}")
            continue
        budget = lhs.error_estimate + rhs.error_estimate + _floor(lhs.value, rhs.value)
        report.samples.append(Sample(inputs, lhs.value, rhs.value, budget))
    report.verdict = _settle(report.samples, failures)
    report.notes.extend(failures)
    return report


def check_thm2(system: SystemModel, samples: Sequence, tol: float = 1e-8,
               equality_tol: float = EQUALITY_TOL) -> Report:
    """Scaled small-gap limit of the pair feedback energy bounds the
    differential one from above; with a registered dual certificate the
    bound is additionally asserted to be an equality.
    """
    report = Report("thm2", "inconclusive")
    failures: list[str] = []
    has_certificate = "R" in system.certificates or "P" in system.certificates
    ladder_tol = min(tol, 1e-10)
    for idx, (x0, dx0) in enumerate(samples):
        x0 = np.asarray(x0, dtype=float)
        dx0 = np.asarray(dx0, dtype=float)
        inputs = {"index": idx, "x0": x0.tolist(), "dx0": dx0.tolist()}
        try:
            rhs = diff_controllability_fb(system, x0, dx0, tol=tol)
            if not np.any(dx0):
                report.samples.append(Sample(inputs, 0.0, rhs.value,
                                             rhs.error_estimate + _floor(rhs.value)))
                continue
            ql = quadratic_limit(
                lambda a, b: incr_controllability_fb(system, a, b, tol=ladder_tol),
                x0, dx0)
        except (IntegrationError, ValueError) as exc:
            failures.append(f"sample {idx}: {exc}")
            continue
        budget = ql.error_budget + rhs.error_estimate + _floor(ql.limit, rhs.value)
        relation = "eq" if has_certificate else "ge"
        note = ("equality asserted: dual certificate registered"
                if has_certificate else "upper bound only: no certificate")
        report.samples.append(Sample(inputs, ql.limit, rhs.value,
                                     budget + (equality_tol if has_certificate else 0.0),
                                     relation=relation, note=note))
    report.verdict = _settle(report.samples, failures)
    report.notes.extend(failures)
    if has_certificate:
        report.notes.append("dual certificate present: limit asserted equal to "
                            "the differential energy within budget")
    return report


def check_thm4(system: SystemModel, samples: Sequence, tol: float = 1e-8,
               equality_tol: float = EQUALITY_TOL) -> Report:
    """Scaled small-gap limit of the pair output energy equals the
    differential observability energy."""
    report = Report("thm4", "inconclusive")
    failures: list[str] = []
    ladder_tol = min(tol, 1e-10)
    for idx, (x0, dx0) in enumerate(samples):
        x0 = np.asarray(x0, dtype=float)
        dx0 = np.asarray(dx0, dtype=float)
        inputs = {"index": idx, "x0": x0.tolist(), "dx0": dx0.tolist()}
        try:
            rhs = diff_observability(system, x0, dx0, tol=tol)
            if not np.any(dx0):
                report.samples.append(Sample(inputs, 0.0, rhs.value,
                                             rhs.error_estimate + _floor(rhs.value),
                                             relation="eq"))
                continue
            ql = quadratic_limit(
                lambda a, b: incr_observability(system, b, a, tol=ladder_tol),
                x0, dx0)
        except (IntegrationError, ValueError) as exc:
            failures.append(f"sample {idx}: {exc}")
            continue
        budget = (ql.error_budget + rhs.error_estimate
                  + _floor(ql.limit, rhs.value) + equality_tol)
        report.samples.append(Sample(inputs, ql.limit, rhs.value, budget,
                                     relation="eq"))
    report.verdict = _settle(report.samples, failures)
    report.notes.extend(failures)
    return report


def _implications(items: dict[int, bool]) -> tuple[list[str], str]:
    """Evaluate the cyclic implication triple over item outcomes.

    Each implication is asserted only when both antecedents independently
    pass; the verdict is fail on any violated implication, inconclusive
    when none fired, pass otherwise.
    """
    notes = []
    fired, violated = 0, 0
    for a, b, c in ((1, 2, 3), (2, 3, 1), (3, 1, 2)):
        if items[a] and items[b]:
            fired += 1
            if items[c]:
                notes.append(f"implication witnessed: items {a} and {b} hold "
                             f"and item {c} holds")
            else:
                violated += 1
                notes.append(f"IMPLICATION VIOLATED: items {a} and {b} hold "
                             f"but item {c} fails")
        else:
            notes.append(f"implication not asserted: items {a} and {b} "
                         f"not jointly established")
    if violated:
        return notes, "fail"
    if fired == 0:
        return notes, "inconclusive"
    return notes, "pass"


def check_thm5(system: SystemModel, q_field, region, samples: Sequence,
               grid_shape: Sequence[int] | None = None, tol: float = 1e-8,
               residual_tol: float = 1e-3,
               equality_tol: float = EQUALITY_TOL) -> Report:
    """Three-item observability harness with cyclic implication logic.

    Item 1: variational decay from each sample.  Item 2: output
    codistribution rank n over the region grid.  Item 3: Q positive
    definite on the grid plus half-quadratic-form consistency with the
    simulated energy at each sample.  The matrix-equation residual of Q is
    a precondition; when it is not small the whole check is inconclusive.
    """
    report = Report("thm5", "inconclusive")
    n = system.n
    grid_shape = tuple(grid_shape) if grid_shape else (5,) * n
    probe = grid_points(region, (3,) * n)
    worst = max(lyap_residual_obs(system, q_field, row).frobenius_norm
                for row in probe)
    if worst > residual_tol:
        report.notes.append(f"precondition failed: matrix-equation residual "
                            f"{worst:g} > {residual_tol:g} on region probe")
        return report

    failures: list[str] = []
    item1 = True
    aug = prolong(system)
    for x0, dx0 in samples:
        if not np.any(np.asarray(dx0, dtype=float)):
            continue
        try:
            fit = fit_decay(_sampled_norms(aug, aug.pack(x=x0, dx=dx0), "dx"),
                            "forward")
        except (IntegrationError, ValueError) as exc:
            failures.append(f"item 1 simulation failed: {exc}")
            item1 = False
            break
        report.decay_fits.append(fit)
        if fit.flagged:
            item1 = False

    ranks = [obs_codistribution(system, row, depth=n - 1 if n > 1 else 1).rank
             for row in grid_points(region, grid_shape)]
    item2 = all(r == n for r in ranks)

    scan = pd_scan(q_field, region, grid_shape)
    item3 = scan.all_positive_definite()
    for idx, (x0, dx0) in enumerate(samples):
        x0 = np.asarray(x0, dtype=float)
        dx0 = np.asarray(dx0, dtype=float)
        inputs = {"index": idx, "x0": x0.tolist(), "dx0": dx0.tolist(),
                  "relation": "half quadratic form vs simulated energy"}
        try:
            q = np.asarray(q_field([float(v) for v in x0]), dtype=float)
            quad = 0.5 * float(dx0 @ q @ dx0)
            sim = diff_observability(system, x0, dx0, tol=tol)
        except (IntegrationError, ValueError) as exc:
            failures.append(f"item 3 sample {idx}: {exc}")
            item3 = False
            continue
        budget = sim.error_estimate + _floor(quad, sim.value) + equality_tol
        sample = Sample(inputs, quad, sim.value, budget, relation="eq")
        report.samples.append(sample)
        if not sample.ok():
            item3 = False

    items = {1: item1, 2: item2, 3: item3}
    report.notes.append(f"item 1 (variational decay): {'pass' if item1 else 'fail'}")
    report.notes.append(f"item 2 (codistribution rank {n} on grid): "
                        f"{'pass' if item2 else 'fail'}")
    report.notes.append(f"item 3 (positive definite + energy consistency): "
                        f"{'pass' if item3 else 'fail'}")
    imp_notes, verdict = _implications(items)
    report.notes.extend(imp_notes)
    report.notes.extend(failures)
    report.notes.append("assumed, not checked: symmetry class and uniqueness "
                        "of the supplied matrix field")
    if failures and verdict == "pass":
        verdict = "inconclusive"
    report.verdict = verdict
    return report


def check_cor7(system: SystemModel, p_field, region, samples: Sequence,
               grid_shape: Sequence[int] | None = None,
               residual_tol: float = 1e-3) -> Report:
    """Three-item feedback controllability harness (dual side).

    Item 1: decay of the dual variational state along the reversed closed
    loop.  Item 2: feedback-modified bracket rank n over the region grid.
    Item 3: P positive definite on the grid.  The dual matrix-equation
    residual pair is the precondition.
    """
    report = Report("cor7", "inconclusive")
    n = system.n
    grid_shape = tuple(grid_shape) if grid_shape else (5,) * n
    probe = grid_points(region, (3,) * n)
    worst = 0.0
    for row in probe:
        ra, rb = lyap_residual_ctrl(system, p_field, row)
        worst = max(worst, ra.frobenius_norm, rb.frobenius_norm)
    if worst > residual_tol:
        report.notes.append(f"precondition failed: dual equation residual "
                            f"{worst:g} > {residual_tol:g} on region probe")
        return report

    failures: list[str] = []
    item1 = True
    aug = dual_closed_loop(system)
    for x0, dp0 in samples:
        if not np.any(np.asarray(dp0, dtype=float)):
            continue
        try:
            fit = fit_decay(_sampled_norms(aug, aug.pack(x=x0, dp=dp0), "dp"),
                            "forward")
        except (IntegrationError, ValueError) as exc:
            failures.append(f"item 1 simulation failed: {exc}")
            item1 = False
            break
        report.decay_fits.append(fit)
        if fit.flagged:
            item1 = False

    ranks = [ctrl_bracket_matrix(system, row, depth=2 * n - 1).rank
             for row in grid_points(region, grid_shape)]
    item2 = all(r == n for r in ranks)

    scan = pd_scan(p_field, region, grid_shape)
    item3 = scan.all_positive_definite()

    items = {1: item1, 2: item2, 3: item3}
    report.notes.append(f"item 1 (dual variational decay): {'pass' if item1 else 'fail'}")
    report.notes.append(f"item 2 (bracket rank {n} on grid): "
                        f"{'pass' if item2 else 'fail'}")
    report.notes.append(f"item 3 (positive definite on grid): "
                        f"{'pass' if item3 else 'fail'}")
    imp_notes, verdict = _implications(items)
    report.notes.extend(imp_notes)
    report.notes.extend(failures)
    if failures and verdict == "pass":
        verdict = "inconclusive"
    report.verdict = verdict
    return report
