"""Monte Carlo assessment of policy profiles.

Costs, unilateral-deviation probes, quantile bands for trajectory plots and
the controlled / out-of-control label. Every function works on paths from
:mod:`seirgame.sde_sim`, so evaluations with the same ``(seed, stream)``
share their Brownian increments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import model_core as mc
from .sde_sim import PathBatch, Policy, TimeGrid, simulate

CONTROL_THRESHOLD = 0.5
NASH_TOLERANCE = 0.01
DEFAULT_LEVELS = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))
BANDS = ((0.025, 0.975), (0.25, 0.75))
VARIABLES = ("S", "E", "I", "R", "ell")


@dataclass(frozen=True)
class CostReport:
    mean: np.ndarray        # (N,) dollars
    stderr: np.ndarray
    n_paths: int
    seed: int
    failed: int = 0
    out_of_range: int = 0   # finished paths that left the unit box at some node

    def rows(self):
        for n, (m, se) in enumerate(zip(self.mean, self.stderr)):
            yield {"player": n, "mean_cost": float(m), "stderr": float(se),
                   "B": self.n_paths, "seed": self.seed, "failed": self.failed,
                   "out_of_range": self.out_of_range}


def cost_report(paths: PathBatch) -> CostReport:
    ok = ~paths.failed
    costs = paths.total_cost[ok]
    if len(costs) < 2:
        raise ValueError("need at least two finished paths for a standard error")
    return CostReport(costs.mean(axis=0), costs.std(axis=0, ddof=1) / np.sqrt(len(costs)),
                      paths.batch_size, paths.seed, int(paths.failed.sum()),
                      int(paths.out_of_range().sum()))


def estimate_cost(profile: Policy, params: mc.ModelParams, x0, grid: TimeGrid,
                  batch: int, seed: int, stream: Sequence = ("evaluate",)) -> CostReport:
    """Per-player expected cost, by left-endpoint quadrature along simulated paths.

    Failed (non-finite) paths are excluded from the mean and counted in
    ``failed``.
    """
    if batch < 2:
        raise ValueError("batch must be at least 2")
    return cost_report(simulate(params, profile, x0, grid, batch, seed, stream))


def deviate(profile: Policy, player: int, alternative: Policy) -> Policy:
    """``profile`` with ``player``'s column replaced by ``alternative``."""
    def policy(t, x):
        ell = np.array(profile(t, x), dtype=float)
        alt = np.asarray(alternative(t, x), dtype=float)
        ell[..., player] = alt[..., player] if alt.ndim == ell.ndim else alt
        return ell
    return policy


def constant(level: float) -> Policy:
    def policy(t, x):
        return np.full(np.shape(x)[:-1], float(level))
    return policy


@dataclass
class ProbeResult:
    player: int
    baseline_cost: float
    reductions: dict[str, float]          # alternative -> mean cost reduction ($)
    stderrs: dict[str, float]             # paired standard errors
    tolerance: float                      # eps_ne in dollars

    @property
    def worst(self) -> str:
        return max(self.reductions, key=self.reductions.get)

    @property
    def max_reduction(self) -> float:
        return self.reductions[self.worst]

    @property
    def passed(self) -> bool:
        return all(r <= self.tolerance + 2.0 * self.stderrs[k]
                   for k, r in self.reductions.items())


def exploitability_probe(profile: Policy, player: int, params: mc.ModelParams, x0,
                         grid: TimeGrid, batch: int, seed: int,
                         alternatives: Mapping[str, Policy] | None = None,
                         tolerance: float = NASH_TOLERANCE,
                         stream: Sequence = ("probe",)) -> ProbeResult:
    """Cost reductions player ``player`` gets from unilateral deviations.

    Every simulation reuses the same increments, so the reduction per path is
    a paired difference; its standard error is that of the paired sample.
    ``tolerance`` is relative to the player's cost under ``profile``.
    Alternatives default to the constants 0, 0.1, ..., 1 plus the player's
    own policy (whose reduction is exactly 0).
    """
    if alternatives is None:
        alternatives = {f"const={lvl:g}": constant(lvl) for lvl in DEFAULT_LEVELS}
        alternatives["learned"] = profile
    base = simulate(params, profile, x0, grid, batch, seed, stream)
    base_cost = base.total_cost[:, player]
    reductions, stderrs = {}, {}
    for name, alt in alternatives.items():
        dev = simulate(params, deviate(profile, player, alt), x0, grid, batch, seed,
                       stream, increments=base.increments)
        ok = ~(base.failed | dev.failed)
        diff = base_cost[ok] - dev.total_cost[ok, player]
        reductions[name] = float(diff.mean())
        stderrs[name] = float(diff.std(ddof=1) / np.sqrt(len(diff))) if len(diff) > 1 else 0.0
    baseline = float(np.mean(base_cost[~base.failed]))
    return ProbeResult(player, baseline, reductions, stderrs, tolerance * abs(baseline))


@dataclass
class Summary:
    times: np.ndarray
    mean: dict[str, np.ndarray]                        # var -> (N_T+1, N)
    quantiles: dict[str, dict[float, np.ndarray]] = field(default_factory=dict)

    @property
    def n_regions(self) -> int:
        return self.mean["S"].shape[1]


def summarize(paths: PathBatch, bands=BANDS) -> Summary:
    """Mean and empirical quantile bands per variable, node and region.

    Failed paths are left out.
    """
    comps = paths.compartments()
    ok = ~paths.failed
    levels = sorted({q for band in bands for q in band})
    mean, quant = {}, {}
    for var in VARIABLES:
        data = comps[var][ok]
        mean[var] = data.mean(axis=0)
        qs = np.quantile(data, levels, axis=0)
        quant[var] = {q: qs[j] for j, q in enumerate(levels)}
    return Summary(paths.grid.times, mean, quant)


@dataclass(frozen=True)
class EquilibriumLabel:
    label: str
    terminal_s: np.ndarray
    initial_s: np.ndarray
    threshold: float

    @property
    def controlled(self) -> bool:
        return self.label == "controlled"


def classify(paths: PathBatch, threshold: float = CONTROL_THRESHOLD) -> EquilibriumLabel:
    """``controlled`` iff mean terminal S >= threshold * initial S in every region."""
    s = paths.compartments()["S"][~paths.failed]
    initial, terminal = s[:, 0].mean(axis=0), s[:, -1].mean(axis=0)
    ok = bool(np.all(terminal >= threshold * initial))
    return EquilibriumLabel("controlled" if ok else "out_of_control", terminal,
                            initial, threshold)


def time_average_policy(paths: PathBatch) -> np.ndarray:
    """Mean lockdown level per region over paths and the nodes ``t_0..t_{N_T-1}``."""
    return paths.policies[~paths.failed, :-1].mean(axis=(0, 1))


# ---- report writers ------------------------------------------------------

def write_cost_report(report: CostReport, fh, header: str = "") -> None:
    fh.write(header)
    writer = csv.DictWriter(fh, ["player", "mean_cost", "stderr", "B", "seed", "failed",
                                 "out_of_range"],
                            lineterminator="\n")
    writer.writeheader()
    for row in report.rows():
        writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v)
                         for k, v in row.items()})


def write_summary(summary: Summary, fh, names: Sequence[str] | None = None,
                  header: str = "") -> None:
    """Long-format rows ``t, region, variable, mean, q0.025, ...``."""
    fh.write(header)
    levels = sorted(next(iter(summary.quantiles.values())))
    fh.write("t,region,variable,mean," + ",".join(f"q{q:g}" for q in levels) + "\n")
    names = names or [str(n) for n in range(summary.n_regions)]
    for var in VARIABLES:
        for k, t in enumerate(summary.times):
            for n, name in enumerate(names):
                vals = [summary.mean[var][k, n]] + [summary.quantiles[var][q][k, n]
                                                    for q in levels]
                fh.write(f"{t:g},{name},{var}," + ",".join(f"{v:.10g}" for v in vals) + "\n")


def write_classification(label: EquilibriumLabel, fh, names: Sequence[str],
                         header: str = "") -> None:
    fh.write(header)
    fh.write("region,initial_S,terminal_S,threshold,label\n")
    for n, name in enumerate(names):
        fh.write(f"{name},{label.initial_s[n]:.10g},{label.terminal_s[n]:.10g},"
                 f"{label.threshold:g},{label.label}\n")


def write_probe(results: Sequence[ProbeResult], fh, header: str = "") -> None:
    fh.write(header)
    fh.write("player,alternative,reduction,stderr,tolerance,baseline_cost,passed\n")
    for res in results:
        for name, red in res.reductions.items():
            ok = red <= res.tolerance + 2.0 * res.stderrs[name]
            fh.write(f"{res.player},{name},{red:.10g},{res.stderrs[name]:.10g},"
                     f"{res.tolerance:.10g},{res.baseline_cost:.10g},{int(ok)}\n")


__all__ = ["CostReport", "estimate_cost", "cost_report", "exploitability_probe",
           "ProbeResult", "Summary", "summarize", "EquilibriumLabel", "classify",
           "time_average_policy", "deviate", "constant", "write_cost_report",
           "write_summary", "write_classification", "write_probe",
           "CONTROL_THRESHOLD", "NASH_TOLERANCE"]
