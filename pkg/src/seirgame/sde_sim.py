"""Seeded Euler-Maruyama simulation of the joint and the reduced dynamics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import model_core as mc
from .rng import brownian_increments

log = logging.getLogger(__name__)

PATH_CACHE_VERSION = 1

# policy(t_days, x[B, 3N]) -> ell[B, N]
Policy = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1 or not self.horizon > 0:
            raise ValueError("grid needs horizon > 0 and at least one step")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass
class PathBatch:
    """Monte Carlo ensemble on a time grid.

    ``states`` is ``(B, N_T+1, 3N)``; ``removed`` holds R accumulated step by
    step from the outflow terms (not reconstructed from s, e, i);
    ``policies`` and ``costs`` are ``(B, N_T+1, N)`` with ``costs[:, k]``
    the left-endpoint cost ``f(t_k) dt`` of step k (zero at the last node).
    """

    grid: TimeGrid
    states: np.ndarray
    removed: np.ndarray
    increments: np.ndarray
    policies: np.ndarray
    costs: np.ndarray
    failed: np.ndarray
    seed: int
    stream: tuple = ()
    report: list[str] = field(default_factory=list)

    @property
    def batch_size(self) -> int:
        return self.states.shape[0]

    @property
    def n_regions(self) -> int:
        return self.states.shape[-1] // 3

    @property
    def total_cost(self) -> np.ndarray:
        """Accumulated discounted cost per path and player, ``(B, N)``."""
        return self.costs.sum(axis=1)

    def out_of_range(self, tol: float = mc.STATE_TOLERANCE) -> np.ndarray:
        """Per-path flag: some ``s``, ``e``, ``i`` left ``[-tol, 1 + tol]`` or a
        region's ``s + e + i`` exceeded ``1 + tol`` at some node.

        States are never clamped; this is how callers find out.
        """
        s, e, i = mc.split_state(self.states, self.n_regions)
        with np.errstate(invalid="ignore"):
            bad = np.zeros(self.batch_size, dtype=bool)
            for block in (s, e, i):
                bad |= np.any((block < -tol) | (block > 1 + tol), axis=(1, 2))
            bad |= np.any(s + e + i > 1 + tol, axis=(1, 2))
        return bad & ~self.failed

    def compartments(self):
        s, e, i = mc.split_state(self.states, self.n_regions)
        return {"S": s, "E": e, "I": i, "R": self.removed, "ell": self.policies}

    def save(self, path) -> None:
        np.savez_compressed(
            path, format_version=PATH_CACHE_VERSION,
            horizon=self.grid.horizon, n_steps=self.grid.n_steps,
            states=self.states, removed=self.removed, increments=self.increments,
            policies=self.policies, costs=self.costs, failed=self.failed,
            seed=self.seed, stream=json.dumps(list(self.stream)),
            report=json.dumps(self.report))

    @classmethod
    def load(cls, path) -> "PathBatch":
        with np.load(path) as z:
            version = int(z["format_version"])
            if version != PATH_CACHE_VERSION:
                raise ValueError(f"path cache version {version} is not supported")
            return cls(grid=TimeGrid(float(z["horizon"]), int(z["n_steps"])),
                       states=z["states"], removed=z["removed"],
                       increments=z["increments"], policies=z["policies"],
                       costs=z["costs"], failed=z["failed"], seed=int(z["seed"]),
                       stream=tuple(json.loads(str(z["stream"]))),
                       report=json.loads(str(z["report"])))


def constant_policy(values) -> Policy:
    vals = np.asarray(values, dtype=float)

    def policy(t, x):
        return np.broadcast_to(vals, x.shape[:-1] + vals.shape[-1:]).copy()
    return policy


def _euler(params: mc.ModelParams, x0, grid: TimeGrid, dW: np.ndarray,
           step_drift: Callable, policy: Policy, with_cost: bool,
           seed: int, stream: tuple) -> PathBatch:
    n = params.n_regions
    batch = dW.shape[0]
    x0 = np.asarray(x0, dtype=float)
    x = np.broadcast_to(x0, (batch, 3 * n)).astype(float).copy()
    states = np.empty((batch, grid.n_steps + 1, 3 * n))
    removed = np.empty((batch, grid.n_steps + 1, n))
    policies = np.zeros((batch, grid.n_steps + 1, n))
    costs = np.zeros((batch, grid.n_steps + 1, n))
    failed = np.zeros(batch, dtype=bool)
    report: list[str] = []

    states[:, 0] = x
    removed[:, 0] = mc.recovered_series(x, n)
    dt = grid.dt
    ep = params.epi
    for k, t in enumerate(grid.times[:-1]):
        ell = np.clip(np.asarray(policy(t, x), dtype=float), 0.0, 1.0)
        policies[:, k] = ell
        if with_cost:
            for m in range(n):
                costs[:, k, m] = mc.running_cost(m, t, x, ell[:, m], params) * dt
        s, _, i = mc.split_state(x, n)
        removed[:, k + 1] = removed[:, k] + (ep.lam * i + ep.v * s) * dt
        x_new = x + step_drift(t, x, ell) * dt + mc.diffusion_apply(x, dW[:, k], params)
        bad = ~np.all(np.isfinite(x_new), axis=-1) & ~failed
        if bad.any():
            for b in np.flatnonzero(bad):
                report.append(f"path {b}: non-finite state at step {k + 1}")
            failed |= bad
        x = np.where(failed[:, None], np.nan, x_new)
        states[:, k + 1] = x
    policies[:, -1] = np.clip(policy(grid.times[-1], x), 0.0, 1.0)
    if report:
        log.warning("%d paths aborted with non-finite states", int(failed.sum()))
    return PathBatch(grid, states, removed, dW, policies, costs, failed,
                     seed, stream, report)


def simulate(params: mc.ModelParams, policy: Policy, x0, grid: TimeGrid,
             batch: int, seed: int, stream: Sequence = ("simulate",),
             increments: np.ndarray | None = None) -> PathBatch:
    """Joint dynamics under a policy profile with per-player accumulated cost.

    The policy is evaluated at the left end of each step. Passing the same
    ``(seed, stream)`` reproduces the same increments, which is how callers
    get common random numbers across policy variants.
    """
    n = params.n_regions
    stream = tuple(stream)
    dW = increments if increments is not None else brownian_increments(
        seed, stream, batch, grid.n_steps, 2 * n, grid.dt)
    return _euler(params, x0, grid, dW,
                  lambda t, x, ell: mc.drift(t, x, ell, params),
                  policy, True, seed, stream)


def simulate_reduced(n: int, params: mc.ModelParams, others_policy: Policy,
                     grid: TimeGrid, batch: int, seed: int, x0,
                     stream: Sequence | None = None,
                     increments: np.ndarray | None = None) -> PathBatch:
    """Forward process of player ``n``'s decoupled problem.

    Player ``n``'s own control is removed from the drift (it lives in the
    BSDE driver); ``others_policy`` supplies the frozen policies of the other
    players (its column ``n`` is ignored and reported as 0).
    """
    from .hamiltonian import reduced_drift

    stream = tuple(stream) if stream is not None else (n, "simulate")
    nreg = params.n_regions
    dW = increments if increments is not None else brownian_increments(
        seed, stream, batch, grid.n_steps, 2 * nreg, grid.dt)

    def policy(t, x):
        ell = np.array(others_policy(t, x), dtype=float)
        ell[..., n] = 0.0
        return ell

    return _euler(params, x0, grid, dW,
                  lambda t, x, ell: reduced_drift(n, t, x, ell, params),
                  policy, False, seed, stream)


def export_csv(paths: PathBatch, fh, header: str | None = None) -> None:
    """Write rows ``path_id, t, region, S, E, I, R, ell, stepwise_cost``."""
    if header:
        fh.write(header)
    fh.write("path_id,t,region,S,E,I,R,ell,stepwise_cost\n")
    n = paths.n_regions
    s, e, i = mc.split_state(paths.states, n)
    times = paths.grid.times
    for b in range(paths.batch_size):
        for k, t in enumerate(times):
            for m in range(n):
                fh.write(f"{b},{t:.10g},{m},{s[b, k, m]:.17g},{e[b, k, m]:.17g},"
                         f"{i[b, k, m]:.17g},{paths.removed[b, k, m]:.17g},"
                         f"{paths.policies[b, k, m]:.17g},{paths.costs[b, k, m]:.17g}\n")
