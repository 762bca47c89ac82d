"""Enhanced deep fictitious play.

Each player owns a value network ``V^n(t, x)`` and a policy network
``alpha^n(t, x)``. At stage ``m`` every player, against the other players'
policy networks frozen at stage ``m - 1``, runs a few Adam steps on the
deep-BSDE loss

    E |Y_T|^2 + tau * sum_k |alpha_k - alpha~(t_k, X_k)|^2 dt,

where ``X`` follows the player's reduced dynamics, ``Y_0 = V(0, X_0)``,
``Z_k = Sigma(X_k)^T grad_x V(t_k, X_k)``, ``alpha_k`` is the closed-form
best response at ``Z_k`` and ``Y`` is stepped with the BSDE driver. Only the
latest networks are kept, so evaluating the opponents costs one network
call regardless of the stage index.

Money inside the networks is measured in units of a per-player scale
``S^n``: ``V = S^n * NN`` and the terminal term of the loss is
``(Y_T / S^n)^2``. By default ``S^n`` is the larger of ``P^n w T`` (a full
lockdown for the whole horizon) and a Monte Carlo estimate of player ``n``'s
cost with no lockdown anywhere, so that values stay of order one.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import hamiltonian as hm
from . import model_core as mc
from . import neural as nn
from .rng import brownian_increments, generator
from .sde_sim import TimeGrid, constant_policy, simulate, simulate_reduced

log = logging.getLogger(__name__)


class SolverAbort(RuntimeError):
    def __init__(self, message: str, diagnostics: list[dict]):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SolverConfig:
    stages: int = 250
    sgd_steps: int = 100
    batch: int = 256
    n_steps: int = 40
    lr: float = 5e-4
    tau: float = 1e-3 / 180
    eps_conv: float = 1e-4
    seed: int = 0
    hidden: tuple[int, ...] = (40, 40, 40)
    validation_paths: int = 256
    probe_points: int = 512
    value_scale: float | None = None
    x0_box: float = 0.0
    standardize_inputs: bool = True
    workers: int = 1
    divergence_factor: float = 1e3
    max_divergent_stages: int = 3
    eps_A: float = hm.EPS_A

    def __post_init__(self):
        for name in ("stages", "sgd_steps", "batch", "n_steps", "validation_paths",
                     "probe_points", "workers", "max_divergent_stages"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.tau < 0 or self.lr <= 0 or self.x0_box < 0:
            raise ValueError("need tau >= 0, lr > 0 and x0_box >= 0")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Features:
    """Network inputs: ``t / T`` and the standardized state ``(x - center) / spread``."""

    horizon: float
    center: np.ndarray
    spread: np.ndarray

    def __call__(self, t, x):
        return (np.asarray(t, dtype=float) / self.horizon,
                (np.asarray(x, dtype=float) - self.center) / self.spread)

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "center": self.center.tolist(),
                "spread": self.spread.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Features":
        return cls(float(d["horizon"]), np.asarray(d["center"], dtype=float),
                   np.asarray(d["spread"], dtype=float))


class PolicyProfile:
    """Lockdown policies ``ell^n(t, x)`` given by one policy network per player.

    ``skip`` players are not evaluated and reported as 0 (used for the
    reduced dynamics, where a player's own control is not in the drift).
    """

    def __init__(self, policy_nets: Sequence[nn.MlpParams], features: Features,
                 provenance: dict | None = None, skip: Sequence[int] = ()):
        self.policy_nets = list(policy_nets)
        self.features = features
        self.provenance = dict(provenance or {})
        self.skip = set(skip)

    @property
    def n_players(self) -> int:
        return len(self.policy_nets)

    def __call__(self, t, x) -> np.ndarray:
        x = np.atleast_2d(x)
        out = np.zeros((x.shape[0], self.n_players))
        tn, xn = self.features(t, x)
        for j, net in enumerate(self.policy_nets):
            if j not in self.skip:
                out[:, j] = nn.forward(net, tn, xn)
        return out

    def without(self, n: int) -> "PolicyProfile":
        return PolicyProfile(self.policy_nets, self.features, self.provenance,
                             self.skip | {n})


@dataclass
class StageState:
    stage: int
    value_nets: list[nn.MlpParams]
    policy_nets: list[nn.MlpParams]
    value_opts: list[nn.AdamState]
    policy_opts: list[nn.AdamState]
    features: Features
    scales: list[float] = field(default_factory=list)
    loss_history: list[list[float]] = field(default_factory=list)
    metric_history: list[float] = field(default_factory=list)
    divergent_streak: list[int] = field(default_factory=list)

    @property
    def n_players(self) -> int:
        return len(self.value_nets)

    def network_count(self) -> int:
        return len(self.value_nets) + len(self.policy_nets)


@dataclass
class Rollout:
    X: np.ndarray          # (B, N_T+1, 3N)
    Y: np.ndarray          # (B, N_T+1), dollars
    Z: np.ndarray          # (B, N_T, 2N), dollars
    alpha: np.ndarray      # (B, N_T) best responses
    alpha_tilde: np.ndarray
    others: np.ndarray     # (B, N_T, N) frozen opponent policies (column n = 0)
    scale: float

    @property
    def terminal(self) -> np.ndarray:
        return self.Y[:, -1]


@dataclass
class StageResult:
    value_net: nn.MlpParams
    policy_net: nn.MlpParams
    value_opt: nn.AdamState
    policy_opt: nn.AdamState
    losses: list[float]
    validation_loss: float
    diverged: bool
    skipped: int


@dataclass
class SolveResult:
    profile: PolicyProfile
    state: StageState
    diagnostics: list[dict]
    stopped_early: bool


PILOT_PATHS = 64
MIN_SPREAD = 1e-3


def pilot(config: SolverConfig, params: mc.ModelParams, x0) -> tuple[list[float], Features]:
    """Value scales and input standardization from a no-lockdown pilot run.

    Each player's scale is the larger of ``P^n w T`` and its mean pilot cost
    (1 if both vanish). Inputs are centred at ``x0``; the spread of each
    coordinate is the range of its pilot mean path, floored at ``MIN_SPREAD``.
    Exposed and infectious fractions start near 1e-3, so without this the
    value network would need very steep input slopes to express the gap
    between ``dV/de`` and ``dV/ds`` that drives the lockdown decision.
    """
    nreg = params.n_regions
    grid = TimeGrid(params.horizon, config.n_steps)
    free = simulate(params, constant_policy(np.zeros(nreg)), x0, grid, PILOT_PATHS,
                    config.seed, stream=("pilot",))
    ok = ~free.failed
    if config.value_scale is not None:
        scales = [float(config.value_scale)] * nreg
    else:
        uncontrolled = free.total_cost[ok].mean(axis=0) if ok.any() else np.zeros(nreg)
        scales = []
        for n in range(nreg):
            full = params.regions.populations[n] * params.cost.w * params.horizon
            scale = max(full, float(uncontrolled[n]))
            scales.append(float(scale) if scale > 0 else 1.0)
    x0 = np.asarray(x0, dtype=float)
    if not config.standardize_inputs:
        return scales, Features(float(params.horizon), np.zeros_like(x0), np.ones_like(x0))
    if ok.any():
        mean_path = free.states[ok].mean(axis=0)
        spread = np.maximum(np.ptp(mean_path, axis=0), MIN_SPREAD)
    else:
        spread = np.ones_like(x0)
    return scales, Features(float(params.horizon), x0.copy(), spread)


def init_state(config: SolverConfig, params: mc.ModelParams, x0) -> StageState:
    nreg = params.n_regions
    sizes = [1 + 3 * nreg, *config.hidden, 1]
    values, policies = [], []
    for n in range(nreg):
        rng = generator(config.seed, (n, 0, "init"))
        values.append(nn.init_mlp(sizes, "identity", rng, zero_output=True))
        policies.append(nn.init_mlp(sizes, "logistic", rng))
    scales, features = pilot(config, params, x0)
    return StageState(
        stage=0, value_nets=values, policy_nets=policies,
        value_opts=[nn.AdamState.for_params(v, config.lr) for v in values],
        policy_opts=[nn.AdamState.for_params(p, config.lr) for p in policies],
        features=features, scales=scales, divergent_streak=[0] * nreg)


def stage_loss(terminal, alpha, alpha_tilde, tau: float, dt: float) -> float:
    """Mean squared terminal value plus the tau-weighted policy-matching sum.

    ``terminal`` is ``(B,)``; ``alpha`` and ``alpha_tilde`` are ``(B, N_T)``
    (or ``(B, N_T, d)`` for vector controls).
    """
    terminal = np.asarray(terminal, dtype=float)
    diff = np.asarray(alpha, dtype=float) - np.asarray(alpha_tilde, dtype=float)
    match = np.sum(diff.reshape(diff.shape[0], -1) ** 2, axis=1) * dt
    return float(np.mean(terminal ** 2) + tau * np.mean(match))


def _sample_x0(config: SolverConfig, x0, batch: int, stream) -> np.ndarray:
    """Initial states for one batch.

    With ``x0_box > 0`` the exposed and infectious fractions are drawn
    uniformly from ``x0 +- x0_box`` (floored at 0) and the susceptible
    fraction absorbs the difference, so every region keeps its removed
    fraction and ``s + e + i`` stays as in ``x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    pts = np.broadcast_to(x0, (batch, x0.size)).copy()
    if config.x0_box <= 0:
        return pts
    nreg = x0.size // 3
    rng = generator(config.seed, stream)
    sick = x0[nreg:] + rng.uniform(-config.x0_box, config.x0_box, (batch, 2 * nreg))
    sick = np.maximum(sick, 0.0)
    pts[:, nreg:] = sick
    pts[:, :nreg] = x0[:nreg] + (x0[nreg:2 * nreg] + x0[2 * nreg:]) \
        - sick[:, :nreg] - sick[:, nreg:]
    return pts


def _forward_paths(n, frozen: PolicyProfile, params, grid, dW, x0s):
    """Reduced forward paths for all batch members (x0 may differ per path)."""
    batch = dW.shape[0]
    return simulate_reduced(n, params, frozen.without(n), grid, batch, seed=0,
                            x0=x0s, stream=(n, "rollout"), increments=dW)


class _Objective:
    """Loss of one player on one batch, with adjoints for the networks."""

    def __init__(self, n, params, grid, features, tau, scale, eps_A, X, others, dW):
        self.n, self.params, self.grid, self.features = n, params, grid, features
        self.tau, self.scale, self.eps_A = tau, scale, eps_A
        self.X, self.others, self.dW = X, others, dW
        self.Xk = X[:, :-1]
        self.tk = grid.times[:-1]
        self.rollout: Rollout | None = None

    def points(self):
        batch, nt = self.Xk.shape[:2]
        t = np.broadcast_to(self.tk, (batch, nt)).ravel()
        return self.features(t, self.Xk.reshape(batch * nt, -1))

    def __call__(self, outputs):
        batch, nt = self.Xk.shape[:2]
        nreg = self.params.n_regions
        dt, S, tau = self.grid.dt, self.scale, self.tau
        v, u = outputs["value"]
        spread = self.features.spread
        u = u.reshape(batch, nt, 3 * nreg) / spread
        a_tilde = outputs["policy"][0].reshape(batch, nt)

        Z = S * hm.sigma_transpose_grad(self.Xk, u, self.params)
        drv = hm.driver_with_sensitivities(self.n, self.tk[None, :], self.Xk, Z,
                                           self.others, self.params, self.eps_A)
        y0 = S * v.reshape(batch, nt)[:, 0]
        increments = -drv.g * dt + np.sum(Z * self.dW, axis=-1)
        Y = np.concatenate([y0[:, None], y0[:, None] + np.cumsum(increments, axis=1)],
                           axis=1)
        self.rollout = Rollout(self.X, Y, Z, drv.ell, a_tilde, self.others, S)
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(Z))):
            raise FloatingPointError("non-finite Y or Z")

        r = Y[:, -1] / S
        diff = drv.ell - a_tilde
        loss = stage_loss(r, drv.ell, a_tilde, tau, dt)

        yT_bar = 2.0 * r / batch / S
        match_bar = 2.0 * tau * dt / batch * diff
        Z_bar = yT_bar[:, None, None] * (-dt * drv.dg_dz + self.dW) \
            + match_bar[..., None] * drv.dell_dz
        u_bar = S * hm.sigma_apply_adjoint(self.Xk, Z_bar, self.params) / spread
        v_bar = np.zeros((batch, nt))
        v_bar[:, 0] = S * yT_bar
        return loss, {"value": (v_bar.ravel(), u_bar.reshape(batch * nt, -1)),
                      "policy": (-match_bar.ravel(), None)}


def _objective(n, value_net, policy_net, frozen, params, grid, config, scale,
               dW, x0s, with_grads: bool):
    features = frozen.features
    paths = _forward_paths(n, frozen, params, grid, dW, x0s)
    if paths.failed.any():
        raise FloatingPointError(f"{int(paths.failed.sum())} forward paths failed")
    obj = _Objective(n, params, grid, features, config.tau, scale, config.eps_A,
                     paths.states, paths.policies[:, :-1], dW)
    t, x = obj.points()
    nets = {"value": (value_net, t, x, True), "policy": (policy_net, t, x, False)}
    if with_grads:
        loss, grads = nn.loss_and_param_gradients(nets, obj)
        return loss, grads, obj.rollout
    outputs = {"value": (nn.forward(value_net, t, x), nn.input_gradient(value_net, t, x)),
               "policy": (nn.forward(policy_net, t, x), None)}
    loss, _ = obj(outputs)
    return loss, None, obj.rollout


def rollout(n: int, value_net: nn.MlpParams, policy_net: nn.MlpParams,
            frozen: PolicyProfile, params: mc.ModelParams, grid: TimeGrid,
            increments: np.ndarray, x0, scale: float,
            config: SolverConfig | None = None) -> Rollout:
    """Forward/backward paths of player ``n`` for one batch of increments."""
    config = config or SolverConfig()
    x0s = np.broadcast_to(np.asarray(x0, dtype=float),
                          (increments.shape[0], 3 * params.n_regions)).copy()
    return _objective(n, value_net, policy_net, frozen, params, grid, config,
                      scale, increments, x0s, with_grads=False)[2]


def validation_loss(n, value_net, policy_net, frozen, params, grid, config,
                    scale, x0, stage) -> float:
    dW = brownian_increments(config.seed, (n, stage, "validation"),
                             config.validation_paths, grid.n_steps,
                             2 * params.n_regions, grid.dt)
    x0s = _sample_x0(config, x0, config.validation_paths, (n, stage, "x0", 1))
    try:
        return _objective(n, value_net, policy_net, frozen, params, grid, config,
                          scale, dW, x0s, with_grads=False)[0]
    except FloatingPointError:
        return float("nan")


def train_stage(n: int, state: StageState, frozen: PolicyProfile,
                params: mc.ModelParams, x0, config: SolverConfig,
                stage: int) -> StageResult:
    """Warm-started Adam steps for player ``n`` with fresh paths every step."""
    grid = TimeGrid(params.horizon, config.n_steps)
    scale = state.scales[n]
    value_net, policy_net = state.value_nets[n], state.policy_nets[n]
    value_opt, policy_opt = state.value_opts[n].copy(), state.policy_opts[n].copy()
    lr = config.lr
    first = None
    diverged = False
    skipped = 0
    losses: list[float] = []
    for step in range(config.sgd_steps):
        dW = brownian_increments(config.seed, (n, stage, "train", step), config.batch,
                                 grid.n_steps, 2 * params.n_regions, grid.dt)
        x0s = _sample_x0(config, x0, config.batch, (n, stage, "x0", 0, step))
        try:
            loss, grads, _ = _objective(n, value_net, policy_net, frozen, params,
                                        grid, config, scale, dW, x0s, with_grads=True)
        except FloatingPointError as err:
            log.warning("player %d stage %d step %d skipped: %s", n, stage, step, err)
            losses.append(float("nan"))
            skipped += 1
            continue
        losses.append(loss)
        if first is None:
            first = loss
        elif not diverged and loss > config.divergence_factor * max(first, 1e-300):
            lr *= 0.5
            diverged = True
            log.warning("player %d stage %d: loss %.3g exceeds %.0fx its initial "
                        "value, halving lr to %.3g", n, stage, loss,
                        config.divergence_factor, lr)
        value_net = nn.optimizer_step(value_net, grads["value"], value_opt, lr)
        policy_net = nn.optimizer_step(policy_net, grads["policy"], policy_opt, lr)
    val = validation_loss(n, value_net, policy_net, frozen, params, grid, config,
                          scale, x0, stage)
    if skipped == config.sgd_steps or not (value_net.is_finite() and policy_net.is_finite()):
        diverged = True
    return StageResult(value_net, policy_net, value_opt, policy_opt, losses, val,
                       diverged, skipped)


def probe_set(config: SolverConfig, params: mc.ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Fixed (t, x) points for the stage-to-stage change metric.

    Per region, ``(s, e, i)`` is uniform on the unit cube conditioned on
    ``s + e + i <= 1`` (rejection sampling); times are uniform on [0, T].
    """
    rng = generator(config.seed, ("convergence-probe",))
    nreg, m = params.n_regions, config.probe_points
    x = np.empty((m, 3 * nreg))
    for j in range(nreg):
        got = np.empty((0, 3))
        while len(got) < m:
            cand = rng.uniform(0.0, 1.0, (2 * m, 3))
            got = np.vstack([got, cand[cand.sum(axis=1) <= 1.0]])
        x[:, [j, j + nreg, j + 2 * nreg]] = got[:m]
    t = rng.uniform(0.0, params.horizon, m)
    return t, x


def _relative_change(prev, new) -> float:
    return float(np.linalg.norm(new - prev) / max(np.linalg.norm(prev), 1e-8))


def convergence_metric(prev: StageState, new: StageState, probe) -> float:
    """Largest relative L2 change of any player's policy or value outputs on
    the probe set; the previous stage's norm (floored at 1e-8) is the
    denominator."""
    tn, x = prev.features(*probe)
    worst = 0.0
    for n in range(prev.n_players):
        for a, b in ((prev.policy_nets[n], new.policy_nets[n]),
                     (prev.value_nets[n], new.value_nets[n])):
            worst = max(worst, _relative_change(nn.forward(a, tn, x), nn.forward(b, tn, x)))
    return worst


def run(config: SolverConfig, params: mc.ModelParams, x0,
        state: StageState | None = None,
        on_stage: Callable[[StageState, list[dict]], None] | None = None) -> SolveResult:
    """Fictitious-play stages until ``config.stages`` or the change metric
    drops below ``config.eps_conv``."""
    if np.any(params.epi.sigma_s <= 0):
        raise mc.ConfigError("the solver needs sigma_s > 0 in every region")
    x0 = np.asarray(x0, dtype=float)
    issues = mc.check_state(x0, params.n_regions)
    if issues:
        raise mc.ConfigError("invalid initial state: " + "; ".join(issues))
    dt = params.horizon / config.n_steps
    fastest = max(params.epi.gamma, params.epi.lam)
    if fastest * dt >= 1.0:
        log.warning("time step %.3g is coarse for rate %.3g; Euler paths may "
                    "oscillate or blow up", dt, fastest)
    state = state or init_state(config, params, x0)
    if not state.divergent_streak:
        state.divergent_streak = [0] * state.n_players
    probe = probe_set(config, params)
    diagnostics: list[dict] = []
    stopped_early = False
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for stage in range(state.stage + 1, config.stages + 1):
            started = time.perf_counter()
            frozen = PolicyProfile(state.policy_nets, state.features)

            def work(n, stage=stage, frozen=frozen):
                return train_stage(n, state, frozen, params, x0, config, stage)

            players = range(state.n_players)
            results = list(pool.map(work, players)) if pool else [work(n) for n in players]
            new = StageState(
                stage=stage,
                value_nets=[r.value_net for r in results],
                policy_nets=[r.policy_net for r in results],
                value_opts=[r.value_opt for r in results],
                policy_opts=[r.policy_opt for r in results],
                features=state.features,
                scales=state.scales,
                loss_history=[r.losses for r in results],
                metric_history=state.metric_history,
                divergent_streak=[(s + 1) if r.diverged else 0
                                  for s, r in zip(state.divergent_streak, results)])
            metric = convergence_metric(state, new, probe)
            new.metric_history = state.metric_history + [metric]
            wall = time.perf_counter() - started
            rows = [{"stage": stage, "player": n,
                     "train_loss_mean": float(np.nanmean(r.losses)) if not
                     np.all(np.isnan(r.losses)) else float("nan"),
                     "validation_loss": r.validation_loss,
                     "convergence_metric": metric, "wall_time": wall}
                    for n, r in enumerate(results)]
            diagnostics.extend(rows)
            state = new
            log.info("stage %d: val %s metric %.3g (%.2fs)", stage,
                     " ".join(f"{r['validation_loss']:.4g}" for r in rows), metric, wall)
            if on_stage:
                on_stage(state, rows)
            bad = [n for n, s in enumerate(state.divergent_streak)
                   if s >= config.max_divergent_stages]
            if bad:
                raise SolverAbort(f"players {bad} diverged for "
                                  f"{config.max_divergent_stages} consecutive stages",
                                  diagnostics)
            if metric < config.eps_conv:
                stopped_early = True
                log.info("stage %d: change metric %.3g below %.3g, stopping",
                         stage, metric, config.eps_conv)
                break
    finally:
        if pool:
            pool.shutdown()
    profile = PolicyProfile(state.policy_nets, state.features,
                            {"stage": state.stage, "seed": config.seed})
    return SolveResult(profile, state, diagnostics, stopped_early)


def value_at(state: StageState, n: int, t, x) -> np.ndarray:
    """``V^n(t, x)`` in dollars."""
    tn, xn = state.features(t, np.atleast_2d(x))
    return state.scales[n] * nn.forward(state.value_nets[n], tn, xn)


def value_gradient(state: StageState, n: int, t, x) -> np.ndarray:
    """``grad_x V^n(t, x)`` in dollars per unit population fraction."""
    tn, xn = state.features(t, np.atleast_2d(x))
    return state.scales[n] * nn.input_gradient(state.value_nets[n], tn, xn) \
        / state.features.spread


def save_state(path, state: StageState, config_digest: str,
               extra: dict | None = None) -> None:
    networks, optimizers = {}, {}
    for n in range(state.n_players):
        networks[f"value_{n}"] = state.value_nets[n]
        networks[f"policy_{n}"] = state.policy_nets[n]
        optimizers[f"value_{n}"] = state.value_opts[n]
        optimizers[f"policy_{n}"] = state.policy_opts[n]
    meta = {"metric_history": state.metric_history,
            "divergent_streak": state.divergent_streak,
            "scales": state.scales,
            "features": state.features.to_dict(),
            "n_players": state.n_players}
    meta.update(extra or {})
    nn.save_checkpoint(path, stage=state.stage, config_digest=config_digest,
                       networks=networks, optimizers=optimizers, extra=meta)


def load_state(path) -> tuple[StageState, dict]:
    ck = nn.load_checkpoint(path)
    extra = ck["extra"]
    nplayers = int(extra["n_players"])
    nets, opts = ck["networks"], ck["optimizers"]
    state = StageState(
        stage=ck["stage"],
        value_nets=[nets[f"value_{n}"] for n in range(nplayers)],
        policy_nets=[nets[f"policy_{n}"] for n in range(nplayers)],
        value_opts=[opts[f"value_{n}"] for n in range(nplayers)],
        policy_opts=[opts[f"policy_{n}"] for n in range(nplayers)],
        features=Features.from_dict(extra["features"]),
        scales=[float(v) for v in extra["scales"]],
        metric_history=list(extra.get("metric_history", [])),
        divergent_streak=list(extra.get("divergent_streak", [0] * nplayers)))
    return state, ck


def zero_cost(params: mc.ModelParams) -> mc.ModelParams:
    """The same model with every cost weight set to zero (so ``V = 0``)."""
    return params.with_cost(w=0.0, a=0.0, eta=0.0)


__all__ = ["SolverConfig", "StageState", "PolicyProfile", "Rollout", "SolveResult",
           "SolverAbort", "stage_loss", "rollout", "train_stage", "run",
           "convergence_metric", "probe_set", "save_state", "load_state",
           "value_at", "value_gradient", "zero_cost", "Features", "pilot", "init_state"]
