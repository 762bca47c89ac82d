"""Multi-region stochastic SEIR model: constants, transmission matrix, drift,
diffusion and running cost.

State vectors use the block layout ``x = (s_1..s_N, e_1..e_N, i_1..i_N)`` with
compartments expressed as fractions of each region's population. Time is in
days and money in dollars. Every function accepts arbitrary leading batch
dimensions on ``x`` (and on policies), so the same code serves single points
and Monte Carlo batches.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

STATE_TOLERANCE = 1e-6


class ConfigError(ValueError):
    """Invalid model input (bad shapes, negative rates, malformed travel rows)."""


@dataclass(frozen=True)
class RegionSet:
    names: tuple[str, ...]
    populations: np.ndarray

    def __post_init__(self):
        pops = np.asarray(self.populations, dtype=float)
        object.__setattr__(self, "populations", pops)
        object.__setattr__(self, "names", tuple(self.names))
        if pops.ndim != 1 or len(pops) < 1:
            raise ConfigError("populations must be a non-empty 1-D array")
        if len(self.names) != len(pops):
            raise ConfigError(
                f"{len(self.names)} region names but {len(pops)} populations")
        if not np.all(pops > 0):
            raise ConfigError("all populations must be positive")

    @property
    def count(self) -> int:
        return len(self.populations)


@dataclass(frozen=True)
class EpiParams:
    beta_matrix: np.ndarray
    gamma: float
    lam: float
    kappa: float
    theta: float
    sigma_s: np.ndarray
    sigma_e: np.ndarray
    v: float = 0.0
    beta: float | None = None   # base rate, kept for provenance only

    def __post_init__(self):
        bm = np.asarray(self.beta_matrix, dtype=float)
        n = bm.shape[0]
        object.__setattr__(self, "beta_matrix", bm)
        object.__setattr__(self, "sigma_s", _as_region_vector(self.sigma_s, n, "sigma_s"))
        object.__setattr__(self, "sigma_e", _as_region_vector(self.sigma_e, n, "sigma_e"))
        if bm.ndim != 2 or bm.shape != (n, n):
            raise ConfigError("beta_matrix must be square")
        if np.any(bm < 0):
            raise ConfigError("beta_matrix entries must be >= 0")
        for name in ("gamma", "lam", "kappa", "v"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta must lie in [0, 1]")
        if np.any(self.sigma_s < 0) or np.any(self.sigma_e < 0):
            raise ConfigError("noise levels must be >= 0")


@dataclass(frozen=True)
class CostParams:
    w: float
    chi: float
    p: float
    c: float
    a: float
    r: float = 0.0
    eta: float = 0.0
    horizon: float = 180.0

    def __post_init__(self):
        for name in ("w", "chi", "p", "c", "a", "r", "eta", "horizon"):
            if getattr(self, name) < 0:
                raise ConfigError(f"cost parameter {name} must be >= 0")


@dataclass(frozen=True)
class ModelParams:
    regions: RegionSet
    epi: EpiParams
    cost: CostParams
    travel: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.epi.beta_matrix.shape[0] != self.regions.count:
            raise ConfigError("beta_matrix size does not match the region count")

    @property
    def n_regions(self) -> int:
        return self.regions.count

    @property
    def horizon(self) -> float:
        return self.cost.horizon

    def with_cost(self, **changes) -> "ModelParams":
        return replace(self, cost=replace(self.cost, **changes))

    def with_epi(self, **changes) -> "ModelParams":
        return replace(self, epi=replace(self.epi, **changes))


@dataclass(frozen=True)
class PolicyVector:
    ell: np.ndarray
    h: np.ndarray | None = None

    def __post_init__(self):
        ell = np.asarray(self.ell, dtype=float)
        h = np.zeros_like(ell) if self.h is None else np.asarray(self.h, dtype=float)
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "h", h)
        if np.any((ell < 0) | (ell > 1)) or np.any((h < 0) | (h > 1)):
            raise ConfigError("policies must lie in [0, 1]")


class Calibration(NamedTuple):
    beta: float
    lam: float
    kappa: float
    gamma: float


def _as_region_vector(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{name} must be a scalar or have length {n}")
    return arr


def split_state(x: np.ndarray, n_regions: int):
    """Return views ``(s, e, i)`` of a block-layout state array."""
    x = np.asarray(x)
    if x.shape[-1] != 3 * n_regions:
        raise ConfigError(f"state has length {x.shape[-1]}, expected {3 * n_regions}")
    return x[..., :n_regions], x[..., n_regions:2 * n_regions], x[..., 2 * n_regions:]


def validate_travel(travel, n_regions: int, allow_outside: bool = False) -> np.ndarray:
    """Check a travel-fraction matrix, returning it as a float array.

    Rows must sum to 1 (closed system) unless ``allow_outside`` is set, in
    which case rows may sum to less than 1 and the residual is treated as time
    spent outside the modelled regions.
    """
    f = np.asarray(travel, dtype=float)
    if f.shape != (n_regions, n_regions):
        raise ConfigError(f"travel matrix has shape {f.shape}, expected "
                          f"({n_regions}, {n_regions})")
    if np.any(f < 0) or np.any(f > 1):
        raise ConfigError("travel fractions must lie in [0, 1]")
    sums = f.sum(axis=1)
    for row, total in enumerate(sums):
        if allow_outside:
            if total > 1 + 1e-12:
                raise ConfigError(f"travel row {row} sums to {total:g} > 1")
        elif abs(total - 1) > 1e-9:
            raise ConfigError(f"travel row {row} sums to {total:g}, expected 1")
    diag = np.diag(f)
    off = f - np.diag(diag)
    if np.any(off.max(axis=1) >= diag) or np.any(off.max(axis=0) >= diag):
        warnings.warn("travel matrix is not diagonally dominant; the two-term "
                      "transmission approximation may be poor", stacklevel=2)
    return f


def build_transmission_matrix(beta: float, travel, populations,
                              allow_outside: bool = False) -> np.ndarray:
    """Region-to-region transmission rates from travel fractions.

    ``B[n, k]`` is the rate at which infectious people of region ``k`` infect
    susceptibles of region ``n``. Only mixing in the home regions of the two
    groups is kept: ``B[n, n] = beta f_nn^2`` and
    ``B[n, k] = beta (f_nk f_kk + f_kn f_nn) P_k / P_n`` for ``k != n``.
    """
    pops = np.asarray(populations, dtype=float)
    f = validate_travel(travel, len(pops), allow_outside=allow_outside)
    if beta < 0:
        raise ConfigError("beta must be >= 0")
    diag = np.diag(f)
    mixing = f * diag[None, :] + f.T * diag[:, None]
    out = beta * mixing * (pops[None, :] / pops[:, None])
    np.fill_diagonal(out, beta * diag ** 2)
    return out


def calibrate(R0: float, infectious_days: float, ifr: float,
              latent_days: float) -> Calibration:
    """Rates from reproduction number, infectious period, fatality ratio and
    latent period."""
    if R0 <= 0 or infectious_days <= 0 or latent_days <= 0:
        raise ConfigError("R0, infectious_days and latent_days must be positive")
    if not 0 <= ifr <= 1:
        raise ConfigError("ifr must lie in [0, 1]")
    return Calibration(beta=R0 / infectious_days, lam=1.0 / infectious_days,
                       kappa=ifr / infectious_days, gamma=1.0 / latent_days)


def infection_flux(x, ell, params: ModelParams) -> np.ndarray:
    """New exposures per day in each region, shape ``(..., N)``."""
    s, _, i = split_state(x, params.n_regions)
    factor = 1.0 - params.epi.theta * np.asarray(ell, dtype=float)
    pressure = (i * factor) @ params.epi.beta_matrix.T
    return s * factor * pressure


def drift(t, x, ell, params: ModelParams) -> np.ndarray:
    """Deterministic part ``b(t, x, ell)`` of the state dynamics."""
    del t  # autonomous; kept for signature symmetry with the driver
    x = np.asarray(x, dtype=float)
    s, e, i = split_state(x, params.n_regions)
    ep = params.epi
    flux = infection_flux(x, ell, params)
    return np.concatenate(np.broadcast_arrays(-flux - ep.v * s,
                                              flux - ep.gamma * e,
                                              ep.gamma * e - ep.lam * i), axis=-1)


def diffusion_apply(x, dW, params: ModelParams) -> np.ndarray:
    """``Sigma(x) @ dW`` for the multiplicative S->E and E->I noise."""
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    n = params.n_regions
    if dW.shape[-1] != 2 * n:
        raise ConfigError(f"increment has length {dW.shape[-1]}, expected {2 * n}")
    s, e, _ = split_state(x, n)
    ds = params.epi.sigma_s * s * dW[..., :n]
    de = params.epi.sigma_e * e * dW[..., n:]
    return np.concatenate([-ds, ds - de, de], axis=-1)


def diffusion_matrix(x, params: ModelParams) -> np.ndarray:
    """Dense ``Sigma(x)`` of shape ``(..., 3N, 2N)``; mostly for tests."""
    x = np.asarray(x, dtype=float)
    n = params.n_regions
    s, e, _ = split_state(x, n)
    out = np.zeros(x.shape[:-1] + (3 * n, 2 * n))
    idx = np.arange(n)
    out[..., idx, idx] = -params.epi.sigma_s * s
    out[..., idx + n, idx] = params.epi.sigma_s * s
    out[..., idx + n, idx + n] = -params.epi.sigma_e * e
    out[..., idx + 2 * n, idx + n] = params.epi.sigma_e * e
    return out


def infection_cost_rate(n: int, x, params: ModelParams) -> np.ndarray:
    """Undiscounted death and hospital cost per day of region ``n``."""
    _, _, i = split_state(x, params.n_regions)
    cp = params.cost
    pop = params.regions.populations[n]
    return pop * cp.a * (params.epi.kappa * cp.chi + cp.p * cp.c) * i[..., n]


def running_cost(n: int, t, x, ell_n, params: ModelParams, h_n=0.0) -> np.ndarray:
    """Discounted cost per day ``f^n`` of region ``n``."""
    s, e, i = split_state(x, params.n_regions)
    cp = params.cost
    pop = params.regions.populations[n]
    disc = np.exp(-cp.r * np.asarray(t, dtype=float))
    wage = pop * (s[..., n] + e[..., n] + i[..., n]) * np.asarray(ell_n) * cp.w
    return disc * (wage + infection_cost_rate(n, x, params)) \
        + disc * cp.eta * np.asarray(h_n) ** 2


def recovered_series(states, n_regions: int) -> np.ndarray:
    """Removed fractions ``R = 1 - s - e - i`` for every region."""
    s, e, i = split_state(states, n_regions)
    return 1.0 - s - e - i


def check_state(x, n_regions: int, tol: float = STATE_TOLERANCE) -> list[str]:
    """List problems with a state vector instead of clamping it."""
    s, e, i = split_state(np.asarray(x, dtype=float), n_regions)
    issues = []
    for name, block in (("s", s), ("e", e), ("i", i)):
        bad = np.argwhere((block < -tol) | (block > 1 + tol) | ~np.isfinite(block))
        issues += [f"{name}[{tuple(ix)}]={block[tuple(ix)]:.3g} outside [0,1]"
                   for ix in bad[:10]]
    total = s + e + i
    bad = np.argwhere(total > 1 + tol)
    issues += [f"s+e+i at {tuple(ix)} = {total[tuple(ix)]:.8g} > 1" for ix in bad[:10]]
    return issues


def uniform_travel(n_regions: int, stay: float) -> np.ndarray:
    """Travel matrix with ``stay`` on the diagonal and the rest split evenly."""
    if n_regions == 1:
        return np.ones((1, 1))
    f = np.full((n_regions, n_regions), (1 - stay) / (n_regions - 1))
    np.fill_diagonal(f, stay)
    return f


def make_params(populations: Sequence[float], beta_matrix, *, gamma: float,
                lam: float, kappa: float, theta: float, sigma_s, sigma_e,
                w: float, chi: float, p: float, c: float, a: float,
                r: float = 0.0, eta: float = 0.0, horizon: float = 180.0,
                v: float = 0.0, names: Sequence[str] | None = None,
                beta: float | None = None, travel=None) -> ModelParams:
    """Convenience constructor for tests and scripts."""
    pops = np.asarray(populations, dtype=float)
    names = tuple(names) if names is not None else tuple(
        f"region{k + 1}" for k in range(len(pops)))
    return ModelParams(
        regions=RegionSet(names, pops),
        epi=EpiParams(beta_matrix=np.asarray(beta_matrix, dtype=float),
                      gamma=gamma, lam=lam, kappa=kappa, theta=theta,
                      sigma_s=sigma_s, sigma_e=sigma_e, v=v, beta=beta),
        cost=CostParams(w=w, chi=chi, p=p, c=c, a=a, r=r, eta=eta, horizon=horizon),
        travel=None if travel is None else np.asarray(travel, dtype=float),
    )
