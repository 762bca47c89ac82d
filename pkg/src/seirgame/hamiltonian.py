"""Closed-form analytics of one player's stage problem.

For player ``n`` with the other players' lockdowns frozen, the Hamiltonian
``H = b . grad V + f^n`` is a quadratic in the player's own lockdown ``ell``.
Writing ``z = Sigma(x)^T grad V`` (the BSDE ``Z`` process), the
``ell``-dependent part is

    G(ell) = q2 ell^2 + q1 ell,
    q2 = theta^2 A,
    q1 = W - 2 theta A - theta sum_{j != n} (1 - theta ell_j)(C_j + C'_j),

with ``A = beta_nn i_n z_n / sigma_n``, ``C_j = beta_jn i_n z_j / sigma_j``,
``C'_j = beta_nj i_j z_n / sigma_n`` and ``W`` the discounted wage loss of a
full lockdown. Everything else in ``H`` is collected in the reduced drift
``mu^n`` (``H = mu^n . grad V + G(ell) + infection cost``), so the driver is
``g = min_ell G(ell) + infection cost``.

All functions broadcast over leading batch dimensions of ``x``/``z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model_core as mc

EPS_A = 1e-12


@dataclass(frozen=True)
class GradientView:
    """Value-function gradient information at one or more states.

    ``z`` is always present; ``full`` (the gradient in x) is optional. The
    per-region differences ``d_j = dV/de_j - dV/ds_j`` can be recovered from
    ``z`` wherever ``s_j > 0``.
    """

    z: np.ndarray
    full: np.ndarray | None = None

    @classmethod
    def from_gradient(cls, x, grad, params: mc.ModelParams) -> "GradientView":
        grad = np.asarray(grad, dtype=float)
        return cls(z=sigma_transpose_grad(x, grad, params), full=grad)

    def differences(self, x, params: mc.ModelParams) -> np.ndarray:
        n = params.n_regions
        s = mc.split_state(x, n)[0]
        denom = params.epi.sigma_s * s
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(denom > 0, self.z[..., :n] / denom, np.nan)


def sigma_transpose_grad(x, grad, params: mc.ModelParams) -> np.ndarray:
    """``Sigma(x)^T grad`` without forming the matrix."""
    n = params.n_regions
    s, e, _ = mc.split_state(x, n)
    gs, ge, gi = mc.split_state(grad, n)
    return np.concatenate([params.epi.sigma_s * s * (ge - gs),
                           params.epi.sigma_e * e * (gi - ge)], axis=-1)


def sigma_apply_adjoint(x, z_bar, params: mc.ModelParams) -> np.ndarray:
    """Pull an adjoint on ``z`` back to an adjoint on ``grad`` (``Sigma z_bar``)."""
    return mc.diffusion_apply(x, z_bar, params)


def hamiltonian_value(n: int, t, x, ell_all, grad, params: mc.ModelParams) -> np.ndarray:
    """``b(t, x, ell) . grad + f^n(t, x, ell_n)``."""
    ell_all = np.asarray(ell_all, dtype=float)
    b = mc.drift(t, x, ell_all, params)
    return np.sum(b * np.asarray(grad, dtype=float), axis=-1) \
        + mc.running_cost(n, t, x, ell_all[..., n], params)


def _require_sigma(n: int, params: mc.ModelParams) -> None:
    if params.epi.sigma_s[n] <= 0:
        raise mc.ConfigError(
            f"sigma_s[{n}] must be positive to recover gradient differences from Z")


@dataclass(frozen=True)
class _Quadratic:
    """Coefficients of ``G(ell) = q2 ell^2 + q1 ell`` and their z-derivatives."""

    A: np.ndarray
    q2: np.ndarray
    q1: np.ndarray
    dq2: np.ndarray    # (..., 2N)
    dq1: np.ndarray    # (..., 2N)
    cost: np.ndarray   # discounted infection cost, independent of ell


def _quadratic(n: int, t, x, z, others, params: mc.ModelParams,
               with_derivatives: bool = False) -> _Quadratic:
    _require_sigma(n, params)
    nreg = params.n_regions
    ep, cp = params.epi, params.cost
    theta = ep.theta
    bm = ep.beta_matrix
    s, e, i = mc.split_state(x, nreg)
    z = np.asarray(z, dtype=float)
    zs = z[..., :nreg]
    others = np.asarray(others, dtype=float)
    sig = ep.sigma_s
    disc = np.exp(-cp.r * np.asarray(t, dtype=float))
    pop = params.regions.populations[n]

    wage = disc * pop * (s[..., n] + e[..., n] + i[..., n]) * cp.w
    # z_j / sigma_j, zero where sigma_j == 0 (then z_j == 0 as well)
    safe_sig = np.where(sig > 0, sig, 1.0)
    zr = np.where(sig > 0, zs / safe_sig, 0.0)
    i_n = i[..., n]
    A = bm[n, n] * i_n * zr[..., n]

    mask = np.ones(nreg, dtype=bool)
    mask[n] = False
    keep = (1.0 - theta * others) * mask       # (1 - theta ell_j), 0 at j == n
    C = bm[:, n] * i_n[..., None] * zr          # C_j
    Cp = bm[n, :] * i * zr[..., n:n + 1]        # C'_j
    cross = np.sum(keep * (C + Cp), axis=-1)

    q2 = theta ** 2 * A
    q1 = wage - 2.0 * theta * A - theta * cross
    cost = disc * mc.infection_cost_rate(n, x, params)

    dq2 = dq1 = None
    if with_derivatives:
        shape = z.shape
        dq2 = np.zeros(shape)
        dq1 = np.zeros(shape)
        dA = bm[n, n] * i_n / sig[n]
        dq2[..., n] = theta ** 2 * dA
        # d cross / d z_n via C'_j ; d cross / d z_j via C_j (j != n)
        dcross_dzn = np.sum(keep * bm[n, :] * i, axis=-1) / sig[n]
        dq1[..., n] = -2.0 * theta * dA - theta * dcross_dzn
        dcross_dzj = keep * bm[:, n] * i_n[..., None] / safe_sig * (sig > 0)
        dcross_dzj[..., n] = 0.0
        other_cols = dq1[..., :nreg]
        other_cols += np.where(mask, -theta * dcross_dzj, 0.0)
    return _Quadratic(A, q2, q1, dq2, dq1, cost)


def _minimize(quad: _Quadratic, theta: float, eps_A: float):
    """Minimizer over [0, 1] and a flag marking the interior branch."""
    denom = 2.0 * theta * quad.A
    regular = denom > eps_A
    with np.errstate(divide="ignore", invalid="ignore"):
        crit = np.where(regular, -quad.q1 / np.where(regular, 2.0 * quad.q2, 1.0), 0.0)
    clipped = np.clip(crit, 0.0, 1.0)
    # affine (or concave) in ell: compare the endpoints G(0) = 0 and G(1)
    endpoint = np.where(quad.q2 + quad.q1 < 0.0, 1.0, 0.0)
    ell = np.where(regular, clipped, endpoint)
    interior = regular & (crit > 0.0) & (crit < 1.0)
    return ell, interior


def best_response(n: int, t, x, grad, others, params: mc.ModelParams,
                  eps_A: float = EPS_A) -> np.ndarray:
    """Hamiltonian-minimizing lockdown of player ``n`` in [0, 1].

    ``grad`` is a :class:`GradientView` or a raw ``z = Sigma^T grad V`` array.
    ``others`` has length N; its entry ``n`` is ignored. When the curvature
    ``2 theta A`` is at most ``eps_A`` the Hamiltonian is affine or concave
    in ``ell`` and the cheaper endpoint is returned (0 on ties).
    """
    z = grad.z if isinstance(grad, GradientView) else grad
    quad = _quadratic(n, t, x, z, others, params)
    return _minimize(quad, params.epi.theta, eps_A)[0]


def reduced_drift(n: int, t, x, others, params: mc.ModelParams) -> np.ndarray:
    """Drift ``mu^n`` of player ``n``'s forward process.

    The susceptible row ``j`` keeps its own factor ``(1 - theta ell_j)`` and
    the factors of the infecting regions ``k != n``; every factor carrying
    player ``n``'s lockdown is dropped.
    """
    del t
    nreg = params.n_regions
    ep = params.epi
    s, e, i = mc.split_state(x, nreg)
    factor = 1.0 - ep.theta * np.asarray(others, dtype=float)
    factor = np.array(np.broadcast_to(factor, np.broadcast_shapes(factor.shape, s.shape)))
    factor[..., n] = 1.0
    flux = s * factor * ((i * factor) @ ep.beta_matrix.T)
    return np.concatenate(np.broadcast_arrays(-flux - ep.v * s,
                                              flux - ep.gamma * e,
                                              ep.gamma * e - ep.lam * i), axis=-1)


def bsde_driver(n: int, t, x, z, others, params: mc.ModelParams,
                eps_A: float = EPS_A) -> np.ndarray:
    """Driver ``g^n(t, x, z)`` evaluated at the best response."""
    quad = _quadratic(n, t, x, z, others, params)
    ell, _ = _minimize(quad, params.epi.theta, eps_A)
    return quad.q2 * ell ** 2 + quad.q1 * ell + quad.cost


@dataclass(frozen=True)
class DriverEval:
    g: np.ndarray
    ell: np.ndarray
    dg_dz: np.ndarray
    dell_dz: np.ndarray


def driver_with_sensitivities(n: int, t, x, z, others, params: mc.ModelParams,
                              eps_A: float = EPS_A) -> DriverEval:
    """Driver, best response and their derivatives with respect to ``z``.

    ``dg/dz`` follows from the envelope theorem (``g`` is a minimum over
    ``ell`` of a function smooth in ``z``); ``dell/dz`` is nonzero only on the
    interior branch, where ``ell = -q1 / (2 q2)``.
    """
    quad = _quadratic(n, t, x, z, others, params, with_derivatives=True)
    ell, interior = _minimize(quad, params.epi.theta, eps_A)
    g = quad.q2 * ell ** 2 + quad.q1 * ell + quad.cost
    ell_b = ell[..., None]
    dg = quad.dq2 * ell_b ** 2 + quad.dq1 * ell_b
    safe_q2 = np.where(interior, quad.q2, 1.0)[..., None]
    dell = (-quad.dq1 - 2.0 * ell_b * quad.dq2) / (2.0 * safe_q2)
    dell = np.where(interior[..., None], dell, 0.0)
    return DriverEval(g, ell, dg, dell)


def grid_argmin_oracle(n: int, t, x, grad, others, params: mc.ModelParams,
                       resolution: float = 1e-5, refine: bool = True) -> float:
    """Brute-force minimizer of the Hamiltonian over ``ell`` in [0, 1].

    Scans a uniform grid, then rescans the two neighbouring cells on a grid
    1000 times finer. Ties go to the smallest ``ell``. ``x`` and ``grad`` are
    single points (1-D).
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    others = np.asarray(others, dtype=float)

    def values(ells):
        ell_all = np.broadcast_to(others, (len(ells), len(others))).copy()
        ell_all[:, n] = ells
        return hamiltonian_value(n, t, x[None, :], ell_all, grad[None, :], params)

    m = int(round(1.0 / resolution))
    grid = np.linspace(0.0, 1.0, m + 1)
    best = grid[int(np.argmin(values(grid)))]
    if refine:
        lo, hi = max(0.0, best - resolution), min(1.0, best + resolution)
        fine = np.linspace(lo, hi, 2001)
        vals = values(fine)
        j = int(np.argmin(vals))
        # keep the coarse point on exact ties so tie-breaking stays deterministic
        if vals[j] < values(np.array([best]))[0]:
            best = fine[j]
    return float(best)


def min_hamiltonian(n: int, t, x, grad, others, params: mc.ModelParams,
                    resolution: float = 1e-5) -> float:
    """``min_ell H`` by brute force, for identity checks."""
    ell = grid_argmin_oracle(n, t, x, grad, others, params, resolution)
    ell_all = np.asarray(others, dtype=float).copy()
    ell_all[n] = ell
    endpoints = []
    for end in (0.0, 1.0):
        e_all = ell_all.copy()
        e_all[n] = end
        endpoints.append(hamiltonian_value(n, t, x, e_all, grad, params))
    return float(min(hamiltonian_value(n, t, x, ell_all, grad, params), *endpoints))
