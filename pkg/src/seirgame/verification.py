"""Self-checks against independent oracles.

Each suite returns a :class:`SuiteResult` listing measured errors next to
their tolerances, so the CLI can print them or dump them as JSON. The suites
recompute everything from scratch and take a seed, so they double as
regression tests.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import dfp_solver as ds
from . import hamiltonian as hm
from . import model_core as mc
from . import neural as nn
from .config import load_scenario
from .rng import generator
from .sde_sim import TimeGrid, constant_policy, simulate

DEMO = "ny-nj-pa-demo"


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass
class SuiteResult:
    name: str
    checks: list[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, tolerance: float, ok: bool | None = None):
        value = float(value)
        passed = (value <= tolerance) if ok is None else bool(ok)
        self.checks.append(Check(name, value, float(tolerance), passed))

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "seconds": self.seconds,
                "checks": [asdict(c) for c in self.checks]}


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


# ---- random instances ----------------------------------------------------

@dataclass
class Instance:
    params: mc.ModelParams
    n: int
    t: float
    x: np.ndarray
    grad: np.ndarray        # full gradient of V in x, shape (3N,)
    others: np.ndarray      # (N,)
    kind: str               # "random", "interior" or "degenerate"


def random_params(rng: np.random.Generator, n_regions: int) -> mc.ModelParams:
    """Order-one parameters so that every branch of the best response occurs."""
    return mc.make_params(
        rng.uniform(0.5, 2.0, n_regions), rng.uniform(0.0, 1.0, (n_regions, n_regions)),
        gamma=rng.uniform(0.1, 1.0), lam=rng.uniform(0.05, 1.0),
        kappa=rng.uniform(0.0, 0.1), theta=rng.uniform(0.5, 1.0),
        sigma_s=rng.uniform(0.1, 1.0, n_regions), sigma_e=rng.uniform(0.1, 1.0, n_regions),
        v=rng.uniform(0.0, 0.1), w=rng.uniform(0.0, 1.0), chi=rng.uniform(0.0, 2.0),
        p=rng.uniform(0.0, 1.0), c=rng.uniform(0.0, 2.0), a=rng.uniform(0.0, 2.0),
        r=rng.uniform(0.0, 0.05), horizon=1.0)


def _simplex_state(rng, n_regions):
    pts = rng.dirichlet(np.ones(4), n_regions)   # s, e, i, r per region
    return np.concatenate([pts[:, 0], pts[:, 1], pts[:, 2]])


def random_instance(rng: np.random.Generator, kind: str = "random",
                    n_regions: int | None = None) -> Instance:
    """One Hamiltonian-minimization problem.

    ``interior`` instances are tuned (through the wage ``w``) so that the
    unconstrained minimizer lies inside (0, 1); ``degenerate`` ones have a
    vanishing or negative curvature coefficient.
    """
    nreg = n_regions or int(rng.integers(1, 4))
    params = random_params(rng, nreg)
    n = int(rng.integers(nreg))
    x = _simplex_state(rng, nreg)
    grad = rng.normal(0.0, 3.0, 3 * nreg)
    others = rng.uniform(0.0, 1.0, nreg)
    t = float(rng.uniform(0.0, 1.0))
    if kind == "degenerate":
        choice = rng.integers(3)
        if choice == 0:
            x[2 * nreg + n] = 0.0                      # i_n = 0
        elif choice == 1:
            grad[nreg + n] = grad[n]                   # dV/de_n == dV/ds_n
        else:
            grad[nreg + n] = grad[n] - abs(grad[nreg + n]) - 0.1   # negative curvature
    elif kind == "interior":
        grad[nreg + n] = grad[n] + abs(grad[nreg + n]) + 0.5
        z = hm.sigma_transpose_grad(x, grad, params)
        quad = hm._quadratic(n, t, x, z, others, params)
        target = rng.uniform(0.05, 0.95)
        rest = float(quad.q1) - _wage(n, t, x, params)      # q1 without the wage term
        wage_needed = -2.0 * float(quad.q2) * target - rest
        mass = np.exp(-params.cost.r * t) * params.regions.populations[n] \
            * (x[n] + x[nreg + n] + x[2 * nreg + n])
        w = wage_needed / mass
        if w >= 0:
            params = params.with_cost(w=w)
        else:
            kind = "random"
    return Instance(params, n, t, x, grad, others, kind)


def _wage(n, t, x, params) -> float:
    nreg = params.n_regions
    return float(np.exp(-params.cost.r * t) * params.regions.populations[n]
                 * (x[n] + x[nreg + n] + x[2 * nreg + n]) * params.cost.w)


# ---- suites --------------------------------------------------------------

def independent_beta(beta, travel, pops):
    """Transmission matrix by explicit loops, kept separate from the library."""
    n = len(pops)
    out = [[0.0] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            if a == b:
                out[a][b] = beta * travel[a][a] * travel[a][a]
            else:
                out[a][b] = beta * (travel[a][b] * travel[b][b]
                                    + travel[b][a] * travel[a][a]) * pops[b] / pops[a]
    return np.array(out)


def suite_beta_matrix(seed: int = 0) -> SuiteResult:
    """Transmission matrix against loop arithmetic (demo inputs and random ones)."""
    res = SuiteResult("beta_matrix")
    pops = [19.54e6, 8.91e6, 12.81e6]
    travel = [[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]]
    beta = 2.2 / 13
    got = mc.build_transmission_matrix(beta, np.array(travel), np.array(pops))
    res.add("three-region demo matrix", _rel(got, independent_beta(beta, travel, pops)), 1e-12)
    rng = generator(seed, ("verify", "beta"))
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 6))
        tr = rng.dirichlet(np.ones(n) * 2, n) if n > 1 else np.ones((1, 1))
        pp = rng.uniform(1e5, 1e7, n)
        b = rng.uniform(0.05, 0.5)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)   # dominance is not needed here
            got = mc.build_transmission_matrix(b, tr, pp)
        worst = max(worst, _rel(got, independent_beta(b, tr.tolist(), pp.tolist())))
    res.add("50 random matrices", worst, 1e-12)
    return res


def suite_calibration(seed: int = 0) -> SuiteResult:
    """Rates derived from R0, infectious period, IFR and latent period."""
    res = SuiteResult("calibration")
    cal = mc.calibrate(2.2, 13.0, 0.0065, 5.0)
    for name, want in (("gamma", 0.2), ("lam", 1 / 13), ("kappa", 0.0005),
                       ("beta", 2.2 / 13)):
        res.add(name, abs(getattr(cal, name) - want) / want, 1e-15)
    return res


def suite_conservation(seed: int = 0, paths: int = 10_000) -> SuiteResult:
    """S + E + I + R stays at its initial total along simulated paths."""
    res = SuiteResult("conservation")
    sc = load_scenario(DEMO)
    grid = TimeGrid(sc.params.horizon, 40)
    for label, level in (("no lockdown", 0.0), ("half lockdown", 0.5)):
        pb = simulate(sc.params, constant_policy(np.full(3, level)), sc.x0, grid, paths,
                      seed, ("verify", "conservation", label))
        comps = pb.compartments()
        total = comps["S"] + comps["E"] + comps["I"] + comps["R"]
        res.add(f"{label}: max |S+E+I+R-1|", np.max(np.abs(total - 1.0)), 1e-10)
    return res


def suite_best_response(seed: int = 0, instances: int = 1000,
                        eps_A: float = hm.EPS_A) -> SuiteResult:
    """Closed form against a brute-force grid search (regular cases) or the
    endpoint comparison (degenerate cases)."""
    res = SuiteResult("best_response")
    rng = generator(seed, ("verify", "best-response"))
    kinds = ("random", "interior", "degenerate")
    worst_regular, mismatched, counts = 0.0, 0, dict.fromkeys(("regular", "degenerate", "interior"), 0)
    for k in range(instances):
        inst = random_instance(rng, kinds[k % 3])
        p, n = inst.params, inst.n
        ell = float(hm.best_response(n, inst.t, inst.x,
                                     hm.GradientView.from_gradient(inst.x, inst.grad, p),
                                     inst.others, p, eps_A))
        z = hm.sigma_transpose_grad(inst.x, inst.grad, p)
        A = float(hm._quadratic(n, inst.t, inst.x, z, inst.others, p).A)
        if 2.0 * p.epi.theta * A > eps_A:
            counts["regular"] += 1
            counts["interior"] += int(0.0 < ell < 1.0)
            oracle = hm.grid_argmin_oracle(n, inst.t, inst.x, inst.grad, inst.others, p)
            worst_regular = max(worst_regular, abs(ell - oracle))
        else:
            counts["degenerate"] += 1
            vals = []
            for end in (0.0, 1.0):
                ell_all = inst.others.copy()
                ell_all[n] = end
                vals.append(float(hm.hamiltonian_value(n, inst.t, inst.x, ell_all,
                                                       inst.grad, p)))
            expect = 1.0 if vals[1] < vals[0] else 0.0
            mismatched += int(ell != expect)
    res.add(f"regular cases ({counts['regular']}, {counts['interior']} interior): "
            "max |closed form - grid argmin|", worst_regular, 1e-4)
    res.add(f"degenerate cases ({counts['degenerate']}): endpoint mismatches",
            mismatched, 0)
    return res


def suite_splitting_identity(seed: int = 0, instances: int = 500,
                             mu: Callable = hm.reduced_drift) -> SuiteResult:
    """``min_ell H = mu . grad V + g`` on random instances.

    ``mu`` is injectable so that a tampered drift can be shown to fail.
    """
    res = SuiteResult("splitting_identity")
    rng = generator(seed, ("verify", "splitting"))
    worst, worst_min = 0.0, 0.0
    for k in range(instances):
        inst = random_instance(rng, ("random", "interior", "degenerate")[k % 3])
        p, n = inst.params, inst.n
        z = hm.sigma_transpose_grad(inst.x, inst.grad, p)
        ell = float(hm.best_response(n, inst.t, inst.x, z, inst.others, p))
        ell_all = inst.others.copy()
        ell_all[n] = ell
        h_star = float(hm.hamiltonian_value(n, inst.t, inst.x, ell_all, inst.grad, p))
        split = float(np.dot(mu(n, inst.t, inst.x, inst.others, p), inst.grad)
                      + hm.bsde_driver(n, inst.t, inst.x, z, inst.others, p))
        scale = max(abs(h_star), abs(split), 1e-12)
        worst = max(worst, abs(h_star - split) / scale)
        # the closed-form minimum is no worse than a fine grid search
        if k % 5 == 0:
            brute = hm.min_hamiltonian(n, inst.t, inst.x, inst.grad, inst.others, p,
                                       resolution=1e-4)
            worst_min = max(worst_min, (h_star - brute) / scale)
    res.add("max relative |min H - (mu.grad V + g)|", worst, 1e-8)
    res.add("closed-form minimum above grid minimum (relative)", max(worst_min, 0.0), 1e-8)
    return res


def _fd_gradient(f, theta, idx, h):
    out = np.empty(len(idx))
    for j, i in enumerate(idx):
        e = np.zeros_like(theta)
        e[i] = h
        out[j] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


def suite_gradients(seed: int = 0, nets: int = 24, h: float = 1e-6) -> SuiteResult:
    """Input and parameter gradients against central differences.

    The parameter check uses a loss that depends on ``Sigma^T grad_x NN`` the
    same way the training loss does, so it covers the second-order path.
    """
    res = SuiteResult("gradients")
    rng = generator(seed, ("verify", "gradients"))
    worst_in, worst_par = 0.0, 0.0
    for k in range(nets):
        nreg = int(rng.integers(1, 4))
        params = random_params(rng, nreg)
        width = int(rng.integers(3, 9))
        depth = int(rng.integers(1, 4))
        head = ("identity", "logistic")[k % 2]
        net = nn.init_mlp([1 + 3 * nreg] + [width] * depth + [1], head, rng)
        batch = 6
        t = rng.uniform(0.0, 1.0, batch)
        x = np.stack([_simplex_state(rng, nreg) for _ in range(batch)])
        # input gradient
        u = nn.input_gradient(net, t, x)
        fd = np.empty_like(u)
        for j in range(x.shape[1]):
            e = np.zeros_like(x)
            e[:, j] = h
            fd[:, j] = (nn.forward(net, t, x + e) - nn.forward(net, t, x - e)) / (2 * h)
        worst_in = max(worst_in, np.linalg.norm(u - fd) / max(np.linalg.norm(fd), 1e-12))
        # parameter gradient of a loss with first- and second-order terms
        cy = rng.normal(size=batch)
        cz = rng.normal(size=(batch, 2 * nreg))

        def evaluator(outputs):
            y, g = outputs["net"]
            z = hm.sigma_transpose_grad(x, g, params)
            loss = float(np.sum(cy * y ** 2) + np.sum(cz * z) + 0.5 * np.sum(z ** 2))
            z_bar = cz + z
            return loss, {"net": (2 * cy * y, hm.sigma_apply_adjoint(x, z_bar, params))}

        def loss_of(flat):
            p = net.with_flat(flat)
            return evaluator({"net": (nn.forward(p, t, x), nn.input_gradient(p, t, x))})[0]

        _, grads = nn.loss_and_param_gradients({"net": (net, t, x, True)}, evaluator)
        flat = net.flat()
        idx = rng.choice(len(flat), min(40, len(flat)), replace=False)
        fdp = _fd_gradient(loss_of, flat, idx, h)
        an = grads["net"].flat()[idx]
        worst_par = max(worst_par, np.linalg.norm(an - fdp) / max(np.linalg.norm(fdp), 1e-12))
    res.add(f"input gradients over {nets} nets (relative)", worst_in, 1e-4)
    res.add(f"parameter gradients over {nets} nets (relative)", worst_par, 1e-4)
    return res


def suite_degenerate_solver(seed: int = 0, sgd_steps: int = 300) -> SuiteResult:
    """With every cost weight at zero the value function is identically zero."""
    res = SuiteResult("degenerate_solver")
    sc = load_scenario(DEMO)
    params = ds.zero_cost(sc.params)
    cfg = ds.SolverConfig(stages=1, sgd_steps=sgd_steps, batch=64, seed=seed, eps_conv=0.0)
    out = ds.run(cfg, params, sc.x0)
    losses = [row["validation_loss"] for row in out.diagnostics]
    res.add("max validation loss after one stage", max(losses), 1e-6)
    psi = max(abs(float(ds.value_at(out.state, n, 0.0, sc.x0)[0]))
              for n in range(params.n_regions))
    res.add("max |V(0, x0)|", psi, 1e-3)
    return res


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "beta_matrix": suite_beta_matrix,
    "calibration": suite_calibration,
    "conservation": suite_conservation,
    "best_response": suite_best_response,
    "splitting_identity": suite_splitting_identity,
    "gradients": suite_gradients,
    "degenerate_solver": suite_degenerate_solver,
}


def run_suite(name: str, seed: int = 0) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    started = time.perf_counter()
    res = SUITES[name](seed=seed)
    res.seconds = time.perf_counter() - started
    return res
