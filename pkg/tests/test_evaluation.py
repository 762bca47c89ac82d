import io

import numpy as np
import pytest

from seirgame import evaluation as ev
from seirgame.sde_sim import TimeGrid, constant_policy, simulate

from conftest import state


@pytest.fixture
def quiet(demo):
    """Demo scenario without noise."""
    return demo.params.with_epi(sigma_s=np.zeros(3), sigma_e=np.zeros(3))


def test_disease_free_world_costs_nothing_without_lockdown(quiet):
    x0 = state([0.9, 0.8, 1.0], [0, 0, 0], [0, 0, 0])
    rep = ev.estimate_cost(constant_policy(np.zeros(3)), quiet, x0, TimeGrid(180, 40), 8, 0)
    assert np.all(rep.mean == 0) and np.all(rep.stderr == 0) and rep.failed == 0


def test_single_region_two_step_quadrature(one_region):
    p = one_region
    x0 = state(0.9, 0.05, 0.05)
    grid = TimeGrid(p.horizon, 2)
    ell = 0.3
    rep = ev.estimate_cost(constant_policy([ell]), p, x0, grid, 2, 0)
    # hand arithmetic: left-endpoint rule over the Euler states
    dt = grid.dt
    rate = p.cost.a * (p.epi.kappa * p.cost.chi + p.cost.p * p.cost.c)
    pop = p.regions.populations[0]
    total, x = 0.0, x0.copy()
    for _ in range(2):
        s, e, i = x
        total += pop * ((s + e + i) * ell * p.cost.w + rate * i) * dt
        flux = 0.5 * s * (1 - 0.8 * ell) * i * (1 - 0.8 * ell)
        x = np.array([s - flux * dt, e + (flux - 0.2 * e) * dt, i + (0.2 * e - 0.1 * i) * dt])
    assert rep.mean[0] == pytest.approx(total, rel=1e-12)


def test_stderr_shrinks_like_root_batch(demo):
    pol = constant_policy(np.full(3, 0.4))
    grid = TimeGrid(180, 40)
    small = ev.estimate_cost(pol, demo.params, demo.x0, grid, 500, 1)
    large = ev.estimate_cost(pol, demo.params, demo.x0, grid, 2000, 2)
    assert np.all(np.abs(small.stderr / large.stderr - 2.0) < 0.35)


def test_cost_is_monotone_in_attention(demo):
    pol = constant_policy(np.full(3, 0.5))
    grid = TimeGrid(180, 40)
    costs = [ev.estimate_cost(pol, demo.params.with_cost(a=a), demo.x0, grid, 64, 3).mean
             for a in (1.0, 10.0, 100.0)]
    assert np.all(np.diff(np.array(costs), axis=0) > 0)


def test_probe_against_itself_is_exactly_zero(demo):
    pol = constant_policy([0.2, 0.5, 0.9])
    res = ev.exploitability_probe(pol, 1, demo.params, demo.x0, TimeGrid(180, 40), 32, 0,
                                  alternatives={"self": pol})
    assert res.reductions["self"] == 0.0 and res.stderrs["self"] == 0.0 and res.passed


def test_probe_full_lockdown_in_disease_free_world(quiet):
    x0 = state([0.9, 0.8, 0.95], [0, 0, 0], [0, 0, 0])
    grid = TimeGrid(180, 40)
    res = ev.exploitability_probe(constant_policy(np.ones(3)), 2, quiet, x0, grid, 16, 0)
    expected = quiet.regions.populations[2] * quiet.cost.w * 180 * 0.95
    assert res.reductions["const=0"] == pytest.approx(expected, rel=1e-12)
    assert res.worst == "const=0" and not res.passed
    assert res.reductions["learned"] == 0.0


def test_noise_free_bands_collapse(quiet, demo):
    paths = simulate(quiet, constant_policy(np.full(3, 0.3)), demo.x0, TimeGrid(180, 40), 16, 0)
    summ = ev.summarize(paths)
    for var in ev.VARIABLES:
        for q in summ.quantiles[var].values():
            assert np.allclose(q, summ.mean[var], rtol=0, atol=1e-14)


def test_bands_are_nested(demo):
    paths = simulate(demo.params, constant_policy(np.full(3, 0.3)), demo.x0,
                     TimeGrid(180, 40), 200, 0)
    q = ev.summarize(paths).quantiles["I"]
    assert np.all(q[0.025] <= q[0.25]) and np.all(q[0.25] <= q[0.75]) \
        and np.all(q[0.75] <= q[0.975])


def test_classification_examples(demo, quiet):
    grid = TimeGrid(180, 40)
    wild = simulate(demo.params, constant_policy(np.zeros(3)), demo.x0, grid, 64, 0)
    assert ev.classify(wild).label == "out_of_control"
    clean = simulate(quiet, constant_policy(np.zeros(3)), state([1, 1, 1], [0] * 3, [0] * 3),
                     grid, 4, 0)
    lab = ev.classify(clean)
    assert lab.controlled and np.allclose(lab.terminal_s, 1.0)
    # threshold semantics: terminal S of the uncontrolled run is a fixed fraction
    frac = (ev.classify(wild).terminal_s / ev.classify(wild).initial_s).min()
    assert ev.classify(wild, threshold=frac * 0.99).controlled
    assert not ev.classify(wild, threshold=frac * 1.01).controlled


def test_time_average_policy(demo):
    paths = simulate(demo.params, constant_policy([0.1, 0.2, 0.3]), demo.x0,
                     TimeGrid(180, 40), 4, 0)
    assert np.allclose(ev.time_average_policy(paths), [0.1, 0.2, 0.3])


def test_out_of_range_paths_are_reported_not_clamped(demo):
    paths = simulate(demo.params, constant_policy(np.ones(3)), demo.x0, TimeGrid(180, 40), 64, 0)
    rep = ev.cost_report(paths)
    assert rep.out_of_range == int(paths.out_of_range().sum()) > 0
    assert np.nanmin(paths.states) < 0  # the negative values are still there


def test_writers(demo):
    paths = simulate(demo.params, constant_policy(np.full(3, 0.5)), demo.x0,
                     TimeGrid(180, 4), 8, 0)
    names = ["NY", "NJ", "PA"]
    buf = io.StringIO()
    ev.write_cost_report(ev.cost_report(paths), buf, "# h\n")
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# h" and lines[1].startswith("player,mean_cost,stderr,B,seed")
    assert len(lines) == 5
    buf = io.StringIO()
    ev.write_summary(ev.summarize(paths), buf, names)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,region,variable,mean,q0.025,q0.25,q0.75,q0.975"
    assert len(lines) == 1 + 5 * 5 * 3
    buf = io.StringIO()
    ev.write_classification(ev.classify(paths), buf, names)
    assert buf.getvalue().splitlines()[1].startswith("NY,")
    res = ev.exploitability_probe(constant_policy(np.full(3, 0.5)), 0, demo.params, demo.x0,
                                  TimeGrid(180, 4), 8, 0, alternatives={"z": ev.constant(0)})
    buf = io.StringIO()
    ev.write_probe([res], buf)
    assert buf.getvalue().splitlines()[1].startswith("0,z,")
