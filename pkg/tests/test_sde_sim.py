import io

import numpy as np
import pytest

from seirgame import model_core as mc
from seirgame.sde_sim import (PathBatch, TimeGrid, constant_policy, export_csv,
                              simulate, simulate_reduced)

from conftest import state


def test_time_grid():
    g = TimeGrid(180, 40)
    assert g.dt == 4.5 and g.times[-1] == 180 and len(g.times) == 41
    with pytest.raises(ValueError):
        TimeGrid(10, 0)


def test_deterministic_path_matches_hand_euler(one_region):
    x0 = state(0.9, 0.05, 0.05)
    grid = TimeGrid(10, 2)
    pb = simulate(one_region, constant_policy([0.5]), x0, grid, 2, seed=0)
    x = x0.copy()
    for _ in range(2):
        x = x + mc.drift(0, x, [0.5], one_region) * 5.0
    assert np.allclose(pb.states[0, -1], x, rtol=1e-14)
    assert np.array_equal(pb.states[0], pb.states[1])


def test_costs_left_endpoint(one_region):
    x0 = state(0.9, 0.05, 0.05)
    grid = TimeGrid(10, 2)
    pb = simulate(one_region, constant_policy([0.5]), x0, grid, 2, seed=0)
    want = sum(mc.running_cost(0, t, pb.states[0, k], 0.5, one_region) * 5.0
               for k, t in enumerate(grid.times[:-1]))
    assert pb.total_cost[0, 0] == pytest.approx(want, rel=1e-14)
    assert np.all(pb.costs[:, -1] == 0)


def test_conservation_with_noise(demo):
    grid = TimeGrid(180, 40)
    pb = simulate(demo.params, constant_policy([0.2, 0.0, 0.7]), demo.x0, grid, 500, seed=1)
    c = pb.compartments()
    assert np.max(np.abs(c["S"] + c["E"] + c["I"] + c["R"] - 1)) <= 1e-10


def test_removed_non_decreasing_without_vaccination(demo):
    pb = simulate(demo.params, constant_policy([0, 0, 0]), demo.x0, TimeGrid(180, 40), 64, 2)
    assert np.all(np.diff(pb.removed, axis=1) >= 0)


def test_common_random_numbers(demo):
    grid = TimeGrid(180, 40)
    a = simulate(demo.params, constant_policy([0, 0, 0]), demo.x0, grid, 16, 9, ("s",))
    b = simulate(demo.params, constant_policy([1, 1, 1]), demo.x0, grid, 16, 9, ("s",))
    assert np.array_equal(a.increments, b.increments)


def test_reduced_dynamics_ignore_own_lockdown(demo):
    grid = TimeGrid(180, 40)
    lo = simulate_reduced(1, demo.params, constant_policy([0.3, 0.0, 0.6]), grid, 4, 5, demo.x0)
    hi = simulate_reduced(1, demo.params, constant_policy([0.3, 1.0, 0.6]), grid, 4, 5, demo.x0)
    assert np.array_equal(lo.states, hi.states)
    assert np.all(lo.policies[..., 1] == 0)


def test_blow_up_is_flagged_not_clamped(demo):
    grid = TimeGrid(180, 10)       # far too coarse for this rate: Euler overflows
    wild = demo.params.with_epi(beta_matrix=demo.params.epi.beta_matrix * 1e3,
                                sigma_s=[1.0, 0.0, 0.0])
    with np.errstate(over="ignore", invalid="ignore"):
        pb = simulate(wild, constant_policy([0, 0, 0]), demo.x0, grid, 64, 0)
    assert pb.failed.any()
    assert np.all(np.isnan(pb.states[pb.failed, -1]))
    assert len(pb.report) == int(pb.failed.sum())


def test_csv_export_shape(demo):
    pb = simulate(demo.params, constant_policy([0, 0, 0]), demo.x0, TimeGrid(180, 40), 3, 0)
    buf = io.StringIO()
    export_csv(pb, buf, header="# test\n")
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# test"
    assert lines[1] == "path_id,t,region,S,E,I,R,ell,stepwise_cost"
    assert len(lines) == 2 + 3 * 41 * 3


def test_cache_round_trip(tmp_path, demo):
    pb = simulate(demo.params, constant_policy([0.5] * 3), demo.x0, TimeGrid(180, 8), 4, 3)
    pb.save(tmp_path / "paths.npz")
    back = PathBatch.load(tmp_path / "paths.npz")
    assert np.array_equal(back.states, pb.states)
    assert back.stream == pb.stream and back.grid == pb.grid
