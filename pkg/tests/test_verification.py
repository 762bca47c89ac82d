import numpy as np
import pytest

from seirgame import hamiltonian as hm
from seirgame import verification as vf
from seirgame.rng import generator


def test_suite_result_bookkeeping():
    res = vf.SuiteResult("demo")
    res.add("small", 1e-9, 1e-8)
    assert res.passed
    res.add("large", 1.0, 1e-8)
    doc = res.to_dict()
    assert not doc["passed"] and [c["passed"] for c in doc["checks"]] == [True, False]


def test_independent_beta_matches_closed_form_two_regions():
    # two regions, f = [[0.8, 0.2], [0.3, 0.7]], populations 2 and 1
    f = [[0.8, 0.2], [0.3, 0.7]]
    got = vf.independent_beta(0.5, f, [2.0, 1.0])
    want = [[0.5 * 0.64, 0.5 * (0.2 * 0.7 + 0.3 * 0.8) * 1.0 / 2.0],
            [0.5 * (0.3 * 0.8 + 0.2 * 0.7) * 2.0, 0.5 * 0.49]]
    assert np.allclose(got, want, rtol=1e-15)


@pytest.mark.parametrize("kind", ["random", "interior", "degenerate"])
def test_random_instances_are_valid(kind):
    rng = generator(0, ("test", kind))
    for _ in range(30):
        inst = vf.random_instance(rng, kind)
        nreg = inst.params.n_regions
        x = inst.x.reshape(3, nreg)
        assert np.all(x >= 0) and np.all(x.sum(axis=0) <= 1 + 1e-12)
        assert 0 <= inst.n < nreg


def test_interior_instances_have_interior_minimizers():
    rng = generator(1, ("test", "interior"))
    hits = 0
    for _ in range(60):
        inst = vf.random_instance(rng, "interior")
        if inst.kind != "interior":
            continue
        z = hm.sigma_transpose_grad(inst.x, inst.grad, inst.params)
        ell = float(hm.best_response(inst.n, inst.t, inst.x, z, inst.others, inst.params))
        assert 0.0 < ell < 1.0
        hits += 1
    assert hits > 20


def test_flipped_drift_breaks_the_splitting_identity():
    def flipped(n, t, x, others, params):
        mu = hm.reduced_drift(n, t, x, others, params).copy()
        nreg = params.n_regions
        mu[:nreg] *= -1.0
        return mu

    assert vf.suite_splitting_identity(instances=30).passed
    assert not vf.suite_splitting_identity(instances=30, mu=flipped).passed


def test_fast_suites_pass():
    for name in ("beta_matrix", "calibration", "splitting_identity", "gradients"):
        res = vf.run_suite(name)
        assert res.passed, res.to_dict()
        assert res.seconds >= 0


def test_unknown_suite():
    with pytest.raises(KeyError):
        vf.run_suite("nope")
