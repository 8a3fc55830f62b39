import numpy as np
import pytest

from timehut.hpo import PARAM_ORDER, SearchSpace, search, write_trial_log


def quadratic_objective(params):
    return -((params["ma"] - 0.5) ** 2)


def test_random_search_converges_on_known_optimum():
    result = search(SearchSpace(), quadratic_objective, budget=200, strategy="random", seed=0)
    assert 0.45 <= result.best_params["ma"] <= 0.55


def test_mcmc_converges_on_known_optimum():
    result = search(SearchSpace(), quadratic_objective, budget=200, strategy="mcmc", seed=1)
    assert 0.45 <= result.best_params["ma"] <= 0.55


def test_budget_one_returns_single_point():
    result = search(SearchSpace(), quadratic_objective, budget=1, seed=3)
    assert len(result.trials) == 1
    assert result.best_params == result.trials[0].params


def test_all_failures_raise():
    def broken(params):
        raise RuntimeError("boom")

    with pytest.raises(RuntimeError, match="no successful trial"):
        search(SearchSpace(), broken, budget=5, seed=0)


def test_failures_are_recorded_and_skipped():
    calls = {"n": 0}

    def flaky(params):
        calls["n"] += 1
        if calls["n"] % 2 == 0:
            raise ValueError("bad point")
        return params["ci"]

    result = search(SearchSpace(), flaky, budget=10, seed=0)
    statuses = [t.status for t in result.trials]
    assert statuses.count("failed") == 5
    assert np.isfinite(result.best_score)


def test_all_samples_within_bounds():
    space = SearchSpace()
    seen = []

    def record(params):
        seen.append(dict(params))
        return 0.0

    search(space, record, budget=50, strategy="mcmc", seed=5)
    for params in seen:
        assert space.contains(params)
        assert params["tau_min"] < params["tau_max"]
        assert params["period"] == int(params["period"])


def test_reproducible_given_seed():
    r1 = search(SearchSpace(), quadratic_objective, budget=30, strategy="mcmc", seed=9)
    r2 = search(SearchSpace(), quadratic_objective, budget=30, strategy="mcmc", seed=9)
    assert [t.params for t in r1.trials] == [t.params for t in r2.trials]
    assert r1.best_params == r2.best_params


def test_random_parallel_matches_serial():
    serial = search(SearchSpace(), quadratic_objective, budget=24, seed=4, workers=1)
    parallel = search(SearchSpace(), quadratic_objective, budget=24, seed=4, workers=4)
    assert [t.params for t in serial.trials] == [t.params for t in parallel.trials]
    assert serial.best_params == parallel.best_params


def test_best_equals_max_over_log():
    result = search(SearchSpace(), quadratic_objective, budget=40, seed=6)
    scores = [t.score for t in result.trials if t.status == "ok"]
    assert result.best_score == max(scores)


def test_trial_log_csv(tmp_path):
    result = search(SearchSpace(), quadratic_objective, budget=5, seed=7)
    path = tmp_path / "trials.csv"
    write_trial_log(result.trials, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "trial,ci,ct,ma,tau_min,tau_max,period,score,status,seconds"
    assert len(lines) == 6


def test_invalid_arguments():
    with pytest.raises(ValueError):
        search(SearchSpace(), quadratic_objective, budget=0)
    with pytest.raises(ValueError):
        search(SearchSpace(), quadratic_objective, budget=3, strategy="anneal")


def test_param_order_is_stable():
    assert PARAM_ORDER == ("ci", "ct", "ma", "tau_min", "tau_max", "period")
