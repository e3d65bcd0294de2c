import itertools
from fractions import Fraction

import numpy as np
import pytest

from countmix import (
    POISSON,
    ComponentParams,
    CovariateMask,
    Dataset,
    GaConfig,
    MixtureModel,
    component_summaries,
    em_fit,
    evolve,
    fitness,
    report_components,
    summary_stats,
    sweep,
)
from countmix import ga as ga_mod
from countmix.errors import DomainError


def _regression_dataset(p=2, important=(0,), n=160, seed=9):
    """Poisson data where only the listed covariate indices enter the mean."""
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p))])
    eta = 1.0
    for j in important:
        eta = eta + 0.8 * X[:, j + 1]
    y = rng.poisson(np.exp(eta))
    names = tuple(f"x{j + 1}" for j in range(p))
    return Dataset(y=y, X=X, names=names)


def _exhaustive_best(d, G, criterion="caic", seed=0, restarts=1):
    cache = {}
    best_key, best_val = None, np.inf
    for bits in itertools.product([False, True], repeat=d.p):
        mask = CovariateMask(np.array(bits, dtype=bool))
        val = fitness(mask, d, G, POISSON, criterion, cache, seed=seed, restarts=restarts)
        if val < best_val:
            best_key, best_val = mask.key, val
    return best_key, best_val, cache


class TestGaConfig:
    def test_defaults_valid(self):
        GaConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"pop_size": 3},
            {"elitism": 30},
            {"crossover_rate": 1.5},
            {"mutation_rate": -0.1},
            {"runs": 0},
            {"criterion": "dic"},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(DomainError):
            GaConfig(**kwargs)


class TestFitness:
    def test_all_ones_matches_full_model_sweep(self):
        d = _regression_dataset(p=2, important=(0, 1), seed=10)
        res = sweep(d, 2, seed=3, restarts=1, family=POISSON)
        g = res.best["caic"]
        cache = {}
        val = fitness(
            CovariateMask.all_ones(d.p), d, g, POISSON, "caic", cache,
            seed=3, restarts=1,
        )
        row = next(r for r in res.rows if r.G == g)
        assert val == row.caic

    def test_cache_hit_returns_identical_value(self, monkeypatch):
        d = _regression_dataset(seed=11)
        cache = {}
        calls = {"n": 0}
        real = ga_mod.em_fit

        def counting(*args, **kwargs):
            calls["n"] += 1
            return real(*args, **kwargs)

        monkeypatch.setattr(ga_mod, "em_fit", counting)
        mask = CovariateMask.from_numbers(d.p, (1,))
        v1 = fitness(mask, d, 1, POISSON, "caic", cache, seed=0, restarts=1)
        v2 = fitness(mask, d, 1, POISSON, "caic", cache, seed=0, restarts=1)
        assert v1 == v2
        assert calls["n"] == 1

    def test_fit_failure_scores_infinity(self, monkeypatch):
        d = _regression_dataset(seed=12)

        def broken(*args, **kwargs):
            raise DomainError("forced for test")

        monkeypatch.setattr(ga_mod, "em_fit", broken)
        val = fitness(
            CovariateMask.all_ones(d.p), d, 1, POISSON, "caic", {}, seed=0
        )
        assert val == np.inf


class TestEvolve:
    def test_exhaustive_optimum_p2(self):
        d = _regression_dataset(p=2, important=(0,), seed=13)
        best_key, _, _ = _exhaustive_best(d, G=1, seed=3)
        cfg = GaConfig(
            pop_size=8, generations=6, runs=20, seed=3, G=1, restarts=1,
            criterion="caic", elitism=2,
        )
        records = evolve(d, cfg, family=POISSON)
        assert len(records) == 1
        assert records[0].mask.key == best_key
        assert records[0].rel_freq == 1

    def test_informative_pair_wins_at_p5(self):
        d = _regression_dataset(p=5, important=(0, 2), n=220, seed=14)
        best_key, _, _ = _exhaustive_best(d, G=1, seed=5)
        cfg = GaConfig(
            pop_size=12, generations=10, runs=50, seed=5, G=1, restarts=1,
            criterion="caic", elitism=2,
        )
        records = evolve(d, cfg, family=POISSON)
        top = records[0]
        assert top.mask.key == best_key
        assert set(top.mask.numbers) >= {1, 3}

    def test_rel_freq_sums_to_one_exactly(self):
        d = _regression_dataset(p=3, important=(1,), seed=15)
        cfg = GaConfig(
            pop_size=6, generations=4, runs=37, seed=7, G=1, restarts=1,
            criterion="caic", elitism=1,
        )
        records = evolve(d, cfg, family=POISSON)
        assert sum((r.rel_freq for r in records), Fraction(0)) == 1

    def test_degenerate_ga_stays_inside_initial_population(self):
        # with mutation and crossover off, no new chromosome can appear,
        # so every evaluated mask comes from some run's Bernoulli(0.5) init
        d = _regression_dataset(p=3, important=(0,), seed=16)
        cfg = GaConfig(
            pop_size=5, generations=3, runs=4, seed=11, G=1, restarts=1,
            criterion="caic", elitism=1, crossover_rate=0.0, mutation_rate=0.0,
        )
        records = evolve(d, cfg, family=POISSON)
        allowed = set()
        for run in range(cfg.runs):
            rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, run)))
            pop = rng.random((cfg.pop_size, d.p)) < 0.5
            allowed.update(row.tobytes() for row in pop)
        assert {r.mask.key for r in records} <= allowed

    def test_deterministic(self):
        d = _regression_dataset(p=3, important=(0,), seed=17)
        cfg = GaConfig(
            pop_size=6, generations=4, runs=8, seed=13, G=1, restarts=1,
            criterion="caic", elitism=1,
        )
        a = evolve(d, cfg, family=POISSON)
        b = evolve(d, cfg, family=POISSON)
        assert [(r.mask.key, r.wins, r.aic) for r in a] == [
            (r.mask.key, r.wins, r.aic) for r in b
        ]

    def test_ga_beats_random_search_on_equal_budget(self):
        d = _regression_dataset(p=8, important=(0, 3), n=200, seed=18)
        cache = {}
        wins = 0
        trials = 20
        for trial in range(trials):
            cfg = GaConfig(
                pop_size=10, generations=5, runs=1, seed=100 + trial, G=1,
                restarts=1, criterion="caic", elitism=2,
            )
            before = len(cache)
            # share one cache across strategies: fitness is pure
            records = ga_mod.evolve(d, cfg, family=POISSON)
            ga_best = fitness(
                records[0].mask, d, 1, POISSON, "caic", cache, seed=100 + trial,
                restarts=1,
            )
            budget = max(len(cache) - before, cfg.pop_size)
            rng = np.random.default_rng(trial)
            rand_best = np.inf
            for _ in range(budget):
                mask = CovariateMask(rng.random(d.p) < 0.5)
                rand_best = min(
                    rand_best,
                    fitness(mask, d, 1, POISSON, "caic", cache,
                            seed=100 + trial, restarts=1),
                )
            if ga_best <= rand_best:
                wins += 1
        assert wins >= 0.8 * trials

    def test_needs_at_least_one_covariate(self, intercept_only):
        d = intercept_only([1, 2, 3, 4, 5, 6])
        with pytest.raises(DomainError):
            evolve(d, GaConfig(runs=1, G=1), family=POISSON)

    def test_per_mask_g_reselection(self):
        # with select_g_per_mask each mask is scored at its own best G,
        # which must match an explicit sweep of that mask
        d = _regression_dataset(p=2, important=(0,), n=140, seed=60)
        mask = CovariateMask.from_numbers(d.p, (1,))
        cache = {}
        val = fitness(
            mask, d, None, POISSON, "caic", cache, seed=2, restarts=1, g_max=2
        )
        from countmix import apply_mask

        res = sweep(apply_mask(d, mask), 2, seed=2, restarts=1, family=POISSON)
        best_row = next(r for r in res.rows if r.G == res.best["caic"])
        assert val == best_row.caic


def _handmade_model_and_data():
    """Two hard components; covariate x2 is constant inside each one."""
    n_half = 12
    rng = np.random.default_rng(19)
    x1 = rng.normal(size=2 * n_half)
    x2 = np.concatenate([np.zeros(n_half), np.ones(n_half)])
    X = np.column_stack([np.ones(2 * n_half), x1, x2])
    y = np.concatenate([rng.poisson(3.0, n_half), rng.poisson(40.0, n_half)])
    d = Dataset(y=y, X=X, names=("x1", "x2"))
    resp = np.zeros((2 * n_half, 2))
    resp[:n_half, 0] = 1.0
    resp[n_half:, 1] = 1.0
    comps = (
        ComponentParams(pi=0.5, beta=np.array([np.log(3.0), 0.0, 0.0])),
        ComponentParams(pi=0.5, beta=np.array([np.log(40.0), 0.0, 0.0])),
    )
    model = MixtureModel(
        family=POISSON,
        components=comps,
        logL=0.0,
        responsibilities=resp,
        converged=True,
        iterations=1,
        loglik_trace=np.array([0.0]),
    )
    return model, d


class TestReportComponents:
    def test_wald_interval_arithmetic(self, poisson_data):
        d = poisson_data(n=150, beta=(1.2, 0.4), seed=20)
        model = em_fit(d, 1, POISSON, seed=0, restarts=1)
        table = report_components(model, d)[0]
        for row in table["rows"]:
            assert row["lo"] == pytest.approx(row["beta"] - 1.96 * row["se"], abs=1e-10)
            assert row["hi"] == pytest.approx(row["beta"] + 1.96 * row["se"], abs=1e-10)

    def test_published_interval_fixture(self):
        # beta=-1.85, se=0.51 must reproduce the reported (-2.85, -0.85)
        # bounds once rounded to two decimals
        lo = -1.85 - 1.96 * 0.51
        hi = -1.85 + 1.96 * 0.51
        assert round(lo, 2) == -2.85
        assert round(hi, 2) == -0.85

    def test_constant_covariate_reported_unavailable(self):
        model, d = _handmade_model_and_data()
        tables = report_components(model, d)
        for table in tables:
            by_name = {row["name"]: row for row in table["rows"]}
            assert by_name["x2"]["beta"] is None
            assert by_name["x2"]["se"] is None
            assert by_name["x1"]["se"] is not None
            assert by_name["intercept"]["se"] is not None

    def test_intercept_listed_last(self, poisson_data):
        d = poisson_data(n=100, seed=21)
        model = em_fit(d, 1, POISSON, seed=0, restarts=1)
        rows = report_components(model, d)[0]["rows"]
        assert rows[-1]["name"] == "intercept"
        assert [r["name"] for r in rows[:-1]] == list(d.names)

    def test_requires_converged_model(self, poisson_data):
        import dataclasses

        d = poisson_data(n=60, seed=22)
        model = em_fit(d, 1, POISSON, seed=0, restarts=1)
        with pytest.raises(DomainError):
            report_components(dataclasses.replace(model, converged=False), d)


class TestComponentSummaries:
    def test_single_component_matches_dataset_stats(self, poisson_data):
        d = poisson_data(n=90, seed=23)
        model = em_fit(d, 1, POISSON, seed=0, restarts=1)
        summ = component_summaries(model, d)
        assert len(summ) == 1
        assert summ[0] == summary_stats(d)

    def test_hard_partition_matches_per_group_stats(self):
        model, d = _handmade_model_and_data()
        summ = component_summaries(model, d)
        lo_y = d.y[:12].astype(float)
        assert summ[0]["y"].mean == pytest.approx(lo_y.mean())
        assert summ[0]["y"].max == lo_y.max()
        assert summ[1]["x2"].mean == 1.0

    def test_single_row_component_reports_zero_sd(self):
        model, d = _handmade_model_and_data()
        resp = np.zeros((d.n, 2))
        resp[0, 0] = 1.0
        resp[1:, 1] = 1.0
        import dataclasses

        skewed = dataclasses.replace(model, responsibilities=resp)
        summ = component_summaries(skewed, d)
        assert summ[0]["y"].sd == 0.0

    def test_empty_component_reported_as_none(self):
        model, d = _handmade_model_and_data()
        resp = np.column_stack([np.full(d.n, 0.6), np.full(d.n, 0.4)])
        import dataclasses

        lopsided = dataclasses.replace(model, responsibilities=resp)
        summ = component_summaries(lopsided, d)
        assert summ[0] is not None
        assert summ[1] is None
