"""Acceptance criteria 1-9. Each test is one criterion; the terminal summary prints PASS/FAIL per test."""

import csv
import math
import random
import re
import time

import numpy as np

from courserec.content import content_similarity
from courserec.dataset import SyntheticSpec, generate_synthetic, id_key, stratified_folds
from courserec.evaluation import (
    RELEVANCE_THRESHOLD,
    ablation_configs,
    case_study,
    compare_ablations,
    cross_validate,
    format_recommendations,
    ndcg,
    prepare_folds,
    rmse,
    write_case_study_csv,
)
from courserec.ga import (
    MAX_DISTANCE,
    CHCOptimizer,
    FitnessEvaluator,
    GAParams,
    chromosome_distance,
    decode,
    equal_weights_chromosome,
    random_chromosome,
    run_ga,
)
from courserec.recommender import CBFConfig, CFConfig, RecommenderConfig
from courserec.similarity import SetMetric, VectorMetric, binary_set_similarity, correlation_similarity
from oracles import (
    correlation_oracle,
    cosine_global,
    engine_mismatches,
    jaccard_bits,
    random_engine_instance,
)

# pinned tolerances and budgets
EXACT_TOL = 1e-9
DECODE_BUDGET_S = 1.0
DISTANCE_BUDGET_S = 5.0
GA_BUDGET_S = 600.0
RANDOM_DISTANCE_PAIRS = 10_000
METRIC_INSTANCES = 200
CONTENT_INSTANCES = 50
ENGINE_INSTANCES = 100
NDCG_INSTANCES = 500
CASE_HIDDEN = 8


def reference_config():
    return RecommenderConfig(
        0.54, 0.46,
        CFConfig(0.60, 0.30, 0.10, 15, VectorMetric.PEARSON, VectorMetric.PEARSON),
        CBFConfig(0.65, 0.00, 0.00, 0.35, SetMetric.JACCARD, SetMetric.JACCARD),
    )


def test_criterion_1_decode_examples():
    t0 = time.perf_counter()
    cfg = decode((27, 50, 30, 8, 45, 12, 46, 15, 22, 10, 2, 2, 0, 0))
    hy = (cfg.weight_cf, cfg.weight_cbf)
    cf = (cfg.cf.weight_ratings, cfg.cf.weight_grades, cfg.cf.weight_branch)
    cbf = (cfg.cbf.weight_professors, cfg.cbf.weight_competences, cfg.cbf.weight_area, cfg.cbf.weight_contents)
    assert hy == (0.35, 0.65)
    assert cf == (0.36, 0.10, 0.54)
    assert cbf == (0.13, 0.48, 0.16, 0.23)
    for group in (hy, cf, cbf):
        assert sum(round(w * 100) for w in group) == 100
    assert time.perf_counter() - t0 < DECODE_BUDGET_S


def test_criterion_2_distance():
    t0 = time.perf_counter()
    # group-2 both differ, group-3 one decoded equality, group-4 all differ, two tail genes differ
    a = (20, 30, 20, 30, 50, 10, 20, 30, 40, 10, 2, 2, 0, 0)
    b = (30, 20, 20, 50, 30, 40, 30, 20, 10, 12, 2, 3, 0, 0)
    assert chromosome_distance(a, b) == 7
    rng = np.random.default_rng(2024)
    params = GAParams()
    for _ in range(RANDOM_DISTANCE_PAIRS):
        x, y = random_chromosome(params, rng), random_chromosome(params, rng)
        assert 0 <= chromosome_distance(x, y) <= MAX_DISTANCE == 11
    assert time.perf_counter() - t0 < DISTANCE_BUDGET_S


def test_criterion_3_ga_invariants(default_dataset, tmp_path):
    t0 = time.perf_counter()
    params = GAParams(generations=50, population_size=20, seed=7)
    paths = []
    for run in ("a", "b"):
        cfg, trace = run_ga(params, default_dataset)
        best = trace.best_fitness()
        assert len(best) == 50
        assert all(later <= earlier for earlier, later in zip(best, best[1:]))
        path = tmp_path / f"trace_{run}.csv"
        trace.write_csv(path)
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    seeded = FitnessEvaluator(default_dataset, params.seed)(equal_weights_chromosome(params))
    assert trace.final_fitness <= seeded
    assert time.perf_counter() - t0 < GA_BUDGET_S


def test_criterion_4_restart():
    def fitness(genes):
        return float(sum(genes))

    # negligible crossover rate so the merged population equals the current one
    params = GAParams(population_size=50, crossover_probability=1e-12, seed=9)
    opt = CHCOptimizer(params, fitness)
    opt.initialize()
    before = sorted(opt.population)
    opt.threshold = 0
    record = opt.step()
    keep = math.ceil(0.10 * 50)
    assert keep == 5
    assert record.restarted
    assert len(opt.population) == 50
    assert opt.threshold == 4
    assert before[:keep] == [ind for ind in opt.population if ind in before[:keep]]
    assert all(ind in opt.population for ind in before[:keep])


def test_criterion_5_metric_oracles():
    rng = random.Random(55)
    for _ in range(METRIC_INSTANCES):
        n = rng.randint(2, 15)
        a = {k: rng.randint(1, 5) for k in range(n) if rng.random() < 0.85}
        b = {k: rng.randint(1, 5) for k in range(n) if rng.random() < 0.85}
        for kind, name in ((VectorMetric.PEARSON, "pearson"), (VectorMetric.SPEARMAN, "spearman")):
            got, want = correlation_similarity(kind, a, b), correlation_oracle(name, a, b)
            assert (got is None) == (want is None)
            if got is not None:
                assert abs(got - want) <= EXACT_TOL
    for _ in range(METRIC_INSTANCES):
        u = rng.randint(1, 30)
        a = {i for i in range(u) if rng.random() < 0.3}
        b = {i for i in range(u) if rng.random() < 0.3}
        assert abs(binary_set_similarity(SetMetric.JACCARD, a, b, u) - jaccard_bits(a, b, u)) <= EXACT_TOL
    vocab = [f"w{i}" for i in range(20)]
    for _ in range(CONTENT_INSTANCES):
        x = {w: rng.randint(1, 9) for w in rng.sample(vocab, rng.randint(1, 12))}
        y = {w: rng.randint(1, 9) for w in rng.sample(vocab, rng.randint(1, 12))}
        assert abs(content_similarity(x, y) - cosine_global(x, y)) <= EXACT_TOL
    # independence-constructed tables: k11 * k22 == k12 * k21
    for a, b, u in (({1, 2}, {1, 3}, 4), ({0, 1, 2, 3}, {0, 1, 4, 5}, 8), ({0, 1}, {0, 2, 3}, 6), ({0}, set(), 3)):
        assert abs(binary_set_similarity(SetMetric.LOG_LIKELIHOOD, a, b, u)) <= EXACT_TOL


def test_criterion_6_engine_oracle():
    for seed in range(ENGINE_INSTANCES):
        ds, cfg = random_engine_instance(seed)
        assert ds.num_students <= 6 and ds.num_courses <= 5
        assert engine_mismatches(ds, cfg, tol=EXACT_TOL) == [], seed


def test_criterion_7_reach_dominance():
    datasets = [generate_synthetic(SyntheticSpec(students=40, courses=20, min_ratings=5, max_ratings=12), s)
                for s in range(3)]
    datasets.append(generate_synthetic(SyntheticSpec(), 7))
    cfg = reference_config()
    cf_only = RecommenderConfig(1.0, 0.0, cfg.cf, cfg.cbf)
    for ds in datasets:
        folds = prepare_folds(ds, 5, 0)
        for fold in folds:
            for sid in ds.student_ids:
                assert fold.train.ratings_profile(sid), "precondition: a training rating per student"
        hybrid = cross_validate(ds, cfg, folds=folds)
        cf = cross_validate(ds, cf_only, folds=folds)
        assert hybrid.reach_pct == 100.0
        assert cf.reach_pct <= 100.0


def test_criterion_8_evaluation_identities(default_dataset):
    rng = random.Random(8)
    for _ in range(NDCG_INSTANCES):
        rel = {f"c{i}": rng.randint(0, 5) for i in range(rng.randint(1, 10))}
        ideal = sorted(rel, key=lambda c: (-rel[c], c))
        assert abs(ndcg(ideal, rel) - 1.0) <= EXACT_TOL
    assert rmse([(r, r) for r in (1.0, 2.5, 5.0)])[0] == 0.0

    for fold_seed in range(3):
        folds = stratified_folds(default_dataset, 5, fold_seed)
        for cid in default_dataset.course_ids:
            counts = [sum(1 for _, c in f if c == cid) for f in folds]
            assert max(counts) - min(counts) <= 1

    cfg = reference_config()
    reports = compare_ablations(default_dataset, cfg, k=5, seed=0)
    assert [r.approach for r in reports] == [label for label, _ in ablation_configs(cfg)]
    assert len(reports) == 10
    # shared folds: re-running any row on the same prepared folds gives the same numbers
    folds = prepare_folds(default_dataset, 5, 0)
    for (label, c), rep in zip(ablation_configs(cfg)[:3], reports[:3]):
        again = cross_validate(default_dataset, c, folds=folds, approach=label)
        assert again.fold_rmse == rep.fold_rmse and again.reach_pct == rep.reach_pct


def test_criterion_9_case_study(default_dataset, tmp_path):
    student = default_dataset.student_ids[13]
    hidden = sorted(default_dataset.ratings_profile(student), key=id_key)[:CASE_HIDDEN]
    assert len(hidden) == CASE_HIDDEN
    rows, top = case_study(default_dataset, reference_config(), student, hidden, n=3)
    path = tmp_path / "case.csv"
    write_case_study_csv(rows, path)
    with open(path, newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["course_id", "real_rating", "estimated_rating", "relevant", "recommended"]
    assert len(table) == CASE_HIDDEN + 1
    assert RELEVANCE_THRESHOLD == 2.5
    for row, r in zip(table[1:], rows):
        assert row[3] == ("Yes" if float(row[1]) > 2.5 else "No")
        assert row[4] == ("Yes" if r.estimated_rating is not None and r.estimated_rating > 2.5 else "No")
    printed = format_recommendations(top)
    assert re.fullmatch(r"\[\w+\(\d\.\d\d\), \w+\(\d\.\d\d\), \w+\(\d\.\d\d\)\]", printed)
