"""Cross-validated evaluation: RMSE, nDCG, reach and recommendation latency."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .dataset import Dataset, id_key, stratified_folds
from .recommender import CBFConfig, CriteriaCache, HybridRecommender, RecommenderConfig

RELEVANCE_THRESHOLD = 2.5


def rmse(pairs) -> tuple:
    """Root mean squared error over pairs with a prediction.

    ``pairs`` holds ``(prediction, truth)``; absent predictions are skipped.
    Returns ``(value, n_used)``; ``value`` is None when nothing was predicted.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("rmse needs at least one pair")
    sq = [(p - t) ** 2 for p, t in pairs if p is not None]
    if not sq:
        return None, 0
    return math.sqrt(math.fsum(sq) / len(sq)), len(sq)


def dcg(gains) -> float:
    return math.fsum((2.0 ** g - 1.0) / math.log2(i + 2) for i, g in enumerate(gains))


def ndcg(recommended, relevance) -> float:
    """nDCG of a recommended order against graded relevances.

    ``recommended`` is a list of course ids or ``(course_id, estimate)`` pairs.
    Courses missing from ``relevance`` count as 0. The ideal ranking is cut at
    the length of the recommended list.
    """
    ids = [r[0] if isinstance(r, tuple) else r for r in recommended]
    p = len(ids)
    ideal = sorted(relevance.values(), reverse=True)[:p]
    idcg = dcg(ideal)
    if idcg == 0:
        return 1.0
    return min(1.0, dcg([relevance.get(c, 0) for c in ids]) / idcg)


def reach(predictions) -> float:
    predictions = list(predictions)
    if not predictions:
        raise ValueError("reach needs at least one prediction")
    return 100.0 * sum(p is not None for p in predictions) / len(predictions)


@dataclass
class EvaluationReport:
    approach: str
    fold_rmse: list
    fold_ndcg: list
    reach_pct: float
    time_s: float
    seed: int
    k: int
    rmse: Optional[float] = None
    ndcg: Optional[float] = None
    fold_reach: list = field(default_factory=list)

    def __post_init__(self):
        defined = [r for r in self.fold_rmse if r is not None]
        self.rmse = float(np.mean(defined)) if defined else None
        self.ndcg = float(np.mean(self.fold_ndcg)) if self.fold_ndcg else None


def _rating_grade(dataset: Dataset, student: str, course: str) -> tuple:
    i, j = dataset.student_index[student], dataset.course_index[course]
    r, g = dataset.ratings_matrix[i, j], dataset.grades_matrix[i, j]
    return (None if np.isnan(r) else float(r)), (None if np.isnan(g) else float(g))


def _most_relevant_first(dataset: Dataset, student: str, courses) -> list:
    """Order by rating, then grade, then course id."""

    def key(course):
        rating, grade = _rating_grade(dataset, student, course)
        return (-rating, -(grade if grade is not None else -1.0), id_key(course))

    return sorted(courses, key=key)


@dataclass
class Fold:
    test: list
    train: Dataset
    cache: CriteriaCache


def prepare_folds(dataset: Dataset, k: int = 5, seed: int = 0, stopwords=None) -> list:
    """Build the ``k`` train/test folds once so several configs can share them."""
    folds = []
    for test in stratified_folds(dataset, k, seed):
        train = dataset.hide_ratings(test)
        pairs = sorted(test, key=lambda sc: (id_key(sc[0]), id_key(sc[1])))
        folds.append(Fold(pairs, train, CriteriaCache(train, stopwords)))
    return folds


def default_model(train: Dataset, cfg: RecommenderConfig, cache: CriteriaCache):
    return HybridRecommender(train, cfg, cache)


def cross_validate(
    dataset: Dataset,
    cfg: RecommenderConfig,
    k: int = 5,
    seed: int = 0,
    *,
    folds: Optional[list] = None,
    model_factory: Callable = default_model,
    approach: str = "Proposed hybrid RS",
    stopwords=None,
) -> EvaluationReport:
    """k-fold evaluation of ``cfg``.

    Per fold, each hidden rating is predicted (RMSE, reach). Then every student
    with hidden ratings in the fold asks for as many recommendations as it has
    hidden ratings, and the list is scored by nDCG against the hidden ratings
    ordered most relevant first. Only the recommendation calls are timed.

    ``model_factory(train, cfg, cache)`` must return an object with
    ``predict(student, course)`` and ``recommend(student, n)``.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if folds is None:
        folds = prepare_folds(dataset, k, seed, stopwords)
    fold_rmse, fold_ndcg, fold_reach = [], [], []
    all_preds = []
    elapsed, calls = 0.0, 0
    for fold in folds:
        model = model_factory(fold.train, cfg, fold.cache)
        preds = [model.predict(s, c) for s, c in fold.test]
        truths = [_rating_grade(dataset, s, c)[0] for s, c in fold.test]
        all_preds += preds
        if fold.test:
            fold_rmse.append(rmse(zip(preds, truths))[0])
            fold_reach.append(reach(preds))

        by_student: dict = {}
        for s, c in fold.test:
            by_student.setdefault(s, []).append(c)
        scores = []
        for s in sorted(by_student, key=id_key):
            hidden = _most_relevant_first(dataset, s, by_student[s])
            relevance = {c: _rating_grade(dataset, s, c)[0] for c in hidden}
            t0 = time.perf_counter()
            recs = model.recommend(s, len(hidden))
            elapsed += time.perf_counter() - t0
            calls += 1
            scores.append(ndcg(recs, relevance))
        if scores:
            fold_ndcg.append(float(np.mean(scores)))

    return EvaluationReport(
        approach=approach,
        fold_rmse=fold_rmse,
        fold_ndcg=fold_ndcg,
        reach_pct=reach(all_preds) if all_preds else 0.0,
        time_s=elapsed / calls if calls else 0.0,
        seed=seed,
        k=len(folds),
        fold_reach=fold_reach,
    )


def ablation_configs(cfg: RecommenderConfig) -> list:
    """The ten ``(label, config)`` rows of the engine/criterion ablation."""
    cf, cbf = cfg.cf, cfg.cbf
    cf_only = lambda c: RecommenderConfig(1.0, 0.0, c, cbf)  # noqa: E731
    cbf_only = lambda c: RecommenderConfig(0.0, 1.0, cf, c)  # noqa: E731
    return [
        ("Proposed hybrid RS", cfg),
        ("CF with multi-criteria", cf_only(cf)),
        ("CBF with multi-criteria", cbf_only(cbf)),
        ("CF with rating criterion", cf_only(replace(cf, weight_ratings=1.0, weight_grades=0.0, weight_branch=0.0))),
        ("CF with grade criterion", cf_only(replace(cf, weight_ratings=0.0, weight_grades=1.0, weight_branch=0.0))),
        ("CF with branch criterion", cf_only(replace(cf, weight_ratings=0.0, weight_grades=0.0, weight_branch=1.0))),
        ("CBF with professor criterion", cbf_only(CBFConfig(1.0, 0.0, 0.0, 0.0, cbf.professors_metric, cbf.competences_metric))),
        ("CBF with content criterion", cbf_only(CBFConfig(0.0, 0.0, 0.0, 1.0, cbf.professors_metric, cbf.competences_metric))),
        ("CBF with competences criterion", cbf_only(CBFConfig(0.0, 1.0, 0.0, 0.0, cbf.professors_metric, cbf.competences_metric))),
        ("CBF with knowledge area criterion", cbf_only(CBFConfig(0.0, 0.0, 1.0, 0.0, cbf.professors_metric, cbf.competences_metric))),
    ]


def compare_ablations(dataset: Dataset, cfg: RecommenderConfig, k: int = 5, seed: int = 0, stopwords=None) -> list:
    folds = prepare_folds(dataset, k, seed, stopwords)
    return [
        cross_validate(dataset, c, k, seed, folds=folds, approach=label) for label, c in ablation_configs(cfg)
    ]


def _fmt(x: Optional[float], digits: int) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def write_report_csv(reports, path, include_time: bool = True) -> None:
    """One row per approach. ``include_time=False`` blanks the wall-clock column for reproducible files."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["approach", "rmse", "ndcg", "reach_pct", "time_s"])
        for r in reports:
            w.writerow([r.approach, _fmt(r.rmse, 6), _fmt(r.ndcg, 6), f"{r.reach_pct:.2f}", _fmt(r.time_s, 6) if include_time else ""])


# --------------------------------------------------------------------------
# Single-student back-test
# --------------------------------------------------------------------------

@dataclass
class CaseStudyRow:
    course_id: str
    real_rating: float
    estimated_rating: Optional[float]

    @property
    def relevant(self) -> bool:
        return self.real_rating > RELEVANCE_THRESHOLD

    @property
    def recommended(self) -> bool:
        return self.estimated_rating is not None and self.estimated_rating > RELEVANCE_THRESHOLD


def case_study(dataset: Dataset, cfg: RecommenderConfig, student: str, hidden_courses, n: int = 3, stopwords=None):
    """Hide some of a student's ratings, predict them back and recommend.

    Returns ``(rows, top_n)``: one :class:`CaseStudyRow` per hidden course and
    the top-``n`` list from the model trained without the hidden ratings.
    """
    hidden = sorted(set(hidden_courses), key=id_key)
    i = dataset.student_index[student]
    for c in hidden:
        if np.isnan(dataset.ratings_matrix[i, dataset.course_index[c]]):
            raise ValueError(f"student {student} has no rating for course {c}")
    train = dataset.hide_ratings((student, c) for c in hidden)
    model = HybridRecommender(train, cfg, CriteriaCache(train, stopwords))
    rows = [CaseStudyRow(c, float(dataset.ratings_matrix[i, dataset.course_index[c]]), model.predict(student, c)) for c in hidden]
    return rows, model.recommend(student, n)


def write_case_study_csv(rows, path) -> None:
    yes = lambda b: "Yes" if b else "No"  # noqa: E731
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["course_id", "real_rating", "estimated_rating", "relevant", "recommended"])
        for r in rows:
            w.writerow([r.course_id, f"{r.real_rating:.2f}", _fmt(r.estimated_rating, 2), yes(r.relevant), yes(r.recommended)])


def format_recommendations(recs) -> str:
    return "[" + ", ".join(f"{c}({v:.2f})" for c, v in recs) + "]"
