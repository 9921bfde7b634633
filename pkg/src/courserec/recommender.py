"""Hybrid multi-criteria recommender.

A student-based collaborative filter (ratings, grades, branch) and a
course-based content filter (professors, competences, knowledge area,
contents) each estimate a rating on the 1..5 scale; the hybrid blends them
with a convex weight pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .content import content_similarity, load_stopwords, tokenize
from .dataset import RATING_MAX, RATING_MIN, Dataset, id_key
from .similarity import (
    SetMetric,
    VectorMetric,
    binary_set_similarity,
    exact_match_similarity,
    profile_similarity,
)

Prediction = Optional[float]
SIM_DECIMALS = 12

VECTOR_METRIC_NAMES = {
    VectorMetric.EUCLIDEAN: "euclidean",
    VectorMetric.TAXICAB: "taxicab",
    VectorMetric.PEARSON: "pearson",
    VectorMetric.SPEARMAN: "spearman",
}
SET_METRIC_NAMES = {SetMetric.JACCARD: "jaccard", SetMetric.LOG_LIKELIHOOD: "log_likelihood"}


class ConfigError(ValueError):
    pass


def _check_weights(label: str, *weights: float) -> None:
    cents = []
    for w in weights:
        if not 0.0 <= w <= 1.0:
            raise ConfigError(f"{label}: weight {w} outside [0, 1]")
        c = round(w * 100)
        if abs(w * 100 - c) > 1e-6:
            raise ConfigError(f"{label}: weight {w} has more than two decimals")
        cents.append(c)
    if sum(cents) != 100:
        raise ConfigError(f"{label}: weights {weights} do not sum to 1.00")


@dataclass(frozen=True)
class CFConfig:
    weight_ratings: float
    weight_grades: float
    weight_branch: float
    neighborhood_size: int
    ratings_metric: VectorMetric = VectorMetric.PEARSON
    grades_metric: VectorMetric = VectorMetric.PEARSON
    # pick the K nearest among the course's raters instead of the K nearest overall
    restrict_to_raters: bool = False

    def __post_init__(self):
        _check_weights("cf", self.weight_ratings, self.weight_grades, self.weight_branch)
        if self.neighborhood_size < 1:
            raise ConfigError("cf: neighborhood_size must be >= 1")


@dataclass(frozen=True)
class CBFConfig:
    weight_professors: float
    weight_competences: float
    weight_area: float
    weight_contents: float
    professors_metric: SetMetric = SetMetric.JACCARD
    competences_metric: SetMetric = SetMetric.JACCARD

    def __post_init__(self):
        _check_weights(
            "cbf", self.weight_professors, self.weight_competences, self.weight_area, self.weight_contents
        )


@dataclass(frozen=True)
class RecommenderConfig:
    weight_cf: float
    weight_cbf: float
    cf: CFConfig
    cbf: CBFConfig

    def __post_init__(self):
        _check_weights("hybrid", self.weight_cf, self.weight_cbf)

    def to_dict(self) -> dict:
        return {
            "hybrid": {"cf_weight": self.weight_cf, "cbf_weight": self.weight_cbf},
            "cf": {
                "ratings_metric": VECTOR_METRIC_NAMES[self.cf.ratings_metric],
                "grades_metric": VECTOR_METRIC_NAMES[self.cf.grades_metric],
                "ratings_weight": self.cf.weight_ratings,
                "grades_weight": self.cf.weight_grades,
                "branch_weight": self.cf.weight_branch,
                "neighborhood_size": self.cf.neighborhood_size,
                "restrict_to_raters": self.cf.restrict_to_raters,
            },
            "cbf": {
                "professors_metric": SET_METRIC_NAMES[self.cbf.professors_metric],
                "competences_metric": SET_METRIC_NAMES[self.cbf.competences_metric],
                "professors_weight": self.cbf.weight_professors,
                "competences_weight": self.cbf.weight_competences,
                "area_weight": self.cbf.weight_area,
                "contents_weight": self.cbf.weight_contents,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RecommenderConfig":
        try:
            jsonschema.validate(doc, config_schema())
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid recommender config: {exc.message}") from None
        vec = {v: k for k, v in VECTOR_METRIC_NAMES.items()}
        sets = {v: k for k, v in SET_METRIC_NAMES.items()}
        cf, cbf, hy = doc["cf"], doc["cbf"], doc["hybrid"]
        return cls(
            hy["cf_weight"],
            hy["cbf_weight"],
            CFConfig(
                cf["ratings_weight"],
                cf["grades_weight"],
                cf["branch_weight"],
                cf["neighborhood_size"],
                vec[cf["ratings_metric"]],
                vec[cf["grades_metric"]],
                cf.get("restrict_to_raters", False),
            ),
            CBFConfig(
                cbf["professors_weight"],
                cbf["competences_weight"],
                cbf["area_weight"],
                cbf["contents_weight"],
                sets[cbf["professors_metric"]],
                sets[cbf["competences_metric"]],
            ),
        )


def config_schema() -> dict:
    text = resources.files("courserec").joinpath("data/recommender_config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def save_config(cfg: RecommenderConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_config(path) -> RecommenderConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return RecommenderConfig.from_dict(doc)


# --------------------------------------------------------------------------
# Similarity matrices
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense symmetric similarities; NaN marks an undefined cell."""

    ids: tuple
    values: np.ndarray

    def get(self, a: str, b: str) -> Optional[float]:
        index = {k: i for i, k in enumerate(self.ids)}
        v = self.values[index[a], index[b]]
        return None if np.isnan(v) else float(v)


def _pairwise(n: int, fn) -> np.ndarray:
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            v = fn(i, j)
            out[i, j] = out[j, i] = np.nan if v is None else v
    out.setflags(write=False)
    return out


class CriteriaCache:
    """Per-criterion similarity matrices of one training set.

    A matrix depends only on the training data and the metric, never on the
    weights, so it is computed once and shared by every configuration
    evaluated on the same data.
    """

    def __init__(self, train: Dataset, stopwords=None):
        self.train = train
        self.stopwords = load_stopwords() if stopwords is None else frozenset(stopwords)
        self._store: dict = {}
        r, g = train.ratings_matrix, train.grades_matrix
        self._ratings = [{j: r[i, j] for j in np.flatnonzero(~np.isnan(r[i]))} for i in range(train.num_students)]
        self._grades = [{j: g[i, j] for j in np.flatnonzero(~np.isnan(g[i]))} for i in range(train.num_students)]

    def _get(self, key, build):
        if key not in self._store:
            self._store[key] = build()
        return self._store[key]

    def ratings(self, metric: VectorMetric) -> np.ndarray:
        p = self._ratings
        return self._get(("ratings", metric), lambda: _pairwise(len(p), lambda i, j: profile_similarity(metric, p[i], p[j])))

    def grades(self, metric: VectorMetric) -> np.ndarray:
        p = self._grades
        return self._get(("grades", metric), lambda: _pairwise(len(p), lambda i, j: profile_similarity(metric, p[i], p[j])))

    def branch(self) -> np.ndarray:
        b = [s.branch for s in self.train.students]
        return self._get("branch", lambda: _pairwise(len(b), lambda i, j: exact_match_similarity(b[i], b[j])))

    def professors(self, metric: SetMetric) -> np.ndarray:
        cs, u = self.train.courses, self.train.universes.num_professors
        return self._get(
            ("professors", metric),
            lambda: _pairwise(len(cs), lambda i, j: binary_set_similarity(metric, cs[i].professors, cs[j].professors, u)),
        )

    def competences(self, metric: SetMetric) -> np.ndarray:
        cs, u = self.train.courses, self.train.universes.num_competences
        return self._get(
            ("competences", metric),
            lambda: _pairwise(
                len(cs), lambda i, j: binary_set_similarity(metric, cs[i].competences, cs[j].competences, u)
            ),
        )

    def area(self) -> np.ndarray:
        cs = self.train.courses
        return self._get(
            "area", lambda: _pairwise(len(cs), lambda i, j: exact_match_similarity(cs[i].knowledge_area, cs[j].knowledge_area))
        )

    def contents(self) -> np.ndarray:
        def build():
            toks = [tokenize(c.content, self.stopwords) for c in self.train.courses]
            return _pairwise(len(toks), lambda i, j: content_similarity(toks[i], toks[j]))

        return self._get("contents", build)


def _combine(terms) -> np.ndarray:
    """Weighted sum of criterion matrices; zero-weight terms are skipped so their NaNs don't leak."""
    total = None
    for w, matrix in terms:
        if w == 0:
            continue
        part = w * matrix()
        total = part if total is None else total + part
    # snap rounding noise: an exact anti-correlation must give 0, not 1e-16, and ties must stay ties
    return np.clip(np.round(total, SIM_DECIMALS), 0.0, 1.0)


def student_similarity(train: Dataset, cf: CFConfig, cache: Optional[CriteriaCache] = None) -> SimilarityMatrix:
    cache = cache or CriteriaCache(train)
    values = _combine(
        [
            (cf.weight_ratings, lambda: cache.ratings(cf.ratings_metric)),
            (cf.weight_grades, lambda: cache.grades(cf.grades_metric)),
            (cf.weight_branch, cache.branch),
        ]
    )
    return SimilarityMatrix(train.student_ids, values)


def course_similarity(
    train: Dataset, cbf: CBFConfig, content_sims=None, cache: Optional[CriteriaCache] = None
) -> SimilarityMatrix:
    """Course-course similarity. ``content_sims`` may override the cached content table."""
    cache = cache or CriteriaCache(train)
    if content_sims is None:
        contents = cache.contents
    else:
        table = content_sims.values if isinstance(content_sims, SimilarityMatrix) else np.asarray(content_sims)
        if table.shape != (train.num_courses, train.num_courses):
            raise ValueError("content similarity table does not cover every course pair")
        contents = lambda: table  # noqa: E731
    values = _combine(
        [
            (cbf.weight_professors, lambda: cache.professors(cbf.professors_metric)),
            (cbf.weight_competences, lambda: cache.competences(cbf.competences_metric)),
            (cbf.weight_area, cache.area),
            (cbf.weight_contents, contents),
        ]
    )
    return SimilarityMatrix(train.course_ids, values)


# --------------------------------------------------------------------------
# Estimators
# --------------------------------------------------------------------------

def _clamp(x: float) -> float:
    return float(min(RATING_MAX, max(RATING_MIN, x)))


def neighbor_order(sim_row: np.ndarray, self_index: int) -> np.ndarray:
    """Indices of defined neighbours, most similar first, ties by index (= id order)."""
    idx = np.flatnonzero(~np.isnan(sim_row))
    idx = idx[idx != self_index]
    return idx[np.argsort(-sim_row[idx], kind="stable")]


def _cf_from_order(order, sim_row, ratings_col, k: int, restrict_to_raters: bool) -> Prediction:
    if restrict_to_raters:
        keep = order[(~np.isnan(ratings_col[order])) & (sim_row[order] > 0)][:k]
    else:
        top = order[:k]
        keep = top[(~np.isnan(ratings_col[top])) & (sim_row[top] > 0)]
    if keep.size == 0:
        return None
    s = sim_row[keep]
    return _clamp(float(np.dot(s, ratings_col[keep]) / s.sum()))


def _cbf_from_row(course_sim_row, ratings_row) -> Prediction:
    rated = np.flatnonzero(~np.isnan(ratings_row))
    if rated.size == 0:
        return None
    s = course_sim_row[rated]
    pos = s > 0
    if not pos.any():
        return _clamp(float(ratings_row[rated].mean()))
    return _clamp(float(np.dot(s[pos], ratings_row[rated][pos]) / s[pos].sum()))


def predict_cf(train: Dataset, cf: CFConfig, sims: SimilarityMatrix, student: str, course: str) -> Prediction:
    i, j = train.student_index[student], train.course_index[course]
    row = sims.values[i]
    return _cf_from_order(
        neighbor_order(row, i), row, train.ratings_matrix[:, j], cf.neighborhood_size, cf.restrict_to_raters
    )


def predict_cbf(train: Dataset, cbf: CBFConfig, sims: SimilarityMatrix, student: str, course: str) -> Prediction:
    i, j = train.student_index[student], train.course_index[course]
    return _cbf_from_row(sims.values[j], train.ratings_matrix[i])


def predict_hybrid(cfg: RecommenderConfig, cf_pred: Prediction, cbf_pred: Prediction) -> Prediction:
    if cf_pred is None:
        return cbf_pred
    if cbf_pred is None:
        return cf_pred
    return cfg.weight_cf * cf_pred + cfg.weight_cbf * cbf_pred


class HybridRecommender:
    """A recommender fitted to one training set.

    An engine whose blend weight is zero is never built and always abstains,
    so a CF-only configuration cannot fall back on the content engine.
    """

    def __init__(self, train: Dataset, cfg: RecommenderConfig, cache: Optional[CriteriaCache] = None):
        self.train = train
        self.cfg = cfg
        self.cache = cache or CriteriaCache(train)
        self.student_sims = student_similarity(train, cfg.cf, self.cache) if cfg.weight_cf > 0 else None
        self.course_sims = course_similarity(train, cfg.cbf, cache=self.cache) if cfg.weight_cbf > 0 else None
        self._orders: dict = {}

    def predict_cf(self, student: str, course: str) -> Prediction:
        if self.student_sims is None:
            return None
        i, j = self.train.student_index[student], self.train.course_index[course]
        row = self.student_sims.values[i]
        if i not in self._orders:
            self._orders[i] = neighbor_order(row, i)
        cf = self.cfg.cf
        return _cf_from_order(
            self._orders[i], row, self.train.ratings_matrix[:, j], cf.neighborhood_size, cf.restrict_to_raters
        )

    def predict_cbf(self, student: str, course: str) -> Prediction:
        if self.course_sims is None:
            return None
        i, j = self.train.student_index[student], self.train.course_index[course]
        return _cbf_from_row(self.course_sims.values[j], self.train.ratings_matrix[i])

    def predict(self, student: str, course: str) -> Prediction:
        return predict_hybrid(self.cfg, self.predict_cf(student, course), self.predict_cbf(student, course))

    def recommend(self, student: str, n: int) -> list:
        """Top-``n`` unrated courses as ``(course_id, estimate)``, best first."""
        if n < 1:
            raise ValueError("n must be >= 1")
        row = self.train.ratings_matrix[self.train.student_index[student]]
        scored = []
        for j in np.flatnonzero(np.isnan(row)):
            cid = self.train.course_ids[j]
            p = self.predict(student, cid)
            if p is not None:
                scored.append((cid, p))
        return rank_predictions(scored)[:n]


def rank_predictions(scored) -> list:
    """Order ``(course_id, estimate)`` pairs by estimate descending, then id ascending."""
    return sorted(scored, key=lambda cp: (-cp[1], id_key(cp[0])))


def recommend_top_n(train: Dataset, cfg: RecommenderConfig, student: str, n: int, cache=None) -> list:
    return HybridRecommender(train, cfg, cache).recommend(student, n)
