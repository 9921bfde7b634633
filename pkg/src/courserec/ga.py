"""CHC-style genetic search over recommender configurations.

Genotype layout (14 integer genes)::

    0-1    hybrid blend weights         (CF, CBF)
    2-4    CF criterion weights         (ratings, grades, branch)
    5-8    CBF criterion weights        (professors, competences, area, contents)
    9      CF neighbourhood size
    10-11  CF metric ids                (ratings, grades)      0..3
    12-13  CBF metric ids               (professors, competences) 0..1

There is no mutation: diversity comes from incest prevention and restarts.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dataset import Dataset, split_holdout
from .recommender import (
    CBFConfig,
    CFConfig,
    CriteriaCache,
    HybridRecommender,
    RecommenderConfig,
    SET_METRIC_NAMES,
    VECTOR_METRIC_NAMES,
)
from .similarity import SetMetric, VectorMetric

NUM_GENES = 14
WEIGHT_GROUPS = ((0, 2), (2, 5), (5, 9))
NEIGHBORHOOD_GENE = 9
VECTOR_METRIC_GENES = (10, 11)
SET_METRIC_GENES = (12, 13)
TAIL_GENES = tuple(range(9, 14))
MAX_DISTANCE = sum(hi - lo - 1 for lo, hi in WEIGHT_GROUPS) + len(TAIL_GENES)

# error charged for a hold-out pair the recommender cannot predict: the full 1..5 scale
ABSENT_PENALTY = 4.0
RESTART_KEEP_FRACTION = 0.10


@dataclass(frozen=True)
class GAParams:
    generations: int = 1000
    population_size: int = 50
    crossover_probability: float = 0.9
    initial_incest_threshold: int = 4
    weight_range: tuple = (0, 50)
    neighborhood_range: tuple = (1, 50)
    holdout_fraction: float = 0.2
    seed: int = 0
    holdout_seed: Optional[int] = None
    threads: int = 1

    def __post_init__(self):
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not 0 < self.crossover_probability <= 1:
            raise ValueError("crossover_probability must lie in (0, 1]")
        if self.initial_incest_threshold < 1:
            raise ValueError("initial_incest_threshold must be >= 1")
        lo, hi = self.weight_range
        if not 0 <= lo <= hi:
            raise ValueError("invalid weight_range")
        lo, hi = self.neighborhood_range
        if not 1 <= lo <= hi:
            raise ValueError("invalid neighborhood_range")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def gene_bounds(params: GAParams) -> list:
    bounds = [tuple(params.weight_range)] * 9 + [tuple(params.neighborhood_range)]
    bounds += [(0, len(VectorMetric) - 1)] * 2 + [(0, len(SetMetric) - 1)] * 2
    return bounds


def check_chromosome(genes, params: Optional[GAParams] = None) -> tuple:
    genes = tuple(int(g) for g in genes)
    if len(genes) != NUM_GENES:
        raise ValueError(f"chromosome needs {NUM_GENES} genes, got {len(genes)}")
    for pos, (g, (lo, hi)) in enumerate(zip(genes, gene_bounds(params or GAParams()))):
        if not lo <= g <= hi:
            raise ValueError(f"gene {pos + 1} = {g} outside [{lo}, {hi}]")
    return genes


def normalize_group(genes) -> list:
    """Integer genes -> hundredths that sum to exactly 100.

    Each share is rounded half-up except the last, which takes the remainder.
    An all-zero group decodes to equal shares.
    """
    n = len(genes)
    total = sum(genes)
    if total == 0:
        genes, total = [1] * n, n
    cents = [(200 * g + total) // (2 * total) for g in genes[:-1]]
    last = 100 - sum(cents)
    if last < 0:
        # rounding every leading share up can overshoot by a cent; take it back
        # from the share that gained most from rounding
        gain = [c * total - 100 * g for c, g in zip(cents, genes)]  # exact, in 1/total cents
        k = max(range(n - 1), key=lambda i: (gain[i], -i))
        cents[k] += last
        last = 0
    return cents + [last]


def decode(genes) -> RecommenderConfig:
    g = check_chromosome(genes)
    hy, cf, cbf = (normalize_group(g[lo:hi]) for lo, hi in WEIGHT_GROUPS)
    vec, sets = list(VectorMetric), list(SetMetric)
    return RecommenderConfig(
        hy[0] / 100,
        hy[1] / 100,
        CFConfig(cf[0] / 100, cf[1] / 100, cf[2] / 100, g[9], vec[g[10]], vec[g[11]]),
        CBFConfig(cbf[0] / 100, cbf[1] / 100, cbf[2] / 100, cbf[3] / 100, sets[g[12]], sets[g[13]]),
    )


def chromosome_distance(a, b) -> int:
    """Hamming distance with normalised weight groups counted as units.

    A group of n weights that sums to 1 has n - 1 degrees of freedom, so it
    adds (differing positions - 1), never less than 0.
    """
    d = 0
    for lo, hi in WEIGHT_GROUPS:
        diff = sum(x != y for x, y in zip(normalize_group(a[lo:hi]), normalize_group(b[lo:hi])))
        d += max(diff - 1, 0)
    d += sum(a[i] != b[i] for i in TAIL_GENES)
    return d


def uniform_crossover(a, b, rng: np.random.Generator) -> tuple:
    """Uniform crossover that moves each weight group as one unit."""
    c1, c2 = list(a), list(b)
    units = [range(lo, hi) for lo, hi in WEIGHT_GROUPS] + [[i] for i in TAIL_GENES]
    swaps = rng.random(len(units)) < 0.5
    for unit, swap in zip(units, swaps):
        if swap:
            for i in unit:
                c1[i], c2[i] = c2[i], c1[i]
    return tuple(c1), tuple(c2)


def random_chromosome(params: GAParams, rng: np.random.Generator) -> tuple:
    return tuple(int(rng.integers(lo, hi + 1)) for lo, hi in gene_bounds(params))


def equal_weights_chromosome(params: GAParams) -> tuple:
    lo, hi = params.weight_range
    w = max(1, (lo + hi) // 2)
    k = min(max(10, params.neighborhood_range[0]), params.neighborhood_range[1])
    return (w,) * 9 + (k, 0, 0, 0, 0)


# --------------------------------------------------------------------------
# Fitness
# --------------------------------------------------------------------------

def rmse_with_penalty(predictions, truths) -> float:
    sq = []
    for p, v in zip(predictions, truths):
        err = ABSENT_PENALTY if p is None else p - v
        sq.append(err * err)
    if not sq:
        raise ValueError("hold-out set is empty")
    return math.sqrt(math.fsum(sq) / len(sq))


class FitnessEvaluator:
    """RMSE of a decoded chromosome on one fixed 80/20 split of ``train``.

    Fitness is a pure function of the phenotype, so results are memoised.
    """

    def __init__(self, train: Dataset, holdout_seed: int, holdout_fraction: float = 0.2, stopwords=None):
        self.inner, self.holdout = split_holdout(train, holdout_fraction, holdout_seed)
        if not self.holdout:
            raise ValueError("hold-out set is empty")
        self.holdout_seed = holdout_seed
        self.cache = CriteriaCache(self.inner, stopwords)
        self._memo: dict = {}

    def config_fitness(self, cfg: RecommenderConfig) -> float:
        if cfg not in self._memo:
            rec = HybridRecommender(self.inner, cfg, self.cache)
            preds = [rec.predict(s, c) for s, c, _ in self.holdout]
            self._memo[cfg] = rmse_with_penalty(preds, [v for _, _, v in self.holdout])
        return self._memo[cfg]

    def __call__(self, genes) -> float:
        return self.config_fitness(decode(genes))


def evaluate_fitness(genes, train: Dataset, holdout_seed: int) -> float:
    return FitnessEvaluator(train, holdout_seed)(genes)


# --------------------------------------------------------------------------
# Search
# --------------------------------------------------------------------------

@dataclass(order=True, frozen=True)
class Individual:
    fitness: float
    genes: tuple


PHENOTYPE_FIELDS = (
    "cf_weight",
    "cbf_weight",
    "ratings_weight",
    "grades_weight",
    "branch_weight",
    "professors_weight",
    "competences_weight",
    "area_weight",
    "contents_weight",
    "neighborhood_size",
    "ratings_metric",
    "grades_metric",
    "professors_metric",
    "competences_metric",
)


def phenotype_row(cfg: RecommenderConfig) -> list:
    cf, cbf = cfg.cf, cfg.cbf
    return [
        cfg.weight_cf,
        cfg.weight_cbf,
        cf.weight_ratings,
        cf.weight_grades,
        cf.weight_branch,
        cbf.weight_professors,
        cbf.weight_competences,
        cbf.weight_area,
        cbf.weight_contents,
        cf.neighborhood_size,
        VECTOR_METRIC_NAMES[cf.ratings_metric],
        VECTOR_METRIC_NAMES[cf.grades_metric],
        SET_METRIC_NAMES[cbf.professors_metric],
        SET_METRIC_NAMES[cbf.competences_metric],
    ]


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    incest_threshold: int
    restarted: bool
    best_genes: tuple

    @property
    def best_config(self) -> RecommenderConfig:
        return decode(self.best_genes)


@dataclass
class GenerationTrace:
    records: list = field(default_factory=list)
    holdout_seed: Optional[int] = None
    final_fitness: Optional[float] = None

    def best_fitness(self) -> list:
        return [r.best_fitness for r in self.records]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation", "best_fitness", "mean_fitness", "incest_threshold", "restarted"])
            for r in self.records:
                w.writerow([r.generation, repr(r.best_fitness), repr(r.mean_fitness), r.incest_threshold, int(r.restarted)])

    def write_phenotype_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation", *PHENOTYPE_FIELDS])
            for r in self.records:
                w.writerow([r.generation, *phenotype_row(r.best_config)])


def restart_population(pop: list, params: GAParams, rng: np.random.Generator) -> tuple:
    """Keep the best ceil(10%) individuals; return ``(survivors, fresh_genes)``.

    The caller evaluates the fresh chromosomes and resets the incest threshold.
    """
    if not pop:
        raise ValueError("cannot restart an empty population")
    keep = math.ceil(RESTART_KEEP_FRACTION * len(pop))
    survivors = sorted(pop)[:keep]
    fresh = [random_chromosome(params, rng) for _ in range(len(pop) - keep)]
    return survivors, fresh


class CHCOptimizer:
    """Generation loop with incest prevention, elitist merge and restarts."""

    def __init__(self, params: GAParams, fitness: Callable[[tuple], float]):
        self.params = params
        self.fitness = fitness
        self.rng = np.random.default_rng(params.seed)
        self.threshold = params.initial_incest_threshold
        self.generation = 0
        self.population: list = []
        self.trace = GenerationTrace()

    def evaluate(self, chromosomes) -> list:
        chromosomes = list(chromosomes)
        if self.params.threads > 1 and len(chromosomes) > 1:
            with ThreadPoolExecutor(self.params.threads) as pool:
                scores = list(pool.map(self.fitness, chromosomes))
        else:
            scores = [self.fitness(c) for c in chromosomes]
        return [Individual(float(f), c) for f, c in zip(scores, chromosomes)]

    def initialize(self) -> None:
        p = self.params
        genes = [random_chromosome(p, self.rng) for _ in range(p.population_size - 1)]
        genes.append(equal_weights_chromosome(p))
        self.population = sorted(self.evaluate(genes))

    @property
    def best(self) -> Individual:
        return min(self.population)

    def step(self) -> GenerationRecord:
        p = self.params
        order = self.rng.permutation(len(self.population))
        offspring = []
        any_eligible = False
        for k in range(0, len(order) - 1, 2):
            a, b = self.population[order[k]].genes, self.population[order[k + 1]].genes
            if chromosome_distance(a, b) >= self.threshold:
                any_eligible = True
                if self.rng.random() < p.crossover_probability:
                    offspring.extend(uniform_crossover(a, b, self.rng))
        if not any_eligible:
            self.threshold = max(0, self.threshold - 1)

        merged = sorted(self.population + self.evaluate(offspring))
        self.population = merged[: p.population_size]

        restarted = False
        if self.threshold <= 0:
            survivors, fresh = restart_population(self.population, p, self.rng)
            self.population = sorted(survivors + self.evaluate(fresh))
            self.threshold = p.initial_incest_threshold
            restarted = True

        self.generation += 1
        best = self.best
        record = GenerationRecord(
            self.generation,
            best.fitness,
            float(np.mean([ind.fitness for ind in self.population])),
            self.threshold,
            restarted,
            best.genes,
        )
        self.trace.records.append(record)
        return record

    def run(self) -> Individual:
        if not self.population:
            self.initialize()
        for _ in range(self.params.generations - self.generation):
            self.step()
        return self.best


def run_ga(params: GAParams, train: Dataset, stopwords=None) -> tuple:
    """Search for the best configuration on ``train``; returns ``(best_config, trace)``."""
    holdout_seed = params.seed if params.holdout_seed is None else params.holdout_seed
    evaluator = FitnessEvaluator(train, holdout_seed, params.holdout_fraction, stopwords)
    opt = CHCOptimizer(params, evaluator)
    best = opt.run()
    opt.trace.holdout_seed = holdout_seed
    opt.trace.final_fitness = best.fitness
    return decode(best.genes), opt.trace
