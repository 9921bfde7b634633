"""Command-line entry point.

Usage::

    courserec gen-data  --out data/ --seed 7
    courserec optimize  --data-dir data/ --out runs/ --generations 50 --population 20 --seed 7
    courserec evaluate  --data-dir data/ --config runs/config.json --out report.csv
    courserec compare   --data-dir data/ --config runs/config.json --out ablation.csv
    courserec recommend --data-dir data/ --config runs/config.json --student 14 --hidden 1,6,8
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset as dsmod
from .content import load_stopwords
from .evaluation import (
    case_study,
    compare_ablations,
    cross_validate,
    format_recommendations,
    write_case_study_csv,
    write_report_csv,
)
from .ga import GAParams, run_ga
from .recommender import ConfigError, CriteriaCache, HybridRecommender, load_config, save_config

log = logging.getLogger("courserec")


class UsageError(Exception):
    pass


def fan_out(seed: int, n: int) -> list:
    """Derive ``n`` independent component seeds from one master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise UsageError(message)


def _stopwords(args):
    return load_stopwords(args.stopwords) if args.stopwords else load_stopwords()


def _load_data(args) -> dsmod.Dataset:
    _require(args.data_dir is not None, "--data-dir is required")
    _require(Path(args.data_dir).is_dir(), f"--data-dir {args.data_dir} is not a directory")
    return dsmod.load_dataset_dir(args.data_dir)


def cmd_gen_data(args) -> int:
    spec = dsmod.SyntheticSpec(
        students=args.students,
        courses=args.courses,
        professors=args.professors,
        competences=args.competences,
        branches=args.branches,
        areas=args.areas,
        min_ratings=args.min_ratings,
        max_ratings=args.max_ratings,
        vocab_size=args.vocab_size,
    )
    _require(args.out is not None, "--out is required")
    try:
        spec.check()
    except dsmod.DatasetError as exc:
        raise UsageError(str(exc)) from None
    ds = dsmod.generate_synthetic(spec, args.seed)
    out = Path(args.out)
    dsmod.save_dataset(ds, out)
    dsmod.save_synthetic_spec(spec, args.seed, out)
    dsmod.load_dataset_dir(out)  # validate what was written
    print(f"wrote {out}: {ds.num_students} students, {ds.num_courses} courses, {len(ds.entries)} entries")
    return 0


def cmd_optimize(args) -> int:
    _require(args.out is not None, "--out is required")
    _require(args.generations >= 0, "--generations must be >= 0")
    _require(args.population >= 1, "--population must be >= 1")
    _require(0 < args.crossover_prob <= 1, "--crossover-prob must lie in (0, 1]")
    ds = _load_data(args)
    ga_seed, holdout_seed = fan_out(args.seed, 2)
    params = GAParams(
        generations=args.generations,
        population_size=args.population,
        crossover_probability=args.crossover_prob,
        initial_incest_threshold=args.incest_threshold,
        seed=ga_seed,
        holdout_seed=holdout_seed,
        threads=args.threads,
    )
    best, trace = run_ga(params, ds, _stopwords(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(best, out / "config.json")
    trace.write_csv(out / "trace.csv")
    trace.write_phenotype_csv(out / "phenotype_trace.csv")
    load_config(out / "config.json")
    print(f"best RMSE {trace.final_fitness:.4f} after {args.generations} generations; wrote {out}")
    return 0


def _evaluate(args, compare: bool) -> int:
    _require(args.config is not None, "--config is required")
    _require(args.out is not None, "--out is required")
    _require(args.folds >= 2, "--folds must be >= 2")
    cfg = load_config(args.config)
    ds = _load_data(args)
    (cv_seed,) = fan_out(args.seed, 1)
    if compare:
        reports = compare_ablations(ds, cfg, args.folds, cv_seed, _stopwords(args))
    else:
        reports = [cross_validate(ds, cfg, args.folds, cv_seed, stopwords=_stopwords(args))]
    write_report_csv(reports, args.out, include_time=not args.omit_time)
    for r in reports:
        rm = "n/a" if r.rmse is None else f"{r.rmse:.3f}"
        nd = "n/a" if r.ndcg is None else f"{r.ndcg:.3f}"
        print(f"{r.approach:<36} rmse={rm} ndcg={nd} reach={r.reach_pct:.2f}% time={r.time_s:.4f}s")
    return 0


def cmd_evaluate(args) -> int:
    return _evaluate(args, compare=False)


def cmd_compare(args) -> int:
    return _evaluate(args, compare=True)


def cmd_recommend(args) -> int:
    _require(args.config is not None, "--config is required")
    _require(args.student is not None, "--student is required")
    _require(args.top_n >= 1, "--top-n must be >= 1")
    hidden = [c.strip() for c in args.hidden.split(",") if c.strip()] if args.hidden else []
    _require(not hidden or args.out is not None, "--hidden needs --out for the back-test CSV")
    cfg = load_config(args.config)
    ds = _load_data(args)
    if args.student not in ds.student_index:
        raise UsageError(f"unknown student {args.student!r}")
    for c in hidden:
        if c not in ds.course_index:
            raise UsageError(f"unknown course {c!r} in --hidden")
    stop = _stopwords(args)
    if hidden:
        try:
            rows, recs = case_study(ds, cfg, args.student, hidden, args.top_n, stop)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        write_case_study_csv(rows, args.out)
    else:
        recs = HybridRecommender(ds, cfg, CriteriaCache(ds, stop)).recommend(args.student, args.top_n)
    if not recs:
        log.warning("student %s has no unrated course left to recommend", args.student)
    print(format_recommendations(recs))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="courserec", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=1)
        if data:
            p.add_argument("--data-dir", default=None)
            p.add_argument("--stopwords", default=None, help="stopword file (default: bundled list)")

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    common(p, data=False)
    defaults = dsmod.SyntheticSpec()
    p.add_argument("--students", type=int, default=defaults.students)
    p.add_argument("--courses", type=int, default=defaults.courses)
    p.add_argument("--professors", type=int, default=defaults.professors)
    p.add_argument("--competences", type=int, default=defaults.competences)
    p.add_argument("--branches", type=int, default=defaults.branches)
    p.add_argument("--areas", type=int, default=defaults.areas)
    p.add_argument("--min-ratings", type=int, default=defaults.min_ratings)
    p.add_argument("--max-ratings", type=int, default=defaults.max_ratings)
    p.add_argument("--vocab-size", type=int, default=defaults.vocab_size)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("optimize", help="search a configuration with the genetic algorithm")
    common(p)
    ga = GAParams()
    p.add_argument("--generations", type=int, default=ga.generations)
    p.add_argument("--population", type=int, default=ga.population_size)
    p.add_argument("--crossover-prob", type=float, default=ga.crossover_probability)
    p.add_argument("--incest-threshold", type=int, default=ga.initial_incest_threshold)
    p.set_defaults(func=cmd_optimize)

    for name, func, text in (
        ("evaluate", cmd_evaluate, "cross-validate one configuration"),
        ("compare", cmd_compare, "cross-validate the ten engine/criterion variants"),
    ):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--config", default=None)
        p.add_argument("--folds", type=int, default=5)
        p.add_argument("--omit-time", action="store_true", help="leave time_s blank so reports are byte-reproducible")
        p.set_defaults(func=func)

    p = sub.add_parser("recommend", help="top-N courses for one student")
    common(p)
    p.add_argument("--config", default=None)
    p.add_argument("--student", default=None)
    p.add_argument("--top-n", type=int, default=3)
    p.add_argument("--hidden", default=None, help="comma-separated course ids to hide and back-test")
    p.set_defaults(func=cmd_recommend)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (dsmod.DatasetError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
