import csv
import json
import re
import subprocess
import sys

import pytest

from courserec.cli import fan_out, main
from courserec.dataset import load_dataset_dir
from courserec.recommender import load_config

SMALL = ["--students", "30", "--courses", "15", "--min-ratings", "4", "--max-ratings", "10"]


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["gen-data", "--out", str(out), "--seed", "7", *SMALL]) == 0
    return out


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    path.write_text(json.dumps({
        "hybrid": {"cf_weight": 0.54, "cbf_weight": 0.46},
        "cf": {"ratings_metric": "pearson", "grades_metric": "pearson", "ratings_weight": 0.6,
               "grades_weight": 0.3, "branch_weight": 0.1, "neighborhood_size": 15},
        "cbf": {"professors_metric": "jaccard", "competences_metric": "jaccard", "professors_weight": 0.65,
                "competences_weight": 0.0, "area_weight": 0.0, "contents_weight": 0.35},
    }))
    return path


def test_gen_data_defaults(tmp_path):
    assert main(["gen-data", "--out", str(tmp_path), "--seed", "7"]) == 0
    names = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert names == ["courses.csv", "ratings.csv", "students.csv", "synthetic_spec.csv", "universes.csv"]
    assert len(list((tmp_path / "content").iterdir())) == 63
    ds = load_dataset_dir(tmp_path)
    assert ds.num_students == 95 and ds.num_courses == 63


def test_gen_data_byte_identical(tmp_path):
    for run in ("a", "b"):
        assert main(["gen-data", "--out", str(tmp_path / run), "--seed", "7", *SMALL]) == 0
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes(), f


def test_gen_data_rejects_empty_spec(tmp_path, capsys):
    assert main(["gen-data", "--out", str(tmp_path), "--students", "0"]) != 0
    assert "error" in capsys.readouterr().err


def test_optimize_outputs(tmp_path, data_dir):
    out = tmp_path / "run"
    argv = ["optimize", "--data-dir", str(data_dir), "--out", str(out), "--generations", "50",
            "--population", "10", "--seed", "3"]
    assert main(argv) == 0
    rows = list(csv.DictReader(open(out / "trace.csv")))
    assert len(rows) == 50
    best = [float(r["best_fitness"]) for r in rows]
    assert all(b <= a for a, b in zip(best, best[1:]))
    cfg = load_config(out / "config.json")
    assert load_config(out / "config.json") == cfg
    assert (out / "phenotype_trace.csv").exists()
    # same seed, same bytes
    assert main(argv[:4] + [str(tmp_path / "again")] + argv[5:]) == 0
    assert (out / "trace.csv").read_bytes() == (tmp_path / "again" / "trace.csv").read_bytes()


def test_optimize_requires_data_dir(tmp_path):
    assert main(["optimize", "--out", str(tmp_path), "--generations", "1"]) == 2


def test_compare_rows_and_reproducibility(tmp_path, data_dir, config_path):
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for out in outs:
        assert main(["compare", "--data-dir", str(data_dir), "--config", str(config_path), "--out", str(out),
                     "--omit-time", "--seed", "1"]) == 0
    rows = list(csv.DictReader(open(outs[0])))
    assert len(rows) == 10
    assert rows[0]["approach"] == "Proposed hybrid RS"
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_evaluate_single_row(tmp_path, data_dir, config_path):
    out = tmp_path / "r.csv"
    assert main(["evaluate", "--data-dir", str(data_dir), "--config", str(config_path), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 1 and float(rows[0]["time_s"]) >= 0


def test_evaluate_one_fold_is_usage_error(tmp_path, data_dir, config_path):
    argv = ["evaluate", "--data-dir", str(data_dir), "--config", str(config_path), "--out", str(tmp_path / "x.csv"),
            "--folds", "1"]
    assert main(argv) == 2


def test_bad_config_is_reported(tmp_path, data_dir):
    bad = tmp_path / "bad.json"
    bad.write_text('{"hybrid": {}}')
    argv = ["evaluate", "--data-dir", str(data_dir), "--config", str(bad), "--out", str(tmp_path / "x.csv")]
    assert main(argv) == 1


def test_recommend_prints_list(data_dir, config_path, capsys):
    assert main(["recommend", "--data-dir", str(data_dir), "--config", str(config_path), "--student", "3"]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert re.fullmatch(r"\[\d+\(\d\.\d\d\), \d+\(\d\.\d\d\), \d+\(\d\.\d\d\)\]", line)


def test_recommend_unknown_student(data_dir, config_path):
    assert main(["recommend", "--data-dir", str(data_dir), "--config", str(config_path), "--student", "999"]) == 2


def test_recommend_back_test_csv(tmp_path, data_dir, config_path, capsys):
    ds = load_dataset_dir(data_dir)
    hidden = sorted(ds.ratings_profile("3"), key=int)[:3]
    out = tmp_path / "case.csv"
    argv = ["recommend", "--data-dir", str(data_dir), "--config", str(config_path), "--student", "3",
            "--hidden", ",".join(hidden), "--out", str(out)]
    assert main(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "course_id,real_rating,estimated_rating,relevant,recommended"
    assert len(lines) == 4


def test_recommend_hidden_needs_out(data_dir, config_path):
    argv = ["recommend", "--data-dir", str(data_dir), "--config", str(config_path), "--student", "3", "--hidden", "1"]
    assert main(argv) == 2


def test_recommend_all_rated_gives_empty_list(tmp_path, config_path, capsys):
    out = tmp_path / "full"
    # every student rates every course
    assert main(["gen-data", "--out", str(out), "--students", "5", "--courses", "4", "--min-ratings", "4",
                 "--max-ratings", "4"]) == 0
    assert main(["recommend", "--data-dir", str(out), "--config", str(config_path), "--student", "1"]) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1] == "[]"


def test_fan_out_deterministic_and_distinct():
    assert fan_out(7, 3) == fan_out(7, 3)
    assert len(set(fan_out(7, 3))) == 3
    assert fan_out(7, 2) != fan_out(8, 2)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "courserec", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("gen-data", "optimize", "evaluate", "compare", "recommend"):
        assert cmd in res.stdout
