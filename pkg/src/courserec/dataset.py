"""Data model for students, courses and their ratings/grades.

Covers loading from the CSV layout, seeded synthetic generation, and the
course-stratified splits used by the fitness function and by cross-validation.
"""

from __future__ import annotations

import csv
import math
from fractions import Fraction
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

RATING_MIN, RATING_MAX = 1, 5
GRADE_MIN, GRADE_MAX = 0.0, 10.0

STUDENTS_FILE = "students.csv"
COURSES_FILE = "courses.csv"
RATINGS_FILE = "ratings.csv"
UNIVERSES_FILE = "universes.csv"
SPEC_FILE = "synthetic_spec.csv"
CONTENT_DIR = "content"


class DatasetError(ValueError):
    """Raised when dataset files or records violate the data model."""


def id_key(value: str) -> tuple:
    """Sort key giving numeric ids numeric order ("2" < "10")."""
    return (0, int(value), "") if value.isdigit() else (1, 0, value)


@dataclass(frozen=True)
class StudentRecord:
    student_id: str
    branch: int


@dataclass(frozen=True)
class CourseRecord:
    course_id: str
    knowledge_area: int
    professors: frozenset
    competences: frozenset
    content_file: str
    content: str = field(default="", repr=False, compare=True)


@dataclass(frozen=True)
class RatingEntry:
    student_id: str
    course_id: str
    rating: Optional[int] = None
    grade: Optional[float] = None


@dataclass(frozen=True)
class Universes:
    num_professors: int
    num_competences: int
    num_branches: int
    num_areas: int


@dataclass(frozen=True)
class Dataset:
    """Immutable dataset. Students and courses are kept sorted by id."""

    students: tuple
    courses: tuple
    entries: tuple
    universes: Universes

    def __post_init__(self):
        object.__setattr__(self, "students", tuple(sorted(self.students, key=lambda s: id_key(s.student_id))))
        object.__setattr__(self, "courses", tuple(sorted(self.courses, key=lambda c: id_key(c.course_id))))
        object.__setattr__(
            self, "entries", tuple(sorted(self.entries, key=lambda e: (id_key(e.student_id), id_key(e.course_id))))
        )
        validate(self)

    @property
    def num_students(self) -> int:
        return len(self.students)

    @property
    def num_courses(self) -> int:
        return len(self.courses)

    @cached_property
    def student_ids(self) -> tuple:
        return tuple(s.student_id for s in self.students)

    @cached_property
    def course_ids(self) -> tuple:
        return tuple(c.course_id for c in self.courses)

    @cached_property
    def student_index(self) -> dict:
        return {sid: i for i, sid in enumerate(self.student_ids)}

    @cached_property
    def course_index(self) -> dict:
        return {cid: j for j, cid in enumerate(self.course_ids)}

    @cached_property
    def ratings_matrix(self) -> np.ndarray:
        """S x C array of ratings, NaN where absent."""
        m = np.full((self.num_students, self.num_courses), np.nan)
        for e in self.entries:
            if e.rating is not None:
                m[self.student_index[e.student_id], self.course_index[e.course_id]] = e.rating
        m.setflags(write=False)
        return m

    @cached_property
    def grades_matrix(self) -> np.ndarray:
        """S x C array of grades, NaN where absent."""
        m = np.full((self.num_students, self.num_courses), np.nan)
        for e in self.entries:
            if e.grade is not None:
                m[self.student_index[e.student_id], self.course_index[e.course_id]] = e.grade
        m.setflags(write=False)
        return m

    def rated_entries(self) -> list:
        return [e for e in self.entries if e.rating is not None]

    def ratings_profile(self, student_id: str) -> dict:
        return {e.course_id: float(e.rating) for e in self.entries if e.student_id == student_id and e.rating is not None}

    def grades_profile(self, student_id: str) -> dict:
        return {e.course_id: float(e.grade) for e in self.entries if e.student_id == student_id and e.grade is not None}

    def student(self, student_id: str) -> StudentRecord:
        return self.students[self.student_index[student_id]]

    def course(self, course_id: str) -> CourseRecord:
        return self.courses[self.course_index[course_id]]

    def hide_ratings(self, pairs: Iterable) -> "Dataset":
        """Return a copy with the ratings of the given (student, course) pairs removed.

        Grades of those pairs stay as side information; entries left with
        neither rating nor grade are dropped.
        """
        hidden = set(pairs)
        entries = []
        for e in self.entries:
            if (e.student_id, e.course_id) in hidden:
                if e.grade is None:
                    continue
                e = replace(e, rating=None)
            entries.append(e)
        return Dataset(self.students, self.courses, tuple(entries), self.universes)


def validate(ds: Dataset) -> None:
    u = ds.universes
    if not ds.students or not ds.courses:
        raise DatasetError("dataset needs at least one student and one course")
    for name, value in vars(u).items():
        if value < 1:
            raise DatasetError(f"universe size {name} must be positive, got {value}")
    students = set()
    for s in ds.students:
        if s.student_id in students:
            raise DatasetError(f"duplicate student_id {s.student_id!r}")
        students.add(s.student_id)
        if not 1 <= s.branch <= u.num_branches:
            raise DatasetError(f"student {s.student_id!r}: branch {s.branch} outside 1..{u.num_branches}")
    courses = set()
    for c in ds.courses:
        if c.course_id in courses:
            raise DatasetError(f"duplicate course_id {c.course_id!r}")
        courses.add(c.course_id)
        if not 1 <= c.knowledge_area <= u.num_areas:
            raise DatasetError(f"course {c.course_id!r}: knowledge_area {c.knowledge_area} outside 1..{u.num_areas}")
        if not c.professors:
            raise DatasetError(f"course {c.course_id!r} has no professor")
        if any(not 0 <= p < u.num_professors for p in c.professors):
            raise DatasetError(f"course {c.course_id!r}: professor index outside 0..{u.num_professors - 1}")
        if any(not 0 <= t < u.num_competences for t in c.competences):
            raise DatasetError(f"course {c.course_id!r}: competence index outside 0..{u.num_competences - 1}")
    seen = set()
    for e in ds.entries:
        _check_entry(e, students, courses, seen)


def _check_entry(e: RatingEntry, students, courses, seen, where: str = "") -> None:
    if e.student_id not in students:
        raise DatasetError(f"{where}dangling reference to unknown student_id {e.student_id!r}")
    if e.course_id not in courses:
        raise DatasetError(f"{where}dangling reference to unknown course_id {e.course_id!r}")
    key = (e.student_id, e.course_id)
    if key in seen:
        raise DatasetError(f"{where}duplicate entry for student {e.student_id!r}, course {e.course_id!r}")
    seen.add(key)
    if e.rating is not None and not RATING_MIN <= e.rating <= RATING_MAX:
        raise DatasetError(f"{where}rating {e.rating} out of range {RATING_MIN}..{RATING_MAX}")
    if e.grade is not None and not GRADE_MIN <= e.grade <= GRADE_MAX:
        raise DatasetError(f"{where}grade {e.grade} out of range {GRADE_MIN}..{GRADE_MAX}")


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------

def _read_rows(path: Path, header: list) -> Iterable:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [h.strip() for h in first] != header:
            raise DatasetError(f"{path}:1: expected header {','.join(header)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def _parse_int(text: str, path: Path, line: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise DatasetError(f"{path}:{line}: column {column!r} is not an integer: {text!r}") from None


def _parse_indices(text: str, path: Path, line: int, column: str) -> frozenset:
    if not text:
        return frozenset()
    return frozenset(_parse_int(t.strip(), path, line, column) for t in text.split(";") if t.strip())


def load_dataset(students_path, courses_path, ratings_path, content_dir, universes_path=None) -> Dataset:
    """Load a dataset from its CSV files.

    ``universes_path`` defaults to ``universes.csv`` next to ``students_path``.
    Errors name the offending file and line.
    """
    students_path, courses_path, ratings_path = Path(students_path), Path(courses_path), Path(ratings_path)
    content_dir = Path(content_dir)
    universes_path = Path(universes_path) if universes_path else students_path.parent / UNIVERSES_FILE

    urows = list(_read_rows(universes_path, ["num_professors", "num_competences", "num_branches", "num_areas"]))
    if len(urows) != 1:
        raise DatasetError(f"{universes_path}: expected exactly one data row, got {len(urows)}")
    line, row = urows[0]
    universes = Universes(*(_parse_int(v, universes_path, line, "universes") for v in row))

    students = []
    for line, (sid, branch) in _read_rows(students_path, ["student_id", "branch"]):
        b = _parse_int(branch, students_path, line, "branch")
        if not 1 <= b <= universes.num_branches:
            raise DatasetError(f"{students_path}:{line}: branch {b} outside 1..{universes.num_branches}")
        students.append(StudentRecord(sid, b))

    courses = []
    header = ["course_id", "knowledge_area", "professors", "competences", "content_file"]
    for line, (cid, area, profs, comps, cfile) in _read_rows(courses_path, header):
        doc_path = content_dir / cfile
        try:
            content = doc_path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise DatasetError(f"{courses_path}:{line}: cannot read content doc {doc_path}: {exc}") from exc
        courses.append(
            CourseRecord(
                cid,
                _parse_int(area, courses_path, line, "knowledge_area"),
                _parse_indices(profs, courses_path, line, "professors"),
                _parse_indices(comps, courses_path, line, "competences"),
                cfile,
                content,
            )
        )

    sids = {s.student_id for s in students}
    cids = {c.course_id for c in courses}
    seen: set = set()
    entries = []
    for line, (sid, cid, rating, grade) in _read_rows(ratings_path, ["student_id", "course_id", "rating", "grade"]):
        r = _parse_int(rating, ratings_path, line, "rating") if rating else None
        try:
            g = float(grade) if grade else None
        except ValueError:
            raise DatasetError(f"{ratings_path}:{line}: column 'grade' is not a number: {grade!r}") from None
        entry = RatingEntry(sid, cid, r, g)
        _check_entry(entry, sids, cids, seen, where=f"{ratings_path}:{line}: ")
        entries.append(entry)

    try:
        return Dataset(tuple(students), tuple(courses), tuple(entries), universes)
    except DatasetError as exc:
        raise DatasetError(f"{students_path.parent}: {exc}") from exc


def load_dataset_dir(data_dir) -> Dataset:
    d = Path(data_dir)
    return load_dataset(d / STUDENTS_FILE, d / COURSES_FILE, d / RATINGS_FILE, d / CONTENT_DIR, d / UNIVERSES_FILE)


def _fmt_grade(g: float) -> str:
    return repr(float(g))


def save_dataset(ds: Dataset, out_dir) -> None:
    """Write ``ds`` in the layout read by :func:`load_dataset_dir`."""
    out = Path(out_dir)
    (out / CONTENT_DIR).mkdir(parents=True, exist_ok=True)
    u = ds.universes
    with open(out / UNIVERSES_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["num_professors", "num_competences", "num_branches", "num_areas"])
        w.writerow([u.num_professors, u.num_competences, u.num_branches, u.num_areas])
    with open(out / STUDENTS_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["student_id", "branch"])
        for s in ds.students:
            w.writerow([s.student_id, s.branch])
    with open(out / COURSES_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["course_id", "knowledge_area", "professors", "competences", "content_file"])
        for c in ds.courses:
            w.writerow(
                [
                    c.course_id,
                    c.knowledge_area,
                    ";".join(str(p) for p in sorted(c.professors)),
                    ";".join(str(t) for t in sorted(c.competences)),
                    c.content_file,
                ]
            )
            doc = out / CONTENT_DIR / c.content_file
            doc.parent.mkdir(parents=True, exist_ok=True)
            with open(doc, "w", encoding="utf-8", newline="") as dh:
                dh.write(c.content)
    with open(out / RATINGS_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["student_id", "course_id", "rating", "grade"])
        for e in ds.entries:
            w.writerow(
                [
                    e.student_id,
                    e.course_id,
                    "" if e.rating is None else e.rating,
                    "" if e.grade is None else _fmt_grade(e.grade),
                ]
            )


# --------------------------------------------------------------------------
# Synthetic generation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    students: int = 95
    courses: int = 63
    professors: int = 50
    competences: int = 30
    branches: int = 3
    areas: int = 8
    min_ratings: int = 20
    max_ratings: int = 40
    vocab_size: int = 500

    def check(self) -> None:
        for name in ("students", "courses", "professors", "competences", "branches", "areas", "vocab_size"):
            if getattr(self, name) < 1:
                raise DatasetError(f"synthetic spec: {name} must be positive")
        if not 0 <= self.min_ratings <= self.max_ratings:
            raise DatasetError("synthetic spec: need 0 <= min_ratings <= max_ratings")
        if self.max_ratings > self.courses:
            raise DatasetError(
                f"synthetic spec: max_ratings {self.max_ratings} exceeds the number of courses {self.courses}"
            )
        if self.max_ratings < 1:
            raise DatasetError("synthetic spec: every student needs at least one rating, max_ratings must be >= 1")


# Filler words mixed into generated documents; they appear in the default stopword list.
_FILLER = ("de", "la", "el", "en", "los", "las", "del", "y", "con", "para", "por", "una")


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """Generate a dataset with the real schema from ``seed``.

    Ratings and grades share a latent per-(student, course) preference. Course
    documents are drawn from per-area topic distributions, so courses of the
    same area are textually closer on average.
    """
    spec.check()
    rng = np.random.default_rng(seed)
    S, C = spec.students, spec.courses

    branches = rng.integers(1, spec.branches + 1, size=S)
    areas = rng.integers(1, spec.areas + 1, size=C)

    # professors and competences cluster by area
    prof_pool = [rng.permutation(spec.professors)[: max(2, spec.professors // spec.areas + 2)] for _ in range(spec.areas)]
    comp_pool = [
        rng.permutation(spec.competences)[: max(2, spec.competences // spec.areas + 3)] for _ in range(spec.areas)
    ]

    vocab = [f"kw{i:04d}" for i in range(spec.vocab_size)]
    global_topic = rng.dirichlet(np.full(spec.vocab_size, 0.5))
    area_topics = [rng.dirichlet(np.full(spec.vocab_size, 0.05)) for _ in range(spec.areas)]

    courses = []
    for j in range(C):
        a = int(areas[j])
        pool = prof_pool[a - 1]
        n_prof = int(rng.integers(1, min(3, len(pool)) + 1))
        profs = set(int(p) for p in rng.choice(pool, size=n_prof, replace=False))
        if rng.random() < 0.2:
            profs.add(int(rng.integers(spec.professors)))
        cpool = comp_pool[a - 1]
        n_comp = int(rng.integers(1, min(5, len(cpool)) + 1))
        comps = set(int(t) for t in rng.choice(cpool, size=n_comp, replace=False))
        if rng.random() < 0.3:
            comps.add(int(rng.integers(spec.competences)))
        length = int(rng.integers(60, 140))
        mix = 0.75 * area_topics[a - 1] + 0.25 * global_topic
        words = list(rng.choice(vocab, size=length, p=mix / mix.sum()))
        n_fill = length // 4
        words += list(rng.choice(_FILLER, size=n_fill))
        words = [words[k] for k in rng.permutation(len(words))]
        lines = [" ".join(words[k : k + 12]) for k in range(0, len(words), 12)]
        cid = str(j + 1)
        courses.append(
            CourseRecord(cid, a, frozenset(profs), frozenset(comps), f"course_{cid}.txt", "\n".join(lines) + "\n")
        )

    # latent preference: student/course factors + branch-area affinity + course bias
    dim = 3
    u = rng.normal(size=(S, dim))
    v = rng.normal(size=(C, dim))
    affinity = rng.normal(scale=0.8, size=(spec.branches, spec.areas))
    course_bias = rng.normal(scale=0.5, size=C)
    pref = (u @ v.T) / np.sqrt(dim) + affinity[branches - 1][:, areas - 1] + course_bias[None, :]
    spread = pref.std()
    pref = (pref - pref.mean()) / (spread if spread > 0 else 1.0)

    entries = []
    for i in range(S):
        n = int(rng.integers(max(1, spec.min_ratings), spec.max_ratings + 1))
        chosen = sorted(int(c) for c in rng.choice(C, size=n, replace=False))
        for j in chosen:
            p = pref[i, j]
            rating = int(np.clip(np.rint(3.0 + 1.1 * p + rng.normal(scale=0.6)), 1, 5))
            grade = None
            if rng.random() < 0.9:
                grade = float(np.clip(np.round(6.0 + 1.6 * p + rng.normal(scale=0.9), 1), 0.0, 10.0))
            entries.append(RatingEntry(str(i + 1), str(j + 1), rating, grade))

    students = tuple(StudentRecord(str(i + 1), int(branches[i])) for i in range(S))
    universes = Universes(spec.professors, spec.competences, spec.branches, spec.areas)
    return Dataset(students, tuple(courses), tuple(entries), universes)


def save_synthetic_spec(spec: SyntheticSpec, seed: int, out_dir) -> None:
    fields = list(vars(spec))
    with open(Path(out_dir) / SPEC_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields + ["seed"])
        w.writerow([getattr(spec, f) for f in fields] + [seed])


# --------------------------------------------------------------------------
# Splits
# --------------------------------------------------------------------------

def _by_course(ds: Dataset) -> dict:
    groups: dict = {}
    for e in ds.rated_entries():
        groups.setdefault(e.course_id, []).append(e)
    return groups


def split_holdout(ds: Dataset, test_fraction: float, seed: int):
    """Course-stratified hold-out split of the rated entries.

    Returns ``(train, test)`` where ``test`` lists ``(student_id, course_id, rating)``
    and ``train`` is ``ds`` with those ratings hidden. The test size is
    ``ceil(test_fraction * n_rated)``; each course contributes the floor or
    ceiling of its share. A course with a single rating always keeps it in
    train, so the target can be undershot on degenerate data.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    rated = ds.rated_entries()
    if len(rated) < 2:
        raise ValueError("split_holdout needs at least 2 rated entries")
    rng = np.random.default_rng(seed)
    groups = _by_course(ds)
    order = sorted(groups, key=id_key)

    frac = Fraction(str(test_fraction))  # exact arithmetic: 0.2 * 15 must be 3, not 3.0000000000000004
    target = math.ceil(frac * len(rated))
    quota = {}
    for cid in order:
        n = len(groups[cid])
        quota[cid] = 0 if n < 2 else math.floor(frac * n)
    remaining = target - sum(quota.values())
    # extra slots go to the largest fractional shares; a seeded key breaks ties
    tiebreak = rng.permutation(len(order))
    candidates = []
    for k, cid in enumerate(order):
        n = len(groups[cid])
        share = frac * n
        if n >= 2 and quota[cid] < share and quota[cid] + 1 < n:
            candidates.append((-(share - quota[cid]), int(tiebreak[k]), cid))
    for _, _, cid in sorted(candidates)[: max(0, remaining)]:
        quota[cid] += 1

    test = []
    for cid in order:
        members = groups[cid]
        perm = rng.permutation(len(members))
        for idx in perm[: quota[cid]]:
            e = members[int(idx)]
            test.append((e.student_id, e.course_id, e.rating))
    test.sort(key=lambda t: (id_key(t[0]), id_key(t[1])))
    train = ds.hide_ratings((s, c) for s, c, _ in test)
    return train, test


def stratified_folds(ds: Dataset, k: int, seed: int) -> list:
    """Partition the rated (student, course) pairs into ``k`` folds.

    Each course's ratings are shuffled and dealt round-robin, so its per-fold
    counts differ by at most one. The starting fold rotates from course to
    course to keep fold sizes balanced overall.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    folds = [set() for _ in range(k)]
    groups = _by_course(ds)
    start = 0
    for cid in sorted(groups, key=id_key):
        members = groups[cid]
        perm = rng.permutation(len(members))
        for pos, idx in enumerate(perm):
            e = members[int(idx)]
            folds[(start + pos) % k].add((e.student_id, e.course_id))
        start = (start + len(members)) % k
    return folds
