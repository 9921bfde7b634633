"""Text mining of course content documents."""

from __future__ import annotations

import math
import re
from collections import Counter
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

_TOKEN = re.compile(r"[^\W_]+")
MIN_TOKEN_LENGTH = 2


def load_stopwords(path=None) -> frozenset:
    """Read a stopword file: one token per line, ``#`` lines are comments.

    Without a path, the bundled default list is used.
    """
    if path is None:
        text = resources.files("courserec").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


def tokenize(document: str, stopwords: Iterable[str] = frozenset()) -> Counter:
    stop = {w.lower() for w in stopwords}
    # lower-case before splitting: some characters expand to non-alphanumerics when lowered
    tokens = _TOKEN.findall(document.lower())
    return Counter(t for t in tokens if len(t) >= MIN_TOKEN_LENGTH and t not in stop)


def content_similarity(a: Mapping[str, int], b: Mapping[str, int]) -> float:
    """Cosine of the l1-normalised frequency vectors over the pair's joint vocabulary."""
    if not a or not b:
        return 0.0
    vocab = sorted(a.keys() | b.keys())
    va = [a.get(t, 0) for t in vocab]
    vb = [b.get(t, 0) for t in vocab]
    na, nb = sum(va), sum(vb)
    va = [x / na for x in va]
    vb = [x / nb for x in vb]
    dot = math.fsum(x * y for x, y in zip(va, vb))
    norm = math.sqrt(math.fsum(x * x for x in va)) * math.sqrt(math.fsum(y * y for y in vb))
    return min(1.0, dot / norm)
