"""Phrase indexing over noisy transcripts.

Transcripts arrive with large word error rates, so phrases are matched
fuzzily: per-word normalized Levenshtein similarity, averaged over the
phrase, against a curated theme list or per-line slide text.
"""
from __future__ import annotations

import csv
import string
from dataclasses import dataclass
from pathlib import Path

from .errors import IoFailure, MalformedLine, NonMonotonicTimestamps

# every word must clear this floor before the phrase mean is considered
WORD_SIMILARITY_FLOOR = 0.5

_PUNCT = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class TimedToken:
    word: str
    t_start: float
    t_end: float


@dataclass(frozen=True)
class PhraseList:
    kind: str  # theme | topic
    phrases: tuple

    def __post_init__(self):
        if self.kind not in ("theme", "topic"):
            raise ValueError(f"kind must be theme or topic, got {self.kind!r}")


@dataclass(frozen=True)
class PhraseHit:
    phrase: str
    kind: str
    t_start: float
    t_end: float
    score: float


def normalize_word(word: str) -> str:
    return word.strip().lower().translate(_PUNCT)


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[len(b)]


def word_similarity(a: str, b: str) -> float:
    """1 - levenshtein/max_length, in [0, 1]; empty vs empty is 1."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def load_transcript(path, duration_s: float | None = None, words_per_second: float = 2.0) -> list[TimedToken]:
    """Read word,t_start,t_end rows; plain text falls back to spread timestamps.

    A file whose rows do not carry numeric times is treated as whole text and
    its tokens are spread uniformly, over duration_s when given, else at
    words_per_second.
    """
    text = Path(path).read_text()
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        return []

    def parse_row(line: str):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            return None
        try:
            return parts[0], float(parts[1]), float(parts[2])
        except ValueError:
            return None

    timed = parse_row(rows[0]) is not None
    tokens: list[TimedToken] = []
    if timed:
        for lineno, line in enumerate(rows, start=1):
            parsed = parse_row(line)
            if parsed is None:
                raise MalformedLine(f"{path}:{lineno}: expected word,t_start,t_end")
            word, t_start, t_end = parsed
            word = normalize_word(word)
            if not t_start < t_end:
                raise MalformedLine(f"{path}:{lineno}: empty interval {t_start}..{t_end}")
            if tokens and t_start < tokens[-1].t_start:
                raise NonMonotonicTimestamps(f"{path}:{lineno}: rows not ordered by t_start")
            if word:
                tokens.append(TimedToken(word=word, t_start=t_start, t_end=t_end))
        return tokens

    words = [normalize_word(w) for w in text.split()]
    words = [w for w in words if w]
    if not words:
        return []
    spacing = duration_s / len(words) if duration_s else 1.0 / words_per_second
    return [
        TimedToken(word=w, t_start=i * spacing, t_end=(i + 1) * spacing)
        for i, w in enumerate(words)
    ]


def load_phrase_list(path, kind: str) -> PhraseList:
    """One phrase per line; blanks dropped, lowercased, first occurrence kept."""
    seen = {}
    for line in Path(path).read_text().splitlines():
        phrase = line.strip().lower()
        if phrase and phrase not in seen:
            seen[phrase] = None
    return PhraseList(kind=kind, phrases=tuple(seen))


def load_slide_phrases(path) -> PhraseList:
    """Slide source text: each line becomes one topic phrase."""
    return load_phrase_list(path, kind="topic")


def default_theme_list() -> PhraseList:
    """The bundled presentation-structure phrase list."""
    return load_phrase_list(Path(__file__).parent / "data" / "theme_phrases.txt", kind="theme")


def filter_phrases(
    tokens: list[TimedToken], phrase_list: PhraseList, threshold: float = 0.75
) -> list[PhraseHit]:
    """Slide each phrase over the token stream and keep windows that match.

    A window matches when every word's similarity is at least 0.5 and the
    mean reaches the threshold. Overlapping windows for one phrase keep the
    best score, earliest on ties. Hits are returned in time order.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    hits: list[PhraseHit] = []
    for phrase in phrase_list.phrases:
        words = [normalize_word(w) for w in phrase.split()]
        words = [w for w in words if w]
        if not words or len(tokens) < len(words):
            continue
        span = len(words)
        candidates = []
        for start in range(len(tokens) - span + 1):
            sims = [
                word_similarity(tokens[start + k].word, words[k]) for k in range(span)
            ]
            if min(sims) < WORD_SIMILARITY_FLOOR:
                continue
            score = sum(sims) / span
            if score >= threshold - 1e-12:
                candidates.append((start, score))
        candidates.sort(key=lambda c: (-c[1], c[0]))
        taken: list[tuple[int, float]] = []
        for start, score in candidates:
            if all(start + span <= s or s + span <= start for s, _ in taken):
                taken.append((start, score))
        for start, score in taken:
            hits.append(
                PhraseHit(
                    phrase=phrase,
                    kind=phrase_list.kind,
                    t_start=tokens[start].t_start,
                    t_end=tokens[start + span - 1].t_end,
                    score=score,
                )
            )
    hits.sort(key=lambda h: (h.t_start, h.phrase))
    return hits


def write_hits_csv(path, hits: list[PhraseHit]) -> None:
    """Hit export: kind,phrase,t_start,t_end,score."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "phrase", "t_start", "t_end", "score"])
            for h in hits:
                writer.writerow([h.kind, h.phrase, repr(h.t_start), repr(h.t_end), repr(h.score)])
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def read_hits_csv(path) -> list[PhraseHit]:
    hits = []
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            if not row:
                continue
            kind, phrase, t_start, t_end, score = row
            hits.append(
                PhraseHit(
                    phrase=phrase,
                    kind=kind,
                    t_start=float(t_start),
                    t_end=float(t_end),
                    score=float(score),
                )
            )
    return hits
