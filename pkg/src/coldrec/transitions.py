"""Transition tensor and confidence-weighted triplet construction.

A transition (u, i, j) is counted when article j was clicked immediately
after article i by user u, the gap between the two clicks is at most the
session window (default 1800 s, boundary inclusive), and i != j. Each
distinct (u, i, j) becomes one training triplet whose confidence is
1.0 + 0.1 * (count of that (i, j) move summed over all users).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyInputError
from .mind import ClickStream

DEFAULT_WINDOW_SECONDS = 1800


@dataclass(frozen=True)
class Triplet:
    user: str
    last_article: str
    next_article: str
    confidence: float


@dataclass
class TransitionTensor:
    """Sparse (user, last article, next article) -> count mapping."""

    entries: dict[tuple[str, str, str], int]
    window_seconds: int = DEFAULT_WINDOW_SECONDS

    def __len__(self) -> int:
        return len(self.entries)


class TripletSet:
    """Triplets plus dense index maps for users and articles.

    Index maps are bijections onto 0..n-1 assigned in first-appearance order
    over the triplet sequence (last article before next article within each
    triplet), so a persisted and reloaded set reproduces identical indices.
    """

    def __init__(self, triplets, users=None, articles=None):
        self.triplets: list[Triplet] = list(triplets)
        if users is None or articles is None:
            users = {}
            articles = {}
            for t in self.triplets:
                users.setdefault(t.user, len(users))
                articles.setdefault(t.last_article, len(articles))
                articles.setdefault(t.next_article, len(articles))
        self.users: dict[str, int] = users
        self.articles: dict[str, int] = articles

    @property
    def user_ids(self) -> list[str]:
        return list(self.users)

    @property
    def article_ids(self) -> list[str]:
        return list(self.articles)

    def __len__(self) -> int:
        return len(self.triplets)

    def __iter__(self):
        return iter(self.triplets)


def build_tensor(streams, window_seconds: int = DEFAULT_WINDOW_SECONDS) -> TransitionTensor:
    """Count qualifying consecutive click pairs for every user.

    Equal timestamps (clicks inside one impression) have gap 0 and qualify,
    ordered by within-impression rank. Self-transitions and pairs exceeding
    the window contribute nothing but do not break the stream.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive, got %r" % window_seconds)
    entries: dict[tuple[str, str, str], int] = {}
    for stream in streams:
        events = stream.events
        for prev, cur in zip(events, events[1:]):
            if cur.timestamp - prev.timestamp > window_seconds:
                continue
            if prev.news == cur.news:
                continue
            key = (stream.user, prev.news, cur.news)
            entries[key] = entries.get(key, 0) + 1
    return TransitionTensor(entries=entries, window_seconds=window_seconds)


def build_triplets(tensor: TransitionTensor) -> TripletSet:
    """One triplet per distinct tensor entry, confidence-weighted by the global (i, j) count."""
    if not tensor.entries:
        raise EmptyInputError("transition tensor is empty")
    global_counts: dict[tuple[str, str], int] = {}
    for (_, last, nxt), count in tensor.entries.items():
        pair = (last, nxt)
        global_counts[pair] = global_counts.get(pair, 0) + count
    triplets = [
        Triplet(
            user=user,
            last_article=last,
            next_article=nxt,
            confidence=1.0 + 0.1 * global_counts[(last, nxt)],
        )
        for (user, last, nxt) in tensor.entries
    ]
    return TripletSet(triplets)


def transition_sessions(stream: ClickStream, window_seconds: int = DEFAULT_WINDOW_SECONDS):
    """Partition a stream into maximal runs with consecutive gaps <= window_seconds.

    Runs shorter than 2 clicks are discarded (they can produce no transitions).
    """
    sessions = []
    run = []
    for event in stream.events:
        if run and event.timestamp - run[-1].timestamp > window_seconds:
            if len(run) >= 2:
                sessions.append(run)
            run = []
        run.append(event)
    if len(run) >= 2:
        sessions.append(run)
    return sessions


def save_triplets(triplet_set: TripletSet, path) -> None:
    """Dump one `user<TAB>i<TAB>j<TAB>confidence` line per triplet."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for t in triplet_set:
            fh.write(
                "%s\t%s\t%s\t%s\n" % (t.user, t.last_article, t.next_article, repr(t.confidence))
            )


def load_triplets(path) -> TripletSet:
    triplets = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 4:
                raise ValueError("%s: line %d: expected 4 columns" % (path, lineno))
            triplets.append(
                Triplet(
                    user=cols[0],
                    last_article=cols[1],
                    next_article=cols[2],
                    confidence=float(cols[3]),
                )
            )
    return TripletSet(triplets)
