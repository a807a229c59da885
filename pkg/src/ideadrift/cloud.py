"""Windowed idea clouds: replay the post log, emit per-post eccentricities.

Every user owns a knowledge base holding the vectors of posts made by their
ego neighborhood (themselves plus followees) within the trailing window
(default 5 days). A post's eccentricity is the L2 distance of its vector from
the centroid of the author's knowledge base as it stood strictly before the
post; self-eccentricity uses only the author's own posts in the same window.
A post whose cloud is empty gets an undefined (None) value rather than 0.
"""

from __future__ import annotations

import csv
import itertools
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import Corpus, ego_neighborhood
from .errors import DataFormatError, EmptyCloudError

DEFAULT_WINDOW_SECONDS = 5 * 86400

RECORD_FIELDS = ("post_id", "author", "created_at", "likes", "eccentricity",
                 "self_eccentricity", "cloud_size", "self_cloud_size")


@dataclass(frozen=True, slots=True)
class EccentricityRecord:
    post_id: str
    author: str
    created_at: int
    likes: int
    eccentricity: float | None
    self_eccentricity: float | None
    cloud_size: int
    self_cloud_size: int


class KnowledgeBase:
    """Time-ordered window of (post_id, created_at, vector) with a running sum.

    Entries expire once they are strictly older than the window relative to
    the clock passed to :meth:`expire`. The running sum is reset exactly when
    the base empties, so incremental float error cannot outlive a window.
    """

    __slots__ = ("owner", "window_seconds", "entries", "running_sum", "count")

    def __init__(self, owner: str, window_seconds: int, dim: int):
        self.owner = owner
        self.window_seconds = window_seconds
        self.entries: deque[tuple[str, int, np.ndarray]] = deque()
        self.running_sum = np.zeros(dim)
        self.count = 0

    def expire(self, now: int) -> None:
        cutoff = now - self.window_seconds
        while self.entries and self.entries[0][1] < cutoff:
            _, _, vec = self.entries.popleft()
            self.running_sum -= vec
            self.count -= 1
        if self.count == 0:
            self.running_sum[:] = 0.0

    def add(self, post_id: str, created_at: int, vec: np.ndarray) -> None:
        self.entries.append((post_id, created_at, vec))
        self.running_sum += vec
        self.count += 1


def centroid(kb: KnowledgeBase) -> np.ndarray:
    """Mean vector of the knowledge base; raises EmptyCloudError when empty."""
    if kb.count == 0:
        raise EmptyCloudError(f"knowledge base of {kb.owner!r} is empty")
    return kb.running_sum / kb.count


def _distance_or_none(vec: np.ndarray, kb: KnowledgeBase) -> float | None:
    if kb.count == 0:
        return None
    return float(np.linalg.norm(vec - centroid(kb)))


def replay_with_state(
    corpus: Corpus,
    vectors: dict[str, np.ndarray],
    window_seconds: int = DEFAULT_WINDOW_SECONDS,
) -> tuple[list[EccentricityRecord], dict[str, KnowledgeBase], dict[str, KnowledgeBase]]:
    """Replay the corpus; also return the final neighborhood and self bases."""
    if window_seconds <= 0:
        raise DataFormatError(f"window_seconds must be positive, got {window_seconds}")
    dim: int | None = None
    for post in corpus.posts:
        vec = vectors.get(post.id)
        if vec is None:
            raise DataFormatError(f"no vector for post {post.id!r}")
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise DataFormatError(
                f"vector for post {post.id!r} has dimension {vec.shape[0]}, expected {dim}"
            )
    if dim is None:
        return [], {}, {}

    graph = corpus.graph
    # receivers[u]: owners whose knowledge base ingests u's posts
    receivers = {u: (u, *sorted(graph.in_neighbors(u))) for u in graph.users}
    bases = {u: KnowledgeBase(u, window_seconds, dim) for u in graph.users}
    self_bases = {u: KnowledgeBase(u, window_seconds, dim) for u in graph.users}

    records: list[EccentricityRecord] = []
    for now, group_iter in itertools.groupby(corpus.posts, key=lambda p: p.created_at):
        group = list(group_iter)
        # measure first: a post sees only strictly older posts
        for post in group:
            vec = vectors[post.id]
            kb = bases[post.author]
            kb.expire(now)
            own = self_bases[post.author]
            own.expire(now)
            records.append(EccentricityRecord(
                post_id=post.id,
                author=post.author,
                created_at=post.created_at,
                likes=post.likes,
                eccentricity=_distance_or_none(vec, kb),
                self_eccentricity=_distance_or_none(vec, own),
                cloud_size=kb.count,
                self_cloud_size=own.count,
            ))
        for post in group:
            vec = vectors[post.id]
            for owner in receivers[post.author]:
                kb = bases[owner]
                kb.expire(now)
                kb.add(post.id, now, vec)
            own = self_bases[post.author]
            own.expire(now)
            own.add(post.id, now, vec)
    return records, bases, self_bases


def replay(
    corpus: Corpus,
    vectors: dict[str, np.ndarray],
    window_seconds: int = DEFAULT_WINDOW_SECONDS,
) -> list[EccentricityRecord]:
    """Emit one EccentricityRecord per post, in (created_at, id) order."""
    records, _, _ = replay_with_state(corpus, vectors, window_seconds)
    return records


def eccentricity_oracle(
    corpus: Corpus,
    vectors: dict[str, np.ndarray],
    window_seconds: int,
    post_id: str,
) -> tuple[float | None, float | None]:
    """Recompute (eccentricity, self_eccentricity) for one post by direct scan.

    Holds no incremental state: filters the whole post log by neighborhood
    membership and the half-open window [t - window, t).
    """
    target = next((p for p in corpus.posts if p.id == post_id), None)
    if target is None:
        raise DataFormatError(f"unknown post id {post_id!r}")
    neighborhood = ego_neighborhood(corpus.graph, target.author)
    t = target.created_at
    lo = t - window_seconds
    cloud = [vectors[p.id] for p in corpus.posts
             if lo <= p.created_at < t and p.author in neighborhood]
    own = [vectors[p.id] for p in corpus.posts
           if lo <= p.created_at < t and p.author == target.author]
    vec = vectors[target.id]
    ecc = float(np.linalg.norm(vec - np.mean(cloud, axis=0))) if cloud else None
    self_ecc = float(np.linalg.norm(vec - np.mean(own, axis=0))) if own else None
    return ecc, self_ecc


def write_records_csv(records: Iterable[EccentricityRecord], path: str | Path) -> None:
    """Write records as CSV; undefined eccentricities become empty fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_FIELDS)
        for r in records:
            writer.writerow([
                r.post_id, r.author, r.created_at, r.likes,
                "" if r.eccentricity is None else repr(r.eccentricity),
                "" if r.self_eccentricity is None else repr(r.self_eccentricity),
                r.cloud_size, r.self_cloud_size,
            ])


def read_records_csv(path: str | Path) -> list[EccentricityRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RECORD_FIELDS:
            raise DataFormatError(f"{path}: unexpected CSV header {reader.fieldnames}")
        for row in reader:
            records.append(EccentricityRecord(
                post_id=row["post_id"],
                author=row["author"],
                created_at=int(row["created_at"]),
                likes=int(row["likes"]),
                eccentricity=float(row["eccentricity"]) if row["eccentricity"] else None,
                self_eccentricity=(float(row["self_eccentricity"])
                                   if row["self_eccentricity"] else None),
                cloud_size=int(row["cloud_size"]),
                self_cloud_size=int(row["self_cloud_size"]),
            ))
    return records
