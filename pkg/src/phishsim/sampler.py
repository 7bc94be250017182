"""Target selection: FollowerRank, banding, sampling, pseudonyms.

The pseudonym registry is the privacy boundary of the whole simulator:
raw handles live only inside run memory, every exported artifact refers
to accounts by a keyed-hash token.
"""

from __future__ import annotations

import csv
import hashlib
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .simcore import AccountProfile, FlowBuffer


def follower_rank(followers: int, following: int) -> float:
    """Audience relevance: followers / (followers + following).

    Defined as 0.0 for an account with no edges at all.
    """
    if followers < 0 or following < 0:
        raise ValueError("follower counts must be non-negative")
    total = followers + following
    if total == 0:
        return 0.0
    return followers / total


@dataclass
class RankBanding:
    """Partition of [0, 1] into half-open bands; the last band is closed."""

    boundaries: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

    def __post_init__(self):
        b = self.boundaries
        if len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0 or any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("boundaries must ascend strictly from 0.0 to 1.0")

    @property
    def band_count(self) -> int:
        return len(self.boundaries) - 1

    def assign_band(self, rank: float) -> int:
        if not (0.0 <= rank <= 1.0):
            raise ValueError(f"rank {rank} outside [0,1]")
        if rank == 1.0:
            return self.band_count - 1
        return bisect_right(self.boundaries, rank) - 1


class PseudonymRegistry:
    """Injective handle -> hex token map, keyed by a per-run secret.

    The mapping stays in memory; nothing here ever writes a raw handle
    to disk. Same (handle, secret) always yields the same token.
    """

    def __init__(self, run_secret: str, digest_size: int = 8):
        self._key = run_secret.encode("utf-8")[:64]
        self._digest_size = digest_size
        self._forward: dict[str, str] = {}
        self._reverse: dict[str, str] = {}

    def __contains__(self, pseudonym: str) -> bool:
        return pseudonym in self._reverse

    def pseudonym(self, handle: str) -> str:
        tok = self._forward.get(handle)
        if tok is None:
            tok = hashlib.blake2b(
                handle.encode("utf-8"), key=self._key, digest_size=self._digest_size
            ).hexdigest()
            other = self._reverse.get(tok)
            if other is not None and other != handle:
                raise RuntimeError("pseudonym collision; use a longer digest")
            self._forward[handle] = tok
            self._reverse[tok] = handle
        return tok

    def knows(self, pseudonym: str) -> bool:
        return pseudonym in self._reverse

    def handle_of(self, pseudonym: str) -> Optional[str]:
        """Run-memory reverse lookup; used only to place on-platform mentions."""
        return self._reverse.get(pseudonym)

    def issued(self) -> set[str]:
        return set(self._reverse)


@dataclass
class TargetRecord:
    pseudonym: str
    follower_rank: float
    band: int
    theme: str
    followers_count: int
    following_count: int
    post_count: int
    age_days: float
    location_tag: Optional[str] = None
    stimulated_at: Optional[int] = None


@dataclass
class SamplingPolicy:
    skip_fraction: float = 0.0
    banding: RankBanding = field(default_factory=RankBanding)

    def __post_init__(self):
        if not (0.0 <= self.skip_fraction <= 1.0):
            raise ValueError("skip_fraction must be in [0,1]")


class TargetSampler:
    """Drains flow buffers into deduplicated, pseudonymized target records.

    Pass a shared ``seen`` set to enforce at-most-one-stimulus-per-account
    across several samplers in the same campaign.
    """

    def __init__(self, registry: PseudonymRegistry, policy: SamplingPolicy, seed: int,
                 seen: Optional[set[str]] = None):
        self.registry = registry
        self.policy = policy
        self._rng = random.Random(f"sampler:{seed}")
        self._seen: set[str] = seen if seen is not None else set()

    def sample_targets(self, buffer: FlowBuffer, accounts: dict[str, AccountProfile],
                       now: int) -> list[TargetRecord]:
        """Consume the buffer, keeping each account at most once per campaign.

        Bot authors are never targets. With ``skip_fraction`` p, each new
        candidate is independently dropped with probability p.
        """
        out: list[TargetRecord] = []
        for tweet in buffer.drain():
            handle = tweet.author
            if handle in self._seen:
                continue
            self._seen.add(handle)
            account = accounts.get(handle)
            if account is None or account.is_bot:
                continue
            if self.policy.skip_fraction > 0.0 and self._rng.random() < self.policy.skip_fraction:
                continue
            rank = follower_rank(account.followers_count, account.following_count)
            out.append(
                TargetRecord(
                    pseudonym=self.registry.pseudonym(handle),
                    follower_rank=rank,
                    band=self.policy.banding.assign_band(rank),
                    theme=account.theme_affinity,
                    followers_count=account.followers_count,
                    following_count=account.following_count,
                    post_count=account.post_count,
                    age_days=max(0.0, (now - account.created_at) / 86400.0),
                    location_tag=account.location_tag,
                )
            )
        return out


# ---------------------------------------------------------------------------
# CSV export: the profiler's input contract

TARGET_CSV_HEADER = (
    "pseudonym,follower_rank,band,theme,followers,following,posts,age_days,location"
)


def write_targets_csv(path, targets: Iterable[TargetRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(TARGET_CSV_HEADER.split(","))
        for t in targets:
            w.writerow(
                [
                    t.pseudonym,
                    repr(t.follower_rank),
                    t.band,
                    t.theme,
                    t.followers_count,
                    t.following_count,
                    t.post_count,
                    repr(t.age_days),
                    t.location_tag or "",
                ]
            )
            n += 1
    return n


def read_targets_csv(path) -> list[TargetRecord]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != TARGET_CSV_HEADER.split(","):
            raise ValueError(f"unexpected target CSV header: {reader.fieldnames}")
        for row in reader:
            out.append(
                TargetRecord(
                    pseudonym=row["pseudonym"],
                    follower_rank=float(row["follower_rank"]),
                    band=int(row["band"]),
                    theme=row["theme"],
                    followers_count=int(row["followers"]),
                    following_count=int(row["following"]),
                    post_count=int(row["posts"]),
                    age_days=float(row["age_days"]),
                    location_tag=row["location"] or None,
                )
            )
    return out
