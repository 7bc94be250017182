"""Deterministic microblogging platform core.

Single-threaded event loop over an integer second clock. Accounts post
tweets, keyword subscriptions feed bounded FIFO buffers, and every event
fires in (timestamp, insertion order). For a fixed (scenario, seed) the
whole event history is byte-identical across runs.
"""

from __future__ import annotations

import heapq
import json
import re
import unicodedata
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

THEMES = ("politics", "sports", "entertainment")

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Casefolded word tokens of *text* after Unicode normalization."""
    return _TOKEN_RE.findall(unicodedata.normalize("NFC", text).casefold())


def match_keywords(text: str, keywords: Iterable[str]) -> list[str]:
    """Keywords present in *text* as whole tokens, case-insensitive.

    Returned in the order they appear in *keywords* so results are stable.
    """
    tokens = frozenset(tokenize(text))
    return [k for k in keywords if k.casefold() in tokens]


# ---------------------------------------------------------------------------
# Clock and event scheduling


class SimClock:
    """Integer-second simulated clock, monotonically non-decreasing."""

    def __init__(self, start: int = 0, step: int = 1):
        if step <= 0:
            raise ValueError("clock step must be positive")
        self.now = int(start)
        self.step = int(step)

    def hour_of_day(self) -> int:
        return (self.now // 3600) % 24


class EventScheduler:
    """Priority queue of timed callbacks; ties fire in insertion order."""

    def __init__(self, clock: SimClock):
        self.clock = clock
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = 0

    def schedule(self, at: int, fn: Callable[[], None]) -> None:
        if at < self.clock.now:
            raise ValueError(f"cannot schedule event in the past ({at} < {self.clock.now})")
        heapq.heappush(self._heap, (int(at), self._seq, fn))
        self._seq += 1

    def schedule_in(self, delay: int, fn: Callable[[], None]) -> None:
        self.schedule(self.clock.now + int(delay), fn)

    def advance_clock(self, delta_seconds: int) -> int:
        """Advance by *delta_seconds*, firing every due event in order.

        Returns the number of events fired. Events scheduled while firing
        are interleaved at their own timestamps.
        """
        if delta_seconds <= 0:
            raise ValueError("delta_seconds must be positive")
        target = self.clock.now + int(delta_seconds)
        fired = 0
        while self._heap and self._heap[0][0] <= target:
            at, _, fn = heapq.heappop(self._heap)
            self.clock.now = at
            fn()
            fired += 1
        self.clock.now = target
        return fired


# ---------------------------------------------------------------------------
# Domain records


@dataclass
class AccountProfile:
    handle: str
    followers_count: int
    following_count: int
    post_count: int
    created_at: int
    theme_affinity: str
    location_tag: Optional[str] = None
    is_bot: bool = False

    def __post_init__(self):
        if min(self.followers_count, self.following_count, self.post_count) < 0:
            raise ValueError(f"negative count on account {self.handle!r}")
        if self.theme_affinity not in THEMES:
            raise ValueError(f"unknown theme {self.theme_affinity!r}")


@dataclass
class TweetRecord:
    author: str
    text: str
    mentions: list[str]
    link: Optional[str]
    matched_keywords: list[str]
    posted_at: int
    theme: str


@dataclass
class FlowBuffer:
    """Bounded FIFO of tweets; a push on a full buffer evicts the oldest."""

    capacity: int
    entries: deque = field(default_factory=deque)
    dropped_count: int = 0

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("buffer capacity must be positive")

    def push(self, tweet: TweetRecord) -> None:
        if len(self.entries) >= self.capacity:
            self.entries.popleft()
            self.dropped_count += 1
        self.entries.append(tweet)

    def drain(self) -> list[TweetRecord]:
        out = list(self.entries)
        self.entries.clear()
        return out

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class KeywordSubscription:
    keywords: tuple[str, ...]
    buffer: FlowBuffer

    def __post_init__(self):
        self._kwset = frozenset(self.keywords)

    def matches(self, tokens: frozenset) -> bool:
        return not self._kwset.isdisjoint(tokens)


class BannedAccountError(RuntimeError):
    pass


class Microblog:
    """The platform: accounts, timeline, keyword streams, ban state.

    Detection hooks in through ``on_post`` (called for every accepted
    tweet) so the platform itself stays policy-free.
    """

    def __init__(self, clock: SimClock, theme_keywords: dict[str, list[str]]):
        self.clock = clock
        self.theme_keywords = {t: list(ks) for t, ks in theme_keywords.items()}
        self._kw_pairs = {
            t: [(k, k.casefold()) for k in ks] for t, ks in self.theme_keywords.items()
        }
        self._kw_sets = {t: frozenset(c for _, c in ps) for t, ps in self._kw_pairs.items()}
        self.accounts: dict[str, AccountProfile] = {}
        self.timeline: list[TweetRecord] = []
        self.subscriptions: list[KeywordSubscription] = []
        self.banned: dict[str, int] = {}
        self.on_post: Optional[Callable[[TweetRecord], None]] = None

    def add_account(self, account: AccountProfile) -> None:
        if account.handle in self.accounts:
            raise ValueError(f"duplicate handle {account.handle!r}")
        self.accounts[account.handle] = account

    def add_population(self, accounts: Iterable[AccountProfile]) -> None:
        for a in accounts:
            self.add_account(a)

    def ban(self, handle: str, at: int) -> None:
        self.banned.setdefault(handle, at)

    def is_banned(self, handle: str) -> bool:
        return handle in self.banned

    def stream_by_keywords(self, keywords: list[str], buffer: FlowBuffer) -> KeywordSubscription:
        if not keywords:
            raise ValueError("keyword list must be non-empty")
        sub = KeywordSubscription(tuple(k.casefold() for k in keywords), buffer)
        self.subscriptions.append(sub)
        return sub

    def post_tweet(
        self,
        author: AccountProfile,
        text: str,
        mentions: Optional[list[str]] = None,
        link: Optional[str] = None,
        theme: Optional[str] = None,
    ) -> TweetRecord:
        if author.handle not in self.accounts:
            raise KeyError(f"unknown account {author.handle!r}")
        if self.is_banned(author.handle):
            raise BannedAccountError(f"account banned: {author.handle!r}")
        theme = theme or author.theme_affinity
        tokens = frozenset(tokenize(text))
        kwset = self._kw_sets.get(theme, frozenset())
        if kwset.isdisjoint(tokens):
            matched = []
        else:
            matched = [k for k, ck in self._kw_pairs[theme] if ck in tokens]
        tweet = TweetRecord(
            author=author.handle,
            text=text,
            mentions=list(mentions or []),
            link=link,
            matched_keywords=matched,
            posted_at=self.clock.now,
            theme=theme,
        )
        self.timeline.append(tweet)
        author.post_count += 1
        for sub in self.subscriptions:
            if sub.matches(tokens):
                sub.buffer.push(tweet)
        if self.on_post is not None:
            self.on_post(tweet)
        return tweet


# ---------------------------------------------------------------------------
# Synthetic population


@dataclass
class CountDistribution:
    """Log-normal integer count model (floor of exp draws)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.floor(rng.lognormal(self.mu, self.sigma, size=n)).astype(np.int64)

    def mean(self) -> float:
        # floor(X) mean is within 1 of E[X] for lognormal X
        return float(np.exp(self.mu + self.sigma**2 / 2.0))


@dataclass
class ThemePopulationSpec:
    count: int
    followers: CountDistribution = field(default_factory=lambda: CountDistribution(4.0, 1.4))
    following: CountDistribution = field(default_factory=lambda: CountDistribution(4.6, 1.1))
    posts: CountDistribution = field(default_factory=lambda: CountDistribution(5.2, 1.5))
    age_days_min: float = 30.0
    age_days_max: float = 3650.0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("theme population count must be non-negative")
        if self.age_days_min < 0 or self.age_days_max < self.age_days_min:
            raise ValueError("invalid age range")


@dataclass
class PopulationSpec:
    themes: dict[str, ThemePopulationSpec]
    location_tags: tuple[str, ...] = ("norte", "nordeste", "centro-oeste", "sudeste", "sul")
    location_prob: float = 0.6

    def total(self) -> int:
        return sum(t.count for t in self.themes.values())


def generate_population(spec: PopulationSpec, seed: int, now: int = 0) -> list[AccountProfile]:
    """Generate the synthetic account population for one run.

    Identical (spec, seed) pairs yield identical account lists. Handles
    carry an underscore so they can never collide with hex pseudonyms.
    """
    if spec.total() <= 0:
        raise ValueError("empty population")
    rng = np.random.Generator(np.random.PCG64(seed))
    accounts: list[AccountProfile] = []
    for theme in sorted(spec.themes):
        tspec = spec.themes[theme]
        n = tspec.count
        if n == 0:
            continue
        followers = tspec.followers.sample(rng, n)
        following = tspec.following.sample(rng, n)
        posts = tspec.posts.sample(rng, n)
        ages = rng.uniform(tspec.age_days_min, tspec.age_days_max, size=n)
        has_loc = rng.random(n) < spec.location_prob
        locs = rng.integers(0, len(spec.location_tags), size=n)
        for i in range(n):
            accounts.append(
                AccountProfile(
                    handle=f"u_{theme[:3]}_{i:05d}",
                    followers_count=int(followers[i]),
                    following_count=int(following[i]),
                    post_count=int(posts[i]),
                    created_at=now - int(ages[i] * 86400.0),
                    theme_affinity=theme,
                    location_tag=spec.location_tags[locs[i]] if has_loc[i] else None,
                    is_bot=False,
                )
            )
    return accounts


# ---------------------------------------------------------------------------
# Tweet capture (JSON Lines)

CAPTURE_FIELDS = ("author", "text", "mentions", "link", "matched_keywords", "posted_at", "theme")


def capture_line(tweet: TweetRecord) -> str:
    obj = {k: getattr(tweet, k) for k in CAPTURE_FIELDS}
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def write_capture(path, tweets: Iterable[TweetRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for t in tweets:
            f.write(capture_line(t) + "\n")
            n += 1
    return n


def read_capture(path) -> list[TweetRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(TweetRecord(**{k: obj[k] for k in CAPTURE_FIELDS}))
    return out
