"""Platform-side behavioral bot detector.

Four per-account rules scored on every accepted tweet, plus a complaint
counter. Rule points accumulate into a standing score that decays
linearly per hour; an account is banned once the score reaches the ban
threshold or the complaint count reaches its own threshold.

Rules:
  R1 mention saturation  - the last ``window_size`` tweets nearly all
                           carry mentions (needs a full window).
  R2 near-duplicate      - token 3-gram Jaccard against any of the last
                           ``similarity_lookback`` tweets at or above the
                           similarity threshold. Plain URLs are compared
                           by scheme+host+path so per-target query
                           strings do not hide duplication; shortened
                           links stay unique tokens and do not match.
  R3 continuous activity - at least one tweet in every hour of the last
                           ``continuous_hours_threshold`` hours; charged
                           once per sustained hour.
  R4 posting rate        - charged for every tweet beyond
                           ``rate_threshold`` within the same clock hour.
"""

from __future__ import annotations

import re
import unicodedata
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .simcore import TweetRecord

_URL_RE = re.compile(r"https?://\S+")
_WORD_RE = re.compile(r"\w+", re.UNICODE)


def normalize_url(url: str) -> str:
    """Strip the query/fragment: scheme + host + path identify the page."""
    return url.split("?", 1)[0].split("#", 1)[0].rstrip("/").casefold()


def similarity_tokens(text: str) -> list[str]:
    """Tokens used for near-duplicate comparison; URLs collapse to their base."""
    text = unicodedata.normalize("NFC", text)
    tokens: list[str] = []
    pos = 0
    for m in _URL_RE.finditer(text):
        tokens.extend(_WORD_RE.findall(text[pos : m.start()].casefold()))
        tokens.append(normalize_url(m.group()))
        pos = m.end()
    tokens.extend(_WORD_RE.findall(text[pos:].casefold()))
    return tokens


def shingles(tokens: list[str]) -> frozenset:
    """Token 3-grams; short texts fall back to 1-token shingles."""
    if len(tokens) >= 3:
        return frozenset(tuple(tokens[i : i + 3]) for i in range(len(tokens) - 2))
    return frozenset((t,) for t in tokens)


# repeated texts (corpus lines, templated posts) shingle identically
_SHINGLE_CACHE: dict[str, frozenset] = {}
_SHINGLE_CACHE_MAX = 20_000


def text_shingles(text: str) -> frozenset:
    sh = _SHINGLE_CACHE.get(text)
    if sh is None:
        if len(_SHINGLE_CACHE) >= _SHINGLE_CACHE_MAX:
            _SHINGLE_CACHE.clear()
        sh = shingles(similarity_tokens(text))
        _SHINGLE_CACHE[text] = sh
    return sh


def jaccard_3gram(a: str, b: str) -> float:
    """Jaccard similarity of token 3-gram sets of the two texts.

    Texts shorter than 3 tokens compare by token set; two empty texts
    are defined as identical (1.0).
    """
    sa = text_shingles(a)
    sb = text_shingles(b)
    if not sa and not sb:
        return 1.0
    inter = len(sa & sb)
    if inter == 0:
        return 0.0
    return inter / (len(sa) + len(sb) - inter)


@dataclass
class DetectionConfig:
    window_size: int = 20
    mention_frac_threshold: float = 0.9
    similarity_threshold: float = 0.7
    similarity_lookback: int = 50
    continuous_hours_threshold: int = 24
    rate_threshold: int = 12
    complaint_ban_count: int = 3
    score_ban_threshold: float = 100.0
    score_decay_per_hour: float = 10.0
    rule_points: dict = field(
        default_factory=lambda: {"R1": 5.0, "R2": 2.0, "R3": 10.0, "R4": 1.0}
    )

    def __post_init__(self):
        if not (0.0 <= self.mention_frac_threshold <= 1.0):
            raise ValueError("mention_frac_threshold must be in [0,1]")
        if not (0.0 <= self.similarity_threshold <= 1.0):
            raise ValueError("similarity_threshold must be in [0,1]")
        for name in ("window_size", "similarity_lookback", "continuous_hours_threshold",
                     "rate_threshold", "complaint_ban_count"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.score_ban_threshold <= 0 or self.score_decay_per_hour < 0:
            raise ValueError("invalid score thresholds")
        missing = {"R1", "R2", "R3", "R4"} - set(self.rule_points)
        if missing:
            raise ValueError(f"rule_points missing {sorted(missing)}")


class AccountStanding:
    """Rolling per-account detector state.

    ``recent_tweets`` is the similarity ring; the other structures are
    incremental caches over the same window and the trailing hour/day.
    """

    def __init__(self, handle: str, cfg: DetectionConfig):
        self.handle = handle
        self.cfg = cfg
        self.score = 0.0
        self.complaint_count = 0
        self.banned_at: Optional[int] = None
        self.last_update: Optional[int] = None
        self.recent_tweets: deque[TweetRecord] = deque(maxlen=cfg.similarity_lookback)
        # similarity ring caches: per ring entry id -> shingle set, plus an
        # inverted index shingle -> {entry ids} for candidate lookup
        self._ring_ids: deque[int] = deque(maxlen=cfg.similarity_lookback)
        self._ring_shingles: dict[int, frozenset] = {}
        self._shingle_index: dict = {}
        self._next_id = 0
        self._mention_flags: deque[bool] = deque(maxlen=cfg.window_size)
        self._mention_count = 0
        self._hour_buckets: dict[int, int] = {}
        self._last_hour_charged: Optional[int] = None

    @property
    def is_banned(self) -> bool:
        return self.banned_at is not None

    def decay_to(self, now: int) -> None:
        if self.last_update is not None and now > self.last_update:
            dt_hours = (now - self.last_update) / 3600.0
            self.score = max(0.0, self.score - self.cfg.score_decay_per_hour * dt_hours)
        self.last_update = now

    # -- incremental window updates -------------------------------------

    def _push_similarity(self, sh: frozenset) -> None:
        if len(self._ring_ids) == self._ring_ids.maxlen:
            old = self._ring_ids.popleft()
            for s in self._ring_shingles.pop(old):
                ids = self._shingle_index[s]
                ids.discard(old)
                if not ids:
                    del self._shingle_index[s]
        tid = self._next_id
        self._next_id += 1
        self._ring_ids.append(tid)
        self._ring_shingles[tid] = sh
        for s in sh:
            self._shingle_index.setdefault(s, set()).add(tid)

    def max_similarity(self, sh: frozenset) -> float:
        """Max Jaccard of *sh* against the ring, via the inverted index."""
        if not sh:
            return 1.0 if any(not s for s in self._ring_shingles.values()) else 0.0
        overlap: dict[int, int] = {}
        for s in sh:
            for tid in self._shingle_index.get(s, ()):
                overlap[tid] = overlap.get(tid, 0) + 1
        best = 0.0
        for tid, inter in overlap.items():
            union = len(sh) + len(self._ring_shingles[tid]) - inter
            j = inter / union if union else 1.0
            if j > best:
                best = j
        return best

    def _push_mention(self, has_mention: bool) -> None:
        if len(self._mention_flags) == self._mention_flags.maxlen and self._mention_flags[0]:
            self._mention_count -= 1
        self._mention_flags.append(has_mention)
        if has_mention:
            self._mention_count += 1

    def _push_time(self, now: int) -> None:
        bucket = now // 3600
        self._hour_buckets[bucket] = self._hour_buckets.get(bucket, 0) + 1
        stale = bucket - self.cfg.continuous_hours_threshold - 1
        for b in [b for b in self._hour_buckets if b < stale]:
            del self._hour_buckets[b]


class DetectionEngine:
    """Scores tweets, tracks complaints, and issues bans."""

    def __init__(self, cfg: Optional[DetectionConfig] = None,
                 on_ban: Optional[Callable[[str, int, str, float], None]] = None):
        self.cfg = cfg or DetectionConfig()
        self.standings: dict[str, AccountStanding] = {}
        self.on_ban = on_ban

    def standing(self, handle: str) -> AccountStanding:
        st = self.standings.get(handle)
        if st is None:
            st = AccountStanding(handle, self.cfg)
            self.standings[handle] = st
        return st

    def _ban(self, st: AccountStanding, at: int, rule: str) -> None:
        st.banned_at = at
        if self.on_ban is not None:
            self.on_ban(st.handle, at, rule, st.score)

    def score_tweet(self, tweet: TweetRecord) -> list[str]:
        """Evaluate all rules for one accepted tweet; returns fired rules.

        Must not be called for a banned account.
        """
        cfg = self.cfg
        st = self.standing(tweet.author)
        if st.is_banned:
            raise RuntimeError(f"scoring banned account {tweet.author!r}")
        now = tweet.posted_at
        st.decay_to(now)

        sh = text_shingles(tweet.text)
        fired: list[str] = []

        # R1: mention saturation over a full window
        st._push_mention(bool(tweet.mentions))
        if (
            len(st._mention_flags) == cfg.window_size
            and st._mention_count / cfg.window_size >= cfg.mention_frac_threshold
        ):
            fired.append("R1")

        # R2: near-duplicate against the lookback ring
        if st.recent_tweets and st.max_similarity(sh) >= cfg.similarity_threshold:
            fired.append("R2")

        # R3: one tweet in every hour of the trailing day, charged once/hour
        st._push_time(now)
        bucket = now // 3600
        if st._last_hour_charged != bucket:
            span = range(bucket - cfg.continuous_hours_threshold + 1, bucket + 1)
            if all(b in st._hour_buckets for b in span):
                st._last_hour_charged = bucket
                fired.append("R3")

        # R4: every tweet past the hourly allowance
        if st._hour_buckets[bucket] > cfg.rate_threshold:
            fired.append("R4")

        st.recent_tweets.append(tweet)
        st._push_similarity(sh)

        for rule in fired:
            st.score += cfg.rule_points[rule]
            if st.score >= cfg.score_ban_threshold and not st.is_banned:
                self._ban(st, now, rule)
        return fired

    def register_complaint(self, target: str, against: str, at: int) -> AccountStanding:
        """One complaint from *target* about *against*; bans at the threshold.

        Complaints against already-banned accounts are absorbed.
        """
        st = self.standing(against)
        if st.is_banned:
            return st
        st.complaint_count += 1
        if st.complaint_count >= self.cfg.complaint_ban_count:
            self._ban(st, at, "complaints")
        return st
