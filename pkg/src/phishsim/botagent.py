"""Attacker state machine: bait crafting, pacing, mitigation policies.

Three policy generations, matching what each round of platform bans
taught the operator:

  v2 - mentions every target, repeats the same phrasing and the head
       headline, raw landing links, no pacing. Duplication by design.
  v3 - diversified phrasings/headlines, legit posts interspersed with
       attacks, shortened per-target links.
  v4 - v3 plus a nightly pause, a reduced posting rate, and a fraction
       of potential targets deliberately skipped.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .sampler import TargetRecord
from .simcore import THEMES

LANDING_BASE = "https://pesquisa-navegacao.local"
SHORT_BASE = "https://enc.urt"

PHRASING_VARIANTS = (
    "Saiu agora: {headline} {url}",
    "Vale a leitura: {headline} — detalhes em {url}",
    "{headline}? A cobertura completa esta em {url}",
    "Acabei de ler isto: {headline} {url}",
    "Quem acompanha o assunto vai querer ver: {headline} {url}",
    "Resumo do dia: {headline}. Fonte: {url}",
    "Olha o que apareceu no portal: {headline} ({url})",
)


@dataclass
class BotPolicy:
    version: str
    mention_target: bool
    diversify_baits: bool
    intersperse_legit: bool
    use_shortener: bool
    legit_per_attack: int = 1
    night_pause: Optional[tuple[int, int]] = None  # [start_hour, end_hour)
    skip_fraction: float = 0.0
    max_rate: Optional[float] = None  # tweets/hour, attacks and legit combined

    def __post_init__(self):
        if self.version not in ("v2", "v3", "v4"):
            raise ValueError(f"unknown policy version {self.version!r}")
        if not (0.0 <= self.skip_fraction <= 1.0):
            raise ValueError("skip_fraction must be in [0,1]")
        if self.max_rate is not None and self.max_rate <= 0:
            raise ValueError("max_rate must be positive")
        if self.night_pause is not None:
            s, e = self.night_pause
            if not (0 <= s < e <= 24):
                raise ValueError("night_pause must be a valid [start, end) hour window")

    def paused_at(self, now: int) -> bool:
        if self.night_pause is None:
            return False
        s, e = self.night_pause
        return s <= (now // 3600) % 24 < e


def policy_v2(max_rate: Optional[float] = None) -> BotPolicy:
    return BotPolicy(
        version="v2", mention_target=True, diversify_baits=False,
        intersperse_legit=False, use_shortener=False, max_rate=max_rate,
    )


def policy_v3(max_rate: Optional[float] = 20.0) -> BotPolicy:
    return BotPolicy(
        version="v3", mention_target=True, diversify_baits=True,
        intersperse_legit=True, use_shortener=True, max_rate=max_rate,
    )


def policy_v4(max_rate: Optional[float] = 4.0, skip_fraction: float = 0.5,
              night_pause: tuple[int, int] = (0, 8)) -> BotPolicy:
    return BotPolicy(
        version="v4", mention_target=True, diversify_baits=True,
        intersperse_legit=True, use_shortener=True, night_pause=night_pause,
        skip_fraction=skip_fraction, max_rate=max_rate,
    )


POLICY_FACTORIES = {"v2": policy_v2, "v3": policy_v3, "v4": policy_v4}


# ---------------------------------------------------------------------------
# Corpora


@dataclass
class BaitTemplate:
    theme: str
    headline: str
    phrasing_variants: tuple[str, ...] = PHRASING_VARIANTS

    def __post_init__(self):
        if not self.phrasing_variants:
            raise ValueError("need at least one phrasing variant")

    def render(self, variant: int, url: str) -> str:
        tpl = self.phrasing_variants[variant % len(self.phrasing_variants)]
        return tpl.format(headline=self.headline, url=url)


class Corpus:
    """Checked-in headline and benign-post corpora."""

    def __init__(self, headlines: dict[str, list[str]], benign: list[str]):
        for theme, lines in headlines.items():
            if not lines:
                raise ValueError(f"empty headline corpus for theme {theme!r}")
        if not benign:
            raise ValueError("empty benign corpus")
        self.headlines = headlines
        self.benign = benign

    @classmethod
    def load_default(cls) -> "Corpus":
        data = resources.files("phishsim.data")
        headlines: dict[str, list[str]] = {t: [] for t in THEMES}
        with data.joinpath("headlines.jsonl").open("r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    obj = json.loads(line)
                    headlines.setdefault(obj["theme"], []).append(obj["headline"])
        benign = [
            ln.strip()
            for ln in data.joinpath("benign.txt").read_text(encoding="utf-8").splitlines()
            if ln.strip()
        ]
        return cls(headlines, benign)


# ---------------------------------------------------------------------------
# URL shortener


@dataclass
class ShortLink:
    token: str
    expands_to: str


class Shortener:
    """Deterministic per-target short links that round-trip exactly."""

    def __init__(self, namespace: str = "0"):
        self._ns = namespace.encode("utf-8")[:16]
        self._by_token: dict[str, str] = {}

    def shorten(self, url: str, pseudonym: str) -> ShortLink:
        token = hashlib.blake2b(
            pseudonym.encode("utf-8"), key=self._ns, digest_size=6
        ).hexdigest()
        known = self._by_token.get(token)
        if known is not None and known != url:
            raise RuntimeError("short token collision")
        self._by_token[token] = url
        return ShortLink(token=token, expands_to=url)

    def short_url(self, link: ShortLink) -> str:
        return f"{SHORT_BASE}/{link.token}"

    def expand(self, short_url: str) -> str:
        token = short_url.rsplit("/", 1)[-1]
        if token not in self._by_token:
            raise KeyError(f"unknown short token {token!r}")
        return self._by_token[token]


def bait_url(pseudonym: str) -> str:
    return f"{LANDING_BASE}/bait?id={pseudonym}"


def pseudonym_from_url(url: str, shortener: Optional[Shortener] = None) -> str:
    """Resolve an attack link (through the shortener if needed) to its pseudonym."""
    if url.startswith(SHORT_BASE + "/"):
        if shortener is None:
            raise ValueError("short link without a shortener")
        url = shortener.expand(url)
    marker = "?id="
    if marker not in url:
        raise ValueError(f"no pseudonym attribute in {url!r}")
    return url.split(marker, 1)[1].split("&", 1)[0]


# ---------------------------------------------------------------------------
# Pacing


class TokenBucket:
    """One-token bucket refilling at ``rate`` tweets/hour; None = unlimited."""

    def __init__(self, rate: Optional[float]):
        self.rate = rate
        self._next_free = 0.0

    def ready(self, now: int) -> bool:
        return self.rate is None or now >= self._next_free

    def acquire(self, now: int) -> None:
        if self.rate is None:
            return
        if now < self._next_free:
            raise RuntimeError("token not ready")
        self._next_free = float(now) + 3600.0 / self.rate

    def next_ready(self, now: int) -> int:
        if self.rate is None:
            return now
        return max(now, math.ceil(self._next_free))


@dataclass
class BaitDraft:
    text: str
    mentions: list[str]
    link: str
    theme: str
    target: TargetRecord


def craft_bait(
    target: TargetRecord,
    policy: BotPolicy,
    corpus: Corpus,
    bait_index: int,
    shortener: Optional[Shortener] = None,
    mention_handle: Optional[str] = None,
) -> BaitDraft:
    """Build one personified bait for one sampled target.

    Without diversification the draft always uses phrasing variant 0 and
    the head headline of the theme's corpus; with it, phrasings and
    headlines cycle on coprime periods so nearby baits stay dissimilar.
    The landing URL always carries the target's pseudonym, never a handle.
    """
    headlines = corpus.headlines.get(target.theme)
    if not headlines:
        raise ValueError(f"no headlines for theme {target.theme!r}")
    if policy.diversify_baits:
        template = BaitTemplate(target.theme, headlines[bait_index % len(headlines)])
        variant = bait_index % len(template.phrasing_variants)
    else:
        template = BaitTemplate(target.theme, headlines[0])
        variant = 0
    url = bait_url(target.pseudonym)
    if policy.use_shortener:
        if shortener is None:
            raise ValueError("policy wants a shortener but none was given")
        url = shortener.short_url(shortener.shorten(url, target.pseudonym))
    mentions = [mention_handle] if (policy.mention_target and mention_handle) else []
    return BaitDraft(
        text=template.render(variant, url),
        mentions=mentions,
        link=url,
        theme=target.theme,
        target=target,
    )


class BotAgent:
    """One attacker account; decides and performs one action per tick."""

    def __init__(
        self,
        handle: str,
        theme: str,
        policy: BotPolicy,
        corpus: Corpus,
        attack_quota: Optional[int] = None,
        shortener: Optional[Shortener] = None,
        handle_of=None,
    ):
        self.handle = handle
        self.theme = theme
        self.policy = policy
        self.corpus = corpus
        self.attack_quota = attack_quota
        self.shortener = shortener or (Shortener(handle) if policy.use_shortener else None)
        self.handle_of = handle_of  # pseudonym -> handle, for on-platform mentions
        self.bucket = TokenBucket(policy.max_rate)
        self.pending: list[TargetRecord] = []
        self.attacks_sent = 0
        self.legit_sent = 0
        self._legit_debt = 0
        self._benign_idx = 0
        self.halted = False

    def quota_left(self) -> bool:
        return self.attack_quota is None or self.attacks_sent < self.attack_quota

    def next_action(self, now: int) -> str:
        """One of send_attack / send_legit / idle for this instant."""
        if self.halted or self.policy.paused_at(now) or not self.bucket.ready(now):
            return "idle"
        if self.policy.intersperse_legit and self._legit_debt > 0:
            return "send_legit"
        if self.pending and self.quota_left():
            return "send_attack"
        if self.policy.intersperse_legit:
            return "send_legit"
        return "idle"

    def take_attack(self, now: int) -> BaitDraft:
        self.bucket.acquire(now)
        target = self.pending.pop(0)
        mention = self.handle_of(target.pseudonym) if self.handle_of else None
        draft = craft_bait(
            target, self.policy, self.corpus, self.attacks_sent, self.shortener,
            mention_handle=mention,
        )
        self.attacks_sent += 1
        if self.policy.intersperse_legit:
            self._legit_debt = self.policy.legit_per_attack
        return draft

    def take_legit(self, now: int) -> str:
        self.bucket.acquire(now)
        line = self.corpus.benign[self._benign_idx % len(self.corpus.benign)]
        self._benign_idx += 1
        self.legit_sent += 1
        if self._legit_debt > 0:
            self._legit_debt -= 1
        return line

    def wakeup_time(self, now: int) -> int:
        """Next instant the night pause allows activity."""
        if not self.policy.paused_at(now):
            return now
        _, end = self.policy.night_pause
        day = now - (now % 86400)
        wake = day + end * 3600
        return wake if wake > now else wake + 86400
