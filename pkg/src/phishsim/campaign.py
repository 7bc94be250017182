"""Campaign orchestration: configuration, the run loop, artifact emission.

A run wires population, platform, detection, per-bot streams, victim
reactions and the landing ledger onto one deterministic event loop, then
emits four artifacts (run log, ledger, target export, report) plus a
config snapshot. Every exported record refers to accounts by pseudonym.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import yaml

from .botagent import BotAgent, BotPolicy, Corpus, POLICY_FACTORIES
from .detection import DetectionConfig, DetectionEngine
from .landing import LandingApp, write_ledger
from .profiler import (
    CampaignReport,
    FEATURE_COLUMNS,
    build_features,
    fit_logistic,
    summarize_report,
    write_report,
)
from .sampler import (
    PseudonymRegistry,
    RankBanding,
    SamplingPolicy,
    TargetRecord,
    TargetSampler,
    follower_rank,
    write_targets_csv,
)
from .simcore import (
    AccountProfile,
    CountDistribution,
    EventScheduler,
    FlowBuffer,
    Microblog,
    PopulationSpec,
    SimClock,
    ThemePopulationSpec,
    TweetRecord,
    capture_line,
    generate_population,
)
from .victim import SusceptibilityParams, decide_response, response_delay

RUN_SECRET_ENV = "PHISHSIM_RUN_SECRET"

ARTIFACT_NAMES = ("run_log.jsonl", "ledger.json", "targets.csv", "report.json", "config.yaml")

DUMMY_FORM = {"name": "visitante", "email": "visitante@example.test",
              "phone": "0000-0000", "city": "brasilia"}


@dataclass
class BotSpec:
    theme: str
    policy_version: str
    max_rate: Optional[float] = None
    attack_quota: Optional[int] = None
    skip_fraction: Optional[float] = None
    legit_per_attack: Optional[int] = None

    def build_policy(self) -> BotPolicy:
        policy = POLICY_FACTORIES[self.policy_version]()
        if self.max_rate is not None:
            policy.max_rate = self.max_rate
        if self.skip_fraction is not None:
            policy.skip_fraction = self.skip_fraction
        if self.legit_per_attack is not None:
            policy.legit_per_attack = self.legit_per_attack
        return policy


@dataclass
class BackgroundSpec:
    tweets_per_account: int = 2
    active_window_frac: float = 0.9  # first posts spread over this run fraction
    offtopic_prob: float = 0.1


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    duration: int
    population: PopulationSpec
    bots: list[BotSpec] = field(default_factory=list)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    victim: SusceptibilityParams = field(default_factory=SusceptibilityParams)
    background: BackgroundSpec = field(default_factory=BackgroundSpec)
    keywords: Optional[dict[str, list[str]]] = None  # None -> packaged lists
    buffer_capacity: int = 5000
    emit_capture: bool = False
    rank_histogram: bool = False

    def resolved_keywords(self) -> dict[str, list[str]]:
        return self.keywords if self.keywords is not None else load_default_keywords()


def load_default_keywords() -> dict[str, list[str]]:
    text = resources.files("phishsim.data").joinpath("keywords.yaml").read_text("utf-8")
    return yaml.safe_load(text)


# ---------------------------------------------------------------------------
# Config file round-trip


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "name": cfg.name,
        "seed": cfg.seed,
        "duration": cfg.duration,
        "buffer_capacity": cfg.buffer_capacity,
        "emit_capture": cfg.emit_capture,
        "rank_histogram": cfg.rank_histogram,
        "population": {
            "location_prob": cfg.population.location_prob,
            "themes": {
                t: {
                    "count": s.count,
                    "followers": {"mu": s.followers.mu, "sigma": s.followers.sigma},
                    "following": {"mu": s.following.mu, "sigma": s.following.sigma},
                    "posts": {"mu": s.posts.mu, "sigma": s.posts.sigma},
                    "age_days_min": s.age_days_min,
                    "age_days_max": s.age_days_max,
                }
                for t, s in sorted(cfg.population.themes.items())
            },
        },
        "bots": [
            {
                "theme": b.theme,
                "policy_version": b.policy_version,
                "max_rate": b.max_rate,
                "attack_quota": b.attack_quota,
                "skip_fraction": b.skip_fraction,
                "legit_per_attack": b.legit_per_attack,
            }
            for b in cfg.bots
        ],
        "detection": {
            "window_size": cfg.detection.window_size,
            "mention_frac_threshold": cfg.detection.mention_frac_threshold,
            "similarity_threshold": cfg.detection.similarity_threshold,
            "similarity_lookback": cfg.detection.similarity_lookback,
            "continuous_hours_threshold": cfg.detection.continuous_hours_threshold,
            "rate_threshold": cfg.detection.rate_threshold,
            "complaint_ban_count": cfg.detection.complaint_ban_count,
            "score_ban_threshold": cfg.detection.score_ban_threshold,
            "score_decay_per_hour": cfg.detection.score_decay_per_hour,
            "rule_points": dict(sorted(cfg.detection.rule_points.items())),
        },
        "victim": {
            "beta": dict(sorted(cfg.victim.beta.items())),
            "register_given_visit": cfg.victim.register_given_visit,
            "complaint_prob": cfg.victim.complaint_prob,
            "doc_click_given_visit": cfg.victim.doc_click_given_visit,
        },
        "background": {
            "tweets_per_account": cfg.background.tweets_per_account,
            "active_window_frac": cfg.background.active_window_frac,
            "offtopic_prob": cfg.background.offtopic_prob,
        },
    }


def config_from_dict(obj: dict) -> ScenarioConfig:
    pop = obj["population"]
    themes = {}
    for theme, t in pop["themes"].items():
        themes[theme] = ThemePopulationSpec(
            count=int(t["count"]),
            followers=CountDistribution(**t.get("followers", {"mu": 4.0, "sigma": 1.4})),
            following=CountDistribution(**t.get("following", {"mu": 4.6, "sigma": 1.1})),
            posts=CountDistribution(**t.get("posts", {"mu": 5.2, "sigma": 1.5})),
            age_days_min=float(t.get("age_days_min", 30.0)),
            age_days_max=float(t.get("age_days_max", 3650.0)),
        )
    det = obj.get("detection", {})
    vic = obj.get("victim", {})
    bg = obj.get("background", {})
    return ScenarioConfig(
        name=obj["name"],
        seed=int(obj["seed"]),
        duration=int(obj["duration"]),
        buffer_capacity=int(obj.get("buffer_capacity", 5000)),
        emit_capture=bool(obj.get("emit_capture", False)),
        rank_histogram=bool(obj.get("rank_histogram", False)),
        population=PopulationSpec(themes=themes,
                                  location_prob=float(pop.get("location_prob", 0.6))),
        bots=[
            BotSpec(
                theme=b["theme"],
                policy_version=b["policy_version"],
                max_rate=b.get("max_rate"),
                attack_quota=b.get("attack_quota"),
                skip_fraction=b.get("skip_fraction"),
                legit_per_attack=b.get("legit_per_attack"),
            )
            for b in obj.get("bots", [])
        ],
        detection=DetectionConfig(**det) if det else DetectionConfig(),
        victim=SusceptibilityParams(**vic) if vic else SusceptibilityParams(),
        background=BackgroundSpec(**bg) if bg else BackgroundSpec(),
    )


def validate_config_dict(obj: dict) -> list[str]:
    """Schema and cross-field checks; returns diagnostics, never raises."""
    diags: list[str] = []
    for name in ("name", "seed", "duration", "population"):
        if name not in obj:
            diags.append(f"{name}: required field missing")
    if not isinstance(obj.get("duration", 1), int) or obj.get("duration", 1) <= 0:
        diags.append("duration: must be a positive integer")
    themes = obj.get("population", {}).get("themes", {})
    if not themes:
        diags.append("population.themes: at least one theme required")
    total = 0
    for theme, t in themes.items():
        count = t.get("count", 0) if isinstance(t, dict) else 0
        if not isinstance(count, int) or count < 0:
            diags.append(f"population.themes.{theme}.count: must be a non-negative integer")
        else:
            total += count
        for dist in ("followers", "following", "posts"):
            sigma = (t.get(dist, {}) or {}).get("sigma", 0.0) if isinstance(t, dict) else 0.0
            if sigma < 0:
                diags.append(f"population.themes.{theme}.{dist}.sigma: must be non-negative")
    if themes and total <= 0:
        diags.append("population.themes: empty population")
    for i, b in enumerate(obj.get("bots", [])):
        theme = b.get("theme")
        if theme is None:
            diags.append(f"bots[{i}].theme: required (each bot posts in exactly one theme)")
        elif themes and theme not in themes:
            diags.append(f"bots[{i}].theme: {theme!r} not in population themes")
        if b.get("policy_version") not in POLICY_FACTORIES:
            diags.append(f"bots[{i}].policy_version: must be one of v2/v3/v4")
        if b.get("max_rate") is not None and b["max_rate"] <= 0:
            diags.append(f"bots[{i}].max_rate: must be positive")
    for prob in ("register_given_visit", "complaint_prob", "doc_click_given_visit"):
        v = obj.get("victim", {}).get(prob)
        if v is not None and not (0.0 <= v <= 1.0):
            diags.append(f"victim.{prob}: must be in [0,1]")
    kw_path = obj.get("keywords_file")
    if kw_path is not None and not os.path.exists(kw_path):
        diags.append(f"keywords_file: no such file: {kw_path}")
    return diags


def apply_overrides(obj: dict, overrides: list[str]) -> dict:
    """Apply repeatable ``dotted.path=value`` overrides to a config dict."""
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must look like key=value: {item!r}")
        path, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        node = obj
        parts = path.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return obj


# ---------------------------------------------------------------------------
# The run loop


@dataclass
class BotSummary:
    pseudonym: str
    theme: str
    policy_version: str
    attacks_sent: int
    legit_sent: int
    banned_at: Optional[int]


@dataclass
class RunResult:
    config: ScenarioConfig
    targets: list[TargetRecord]
    attack_events: list[dict]
    ban_events: list[dict]
    landing: LandingApp
    bots: list[BotSummary]
    run_log: list[dict]
    capture_lines: list[str]
    report: Optional[CampaignReport] = None

    @property
    def stimuli_by_theme(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for t in self.targets:
            if t.stimulated_at is not None:
                out[t.theme] = out.get(t.theme, 0) + 1
        return out

    @property
    def hits_by_theme(self) -> dict[str, int]:
        theme_of = {t.pseudonym: t.theme for t in self.targets}
        out: dict[str, int] = {}
        for ev in self.landing.events:
            theme = theme_of.get(ev.pseudonym or "")
            if theme is not None:
                out[theme] = out.get(theme, 0) + 1
        return out


def _background_text(rng: random.Random, keywords: list[str], offtopic: bool) -> str:
    openers = ("hoje o assunto aqui e", "alguem mais viu isso de", "pensando muito sobre",
               "acompanhando de perto o tema", "conversa boa sobre", "sem falar em outra coisa:")
    closers = ("por aqui", "na cidade", "desde cedo", "de novo", "sem parar", "com os amigos")
    opener = openers[rng.randrange(len(openers))]
    closer = closers[rng.randrange(len(closers))]
    if offtopic:
        return f"{opener} um pouco de tudo {closer}"
    kw = keywords[rng.randrange(len(keywords))]
    return f"{opener} {kw} {closer}"


def run_campaign(
    cfg: ScenarioConfig,
    out_dir: Optional[str] = None,
    run_secret: Optional[str] = None,
    collect_artifacts: Optional[bool] = None,
) -> RunResult:
    """Drive one full campaign; returns in-memory results and, when
    ``out_dir`` is given, writes the artifact set there.

    The pseudonym secret comes from (in order) the ``run_secret`` argument,
    the PHISHSIM_RUN_SECRET environment variable, or the run seed.
    """
    if collect_artifacts is None:
        collect_artifacts = out_dir is not None
    secret = run_secret or os.environ.get(RUN_SECRET_ENV) or f"seed:{cfg.seed}"

    clock = SimClock(0)
    sched = EventScheduler(clock)
    keywords = cfg.resolved_keywords()
    platform = Microblog(clock, keywords)
    registry = PseudonymRegistry(secret)
    corpus = Corpus.load_default()
    victim_seed = cfg.seed

    run_log: list[dict] = []
    attack_events: list[dict] = []
    ban_events: list[dict] = []
    theme_of_pseudonym: dict[str, str] = {}
    landing = LandingApp(known_pseudonyms=registry, theme_of=theme_of_pseudonym)

    def log(actor: str, event: str, payload: dict) -> None:
        if collect_artifacts:
            run_log.append({"t": clock.now, "actor": actor, "event": event,
                            "payload": payload})

    bots: list[BotAgent] = []
    bots_by_handle: dict[str, BotAgent] = {}

    def on_ban(handle: str, at: int, rule: str, score: float) -> None:
        platform.ban(handle, at)
        bot = bots_by_handle.get(handle)
        if bot is not None:
            bot.halted = True
        ev = {
            "handle_pseudonym": registry.pseudonym(handle),
            "banned_at": at,
            "triggering_rule": rule,
            "score": round(score, 6),
        }
        ban_events.append(ev)
        log("platform", "ban", ev)

    engine = DetectionEngine(cfg.detection, on_ban=on_ban)
    platform.on_post = engine.score_tweet

    # population
    accounts = generate_population(cfg.population, cfg.seed, now=0)
    platform.add_population(accounts)

    # bots, one keyword stream + sampler each, sharing the dedup set
    seen: set[str] = set()
    targets: list[TargetRecord] = []
    samplers: dict[str, TargetSampler] = {}
    buffers = {}
    for i, spec in enumerate(cfg.bots):
        policy = spec.build_policy()
        handle = f"bot_{spec.theme}_{i}"
        platform.add_account(
            AccountProfile(
                handle=handle, followers_count=12, following_count=80, post_count=0,
                created_at=-180 * 86400, theme_affinity=spec.theme, is_bot=True,
            )
        )
        bot = BotAgent(
            handle=handle, theme=spec.theme, policy=policy, corpus=corpus,
            attack_quota=spec.attack_quota, handle_of=registry.handle_of,
        )
        buffers[handle] = FlowBuffer(capacity=cfg.buffer_capacity)
        platform.stream_by_keywords(keywords[spec.theme], buffers[handle])
        samplers[handle] = TargetSampler(
            registry,
            SamplingPolicy(skip_fraction=policy.skip_fraction),
            seed=cfg.seed + i,
            seen=seen,
        )
        bots.append(bot)
        bots_by_handle[handle] = bot

    # background posting schedule
    bg_rng = random.Random(f"background:{cfg.seed}")
    window = max(1, int(cfg.duration * cfg.background.active_window_frac))
    for account in accounts:
        times = sorted(
            bg_rng.randrange(window)
            for _ in range(max(1, cfg.background.tweets_per_account))
        )
        theme_words = keywords[account.theme_affinity]
        for when in times:
            offtopic = bg_rng.random() < cfg.background.offtopic_prob
            text = _background_text(bg_rng, theme_words, offtopic)

            def post(account=account, text=text):
                if not platform.is_banned(account.handle):
                    tweet = platform.post_tweet(account, text)
                    if collect_artifacts:
                        log(registry.pseudonym(account.handle), "tweet",
                            _pseudonymize_tweet(tweet, registry))

            sched.schedule(when, post)

    # victim reactions
    def stimulate(target: TargetRecord) -> None:
        outcome = decide_response(target, cfg.victim, victim_seed)
        if outcome.kind == "ignore":
            return
        delay = response_delay(target.pseudonym, victim_seed)
        at = clock.now + delay
        if at > cfg.duration:
            return
        if outcome.kind == "complain":
            def complain(target=target):
                handle = registry.handle_of(target.pseudonym)
                bot_handle = _bot_for_theme(bots, target.theme)
                if bot_handle is not None:
                    engine.register_complaint(handle, bot_handle, clock.now)
                    log(target.pseudonym, "complaint", {"against": "bot"})

            sched.schedule(at, complain)
            return

        def visit(target=target, outcome=outcome):
            landing.bait(target.pseudonym, clock.now)
            if outcome.kind == "visit_register":
                landing.register(dict(DUMMY_FORM), target.pseudonym, clock.now)
            if outcome.doc_download:
                landing.project(target.pseudonym, clock.now)

        sched.schedule(at, visit)

    # bot tick loop
    def tick(bot: BotAgent) -> None:
        if bot.halted:
            return
        now = clock.now
        fresh = samplers[bot.handle].sample_targets(
            buffers[bot.handle], platform.accounts, now
        )
        for t in fresh:
            theme_of_pseudonym[t.pseudonym] = t.theme
        targets.extend(fresh)
        bot.pending.extend(fresh)

        action = bot.next_action(now)
        account = platform.accounts[bot.handle]
        if action == "send_attack":
            draft = bot.take_attack(now)
            draft.target.stimulated_at = now
            tweet = platform.post_tweet(
                account, draft.text, mentions=draft.mentions,
                link=draft.link, theme=bot.theme,
            )
            ev = {"target": draft.target.pseudonym, "theme": draft.target.theme,
                  "link": draft.link}
            attack_events.append(ev)
            if collect_artifacts:
                log(registry.pseudonym(bot.handle), "attack_tweet",
                    {**_pseudonymize_tweet(tweet, registry),
                     "target": draft.target.pseudonym})
            stimulate(draft.target)
        elif action == "send_legit":
            text = bot.take_legit(now)
            tweet = platform.post_tweet(account, text, theme=bot.theme)
            if collect_artifacts:
                log(registry.pseudonym(bot.handle), "tweet",
                    _pseudonymize_tweet(tweet, registry))

        if bot.halted:
            return
        if bot.policy.paused_at(clock.now):
            nxt = bot.wakeup_time(clock.now)
        elif action in ("send_attack", "send_legit"):
            if bot.bucket.rate is not None:
                nxt = bot.bucket.next_ready(clock.now)
            elif bot.pending and bot.quota_left():
                nxt = clock.now  # unlimited rate: drain what has been sampled
            else:
                nxt = clock.now + 60
        else:
            nxt = clock.now + 60
        if nxt <= cfg.duration:
            sched.schedule(nxt, lambda bot=bot: tick(bot))

    for bot in bots:
        sched.schedule(bot.wakeup_time(0), lambda bot=bot: tick(bot))

    sched.advance_clock(cfg.duration)

    # ------------------------------------------------------------------
    # results and artifacts

    capture_lines: list[str] = []
    if cfg.emit_capture and collect_artifacts:
        capture_lines = [
            capture_line(_pseudonymized_record(t, registry)) for t in platform.timeline
        ]

    summaries = [
        BotSummary(
            pseudonym=registry.pseudonym(b.handle),
            theme=b.theme,
            policy_version=b.policy.version,
            attacks_sent=b.attacks_sent,
            legit_sent=b.legit_sent,
            banned_at=platform.banned.get(b.handle),
        )
        for b in bots
    ]

    result = RunResult(
        config=cfg,
        targets=targets,
        attack_events=attack_events,
        ban_events=ban_events,
        landing=landing,
        bots=summaries,
        run_log=run_log,
        capture_lines=capture_lines,
    )

    if collect_artifacts:
        result.report = _build_report(result, registry, platform)
    if out_dir is not None:
        emit_artifacts(result, out_dir)
    return result


def _bot_for_theme(bots: list[BotAgent], theme: str) -> Optional[str]:
    for b in bots:
        if b.theme == theme:
            return b.handle
    return None


def _pseudonymize_tweet(tweet, registry: PseudonymRegistry) -> dict:
    return {
        "author": registry.pseudonym(tweet.author),
        "text": tweet.text,
        "mentions": [registry.pseudonym(m) for m in tweet.mentions],
        "link": tweet.link,
        "matched_keywords": tweet.matched_keywords,
        "posted_at": tweet.posted_at,
        "theme": tweet.theme,
    }


def _pseudonymized_record(tweet, registry: PseudonymRegistry) -> TweetRecord:
    return TweetRecord(
        author=registry.pseudonym(tweet.author),
        text=tweet.text,
        mentions=[registry.pseudonym(m) for m in tweet.mentions],
        link=tweet.link,
        matched_keywords=list(tweet.matched_keywords),
        posted_at=tweet.posted_at,
        theme=tweet.theme,
    )


def _rank_histogram(result: RunResult, platform: Microblog) -> dict[str, list[int]]:
    banding = RankBanding()
    authors_by_theme: dict[str, set[str]] = {}
    for tweet in platform.timeline:
        acct = platform.accounts[tweet.author]
        if not acct.is_bot:
            authors_by_theme.setdefault(acct.theme_affinity, set()).add(acct.handle)
    hist: dict[str, list[int]] = {}
    for theme, handles in sorted(authors_by_theme.items()):
        counts = [0] * banding.band_count
        for h in handles:
            a = platform.accounts[h]
            counts[banding.assign_band(follower_rank(a.followers_count, a.following_count))] += 1
        hist[theme] = counts
    return hist


def _build_report(result: RunResult, registry: PseudonymRegistry,
                  platform: Microblog) -> CampaignReport:
    cfg = result.config
    stimulated = [t for t in result.targets if t.stimulated_at is not None]
    fit = None
    visited_of = {
        row["pseudonym"]: 1 for row in result.landing.ledger.as_dict()["per_pseudonym"]
    }
    if len(stimulated) >= len(FEATURE_COLUMNS) + 1:
        labels = [visited_of.get(t.pseudonym, 0) for t in stimulated]
        if 0 < sum(labels) < len(labels):
            fit = fit_logistic(build_features(stimulated, labels))
    metadata = {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "duration": cfg.duration,
        "bots": [
            {"theme": b.theme, "policy": b.policy_version, "attacks": b.attacks_sent,
             "banned_at": b.banned_at}
            for b in result.bots
        ],
    }
    landing_events = [{"pseudonym": e.pseudonym, "kind": e.kind, "t": e.at}
                      for e in result.landing.events]
    return summarize_report(
        result.attack_events,
        result.targets,
        result.landing.ledger.as_dict(),
        landing_events,
        metadata,
        fit=fit,
        rank_histogram=_rank_histogram(result, platform) if cfg.rank_histogram else None,
    )


def emit_artifacts(result: RunResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    cfg = result.config
    with open(os.path.join(out_dir, "run_log.jsonl"), "w", encoding="utf-8") as f:
        for entry in result.run_log:
            f.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
    write_ledger(os.path.join(out_dir, "ledger.json"), result.landing.ledger)
    write_targets_csv(os.path.join(out_dir, "targets.csv"), result.targets)
    if result.report is not None:
        write_report(os.path.join(out_dir, "report.json"), result.report)
    with open(os.path.join(out_dir, "config.yaml"), "w", encoding="utf-8") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=True, allow_unicode=True)
    if cfg.emit_capture:
        with open(os.path.join(out_dir, "capture.jsonl"), "w", encoding="utf-8") as f:
            for line in result.capture_lines:
                f.write(line + "\n")
