"""Built-in scenario presets exp1..exp4.

Each preset pins its seed, per-bot attack quotas and pacing so the
campaign counters replay exactly: exp2 delivers 65 stimuli (33 sports,
32 entertainment) with both accounts banned inside 3.5 hours, exp3
delivers 336/160/245 attacks with one of three accounts banned inside
two days, and exp4 delivers 353/216 attacks across more than ten days
without a single ban.
"""

from __future__ import annotations

from .campaign import BackgroundSpec, BotSpec, ScenarioConfig
from .simcore import PopulationSpec, ThemePopulationSpec
from .victim import SusceptibilityParams

HOUR = 3600
DAY = 86400

PRESET_NAMES = ("exp1", "exp2", "exp3", "exp4")


def _population(**counts: int) -> PopulationSpec:
    return PopulationSpec(
        themes={theme: ThemePopulationSpec(count=n) for theme, n in counts.items()}
    )


def exp1(seed: int = 101) -> ScenarioConfig:
    """Capture-only: one day of keyword streams, no attacks."""
    return ScenarioConfig(
        name="exp1",
        seed=seed,
        duration=24 * HOUR,
        population=_population(politics=400, sports=400, entertainment=400),
        bots=[],
        emit_capture=True,
        rank_histogram=True,
    )


def exp2(seed: int = 206) -> ScenarioConfig:
    """First attack wave: two blunt v2 bots, banned within hours.

    Victim behavior is planted so nearly every sports target engages
    while entertainment targets almost never do.
    """
    victim = SusceptibilityParams(
        beta={"intercept": 3.5, "theme_entertainment": -6.7},
        register_given_visit=0.5,
        complaint_prob=0.0,
        doc_click_given_visit=0.05,
    )
    return ScenarioConfig(
        name="exp2",
        seed=seed,
        duration=int(3.5 * HOUR),
        population=_population(sports=120, entertainment=120),
        bots=[
            BotSpec(theme="sports", policy_version="v2", max_rate=11.0, attack_quota=33),
            BotSpec(theme="entertainment", policy_version="v2", max_rate=12.0,
                    attack_quota=32),
        ],
        victim=victim,
        background=BackgroundSpec(tweets_per_account=2, active_window_frac=0.7),
    )


def exp3(seed: int = 303) -> ScenarioConfig:
    """Mitigated wave: three v3 bots around the clock; the fastest one
    still accumulates rate and continuity points and loses its account."""
    victim = SusceptibilityParams(
        beta={"intercept": -1.4, "theme_politics": 0.3},
        register_given_visit=0.2,
        complaint_prob=0.001,
        doc_click_given_visit=0.02,
    )
    return ScenarioConfig(
        name="exp3",
        seed=seed,
        duration=60 * HOUR,
        population=_population(politics=800, sports=400, entertainment=600),
        bots=[
            BotSpec(theme="politics", policy_version="v3", max_rate=12.0, attack_quota=336),
            BotSpec(theme="sports", policy_version="v3", max_rate=26.0, attack_quota=160),
            BotSpec(theme="entertainment", policy_version="v3", max_rate=12.0,
                    attack_quota=245),
        ],
        victim=victim,
        background=BackgroundSpec(tweets_per_account=2, active_window_frac=0.8),
    )


def exp4(seed: int = 404) -> ScenarioConfig:
    """Paced wave: two v4 bots with night pauses and target skipping;
    twelve days, no bans."""
    victim = SusceptibilityParams(
        beta={"intercept": 1.0, "theme_politics": 0.8, "age_years": -0.3,
              "follower_rank": 0.2},
        register_given_visit=0.2,
        complaint_prob=0.001,
        doc_click_given_visit=0.02,
    )
    return ScenarioConfig(
        name="exp4",
        seed=seed,
        duration=12 * DAY,
        population=_population(politics=1200, sports=700),
        bots=[
            BotSpec(theme="politics", policy_version="v4", max_rate=4.0, attack_quota=353),
            BotSpec(theme="sports", policy_version="v4", max_rate=4.0, attack_quota=216),
        ],
        victim=victim,
        background=BackgroundSpec(tweets_per_account=2, active_window_frac=0.9),
    )


PRESETS = {"exp1": exp1, "exp2": exp2, "exp3": exp3, "exp4": exp4}


def load_preset(name: str, seed: int | None = None) -> ScenarioConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    return PRESETS[name]() if seed is None else PRESETS[name](seed)
