"""Deterministic simulator of automated phishing campaigns on a
synthetic microblogging platform: platform core, behavioral bot
detection, target sampling, attacker policies, an instrumented landing
service, a parametric victim model, and logistic-regression profiling.
"""

from .botagent import (
    BaitTemplate,
    BotAgent,
    BotPolicy,
    Corpus,
    ShortLink,
    Shortener,
    TokenBucket,
    craft_bait,
    policy_v2,
    policy_v3,
    policy_v4,
)
from .campaign import (
    BotSpec,
    RunResult,
    ScenarioConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    run_campaign,
    validate_config_dict,
)
from .detection import (
    AccountStanding,
    DetectionConfig,
    DetectionEngine,
    jaccard_3gram,
)
from .landing import HitLedger, LandingApp, LandingServer, VisitEvent
from .presets import PRESETS, load_preset
from .profiler import (
    FEATURE_COLUMNS,
    CampaignReport,
    FeatureMatrix,
    FitOptions,
    RegressionFit,
    build_features,
    feature_row,
    fit_logistic,
    summarize_report,
)
from .sampler import (
    PseudonymRegistry,
    RankBanding,
    SamplingPolicy,
    TargetRecord,
    TargetSampler,
    follower_rank,
)
from .simcore import (
    AccountProfile,
    EventScheduler,
    FlowBuffer,
    Microblog,
    PopulationSpec,
    SimClock,
    ThemePopulationSpec,
    TweetRecord,
    generate_population,
)
from .victim import (
    BehaviorOutcome,
    SusceptibilityParams,
    decide_response,
    visit_probability,
)

__version__ = "0.1.0"
