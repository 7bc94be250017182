"""Parametric simulated user behavior.

A stimulated target either ignores the bait, visits the landing page
(optionally registering and/or downloading the project document), or
files a complaint. Visits follow a logistic model over the same feature
vector the profiler fits, so generated campaigns have a recoverable
ground truth.

Every draw is a pure function of (pseudonym, seed): outcomes do not
depend on the order targets are stimulated in.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .profiler import FEATURE_COLUMNS, feature_row
from .sampler import TargetRecord

# politics engages more than the sports reference; older accounts engage less
DEFAULT_BETA = {
    "intercept": 1.0,
    "theme_politics": 0.8,
    "theme_entertainment": -0.1,
    "log1p_followers": 0.02,
    "log1p_following": -0.02,
    "log1p_posts": 0.01,
    "age_years": -0.3,
    "follower_rank": 0.2,
}


@dataclass
class SusceptibilityParams:
    beta: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_BETA))
    register_given_visit: float = 0.2
    complaint_prob: float = 0.001
    doc_click_given_visit: float = 0.02

    def __post_init__(self):
        for name in ("register_given_visit", "complaint_prob", "doc_click_given_visit"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0,1]")
        unknown = set(self.beta) - set(FEATURE_COLUMNS)
        if unknown:
            raise ValueError(f"unknown beta features {sorted(unknown)}")
        for name, v in self.beta.items():
            if not math.isfinite(v):
                raise ValueError(f"beta[{name}] must be finite")

    def beta_vector(self) -> np.ndarray:
        return np.array([self.beta.get(c, 0.0) for c in FEATURE_COLUMNS])

    def to_json(self) -> str:
        return json.dumps(
            {
                "beta": self.beta,
                "register_given_visit": self.register_given_visit,
                "complaint_prob": self.complaint_prob,
                "doc_click_given_visit": self.doc_click_given_visit,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SusceptibilityParams":
        obj = json.loads(text)
        return cls(
            beta=dict(obj["beta"]),
            register_given_visit=obj["register_given_visit"],
            complaint_prob=obj["complaint_prob"],
            doc_click_given_visit=obj["doc_click_given_visit"],
        )


@dataclass
class BehaviorOutcome:
    kind: str  # ignore | visit | visit_register | complain
    doc_download: bool = False

    def __post_init__(self):
        if self.kind not in ("ignore", "visit", "visit_register", "complain"):
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        if self.doc_download and self.kind in ("ignore", "complain"):
            raise ValueError("document download requires a visit")

    @property
    def visits(self) -> bool:
        return self.kind in ("visit", "visit_register")


def logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def visit_probability(target: TargetRecord, params: SusceptibilityParams) -> float:
    """logistic(beta . features(target)) over the profiler's feature map."""
    return logistic(float(feature_row(target) @ params.beta_vector()))


def _unit_draws(pseudonym: str, seed: int, n: int) -> list[float]:
    """n uniforms in [0,1), a pure function of (pseudonym, seed)."""
    digest = hashlib.blake2b(
        f"{seed}:{pseudonym}".encode("utf-8"), digest_size=8 * n
    ).digest()
    return [
        int.from_bytes(digest[8 * i : 8 * (i + 1)], "big") / 2.0**64 for i in range(n)
    ]


def decide_response(target: TargetRecord, params: SusceptibilityParams,
                    seed: int) -> BehaviorOutcome:
    """Draw one outcome for one stimulus.

    Visit with the logistic probability; given a visit, register and
    download independently; given no visit, complain with the configured
    probability. Complaining and visiting are mutually exclusive.
    """
    u_visit, u_reg, u_doc, u_complain = _unit_draws(target.pseudonym, seed, 4)
    if u_visit < visit_probability(target, params):
        registers = u_reg < params.register_given_visit
        return BehaviorOutcome(
            kind="visit_register" if registers else "visit",
            doc_download=u_doc < params.doc_click_given_visit,
        )
    if u_complain < params.complaint_prob:
        return BehaviorOutcome(kind="complain")
    return BehaviorOutcome(kind="ignore")


def response_delay(pseudonym: str, seed: int, min_s: int = 60, max_s: int = 1800) -> int:
    """Seconds between stimulus and reaction, deterministic per target."""
    (u,) = _unit_draws(pseudonym, seed ^ 0xD31A, 1)
    return min_s + int(u * (max_s - min_s))
