"""Command line front end: run or validate a campaign scenario."""

from __future__ import annotations

import argparse
import sys

import yaml

from .campaign import (
    ScenarioConfig,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    run_campaign,
    validate_config_dict,
)
from .presets import PRESET_NAMES, load_preset


def _add_common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=PRESET_NAMES, help="built-in scenario")
    group.add_argument("--config", metavar="PATH", help="scenario config file (YAML)")
    parser.add_argument("--seed", type=int, default=None, help="override the run seed")
    parser.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="dotted-path config override, repeatable",
    )


def _load_config(args: argparse.Namespace) -> tuple[ScenarioConfig, list[str]]:
    if args.preset:
        obj = config_to_dict(load_preset(args.preset, args.seed))
    else:
        with open(args.config, "r", encoding="utf-8") as f:
            obj = yaml.safe_load(f)
        if args.seed is not None:
            obj["seed"] = args.seed
    apply_overrides(obj, args.override)
    diags = validate_config_dict(obj)
    if diags:
        return None, diags  # type: ignore[return-value]
    return config_from_dict(obj), []


def _print_summary(result) -> None:
    cfg = result.config
    print(f"scenario {cfg.name}  seed {cfg.seed}  duration {cfg.duration}s")
    stimuli = result.stimuli_by_theme
    print(f"stimuli: total {sum(stimuli.values())} " +
          " ".join(f"{t}={n}" for t, n in sorted(stimuli.items())))
    for bot in result.bots:
        state = f"banned at t={bot.banned_at}" if bot.banned_at is not None else "active"
        print(f"bot {bot.theme}/{bot.policy_version} [{bot.pseudonym}]: "
              f"{bot.attacks_sent} attacks, {bot.legit_sent} legit, {state}")
    led = result.landing.ledger
    print(f"landing: unique={led.unique_visitors} visits={led.total_visits} "
          f"registered={led.registered_access} plain={led.unregistered_access} "
          f"news={led.news_visits} doc={led.project_downloads}")
    hits = result.hits_by_theme
    if hits:
        print("hits: " + " ".join(f"{t}={n}" for t, n in sorted(hits.items())))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phishsim",
        description="deterministic phishing-campaign simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and emit artifacts")
    _add_common(run_p)
    run_p.add_argument("--out", metavar="DIR", default=None,
                       help="artifact output directory")

    val_p = sub.add_parser("validate", help="check a scenario config")
    _add_common(val_p)

    args = parser.parse_args(argv)
    cfg, diags = _load_config(args)

    if args.command == "validate":
        for d in diags:
            print(d)
        print("ok" if not diags else f"{len(diags)} problem(s) found")
        return 0

    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return 2
    result = run_campaign(cfg, out_dir=args.out)
    _print_summary(result)
    if args.out:
        print(f"artifacts written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
