"""Command-line front door.

Subcommands: gen-data, train, play, exec, converge, registry.  Every command
takes its settings from flags, falling back to an optional --config JSON
file and then to built-in defaults (flags win).  The merged effective
config is written next to the results together with a content fingerprint,
and all randomness flows from --seed through the documented purpose-string
derivation, so a rerun with the same flags reproduces every output byte
for byte.

Runtime failures print a single `error: ...` line on stderr and exit 1.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings

from . import __version__
from .agent import (
    LEARNING,
    build_skill_record,
    create_haptic_database,
    execute_skill,
    load_registry,
    play,
    register_as_prep,
    save_registry,
    save_rollout_log,
    _uses_prep,
)
from .classifier import (
    load_dataset_csv,
    rate_sensing_actions,
    save_dataset_csv,
    save_model,
    train,
)
from .clipnet import LearningParams
from .convergence import (
    ConvergenceScenario,
    run_population,
    save_curve_csv,
    save_sweep_csv,
    sweep_preps,
)
from .seeding import derive_rng
from .svgchart import write_line_chart
from .world import WorldState, load_scenario

OUT_DIR_ENV = "SKILLPLAY_OUT_DIR"

_GEN_DEFAULTS = {"scenario": "book", "samples": 50, "supervised": False, "seed": 0}
_TRAIN_DEFAULTS = {
    "dataset": None,
    "alpha": 10.0,
    "folds": 5,
    "length": 100,
    "epochs": 80,
    "learning_rate": 0.5,
    "decay": 0.02,
    "cv_seed": 0,
}
_PLAY_DEFAULTS = {
    "scenario": "book",
    "skill": None,
    "dataset": None,
    "samples": 50,
    "supervised": False,
    "max_rollouts": 300,
    "window": 100,
    "threshold": 0.9,
    "alpha": 10.0,
    "folds": 5,
    "epochs": 80,
    "lambda_succ": 1000.0,
    "lambda_fail": -30.0,
    "h_init": 200.0,
    "gamma": 0.0,
    "seed": 0,
}
_EXEC_DEFAULTS = {"scenario": "book", "skill": None, "world": "", "seed": 0}
_CONVERGE_DEFAULTS = {
    "agents": 10000,
    "rollouts": 1500,
    "preps": 6,
    "sweep": "",
    "threshold": 0.9,
    "accuracies": "0.93,0.27,0.40",
    "states": 4,
    "p_success": 0.98,
    "alpha": 10.0,
    "lambda_succ": 1000.0,
    "lambda_fail": -30.0,
    "h_init": 200.0,
    "gamma": 0.0,
    "seed": 0,
    "jobs": 1,
}


# -- plumbing ----------------------------------------------------------------------


def _resolve_out_dir(value: str | None) -> str:
    out = value or os.environ.get(OUT_DIR_ENV) or "skillplay-out"
    os.makedirs(out, exist_ok=True)
    return out


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    from_file: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            from_file = json.load(fh)
        unknown = sorted(set(from_file) - set(defaults))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    merged = {}
    for key, default in defaults.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
        elif key in from_file:
            merged[key] = from_file[key]
        else:
            merged[key] = default
    return merged


def _write_effective_config(out_dir: str, command: str, merged: dict) -> None:
    doc = dict(sorted(merged.items()))
    doc["command"] = command
    doc["package_version"] = __version__
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    doc["fingerprint"] = hashlib.sha256(canonical.encode()).hexdigest()[:12]
    path = os.path.join(out_dir, f"{command}.config.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def _parse_world(scenario_initial: WorldState, text: str) -> WorldState:
    """Apply `key=value,key=value` overrides to the scenario's start state."""
    from dataclasses import replace

    if not text:
        return scenario_initial
    overrides: dict[str, object] = {}
    for chunk in text.split(","):
        if "=" not in chunk:
            raise ValueError(f"bad world override (expected key=value): {chunk!r}")
        key, _, raw = chunk.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key == "orientation":
            overrides[key] = raw
        elif key in ("grasped", "box_open", "object_in_box"):
            if raw not in ("true", "false"):
                raise ValueError(f"bad boolean for {key!r}: {raw!r}")
            overrides[key] = raw == "true"
        else:
            raise ValueError(f"unknown world field: {key!r}")
    return replace(scenario_initial, **overrides)


# -- subcommands -------------------------------------------------------------------


def cmd_gen_data(args: argparse.Namespace) -> int:
    merged = _merge_config(args, _GEN_DEFAULTS)
    if merged["samples"] < 1:
        raise ValueError("samples must be positive")
    out_dir = _resolve_out_dir(args.out)
    scenario = load_scenario(merged["scenario"])
    rng = derive_rng(merged["seed"], f"gen-data|{scenario.name}")
    dataset = create_haptic_database(
        scenario, list(scenario.sensing), merged["samples"], merged["supervised"], rng
    )
    path = os.path.join(out_dir, f"{scenario.name}-haptic.csv")
    save_dataset_csv(path, dataset)
    _write_effective_config(out_dir, "gen-data", merged)
    print(f"wrote {len(dataset)} series to {path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    merged = _merge_config(args, _TRAIN_DEFAULTS)
    if not merged["dataset"]:
        raise ValueError("a dataset file is required (--dataset)")
    if not os.path.exists(merged["dataset"]):
        raise ValueError(f"dataset not found: {merged['dataset']}")
    out_dir = _resolve_out_dir(args.out)
    dataset = load_dataset_csv(merged["dataset"])
    train_kwargs = dict(
        length=merged["length"],
        epochs=merged["epochs"],
        learning_rate=merged["learning_rate"],
        decay=merged["decay"],
    )
    scores = rate_sensing_actions(
        dataset,
        alpha=merged["alpha"],
        folds=merged["folds"],
        seed=merged["cv_seed"],
        **train_kwargs,
    )
    by_action: dict[str, list] = {}
    for series in dataset:
        by_action.setdefault(series.sensing_action, []).append(series)
    for action in sorted(by_action):
        model = train(by_action[action], **train_kwargs)
        save_model(os.path.join(out_dir, f"{action}.model.json"), model)
    report_path = os.path.join(out_dir, "discrimination.csv")
    ranked = sorted(scores.values(), key=lambda s: (-s.score, s.sensing_action))
    import csv as _csv

    with open(report_path, "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["sensing_action", "accuracy", "D"])
        for entry in ranked:
            writer.writerow(
                [entry.sensing_action, repr(float(entry.accuracy)), repr(float(entry.score))]
            )
    _write_effective_config(out_dir, "train", merged)
    for entry in ranked:
        print(f"{entry.sensing_action}: accuracy={entry.accuracy:.4f} D={entry.score:.2f}")
    return 0


def cmd_play(args: argparse.Namespace) -> int:
    merged = _merge_config(args, _PLAY_DEFAULTS)
    if not merged["skill"]:
        raise ValueError("a complex skill is required (--skill)")
    out_dir = _resolve_out_dir(args.out)
    scenario = load_scenario(merged["scenario"])
    if merged["skill"] not in scenario.complex_skills:
        raise ValueError(f"unknown skill id: {merged['skill']!r}")
    params = LearningParams(
        lambda_succ=merged["lambda_succ"],
        lambda_fail=merged["lambda_fail"],
        h_init=merged["h_init"],
        gamma=merged["gamma"],
    )
    registry_file = os.path.join(out_dir, "registry.json")
    records = load_registry(out_dir) if os.path.exists(registry_file) else {}
    skill_id = merged["skill"]
    if skill_id in records:
        record = records[skill_id]
    else:
        skill = scenario.complex_skills[skill_id]
        dataset = None
        if not skill.requires_grasp:
            if merged["dataset"]:
                dataset = load_dataset_csv(merged["dataset"])
            else:
                rng_db = derive_rng(merged["seed"], f"db|{scenario.name}")
                dataset = create_haptic_database(
                    scenario,
                    list(scenario.sensing),
                    merged["samples"],
                    merged["supervised"],
                    rng_db,
                )
        record = build_skill_record(
            scenario,
            skill_id,
            dataset,
            params=params,
            alpha=merged["alpha"],
            folds=merged["folds"],
            epochs=merged["epochs"],
            window=merged["window"],
            threshold=merged["threshold"],
        )
        records[skill_id] = record
    # hierarchy: adopt every already-learned skill as a candidate prep
    for other in records.values():
        if other is record or other.status == LEARNING:
            continue
        if other.skill.id in record.network.clips or _uses_prep(other, skill_id):
            continue
        register_as_prep(other, [record])
    rng_play = derive_rng(merged["seed"], f"play|{skill_id}|{record.rollouts_played}")
    record, rollouts = play(record, merged["max_rollouts"], rng_play)
    save_rollout_log(os.path.join(out_dir, f"{skill_id}.rollouts.csv"), rollouts)
    save_registry(out_dir, list(records.values()))
    _write_effective_config(out_dir, "play", merged)
    print(
        f"{skill_id}: status={record.status} confidence={record.confidence:.3f}"
        f" rollouts={record.rollouts_played}"
    )
    return 0


def cmd_exec(args: argparse.Namespace) -> int:
    merged = _merge_config(args, _EXEC_DEFAULTS)
    if not merged["skill"]:
        raise ValueError("a complex skill is required (--skill)")
    registry_dir = _resolve_out_dir(args.out)
    if not os.path.exists(os.path.join(registry_dir, "registry.json")):
        raise ValueError(f"no skill registry in {registry_dir}")
    records = load_registry(registry_dir)
    if merged["skill"] not in records:
        raise ValueError(f"unknown skill id: {merged['skill']!r}")
    record = records[merged["skill"]]
    world = _parse_world(record.scenario.initial_state, merged["world"])
    rng = derive_rng(merged["seed"], f"exec|{merged['skill']}")
    rec, after = execute_skill(record, world, rng)
    print(f"skill:    {record.skill.id}")
    print(f"sensing:  {rec.sensing_action or '(none admissible)'}")
    print(f"state:    {rec.estimated_state}")
    print(f"prep:     {rec.prep or '(none)'}")
    print(f"success:  {'yes' if rec.success else 'no'} (reward {rec.reward:g})")
    print(
        f"world:    orientation={after.orientation} grasped={after.grasped}"
        f" box_open={after.box_open} object_in_box={after.object_in_box}"
    )
    return 0


def cmd_converge(args: argparse.Namespace) -> int:
    merged = _merge_config(args, _CONVERGE_DEFAULTS)
    out_dir = _resolve_out_dir(args.out)
    params = LearningParams(
        lambda_succ=merged["lambda_succ"],
        lambda_fail=merged["lambda_fail"],
        h_init=merged["h_init"],
        gamma=merged["gamma"],
    )
    scenario = ConvergenceScenario(
        sensing_accuracies=tuple(_float_list(merged["accuracies"])),
        num_states=merged["states"],
        complex_success=merged["p_success"],
        num_preps=merged["preps"],
        alpha=merged["alpha"],
        params=params,
    )
    sweep_points = _int_list(merged["sweep"]) if merged["sweep"] else []
    if sweep_points:
        table = sweep_preps(
            scenario,
            sweep_points,
            merged["agents"],
            merged["rollouts"],
            merged["threshold"],
            merged["seed"],
            jobs=merged["jobs"],
        )
        save_sweep_csv(os.path.join(out_dir, "sweep.csv"), table)
        save_curve_csv(os.path.join(out_dir, "curve.csv"), table[0][1])
        xs = list(range(1, merged["rollouts"] + 1))
        write_line_chart(
            os.path.join(out_dir, "curve.svg"),
            [
                (f"N_p={n_preps}", xs, list(result.smoothed_curve))
                for n_preps, result in table
            ],
            title=f"Mean success over {merged['agents']} agents",
            x_label="roll-out",
            y_label="mean success",
            y_range=(0.0, 1.0),
        )
        for n_preps, result in table:
            crossing = "never" if result.n_r is None else str(result.n_r)
            print(f"N_p={n_preps}: N_r={crossing}")
    else:
        result = run_population(
            scenario,
            merged["agents"],
            merged["rollouts"],
            merged["threshold"],
            merged["seed"],
            jobs=merged["jobs"],
        )
        save_curve_csv(os.path.join(out_dir, "curve.csv"), result)
        xs = list(range(1, merged["rollouts"] + 1))
        write_line_chart(
            os.path.join(out_dir, "curve.svg"),
            [
                ("mean success", xs, list(result.success_curve)),
                ("smoothed", xs, list(result.smoothed_curve)),
            ],
            title=f"Mean success over {merged['agents']} agents",
            x_label="roll-out",
            y_label="mean success",
            y_range=(0.0, 1.0),
        )
        crossing = "never" if result.n_r is None else str(result.n_r)
        tail = result.success_curve[-100:].mean()
        print(f"N_p={merged['preps']}: N_r={crossing} tail-mean={tail:.4f}")
    _write_effective_config(out_dir, "converge", merged)
    return 0


def cmd_registry(args: argparse.Namespace) -> int:
    registry_dir = _resolve_out_dir(args.out)
    if not os.path.exists(os.path.join(registry_dir, "registry.json")):
        raise ValueError(f"no skill registry in {registry_dir}")
    records = load_registry(registry_dir)
    for skill_id in sorted(records):
        record = records[skill_id]
        preps = ",".join(sorted(record.prep_records)) or "-"
        print(
            f"{skill_id}: status={record.status} confidence={record.confidence:.3f}"
            f" rollouts={record.rollouts_played} preps={preps}"
        )
    return 0


# -- parser ------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; explicit flags win")
    sub.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./skillplay-out)")
    sub.add_argument("--seed", type=int, help="master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skillplay",
        description="Skill composition by playing: clip networks over simulated haptics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-data", help="generate a haptic training database")
    _add_common(p)
    p.add_argument("--scenario", help="scenario name or .scenario path")
    p.add_argument("--samples", type=int, help="series per state class per action")
    p.add_argument("--supervised", action="store_const", const=True, default=None,
                   help="label with ground-truth classes instead of cycling")
    p.set_defaults(func=cmd_gen_data)

    p = subs.add_parser("train", help="train state models and rate sensing actions")
    _add_common(p)
    p.add_argument("--dataset", help="haptic dataset CSV")
    p.add_argument("--alpha", type=float, help="discrimination stretch factor")
    p.add_argument("--folds", type=int, help="cross-validation folds")
    p.add_argument("--length", type=int, help="resample length")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--decay", type=float, help="step-size decay")
    p.add_argument("--cv-seed", dest="cv_seed", type=int, help="fold assignment seed")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("play", help="learn a complex skill by playing")
    _add_common(p)
    p.add_argument("--scenario", help="scenario name or .scenario path")
    p.add_argument("--skill", help="complex skill id")
    p.add_argument("--dataset", help="existing haptic dataset CSV (otherwise generated)")
    p.add_argument("--samples", type=int, help="series per state when generating")
    p.add_argument("--supervised", action="store_const", const=True, default=None)
    p.add_argument("--max-rollouts", dest="max_rollouts", type=int)
    p.add_argument("--window", type=int, help="confidence window size")
    p.add_argument("--threshold", type=float, help="confidence threshold")
    p.add_argument("--alpha", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lambda-succ", dest="lambda_succ", type=float)
    p.add_argument("--lambda-fail", dest="lambda_fail", type=float)
    p.add_argument("--h-init", dest="h_init", type=float)
    p.add_argument("--gamma", type=float)
    p.set_defaults(func=cmd_play)

    p = subs.add_parser("exec", help="execute a learned skill once and print the trace")
    _add_common(p)
    p.add_argument("--scenario", help="scenario name or .scenario path")
    p.add_argument("--skill", help="complex skill id")
    p.add_argument("--world", help="start-state overrides, e.g. orientation=open,grasped=false")
    p.set_defaults(func=cmd_exec)

    p = subs.add_parser("converge", help="population convergence study")
    _add_common(p)
    p.add_argument("--agents", type=int)
    p.add_argument("--rollouts", type=int)
    p.add_argument("--preps", type=int, help="number of preparatory skills N_p")
    p.add_argument("--sweep", help="comma-separated N_p list, e.g. 6,20,30,39")
    p.add_argument("--threshold", type=float)
    p.add_argument("--accuracies", help="comma-separated sensing accuracies")
    p.add_argument("--states", type=int)
    p.add_argument("--p-success", dest="p_success", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda-succ", dest="lambda_succ", type=float)
    p.add_argument("--lambda-fail", dest="lambda_fail", type=float)
    p.add_argument("--h-init", dest="h_init", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--jobs", type=int, help="worker threads for the population")
    p.set_defaults(func=cmd_converge)

    p = subs.add_parser("registry", help="list learned skills")
    _add_common(p)
    p.set_defaults(func=cmd_registry)
    return parser


def entry(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        message = str(exc) or exc.__class__.__name__
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(entry())
