"""The agent: execution and playing pathways over one scenario.

A SkillRecord bundles everything one complex skill needs: its clip network,
the trained per-sensing-action state models, learning constants, and the
sliding confidence window.  Executing a skill runs the pathway
sense -> classify -> prepare -> execute; playing repeats executions with
weight updates and randomized restarts until the skill is confident.

Grasp-dependent skills take the weighing shortcut: their network senses only
through `weigh` (whose semantics are hard-coded, no learned classifier), and
the preparation step is gated — an already-grasped object skips preparation
entirely, otherwise only grasp-producing preparatory skills are admissible.

Confident skills can be registered as preparatory skills of other skills,
which nests their whole execution pathway behind a single layer-4 clip.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import (
    DiscriminationScore,
    HapticTimeSeries,
    StateModel,
    classify,
    discrimination_score,
    load_model,
    rate_sensing_actions,
    save_model,
    train,
)
from .clipnet import (
    ClipNetwork,
    LearningParams,
    WalkPath,
    apply_damping,
    add_preparatory_clip,
    deserialize_network,
    init_network,
    random_walk,
    serialize_network,
    state_clip_id,
    update_weights,
)
from .world import (
    WEIGH_ID,
    ComplexSkillDef,
    Scenario,
    WorldState,
    apply_prep,
    aspect_classes,
    attempt_complex,
    load_scenario,
    randomize_start,
    reward_of,
    sense,
    sense_weigh,
    weigh_says_grasped,
)

LEARNING = "learning"
CONFIDENT = "confident"
REGISTERED = "registered-as-prep"

GRASPED = "grasped"
NOT_GRASPED = "not-grasped"

ROLLOUT_COLUMNS = ["rollout", "sensing", "state", "prep", "success", "reward", "confidence"]
REGISTRY_FORMAT_TAG = "skill-registry/v1"
REGISTRY_FILE = "registry.json"


@dataclass(frozen=True)
class RolloutRecord:
    """One execution of a complex skill plus its outcome.

    path is None when the grasp gate left nothing admissible (the roll-out
    failed without a walk).  confidence is the sliding-window mean after
    this roll-out was absorbed (0.0 outside of play).
    """

    rollout_index: int
    sensing_action: str
    estimated_state: str
    prep: str
    success: bool
    reward: float
    path: WalkPath | None
    sensed_series_id: str = ""
    confidence: float = 0.0


@dataclass
class SkillRecord:
    """One complex skill's learning state."""

    skill: ComplexSkillDef
    scenario: Scenario
    network: ClipNetwork
    models: dict[str, StateModel]
    scores: dict[str, DiscriminationScore]
    params: LearningParams
    window_size: int = 100
    threshold: float = 0.9
    status: str = LEARNING
    rollouts_played: int = 0
    window: deque = field(default_factory=deque)
    prep_records: dict[str, "SkillRecord"] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValueError("window size must be positive")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        self.window = deque(self.window, maxlen=self.window_size)

    @property
    def confidence(self) -> float:
        """Mean success over the last min(window_size, n) roll-outs."""
        if not self.window:
            return 0.0
        return sum(self.window) / len(self.window)

    @property
    def produces_grasp(self) -> bool:
        return self.skill.effect.get("grasped") is True


# -- haptic database -----------------------------------------------------------


def create_haptic_database(
    scenario: Scenario,
    sensing_actions: list[str],
    samples_per_state: int,
    supervised: bool,
    rng: np.random.Generator,
) -> list[HapticTimeSeries]:
    """Collect a labeled training set for the given sensing actions.

    Supervised mode puts the world into each ground-truth class directly and
    labels series with the class name.  Unsupervised mode plays the
    scenario's cycling prep and labels by visit position (s1, s2, ...): the
    same opaque label always means the same (unknown) world class because
    the cycle is deterministic, and all sensing actions share one pass
    through the cycle so their labels agree.
    """
    if samples_per_state < 1:
        raise ValueError("samples per state must be positive")
    actions = []
    for action_id in sensing_actions:
        if action_id not in scenario.sensing:
            raise ValueError(f"unknown sensing action: {action_id!r}")
        actions.append(scenario.sensing[action_id])
    out: list[HapticTimeSeries] = []
    if supervised:
        for action in actions:
            for cls in aspect_classes(action.observes):
                if action.observes == "orientation":
                    world = replace(scenario.initial_state, orientation=cls, grasped=False)
                else:
                    world = replace(scenario.initial_state, box_open=cls == "open", grasped=False)
                for i in range(samples_per_state):
                    series = sense(world, action, rng)
                    out.append(
                        replace(series, label=cls, series_id=f"{action.id}-{cls}-{i:03d}")
                    )
        return out
    if scenario.cycling_prep not in scenario.preps:
        raise ValueError(f"cycling prep {scenario.cycling_prep!r} missing from scenario")
    cycler = scenario.preps[scenario.cycling_prep]
    world = replace(scenario.initial_state, grasped=False)
    for rep in range(samples_per_state):
        for pos in range(scenario.cycling_period):
            label = f"s{pos + 1}"
            for action in actions:
                series = sense(world, action, rng)
                out.append(
                    replace(series, label=label, series_id=f"{action.id}-{label}-{rep:03d}")
                )
            world = apply_prep(world, cycler)
    return out


# -- record construction ---------------------------------------------------------


def build_skill_record(
    scenario: Scenario,
    skill_id: str,
    dataset: list[HapticTimeSeries] | None = None,
    *,
    params: LearningParams | None = None,
    alpha: float = 10.0,
    folds: int = 5,
    cv_seed: int = 0,
    window: int = 100,
    threshold: float = 0.9,
    length: int = 100,
    epochs: int = 80,
    learning_rate: float = 0.5,
    decay: float = 0.02,
) -> SkillRecord:
    """Train models, rate sensing actions, and initialize the clip network.

    Grasp-dependent skills sense only by weighing, whose discrimination is
    perfect by construction (thresholding, not learning), so they need no
    haptic database.
    """
    if skill_id not in scenario.complex_skills:
        raise ValueError(f"unknown complex skill: {skill_id!r}")
    skill = scenario.complex_skills[skill_id]
    if params is None:
        params = LearningParams()
    prep_ids = list(scenario.preps)

    if skill.requires_grasp:
        sensing = [
            (WEIGH_ID, [(GRASPED, GRASPED), (NOT_GRASPED, NOT_GRASPED)], discrimination_score(1.0, alpha))
        ]
        models: dict[str, StateModel] = {}
        scores = {
            WEIGH_ID: DiscriminationScore(WEIGH_ID, 1.0, alpha, discrimination_score(1.0, alpha))
        }
    else:
        if not dataset:
            raise ValueError(f"haptic database required to build {skill_id!r}")
        train_kwargs = dict(length=length, epochs=epochs, learning_rate=learning_rate, decay=decay)
        scores = rate_sensing_actions(dataset, alpha=alpha, folds=folds, seed=cv_seed, **train_kwargs)
        by_action: dict[str, list[HapticTimeSeries]] = {}
        for series in dataset:
            by_action.setdefault(series.sensing_action, []).append(series)
        models = {a: train(subset, **train_kwargs) for a, subset in by_action.items()}
        sensing = []
        for action_id in scenario.sensing:
            if action_id not in by_action:
                continue
            classes = aspect_classes(scenario.sensing[action_id].observes)
            states = [
                (label, label if label in classes else None)
                for label in sorted({s.label for s in by_action[action_id]})
            ]
            sensing.append((action_id, states, scores[action_id].score))
        if not sensing:
            raise ValueError("database covers no sensing action of this scenario")

    network = init_network(
        sensing, prep_ids, params, requires_grasp=skill.requires_grasp, owner_skill=skill_id
    )
    return SkillRecord(
        skill=skill,
        scenario=scenario,
        network=network,
        models=models,
        scores=scores,
        params=params,
        window_size=window,
        threshold=threshold,
    )


# -- execution pathway -----------------------------------------------------------


def _admissible_preps(record: SkillRecord, need_grasp: bool) -> frozenset[str]:
    """Layer-4 clips whose produces_grasp flag matches the gate."""
    out = []
    for prep_id in record.network.clips_in_layer(4):
        if prep_id in record.prep_records:
            produces = record.prep_records[prep_id].produces_grasp
        elif prep_id in record.scenario.preps:
            produces = record.scenario.preps[prep_id].produces_grasp
        else:
            produces = False
        if produces == need_grasp:
            out.append(prep_id)
    return frozenset(out)


def _run_prep(
    record: SkillRecord, prep_id: str, world: WorldState, rng: np.random.Generator
) -> WorldState:
    """Apply a base prep or execute a registered skill's whole pathway.

    Nested execution is pure: the nested record's network and confidence
    window are left untouched (only the outer skill is learning here).
    """
    nested = record.prep_records.get(prep_id)
    if nested is not None:
        _, world = execute_skill(nested, world, rng)
        return world
    return apply_prep(world, record.scenario.preps[prep_id])


def execute_skill(
    record: SkillRecord,
    world: WorldState,
    rng: np.random.Generator,
    *,
    rollout_index: int = 0,
) -> tuple[RolloutRecord, WorldState]:
    """One pass through the execution pathway.  No weights are touched; the
    caller decides whether the returned path is used for learning."""
    skill = record.skill
    scenario = record.scenario
    net = record.network

    if skill.requires_grasp:
        series = sense_weigh(world, scenario.weigh, rng)
        series_id = f"{skill.id}-r{rollout_index}-{WEIGH_ID}"
        grasped = weigh_says_grasped(series, scenario.weigh)
        label = GRASPED if grasped else NOT_GRASPED
        state_id = state_clip_id(WEIGH_ID, label)
        if grasped:
            # object already in hand: skip preparation, execute directly
            path = random_walk(net, state_id, rng, prep_override="nothing")
            success, world = attempt_complex(world, skill, rng)
            return (
                RolloutRecord(
                    rollout_index, WEIGH_ID, label, "nothing", success,
                    reward_of(success, record.params), path, series_id,
                ),
                world,
            )
        admissible = _admissible_preps(record, need_grasp=True)
        if not admissible:
            # nothing can produce a grasp yet: the roll-out fails outright
            return (
                RolloutRecord(
                    rollout_index, WEIGH_ID, label, "", False,
                    record.params.lambda_fail, None, series_id,
                ),
                world,
            )
        path = random_walk(net, state_id, rng, admissible_preps=admissible)
        prep_id = path.clip_ids[3]
        world = _run_prep(record, prep_id, world, rng)
        success, world = attempt_complex(world, skill, rng)
        return (
            RolloutRecord(
                rollout_index, WEIGH_ID, label, prep_id, success,
                reward_of(success, record.params), path, series_id,
            ),
            world,
        )

    admissible = _admissible_preps(record, need_grasp=False)
    if not admissible:
        return (
            RolloutRecord(
                rollout_index, "", "", "", False, record.params.lambda_fail, None, ""
            ),
            world,
        )
    captured: dict[str, str] = {}

    def resolve(sensing_id: str) -> str:
        action = scenario.sensing[sensing_id]
        series = sense(world, action, rng)
        label, _ = classify(record.models[sensing_id], series)
        captured["sensing"] = sensing_id
        captured["label"] = label
        return state_clip_id(sensing_id, label)

    path = random_walk(net, resolve, rng, admissible_preps=admissible)
    prep_id = path.clip_ids[3]
    series_id = f"{skill.id}-r{rollout_index}-{captured['sensing']}"
    world = _run_prep(record, prep_id, world, rng)
    success, world = attempt_complex(world, skill, rng)
    return (
        RolloutRecord(
            rollout_index, captured["sensing"], captured["label"], prep_id, success,
            reward_of(success, record.params), path, series_id,
        ),
        world,
    )


# -- playing pathway -------------------------------------------------------------


def play(
    record: SkillRecord,
    max_rollouts: int,
    rng: np.random.Generator,
    *,
    start_world: WorldState | None = None,
) -> tuple[SkillRecord, list[RolloutRecord]]:
    """Roll out, learn, randomize, repeat — until confident or exhausted.

    Confidence requires a full window: at least window_size roll-outs and a
    window mean at or above the threshold.  If max_rollouts runs out first
    the record simply stays in the learning status.
    """
    if max_rollouts < 0:
        raise ValueError("max_rollouts must be non-negative")
    world = start_world if start_world is not None else record.scenario.initial_state
    rollouts: list[RolloutRecord] = []
    for _ in range(max_rollouts):
        index = record.rollouts_played + 1
        rec, world = execute_skill(record, world, rng, rollout_index=index)
        if rec.path is None:
            apply_damping(record.network, record.params)
        else:
            update_weights(record.network, rec.path, rec.reward, record.params)
        record.window.append(1 if rec.success else 0)
        record.rollouts_played = index
        rec = replace(rec, confidence=record.confidence)
        rollouts.append(rec)
        world = randomize_start(world, rng)
        if len(record.window) >= record.window_size and record.confidence >= record.threshold:
            if record.status == LEARNING:
                record.status = CONFIDENT
            break
    return record, rollouts


# -- skill hierarchies -----------------------------------------------------------


def _uses_prep(record: SkillRecord, skill_id: str) -> bool:
    """True when skill_id already prepares `record`, directly or transitively."""
    stack = list(record.prep_records.values())
    seen = set()
    while stack:
        nested = stack.pop()
        if nested.skill.id == skill_id:
            return True
        if nested.skill.id in seen:
            continue
        seen.add(nested.skill.id)
        stack.extend(nested.prep_records.values())
    return False


def register_as_prep(
    record: SkillRecord, targets: list[SkillRecord]
) -> list[SkillRecord]:
    """Add a confident skill as a preparatory clip of every target network.

    Registration must keep the hierarchy a DAG: registering a skill into
    itself or into any skill it already (transitively) uses is an error.
    Re-registering into the same target is a no-op with a warning.
    """
    if record.status == LEARNING:
        raise ValueError(
            f"skill {record.skill.id!r} must reach confidence before registration"
        )
    for target in targets:
        if target is record or target.skill.id == record.skill.id:
            raise ValueError("cannot register a skill as its own preparatory skill")
        if _uses_prep(record, target.skill.id):
            raise ValueError(
                f"registration would create a cycle: {target.skill.id!r} already"
                f" prepares {record.skill.id!r}"
            )
        if record.skill.id in target.network.clips:
            warnings.warn(
                f"{record.skill.id!r} is already a preparatory skill of"
                f" {target.skill.id!r}; skipping",
                stacklevel=2,
            )
            continue
        add_preparatory_clip(target.network, record.skill.id, target.params)
        target.prep_records[record.skill.id] = record
    record.status = REGISTERED
    return list(targets)


# -- persistence -----------------------------------------------------------------


def save_rollout_log(path: str, rollouts: list[RolloutRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROLLOUT_COLUMNS)
        for rec in rollouts:
            writer.writerow(
                [
                    rec.rollout_index,
                    rec.sensing_action,
                    rec.estimated_state,
                    rec.prep,
                    int(rec.success),
                    repr(float(rec.reward)),
                    repr(float(rec.confidence)),
                ]
            )


def save_registry(directory: str, records: list[SkillRecord]) -> str:
    """Write the registry index plus one network file and the model files per
    skill.  Returns the registry path."""
    os.makedirs(directory, exist_ok=True)
    skills = []
    for record in records:
        network_file = f"{record.skill.id}.network.json"
        with open(os.path.join(directory, network_file), "w") as fh:
            fh.write(serialize_network(record.network))
        model_files = {}
        for action_id, model in sorted(record.models.items()):
            model_file = f"{record.skill.id}.{action_id}.model.json"
            save_model(os.path.join(directory, model_file), model)
            model_files[action_id] = model_file
        skills.append(
            {
                "id": record.skill.id,
                "scenario": record.scenario.source or record.scenario.name,
                "status": record.status,
                "confidence": record.confidence,
                "rollouts_played": record.rollouts_played,
                "window": [int(v) for v in record.window],
                "window_size": record.window_size,
                "threshold": record.threshold,
                "params": {
                    "lambda_succ": record.params.lambda_succ,
                    "lambda_fail": record.params.lambda_fail,
                    "h_init": record.params.h_init,
                    "gamma": record.params.gamma,
                },
                "scores": {
                    a: {"accuracy": s.accuracy, "alpha": s.alpha}
                    for a, s in sorted(record.scores.items())
                },
                "network_file": network_file,
                "model_files": model_files,
                "preps_registered": sorted(record.prep_records),
            }
        )
    registry_path = os.path.join(directory, REGISTRY_FILE)
    with open(registry_path, "w") as fh:
        json.dump({"format": REGISTRY_FORMAT_TAG, "skills": skills}, fh, indent=2)
        fh.write("\n")
    return registry_path


def load_registry(directory: str) -> dict[str, SkillRecord]:
    """Rebuild the records from a registry directory, re-linking registered
    preparatory skills in a second pass."""
    registry_path = os.path.join(directory, REGISTRY_FILE)
    with open(registry_path) as fh:
        doc = json.load(fh)
    if doc.get("format") != REGISTRY_FORMAT_TAG:
        raise ValueError(f"unsupported format tag: {doc.get('format')!r}")
    records: dict[str, SkillRecord] = {}
    links: dict[str, list[str]] = {}
    for entry in doc["skills"]:
        scenario = load_scenario(entry["scenario"])
        with open(os.path.join(directory, entry["network_file"])) as fh:
            network = deserialize_network(fh.read())
        models = {
            action: load_model(os.path.join(directory, file_name))
            for action, file_name in entry["model_files"].items()
        }
        params_doc = entry["params"]
        scores = {
            a: DiscriminationScore(
                a,
                float(s["accuracy"]),
                float(s["alpha"]),
                discrimination_score(float(s["accuracy"]), float(s["alpha"])),
            )
            for a, s in entry["scores"].items()
        }
        record = SkillRecord(
            skill=scenario.complex_skills[entry["id"]],
            scenario=scenario,
            network=network,
            models=models,
            scores=scores,
            params=LearningParams(
                lambda_succ=float(params_doc["lambda_succ"]),
                lambda_fail=float(params_doc["lambda_fail"]),
                h_init=float(params_doc["h_init"]),
                gamma=float(params_doc["gamma"]),
            ),
            window_size=int(entry["window_size"]),
            threshold=float(entry["threshold"]),
            status=entry["status"],
            rollouts_played=int(entry["rollouts_played"]),
            window=deque(int(v) for v in entry["window"]),
        )
        records[record.skill.id] = record
        links[record.skill.id] = list(entry.get("preps_registered", []))
    for skill_id, prep_ids in links.items():
        for prep_id in prep_ids:
            if prep_id not in records:
                raise ValueError(
                    f"registry lists unknown preparatory skill {prep_id!r}"
                    f" for {skill_id!r}"
                )
            records[skill_id].prep_records[prep_id] = records[prep_id]
    return records
