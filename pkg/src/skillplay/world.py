"""Simulated tabletop environments for playing with objects.

A scenario bundles the hidden world state, sensing actions that emit
synthetic haptic time series without touching the state, preparatory skills
that transform the state deterministically, and complex skills that succeed
with a fixed probability once their narrow precondition holds.

Haptic signals are generated from parametric prototypes: per (sensing
action, state class), a deterministic pattern (step + ramp + one sinusoid
with class-indexed parameters) scaled into the nine channels, plus Gaussian
noise.  The per-action `separation` constants shipped in the scenario files
are calibrated so the induced cross-validated classifier accuracies land on
the intended targets; only those accuracies matter downstream.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import N_CHANNELS, HapticTimeSeries

ORIENTATIONS = ("bottom", "binding", "open", "top")
GRASP_ORIENTATION = "binding"
LID_CLASSES = ("closed", "open")
WEIGH_ID = "weigh"
SCENARIO_FORMAT_TAG = "scenario/v1"
TRANSFORMS = ("rot90", "rot180", "rot270", "flip", "nothing")


@dataclass(frozen=True)
class WorldState:
    """Hidden environment state; the agent only ever sees haptic series."""

    orientation: str = "bottom"
    grasped: bool = False
    box_open: bool = False
    object_in_box: bool = False

    def __post_init__(self) -> None:
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation: {self.orientation!r}")


@dataclass(frozen=True)
class SensingActionDef:
    """A controller that measures without changing the world.

    observes names the world aspect the emitted signal depends on
    ("orientation" or "lid"); the remaining fields parameterize the
    synthetic haptic generator.
    """

    id: str
    observes: str
    base: tuple[float, ...]
    channel_weights: tuple[float, ...]
    separation: float
    noise: float
    length: int = 100
    duration: float = 1.0

    def __post_init__(self) -> None:
        if self.observes not in ("orientation", "lid"):
            raise ValueError(f"unknown observed aspect: {self.observes!r}")
        if len(self.base) != N_CHANNELS or len(self.channel_weights) != N_CHANNELS:
            raise ValueError(f"base and channel_weights must have {N_CHANNELS} entries")
        if self.length < 2:
            raise ValueError("length must be at least 2")
        if self.noise < 0.0 or self.separation < 0.0:
            raise ValueError("noise and separation must be non-negative")


@dataclass(frozen=True)
class PreparatorySkillDef:
    id: str
    transform: str
    produces_grasp: bool = False

    def __post_init__(self) -> None:
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform: {self.transform!r}")


@dataclass(frozen=True)
class ComplexSkillDef:
    """A taught controller with a narrow precondition and Bernoulli success."""

    id: str
    precondition: dict[str, object]
    success_prob: float
    requires_grasp: bool
    effect: dict[str, object]

    def __post_init__(self) -> None:
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError(f"success_prob must lie in [0, 1], got {self.success_prob!r}")
        for cond in (self.precondition, self.effect):
            for key in cond:
                if key not in WorldState.__dataclass_fields__:
                    raise ValueError(f"unknown world field: {key!r}")


@dataclass(frozen=True)
class WeighDef:
    """Weighing senses grasp status directly: |F| above threshold iff grasped."""

    grasped_force: float = 20.0
    threshold: float = 5.0
    noise: float = 0.5
    length: int = 20
    duration: float = 0.2


@dataclass(frozen=True)
class Scenario:
    name: str
    initial_state: WorldState
    sensing: dict[str, SensingActionDef]
    weigh: WeighDef
    preps: dict[str, PreparatorySkillDef]
    complex_skills: dict[str, ComplexSkillDef]
    cycling_prep: str = "rot90"
    cycling_period: int = 4
    source: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.sensing:
            raise ValueError("scenario needs at least one sensing action")
        if not self.preps:
            raise ValueError("scenario needs at least one preparatory skill")
        if self.cycling_prep not in self.preps:
            raise ValueError(f"cycling prep {self.cycling_prep!r} is not a defined prep")
        if self.cycling_period < 1:
            raise ValueError("cycling period must be positive")


# -- state classes -------------------------------------------------------------


def aspect_classes(aspect: str) -> tuple[str, ...]:
    if aspect == "orientation":
        return ORIENTATIONS
    if aspect == "lid":
        return LID_CLASSES
    raise ValueError(f"unknown observed aspect: {aspect!r}")


def true_class(world: WorldState, action: SensingActionDef) -> str:
    """The ground-truth perceptual class the action's signal encodes."""
    if action.observes == "orientation":
        return world.orientation
    return "open" if world.box_open else "closed"


# -- sensing -------------------------------------------------------------------


def _class_pattern(x: np.ndarray, class_index: int, n_classes: int) -> np.ndarray:
    """Deterministic prototype over normalized time x in [0, 1]."""
    step = np.where(x >= (class_index + 1) / (n_classes + 1), 1.0, 0.0)
    ramp = (class_index - (n_classes - 1) / 2.0) * x
    wave = np.sin(2.0 * np.pi * (1.0 + class_index) * x + np.pi * class_index / n_classes)
    return step + ramp + wave


def prototype(action: SensingActionDef, state_class: str) -> np.ndarray:
    """Noise-free (length, 9) signal for one state class."""
    classes = aspect_classes(action.observes)
    if state_class not in classes:
        raise ValueError(f"{state_class!r} is not a class of aspect {action.observes!r}")
    x = np.linspace(0.0, 1.0, action.length)
    pattern = _class_pattern(x, classes.index(state_class), len(classes))
    base = np.array(action.base)
    gains = np.array(action.channel_weights)
    return base[None, :] + action.separation * pattern[:, None] * gains[None, :]


def sense(
    world: WorldState, action: SensingActionDef, rng: np.random.Generator
) -> HapticTimeSeries:
    """Execute a sensing action: prototype of the true class plus noise.

    The world is untouched; exactly one rng.normal block of shape
    (length, 9) is consumed.
    """
    values = prototype(action, true_class(world, action))
    if action.noise > 0.0:
        values = values + rng.normal(0.0, action.noise, size=values.shape)
    else:
        rng.normal(0.0, 1.0, size=values.shape)  # keep the stream layout fixed
    t = np.linspace(0.0, action.duration, action.length)
    return HapticTimeSeries(
        t=t,
        force=values[:, 0:3],
        torque=values[:, 3:6],
        position=values[:, 6:9],
        sensing_action=action.id,
    )


def sense_weigh(
    world: WorldState, weigh: WeighDef, rng: np.random.Generator
) -> HapticTimeSeries:
    """Weighing: the z-force carries the object's weight iff grasped."""
    t = np.linspace(0.0, weigh.duration, weigh.length)
    values = rng.normal(0.0, weigh.noise, size=(weigh.length, N_CHANNELS))
    if world.grasped:
        values[:, 2] += weigh.grasped_force
    return HapticTimeSeries(
        t=t,
        force=values[:, 0:3],
        torque=values[:, 3:6],
        position=values[:, 6:9],
        sensing_action=WEIGH_ID,
    )


def weigh_says_grasped(series: HapticTimeSeries, weigh: WeighDef) -> bool:
    """Threshold the mean force magnitude; no learned classifier involved."""
    return float(np.linalg.norm(series.force, axis=1).mean()) > weigh.threshold


# -- preparatory skills --------------------------------------------------------

_FLIP = {"bottom": "top", "top": "bottom", "binding": "open", "open": "binding"}


def _rotate(world: WorldState, quarter_turns: int) -> WorldState:
    index = ORIENTATIONS.index(world.orientation)
    return replace(world, orientation=ORIENTATIONS[(index + quarter_turns) % 4])


def apply_prep(world: WorldState, skill: PreparatorySkillDef) -> WorldState:
    """Deterministic state transform; total over WorldState.

    Rotations step the orientation cycle bottom -> binding -> open -> top.
    flip swaps bottom/top and binding/open and toggles the box lid (the same
    controller that turns an object over removes or replaces a cover).
    """
    if skill.transform == "rot90":
        return _rotate(world, 1)
    if skill.transform == "rot180":
        return _rotate(world, 2)
    if skill.transform == "rot270":
        return _rotate(world, 3)
    if skill.transform == "flip":
        flipped = replace(world, orientation=_FLIP[world.orientation])
        return replace(flipped, box_open=not world.box_open)
    return world  # nothing


# -- complex skills ------------------------------------------------------------


def precondition_holds(world: WorldState, skill: ComplexSkillDef) -> bool:
    return all(getattr(world, key) == value for key, value in skill.precondition.items())


def attempt_complex(
    world: WorldState, skill: ComplexSkillDef, rng: np.random.Generator
) -> tuple[bool, WorldState]:
    """Try the complex skill: Bernoulli(success_prob) given the precondition.

    The success draw is consumed only when the precondition holds, so a
    doomed attempt leaves the rng stream untouched.
    """
    if not precondition_holds(world, skill):
        return False, world
    if rng.random() >= skill.success_prob:
        return False, world
    return True, replace(world, **skill.effect)


def reward_of(success: bool, params) -> float:
    """Automatic reward estimate: the success/failure constants."""
    return params.lambda_succ if success else params.lambda_fail


def randomize_start(world: WorldState, rng: np.random.Generator) -> WorldState:
    """Prepare a fresh starting state between roll-outs.

    Orientation uniform, object released and taken back out of the box; the
    box lid keeps whatever position the previous roll-out left it in.
    """
    orientation = ORIENTATIONS[int(rng.integers(0, len(ORIENTATIONS)))]
    return replace(world, orientation=orientation, grasped=False, object_in_box=False)


# -- scenario files ------------------------------------------------------------


def _parse_scenario(doc: dict, source: str) -> Scenario:
    if doc.get("format") != SCENARIO_FORMAT_TAG:
        raise ValueError(f"unsupported format tag: {doc.get('format')!r}")
    sensing = {}
    for entry in doc["sensing"]:
        action = SensingActionDef(
            id=entry["id"],
            observes=entry["observes"],
            base=tuple(float(v) for v in entry["base"]),
            channel_weights=tuple(float(v) for v in entry["channel_weights"]),
            separation=float(entry["separation"]),
            noise=float(entry["noise"]),
            length=int(entry.get("length", 100)),
            duration=float(entry.get("duration", 1.0)),
        )
        if action.id in sensing:
            raise ValueError(f"duplicate sensing action: {action.id!r}")
        sensing[action.id] = action
    preps = {}
    for entry in doc["preps"]:
        prep = PreparatorySkillDef(
            id=entry["id"],
            transform=entry["transform"],
            produces_grasp=bool(entry.get("produces_grasp", False)),
        )
        if prep.id in preps:
            raise ValueError(f"duplicate preparatory skill: {prep.id!r}")
        preps[prep.id] = prep
    complex_skills = {}
    for entry in doc["complex_skills"]:
        skill = ComplexSkillDef(
            id=entry["id"],
            precondition=dict(entry["precondition"]),
            success_prob=float(entry["success_prob"]),
            requires_grasp=bool(entry["requires_grasp"]),
            effect=dict(entry["effect"]),
        )
        if skill.id in complex_skills:
            raise ValueError(f"duplicate complex skill: {skill.id!r}")
        complex_skills[skill.id] = skill
    weigh_doc = doc.get("weigh", {})
    return Scenario(
        name=doc["name"],
        initial_state=WorldState(**doc.get("initial_state", {})),
        sensing=sensing,
        weigh=WeighDef(
            grasped_force=float(weigh_doc.get("grasped_force", 20.0)),
            threshold=float(weigh_doc.get("threshold", 5.0)),
            noise=float(weigh_doc.get("noise", 0.5)),
            length=int(weigh_doc.get("length", 20)),
            duration=float(weigh_doc.get("duration", 0.2)),
        ),
        preps=preps,
        complex_skills=complex_skills,
        cycling_prep=doc.get("cycling_prep", "rot90"),
        cycling_period=int(doc.get("cycling_period", 4)),
        source=source,
    )


def load_scenario(name_or_path: str) -> Scenario:
    """Load a scenario by shipped name ("book", "box") or by file path."""
    if os.sep in name_or_path or name_or_path.endswith(".scenario"):
        with open(name_or_path) as fh:
            return _parse_scenario(json.load(fh), source=name_or_path)
    from importlib import resources

    ref = resources.files("skillplay.scenarios").joinpath(f"{name_or_path}.scenario")
    try:
        text = ref.read_text()
    except FileNotFoundError:
        raise ValueError(f"unknown scenario: {name_or_path!r}") from None
    return _parse_scenario(json.loads(text), source=name_or_path)
