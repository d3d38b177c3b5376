"""Four-layer clip network: the episodic memory behind skill selection.

A network owns a fixed topology of clips (layer 1: the start clip, layer 2:
sensing actions, layer 3: perceptual states, layer 4: preparatory skills)
with weighted directed edges between consecutive layers.  Action selection
is a stochastic walk from the start clip to a preparatory skill; transition
probabilities are edge weights normalized over the siblings
(p(j|i) = h_ij / sum_k h_ik).  The layer-2 -> 3 step is never sampled: it is
dictated by a time-series classifier, so the walk takes it as given.

Learning bumps weights along the traversed path and damps every edge toward
the floor of 1.0:

    h <- max(1.0, h - gamma * (h - 1) + rho * reward)

with rho = 1 exactly on traversed edges (the classifier-forced edge counts
as traversed) and rho = 0 elsewhere, applied once per roll-out.

Networks are mutated only through update_weights / apply_damping /
add_preparatory_clip; nothing here shares state across instances, so
separate agents can own separate networks without coordination.
"""

from __future__ import annotations

import json
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

START_ID = "#"
WEIGHT_FLOOR = 1.0
FORMAT_TAG = "clipnet/v1"

KIND_BY_LAYER = {
    1: "start",
    2: "sensing-action",
    3: "perceptual-state",
    4: "preparatory-skill",
}


def state_clip_id(sensing_id: str, state_label: str) -> str:
    """Canonical id of the layer-3 clip for one sensing action's state."""
    return f"{sensing_id}:{state_label}"


@dataclass(frozen=True)
class Clip:
    """One node of the network.

    label is the human-readable name; semantic_tag is set only when the
    ground-truth meaning of a perceptual state is known (supervised data).
    """

    id: str
    layer: int
    label: str
    semantic_tag: str | None = None

    def __post_init__(self) -> None:
        if self.layer not in KIND_BY_LAYER:
            raise ValueError(f"unknown layer: {self.layer}")

    @property
    def kind(self) -> str:
        return KIND_BY_LAYER[self.layer]


@dataclass
class LearningParams:
    """Reward and damping constants of the weight update."""

    lambda_succ: float = 1000.0
    lambda_fail: float = -30.0
    h_init: float = 200.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        if self.lambda_succ <= 0:
            raise ValueError("lambda_succ must be positive")
        if self.h_init < WEIGHT_FLOOR:
            raise ValueError("h_init must be at least the weight floor (1.0)")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")


@dataclass(frozen=True)
class WalkPath:
    """A complete walk: one clip per layer, in layer order.

    Transition i connects clip_ids[i] to clip_ids[i+1].  forced_transitions
    holds the indices that were not sampled: always index 1 (the
    classifier-determined state) and additionally index 2 when the
    preparation step was dictated rather than drawn.
    """

    clip_ids: tuple[str, str, str, str]
    forced_transitions: frozenset[int] = field(default_factory=lambda: frozenset({1}))

    def __post_init__(self) -> None:
        if len(self.clip_ids) != 4:
            raise ValueError("a walk visits exactly four clips")
        if not all(0 <= i <= 2 for i in self.forced_transitions):
            raise ValueError("transition indices must lie in {0, 1, 2}")

    def edges(self) -> tuple[tuple[str, str], ...]:
        c = self.clip_ids
        return ((c[0], c[1]), (c[1], c[2]), (c[2], c[3]))


class ClipNetwork:
    """Clip graph plus edge weights.  See the module docstring."""

    def __init__(self, owner_skill: str = "", requires_grasp: bool = False) -> None:
        self.owner_skill = owner_skill
        self.requires_grasp = requires_grasp
        self.clips: dict[str, Clip] = {}
        # parent id -> {child id: weight}, insertion-ordered; sampling and
        # serialization both rely on this order being stable.
        self._children: dict[str, dict[str, float]] = {}
        self._parent_of: dict[str, list[str]] = {}

    # -- construction ------------------------------------------------------

    def add_clip(self, clip: Clip) -> None:
        if clip.id in self.clips:
            raise ValueError(f"duplicate clip id: '{clip.id}'")
        if clip.layer == 1 and any(c.layer == 1 for c in self.clips.values()):
            raise ValueError("network already has a start clip")
        self.clips[clip.id] = clip
        self._children[clip.id] = {}
        self._parent_of[clip.id] = []

    def add_edge(self, parent_id: str, child_id: str, weight: float) -> None:
        if parent_id not in self.clips:
            raise ValueError(f"dangling edge: unknown clip '{parent_id}'")
        if child_id not in self.clips:
            raise ValueError(f"dangling edge: unknown clip '{child_id}'")
        p, c = self.clips[parent_id], self.clips[child_id]
        if c.layer != p.layer + 1:
            raise ValueError(
                f"edge must connect consecutive layers, got {p.layer} -> {c.layer}"
            )
        if child_id in self._children[parent_id]:
            raise ValueError(f"duplicate edge: '{parent_id}' -> '{child_id}'")
        if not weight >= WEIGHT_FLOOR:
            raise ValueError(f"weight below floor: {weight!r}")
        self._children[parent_id][child_id] = float(weight)
        self._parent_of[child_id].append(parent_id)

    # -- queries -----------------------------------------------------------

    @property
    def start_id(self) -> str:
        for cid, clip in self.clips.items():
            if clip.layer == 1:
                return cid
        raise ValueError("network has no start clip")

    def children(self, clip_id: str) -> dict[str, float]:
        """Outgoing edges of one clip.  Treat the mapping as read-only."""
        if clip_id not in self.clips:
            raise ValueError(f"unknown clip: '{clip_id}'")
        return self._children[clip_id]

    def weight(self, parent_id: str, child_id: str) -> float:
        kids = self._children.get(parent_id)
        if not kids or child_id not in kids:
            raise ValueError(f"no such transition: '{parent_id}' -> '{child_id}'")
        return kids[child_id]

    def clips_in_layer(self, layer: int) -> list[str]:
        return [cid for cid, c in self.clips.items() if c.layer == layer]

    def state_parent(self, state_id: str) -> str:
        """Unique layer-2 parent of a perceptual-state clip."""
        clip = self.clips.get(state_id)
        if clip is None or clip.layer != 3:
            raise ValueError(f"not a perceptual-state clip: '{state_id}'")
        return self._parent_of[state_id][0]

    def edge_items(self) -> list[tuple[str, str, float]]:
        return [
            (pid, cid, h)
            for pid, kids in self._children.items()
            for cid, h in kids.items()
        ]

    # -- invariants --------------------------------------------------------

    def validate(self) -> None:
        starts = self.clips_in_layer(1)
        if len(starts) != 1:
            raise ValueError(f"expected exactly one start clip, found {len(starts)}")
        for pid, cid, h in self.edge_items():
            if not h >= WEIGHT_FLOOR:
                raise ValueError(f"weight below floor: '{pid}' -> '{cid}' = {h!r}")
        for sid in self.clips_in_layer(3):
            parents = self._parent_of[sid]
            if len(parents) != 1:
                raise ValueError(
                    f"perceptual state '{sid}' must have exactly one sensing"
                    f" parent, found {len(parents)}"
                )
            if not self._children[sid]:
                raise ValueError(f"perceptual state '{sid}' has no preparatory child")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClipNetwork):
            return NotImplemented
        return (
            self.owner_skill == other.owner_skill
            and self.requires_grasp == other.requires_grasp
            and self.clips == other.clips
            and self._children == other._children
        )

    def __repr__(self) -> str:
        return (
            f"ClipNetwork(owner_skill={self.owner_skill!r},"
            f" clips={len(self.clips)}, edges={len(self.edge_items())})"
        )


# -- walk law ---------------------------------------------------------------


def transition_probability(net: ClipNetwork, from_id: str, to_id: str) -> float:
    """p(to|from) = h(from, to) / sum over the children of `from`."""
    kids = net._children.get(from_id)
    if not kids or to_id not in kids:
        raise ValueError(f"no such transition: '{from_id}' -> '{to_id}'")
    return kids[to_id] / sum(kids.values())


def sample_child(
    net: ClipNetwork,
    parent_id: str,
    rng: np.random.Generator,
    allowed: set[str] | None = None,
) -> str:
    """Draw one child proportionally to edge weight (inverse CDF over the
    children in insertion order).  Consumes exactly one uniform draw.

    `allowed` restricts (and renormalizes over) the candidate children.
    """
    kids = net.children(parent_id)
    if allowed is None:
        items = list(kids.items())
    else:
        items = [(c, h) for c, h in kids.items() if c in allowed]
    if not items:
        raise ValueError(f"no admissible transition from '{parent_id}'")
    u = rng.random()
    total = sum(h for _, h in items)
    acc = 0.0
    for cid, h in items:
        acc += h
        if u * total < acc:
            return cid
    return items[-1][0]


def random_walk(
    net: ClipNetwork,
    state_override: str | Callable[[str], str] | None,
    rng: np.random.Generator,
    *,
    admissible_preps: set[str] | None = None,
    prep_override: str | None = None,
) -> WalkPath:
    """One walk from the start clip to a preparatory skill.

    The layer-2 -> 3 step is never sampled, so the caller must supply the
    perceptual state:

    - as a callable mapping the sampled sensing-action id to a state clip id
      (the live path: the sensing step is drawn by the walk law, then the
      caller executes that sensing action and classifies the result), or
    - as a fixed layer-3 clip id, which pins the sensing step to its unique
      parent (useful when the state is already known).

    prep_override dictates the final step instead of sampling it; the path
    then marks transition 2 as forced as well.
    """
    if state_override is None:
        raise ValueError("state estimate required")
    start = net.start_id
    if callable(state_override):
        sensing = sample_child(net, start, rng)
        state = state_override(sensing)
        clip = net.clips.get(state)
        if clip is None or clip.layer != 3:
            raise ValueError(f"state estimate '{state}' is not a perceptual state")
        if state not in net._children[sensing]:
            raise ValueError(
                f"state estimate '{state}' does not belong to sensing action"
                f" '{sensing}'"
            )
    else:
        state = state_override
        clip = net.clips.get(state)
        if clip is None or clip.layer != 3:
            raise ValueError(f"state estimate '{state}' is not a perceptual state")
        sensing = net.state_parent(state)
    forced = {1}
    if prep_override is not None:
        if prep_override not in net._children[state]:
            raise ValueError(f"no such transition: '{state}' -> '{prep_override}'")
        prep = prep_override
        forced.add(2)
    else:
        prep = sample_child(net, state, rng, allowed=admissible_preps)
    return WalkPath((start, sensing, state, prep), frozenset(forced))


# -- learning ---------------------------------------------------------------


def update_weights(
    net: ClipNetwork, path: WalkPath, reward: float, params: LearningParams
) -> ClipNetwork:
    """Apply one roll-out's update to every edge of the network, in place.

    Traversed edges receive the reward; all edges are damped by gamma toward
    the floor.  Returns the same (mutated) network.
    """
    on_path = set(path.edges())
    for pid, cid in on_path:
        if cid not in net._children.get(pid, {}):
            raise ValueError(f"path edge not in network: '{pid}' -> '{cid}'")
    gamma = params.gamma
    for pid, kids in net._children.items():
        for cid, h in kids.items():
            rho = 1.0 if (pid, cid) in on_path else 0.0
            kids[cid] = max(WEIGHT_FLOOR, h - gamma * (h - WEIGHT_FLOOR) + rho * reward)
    return net


def apply_damping(net: ClipNetwork, params: LearningParams) -> ClipNetwork:
    """The update of a roll-out that traversed no path (nothing admissible):
    every edge is damped, none is rewarded."""
    gamma = params.gamma
    if gamma == 0.0:
        return net
    for kids in net._children.values():
        for cid, h in kids.items():
            kids[cid] = max(WEIGHT_FLOOR, h - gamma * (h - WEIGHT_FLOOR))
    return net


# -- construction of the standard topology -----------------------------------

StateSpec = str | tuple[str, str | None]


def init_network(
    sensing: list[tuple[str, list[StateSpec], float]],
    preps: list[str],
    params: LearningParams,
    requires_grasp: bool = False,
    owner_skill: str = "",
) -> ClipNetwork:
    """Build a fresh network.

    sensing: per sensing action (id, states, discrimination score D); each
    state is a label or a (label, semantic_tag) pair.  Start -> sensing edges
    are weighted by D, sensing -> state bookkeeping edges sit at the floor,
    and every state connects to every preparatory skill at h_init.
    """
    if not sensing:
        raise ValueError("at least one sensing action required")
    if not preps:
        raise ValueError("at least one preparatory skill required")
    net = ClipNetwork(owner_skill=owner_skill, requires_grasp=requires_grasp)
    net.add_clip(Clip(START_ID, 1, "start"))
    for prep_id in preps:
        net.add_clip(Clip(prep_id, 4, prep_id))
    for action_id, states, score in sensing:
        if not states:
            raise ValueError(f"sensing action '{action_id}' has no states")
        if not score >= WEIGHT_FLOOR:
            raise ValueError(
                f"discrimination score below weight floor for '{action_id}':"
                f" {score!r}"
            )
        net.add_clip(Clip(action_id, 2, action_id))
        net.add_edge(START_ID, action_id, score)
        for spec in states:
            label, tag = spec if isinstance(spec, tuple) else (spec, None)
            sid = state_clip_id(action_id, label)
            net.add_clip(Clip(sid, 3, label, semantic_tag=tag))
            net.add_edge(action_id, sid, WEIGHT_FLOOR)
            for prep_id in preps:
                net.add_edge(sid, prep_id, params.h_init)
    net.validate()
    return net


def add_preparatory_clip(
    net: ClipNetwork, skill_id: str, params: LearningParams, label: str | None = None
) -> ClipNetwork:
    """Register a new preparatory skill: a layer-4 clip reachable from every
    perceptual state at weight h_init.  Mutates and returns the network."""
    if skill_id in net.clips:
        raise ValueError(f"duplicate clip id: '{skill_id}'")
    net.add_clip(Clip(skill_id, 4, label if label is not None else skill_id))
    for sid in net.clips_in_layer(3):
        net.add_edge(sid, skill_id, params.h_init)
    return net


# -- serialization ------------------------------------------------------------


def serialize_network(net: ClipNetwork) -> str:
    """Versioned JSON text.  Weights round-trip bit-exactly (shortest-repr
    floats).  The schema is documented in the README."""
    doc = {
        "format": FORMAT_TAG,
        "owner_skill": net.owner_skill,
        "requires_grasp": net.requires_grasp,
        "clips": [
            {
                "id": c.id,
                "layer": c.layer,
                "kind": c.kind,
                "label": c.label,
                "semantic_tag": c.semantic_tag,
            }
            for c in net.clips.values()
        ],
        "edges": [
            {"from": pid, "to": cid, "h": h} for pid, cid, h in net.edge_items()
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def deserialize_network(text: str) -> ClipNetwork:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"not valid network JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise ValueError(f"unsupported format tag: {doc.get('format')!r}")
    net = ClipNetwork(
        owner_skill=str(doc.get("owner_skill", "")),
        requires_grasp=bool(doc.get("requires_grasp", False)),
    )
    for entry in doc.get("clips", []):
        layer = entry.get("layer")
        if layer not in KIND_BY_LAYER:
            raise ValueError(f"unknown layer: {layer!r}")
        if entry.get("kind") != KIND_BY_LAYER[layer]:
            raise ValueError(
                f"clip '{entry.get('id')}': kind {entry.get('kind')!r} does not"
                f" match layer {layer}"
            )
        net.add_clip(
            Clip(
                id=str(entry["id"]),
                layer=int(layer),
                label=str(entry.get("label", entry["id"])),
                semantic_tag=entry.get("semantic_tag"),
            )
        )
    for entry in doc.get("edges", []):
        h = entry.get("h")
        if not isinstance(h, (int, float)) or not float(h) >= WEIGHT_FLOOR:
            raise ValueError(
                f"weight below floor: '{entry.get('from')}' -> '{entry.get('to')}'"
                f" = {h!r}"
            )
        net.add_edge(str(entry["from"]), str(entry["to"]), float(h))
    net.validate()
    return net
