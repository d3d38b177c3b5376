"""Clip network: walk law, weight updates, topology, serialization.

The numeric examples are recomputed here with plain math so the expected
values are independent of the implementation under test.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from skillplay.clipnet import (
    START_ID,
    WEIGHT_FLOOR,
    Clip,
    ClipNetwork,
    LearningParams,
    WalkPath,
    add_preparatory_clip,
    apply_damping,
    deserialize_network,
    init_network,
    random_walk,
    sample_child,
    serialize_network,
    state_clip_id,
    transition_probability,
    update_weights,
)

BOOK_STATES = ["s1", "s2", "s3", "s4"]
BOOK_PREPS = ["rot90", "rot180", "rot270", "flip", "nothing", "extra"]

# Discrimination weights exp(alpha * accuracy) at alpha=10 for the three
# calibration accuracies; the walk-law examples below derive from these.
D_HIGH = math.exp(9.3)
D_LOW = math.exp(2.7)
D_MID = math.exp(4.0)


def book_like_network(params: LearningParams | None = None) -> ClipNetwork:
    params = params or LearningParams()
    sensing = [
        ("slide", list(BOOK_STATES), D_HIGH),
        ("poke", list(BOOK_STATES), D_LOW),
        ("press", list(BOOK_STATES), D_MID),
    ]
    return init_network(sensing, list(BOOK_PREPS), params, owner_skill="grasp")


def tiny_network(prep_weights: dict[str, float]) -> ClipNetwork:
    """One sensing action, one state, preps with explicit weights."""
    net = ClipNetwork(owner_skill="t")
    net.add_clip(Clip(START_ID, 1, "start"))
    net.add_clip(Clip("sense", 2, "sense"))
    net.add_clip(Clip("sense:a", 3, "a"))
    net.add_edge(START_ID, "sense", 10.0)
    net.add_edge("sense", "sense:a", WEIGHT_FLOOR)
    for pid, h in prep_weights.items():
        net.add_clip(Clip(pid, 4, pid))
        net.add_edge("sense:a", pid, h)
    net.validate()
    return net


# -- transition probability ---------------------------------------------------


def test_uniform_children_quarter_each():
    net = tiny_network({f"p{i}": 200.0 for i in range(4)})
    for i in range(4):
        assert transition_probability(net, "sense:a", f"p{i}") == pytest.approx(0.25)


def test_discrimination_weights_first_child():
    net = book_like_network()
    expected = D_HIGH / (D_HIGH + D_LOW + D_MID)
    p = transition_probability(net, START_ID, "slide")
    assert p == pytest.approx(expected, abs=1e-15)
    assert round(p, 4) == 0.9937


def test_sensing_selection_probabilities():
    net = book_like_network()
    total = D_HIGH + D_LOW + D_MID
    assert transition_probability(net, START_ID, "poke") == pytest.approx(
        D_LOW / total, abs=1e-15
    )
    assert round(transition_probability(net, START_ID, "poke"), 4) == 0.0014
    assert round(transition_probability(net, START_ID, "press"), 4) == 0.0050


def test_single_child_probability_one():
    net = tiny_network({"only": 123.0})
    assert transition_probability(net, "sense:a", "only") == 1.0


def test_unknown_edge_error():
    net = tiny_network({"p": 5.0})
    with pytest.raises(ValueError, match="no such transition"):
        transition_probability(net, "sense:a", "missing")


# -- update algebra -----------------------------------------------------------


@pytest.mark.parametrize(
    "h,gamma,on_path,reward,expected",
    [
        (200.0, 0.0, True, 1000.0, 1200.0),
        (200.0, 0.0, True, -30.0, 170.0),
        (25.0, 0.0, True, -30.0, 1.0),
        (200.0, 0.1, False, 777.0, 180.1),
    ],
)
def test_update_arithmetic_exact(h, gamma, on_path, reward, expected):
    net = tiny_network({"hit": h, "miss": h})
    params = LearningParams(gamma=gamma)
    path = WalkPath((START_ID, "sense", "sense:a", "hit"))
    update_weights(net, path, reward, params)
    probe = "hit" if on_path else "miss"
    assert net.weight("sense:a", probe) == expected


def test_update_touches_every_edge():
    net = book_like_network()
    params = LearningParams(gamma=0.5)
    path = WalkPath((START_ID, "slide", "slide:s1", "rot90"))
    update_weights(net, path, 1000.0, params)
    # off-path edges are damped toward the floor even in other branches
    assert net.weight("press:s4", "flip") == 200.0 - 0.5 * 199.0
    assert net.weight(START_ID, "poke") == pytest.approx(
        max(WEIGHT_FLOOR, D_LOW - 0.5 * (D_LOW - 1.0))
    )
    # on-path edges get damping plus reward in a single expression
    assert net.weight("slide:s1", "rot90") == 200.0 - 0.5 * 199.0 + 1000.0


def test_classifier_forced_edge_is_rewarded():
    net = tiny_network({"p": 200.0})
    path = WalkPath((START_ID, "sense", "sense:a", "p"))
    update_weights(net, path, 1000.0, LearningParams())
    assert net.weight("sense", "sense:a") == WEIGHT_FLOOR + 1000.0


def test_update_rejects_foreign_path():
    net = tiny_network({"p": 200.0})
    bad = WalkPath((START_ID, "sense", "sense:a", "ghost"))
    with pytest.raises(ValueError, match="path edge not in network"):
        update_weights(net, bad, 1.0, LearningParams())


def test_damping_noop_at_gamma_zero():
    net = tiny_network({"p": 321.5, "q": 2.25})
    before = dict(net.children("sense:a"))
    apply_damping(net, LearningParams(gamma=0.0))
    assert net.children("sense:a") == before


def test_damping_without_path():
    net = tiny_network({"p": 201.0})
    apply_damping(net, LearningParams(gamma=0.25))
    assert net.weight("sense:a", "p") == pytest.approx(201.0 - 0.25 * 200.0)


# -- walk sampling ------------------------------------------------------------


def test_walk_uniform_prep_frequencies():
    net = book_like_network()
    rng = np.random.default_rng(5)
    counts = {p: 0 for p in BOOK_PREPS}
    n = 10000
    for _ in range(n):
        path = random_walk(net, "slide:s2", rng)
        counts[path.clip_ids[3]] += 1
    p = 1.0 / len(BOOK_PREPS)
    sigma = math.sqrt(n * p * (1 - p))
    for prep in BOOK_PREPS:
        assert abs(counts[prep] - n * p) <= 3.0 * sigma


def test_walk_dominant_prep():
    # 1e6 against two stock weights: miss probability 4e-4, so over 10000
    # seeded walks the dominant prep exceeds the 0.999 frequency bar.
    net = tiny_network({"big": 1e6, "a": 200.0, "b": 200.0})
    rng = np.random.default_rng(0)
    n = 10000
    hits = sum(
        random_walk(net, "sense:a", rng).clip_ids[3] == "big" for _ in range(n)
    )
    assert hits / n > 0.999


def test_walk_single_choice_deterministic():
    net = tiny_network({"only": 200.0})
    paths = {random_walk(net, "sense:a", np.random.default_rng(i)).clip_ids
             for i in range(10)}
    assert paths == {(START_ID, "sense", "sense:a", "only")}


def test_walk_requires_state_estimate():
    net = tiny_network({"p": 200.0})
    with pytest.raises(ValueError, match="state estimate required"):
        random_walk(net, None, np.random.default_rng(0))


def test_walk_fixed_state_pins_sensing_parent():
    net = book_like_network()
    path = random_walk(net, "press:s3", np.random.default_rng(1))
    assert path.clip_ids[1] == "press"
    assert path.forced_transitions == frozenset({1})


def test_walk_callable_state_resolver():
    net = book_like_network()
    seen = []

    def resolver(sensing_id: str) -> str:
        seen.append(sensing_id)
        return state_clip_id(sensing_id, "s4")

    path = random_walk(net, resolver, np.random.default_rng(2))
    assert seen == [path.clip_ids[1]]
    assert path.clip_ids[2] == state_clip_id(path.clip_ids[1], "s4")


def test_walk_callable_resolver_must_match_sensing():
    net = book_like_network()
    with pytest.raises(ValueError, match="does not belong to sensing action"):
        # resolver ignores the sampled sensing action; nearly every draw
        # lands on slide, whose states do not include poke's clip
        random_walk(net, lambda _s: "poke:s1", np.random.default_rng(3))


def test_walk_prep_override_marks_forced():
    net = book_like_network()
    path = random_walk(
        net, "slide:s1", np.random.default_rng(4), prep_override="nothing"
    )
    assert path.clip_ids[3] == "nothing"
    assert path.forced_transitions == frozenset({1, 2})


def test_walk_admissible_preps_restrict_and_renormalize():
    net = tiny_network({"a": 200.0, "b": 200.0, "c": 200.0})
    rng = np.random.default_rng(6)
    chosen = {
        random_walk(net, "sense:a", rng, admissible_preps={"b", "c"}).clip_ids[3]
        for _ in range(200)
    }
    assert chosen == {"b", "c"}


def test_sample_child_consumes_one_draw():
    net = tiny_network({"a": 1.0, "b": 1.0})
    rng_a = np.random.default_rng(7)
    rng_b = np.random.default_rng(7)
    sample_child(net, "sense:a", rng_a)
    rng_b.random()
    assert rng_a.random() == rng_b.random()


def test_sample_child_nothing_admissible():
    net = tiny_network({"a": 1.0})
    with pytest.raises(ValueError, match="no admissible transition"):
        sample_child(net, "sense:a", np.random.default_rng(0), allowed=set())


def test_walk_law_chi_square():
    # Empirical child frequencies over many walks against the normalized
    # weights of a frozen 3-child clip.
    weights = {"x": 5.0, "y": 2.0, "z": 3.0}
    net = tiny_network(weights)
    rng = np.random.default_rng(11)
    counts = {k: 0 for k in weights}
    n = 20000
    for _ in range(n):
        counts[random_walk(net, "sense:a", rng).clip_ids[3]] += 1
    total = sum(weights.values())
    expected = [n * w / total for w in weights.values()]
    result = stats.chisquare([counts[k] for k in weights], expected)
    assert result.pvalue >= 0.01


# -- structure ----------------------------------------------------------------


def test_init_network_edge_counts():
    net = book_like_network()
    layer4 = net.clips_in_layer(4)
    assert len(layer4) == 6
    state_edges = [
        (p, c, h) for p, c, h in net.edge_items() if net.clips[p].layer == 3
    ]
    assert len(state_edges) == 4 * 6 * 3  # per sensing action: 4 states x 6 preps
    assert all(h == 200.0 for _, _, h in state_edges)


def test_init_network_single_sensing_probability_one():
    net = init_network([("s", ["a"], 42.0)], ["p"], LearningParams())
    assert transition_probability(net, START_ID, "s") == 1.0


@pytest.mark.parametrize("sensing,preps", [([], ["p"]), ([("s", ["a"], 2.0)], [])])
def test_init_network_rejects_empty(sensing, preps):
    with pytest.raises(ValueError):
        init_network(sensing, preps, LearningParams())


def test_init_network_rejects_low_discrimination():
    with pytest.raises(ValueError, match="below weight floor"):
        init_network([("s", ["a"], 0.5)], ["p"], LearningParams())


def test_add_preparatory_clip_converged_probability():
    # One edge has run away; a newly registered skill still gets walked
    # with small but positive probability.
    net = tiny_network(
        {"won": 1e5, "p1": 200.0, "p2": 200.0, "p3": 200.0, "p4": 200.0}
    )
    add_preparatory_clip(net, "new-skill", LearningParams())
    p = transition_probability(net, "sense:a", "new-skill")
    assert p == pytest.approx(200.0 / (1e5 + 4 * 200.0 + 200.0))
    assert 0.0 < p < 0.01


def test_add_preparatory_clip_edge_count():
    net = book_like_network()
    add_preparatory_clip(net, "grasp2", LearningParams())
    assert len(net.clips_in_layer(4)) == 7
    new_edges = [(p, c) for p, c, _ in net.edge_items() if c == "grasp2"]
    assert len(new_edges) == 12  # every state clip of every sensing action


def test_add_preparatory_clip_duplicate_rejected():
    net = book_like_network()
    with pytest.raises(ValueError, match="duplicate clip id"):
        add_preparatory_clip(net, "rot90", LearningParams())


def test_state_clip_unique_parent_enforced():
    net = tiny_network({"p": 200.0})
    net.add_clip(Clip("sense2", 2, "sense2"))
    net.add_edge(START_ID, "sense2", 5.0)
    net.add_edge("sense2", "sense:a", WEIGHT_FLOOR)
    with pytest.raises(ValueError, match="exactly one sensing parent"):
        net.validate()


def test_only_one_start_clip():
    net = ClipNetwork()
    net.add_clip(Clip(START_ID, 1, "start"))
    with pytest.raises(ValueError, match="already has a start clip"):
        net.add_clip(Clip("other-start", 1, "start"))


def test_edges_connect_consecutive_layers_only():
    net = ClipNetwork()
    net.add_clip(Clip(START_ID, 1, "start"))
    net.add_clip(Clip("p", 4, "p"))
    with pytest.raises(ValueError, match="consecutive layers"):
        net.add_edge(START_ID, "p", 5.0)


def test_clip_rejects_unknown_layer():
    with pytest.raises(ValueError, match="unknown layer"):
        Clip("c", 5, "c")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lambda_succ": 0.0},
        {"h_init": 0.5},
        {"gamma": 1.0},
        {"gamma": -0.1},
    ],
)
def test_learning_params_validation(kwargs):
    with pytest.raises(ValueError):
        LearningParams(**kwargs)


# -- serialization --------------------------------------------------------------


def test_serialize_round_trip_identity():
    net = book_like_network()
    update_weights(
        net,
        WalkPath((START_ID, "slide", "slide:s1", "rot90")),
        1000.0,
        LearningParams(),
    )
    clone = deserialize_network(serialize_network(net))
    assert clone == net
    assert clone.weight("slide:s1", "rot90") == net.weight("slide:s1", "rot90")
    assert clone.weight(START_ID, "slide") == D_HIGH + 1000.0  # bit-exact float


def test_serialize_preserves_semantic_tags():
    net = init_network(
        [("s", [("a", "binding")], 2.0)], ["p"], LearningParams()
    )
    clone = deserialize_network(serialize_network(net))
    assert clone.clips["s:a"].semantic_tag == "binding"


def test_deserialize_rejects_weight_below_floor():
    text = serialize_network(tiny_network({"p": 200.0}))
    tampered = text.replace('"h": 200.0', '"h": 0.5')
    with pytest.raises(ValueError, match="weight below floor"):
        deserialize_network(tampered)


def test_deserialize_rejects_unknown_layer():
    text = serialize_network(tiny_network({"p": 200.0}))
    tampered = text.replace('"layer": 4', '"layer": 5')
    with pytest.raises(ValueError, match="unknown layer"):
        deserialize_network(tampered)


def test_deserialize_rejects_dangling_edge():
    net = tiny_network({"p": 200.0})
    text = serialize_network(net)
    tampered = text.replace('"to": "p"', '"to": "phantom"')
    with pytest.raises(ValueError, match="dangling edge"):
        deserialize_network(tampered)


def test_deserialize_rejects_wrong_format_tag():
    with pytest.raises(ValueError, match="unsupported format tag"):
        deserialize_network('{"format": "clipnet/v0"}')


def test_deserialize_rejects_mismatched_kind():
    text = serialize_network(tiny_network({"p": 200.0}))
    tampered = text.replace('"kind": "preparatory-skill"', '"kind": "start"')
    with pytest.raises(ValueError, match="does not match layer"):
        deserialize_network(tampered)


# -- properties -----------------------------------------------------------------

weight_lists = st.lists(
    st.floats(min_value=1.0, max_value=1e9, allow_nan=False), min_size=2, max_size=6
)


@given(weights=weight_lists)
def test_normalization_sums_to_one(weights):
    net = tiny_network({f"p{i}": w for i, w in enumerate(weights)})
    total = sum(
        transition_probability(net, "sense:a", f"p{i}") for i in range(len(weights))
    )
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50)
@given(
    weights=weight_lists,
    rewards=st.lists(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), max_size=8
    ),
    gamma=st.floats(min_value=0.0, max_value=0.99),
)
def test_floor_holds_under_any_rewards(weights, rewards, gamma):
    net = tiny_network({f"p{i}": w for i, w in enumerate(weights)})
    params = LearningParams(gamma=gamma)
    path = WalkPath((START_ID, "sense", "sense:a", "p0"))
    for r in rewards:
        update_weights(net, path, r, params)
    assert min(h for _, _, h in net.edge_items()) >= WEIGHT_FLOOR


@given(weights=weight_lists)
def test_zero_reward_zero_gamma_is_noop(weights):
    net = tiny_network({f"p{i}": w for i, w in enumerate(weights)})
    before = {(p, c): h for p, c, h in net.edge_items()}
    path = WalkPath((START_ID, "sense", "sense:a", "p0"))
    update_weights(net, path, 0.0, LearningParams(gamma=0.0))
    assert {(p, c): h for p, c, h in net.edge_items()} == before


@given(gamma=st.floats(min_value=0.0, max_value=0.99))
def test_floor_weight_is_damping_fixed_point(gamma):
    net = tiny_network({"p": 1.0, "q": 1.0})
    apply_damping(net, LearningParams(gamma=gamma))
    assert net.weight("sense:a", "p") == 1.0
    assert net.weight("sense:a", "q") == 1.0


@settings(max_examples=50)
@given(
    weights=weight_lists,
    reward=st.floats(min_value=0.0, max_value=1e6, allow_nan=False),
)
def test_rewarded_path_probability_never_drops(weights, reward):
    net = tiny_network({f"p{i}": w for i, w in enumerate(weights)})
    path = WalkPath((START_ID, "sense", "sense:a", "p0"))
    before_sense = transition_probability(net, START_ID, "sense")
    before_prep = transition_probability(net, "sense:a", "p0")
    update_weights(net, path, reward, LearningParams(gamma=0.0))
    assert transition_probability(net, START_ID, "sense") >= before_sense - 1e-12
    assert transition_probability(net, "sense:a", "p0") >= before_prep - 1e-12
