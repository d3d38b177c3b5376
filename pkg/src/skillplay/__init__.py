"""skillplay: skill composition by playing.

Complex manipulation skills pick their sensing actions and preparatory
skills by stochastic walks through a small four-layer clip network, learn
from automatically rewarded roll-outs in a simulated tabletop world, and
compose into hierarchies once confident.  A vectorized population lab
reproduces the convergence behavior of the learning rule at desk scale.
"""

__version__ = "0.1.0"

from .classifier import (
    DiscriminationScore,
    HapticTimeSeries,
    StateModel,
    classify,
    cross_validate,
    discrimination_score,
    featurize,
    load_dataset_csv,
    load_model,
    rate_sensing_actions,
    save_dataset_csv,
    save_model,
    train,
)
from .clipnet import (
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
from .agent import (
    RolloutRecord,
    SkillRecord,
    build_skill_record,
    create_haptic_database,
    execute_skill,
    load_registry,
    play,
    register_as_prep,
    save_registry,
    save_rollout_log,
)
from .convergence import (
    ConvergenceResult,
    ConvergenceScenario,
    first_crossing,
    run_abstract_agent,
    run_population,
    save_curve_csv,
    save_sweep_csv,
    smooth_curve,
    sweep_preps,
)
from .seeding import agent_rng, derive_rng, derive_seed
from .world import (
    GRASP_ORIENTATION,
    ORIENTATIONS,
    ComplexSkillDef,
    PreparatorySkillDef,
    Scenario,
    SensingActionDef,
    WeighDef,
    WorldState,
    apply_prep,
    attempt_complex,
    load_scenario,
    precondition_holds,
    randomize_start,
    reward_of,
    sense,
    sense_weigh,
    weigh_says_grasped,
)

__all__ = [name for name in dir() if not name.startswith("_")]
