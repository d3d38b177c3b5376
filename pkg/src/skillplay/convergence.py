"""Desk-scale convergence study over populations of abstracted agents.

Each simulated agent keeps the parts of the pipeline that drive learning
dynamics and abstracts the rest: the classifier is reduced to its accuracy
(correct with probability s, otherwise a uniformly random wrong state), the
complex skill to a Bernoulli draw, and the clip network to the two weight
families that sampling actually consults — start -> sensing-action and, per
sensing action, perceptual-state -> preparatory-skill.  The bookkeeping
sensing -> state edges influence nothing and are omitted.

Preparatory skill semantics: prep j < num_states-1 rotates the orientation
by j+1 quarter turns; every later prep is an identity (the no-op plus the
useless extras), which succeeds only when the orientation already is the
grasp state.

Every roll-out consumes exactly six uniforms in a fixed order (true state,
sensing pick, classification, wrong-state pick, prep pick, skill success),
so one agent's whole trajectory is a pure function of its seeded stream and
the per-agent streams are independent of chunking and thread count.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .clipnet import LearningParams
from .seeding import agent_rng

DRAWS_PER_ROLLOUT = 6
SMOOTHING_WINDOW = 11
# chunking keeps the pregenerated uniform block per worker under ~250 MB
_CHUNK_BUDGET_BYTES = 2.5e8


@dataclass(frozen=True)
class ConvergenceScenario:
    """Abstract single-object scenario for population runs."""

    sensing_accuracies: tuple[float, ...] = (0.93, 0.27, 0.40)
    num_states: int = 4
    grasp_state: int = 1
    complex_success: float = 0.98
    num_preps: int = 6
    alpha: float = 10.0
    params: LearningParams = field(default_factory=LearningParams)

    def __post_init__(self) -> None:
        if not self.sensing_accuracies:
            raise ValueError("at least one sensing action required")
        if any(not 0.0 <= a <= 1.0 for a in self.sensing_accuracies):
            raise ValueError("accuracies must lie in [0, 1]")
        if self.num_states < 2:
            raise ValueError("need at least two states")
        if not 0 <= self.grasp_state < self.num_states:
            raise ValueError("grasp_state must name one of the states")
        if not 0.0 <= self.complex_success <= 1.0:
            raise ValueError("complex_success must lie in [0, 1]")
        if self.num_preps < self.num_states:
            raise ValueError("num_preps must cover the useful preps (>= num_states)")
        if self.alpha < 0.0:
            raise ValueError("alpha must be non-negative")


@dataclass(frozen=True)
class ConvergenceResult:
    success_curve: np.ndarray
    smoothed_curve: np.ndarray
    n_agents: int
    n_rollouts: int
    threshold: float
    n_r: int | None


def _simulate(
    draws: np.ndarray, scenario: ConvergenceScenario
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run a block of agents on pregenerated uniforms.

    draws: (agents, rollouts, 6).  Returns (success bits, final start->sensing
    weights, final state->prep weights).  All arithmetic is elementwise over
    the agent axis, so a block of one reproduces any larger block's row
    bit for bit.
    """
    n_agents, n_rollouts, width = draws.shape
    if width != DRAWS_PER_ROLLOUT:
        raise ValueError(f"expected {DRAWS_PER_ROLLOUT} draws per roll-out, got {width}")
    accuracies = np.array(scenario.sensing_accuracies)
    n_states = scenario.num_states
    n_preps = scenario.num_preps
    params = scenario.params
    gamma = params.gamma

    h_sense = np.tile(np.exp(scenario.alpha * accuracies), (n_agents, 1))
    h_prep = np.full(
        (n_agents, len(accuracies), n_states, n_preps), params.h_init, dtype=np.float64
    )
    bits = np.zeros((n_agents, n_rollouts), dtype=bool)
    rows = np.arange(n_agents)
    prep_shift = np.where(np.arange(n_preps) < n_states - 1, np.arange(n_preps) + 1, 0)

    for t in range(n_rollouts):
        u = draws[:, t, :]
        true_state = np.minimum((u[:, 0] * n_states).astype(np.int64), n_states - 1)

        sense_cdf = np.cumsum(h_sense, axis=1)
        sensed = (sense_cdf <= u[:, 1][:, None] * sense_cdf[:, -1:]).sum(axis=1)

        correct = u[:, 2] < accuracies[sensed]
        wrong_pick = np.minimum(
            (u[:, 3] * (n_states - 1)).astype(np.int64), n_states - 2
        )
        wrong = wrong_pick + (wrong_pick >= true_state)
        believed = np.where(correct, true_state, wrong)

        clip_weights = h_prep[rows, sensed, believed]
        prep_cdf = np.cumsum(clip_weights, axis=1)
        prep = (prep_cdf <= u[:, 4][:, None] * prep_cdf[:, -1:]).sum(axis=1)

        success = ((true_state + prep_shift[prep]) % n_states == scenario.grasp_state) & (
            u[:, 5] < scenario.complex_success
        )
        bits[:, t] = success
        reward = np.where(success, params.lambda_succ, params.lambda_fail)

        if gamma == 0.0:
            # only traversed edges can change: damping is off and rho is 0
            # elsewhere, and the floor never bites an untouched weight (h >= 1)
            picked = (rows, sensed)
            h_sense[picked] = np.maximum(1.0, h_sense[picked] + reward)
            walked = (rows, sensed, believed, prep)
            h_prep[walked] = np.maximum(1.0, h_prep[walked] + reward)
        else:
            rho_sense = np.zeros_like(h_sense)
            rho_sense[rows, sensed] = 1.0
            h_sense = np.maximum(
                1.0, h_sense - gamma * (h_sense - 1.0) + rho_sense * reward[:, None]
            )
            rho_prep = np.zeros_like(h_prep)
            rho_prep[rows, sensed, believed, prep] = 1.0
            h_prep = np.maximum(
                1.0,
                h_prep - gamma * (h_prep - 1.0) + rho_prep * reward[:, None, None, None],
            )
    return bits, h_sense, h_prep


def run_abstract_agent(
    scenario: ConvergenceScenario, n_rollouts: int, rng: np.random.Generator
) -> np.ndarray:
    """One agent's per-roll-out success bits (boolean vector)."""
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be positive")
    draws = rng.random((n_rollouts, DRAWS_PER_ROLLOUT))
    bits, _, _ = _simulate(draws[None, :, :], scenario)
    return bits[0]


def smooth_curve(values: np.ndarray, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Centered moving average; the window shrinks symmetrically at the ends."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and positive")
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    half = window // 2
    prefix = np.concatenate([[0.0], np.cumsum(values)])
    lo = np.maximum(0, np.arange(n) - half)
    hi = np.minimum(n, np.arange(n) + half + 1)
    return (prefix[hi] - prefix[lo]) / (hi - lo)


def first_crossing(values: np.ndarray, threshold: float) -> int | None:
    """1-based index of the first value at or above the threshold."""
    hits = np.nonzero(np.asarray(values) >= threshold)[0]
    return int(hits[0]) + 1 if hits.size else None


def run_population(
    scenario: ConvergenceScenario,
    n_agents: int,
    n_rollouts: int,
    threshold: float = 0.9,
    seed: int = 0,
    *,
    jobs: int = 1,
    smoothing_window: int = SMOOTHING_WINDOW,
) -> ConvergenceResult:
    """Average independent agents and extract the roll-outs-to-threshold.

    Agent i draws from the stream seeded by (seed, i), so the result is a
    pure function of (seed, scenario) no matter how the population is split
    into chunks or spread over worker threads.  The crossing is read off the
    smoothed curve because the raw mean still jitters at this population
    size; both curves are reported.
    """
    if n_agents < 1:
        raise ValueError("n_agents must be positive")
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be positive")
    chunk = int(_CHUNK_BUDGET_BYTES / (n_rollouts * DRAWS_PER_ROLLOUT * 8))
    chunk = max(1, min(n_agents, chunk))
    ranges = [(lo, min(lo + chunk, n_agents)) for lo in range(0, n_agents, chunk)]

    def simulate_block(bounds: tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        draws = np.stack(
            [agent_rng(seed, i).random((n_rollouts, DRAWS_PER_ROLLOUT)) for i in range(lo, hi)]
        )
        bits, _, _ = _simulate(draws, scenario)
        return bits.sum(axis=0, dtype=np.int64)

    if jobs > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            partial_counts = list(pool.map(simulate_block, ranges))
    else:
        partial_counts = [simulate_block(bounds) for bounds in ranges]
    counts = np.sum(partial_counts, axis=0)
    curve = counts / n_agents
    smoothed = smooth_curve(curve, smoothing_window)
    return ConvergenceResult(
        success_curve=curve,
        smoothed_curve=smoothed,
        n_agents=n_agents,
        n_rollouts=n_rollouts,
        threshold=threshold,
        n_r=first_crossing(smoothed, threshold),
    )


def sweep_preps(
    scenario: ConvergenceScenario,
    prep_counts: list[int],
    n_agents: int,
    n_rollouts: int,
    threshold: float = 0.9,
    seed: int = 0,
    *,
    jobs: int = 1,
) -> list[tuple[int, ConvergenceResult]]:
    """Re-run the population for each prep count (deduplicated, same seed, so
    the sweep points share their randomness and compare cleanly)."""
    seen: set[int] = set()
    table = []
    for n_preps in prep_counts:
        if n_preps in seen:
            warnings.warn(f"duplicate prep count {n_preps} ignored", stacklevel=2)
            continue
        seen.add(n_preps)
        point = replace(scenario, num_preps=n_preps)
        table.append(
            (n_preps, run_population(point, n_agents, n_rollouts, threshold, seed, jobs=jobs))
        )
    return table


# -- output files ----------------------------------------------------------------


def save_curve_csv(path: str, result: ConvergenceResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rollout", "mean_success"])
        for i, value in enumerate(result.success_curve, start=1):
            writer.writerow([i, repr(float(value))])


def save_sweep_csv(path: str, table: list[tuple[int, ConvergenceResult]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["N_p", "N_r"])
        for n_preps, result in table:
            writer.writerow([n_preps, "" if result.n_r is None else result.n_r])
