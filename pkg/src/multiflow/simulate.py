"""Finite-N Monte Carlo cascades under global load redistribution.

``run_cascade`` tracks the cascade through two scalar aggregates per layer:
the total initial load of all failed nodes divided by the survivor count.
Global equal redistribution gives every survivor the same added load, so
this is an exact rewrite of per-node bookkeeping; ``run_cascade_naive``
keeps the literal per-node load vectors and serves as the independent
oracle at small n.

Survival is the non-strict comparison free_space >= effective excess (ties
survive), mirroring the "load <= capacity" overload conditions.  Attack
sizes are realized as round(p*n) distinct uniformly chosen nodes, so the
attacked fraction is fixed rather than Bernoulli-thinned.

All randomness flows through explicit seeds.  ``monte_carlo_curve`` derives
one stream per (p-index, run-index) pair, which makes results independent
of worker scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .meanfield import CrossLayerFactors, SystemConfig, _validate_p

MAX_NAIVE_NODES = 10_000
MAX_TRAJECTORY_ROUNDS = 10_000


@dataclass(frozen=True, eq=False)
class Population:
    """Per-node loads and free spaces for a finite network."""

    load_a: np.ndarray
    free_a: np.ndarray
    load_b: np.ndarray
    free_b: np.ndarray
    seed: object = None

    def __post_init__(self) -> None:
        arrays = (self.load_a, self.free_a, self.load_b, self.free_b)
        n = len(self.load_a)
        if any(len(a) != n for a in arrays):
            raise ValueError("population arrays must have equal length")
        if n < 1:
            raise ValueError("population must contain at least one node")
        for name, a in zip(("load_a", "free_a", "load_b", "free_b"), arrays):
            if not np.all(np.isfinite(a)) or np.any(np.asarray(a) <= 0.0):
                raise ValueError(f"population {name} must be finite and strictly positive")

    @property
    def size(self) -> int:
        return len(self.load_a)


class TrajectoryPoint(NamedTuple):
    round: int
    surviving_fraction: float
    q_a: float
    q_b: float


@dataclass(frozen=True, eq=False)
class CascadeOutcome:
    """Result of one cascade: final fraction, round count, and trajectory.

    ``failed`` is the steady-state failure mask (attack included), used by
    the oracle-equivalence and conservation checks.
    """

    surviving_fraction: float
    rounds: int
    trajectory: tuple[TrajectoryPoint, ...]
    failed: np.ndarray
    truncated: bool = False


def build_population(cfg: SystemConfig, n: int, seed) -> Population:
    """Sample n i.i.d. nodes from the config's joint; bit-identical per seed."""
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    load_a, free_a, load_b, free_b = cfg.joint.sample_population(n, rng)
    return Population(load_a, free_a, load_b, free_b, seed=seed)


def _attack_count(p: float, n: int) -> int:
    return int(math.floor(p * n + 0.5))


def _attacked_nodes(n: int, p: float, attack_seed) -> np.ndarray:
    """round(p*n) distinct uniform nodes; shared by both cascade variants."""
    k = _attack_count(p, n)
    if k <= 0:
        return np.empty(0, dtype=np.intp)
    rng = np.random.default_rng(attack_seed)
    return rng.permutation(n)[:k]


def run_cascade(pop: Population, p: float, factors: CrossLayerFactors,
                attack_seed, max_trajectory: int = MAX_TRAJECTORY_ROUNDS) -> CascadeOutcome:
    """Cascade via per-layer aggregate excess loads (O(n log n) total).

    Nodes are scanned in free-space order per layer, so each node is touched
    at most once per layer no matter how many rounds the cascade takes.
    """
    _validate_p(p)
    n = pop.size
    attacked = _attacked_nodes(n, p, attack_seed)
    failed = np.zeros(n, dtype=bool)
    if attacked.size == 0:
        return CascadeOutcome(1.0, 0, (TrajectoryPoint(0, 1.0, 0.0, 0.0),), failed)

    failed[attacked] = True
    alive = n - attacked.size
    shed_a = float(pop.load_a[attacked].sum())
    shed_b = float(pop.load_b[attacked].sum())
    if alive == 0:
        return CascadeOutcome(0.0, 0, (TrajectoryPoint(0, 0.0, math.inf, math.inf),), failed)

    order_a = np.argsort(pop.free_a)
    sorted_free_a = pop.free_a[order_a]
    order_b = np.argsort(pop.free_b)
    sorted_free_b = pop.free_b[order_b]

    q_a = shed_a / alive
    q_b = shed_b / alive
    trajectory = [TrajectoryPoint(0, alive / n, q_a, q_b)]
    truncated = False
    pos_a = pos_b = 0
    rounds = 0
    while True:
        rounds += 1
        th_a = q_a + factors.beta_b * q_b
        th_b = q_b + factors.beta_a * q_a
        # free space strictly below the threshold fails (ties survive)
        hi_a = int(np.searchsorted(sorted_free_a, th_a, side="left"))
        hi_b = int(np.searchsorted(sorted_free_b, th_b, side="left"))
        newly = 0
        for order, lo, hi in ((order_a, pos_a, hi_a), (order_b, pos_b, hi_b)):
            idx = order[lo:hi]
            idx = idx[~failed[idx]]
            if idx.size:
                failed[idx] = True
                shed_a += float(pop.load_a[idx].sum())
                shed_b += float(pop.load_b[idx].sum())
                newly += idx.size
        pos_a, pos_b = hi_a, hi_b
        if newly == 0:
            break
        alive -= newly
        if alive == 0:
            q_a = q_b = math.inf
            trajectory.append(TrajectoryPoint(rounds, 0.0, q_a, q_b))
            break
        q_a = shed_a / alive
        q_b = shed_b / alive
        if len(trajectory) <= max_trajectory:
            trajectory.append(TrajectoryPoint(rounds, alive / n, q_a, q_b))
        else:
            truncated = True
    return CascadeOutcome(alive / n, rounds, tuple(trajectory), failed, truncated)


def run_cascade_naive(pop: Population, p: float, factors: CrossLayerFactors,
                      attack_seed, max_trajectory: int = MAX_TRAJECTORY_ROUNDS) -> CascadeOutcome:
    """Literal per-node bookkeeping oracle (quadratic work, n <= 10^4).

    Each failed node's current loads are split equally over the survivors,
    per-node load vectors are updated, and the overload conditions are
    re-tested against the fixed capacities.
    """
    _validate_p(p)
    n = pop.size
    if n > MAX_NAIVE_NODES:
        raise ValueError(f"naive cascade is limited to n <= {MAX_NAIVE_NODES}, got {n}")
    attacked = _attacked_nodes(n, p, attack_seed)
    failed = np.zeros(n, dtype=bool)
    if attacked.size == 0:
        return CascadeOutcome(1.0, 0, (TrajectoryPoint(0, 1.0, 0.0, 0.0),), failed)

    beta_a, beta_b = factors.beta_a, factors.beta_b
    cur_a = np.array(pop.load_a, dtype=float)
    cur_b = np.array(pop.load_b, dtype=float)
    cap_a = pop.load_a + beta_b * pop.load_b + pop.free_a
    cap_b = pop.load_b + beta_a * pop.load_a + pop.free_b

    failed[attacked] = True
    survivors = np.flatnonzero(~failed)
    if survivors.size == 0:
        return CascadeOutcome(0.0, 0, (TrajectoryPoint(0, 0.0, math.inf, math.inf),), failed)

    inc_a = float(cur_a[attacked].sum()) / survivors.size
    inc_b = float(cur_b[attacked].sum()) / survivors.size
    cur_a[survivors] += inc_a
    cur_b[survivors] += inc_b
    trajectory = [TrajectoryPoint(0, survivors.size / n, inc_a, inc_b)]
    truncated = False
    rounds = 0
    while True:
        rounds += 1
        overloaded = (
            (cur_a[survivors] + beta_b * cur_b[survivors] > cap_a[survivors])
            | (cur_b[survivors] + beta_a * cur_a[survivors] > cap_b[survivors])
        )
        newly = survivors[overloaded]
        if newly.size == 0:
            break
        failed[newly] = True
        survivors = survivors[~overloaded]
        if survivors.size == 0:
            trajectory.append(TrajectoryPoint(rounds, 0.0, math.inf, math.inf))
            break
        add_a = float(cur_a[newly].sum()) / survivors.size
        add_b = float(cur_b[newly].sum()) / survivors.size
        cur_a[survivors] += add_a
        cur_b[survivors] += add_b
        inc_a += add_a
        inc_b += add_b
        if len(trajectory) <= max_trajectory:
            trajectory.append(TrajectoryPoint(rounds, survivors.size / n, inc_a, inc_b))
        else:
            truncated = True
    return CascadeOutcome(survivors.size / n, rounds, tuple(trajectory), failed, truncated)


@dataclass(frozen=True, eq=False)
class RobustnessCurve:
    """Mean/stddev of the surviving fraction over independent runs per p."""

    p: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    samples: np.ndarray  # shape (len(p), runs)
    n: int
    runs: int
    seed_base: int
    resample_population: bool = True


def _curve_task(cfg: SystemConfig, n: int, p: float, p_index: int, run_index: int,
                seed_base: int, resample_population: bool) -> float:
    root = np.random.SeedSequence(seed_base, spawn_key=(p_index, run_index))
    pop_seed, attack_seed = root.spawn(2)
    if not resample_population:
        # One population per run index, shared across the whole p grid.
        pop_seed = np.random.SeedSequence(seed_base, spawn_key=(run_index,))
    pop = build_population(cfg, n, pop_seed)
    return run_cascade(pop, p, cfg.factors, attack_seed).surviving_fraction


def monte_carlo_curve(cfg: SystemConfig, n: int, p_grid: Sequence[float], runs: int,
                      seed_base: int, workers: int = 1,
                      resample_population: bool = True) -> RobustnessCurve:
    """Simulated robustness curve, deterministic in seed_base.

    Every (p, run) pair owns an RNG stream derived from its indices, so the
    result does not depend on the execution order or worker count.
    """
    p_grid = [float(p) for p in p_grid]
    for p in p_grid:
        _validate_p(p)
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    fractions = np.empty((len(p_grid), runs))
    tasks = [(ip, ir) for ip in range(len(p_grid)) for ir in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(
                _curve_task,
                *zip(*[(cfg, n, p_grid[ip], ip, ir, seed_base, resample_population)
                       for ip, ir in tasks]),
                chunksize=max(1, len(tasks) // (8 * workers)),
            )
            for (ip, ir), fraction in zip(tasks, results):
                fractions[ip, ir] = fraction
    else:
        pop_cache: dict[int, Population] = {}
        for ip, ir in tasks:
            if resample_population:
                fractions[ip, ir] = _curve_task(cfg, n, p_grid[ip], ip, ir,
                                                seed_base, True)
            else:
                if ir not in pop_cache:
                    pop_cache[ir] = build_population(
                        cfg, n, np.random.SeedSequence(seed_base, spawn_key=(ir,)))
                root = np.random.SeedSequence(seed_base, spawn_key=(ip, ir))
                _, attack_seed = root.spawn(2)
                fractions[ip, ir] = run_cascade(
                    pop_cache[ir], p_grid[ip], cfg.factors, attack_seed).surviving_fraction
    return RobustnessCurve(
        p=np.asarray(p_grid), mean=fractions.mean(axis=1), std=fractions.std(axis=1),
        samples=fractions, n=n, runs=runs, seed_base=seed_base,
        resample_population=resample_population)
