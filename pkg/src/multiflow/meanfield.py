"""Mean-field cascade analysis for two-layer multiplex flow networks.

A random attack removes a fraction ``p`` of the nodes; their loads are
redistributed equally over all survivors, separately per layer.  A node
survives a round when its free space covers the effective excess load in
both layers, where the effective excess couples the layers linearly through
the cross-layer influence factors::

    eff_A = q_A + beta_b * q_B        eff_B = q_B + beta_a * q_A

Starting from n_0 = 1 - p and q_0 = p * E[L] / (1 - p) per layer, each
round maps the excess-load pair through the joint free-space survival
probability and the partial load expectations.  Effective excess loads are
nondecreasing along a trajectory and the iteration converges to the
element-wise minimum of the stable set

    {(x, y) : x >= g(x, y), y >= h(x, y)},

which makes the surviving fraction at the limit the final system size.
``stable_set_grid`` scans that region explicitly for visual checks, and
``critical_attack_size`` bisects for the largest attack the system absorbs
with a positive final size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import IndependentJoint, JointLoadSpace, SurvivalStats

# Below this joint survival the surviving fraction is smaller than 1/N for
# any realistic N; the cascade is declared a total collapse.
COLLAPSE_EPS = 1e-15

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10 ** 6
DEFAULT_TOL_P = 1e-4
DEFAULT_GRID_RESOLUTION = 400


@dataclass(frozen=True)
class CrossLayerFactors:
    """Unit impact of one layer's load on the other ((0, 0) = independent layers)."""

    beta_a: float = 0.0
    beta_b: float = 0.0

    def __post_init__(self) -> None:
        for name, value in (("beta_a", self.beta_a), ("beta_b", self.beta_b)):
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class SystemConfig:
    """Joint load/free-space description plus the cross-layer factors."""

    joint: JointLoadSpace
    factors: CrossLayerFactors = field(default_factory=CrossLayerFactors)

    @staticmethod
    def from_marginals(load_a, free_a, load_b, free_b,
                       beta_a: float = 0.0, beta_b: float = 0.0) -> "SystemConfig":
        return SystemConfig(IndependentJoint(load_a, free_a, load_b, free_b),
                            CrossLayerFactors(beta_a, beta_b))

    def effective(self, q_a: float, q_b: float) -> tuple[float, float]:
        """Effective excess-load pair seen by the overload conditions."""
        return (q_a + self.factors.beta_b * q_b,
                q_b + self.factors.beta_a * q_a)


@dataclass(frozen=True)
class CascadeState:
    """Surviving fraction and per-survivor excess loads after round ``t``."""

    t: int
    n: float
    q_a: float
    q_b: float

    @property
    def collapsed(self) -> bool:
        return self.n == 0.0


@dataclass(frozen=True)
class SteadyState:
    """Limit of the cascade recursion.

    ``x_star``/``y_star`` are the element-wise minimum stable excess loads
    (infinite on total collapse); ``n_inf`` is the final system size.
    """

    n_inf: float
    x_star: float
    y_star: float
    iterations: int
    converged: bool

    @property
    def collapsed(self) -> bool:
        return self.n_inf == 0.0


def _validate_p(p: float) -> None:
    if not (isinstance(p, (int, float)) and 0.0 < p < 1.0):
        raise ValueError(f"attack fraction p must lie strictly in (0, 1), got {p}")


def initial_state(p: float, cfg: SystemConfig) -> CascadeState:
    """State right after the attack: n = 1-p, q = p*E[L]/(1-p) per layer."""
    _validate_p(p)
    scale = p / (1.0 - p)
    return CascadeState(t=0, n=1.0 - p,
                        q_a=scale * cfg.joint.mean_load_a,
                        q_b=scale * cfg.joint.mean_load_b)


def _collapse_state(t: int) -> CascadeState:
    return CascadeState(t=t, n=0.0, q_a=math.inf, q_b=math.inf)


def _next_state(t: int, p: float, cfg: SystemConfig, stats: SurvivalStats) -> CascadeState:
    if stats.probability < COLLAPSE_EPS:
        return _collapse_state(t)
    n = (1.0 - p) * stats.probability
    q_a = (cfg.joint.mean_load_a - (1.0 - p) * stats.load_a) / n
    q_b = (cfg.joint.mean_load_b - (1.0 - p) * stats.load_b) / n
    return CascadeState(t=t, n=n, q_a=q_a, q_b=q_b)


def step(state: CascadeState, p: float, cfg: SystemConfig) -> CascadeState:
    """One round of the recursion; collapse is absorbing."""
    _validate_p(p)
    if state.collapsed:
        return _collapse_state(state.t + 1)
    eff_a, eff_b = cfg.effective(state.q_a, state.q_b)
    stats = cfg.joint.survival_stats(eff_a, eff_b)
    return _next_state(state.t + 1, p, cfg, stats)


def iterate_to_steady_state(p: float, cfg: SystemConfig,
                            tol: float = DEFAULT_TOL,
                            max_iter: int = DEFAULT_MAX_ITER) -> SteadyState:
    """Run the recursion until the effective excess loads stop moving.

    Convergence is relative on the effective excess loads:
    max(|delta_A|, |delta_B|) < tol * (1 + max effective load).  Total
    collapse counts as converged.  The limit point is the element-wise
    minimum of the stable set.
    """
    _validate_p(p)
    if tol <= 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    cursor = cfg.joint.cascade_cursor()
    state = initial_state(p, cfg)
    eff_a, eff_b = cfg.effective(state.q_a, state.q_b)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        stats = cursor.advance(eff_a, eff_b)
        state = _next_state(iterations, p, cfg, stats)
        if state.collapsed:
            return SteadyState(0.0, math.inf, math.inf, iterations, True)
        new_a, new_b = cfg.effective(state.q_a, state.q_b)
        delta = max(abs(new_a - eff_a), abs(new_b - eff_b))
        # Theory guarantees nondecreasing effective loads; the max() guards
        # the cursor against last-bit rounding regressions.
        eff_a = max(eff_a, new_a)
        eff_b = max(eff_b, new_b)
        if delta < tol * (1.0 + max(eff_a, eff_b)):
            converged = True
            break
    # Final size evaluated at the limit point itself, so the identity
    # n_inf = (1-p) * P[S_A > x*+bB y*, S_B > y*+bA x*] holds exactly.
    prob = cfg.joint.joint_survival(*cfg.effective(state.q_a, state.q_b))
    if prob < COLLAPSE_EPS:
        return SteadyState(0.0, math.inf, math.inf, iterations, converged)
    return SteadyState((1.0 - p) * prob, state.q_a, state.q_b,
                       iterations, converged)


def final_size(p: float, cfg: SystemConfig,
               tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Final surviving fraction n_inf(p); 0 on total collapse."""
    return iterate_to_steady_state(p, cfg, tol=tol, max_iter=max_iter).n_inf


def _lhs_surfaces(x, y, p: float, cfg: SystemConfig):
    """Left-hand sides of the per-layer stability inequalities.

    A point is stable iff both values reach 1/(1-p).  Written as
    (P * x + E[L 1]) / E[L] so that a zero survival probability yields 0
    instead of a division by zero.
    """
    eff_a = x + cfg.factors.beta_b * y
    eff_b = y + cfg.factors.beta_a * x
    joint = cfg.joint
    if isinstance(joint, IndependentJoint):
        prob = joint.free_a.survival(eff_a) * joint.free_b.survival(eff_b)
        lhs_a = prob * (x + joint.mean_load_a) / joint.mean_load_a
        lhs_b = prob * (y + joint.mean_load_b) / joint.mean_load_b
        return lhs_a, lhs_b
    stats = joint.survival_stats(float(eff_a), float(eff_b))
    lhs_a = (stats.probability * x + stats.load_a) / joint.mean_load_a
    lhs_b = (stats.probability * y + stats.load_b) / joint.mean_load_b
    return lhs_a, lhs_b


def is_stable_point(x: float, y: float, p: float, cfg: SystemConfig,
                    rel_tol: float = 1e-9) -> bool:
    """Whether excess loads (x, y) trigger no further failures at attack p.

    The recursion converges to the minimum stable point from below, so its
    limit can undershoot the sharp boundary by roughly the solver tolerance;
    ``rel_tol`` loosens the threshold accordingly (0 gives the sharp test).
    """
    _validate_p(p)
    if x < 0 or y < 0:
        raise ValueError(f"excess loads must be >= 0, got ({x}, {y})")
    lhs_a, lhs_b = _lhs_surfaces(float(x), float(y), p, cfg)
    threshold = (1.0 / (1.0 - p)) * (1.0 - rel_tol)
    return bool(lhs_a >= threshold and lhs_b >= threshold)


@dataclass(frozen=True)
class StableSetGrid:
    """Cell-centered scan of the stable set with the exported surfaces.

    ``lhs_a``/``lhs_b``/``stable`` are indexed [ix, iy] to match (x, y).
    ``minimum`` is the element-wise minimum over marked cells (None when the
    region is empty, i.e. the attack exceeds the critical size).
    """

    p: float
    x: np.ndarray
    y: np.ndarray
    lhs_a: np.ndarray
    lhs_b: np.ndarray
    stable: np.ndarray
    threshold: float

    @property
    def empty(self) -> bool:
        return not bool(self.stable.any())

    @property
    def minimum(self) -> tuple[float, float] | None:
        if self.empty:
            return None
        marked_x = self.stable.any(axis=1)
        marked_y = self.stable.any(axis=0)
        return (float(self.x[np.argmax(marked_x)]), float(self.y[np.argmax(marked_y)]))


def stable_set_grid(p: float, cfg: SystemConfig,
                    x_max: float | None = None, y_max: float | None = None,
                    resolution: int = DEFAULT_GRID_RESOLUTION) -> StableSetGrid:
    """Evaluate the stability inequalities on a cell-centered grid.

    The default extent is 1.2x the free-space cap, which contains every
    excess load still compatible with survival.
    """
    _validate_p(p)
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    cap = 1.2 * cfg.joint.free_space_cap()
    x_max = cap if x_max is None else float(x_max)
    y_max = cap if y_max is None else float(y_max)
    if x_max <= 0 or y_max <= 0:
        raise ValueError("grid extents must be positive")

    xs = (np.arange(resolution) + 0.5) * (x_max / resolution)
    ys = (np.arange(resolution) + 0.5) * (y_max / resolution)

    joint = cfg.joint
    if isinstance(joint, IndependentJoint):
        grid_x = xs[:, None]
        grid_y = ys[None, :]
        lhs_a, lhs_b = _lhs_surfaces(grid_x, grid_y, p, cfg)
    else:
        # Along a row of fixed y both effective thresholds increase with x,
        # so each row is one monotone cursor sweep over the sample matrix.
        lhs_a = np.empty((resolution, resolution))
        lhs_b = np.empty((resolution, resolution))
        mean_a = joint.mean_load_a
        mean_b = joint.mean_load_b
        beta_a = cfg.factors.beta_a
        beta_b = cfg.factors.beta_b
        for iy, y in enumerate(ys):
            cursor = joint.cascade_cursor()
            for ix, x in enumerate(xs):
                stats = cursor.advance(x + beta_b * y, y + beta_a * x)
                lhs_a[ix, iy] = (stats.probability * x + stats.load_a) / mean_a
                lhs_b[ix, iy] = (stats.probability * y + stats.load_b) / mean_b

    threshold = 1.0 / (1.0 - p)
    stable = (lhs_a >= threshold) & (lhs_b >= threshold)
    return StableSetGrid(p=p, x=xs, y=ys, lhs_a=lhs_a, lhs_b=lhs_b,
                         stable=stable, threshold=threshold)


@dataclass(frozen=True)
class CriticalAttackResult:
    """Bisection estimate of the critical attack size.

    ``degenerate`` marks systems that collapse even at the smallest probed
    attack.  ``non_monotone`` reports any survive-after-collapse pattern seen
    during the coarse scan; the estimate then refers to the upper survival
    boundary and should be inspected.
    """

    p_hat: float
    lower: float
    upper: float
    degenerate: bool = False
    non_monotone: bool = False

    def __float__(self) -> float:
        return self.p_hat


def critical_attack_size(cfg: SystemConfig, tol_p: float = DEFAULT_TOL_P,
                         tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                         scan_points: int = 33) -> CriticalAttackResult:
    """Largest attack fraction with a positive final size, within tol_p.

    A coarse scan first brackets the survive/collapse boundary and doubles
    as a monotonicity check of the collapse predicate before bisecting.
    """
    if tol_p <= 0.0:
        raise ValueError(f"tol_p must be > 0, got {tol_p}")

    def alive(p: float) -> bool:
        return final_size(p, cfg, tol=tol, max_iter=max_iter) > 0.0

    if not alive(tol_p):
        return CriticalAttackResult(0.0, 0.0, tol_p, degenerate=True)

    grid = np.linspace(tol_p, 1.0 - tol_p, scan_points)
    flags = [alive(float(p)) for p in grid]

    non_monotone = False
    seen_dead = False
    for ok in flags:
        if not ok:
            seen_dead = True
        elif seen_dead:
            non_monotone = True
            break

    last_alive = max(i for i, ok in enumerate(flags) if ok)
    lower = float(grid[last_alive])
    upper = float(grid[last_alive + 1]) if last_alive + 1 < len(grid) else 1.0

    while upper - lower > tol_p:
        mid = 0.5 * (lower + upper)
        if alive(mid):
            lower = mid
        else:
            upper = mid
    return CriticalAttackResult(0.5 * (lower + upper), lower, upper,
                                non_monotone=non_monotone)
