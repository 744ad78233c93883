"""Load and free-space distributions for the multiplex flow-network model.

Four marginal families cover the configurations used throughout the package:
uniform, Pareto (classical, location-scale form), Weibull shifted by a
minimum value, and a Dirac point mass.  All supports are strictly positive.

The joint objects answer the two queries the mean-field solver needs:

* ``joint_survival(x, y)``        -- P[S_A > x, S_B > y]
* ``partial_load_expectation``    -- E[L_i * 1{S_A > x, S_B > y}]

Three joint flavours exist: independent marginals (closed form), an
empirical sample matrix for correlated inputs (e.g. multivariate-normal
draws supplied by the user), and a per-node proportional coupling
S = alpha * L used by the tolerance-factor allocation strategy.  The
proportional coupling has no factorized closed form, so its analytic
queries are served from a deterministic stored sample matrix.

Survival uses the strict inequality P[S > x].  For continuous marginals
this equals the non-strict version; for a Dirac mass the mass at ``v``
does not survive a threshold of exactly ``v``, so optimal Dirac
allocations must be evaluated strictly below their critical attack size.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# Sample count / seed used when a coupled joint falls back to stored samples.
DEFAULT_SAMPLE_COUNT = 1_000_000
DEFAULT_SAMPLE_SEED = 424_242

MIN_EMPIRICAL_SAMPLES = 10_000


class DistributionError(ValueError):
    """Raised for invalid distribution parameters or sample matrices."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DistributionError(message)


def _scalar_or_array(values: np.ndarray):
    return float(values) if values.ndim == 0 else values


@dataclass(frozen=True)
class Uniform:
    """Uniform distribution on [low, high] with 0 < low < high."""

    low: float
    high: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.low) and math.isfinite(self.high),
                 "uniform bounds must be finite")
        _require(0 < self.low < self.high,
                 f"uniform requires 0 < min < max, got ({self.low}, {self.high})")

    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        s = np.clip((self.high - x) / (self.high - self.low), 0.0, 1.0)
        return _scalar_or_array(s)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(self.low + u * (self.high - self.low))

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.random(size))

    def upper_bound(self) -> float:
        return self.high


@dataclass(frozen=True)
class Pareto:
    """Classical Pareto with minimum > 0 and shape > 1 (finite mean).

    Shapes <= 1 have no mean and the recursion is undefined for them, so
    they are rejected at construction rather than surfacing as NaN later.
    """

    minimum: float
    shape: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.minimum) and self.minimum > 0,
                 f"pareto requires min > 0, got {self.minimum}")
        _require(math.isfinite(self.shape) and self.shape > 1,
                 f"pareto requires shape b > 1 for a finite mean, got {self.shape}")

    def mean(self) -> float:
        return self.minimum * self.shape / (self.shape - 1.0)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        s = (self.minimum / np.maximum(x, self.minimum)) ** self.shape
        return _scalar_or_array(s)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(self.minimum * (1.0 - u) ** (-1.0 / self.shape))

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.random(size))

    def upper_bound(self) -> float:
        return math.inf


@dataclass(frozen=True)
class Weibull:
    """Weibull with location shift: X = minimum + lambda * W(shape)."""

    minimum: float
    scale: float
    shape: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.minimum) and self.minimum >= 0,
                 f"weibull requires min >= 0, got {self.minimum}")
        _require(math.isfinite(self.scale) and self.scale > 0,
                 f"weibull requires scale lambda > 0, got {self.scale}")
        _require(math.isfinite(self.shape) and self.shape > 0,
                 f"weibull requires shape k > 0, got {self.shape}")

    def mean(self) -> float:
        return self.minimum + self.scale * math.gamma(1.0 + 1.0 / self.shape)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        z = np.maximum(x - self.minimum, 0.0) / self.scale
        return _scalar_or_array(np.exp(-(z ** self.shape)))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(self.minimum + self.scale * (-np.log1p(-u)) ** (1.0 / self.shape))

    def sample(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.random(size))

    def upper_bound(self) -> float:
        return math.inf


@dataclass(frozen=True)
class Dirac:
    """Point mass at a positive value.

    ``survival(x)`` is 1 if value > x and 0 otherwise: the mass does not
    survive a threshold equal to its own value.
    """

    value: float

    def __post_init__(self) -> None:
        _require(math.isfinite(self.value) and self.value > 0,
                 f"dirac requires value > 0, got {self.value}")

    def mean(self) -> float:
        return self.value

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(np.where(x < self.value, 1.0, 0.0))

    def quantile(self, u):
        return _scalar_or_array(np.full(np.shape(u), self.value))

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)  # keep the stream advancing like other variants
        return self.quantile(u)

    def upper_bound(self) -> float:
        return self.value


MarginalDistribution = Union[Uniform, Pareto, Weibull, Dirac]

_KINDS = {"uniform", "pareto", "weibull", "dirac"}


def marginal_from_dict(record: dict, where: str = "distribution") -> MarginalDistribution:
    """Parse a tagged record like {"kind": "uniform", "min": 20, "max": 40}."""
    if not isinstance(record, dict):
        raise DistributionError(f"{where}: expected a tagged record, got {record!r}")
    kind = record.get("kind")
    if kind not in _KINDS:
        raise DistributionError(f"{where}.kind: expected one of {sorted(_KINDS)}, got {kind!r}")

    def field(name: str) -> float:
        if name not in record:
            raise DistributionError(f"{where}.{name}: missing for kind={kind!r}")
        try:
            return float(record[name])
        except (TypeError, ValueError):
            raise DistributionError(f"{where}.{name}: expected a number, got {record[name]!r}")

    try:
        if kind == "uniform":
            return Uniform(field("min"), field("max"))
        if kind == "pareto":
            return Pareto(field("min"), field("b"))
        if kind == "weibull":
            return Weibull(field("min"), field("lambda"), field("k"))
        return Dirac(field("value"))
    except DistributionError as exc:
        raise DistributionError(f"{where}: {exc}") from exc


def marginal_to_dict(dist: MarginalDistribution) -> dict:
    if isinstance(dist, Uniform):
        return {"kind": "uniform", "min": dist.low, "max": dist.high}
    if isinstance(dist, Pareto):
        return {"kind": "pareto", "min": dist.minimum, "b": dist.shape}
    if isinstance(dist, Weibull):
        return {"kind": "weibull", "min": dist.minimum, "lambda": dist.scale, "k": dist.shape}
    return {"kind": "dirac", "value": dist.value}


def support_cap(dist: MarginalDistribution, tail_quantile: float = 0.9999) -> float:
    """Finite stand-in for the upper end of the support (tail quantile if unbounded)."""
    bound = dist.upper_bound()
    if math.isfinite(bound):
        return bound
    return float(dist.quantile(tail_quantile))


class SurvivalStats(NamedTuple):
    """Joint survival probability and the partial load means at one threshold pair."""

    probability: float
    load_a: float  # E[L_A * 1{S_A > x, S_B > y}]
    load_b: float  # E[L_B * 1{S_A > x, S_B > y}]


class JointLoadSpace:
    """Joint description of per-node (L_A, S_A, L_B, S_B).

    Implementations are immutable after construction and safe to share
    across threads; sampling always takes an explicit generator.
    """

    mean_load_a: float
    mean_load_b: float
    mean_free_a: float
    mean_free_b: float

    def mean_load(self, layer: str) -> float:
        if layer == "A":
            return self.mean_load_a
        if layer == "B":
            return self.mean_load_b
        raise ValueError(f"layer must be 'A' or 'B', got {layer!r}")

    def joint_survival(self, x: float, y: float) -> float:
        raise NotImplementedError

    def partial_load_expectation(self, layer: str, x: float, y: float) -> float:
        stats = self.survival_stats(x, y)
        if layer == "A":
            return stats.load_a
        if layer == "B":
            return stats.load_b
        raise ValueError(f"layer must be 'A' or 'B', got {layer!r}")

    def survival_stats(self, x: float, y: float) -> SurvivalStats:
        raise NotImplementedError

    def cascade_cursor(self) -> "CascadeCursor":
        """Stateful view for solves whose thresholds only ever increase."""
        raise NotImplementedError

    def sample_population(self, n: int, rng: np.random.Generator):
        """Draw n i.i.d. rows; returns (load_a, free_a, load_b, free_b) arrays."""
        raise NotImplementedError

    def free_space_cap(self) -> float:
        """Finite upper estimate for reachable free-space values (plot/grid bound)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class CascadeCursor:
    """Monotone-threshold view of a joint: ``advance`` with nondecreasing (x, y)."""

    def advance(self, x: float, y: float) -> SurvivalStats:
        raise NotImplementedError


class _ClosedFormCursor(CascadeCursor):
    def __init__(self, joint: JointLoadSpace):
        self._joint = joint

    def advance(self, x: float, y: float) -> SurvivalStats:
        return self._joint.survival_stats(x, y)


@dataclass(frozen=True)
class IndependentJoint(JointLoadSpace):
    """Four mutually independent marginals; every joint query factorizes."""

    load_a: MarginalDistribution
    free_a: MarginalDistribution
    load_b: MarginalDistribution
    free_b: MarginalDistribution

    @property
    def mean_load_a(self) -> float:
        return self.load_a.mean()

    @property
    def mean_load_b(self) -> float:
        return self.load_b.mean()

    @property
    def mean_free_a(self) -> float:
        return self.free_a.mean()

    @property
    def mean_free_b(self) -> float:
        return self.free_b.mean()

    def joint_survival(self, x, y):
        return self.free_a.survival(x) * self.free_b.survival(y)

    def partial_load_expectation(self, layer: str, x: float, y: float) -> float:
        # L independent of (S_A, S_B): the indicator factors out.
        return self.mean_load(layer) * self.joint_survival(x, y)

    def survival_stats(self, x: float, y: float) -> SurvivalStats:
        prob = self.free_a.survival(x) * self.free_b.survival(y)
        return SurvivalStats(prob, self.mean_load_a * prob, self.mean_load_b * prob)

    def cascade_cursor(self) -> CascadeCursor:
        return _ClosedFormCursor(self)

    def sample_population(self, n: int, rng: np.random.Generator):
        load_a = np.asarray(self.load_a.sample(rng, n), dtype=float)
        free_a = np.asarray(self.free_a.sample(rng, n), dtype=float)
        load_b = np.asarray(self.load_b.sample(rng, n), dtype=float)
        free_b = np.asarray(self.free_b.sample(rng, n), dtype=float)
        return load_a, free_a, load_b, free_b

    def free_space_cap(self) -> float:
        return max(support_cap(self.free_a), support_cap(self.free_b))

    def to_dict(self) -> dict:
        return {
            "load_a": marginal_to_dict(self.load_a),
            "free_a": marginal_to_dict(self.free_a),
            "load_b": marginal_to_dict(self.load_b),
            "free_b": marginal_to_dict(self.free_b),
        }


class _EmpiricalCursor(CascadeCursor):
    """Incremental sweep over a fixed sample matrix.

    Rows drop out once their free space falls at or below the running
    thresholds; alive counts and load sums are maintained incrementally so a
    whole solve costs O(m) plus per-call overhead.  Produces the same
    probabilities as the stateless queries (counts are exact; load sums agree
    up to summation-order rounding).
    """

    def __init__(self, joint: "EmpiricalJoint"):
        self._joint = joint
        m = joint.sample_count
        self._failed = np.zeros(m, dtype=bool)
        self._alive = m
        self._sum_a = float(joint._loads_a_total)
        self._sum_b = float(joint._loads_b_total)
        self._pos_a = 0
        self._pos_b = 0
        self._x = -math.inf
        self._y = -math.inf

    def _drop(self, order: np.ndarray, lo: int, hi: int) -> None:
        idx = order[lo:hi]
        idx = idx[~self._failed[idx]]
        if idx.size:
            self._failed[idx] = True
            self._alive -= idx.size
            self._sum_a -= float(self._joint._loads_a[idx].sum())
            self._sum_b -= float(self._joint._loads_b[idx].sum())

    def advance(self, x: float, y: float) -> SurvivalStats:
        # Thresholds never move backwards within one solve.
        x = max(x, self._x)
        y = max(y, self._y)
        joint = self._joint
        if x > self._x:
            hi = int(np.searchsorted(joint._sorted_free_a, x, side="right"))
            self._drop(joint._order_free_a, self._pos_a, hi)
            self._pos_a, self._x = hi, x
        if y > self._y:
            hi = int(np.searchsorted(joint._sorted_free_b, y, side="right"))
            self._drop(joint._order_free_b, self._pos_b, hi)
            self._pos_b, self._y = hi, y
        m = joint.sample_count
        return SurvivalStats(self._alive / m, self._sum_a / m, self._sum_b / m)


@dataclass(frozen=True, eq=False)
class EmpiricalJoint(JointLoadSpace):
    """Joint backed by a fixed sample matrix with columns (L_A, S_A, L_B, S_B).

    Accepts correlated inputs the closed forms cannot express.  The matrix is
    stored once and reused across all queries, so solver results are
    deterministic given the samples.
    """

    samples: np.ndarray
    source: dict | None = None  # provenance for serialization, optional

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 4:
            raise DistributionError(
                f"empirical samples must have shape (m, 4), got {samples.shape}")
        if samples.shape[0] < MIN_EMPIRICAL_SAMPLES:
            raise DistributionError(
                f"empirical mode needs at least {MIN_EMPIRICAL_SAMPLES} samples, "
                f"got {samples.shape[0]}")
        if not np.all(np.isfinite(samples)) or np.any(samples <= 0.0):
            raise DistributionError("empirical samples must be finite and strictly positive")
        # private copy: cached sums must not drift under caller mutation
        samples = np.array(samples, dtype=float, order="C")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def sample_count(self) -> int:
        return self.samples.shape[0]

    @cached_property
    def _loads_a(self) -> np.ndarray:
        return np.ascontiguousarray(self.samples[:, 0])

    @cached_property
    def _free_a(self) -> np.ndarray:
        return np.ascontiguousarray(self.samples[:, 1])

    @cached_property
    def _loads_b(self) -> np.ndarray:
        return np.ascontiguousarray(self.samples[:, 2])

    @cached_property
    def _free_b(self) -> np.ndarray:
        return np.ascontiguousarray(self.samples[:, 3])

    @cached_property
    def _loads_a_total(self) -> float:
        return float(self._loads_a.sum())

    @cached_property
    def _loads_b_total(self) -> float:
        return float(self._loads_b.sum())

    @cached_property
    def _order_free_a(self) -> np.ndarray:
        return np.argsort(self._free_a)

    @cached_property
    def _sorted_free_a(self) -> np.ndarray:
        return self._free_a[self._order_free_a]

    @cached_property
    def _order_free_b(self) -> np.ndarray:
        return np.argsort(self._free_b)

    @cached_property
    def _sorted_free_b(self) -> np.ndarray:
        return self._free_b[self._order_free_b]

    @property
    def mean_load_a(self) -> float:
        return self._loads_a_total / self.sample_count

    @property
    def mean_load_b(self) -> float:
        return self._loads_b_total / self.sample_count

    @property
    def mean_free_a(self) -> float:
        return float(self._free_a.mean())

    @property
    def mean_free_b(self) -> float:
        return float(self._free_b.mean())

    def joint_survival(self, x: float, y: float) -> float:
        mask = (self._free_a > x) & (self._free_b > y)
        return float(np.count_nonzero(mask)) / self.sample_count

    def partial_load_expectation(self, layer: str, x: float, y: float) -> float:
        loads = self._loads_a if layer == "A" else self._loads_b if layer == "B" else None
        if loads is None:
            raise ValueError(f"layer must be 'A' or 'B', got {layer!r}")
        mask = (self._free_a > x) & (self._free_b > y)
        return float(loads[mask].sum()) / self.sample_count

    def survival_stats(self, x: float, y: float) -> SurvivalStats:
        mask = (self._free_a > x) & (self._free_b > y)
        m = self.sample_count
        return SurvivalStats(
            float(np.count_nonzero(mask)) / m,
            float(self._loads_a[mask].sum()) / m,
            float(self._loads_b[mask].sum()) / m,
        )

    def cascade_cursor(self) -> CascadeCursor:
        return _EmpiricalCursor(self)

    def sample_population(self, n: int, rng: np.random.Generator):
        rows = self.samples[rng.integers(0, self.sample_count, size=n)]
        return (np.ascontiguousarray(rows[:, 0]), np.ascontiguousarray(rows[:, 1]),
                np.ascontiguousarray(rows[:, 2]), np.ascontiguousarray(rows[:, 3]))

    def free_space_cap(self) -> float:
        return float(max(self._free_a.max(), self._free_b.max()))

    def to_dict(self) -> dict:
        if self.source is not None:
            return dict(self.source)
        return {"empirical": {"count": self.sample_count}}


@dataclass(frozen=True)
class ProportionalJoint(JointLoadSpace):
    """Free space coupled to load per node: S_{x,i} = alpha * L_{x,i}.

    Populations use the exact coupling.  Analytic queries have no factorized
    closed form (S is a deterministic function of L), so they are estimated
    from a stored sample matrix generated once from ``sample_seed``.
    """

    load_a: MarginalDistribution
    load_b: MarginalDistribution
    alpha: float
    sample_count: int = DEFAULT_SAMPLE_COUNT
    sample_seed: int = DEFAULT_SAMPLE_SEED

    def __post_init__(self) -> None:
        _require(math.isfinite(self.alpha) and self.alpha > 0,
                 f"tolerance factor alpha must be > 0, got {self.alpha}")
        _require(self.sample_count >= MIN_EMPIRICAL_SAMPLES,
                 f"sample_count must be at least {MIN_EMPIRICAL_SAMPLES}")

    @cached_property
    def _empirical(self) -> EmpiricalJoint:
        logger.info(
            "free space is proportional to load (alpha=%g); analytic queries "
            "use %d stored samples (seed %d)",
            self.alpha, self.sample_count, self.sample_seed)
        rng = np.random.default_rng(np.random.SeedSequence(self.sample_seed))
        load_a = np.asarray(self.load_a.sample(rng, self.sample_count), dtype=float)
        load_b = np.asarray(self.load_b.sample(rng, self.sample_count), dtype=float)
        samples = np.column_stack([load_a, self.alpha * load_a, load_b, self.alpha * load_b])
        return EmpiricalJoint(samples)

    @property
    def mean_load_a(self) -> float:
        # Solver-facing moments must all come from the same (stored-sample)
        # measure, or the recursion loses its monotone-trajectory guarantee.
        return self._empirical.mean_load_a

    @property
    def mean_load_b(self) -> float:
        return self._empirical.mean_load_b

    @property
    def mean_free_a(self) -> float:
        # reporting only (budget tables); the solver never reads these
        return self.alpha * self.load_a.mean()

    @property
    def mean_free_b(self) -> float:
        return self.alpha * self.load_b.mean()

    def joint_survival(self, x: float, y: float) -> float:
        return self._empirical.joint_survival(x, y)

    def partial_load_expectation(self, layer: str, x: float, y: float) -> float:
        return self._empirical.partial_load_expectation(layer, x, y)

    def survival_stats(self, x: float, y: float) -> SurvivalStats:
        return self._empirical.survival_stats(x, y)

    def cascade_cursor(self) -> CascadeCursor:
        return self._empirical.cascade_cursor()

    def sample_population(self, n: int, rng: np.random.Generator):
        load_a = np.asarray(self.load_a.sample(rng, n), dtype=float)
        load_b = np.asarray(self.load_b.sample(rng, n), dtype=float)
        return load_a, self.alpha * load_a, load_b, self.alpha * load_b

    def free_space_cap(self) -> float:
        return self.alpha * max(support_cap(self.load_a), support_cap(self.load_b))

    def to_dict(self) -> dict:
        return {
            "load_a": marginal_to_dict(self.load_a),
            "load_b": marginal_to_dict(self.load_b),
            "alpha": self.alpha,
            "sample_count": self.sample_count,
            "sample_seed": self.sample_seed,
        }

    def __getstate__(self):
        # Drop the cached sample matrix; workers rebuild it from the seed.
        state = dict(self.__dict__)
        state.pop("_empirical", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
