"""
Cutting-Plane Price Solver
Perturbation vectors, a subgradient-only central-cut ellipsoid (float and exact
rational modes), rounding to exact prices and the verify-and-retry pipeline
"""

import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import DEFAULT_RETRY_CAP, GS_EXACT_DIMENSION_LIMIT
from core.errors import AmbiguousRoundingError, DomainError, NumericFailure
from core.market import (
    BuyerWitness,
    EquilibriumCertificate,
    MarketInstance,
    PriceVector,
    SolveReport,
    as_prices,
    magnitude_bound,
    price_of,
)
from core.valuations import OracleCounter, evaluate
from solvers.potential import all_greedy, evaluate_potential
from utils.trace import TraceWriter, emit
from verification.brute_force import walrasian_membership

logger = logging.getLogger(__name__)

REGIMES = ("gs_deterministic", "general_random")
ALGORITHMS = ("ellipsoid_general", "ellipsoid_gs", "ellipsoid_gs_regularized")
STOP_REASONS = ("zero-subgradient", "width", "max-iterations")

# GS rounding refuses coordinates this close to a half-integer
HALF_INTEGER_GUARD = Fraction(1, 10 ** 9)
EXACT_GUARD_BITS = 64
# float shapes past this condition number are restarted
FLOAT_CONDITION_LIMIT = 1e12
# widest-to-narrowest axis ratio kept by a restart
RESTART_SPREAD = 1e5
RESTART_SPREAD_EXACT = 2 ** 20
# rounded transcript points tried per attempt
CANDIDATE_LIMIT = 4


@dataclass(frozen=True)
class PerturbationVector:
    r: PriceVector
    regime: str
    seed: Optional[int] = None
    attempt: int = 0


@dataclass(frozen=True)
class OracleAnswer:
    """Subgradient at a query point, with the objective value when it comes for free."""

    subgradient: Tuple[Fraction, ...]
    value: Optional[Fraction] = None


@dataclass
class EllipsoidState:
    center: Tuple
    shape: object
    iterations: int = 0
    transcript: List[Tuple[PriceVector, Tuple[Fraction, ...], Optional[Fraction]]] = field(default_factory=list)
    best_point: Optional[PriceVector] = None
    best_value: Optional[Fraction] = None
    zero_point: Optional[PriceVector] = None
    stop_reason: str = ""
    exact: bool = False
    restarts: int = 0


SubgradientCallback = Callable[[PriceVector], Union[OracleAnswer, Sequence]]


def supply_scale(instance: MarketInstance) -> int:
    return max(instance.max_supply, 1)


def make_perturbation(
    instance: MarketInstance, regime: str, seed: int = 0, attempt: int = 0
) -> PerturbationVector:
    """
    Perturbation r added to the supply term of the potential.

    gs_deterministic: r_j = 1/(2Sn). general_random: r_j = z_j / (K (nS)^(2n+1))
    with z_j uniform in [0, K - 1] and K = nM(nS)^(2n), drawn from a stream
    seeded by (seed, attempt); every r_j stays below (nS)^-(2n+1).
    """
    n = instance.n
    S = supply_scale(instance)
    if regime == "gs_deterministic":
        value = Fraction(1, 2 * S * n)
        return PerturbationVector(r=(value,) * n, regime=regime)
    if regime != "general_random":
        raise ValueError(f"Unknown regime '{regime}'. Expected one of: {', '.join(REGIMES)}")
    M = max(magnitude_bound(instance), 1)
    draws = n * M * (n * S) ** (2 * n)
    denominator = draws * (n * S) ** (2 * n + 1)
    # stdlib stream: draws exceed 64 bits already for small markets
    rng = random.Random(f"{seed}:{attempt}")
    r = tuple(Fraction(rng.randrange(draws), denominator) for _ in range(n))
    return PerturbationVector(r=r, regime=regime, seed=seed, attempt=attempt)


def default_epsilon(instance: MarketInstance, regime: str) -> Fraction:
    """GS: 1/(5nMS); general: (nMS)^-(5n+3)."""
    n = instance.n
    M = max(magnitude_bound(instance), 1)
    S = supply_scale(instance)
    if regime == "gs_deterministic":
        return Fraction(1, 5 * n * M * S)
    return Fraction(1, (n * M * S) ** (5 * n + 3))


def lipschitz_bound(instance: MarketInstance) -> float:
    """Bound on the norm of any potential subgradient."""
    S = supply_scale(instance)
    return math.sqrt(instance.n) * ((instance.m + 1) * S + 1)


def iteration_cap(dimension: int, radius: float, lipschitz: float, epsilon: Fraction, exact: bool) -> int:
    ratio = 2 * radius * lipschitz
    log_ratio = math.log(ratio) + math.log(epsilon.denominator) - math.log(epsilon.numerator)
    factor = 5 * dimension * dimension if exact else 2 * dimension * (dimension + 1)
    return int(math.ceil(factor * max(log_ratio, 1.0))) + dimension


def interior_query_budget(dimension: int, radius: float, side: Fraction) -> int:
    """Cuts after which a cube of the given side can no longer fit in the ellipsoid."""
    log_ratio = math.log(2 * radius) + math.log(side.denominator) - math.log(side.numerator)
    return int(math.ceil(2 * dimension * (dimension + 1) * max(log_ratio, 1.0))) + dimension


def _as_answer(result) -> OracleAnswer:
    if isinstance(result, OracleAnswer):
        return result
    return OracleAnswer(subgradient=tuple(Fraction(g) for g in result))


def _dyadic(value: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(round(value * scale), scale)


def _dyadic_sqrt(value: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(math.isqrt(value.numerator * scale * scale // value.denominator), scale)


class _FloatEllipsoid:
    def __init__(self, dimension: int, radius: float, center: Optional[Sequence] = None):
        self.n = dimension
        radius = float(radius)
        self.center = np.array([float(x) for x in center]) if center is not None else np.zeros(dimension)
        self.shape = np.eye(dimension) * radius * radius

    def point(self) -> PriceVector:
        return tuple(Fraction(float(x)) for x in self.center)

    def cut(self, g: Sequence) -> None:
        n = self.n
        g = np.array([float(x) for x in g])
        Pg = self.shape @ g
        gPg = float(g @ Pg)
        if not np.isfinite(gPg) or gPg <= 0:
            raise NumericFailure(f"shape matrix lost positive definiteness (g'Pg = {gPg})")
        b = Pg / math.sqrt(gPg)
        if n == 1:
            self.center = self.center - b / 2
            self.shape = self.shape / 4
        else:
            self.center = self.center - b / (n + 1)
            self.shape = (n * n / (n * n - 1.0)) * (self.shape - (2.0 / (n + 1)) * np.outer(b, b))
            self.shape = (self.shape + self.shape.T) / 2
        if not np.all(np.isfinite(self.center)) or not np.all(np.isfinite(self.shape)):
            raise NumericFailure("ellipsoid state became non-finite")

    def width_below(self, bound: Fraction) -> bool:
        largest = float(np.linalg.eigvalsh(self.shape).max())
        return largest < float(bound) ** 2

    def degenerate(self) -> bool:
        eigenvalues = np.linalg.eigvalsh(self.shape)
        return eigenvalues.min() <= eigenvalues.max() / FLOAT_CONDITION_LIMIT

    def restart(self, box: Fraction) -> None:
        """Axis-aligned ellipsoid around the box-clipped bounding box of the current one."""
        limit = float(box)
        lo = np.full(self.n, -limit)
        hi = np.full(self.n, limit)
        if np.all(np.isfinite(self.shape)) and np.all(np.isfinite(self.center)):
            half = np.sqrt(np.clip(np.diag(self.shape), 0.0, None))
            clipped_lo = np.maximum(self.center - half, -limit)
            clipped_hi = np.minimum(self.center + half, limit)
            if np.all(clipped_lo <= clipped_hi):
                lo, hi = clipped_lo, clipped_hi
        half = (hi - lo) / 2
        half = np.maximum(half, half.max() / RESTART_SPREAD) * (1 + 1e-9) + 1e-12
        self.center = (lo + hi) / 2
        self.shape = np.diag(self.n * half * half)


class _ExactEllipsoid:
    """Rational ellipsoid rounded to a dyadic grid, with the enlarged update factor."""

    def __init__(self, dimension: int, radius: Fraction, bits: int, center: Optional[Sequence] = None):
        self.n = dimension
        self.bits = bits
        self.factor = Fraction(2 * dimension * dimension + 3, 2 * dimension * dimension)
        if center is None:
            center = [Fraction(0)] * dimension
        self.center = [_dyadic(Fraction(x), bits) for x in center]
        r2 = Fraction(radius) * Fraction(radius)
        self.shape = [[r2 if a == b else Fraction(0) for b in range(dimension)] for a in range(dimension)]

    def point(self) -> PriceVector:
        return tuple(self.center)

    def cut(self, g: Sequence[Fraction]) -> None:
        n, bits = self.n, self.bits
        P = self.shape
        Pg = [sum((P[a][b] * g[b] for b in range(n)), Fraction(0)) for a in range(n)]
        gPg = sum((g[a] * Pg[a] for a in range(n)), Fraction(0))
        if gPg <= 0:
            raise NumericFailure("exact shape matrix lost positive definiteness")
        root = _dyadic_sqrt(gPg, bits)
        if root <= 0:
            raise NumericFailure("subgradient norm underflowed the dyadic grid")
        b = [x / root for x in Pg]
        if n == 1:
            self.center = [_dyadic(self.center[0] - b[0] / 2, bits)]
            self.shape = [[_dyadic(P[0][0] * self.factor / 4, bits)]]
            return
        self.center = [_dyadic(c - x / (n + 1), bits) for c, x in zip(self.center, b)]
        weight = Fraction(2, n + 1)
        self.shape = [
            [_dyadic(self.factor * (P[a][c] - weight * b[a] * b[c]), bits) for c in range(n)]
            for a in range(n)
        ]

    def width_below(self, bound: Fraction) -> bool:
        trace = sum((self.shape[a][a] for a in range(self.n)), Fraction(0))
        return trace < bound * bound

    def degenerate(self) -> bool:
        return any(self.shape[a][a] <= 0 for a in range(self.n))

    def restart(self, box: Fraction) -> None:
        n, bits = self.n, self.bits
        unit = Fraction(1, 1 << bits)
        half = [_dyadic_sqrt(max(self.shape[a][a], Fraction(0)), bits) + unit for a in range(n)]
        lo = [max(c - h, -box) for c, h in zip(self.center, half)]
        hi = [min(c + h, box) for c, h in zip(self.center, half)]
        if any(l > h for l, h in zip(lo, hi)):
            lo, hi = [-box] * n, [box] * n
        half = [(h - l) / 2 for l, h in zip(lo, hi)]
        widest = max(half)
        # one grid unit absorbs the rounding of the new center
        half = [max(h, widest / RESTART_SPREAD_EXACT) + unit for h in half]
        self.center = [_dyadic((l + h) / 2, bits) for l, h in zip(lo, hi)]
        self.shape = [[n * half[a] * half[a] if a == c else Fraction(0) for c in range(n)] for a in range(n)]


def _outside_box(point: Sequence[Fraction], box: Fraction) -> Optional[Tuple[int, int]]:
    for j, x in enumerate(point):
        if x > box:
            return j, 1
        if x < -box:
            return j, -1
    return None


def ellipsoid_minimize(
    callback: SubgradientCallback,
    box_M: Union[int, Fraction],
    epsilon: Fraction,
    max_iters: Optional[int] = None,
    dimension: Optional[int] = None,
    exact: bool = False,
    lipschitz: float = 1.0,
    trace: Optional[TraceWriter] = None,
    start: Optional[Tuple[Sequence, Union[float, Fraction]]] = None,
) -> EllipsoidState:
    """
    Central-cut ellipsoid over the box [-2M, 2M]^n using subgradients only.

    Starts from the ball of radius 2M*sqrt(n) around 0, or from the ball given
    by start. Centers outside the box are cut by the violated face without
    querying the callback. A shape that loses positive definiteness (or, in
    float mode, whose condition number passes FLOAT_CONDITION_LIMIT) is
    replaced by an axis-aligned ellipsoid around its box-clipped bounding
    box, which still holds every minimizer the old one held. Stops on a zero
    subgradient, when the largest semi-axis drops below epsilon / lipschitz,
    or after max_iters steps. The best point is the evaluated query with the smallest
    value (the final center when no values are reported).

    Args:
        callback: Maps an exact price point to an OracleAnswer or a subgradient
        box_M: M; the search box is [-2M, 2M]^n
        epsilon: Target accuracy of the objective
        max_iters: Step cap (derived from epsilon when omitted)
        dimension: n
        exact: Run in dyadic rational arithmetic instead of floats
        lipschitz: Bound on subgradient norms
        trace: Optional JSON-lines trace of every query
        start: Optional (center, radius) of the initial ball

    Returns:
        EllipsoidState with the full transcript
    """
    if dimension is None or dimension < 1:
        raise DomainError("the ellipsoid needs a positive dimension")
    n = dimension
    M = max(Fraction(box_M), Fraction(1))
    box = 2 * M
    radius_float = float(box) * math.sqrt(n)
    epsilon = Fraction(epsilon)
    if max_iters is None:
        max_iters = iteration_cap(n, radius_float, lipschitz, epsilon, exact)
    center, radius = (None, None) if start is None else start
    if center is not None and len(center) != n:
        raise DomainError(f"start center has {len(center)} entries, expected {n}")
    width_bound = epsilon / Fraction(lipschitz)
    if exact:
        # the grid has to resolve the squared width bound
        precision = math.log2(width_bound.denominator) - math.log2(width_bound.numerator)
        bits = 2 * max(1, math.ceil(precision)) + EXACT_GUARD_BITS
        if radius is None:
            # rational radius at least 2M*sqrt(n)
            radius = box * Fraction(math.isqrt(n - 1) + 1)
        body = _ExactEllipsoid(n, Fraction(radius), bits, center)
    else:
        body = _FloatEllipsoid(n, radius_float if radius is None else float(radius), center)

    state = EllipsoidState(center=body.point(), shape=body.shape, exact=exact)

    def record(point: PriceVector, answer: OracleAnswer) -> None:
        state.transcript.append((point, answer.subgradient, answer.value))
        if answer.value is not None and (state.best_value is None or answer.value < state.best_value):
            state.best_value = answer.value
            state.best_point = point

    def cut(g: Sequence) -> None:
        try:
            body.cut(g)
            if not body.degenerate():
                return
            reason = "shape is numerically singular"
        except NumericFailure as exc:
            reason = str(exc)
        body.restart(box)
        state.restarts += 1
        logger.debug("Ellipsoid restart %d at step %d: %s", state.restarts, state.iterations, reason)
        emit(trace, iteration=state.iterations, restart=state.restarts, reason=reason)

    while state.iterations < max_iters:
        state.iterations += 1
        point = body.point()
        face = _outside_box(point, box)
        if face is not None:
            j, sign = face
            g = [Fraction(0)] * n
            g[j] = Fraction(sign)
            cut(g)
            continue
        answer = _as_answer(callback(point))
        record(point, answer)
        emit(
            trace,
            iteration=state.iterations,
            point=list(point),
            subgradient=list(answer.subgradient),
            value=answer.value,
        )
        if all(g == 0 for g in answer.subgradient):
            state.zero_point = point
            state.best_point = point
            state.best_value = answer.value
            state.stop_reason = "zero-subgradient"
            break
        cut(answer.subgradient)
        if body.width_below(width_bound):
            state.stop_reason = "width"
            break
    else:
        state.stop_reason = "max-iterations"

    if state.stop_reason != "zero-subgradient":
        # the center of a thin ellipsoid is close to every minimizer; query its box projection
        final = tuple(min(max(x, -box), box) for x in body.point())
        answer = _as_answer(callback(final))
        record(final, answer)
        if all(g == 0 for g in answer.subgradient):
            state.zero_point = final
            state.best_point = final
            state.best_value = answer.value
        elif state.best_point is None:
            state.best_point = final

    state.center = body.point()
    state.shape = body.shape
    logger.debug(
        "Ellipsoid (%s, n=%d) stopped after %d steps and %d restarts: %s",
        "exact" if exact else "float", n, state.iterations, state.restarts, state.stop_reason,
    )
    return state


def round_prices(
    approx_point: Sequence,
    instance: MarketInstance,
    regime: str,
    denominator_bound: Optional[int] = None,
) -> PriceVector:
    """
    Snap an approximate minimizer to exact prices.

    GS: componentwise nearest integer. General: best rational approximation with
    denominator at most (nS)^n, accepted only within 1/(2D^2), where it is unique.
    """
    point = as_prices(approx_point)
    if regime == "gs_deterministic":
        rounded = []
        for j, x in enumerate(point):
            floor = math.floor(x)
            if abs(x - floor - Fraction(1, 2)) <= HALF_INTEGER_GUARD:
                raise AmbiguousRoundingError(j, x, "equidistant from two integers")
            rounded.append(Fraction(math.floor(x + Fraction(1, 2))))
        return tuple(rounded)
    if regime != "general_random":
        raise ValueError(f"Unknown regime '{regime}'. Expected one of: {', '.join(REGIMES)}")
    bound = denominator_bound or (instance.n * supply_scale(instance)) ** instance.n
    radius = Fraction(1, 2 * bound * bound)
    rounded = []
    for j, x in enumerate(point):
        candidate = x.limit_denominator(bound)
        if abs(candidate - x) > radius:
            raise AmbiguousRoundingError(j, x, f"no rational with denominator <= {bound} within {radius}")
        rounded.append(candidate)
    return tuple(rounded)


def certify_prices(
    instance: MarketInstance,
    prices: Sequence,
    counter: Optional[OracleCounter] = None,
    budget: Optional[int] = None,
) -> Optional[EquilibriumCertificate]:
    """Certificate for prices that pass the exact membership test, else None."""
    p = as_prices(prices)
    verdict = walrasian_membership(instance, p, budget=budget)
    if not verdict.member:
        logger.debug("Prices %s rejected: %s %s", [str(x) for x in p], verdict.condition, verdict.detail)
        return None
    witnesses = []
    for i, (spec, bundle) in enumerate(zip(instance.buyers, verdict.allocation)):
        utility = Fraction(evaluate(spec, bundle)) - price_of(p, bundle)
        witnesses.append(BuyerWitness(buyer=i, method="brute_force", utility=utility, best_utility=utility))
    return EquilibriumCertificate(
        prices=p,
        allocation=verdict.allocation,
        witnesses=tuple(witnesses),
        oracle_calls=counter.as_dict() if counter is not None else {},
    )


def _potential_callback(instance, variant, perturbation, mode, counter):
    def callback(point: PriceVector) -> OracleAnswer:
        answer = evaluate_potential(instance, point, variant, perturbation, mode, counter)
        return OracleAnswer(subgradient=answer.subgradient, value=answer.value)

    return callback


def _slice_callback(instance, perturbation, counter):
    """f~(q) + r'.q restricted to q_n = 0; the point carries the first n-1 coordinates."""
    def callback(point: PriceVector) -> OracleAnswer:
        q = tuple(point) + (Fraction(0),)
        answer = evaluate_potential(instance, q, "regularized", perturbation, counter=counter)
        return OracleAnswer(subgradient=answer.subgradient[:-1], value=answer.value)

    return callback


def _regularized_prices(instance: MarketInstance, q: Sequence, counter: OracleCounter) -> PriceVector:
    """p = q + gamma(q) * 1."""
    result = all_greedy(instance, q, counter)
    return tuple(x + result.gamma for x in as_prices(q))


def _rounded_candidates(state: EllipsoidState, snap: Callable[[PriceVector], PriceVector]) -> List[PriceVector]:
    """
    Distinct roundings of the best point and then of the lowest-valued queries.

    Raises:
        AmbiguousRoundingError: no point of the transcript rounds unambiguously
    """
    points = [state.best_point] if state.best_point is not None else []
    valued = sorted((entry for entry in state.transcript if entry[2] is not None), key=lambda entry: entry[2])
    points.extend(point for point, _, _ in valued)
    candidates: List[PriceVector] = []
    first_error: Optional[AmbiguousRoundingError] = None
    for point in points:
        try:
            candidate = snap(point)
        except AmbiguousRoundingError as exc:
            first_error = first_error or exc
            continue
        if candidate not in candidates:
            candidates.append(candidate)
            if len(candidates) == CANDIDATE_LIMIT:
                break
    if not candidates:
        if first_error is not None:
            raise first_error
        raise AmbiguousRoundingError(0, None, "the ellipsoid produced no point to round")
    return candidates


def _start_ball(anchor: Optional[PriceVector], box_M: int, dimension: int, shrink: int):
    """Ball around an earlier best point, halved per retry down to a radius of 2*sqrt(n)."""
    if anchor is None or shrink <= 0:
        return None
    scale = math.isqrt(dimension - 1) + 1
    radius = max(Fraction(2 * box_M * scale, 2 ** shrink), Fraction(2 * scale))
    return anchor, radius


def _gs_minimize(callback, box_M, epsilon, dimension, lipschitz, trace, start, exact) -> EllipsoidState:
    exact = exact and dimension <= GS_EXACT_DIMENSION_LIMIT
    return ellipsoid_minimize(
        callback, box_M, epsilon, dimension=dimension, exact=exact, lipschitz=lipschitz, trace=trace, start=start
    )


def _minimize_once(
    instance: MarketInstance,
    algorithm: str,
    perturbation: PerturbationVector,
    epsilon: Fraction,
    counter: OracleCounter,
    trace: Optional[TraceWriter],
    anchor: Optional[PriceVector] = None,
    shrink: int = 0,
    exact: bool = False,
) -> Tuple[List[PriceVector], EllipsoidState]:
    """
    One ellipsoid run plus rounding; returns candidate prices, best first.

    The GS algorithms start from a ball around anchor when shrink is positive
    and run in exact arithmetic when asked to (for at most
    GS_EXACT_DIMENSION_LIMIT coordinates).
    """
    n = instance.n
    M = max(magnitude_bound(instance), 1)
    lipschitz = lipschitz_bound(instance)

    if algorithm == "ellipsoid_general":
        if n > GS_EXACT_DIMENSION_LIMIT:
            raise DomainError(
                f"exact general-valuation mode supports at most {GS_EXACT_DIMENSION_LIMIT} items, got {n}"
            )
        callback = _potential_callback(instance, "perturbed", perturbation.r, "brute_force", counter)
        state = ellipsoid_minimize(callback, M, epsilon, dimension=n, exact=True, lipschitz=lipschitz, trace=trace)
        return _rounded_candidates(state, lambda point: round_prices(point, instance, "general_random")), state

    if algorithm == "ellipsoid_gs":
        callback = _potential_callback(instance, "perturbed", perturbation.r, "greedy_gs", counter)
        start = _start_ball(anchor, M, n, shrink)
        state = _gs_minimize(callback, M, epsilon, n, lipschitz, trace, start, exact)
        return _rounded_candidates(state, lambda point: round_prices(point, instance, "gs_deterministic")), state

    # regularized: f~ is constant along the all-ones direction, so search the slice q_n = 0
    if n == 1:
        state = EllipsoidState(center=(Fraction(0),), shape=None, stop_reason="zero-subgradient")
        return [_regularized_prices(instance, (Fraction(0),), counter)], state
    callback = _slice_callback(instance, perturbation.r[:-1] + (Fraction(0),), counter)
    start = _start_ball(anchor, 2 * M, n - 1, shrink)
    state = _gs_minimize(callback, 2 * M, epsilon, n - 1, lipschitz, trace, start, exact)

    def snap(point: PriceVector) -> PriceVector:
        q = round_prices(point, instance, "gs_deterministic") + (Fraction(0),)
        return _regularized_prices(instance, q, counter)

    return _rounded_candidates(state, snap), state


def solve_walrasian_prices(
    instance: MarketInstance,
    algorithm: str = "ellipsoid_gs",
    seed: int = 0,
    epsilon: Optional[Fraction] = None,
    retry_cap: Optional[int] = None,
    trace: Optional[TraceWriter] = None,
    budget: Optional[int] = None,
) -> SolveReport:
    """
    Perturb, minimize, round and verify, retrying with a halved epsilon.

    Each attempt certifies up to CANDIDATE_LIMIT distinct roundings of its
    lowest-valued queries. The general regime resamples the perturbation on
    every retry. The GS regime keeps its deterministic perturbation and
    instead restarts each retry from a shrinking ball around the best point
    found so far, alternating exact and float arithmetic. Only prices passing
    the exact membership test are ever certified; after the retry cap the
    verdict is "no-equilibrium-found" for general valuations and
    "inconclusive" for the GS algorithms.

    Args:
        instance: Market to solve
        algorithm: ellipsoid_general, ellipsoid_gs or ellipsoid_gs_regularized
        seed: Seed of the general-regime perturbation stream
        epsilon: Starting accuracy (regime default when omitted)
        retry_cap: Attempts before giving up (default 10)
        trace: Optional JSON-lines trace
        budget: Verification enumeration budget

    Returns:
        SolveReport
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"Unknown algorithm '{algorithm}'. Expected one of: {', '.join(ALGORITHMS)}")
    regime = "general_random" if algorithm == "ellipsoid_general" else "gs_deterministic"
    if regime == "gs_deterministic" and not instance.is_single_unit():
        raise DomainError(f"{algorithm} requires a single-unit market")
    retry_cap = DEFAULT_RETRY_CAP if retry_cap is None else int(retry_cap)
    if retry_cap < 1:
        raise ValueError("retry cap must be at least 1")
    epsilon = Fraction(epsilon) if epsilon is not None else default_epsilon(instance, regime)
    if algorithm == "ellipsoid_gs_regularized" and epsilon == default_epsilon(instance, regime):
        # the slice search box is twice as wide
        epsilon /= 2

    counter = OracleCounter()
    iterations = 0
    candidate: Optional[PriceVector] = None
    anchor: Optional[PriceVector] = None
    anchor_value: Optional[Fraction] = None
    notes = []
    for attempt in range(retry_cap):
        perturbation = make_perturbation(instance, regime, seed, attempt)
        emit(trace, attempt=attempt, epsilon=epsilon, perturbation=list(perturbation.r))
        gs_retry = regime == "gs_deterministic" and attempt > 0
        try:
            candidates, state = _minimize_once(
                instance, algorithm, perturbation, epsilon, counter, trace,
                anchor=anchor if gs_retry else None,
                shrink=attempt if gs_retry else 0,
                exact=gs_retry and attempt % 2 == 1,
            )
        except AmbiguousRoundingError as exc:
            logger.debug("Attempt %d failed: %s", attempt + 1, exc)
            notes.append(f"attempt {attempt + 1}: {exc}")
            epsilon /= 2
            continue
        iterations += state.iterations
        if state.restarts:
            notes.append(f"attempt {attempt + 1}: {state.restarts} ellipsoid restart(s)")
        if state.best_value is not None and (anchor_value is None or state.best_value < anchor_value):
            anchor, anchor_value = state.best_point, state.best_value
        candidate = candidates[0]
        for prices in candidates:
            certificate = certify_prices(instance, prices, counter, budget)
            if certificate is None:
                continue
            logger.info(
                "%s certified prices %s after %d attempt(s)",
                algorithm, [str(x) for x in prices], attempt + 1,
            )
            return SolveReport(
                prices=prices,
                certificate=certificate,
                verdict="certified",
                method=algorithm,
                iterations=iterations,
                oracle_calls=counter.as_dict(),
                retries=attempt,
                epsilon=epsilon,
                notes=tuple(notes),
            )
        rejected = ", ".join(str([str(x) for x in c]) for c in candidates)
        notes.append(f"attempt {attempt + 1}: prices {rejected} not Walrasian")
        epsilon /= 2

    verdict = "no-equilibrium-found" if regime == "general_random" else "inconclusive"
    logger.warning("%s: no certified prices after %d attempts (%s)", algorithm, retry_cap, verdict)
    return SolveReport(
        prices=candidate,
        certificate=None,
        verdict=verdict,
        method=algorithm,
        iterations=iterations,
        oracle_calls=counter.as_dict(),
        retries=retry_cap - 1,
        epsilon=epsilon,
        notes=tuple(notes),
    )
