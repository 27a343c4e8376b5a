"""Pressure sums over good cylinders, Bowen roots, and h/lambda optimizers.

A good-cylinder filter keeps the depth-n cylinders that carry a witness
point whose Birkhoff averages match prescribed moment targets and whose
average of ``g = log|T'|`` clears a hyperbolicity threshold.  Two pressure
sums are formed over the selection (diameter-based and sup-based); their
exponential growth rate in n is fitted by least squares, and the unique
``s`` where the rate of ``sum diam^s`` crosses zero is the Bowen root, an
upper-bound estimate of the Hausdorff dimension of the associated level
set.  The variational counterpart maximizes entropy/Lyapunov over
parameterized measure families, optionally constrained to a metric ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySelection, Infeasible, NoBracket
from .map_model import IntervalMap
from .measures import (
    Bernoulli,
    MeasureSpec,
    MomentFamily,
    moments,
)
from .symbolic import DEFAULT_BUDGET, Cylinder, Word, iter_level_stats

DEFAULT_N_RANGE = (8, 20)
DEFAULT_EPS_SWEEP = (0.05, 0.025, 0.0125)
DEFAULT_S_TOL = 1e-4


@dataclass(frozen=True)
class GoodCylinderFilter:
    """Selection thresholds for depth-n cylinders.

    The first ``k`` moment observables f_i(x) = x^i must satisfy
    ``|A_n f_i(witness) - alpha[i]| < eps`` and the witness must have
    ``A_n g >= delta - eps``.  The witness is the cylinder's left endpoint;
    with ``use_midpoint`` the midpoint is tried as well and a cylinder
    passes if either witness does (a wider acceptance whose extra band
    width is bounded by the observable variation var_n/n).
    """

    k: int = 0
    alpha: tuple[float, ...] = ()
    delta: float = 0.1
    eps: float = 0.05
    use_midpoint: bool = False

    def __post_init__(self):
        if len(self.alpha) != self.k:
            raise ValueError("alpha must have length k")
        if not 0.0 < self.eps < self.delta:
            raise ValueError("need 0 < eps < delta")
        if not all(np.isfinite(self.alpha)):
            raise ValueError("alpha must be finite")

    def with_eps(self, eps: float) -> "GoodCylinderFilter":
        return GoodCylinderFilter(k=self.k, alpha=self.alpha, delta=self.delta,
                                  eps=eps, use_midpoint=self.use_midpoint)


def moment_filter(imap: IntervalMap, mu: MeasureSpec, k: int, delta: float = 0.1,
                  eps: float = 0.05, depth: int = 16) -> GoodCylinderFilter:
    """Filter whose moment targets are those of a given measure."""
    alpha = tuple(moments(imap, mu, k, depth)) if k else ()
    return GoodCylinderFilter(k=k, alpha=alpha, delta=delta, eps=eps)


@dataclass
class LevelSelection:
    """Selected cylinders of one depth for one eps: everything rate fits need."""

    n: int
    eps: float
    total: int
    indices: np.ndarray
    log_diam: np.ndarray
    min_sn_g: np.ndarray  # min over witnesses of S_n g, realizes sup exp(-s S_n g)
    sn_g_lo: np.ndarray

    @property
    def count(self) -> int:
        return self.indices.size


def selection_tables(
    imap: IntervalMap,
    filt: GoodCylinderFilter,
    n_values,
    eps_values=None,
    budget: int = DEFAULT_BUDGET,
    use_midpoint: bool | None = None,
):
    """Selections for every (depth, eps) pair in one sweep over the levels.

    Returns ``{(n, eps): LevelSelection}``.  The level recursion runs once;
    masks for the different eps are cheap boolean work on shared witness
    statistics.
    """
    n_values = sorted(set(int(n) for n in n_values))
    eps_values = tuple(eps_values) if eps_values is not None else (filt.eps,)
    if use_midpoint is None:
        use_midpoint = filt.use_midpoint
    k = filt.k
    alpha = np.asarray(filt.alpha)
    out = {}
    mid_levels = n_values if use_midpoint else ()
    for stats in iter_level_stats(imap, n_values[-1], k=k, mid_levels=mid_levels,
                                  budget=budget, levels=n_values):
        n = stats.n
        min_sg = np.minimum(stats.sg_lo, stats.sg_hi)
        witnesses = [(stats.sg_lo, stats.sf_lo)]
        if use_midpoint:
            min_sg = np.minimum(min_sg, stats.sg_mid)
            witnesses.append((stats.sg_mid, stats.sf_mid))
        for eps in eps_values:
            mask = np.zeros(stats.count, dtype=bool)
            for sg_w, sf_w in witnesses:
                ok = sg_w / n >= filt.delta - eps
                for i in range(k):
                    ok &= np.abs(sf_w[i] / n - alpha[i]) < eps
                mask |= ok
            idx = np.nonzero(mask)[0]
            out[(n, eps)] = LevelSelection(
                n=n, eps=eps, total=stats.count, indices=idx,
                log_diam=stats.log_diam[idx], min_sn_g=min_sg[idx],
                sn_g_lo=stats.sg_lo[idx],
            )
    return out


def select_good(imap: IntervalMap, filt: GoodCylinderFilter, n: int,
                budget: int = DEFAULT_BUDGET):
    """Count and stream of the depth-n cylinders passing the filter."""
    sel = selection_tables(imap, filt, [n], budget=budget)[(n, filt.eps)]
    stats = next(iter_level_stats(imap, n, budget=budget, levels=(n,)))
    m = imap.num_branches

    def gen():
        for i in sel.indices:
            yield Cylinder(
                word=Word.from_index(int(i), n, m),
                lo=float(stats.lo[i]), hi=float(stats.hi[i]),
                diam=float(stats.hi[i] - stats.lo[i]),
                log_diam=float(stats.log_diam[i]), sn_g=float(stats.sg_lo[i]),
            )

    return sel.count, gen()


# ---------------------------------------------------------------------------
# pressure sums and rates


@dataclass
class PressureEstimate:
    """Both pressure sums and their fitted growth rates at one exponent s."""

    s: float
    eps: float
    n_values: list[int]
    log_sums_diam: list[float]
    log_sums_sup: list[float]
    empty_levels: list[int]
    rate: float
    rate_stderr: float
    rate_sup: float
    rate_sup_stderr: float

    @property
    def rate_gap(self) -> float:
        return abs(self.rate - self.rate_sup)


def _logsumexp(x: np.ndarray) -> float:
    if x.size == 0:
        return -np.inf
    top = float(np.max(x))
    return top + float(np.log(np.sum(np.exp(x - top))))


def _fit_slope(ns, ys):
    ns = np.asarray(ns, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ns.size < 2:
        raise EmptySelection("need at least two non-empty depths to fit a rate")
    A = np.stack([ns, np.ones_like(ns)], axis=1)
    coef, residuals, *_ = np.linalg.lstsq(A, ys, rcond=None)
    slope = float(coef[0])
    if ns.size > 2:
        rss = float(residuals[0]) if residuals.size else float(np.sum((A @ coef - ys) ** 2))
        sigma2 = rss / (ns.size - 2)
        cov00 = sigma2 * np.linalg.inv(A.T @ A)[0, 0]
        stderr = math.sqrt(max(cov00, 0.0))
    else:
        stderr = 0.0
    return slope, stderr


def _level_log_sums(sel: LevelSelection, s: float):
    return (
        _logsumexp(s * sel.log_diam),
        _logsumexp(-s * sel.min_sn_g),
    )


def pressure_sums_from_tables(tables, eps: float, s: float, n_values) -> PressureEstimate:
    log_diam_sums, log_sup_sums, used, empty = [], [], [], []
    for n in n_values:
        sel = tables[(n, eps)]
        if sel.count == 0:
            empty.append(n)
            continue
        ld, lsf = _level_log_sums(sel, s)
        log_diam_sums.append(ld)
        log_sup_sums.append(lsf)
        used.append(n)
    rate, rerr = _fit_slope(used, log_diam_sums)
    rate_sup, serr = _fit_slope(used, log_sup_sums)
    return PressureEstimate(
        s=s, eps=eps, n_values=used,
        log_sums_diam=log_diam_sums, log_sums_sup=log_sup_sums,
        empty_levels=empty, rate=rate, rate_stderr=rerr,
        rate_sup=rate_sup, rate_sup_stderr=serr,
    )


def pressure_sums(imap: IntervalMap, filt: GoodCylinderFilter, s: float,
                  n_range=DEFAULT_N_RANGE, budget: int = DEFAULT_BUDGET) -> PressureEstimate:
    """Pressure sums for each depth in ``n_range`` with fitted rates.

    The least-squares slope of log-sum against n kills additive O(1)
    offsets that a raw (1/n) log at n_max would keep.
    """
    if s < 0:
        raise ValueError("the exponent s must be non-negative")
    n_values = list(range(n_range[0], n_range[1] + 1))
    tables = selection_tables(imap, filt, n_values, budget=budget)
    return pressure_sums_from_tables(tables, filt.eps, s, n_values)


# ---------------------------------------------------------------------------
# the Bowen root


@dataclass
class BowenRootResult:
    """Root of the fitted pressure rate, with the eps-sweep diagnostics.

    ``value`` is the median of the per-eps roots (they plateau as eps
    shrinks; the linear-in-eps ``extrapolated`` intercept and the
    ``spread`` are reported for inspection).
    """

    value: float
    roots_by_eps: dict[float, float]
    spread: float
    extrapolated: float
    s_tol: float
    prefactor_exponent: float

    def __float__(self):
        return self.value


def _root_for_tables(tables, eps, n_values, s_tol, gamma):
    sels = [tables[(n, eps)] for n in n_values if tables[(n, eps)].count > 0]
    if len(sels) < 2:
        raise EmptySelection("need at least two non-empty depths to fit a rate")
    nn = np.array([sel.n for sel in sels], dtype=float)
    A = np.stack([nn, np.ones_like(nn)], axis=1)
    corr = gamma * np.log(nn)

    def rate(s):
        ys = np.array([_logsumexp(s * sel.log_diam) for sel in sels]) - corr
        coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
        return float(coef[0])

    r0 = rate(0.0)
    if r0 <= 0.0:
        raise NoBracket(f"rate at s=0 is {r0:.3g} <= 0; the selection does not grow")
    s_hi = 1.0
    while rate(s_hi) > 0.0:
        s_hi *= 2.0
        if s_hi > 64.0:
            raise NoBracket("no sign change of the rate below s = 64")
    s_lo = 0.0
    while s_hi - s_lo > s_tol:
        mid = 0.5 * (s_lo + s_hi)
        if rate(mid) > 0.0:
            s_lo = mid
        else:
            s_hi = mid
    return 0.5 * (s_lo + s_hi)


def bowen_root(
    imap: IntervalMap,
    filt: GoodCylinderFilter,
    n_range=DEFAULT_N_RANGE,
    s_tol: float = DEFAULT_S_TOL,
    eps_sweep=DEFAULT_EPS_SWEEP,
    budget: int = DEFAULT_BUDGET,
    prefactor_exponent: float | None = None,
) -> BowenRootResult:
    """Bisection root in s of the fitted diameter-pressure rate.

    The fit removes the polynomial prefactor that narrow moment bands
    carry: a k-dimensional band around the Birkhoff mean has local-limit
    counts ~ n^(k/2) exp(n rate), so the slope is fitted to
    ``log sum - (k/2) log n`` (override via ``prefactor_exponent``; k = 0
    selections have no band and no correction).  The eps -> 0 limit is
    replaced by a sweep over ``eps_sweep``: the reported value is the
    median of the per-eps roots, with their spread and the linear-in-eps
    extrapolation as diagnostics.
    """
    n_values = list(range(n_range[0], n_range[1] + 1))
    eps_values = tuple(eps_sweep) if eps_sweep else (filt.eps,)
    if any(e >= filt.delta for e in eps_values):
        raise ValueError("every sweep eps must stay below delta")
    gamma = 0.5 * filt.k if prefactor_exponent is None else prefactor_exponent
    tables = selection_tables(imap, filt, n_values, eps_values=eps_values, budget=budget)
    roots = {eps: _root_for_tables(tables, eps, n_values, s_tol, gamma) for eps in eps_values}
    vals = np.array([roots[e] for e in eps_values])
    if len(eps_values) >= 2:
        _, intercept = np.polyfit(np.asarray(eps_values), vals, 1)
        extrapolated = float(intercept)
        spread = float(vals.max() - vals.min())
    else:
        extrapolated = float(vals[0])
        spread = 0.0
    return BowenRootResult(
        value=float(np.median(vals)), roots_by_eps=roots, spread=spread,
        extrapolated=extrapolated, s_tol=s_tol, prefactor_exponent=gamma,
    )


# ---------------------------------------------------------------------------
# block Bernoulli measures (products of one depth-n distribution)


@dataclass
class BlockBernoulliMeasure:
    """A product measure built from one distribution on depth-n words.

    Per-block entropy is the Shannon entropy of the weights; per-step
    quantities divide by the block length, and the per-block Lyapunov
    quadrature uses the Birkhoff sums of g at the cylinders' left
    endpoints.
    """

    n: int
    indices: np.ndarray
    weights: np.ndarray
    sn_g: np.ndarray
    min_sn_g: np.ndarray

    def __post_init__(self):
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be a probability vector")

    @property
    def entropy(self) -> float:
        w = self.weights[self.weights > 0]
        return float(-np.sum(w * np.log(w)))

    @property
    def entropy_per_step(self) -> float:
        return self.entropy / self.n

    @property
    def lyapunov_per_step(self) -> float:
        return float(np.sum(self.weights * self.sn_g)) / self.n

    @property
    def hl_ratio(self) -> float:
        return self.entropy_per_step / self.lyapunov_per_step

    def growth_identity_terms(self, s: float):
        """Exact decomposition H(w) = s * E_w[min S_n g] + I_n for the
        equilibrium weights w ~ exp(-s min S_n g); returns (H, rhs, I_n)."""
        i_n = _logsumexp(-s * self.min_sn_g)
        rhs = s * float(np.sum(self.weights * self.min_sn_g)) + i_n
        return self.entropy, rhs, i_n

    def lower_bound_terms(self, s: float):
        """Terms of the tested inequality
        h_step - s*lambda_step >= I_n/n - (|s|/n) * max oscillation of S_n g."""
        _, _, i_n = self.growth_identity_terms(s)
        osc = float(np.max(self.sn_g - self.min_sn_g)) if self.sn_g.size else 0.0
        lhs = self.entropy_per_step - s * self.lyapunov_per_step
        rhs = i_n / self.n - abs(s) / self.n * osc
        return lhs, rhs


def block_bernoulli_measure(imap: IntervalMap, n: int, weights, indices=None,
                            budget: int = DEFAULT_BUDGET) -> BlockBernoulliMeasure:
    """Block measure from explicit positive weights over depth-n cylinders.

    ``indices`` selects cylinders in lexicographic order (all of them when
    omitted); weights must sum to one.
    """
    weights = np.asarray(weights, dtype=float)
    stats = next(iter_level_stats(imap, n, budget=budget, levels=(n,)))
    if indices is None:
        indices = np.arange(stats.count)
    else:
        indices = np.asarray(indices, dtype=np.int64)
    if indices.size != weights.size or indices.size == 0:
        raise EmptySelection("weights and indices must be non-empty and aligned")
    min_sg = np.minimum(stats.sg_lo, stats.sg_hi)
    return BlockBernoulliMeasure(
        n=n, indices=indices, weights=weights,
        sn_g=stats.sg_lo[indices], min_sn_g=min_sg[indices],
    )


def equilibrium_block_measure(imap: IntervalMap, n: int, s: float,
                              filt: GoodCylinderFilter | None = None,
                              kind: str = "sup",
                              budget: int = DEFAULT_BUDGET) -> BlockBernoulliMeasure:
    """Block measure with weights proportional to sup exp(-s S_n g) (or
    diam^s with ``kind='diam'``) over the filtered depth-n cylinders."""
    if filt is None:
        stats = next(iter_level_stats(imap, n, budget=budget, levels=(n,)))
        indices = np.arange(stats.count)
        log_diam = stats.log_diam
        min_sg = np.minimum(stats.sg_lo, stats.sg_hi)
        sn_g = stats.sg_lo
    else:
        sel = selection_tables(imap, filt, [n], budget=budget)[(n, filt.eps)]
        if sel.count == 0:
            raise EmptySelection(f"no cylinder passed the filter at depth {n}")
        indices, log_diam, min_sg, sn_g = sel.indices, sel.log_diam, sel.min_sn_g, sel.sn_g_lo
    logw = s * log_diam if kind == "diam" else -s * min_sg
    logw = logw - np.max(logw)
    w = np.exp(logw)
    w /= w.sum()
    out = BlockBernoulliMeasure(n=n, indices=indices, weights=w, sn_g=sn_g, min_sn_g=min_sg)
    return out


# ---------------------------------------------------------------------------
# variational optimizer: sup h/lambda over parameterized families


@dataclass(frozen=True)
class ConstraintBall:
    """Metric ball around a center measure, intersected with hyperbolicity."""

    center: MeasureSpec
    radius: float
    lyap_floor: float = 1e-6

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be non-negative")


@dataclass
class HLOptimum:
    """Result of maximizing entropy over Lyapunov exponent."""

    value: float
    weights: tuple[float, ...]
    order: int
    spec: MeasureSpec | None
    feasible: bool
    distance: float | None = None


class _BlockFamily:
    """Bernoulli measures over m^q blocks: objective pieces for the optimizer."""

    def __init__(self, imap: IntervalMap, order: int, depth: int,
                 family: MomentFamily | None = None, need_moments: bool = False):
        self.q = order
        self.m = imap.num_branches
        self.B = self.m**order
        reps = max(1, round(depth / order))
        self.depth = reps * order
        stats = next(iter_level_stats(imap, self.depth, levels=(self.depth,)))
        idx = np.arange(self.m**self.depth)
        self.block_ids = [
            (idx // self.B ** (reps - 1 - j)) % self.B for j in range(reps)
        ]
        self.sg = stats.sg_lo
        self.reps = reps
        if need_moments:
            family = family or MomentFamily()
            mid = 0.5 * (stats.lo + stats.hi)
            self.moment_matrix = np.stack([mid ** i for i in range(1, family.count + 1)])
            self.family = family

    def word_probs(self, theta: np.ndarray) -> np.ndarray:
        prob = theta[self.block_ids[0]].copy()
        for ids in self.block_ids[1:]:
            prob *= theta[ids]
        return prob

    def h_step(self, theta: np.ndarray) -> float:
        t = theta[theta > 1e-300]
        return float(-np.sum(t * np.log(t))) / self.q

    def lam_step(self, theta: np.ndarray) -> float:
        prob = self.word_probs(theta)
        total = prob.sum()
        if total <= 0:
            return 0.0
        return float(np.sum(prob * self.sg)) / (self.depth * total)

    def measure_moments(self, theta: np.ndarray) -> np.ndarray:
        prob = self.word_probs(theta)
        prob = prob / prob.sum()
        return self.moment_matrix @ prob


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.clip(v - theta, 0.0, None)


def sup_dim_ratio(
    imap: IntervalMap,
    ball: ConstraintBall | None = None,
    order: int = 1,
    depth: int = 12,
    restarts: int = 20,
    iterations: int = 500,
    fd_step: float = 1e-6,
    seed: int = 0,
    penalty: float = 1e4,
    family: MomentFamily | None = None,
) -> HLOptimum:
    """Maximize h(mu)/lambda(mu) over block-Bernoulli families.

    ``order=1`` optimizes over Bernoulli measures on the branch alphabet;
    larger orders use the alphabet of m^order blocks.  Projected gradient
    ascent with finite-difference gradients and simplex projection, 20
    random restarts by default; the metric-ball constraint (when given)
    enters as a quadratic penalty, with a feasibility check on the
    returned point.  Ball distances use quadrature moments at ``depth`` on
    both sides, so the center itself is at distance zero.
    """
    fam = _BlockFamily(imap, order, depth, family=family, need_moments=ball is not None)
    if ball is not None:
        center_m = fam.measure_moments(_spec_block_weights(ball.center, imap, order))
        weights_fam = (family or MomentFamily()).weights
        floor = ball.lyap_floor
    else:
        center_m = None
        floor = 1e-9

    def dist(theta):
        return float(np.sum(weights_fam * np.abs(fam.measure_moments(theta) - center_m)))

    def objective(theta):
        lam = fam.lam_step(theta)
        if lam <= floor:
            return -1e18
        val = fam.h_step(theta) / lam
        if ball is not None:
            gap = dist(theta) - ball.radius
            if gap > 0:
                val -= penalty * gap * gap
        return val

    rng = np.random.default_rng([seed])
    inits = [np.full(fam.B, 1.0 / fam.B)]
    inits += [rng.dirichlet(np.ones(fam.B)) for _ in range(max(0, restarts - 1))]
    if ball is not None:
        inits.insert(1, _spec_block_weights(ball.center, imap, order))

    best_val, best_theta = -np.inf, None
    for theta0 in inits:
        theta = _project_simplex(np.asarray(theta0, dtype=float))
        val = objective(theta)
        lr = 0.1
        for _ in range(iterations):
            grad = np.empty(fam.B)
            for i in range(fam.B):
                bumped = theta.copy()
                bumped[i] += fd_step
                grad[i] = (objective(bumped) - val) / fd_step
            grad -= grad.mean()
            gnorm = float(np.linalg.norm(grad))
            if gnorm < 1e-13 or lr < 1e-13:
                break
            cand = _project_simplex(theta + lr * grad / max(gnorm, 1e-300))
            cand_val = objective(cand)
            if cand_val > val:
                theta, val = cand, cand_val
                lr *= 1.25
            else:
                lr *= 0.5
        if val > best_val:
            best_val, best_theta = val, theta
    if best_theta is None:
        raise Infeasible("no restart produced a usable point")
    lam = fam.lam_step(best_theta)
    d = dist(best_theta) if ball is not None else None
    feasible = lam > floor and (ball is None or d <= ball.radius + 1e-8)
    if not feasible:
        raise Infeasible(
            f"best point infeasible: lambda={lam:.3g}, distance={d}"
        )
    value = fam.h_step(best_theta) / lam
    spec = Bernoulli(best_theta) if order == 1 else None
    return HLOptimum(
        value=value, weights=tuple(float(x) for x in best_theta),
        order=order, spec=spec, feasible=feasible, distance=d,
    )


def _spec_block_weights(spec: MeasureSpec, imap: IntervalMap, order: int) -> np.ndarray:
    """Block weights of a measure spec on the m^order block alphabet."""
    from .measures import word_probabilities

    return word_probabilities(spec, imap.num_branches, order)
