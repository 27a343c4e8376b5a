"""Parameterized invariant measures and the moment metric on them.

A MeasureSpec is one of: a Bernoulli measure on the symbol space, a
first-order Markov measure, or the Dirac mass at a branch fixed point.
Entropy and Lyapunov exponents have closed forms or cylinder quadratures;
the weak-* metric is truncated to the first N monomial moments,

    d(mu, nu) = sum_{n=1..N} |m_n(mu) - m_n(nu)| / 2^n,

with tail bound 2^(1-N).  Monomials have sup-norm one on [0, 1] and their
moments determine measures there, so every metric value is analytically
checkable.  Push-forward moments are exact for linear maps (self-affinity
recursion) and cylinder quadratures otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import Degenerate, OrbitEscaped, OutOfDomain
from .map_model import IntervalMap
from .symbolic import level_stats, word_orbit

DEFAULT_MOMENTS = 32
DEFAULT_QUAD_DEPTH = 16
PROB_TOL = 1e-12
STATIONARY_TOL = 1e-10


@dataclass(frozen=True)
class MeasureSpec:
    """An invariant measure given by symbolic data.

    ``variant`` is one of ``bernoulli`` (field ``p``), ``markov`` (fields
    ``P`` and the derived stationary vector ``pi_stat``) or ``dirac``
    (field ``branch``).
    """

    variant: str
    p: tuple[float, ...] | None = None
    P: tuple[tuple[float, ...], ...] | None = None
    pi_stat: tuple[float, ...] | None = None
    branch: int | None = None

    def num_symbols(self) -> int | None:
        if self.variant == "bernoulli":
            return len(self.p)
        if self.variant == "markov":
            return len(self.P)
        return None

    def __str__(self):
        if self.variant == "bernoulli":
            return f"Bernoulli{tuple(round(x, 6) for x in self.p)}"
        if self.variant == "markov":
            return f"Markov({len(self.P)} states)"
        return f"DiracFixed({self.branch})"


def Bernoulli(p) -> MeasureSpec:
    p = tuple(float(x) for x in p)
    if any(x < 0 for x in p) or abs(sum(p) - 1.0) > PROB_TOL:
        raise ValueError(f"not a probability vector: {p}")
    return MeasureSpec(variant="bernoulli", p=p)


def Markov(P) -> MeasureSpec:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > PROB_TOL:
        raise ValueError("rows of the transition matrix must be probability vectors")
    pi = _stationary_vector(P)
    if np.max(np.abs(pi @ P - pi)) > STATIONARY_TOL:
        raise ValueError("failed to compute a stationary vector to 1e-10")
    return MeasureSpec(
        variant="markov",
        P=tuple(tuple(row) for row in P),
        pi_stat=tuple(float(x) for x in pi),
    )


def DiracFixed(branch: int) -> MeasureSpec:
    return MeasureSpec(variant="dirac", branch=int(branch))


def _stationary_vector(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    b = np.concatenate([np.zeros(n), [1.0]])
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def load_measure(config) -> MeasureSpec:
    """Measure spec from a JSON-style dict or file path."""
    if isinstance(config, (str, bytes)) or hasattr(config, "read"):
        with open(config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    variant = config["variant"]
    if variant == "bernoulli":
        return Bernoulli(config["p"])
    if variant == "markov":
        return Markov(config["P"])
    if variant == "dirac":
        return DiracFixed(config["branch"])
    raise ValueError(f"unknown measure variant {variant!r}")


# ---------------------------------------------------------------------------
# entropies and Lyapunov exponents


def entropy(spec: MeasureSpec) -> float:
    """Kolmogorov-Sinai entropy in nats (0*log 0 := 0)."""
    if spec.variant == "bernoulli":
        return float(-sum(x * math.log(x) for x in spec.p if x > 0))
    if spec.variant == "markov":
        total = 0.0
        for pi_i, row in zip(spec.pi_stat, spec.P):
            total -= pi_i * sum(x * math.log(x) for x in row if x > 0)
        return float(total)
    return 0.0


def symbol_frequencies(spec: MeasureSpec) -> np.ndarray:
    if spec.variant == "bernoulli":
        return np.asarray(spec.p)
    if spec.variant == "markov":
        return np.asarray(spec.pi_stat)
    raise ValueError("dirac measures have no symbol frequency vector")


def lyapunov(spec: MeasureSpec, imap: IntervalMap, depth: int = DEFAULT_QUAD_DEPTH) -> float:
    """The integral of log|T'|.

    Closed form for Dirac masses (exactly 0 at a parabolic branch) and for
    linear maps; depth-n cylinder quadrature with weights mu[w] and g at
    the left endpoints otherwise.
    """
    if spec.variant == "dirac":
        if imap.parabolic_flags[spec.branch]:
            return 0.0
        x = imap.fixed_points[spec.branch]
        return float(np.log(abs(imap.branches[spec.branch].derivative(x))))
    if imap.is_linear:
        freqs = symbol_frequencies(spec)
        slopes = np.array([abs(b.slope) for b in imap.branches])
        return float(np.sum(freqs * np.log(slopes)))
    stats = level_stats(imap, depth)
    probs = word_probabilities(spec, imap.num_branches, depth)
    g = _g_at(imap, stats.lo, depth)
    return float(np.sum(probs * g))


def _g_at(imap: IntervalMap, points: np.ndarray, depth: int) -> np.ndarray:
    m = imap.num_branches
    idx = np.arange(points.size)
    first = (idx // m ** (depth - 1)) % m
    out = np.empty_like(points)
    for b in imap.branches:
        mask = first == b.index
        if np.any(mask):
            out[mask] = np.log(np.abs(b.derivative(points[mask])))
    return out


def word_probabilities(spec: MeasureSpec, m: int, depth: int) -> np.ndarray:
    """mu[w] for all m^depth words in lexicographic order."""
    if spec.variant == "dirac":
        out = np.zeros(m**depth)
        idx = sum(spec.branch * m**j for j in range(depth))
        out[idx] = 1.0
        return out
    idx = np.arange(m**depth)
    digits = [(idx // m ** (depth - 1 - j)) % m for j in range(depth)]
    if spec.variant == "bernoulli":
        p = np.asarray(spec.p)
        prob = np.ones(m**depth)
        for d in digits:
            prob *= p[d]
        return prob
    P = np.asarray(spec.P)
    prob = np.asarray(spec.pi_stat)[digits[0]].copy()
    for a, b in zip(digits, digits[1:]):
        prob *= P[a, b]
    return prob


def word_log_probs(spec: MeasureSpec, words: np.ndarray) -> np.ndarray:
    """Cumulative log mu[w|_n] along each row of ``words`` (shape (S, L))."""
    words = np.atleast_2d(np.asarray(words, dtype=np.int64))
    if spec.variant == "bernoulli":
        logp = np.log(np.asarray(spec.p))
        return np.cumsum(logp[words], axis=1)
    if spec.variant == "markov":
        logP = np.log(np.asarray(spec.P))
        out = np.empty(words.shape)
        out[:, 0] = np.log(np.asarray(spec.pi_stat))[words[:, 0]]
        steps = logP[words[:, :-1], words[:, 1:]]
        out[:, 1:] = out[:, :1] + np.cumsum(steps, axis=1)
        return out
    raise ValueError("dirac measures do not weight words")


def sample_words(spec: MeasureSpec, count: int, length: int, rng) -> np.ndarray:
    """Draw ``count`` words of the given length from the measure."""
    if spec.variant == "bernoulli":
        p = np.asarray(spec.p)
        return rng.choice(len(p), size=(count, length), p=p)
    if spec.variant == "markov":
        P = np.asarray(spec.P)
        m = P.shape[0]
        out = np.empty((count, length), dtype=np.int64)
        out[:, 0] = rng.choice(m, size=count, p=np.asarray(spec.pi_stat))
        u = rng.random((count, length - 1))
        cum = np.cumsum(P, axis=1)
        for t in range(1, length):
            out[:, t] = (u[:, t - 1, None] > cum[out[:, t - 1]]).sum(axis=1)
        return out
    raise ValueError("cannot sample words from a dirac measure")


# ---------------------------------------------------------------------------
# moments and the metric


@dataclass(frozen=True)
class MomentFamily:
    """The monomial test family f_n(x) = x^n, n = 1..count, sup-norm one."""

    count: int = DEFAULT_MOMENTS

    def __post_init__(self):
        if self.count < 8:
            raise ValueError("the moment family needs at least 8 functions")

    @property
    def tail_bound(self) -> float:
        return 2.0 ** (1 - self.count)

    @property
    def weights(self) -> np.ndarray:
        return 2.0 ** -np.arange(1, self.count + 1)


def moments(imap: IntervalMap, spec: MeasureSpec, count: int = DEFAULT_MOMENTS,
            depth: int = DEFAULT_QUAD_DEPTH) -> np.ndarray:
    """Moments m_1..m_count of the push-forward of ``spec`` to [0, 1].

    Exact for Dirac masses and (via the self-affinity recursion) for linear
    maps; midpoint cylinder quadrature at the given depth otherwise.
    """
    if spec.variant == "dirac":
        x = imap.fixed_points[spec.branch]
        return x ** np.arange(1, count + 1)
    if imap.is_linear:
        return _self_affine_moments(imap, spec, count)
    stats = level_stats(imap, depth)
    probs = word_probabilities(spec, imap.num_branches, depth)
    mid = 0.5 * (stats.lo + stats.hi)
    out = np.empty(count)
    acc = probs.copy()
    for i in range(count):
        acc = acc * mid if i else probs * mid
        out[i] = acc.sum()
    return out


def quadrature_bound(imap: IntervalMap, spec: MeasureSpec, count: int = DEFAULT_MOMENTS,
                     depth: int = DEFAULT_QUAD_DEPTH) -> float:
    """Bound on the metric error of quadrature moments, from cylinder diameters."""
    if spec.variant == "dirac" or imap.is_linear:
        return 0.0
    stats = level_stats(imap, depth)
    probs = word_probabilities(spec, imap.num_branches, depth)
    mean_diam = float(np.sum(probs * (stats.hi - stats.lo)))
    ns = np.arange(1, count + 1)
    return float(np.sum(2.0**-ns * ns) * 0.5 * mean_diam)


def _spow(s, n: int):
    """s**(-n) for possibly negative slopes, numpy-safe."""
    return np.sign(s) ** n * np.abs(s) ** -float(n)


def _self_affine_moments(imap: IntervalMap, spec: MeasureSpec, count: int) -> np.ndarray:
    slopes = np.array([b.slope for b in imap.branches])
    offsets = np.array([b.offset for b in imap.branches])
    # T_i(x) = s_i x + c_i, so S_i(y) = (y - c_i) / s_i
    if spec.variant == "bernoulli":
        p = np.asarray(spec.p)
        m = [1.0]
        for n in range(1, count + 1):
            binom = np.array([math.comb(n, k) for k in range(n)])
            num = 0.0
            for pi, s, c in zip(p, slopes, offsets):
                if pi == 0.0:
                    continue
                num += pi * _spow(s, n) * float(np.sum(binom * (-c) ** (n - np.arange(n)) * m[:n]))
            den = 1.0 - float(np.sum(p * _spow(slopes, n)))
            m.append(num / den)
        return np.asarray(m[1:])
    # markov: per-state moment vectors coupled through a small linear solve
    P = np.asarray(spec.P)
    nstates = P.shape[0]
    mstate = [np.ones(nstates)]
    for n in range(1, count + 1):
        binom = np.array([math.comb(n, k) for k in range(n)])
        lower = np.stack(mstate, axis=0)  # (n, states)
        b = np.empty(nstates)
        for j in range(nstates):
            mix = P[j] @ lower.T  # (n,) moments of the successor mixture
            b[j] = _spow(slopes[j], n) * float(
                np.sum(binom * (-offsets[j]) ** (n - np.arange(n)) * mix)
            )
        D = _spow(slopes[:, None], n) * P
        mn = np.linalg.solve(np.eye(nstates) - D, b)
        mstate.append(mn)
    pi = np.asarray(spec.pi_stat)
    return np.array([float(pi @ mn) for mn in mstate[1:]])


def metric_d(imap: IntervalMap, mu, nu, family: MomentFamily | None = None,
             depth: int = DEFAULT_QUAD_DEPTH) -> float:
    """Truncated weak-* metric between two measures (or raw moment vectors)."""
    family = family or MomentFamily()
    mm = mu if isinstance(mu, np.ndarray) else moments(imap, mu, family.count, depth)
    mn = nu if isinstance(nu, np.ndarray) else moments(imap, nu, family.count, depth)
    if mm.shape != mn.shape or mm.size != family.count:
        raise ValueError("moment vectors must match the family size")
    return float(np.sum(family.weights * np.abs(mm - mn)))


# ---------------------------------------------------------------------------
# level-set constraints and the parabolic simplex


def empirical_moments(orbit_points: np.ndarray, count: int) -> np.ndarray:
    """Moments of the empirical measure along an orbit."""
    x = np.asarray(orbit_points, dtype=float)
    out = np.empty(count)
    acc = np.ones_like(x)
    for i in range(count):
        acc = acc * x
        out[i] = acc.mean()
    return out


def level_constraint_check(imap: IntervalMap, start, mu: MeasureSpec, k: int,
                           eps: float, n: int, depth: int = DEFAULT_QUAD_DEPTH) -> np.ndarray:
    """Finite-n witness of the first k moment constraints of a level set.

    ``start`` is either a point (forward orbit; may raise OrbitEscaped) or a
    word over the alphabet (stable backward orbit).  Returns a boolean per
    observable i <= k, true iff |A_n f_i(x) - int f_i dmu| < eps.
    """
    orbit = _orbit_points(imap, start, n)
    emp = empirical_moments(orbit, k)
    target = moments(imap, mu, k, depth)
    return np.abs(emp - target) < eps


def _orbit_points(imap: IntervalMap, start, n: int) -> np.ndarray:
    if np.isscalar(start) or (isinstance(start, np.ndarray) and start.ndim == 0):
        pts = np.empty(n)
        cur = float(start)
        for step in range(n):
            try:
                nxt = imap.branches[_resolve(imap, cur)].forward(cur)
            except OutOfDomain:
                raise OrbitEscaped(step, cur) from None
            pts[step] = cur
            cur = float(nxt)
        return pts
    word = np.asarray(start, dtype=np.int64)
    if word.size < n:
        raise ValueError(f"word of length {word.size} cannot drive an orbit of length {n}")
    return word_orbit(imap, word[None, :n])[0]


def _resolve(imap, x):
    from .map_model import _resolve_branch

    return _resolve_branch(imap, x)


@dataclass(frozen=True)
class ParabolicSimplex:
    """Simplex of measures with zero Lyapunov exponent: mixtures of Dirac
    masses at the parabolic fixed points."""

    vertices: tuple[MeasureSpec, ...]
    points: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.vertices) - 1


def parabolic_simplex(imap: IntervalMap) -> ParabolicSimplex:
    branches = imap.parabolic_branches()
    if not branches:
        raise Degenerate("the map has no parabolic fixed point")
    return ParabolicSimplex(
        vertices=tuple(DiracFixed(i) for i in branches),
        points=tuple(imap.fixed_points[i] for i in branches),
    )


def separation_gamma(imap: IntervalMap, m: MeasureSpec, k: int,
                     family: MomentFamily | None = None,
                     resolution: float = 1e-3,
                     depth: int = DEFAULT_QUAD_DEPTH) -> float:
    """Empirical witness that a hyperbolic measure stays away from the
    parabolic simplex: the minimum metric distance from ``m`` to a
    barycentric grid of the simplex.

    Raises
    ------
    Degenerate
        If the map has no parabolic fixed point.
    ValueError
        If ``m`` is not hyperbolic (lyapunov <= 0).
    """
    family = family or MomentFamily()
    simplex = parabolic_simplex(imap)
    if lyapunov(m, imap) <= 0.0:
        raise ValueError("separation requires a hyperbolic measure (lyapunov > 0)")
    if k < 1:
        raise ValueError("need at least one matched moment")
    vertex_moments = np.stack(
        [moments(imap, v, family.count) for v in simplex.vertices], axis=0
    )
    grid = _barycentric_grid(len(simplex.vertices), resolution)
    mix = grid @ vertex_moments  # (grid, N)
    target = moments(imap, m, family.count, depth)
    dists = np.abs(mix - target) @ family.weights
    return float(np.min(dists))


def _barycentric_grid(nvert: int, resolution: float) -> np.ndarray:
    steps = max(1, round(1.0 / resolution))
    if nvert == 1:
        return np.ones((1, 1))
    if nvert == 2:
        t = np.linspace(0.0, 1.0, steps + 1)
        return np.stack([1.0 - t, t], axis=1)
    if nvert == 3:
        pts = []
        for i in range(steps + 1):
            for j in range(steps + 1 - i):
                pts.append((i / steps, j / steps, 1.0 - (i + j) / steps))
        return np.asarray(pts)
    raise ValueError("barycentric grids support at most three parabolic points")
