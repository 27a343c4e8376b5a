"""Symbolic coding of an interval map: words, cylinders, Birkhoff sums.

The depth-n cylinder of a word w = w0..w(n-1) is the nested image
``S_{w0} o S_{w1} o ... o S_{w(n-1)}([0,1])`` of the inverse branches,
with ``S_{w0}`` outermost.  A single vectorized level recursion produces,
for every word of a given depth in lexicographic order, the cylinder
endpoints, log-diameters and endpoint Birkhoff sums of ``g = log|T'|``
and of the monomial observables; everything else in the package is built
on top of it.

Endpoint quantities are propagated through the recursion (prepending a
symbol applies one inverse branch), which is numerically stable: inverse
branches contract, while forward orbits of stored floats diverge.  For
linear branches the log-diameter is accumulated as an exact sum of log
slopes, so that ``-log diam = S_n g`` holds bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from .errors import BudgetExceeded, OrbitEscaped, OutOfDomain
from .map_model import IntervalMap, eval_map

DEFAULT_BUDGET = 2**24


# ---------------------------------------------------------------------------
# words


@dataclass(frozen=True)
class Word:
    """A finite word over the branch alphabet {0..m-1}."""

    symbols: tuple[int, ...]

    def __post_init__(self):
        if len(self.symbols) < 1:
            raise ValueError("a word needs at least one symbol")
        if any(s < 0 for s in self.symbols):
            raise ValueError("symbols must be non-negative")

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        return "".join(str(s) for s in self.symbols)

    @classmethod
    def parse(cls, text: str) -> "Word":
        return cls(tuple(int(c) for c in text.strip()))

    @classmethod
    def from_index(cls, index: int, n: int, m: int) -> "Word":
        """The index-th word of length n in lexicographic order, base m."""
        syms = []
        for _ in range(n):
            index, r = divmod(index, m)
            syms.append(r)
        return cls(tuple(reversed(syms)))

    def validate(self, m: int):
        if any(s >= m for s in self.symbols):
            raise ValueError(f"word {self} uses symbols outside 0..{m - 1}")


@dataclass(frozen=True)
class Cylinder:
    """A word together with its geometric interval."""

    word: Word
    lo: float
    hi: float
    diam: float
    log_diam: float
    sn_g: float  # Birkhoff sum of log|T'| at the left endpoint, along the word

    @property
    def interval(self):
        return (self.lo, self.hi)


# ---------------------------------------------------------------------------
# the level recursion


@dataclass
class LevelStats:
    """Vectorized per-cylinder data for one depth, in lexicographic order.

    ``sf_lo[i-1]`` holds the Birkhoff sums of the monomial x**i at the left
    endpoints; ``mid``-prefixed arrays are present only when a midpoint
    witness pass was requested for this depth.
    """

    n: int
    lo: np.ndarray
    hi: np.ndarray
    log_diam: np.ndarray
    sg_lo: np.ndarray
    sg_hi: np.ndarray
    sf_lo: np.ndarray  # shape (k, m^n)
    sf_hi: np.ndarray
    mid: np.ndarray | None = None
    sg_mid: np.ndarray | None = None
    sf_mid: np.ndarray | None = None

    @property
    def count(self) -> int:
        return self.lo.size


def _branch_log_slope(branch):
    return float(np.log(abs(branch.slope))) if branch.is_linear else None


def iter_level_stats(
    imap: IntervalMap,
    n_max: int,
    k: int = 0,
    mid_levels: Iterable[int] = (),
    budget: int = DEFAULT_BUDGET,
    levels: Iterable[int] | None = None,
) -> Iterator[LevelStats]:
    """Yield LevelStats for depths 1..n_max (or only ``levels`` if given)."""
    m = imap.num_branches
    if m**n_max > budget:
        raise BudgetExceeded(f"{m}**{n_max} cylinders exceed the budget {budget}")
    mid_levels = frozenset(mid_levels)
    wanted = None if levels is None else frozenset(levels)

    lo = np.array([b.domain[0] for b in imap.branches])
    hi = np.array([b.domain[1] for b in imap.branches])
    log_diam = np.empty(m)
    for b in imap.branches:
        ls = _branch_log_slope(b)
        log_diam[b.index] = -ls if ls is not None else np.log(hi[b.index] - lo[b.index])
    sg_lo = _log_abs_deriv(imap, np.arange(m), lo)
    sg_hi = _log_abs_deriv(imap, np.arange(m), hi)
    sf_lo = _powers(lo, k)
    sf_hi = _powers(hi, k)

    for n in range(1, n_max + 1):
        if n > 1:
            size = lo.size
            n_lo, n_hi, n_ld, n_sg_lo, n_sg_hi = (np.empty(m * size) for _ in range(5))
            n_sf_lo = np.empty((k, m * size))
            n_sf_hi = np.empty((k, m * size))
            for b in imap.branches:
                sl = b.inverse(lo)
                sh = b.inverse(hi)
                cut = slice(b.index * size, (b.index + 1) * size)
                if b.increasing:
                    c_lo, c_hi, src_lo, src_hi = sl, sh, 0, 1
                else:
                    c_lo, c_hi, src_lo, src_hi = sh, sl, 1, 0
                n_lo[cut] = c_lo
                n_hi[cut] = c_hi
                ls = _branch_log_slope(b)
                if ls is not None:
                    n_ld[cut] = log_diam - ls
                    g_lo = g_hi = ls
                else:
                    n_ld[cut] = np.log(c_hi - c_lo)
                    g_lo = np.log(np.abs(b.derivative(c_lo)))
                    g_hi = np.log(np.abs(b.derivative(c_hi)))
                n_sg_lo[cut] = g_lo + (sg_lo if src_lo == 0 else sg_hi)
                n_sg_hi[cut] = g_hi + (sg_lo if src_hi == 0 else sg_hi)
                if k:
                    n_sf_lo[:, cut] = _powers(c_lo, k) + (sf_lo if src_lo == 0 else sf_hi)
                    n_sf_hi[:, cut] = _powers(c_hi, k) + (sf_lo if src_hi == 0 else sf_hi)
            lo, hi, log_diam = n_lo, n_hi, n_ld
            sg_lo, sg_hi, sf_lo, sf_hi = n_sg_lo, n_sg_hi, n_sf_lo, n_sf_hi
        if wanted is not None and n not in wanted and n not in mid_levels:
            continue
        stats = LevelStats(
            n=n, lo=lo, hi=hi, log_diam=log_diam,
            sg_lo=sg_lo, sg_hi=sg_hi, sf_lo=sf_lo, sf_hi=sf_hi,
        )
        if n in mid_levels:
            stats.mid, stats.sg_mid, stats.sf_mid = _midpoint_pass(imap, n, lo, hi, k)
        if wanted is None or n in wanted:
            yield stats


def _powers(x: np.ndarray, k: int) -> np.ndarray:
    out = np.empty((k, x.size))
    acc = np.ones_like(x)
    for i in range(k):
        acc = acc * x
        out[i] = acc
    return out


def _log_abs_deriv(imap, symbols, x):
    out = np.empty_like(x)
    for b in imap.branches:
        mask = symbols == b.index
        if np.any(mask):
            out[mask] = np.log(np.abs(b.derivative(x[mask])))
    return out


def _midpoint_pass(imap: IntervalMap, n: int, lo, hi, k: int):
    """Forward orbit of the cylinder midpoints along the word's symbols.

    Branch formulas are applied by symbol, so small float drift cannot push
    the orbit into a domain gap.  Forward error grows like the expansion
    rate; fine at the depths the witness machinery uses (n <= ~30).
    """
    m = imap.num_branches
    idx = np.arange(lo.size)
    x = 0.5 * (lo + hi)
    mid = x.copy()
    sg = np.zeros_like(x)
    sf = np.zeros((k, x.size))
    for j in range(n):
        digit = (idx // m ** (n - 1 - j)) % m
        acc = np.ones_like(x)
        for i in range(k):
            acc = acc * x
            sf[i] += acc
        new_x = np.empty_like(x)
        for b in imap.branches:
            mask = digit == b.index
            if np.any(mask):
                xm = x[mask]
                sg[mask] += np.log(np.abs(b.derivative(xm)))
                new_x[mask] = b.forward(xm)
        x = new_x
    return mid, sg, sf


def level_stats(imap: IntervalMap, n: int, k: int = 0, want_mid: bool = False,
                budget: int = DEFAULT_BUDGET) -> LevelStats:
    """LevelStats for a single depth."""
    mid = (n,) if want_mid else ()
    return next(iter_level_stats(imap, n, k=k, mid_levels=mid, budget=budget, levels=(n,)))


# ---------------------------------------------------------------------------
# cylinders


def cylinder(imap: IntervalMap, word) -> Cylinder:
    """The geometric cylinder of a word (scalar version of the recursion)."""
    if not isinstance(word, Word):
        word = Word(tuple(word))
    word.validate(imap.num_branches)
    syms = word.symbols
    b = imap.branches[syms[-1]]
    lo, hi = b.domain
    ls = _branch_log_slope(b)
    log_diam = -ls if ls is not None else float(np.log(hi - lo))
    sg_lo = float(np.log(abs(b.derivative(lo))))
    sg_hi = float(np.log(abs(b.derivative(hi))))
    for s in reversed(syms[:-1]):
        b = imap.branches[s]
        sl = float(b.inverse(lo))
        sh = float(b.inverse(hi))
        if b.increasing:
            c_lo, c_hi, src = sl, sh, (sg_lo, sg_hi)
        else:
            c_lo, c_hi, src = sh, sl, (sg_hi, sg_lo)
        ls = _branch_log_slope(b)
        if ls is not None:
            log_diam = log_diam - ls
            g_lo = g_hi = ls
        else:
            log_diam = float(np.log(c_hi - c_lo))
            g_lo = float(np.log(abs(b.derivative(c_lo))))
            g_hi = float(np.log(abs(b.derivative(c_hi))))
        sg_lo = g_lo + src[0]
        sg_hi = g_hi + src[1]
        lo, hi = c_lo, c_hi
    return Cylinder(word=word, lo=lo, hi=hi, diam=hi - lo, log_diam=log_diam, sn_g=sg_lo)


def enumerate_cylinders(
    imap: IntervalMap,
    n: int,
    visitor: Callable[[Cylinder], None] | None = None,
    budget: int = DEFAULT_BUDGET,
):
    """Visit all m^n depth-n cylinders once, in lexicographic word order.

    With a ``visitor`` the cylinders are pushed and the count returned;
    without one, a generator is returned.
    """
    m = imap.num_branches
    if m**n > budget:
        raise BudgetExceeded(f"{m}**{n} cylinders exceed the budget {budget}")
    stats = level_stats(imap, n, budget=budget)

    def gen():
        for i in range(stats.count):
            yield Cylinder(
                word=Word.from_index(i, n, m),
                lo=float(stats.lo[i]),
                hi=float(stats.hi[i]),
                diam=float(stats.hi[i] - stats.lo[i]),
                log_diam=float(stats.log_diam[i]),
                sn_g=float(stats.sg_lo[i]),
            )

    if visitor is None:
        return gen()
    count = 0
    for cyl in gen():
        visitor(cyl)
        count += 1
    return count


# ---------------------------------------------------------------------------
# Birkhoff machinery


def birkhoff_average(imap: IntervalMap, f, x: float, n: int) -> float:
    """(1/n) sum of f along the forward orbit x, Tx, ..., T^(n-1)x.

    Raises
    ------
    OrbitEscaped
        With the escape step index, if the orbit leaves the branch domains.
    """
    total = 0.0
    cur = float(x)
    for step in range(n):
        try:
            nxt = eval_map(imap, cur)
        except OutOfDomain:
            raise OrbitEscaped(step, cur) from None
        total += float(f(cur))
        cur = nxt
    return total / n


def variation(imap: IntervalMap, f, n: int, budget: int = DEFAULT_BUDGET,
              refine_points: int = 9) -> float:
    """Max over depth-n cylinders of the oscillation of f on the cylinder.

    Sampled at the endpoints and midpoint; a denser pass (``refine_points``
    per cylinder) runs when f looks non-monotone on some cylinder.
    """
    stats = level_stats(imap, n, budget=budget)
    flo = np.asarray(f(stats.lo), dtype=float)
    fhi = np.asarray(f(stats.hi), dtype=float)
    fmid = np.asarray(f(0.5 * (stats.lo + stats.hi)), dtype=float)
    top = np.maximum(np.maximum(flo, fhi), fmid)
    bot = np.minimum(np.minimum(flo, fhi), fmid)
    monotone = (fmid <= np.maximum(flo, fhi) + 1e-15) & (fmid >= np.minimum(flo, fhi) - 1e-15)
    if not np.all(monotone):
        for t in np.linspace(0.0, 1.0, refine_points):
            vals = np.asarray(f(stats.lo + t * (stats.hi - stats.lo)), dtype=float)
            top = np.maximum(top, vals)
            bot = np.minimum(bot, vals)
    return float(np.max(top - bot))


def diameter_average_gap(imap: IntervalMap, n: int, budget: int = DEFAULT_BUDGET) -> float:
    """Sup over depth-n cylinders of ``| -log(diam)/n - A_n g |``.

    The Birkhoff average of ``g = log|T'|`` is taken at the cylinder's left
    endpoint, along the word.  Exactly zero for linear maps (the log sums
    cancel bit-for-bit); decays with n otherwise, which quantifies how well
    cylinder diameters track Birkhoff sums.
    """
    stats = level_stats(imap, n, budget=budget)
    return float(np.max(np.abs(-stats.log_diam - stats.sg_lo))) / n


def word_orbit(imap: IntervalMap, words: np.ndarray) -> np.ndarray:
    """Orbit points T^t(x) for the point x coded by each row of ``words``.

    ``words`` is an (S, L) integer array; the returned (S, L) float array
    holds the orbit computed by the backward inverse-branch recursion
    (anchor 0), which is stable to arbitrary length, unlike forward
    iteration of a float.
    """
    words = np.atleast_2d(np.asarray(words, dtype=np.int64))
    S, L = words.shape
    out = np.empty((S, L))
    z = np.zeros(S)
    for t in range(L - 1, -1, -1):
        digit = words[:, t]
        new_z = np.empty_like(z)
        for b in imap.branches:
            mask = digit == b.index
            if np.any(mask):
                new_z[mask] = b.inverse(z[mask])
        z = new_z
        out[:, t] = z
    return out


def word_point(imap: IntervalMap, word) -> float:
    """The coded point of a single word (orbit anchor, see word_orbit)."""
    orbit = word_orbit(imap, np.asarray(word, dtype=np.int64)[None, :])
    return float(orbit[0, 0])
