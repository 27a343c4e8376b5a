"""Piecewise-expanding interval maps with full branches.

A map ``T`` is a finite list of monotone branches, each continuously
differentiable and surjective from its closed domain onto [0, 1], with
``|T'| > 1`` away from the (unique) fixed point of each branch.  A branch
fixed point with ``|T'| = 1`` is parabolic; the Manneville map
``x -> x + x**(1+beta) (mod 1)`` is the canonical non-uniformly hyperbolic
example.  Branch domains may leave gaps, in which case the invariant
repeller is a Cantor set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import MapValidationError, NoConvergence, NotUnique, OutOfDomain

SURJECTIVITY_TOL = 1e-12
PARABOLIC_TOL = 1e-9
BOUNDARY_SOLVE_TOL = 1e-14
DEFAULT_INVERSE_TOL = 1e-13
BISECTION_BUDGET = 200
NEWTON_BUDGET = 50

_KINDS = ("linear", "manneville", "polynomial")


@dataclass(frozen=True)
class BranchSpec:
    """One monotone surjective piece of the map.

    ``params`` depend on ``kind``: linear branches use ``slope`` and
    ``offset`` (T(x) = slope*x + offset); manneville branches use ``beta``
    and an integer mod-1 ``offset`` (T(x) = x + x**(1+beta) - offset);
    polynomial branches use ascending ``coeffs``.
    """

    index: int
    kind: str
    domain: tuple[float, float]
    slope: float | None = None
    offset: float = 0.0
    beta: float | None = None
    coeffs: tuple[float, ...] | None = None

    def forward(self, x):
        """Evaluate T(x) by the branch formula (defined beyond the domain too)."""
        if self.kind == "linear":
            return self.slope * x + self.offset
        if self.kind == "manneville":
            return x + x ** (1.0 + self.beta) - self.offset
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def derivative(self, x):
        if self.kind == "linear":
            return self.slope * np.ones_like(np.asarray(x, dtype=float))
        if self.kind == "manneville":
            return 1.0 + (1.0 + self.beta) * x**self.beta
        dcoeffs = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(x, dcoeffs)

    @property
    def increasing(self) -> bool:
        a, b = self.domain
        return bool(self.forward(b) > self.forward(a))

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def inverse(self, y):
        """Vectorized inverse branch; fixed iteration count, machine accuracy."""
        y = np.asarray(y, dtype=float)
        if self.kind == "linear":
            return (y - self.offset) / self.slope
        a, b = self.domain
        lo = np.full(y.shape, a, dtype=float)
        hi = np.full(y.shape, b, dtype=float)
        if not self.increasing:
            # keep the invariant forward(lo) <= y <= forward(hi) by swapping roles
            lo, hi = hi, lo
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = self.forward(mid) <= y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(4):
            dx = (self.forward(x) - y) / self.derivative(x)
            x = np.clip(x - dx, min(a, b), max(a, b))
        return x


def _branch_contains(branch: BranchSpec, x: float) -> bool:
    a, b = branch.domain
    return a <= x <= b


def _resolve_branch(imap: IntervalMap, x: float) -> int:
    """Branch index owning x; shared boundaries go to the branch starting at x."""
    candidates = [b.index for b in imap.branches if _branch_contains(b, x)]
    if not candidates:
        raise OutOfDomain(f"x={x!r} lies in no branch domain")
    if len(candidates) == 1:
        return candidates[0]
    starting = [i for i in candidates if imap.branches[i].domain[0] == x]
    return min(starting) if starting else min(candidates)


@dataclass(frozen=True)
class IntervalMap:
    """Validated, immutable piecewise map. All operations are pure."""

    branches: tuple[BranchSpec, ...]
    fixed_points: tuple[float, ...]
    parabolic_flags: tuple[bool, ...]

    @property
    def num_branches(self) -> int:
        return len(self.branches)

    @property
    def is_linear(self) -> bool:
        return all(b.is_linear for b in self.branches)

    @property
    def full_branch(self) -> bool:
        doms = [b.domain for b in self.branches]
        if doms[0][0] != 0.0 or doms[-1][1] != 1.0:
            return False
        return all(doms[i][1] == doms[i + 1][0] for i in range(len(doms) - 1))

    def parabolic_branches(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.parabolic_flags) if f)

    @classmethod
    def from_branches(cls, branches) -> "IntervalMap":
        branches = tuple(
            replace(b, index=i) for i, b in enumerate(sorted(branches, key=lambda b: b.domain[0]))
        )
        _validate_branches(branches)
        fps = []
        flags = []
        for b in branches:
            root = _branch_fixed_point(b)
            fps.append(root)
            flags.append(abs(abs(float(b.derivative(root))) - 1.0) < PARABOLIC_TOL)
        imap = cls(branches=branches, fixed_points=tuple(fps), parabolic_flags=tuple(flags))
        _validate_expansion(imap)
        return imap

    def report(self) -> dict:
        """Normalized map summary (branch boundaries, fixed points, flags)."""
        out = {"num_branches": self.num_branches, "is_linear": self.is_linear, "branches": []}
        for b, fp, flag in zip(self.branches, self.fixed_points, self.parabolic_flags):
            entry = {
                "index": b.index,
                "kind": b.kind,
                "domain": [b.domain[0], b.domain[1]],
                "fixed_point": fp,
                "parabolic": bool(flag),
            }
            if b.kind == "linear":
                entry["slope"] = b.slope
                entry["offset"] = b.offset
            elif b.kind == "manneville":
                entry["beta"] = b.beta
                entry["offset"] = b.offset
            else:
                entry["coeffs"] = list(b.coeffs)
            out["branches"].append(entry)
        return out


def _validate_branches(branches):
    if not branches:
        raise MapValidationError("a map needs at least one branch")
    for b in branches:
        if b.kind not in _KINDS:
            raise MapValidationError(f"unknown branch kind {b.kind!r}")
        a, bb = b.domain
        if not (0.0 <= a < bb <= 1.0):
            raise MapValidationError(f"branch {b.index} has bad domain {b.domain}")
        ta, tb = float(b.forward(a)), float(b.forward(bb))
        if abs(min(ta, tb)) > SURJECTIVITY_TOL or abs(max(ta, tb) - 1.0) > SURJECTIVITY_TOL:
            raise MapValidationError(
                f"branch {b.index} is not surjective onto [0,1]: T({a})={ta}, T({bb})={tb}"
            )
        grid = np.linspace(a, bb, 513)
        deriv = np.asarray(b.derivative(grid), dtype=float)
        if not np.all(np.isfinite(deriv)):
            raise MapValidationError(f"branch {b.index} has a non-finite derivative")
        if np.any(deriv > 0) and np.any(deriv < 0):
            raise MapValidationError(f"branch {b.index} is not monotone")
        if np.min(np.abs(deriv)) < 1.0 - PARABOLIC_TOL:
            raise MapValidationError(f"branch {b.index} is not expanding (|T'| < 1)")
    for left, right in zip(branches, branches[1:]):
        if left.domain[1] > right.domain[0] + 1e-15:
            raise MapValidationError(
                f"branches {left.index} and {right.index} have overlapping interiors"
            )


def _validate_expansion(imap: IntervalMap):
    # |T'| may touch 1 only at a flagged parabolic fixed point
    for b, fp, flag in zip(imap.branches, imap.fixed_points, imap.parabolic_flags):
        grid = np.linspace(*b.domain, 513)
        deriv = np.abs(np.asarray(b.derivative(grid), dtype=float))
        near_one = grid[deriv < 1.0 + PARABOLIC_TOL]
        if near_one.size and not flag:
            raise MapValidationError(
                f"branch {b.index} has |T'|~1 away from a parabolic fixed point"
            )
        if near_one.size and np.max(np.abs(near_one - fp)) > 0.05 * (b.domain[1] - b.domain[0]):
            raise MapValidationError(f"branch {b.index}: |T'|~1 far from its fixed point")


def _branch_fixed_point(branch: BranchSpec, tol: float = 1e-13) -> float:
    a, b = branch.domain

    def F(x):
        return float(branch.forward(x)) - x

    roots = []
    if abs(F(a)) <= 1e-12:
        roots.append(a)
    if abs(F(b)) <= 1e-12:
        roots.append(b)
    grid = np.linspace(a, b, 4097)
    vals = np.asarray(branch.forward(grid), dtype=float) - grid
    signs = np.sign(vals)
    for i in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
        lo, hi = grid[i], grid[i + 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if F(lo) * F(mid) <= 0:
                hi = mid
            else:
                lo = mid
            if hi - lo < tol:
                break
        roots.append(0.5 * (lo + hi))
    dedup: list[float] = []
    for r in sorted(roots):
        if not dedup or r - dedup[-1] > 1e-7:
            dedup.append(r)
    if len(dedup) > 1:
        raise NotUnique(f"branch {branch.index} has {len(dedup)} fixed points: {dedup}")
    if not dedup:
        raise MapValidationError(f"branch {branch.index} has no fixed point")
    return dedup[0]


# ---------------------------------------------------------------------------
# operations


def eval_map(imap: IntervalMap, x: float) -> float:
    """Evaluate T(x).

    Boundary points shared by two branch closures resolve to the branch
    whose domain starts at x, which reproduces the usual mod-1 convention.

    Raises
    ------
    OutOfDomain
        If x lies in a gap between branch domains.
    """
    i = _resolve_branch(imap, float(x))
    return float(imap.branches[i].forward(float(x)))


def eval_derivative(imap: IntervalMap, x: float) -> float:
    """Evaluate T'(x) on the branch owning x (same boundary rule as eval_map)."""
    i = _resolve_branch(imap, float(x))
    return float(imap.branches[i].derivative(float(x)))


def inverse_branch(imap: IntervalMap, symbol: int, y: float, tol: float = DEFAULT_INVERSE_TOL) -> float:
    """Solve T(x) = y on branch ``symbol`` to absolute accuracy ``tol``.

    Linear branches are solved in closed form; the others by monotone
    bisection (budget 200) refined with Newton steps (budget 50).

    Raises
    ------
    NoConvergence
        If the residual still exceeds the tolerance after the budget.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 <= symbol < imap.num_branches:
        raise ValueError(f"invalid branch symbol {symbol}")
    branch = imap.branches[symbol]
    y = float(y)
    if branch.kind == "linear":
        return (y - branch.offset) / branch.slope
    a, b = branch.domain
    lo, hi = (a, b) if branch.increasing else (b, a)
    x = 0.5 * (a + b)
    for _ in range(BISECTION_BUDGET):
        x = 0.5 * (lo + hi)
        if float(branch.forward(x)) <= y:
            lo = x
        else:
            hi = x
        if abs(hi - lo) <= max(tol, 1e-15):
            break
    for _ in range(NEWTON_BUDGET):
        fx = float(branch.forward(x)) - y
        dfx = float(branch.derivative(x))
        if dfx == 0.0:
            break
        step = fx / dfx
        x_new = min(max(x - step, min(a, b)), max(a, b))
        if x_new == x:
            break
        x = x_new
    residual = abs(float(branch.forward(x)) - y)
    if residual > tol * max(1.0, abs(float(branch.derivative(x)))) * 4.0:
        raise NoConvergence(
            f"inverse of branch {symbol} at y={y} stalled with residual {residual}"
        )
    return x


def find_fixed_points(imap: IntervalMap, tol: float = 1e-13):
    """Per-branch fixed points with parabolic flags.

    Returns a list of ``(branch index, x_i, parabolic)`` tuples; the flag is
    set iff ``| |T'(x_i)| - 1 | < 1e-9``.
    """
    out = []
    for b in imap.branches:
        root = _branch_fixed_point(b, tol=tol)
        flag = abs(abs(float(b.derivative(root))) - 1.0) < PARABOLIC_TOL
        out.append((b.index, root, flag))
    return out


# ---------------------------------------------------------------------------
# bundled example maps


def linear_map(pieces) -> IntervalMap:
    """Build a map from ``(domain_lo, domain_hi, slope, offset)`` tuples."""
    branches = [
        BranchSpec(index=i, kind="linear", domain=(a, b), slope=s, offset=c)
        for i, (a, b, s, c) in enumerate(pieces)
    ]
    return IntervalMap.from_branches(branches)


def doubling() -> IntervalMap:
    """x -> 2x (mod 1): two full linear branches of slope 2."""
    return linear_map([(0.0, 0.5, 2.0, 0.0), (0.5, 1.0, 2.0, -1.0)])


def middle_thirds() -> IntervalMap:
    """Slope-3 branches on [0,1/3] and [2/3,1]; the repeller is the Cantor set."""
    return linear_map([(0.0, 1.0 / 3.0, 3.0, 0.0), (2.0 / 3.0, 1.0, 3.0, -2.0)])


def cantor_2_4() -> IntervalMap:
    """Slopes (2, 4) with a gap; Hausdorff dimension solves 2^-s + 4^-s = 1."""
    return linear_map([(0.0, 0.5, 2.0, 0.0), (0.75, 1.0, 4.0, -3.0)])


def manneville(beta: float = 1.0) -> IntervalMap:
    """Manneville map x -> x + x**(1+beta) (mod 1) with parabolic point 0.

    The interior breakpoint (where ``x + x**(1+beta) = 1``) is computed by
    bisection to 1e-14 rather than trusted from configuration.
    """
    if not 0.0 < beta <= 1.0:
        raise MapValidationError("manneville exponent beta must lie in (0, 1]")
    xstar = _solve_monotone(lambda x: x + x ** (1.0 + beta), 1.0, 0.0, 1.0)
    b0 = BranchSpec(index=0, kind="manneville", domain=(0.0, xstar), beta=beta, offset=0.0)
    b1 = BranchSpec(index=1, kind="manneville", domain=(xstar, 1.0), beta=beta, offset=1.0)
    return IntervalMap.from_branches([b0, b1])


def two_parabolic() -> IntervalMap:
    """Two polynomial branches with parabolic fixed points at 0 and 1."""
    # T0(x) = x + 3.75 x^2 on [0, 0.4]; T1(x) = x - 3.75 (1-x)^2 on [0.6, 1]
    b0 = BranchSpec(index=0, kind="polynomial", domain=(0.0, 0.4), coeffs=(0.0, 1.0, 3.75))
    b1 = BranchSpec(index=1, kind="polynomial", domain=(0.6, 1.0), coeffs=(-3.75, 8.5, -3.75))
    return IntervalMap.from_branches([b0, b1])


def _solve_monotone(f, target, lo, hi, tol=BOUNDARY_SOLVE_TOL):
    flo = f(lo) - target
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (f(mid) - target) * flo > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# configuration files


def from_config(config: dict) -> IntervalMap:
    """Build a map from a JSON-style dict.

    Accepts either ``{"kind": "manneville", "beta": ...}`` or
    ``{"branches": [{"kind": ..., "domain": [a, b], ...}, ...]}``.  Branch
    boundaries are renormalized at load time (closed form for linear
    branches, bisection on T(x) in {0, 1} otherwise) because configured
    endpoints cannot be trusted to machine precision.
    """
    if config.get("kind") == "manneville":
        return manneville(float(config.get("beta", 1.0)))
    branches = []
    for i, raw in enumerate(config["branches"]):
        kind = raw["kind"]
        if kind == "manneville" and "branches" not in raw:
            beta = float(raw.get("beta", 1.0))
            off = float(raw.get("offset", 0.0))
            spec = BranchSpec(index=i, kind=kind, domain=(0.0, 1.0), beta=beta, offset=off)
        elif kind == "linear":
            spec = BranchSpec(
                index=i,
                kind=kind,
                domain=(0.0, 1.0),
                slope=float(raw["slope"]),
                offset=float(raw.get("offset", 0.0)),
            )
        elif kind == "polynomial":
            spec = BranchSpec(index=i, kind=kind, domain=(0.0, 1.0), coeffs=tuple(raw["coeffs"]))
        else:
            raise MapValidationError(f"unknown branch kind {kind!r}")
        a0, b0 = raw["domain"]
        branches.append(replace(spec, domain=_normalized_domain(spec, float(a0), float(b0))))
    return IntervalMap.from_branches(branches)


def _normalized_domain(spec: BranchSpec, a0: float, b0: float) -> tuple[float, float]:
    if spec.kind == "linear":
        ends = sorted(((0.0 - spec.offset) / spec.slope, (1.0 - spec.offset) / spec.slope))
        return (ends[0], ends[1])
    increasing = spec.forward(b0) > spec.forward(a0)
    lo_target, hi_target = (0.0, 1.0) if increasing else (1.0, 0.0)
    pad = max(1e-3, 0.01 * (b0 - a0))
    a = _refine_endpoint(spec, a0, lo_target, pad)
    b = _refine_endpoint(spec, b0, hi_target, pad)
    return (a, b)


def _refine_endpoint(spec: BranchSpec, guess: float, target: float, pad: float) -> float:
    lo = max(0.0, guess - pad)
    hi = min(1.0, guess + pad)
    f = lambda x: float(spec.forward(x)) - target
    if f(lo) * f(hi) > 0:  # already exact at machine precision, or bad config
        if abs(f(guess)) <= SURJECTIVITY_TOL:
            return guess
        raise MapValidationError(
            f"cannot bracket branch endpoint near {guess} (T-target residual {f(guess)})"
        )
    return _solve_monotone(lambda x: float(spec.forward(x)), target, lo, hi)


def load_map(path) -> IntervalMap:
    """Load a map config JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return from_config(json.load(fh))
