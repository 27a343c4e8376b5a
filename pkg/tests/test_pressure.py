import math

import numpy as np
import pytest

from dimlab import eval_map, inverse_branch
from dimlab.errors import EmptySelection, Infeasible, NoBracket
from dimlab.measures import Bernoulli, DiracFixed, moments
from dimlab.pressure import (
    BlockBernoulliMeasure,
    ConstraintBall,
    GoodCylinderFilter,
    block_bernoulli_measure,
    bowen_root,
    equilibrium_block_measure,
    moment_filter,
    pressure_sums,
    select_good,
    sup_dim_ratio,
)
from tests.conftest import LOG2_OVER_LOG3, S_STAR_24

LOG2 = math.log(2.0)
UNCONSTRAINED = GoodCylinderFilter(k=0, alpha=(), delta=0.1, eps=0.05)


def brute_force_selection_count(imap, filt, n):
    """Independent scalar re-implementation of the witness predicate."""
    m = imap.num_branches
    count = 0
    for idx in range(m**n):
        digits = []
        rem = idx
        for _ in range(n):
            rem, d = divmod(rem, m)
            digits.append(d)
        digits.reverse()
        # cylinder endpoints by direct inverse-branch composition
        lo, hi = 0.0, 1.0
        for d in reversed(digits):
            a, b = inverse_branch(imap, d, lo), inverse_branch(imap, d, hi)
            lo, hi = min(a, b), max(a, b)
        witnesses = [lo, 0.5 * (lo + hi)] if filt.use_midpoint else [lo]
        passed = False
        for x0 in witnesses:
            x = x0
            sf = np.zeros(filt.k)
            sg = 0.0
            for j in range(n):
                for i in range(filt.k):
                    sf[i] += x ** (i + 1)
                branch = imap.branches[digits[j]]
                sg += math.log(abs(float(branch.derivative(x))))
                x = float(branch.forward(x))
            ok = sg / n >= filt.delta - filt.eps
            for i in range(filt.k):
                ok = ok and abs(sf[i] / n - filt.alpha[i]) < filt.eps
            if ok:
                passed = True
                break
        count += passed
    return count


class TestSelectGood:
    def test_doubling_unconstrained_keeps_all(self, doubling_map):
        filt = GoodCylinderFilter(k=0, alpha=(), delta=0.5, eps=0.1)
        count, _ = select_good(doubling_map, filt, 5)
        assert count == 32

    @pytest.mark.parametrize("use_midpoint", [False, True])
    def test_doubling_moment_constraint_matches_brute_force(self, doubling_map, use_midpoint):
        filt = GoodCylinderFilter(k=1, alpha=(0.5,), delta=0.1, eps=0.05,
                                  use_midpoint=use_midpoint)
        n = 10
        count, cyls = select_good(doubling_map, filt, n)
        assert count == brute_force_selection_count(doubling_map, filt, n)
        assert count == sum(1 for _ in cyls)
        assert 0 < count < 1024

    def test_manneville_excludes_parabolic_cylinder(self, mann_map):
        filt = GoodCylinderFilter(k=0, alpha=(), delta=0.6, eps=0.05)
        n = 8
        count, cyls = select_good(mann_map, filt, n)
        words = {str(c.word) for c in cyls}
        assert "0" * n not in words
        assert 0 < count < 2**n

    def test_filter_validation(self):
        with pytest.raises(ValueError):
            GoodCylinderFilter(k=1, alpha=(), delta=0.1, eps=0.05)
        with pytest.raises(ValueError):
            GoodCylinderFilter(k=0, alpha=(), delta=0.05, eps=0.1)


class TestPressureSums:
    def test_doubling_rate_linear_in_s(self, doubling_map):
        for s in (0.0, 0.5, 1.0, 1.5):
            est = pressure_sums(doubling_map, UNCONSTRAINED, s, n_range=(4, 12))
            assert est.rate == pytest.approx((1.0 - s) * LOG2, abs=1e-12)
        assert pressure_sums(doubling_map, UNCONSTRAINED, 1.0, n_range=(4, 12)).rate == pytest.approx(0.0, abs=1e-12)

    def test_middle_thirds_zero_rate_at_dimension(self, thirds_map):
        est = pressure_sums(thirds_map, UNCONSTRAINED, LOG2_OVER_LOG3, n_range=(4, 12))
        assert abs(est.rate) <= 1e-10

    def test_cantor24_zero_rate_at_dimension(self, cantor24_map):
        est = pressure_sums(cantor24_map, UNCONSTRAINED, 0.694242, n_range=(4, 12))
        assert abs(est.rate) <= 1e-6

    @pytest.mark.parametrize("map_name", ["doubling_map", "thirds_map", "cantor24_map"])
    def test_diam_and_sup_sums_agree_exactly_on_linear(self, map_name, request):
        imap = request.getfixturevalue(map_name)
        for s in (0.3, 0.7, 1.2):
            est = pressure_sums(imap, UNCONSTRAINED, s, n_range=(4, 10))
            diffs = np.abs(np.asarray(est.log_sums_diam) - np.asarray(est.log_sums_sup))
            assert np.max(diffs) <= 1e-12

    def test_manneville_rate_gap_small(self, mann_map):
        # threshold delta = 0.9 keeps the selection away from the parabolic
        # point, where distortion (hence the diam/sup mismatch) grows like log n
        filt = GoodCylinderFilter(k=0, alpha=(), delta=0.9, eps=0.05)
        for s in (0.3, 0.5, 0.8, 1.0):
            est = pressure_sums(mann_map, filt, s, n_range=(8, 16))
            assert est.rate_gap <= 0.01

    def test_manneville_rate_gap_shrinks_with_depth(self, mann_map):
        filt = GoodCylinderFilter(k=0, alpha=(), delta=0.9, eps=0.05)
        gaps = [
            pressure_sums(mann_map, filt, 0.8, n_range=(8, nmax)).rate_gap
            for nmax in (10, 13, 16)
        ]
        # |rate_diam - rate_sup| <= C / n_max
        C = gaps[0] * 10 * 1.2
        assert all(g <= C / nmax for g, nmax in zip(gaps, (10, 13, 16)))

    def test_rate_decreasing_in_s(self, cantor24_map, mann_map):
        for imap in (cantor24_map, mann_map):
            rates = [
                pressure_sums(imap, UNCONSTRAINED, s, n_range=(6, 12)).rate
                for s in np.arange(0.0, 2.01, 0.1)
            ]
            assert all(a > b for a, b in zip(rates, rates[1:]))

    def test_negative_s_rejected(self, doubling_map):
        with pytest.raises(ValueError):
            pressure_sums(doubling_map, UNCONSTRAINED, -0.5)


class TestBowenRoot:
    def test_middle_thirds(self, thirds_map):
        root = bowen_root(thirds_map, UNCONSTRAINED, n_range=(6, 14))
        assert root.value == pytest.approx(LOG2_OVER_LOG3, abs=1e-3)
        assert root.spread <= 1e-6  # unconstrained: selection independent of eps

    def test_cantor24(self, cantor24_map):
        root = bowen_root(cantor24_map, UNCONSTRAINED, n_range=(6, 14))
        assert root.value == pytest.approx(S_STAR_24, abs=1e-3)

    def test_besicovitch_07(self, doubling_map):
        filt = moment_filter(doubling_map, Bernoulli([0.7, 0.3]), k=1, delta=0.1, eps=0.05)
        assert filt.alpha[0] == pytest.approx(0.3, abs=1e-12)
        root = bowen_root(doubling_map, filt, n_range=(8, 18))
        assert root.value == pytest.approx(0.8812908992306927, abs=0.02)
        assert root.prefactor_exponent == 0.5

    def test_no_bracket_when_selection_thin(self, doubling_map):
        # impossible moment target: nothing selected
        filt = GoodCylinderFilter(k=1, alpha=(5.0,), delta=0.1, eps=0.05)
        with pytest.raises((NoBracket, EmptySelection)):
            bowen_root(doubling_map, filt, n_range=(6, 10), eps_sweep=None)


class TestBlockMeasure:
    def test_uniform_weights_on_doubling(self, doubling_map):
        n = 6
        w = np.full(2**n, 2.0**-n)
        bm = block_bernoulli_measure(doubling_map, n, w)
        assert bm.entropy_per_step == pytest.approx(LOG2, abs=1e-14)
        assert bm.entropy == pytest.approx(n * LOG2, abs=1e-12)

    def test_single_word_has_zero_entropy(self, doubling_map):
        bm = block_bernoulli_measure(doubling_map, 4, [1.0], indices=[3])
        assert bm.entropy == 0.0

    def test_entropy_identity_is_exact(self, cantor24_map):
        bm = equilibrium_block_measure(cantor24_map, 8, S_STAR_24)
        assert bm.entropy_per_step == pytest.approx(bm.entropy / 8, abs=1e-15)

    def test_equilibrium_reproduces_dimension(self, cantor24_map):
        bm = equilibrium_block_measure(cantor24_map, 10, S_STAR_24, kind="diam")
        assert bm.hl_ratio == pytest.approx(S_STAR_24, abs=1e-3)

    def test_growth_identity(self, cantor24_map, mann_map):
        for imap, s in ((cantor24_map, 0.7), (mann_map, 0.9)):
            bm = equilibrium_block_measure(imap, 8, s, kind="sup")
            H, rhs, _ = bm.growth_identity_terms(s)
            assert H == pytest.approx(rhs, abs=1e-12)

    def test_lower_bound_inequality(self, mann_map):
        for s in (0.25, 0.75, 1.25):
            bm = equilibrium_block_measure(mann_map, 8, s, kind="sup")
            lhs, rhs = bm.lower_bound_terms(s)
            assert lhs >= rhs - 1e-12

    def test_weight_validation(self, doubling_map):
        with pytest.raises(ValueError):
            block_bernoulli_measure(doubling_map, 3, np.full(8, 0.2))


class TestSupDimRatio:
    def test_cantor24_unconstrained(self, cantor24_map):
        opt = sup_dim_ratio(cantor24_map)
        assert opt.value == pytest.approx(S_STAR_24, abs=1e-3)
        golden = 0.6180339887498949
        assert opt.weights[0] == pytest.approx(golden, abs=1e-3)
        assert opt.weights[1] == pytest.approx(1 - golden, abs=1e-3)

    def test_middle_thirds_unconstrained(self, thirds_map):
        opt = sup_dim_ratio(thirds_map)
        assert opt.value == pytest.approx(LOG2_OVER_LOG3, abs=1e-3)
        assert opt.weights[0] == pytest.approx(0.5, abs=1e-3)

    def test_doubling_zero_radius_ball(self, doubling_map):
        ball = ConstraintBall(center=Bernoulli([0.5, 0.5]), radius=0.0)
        opt = sup_dim_ratio(doubling_map, ball=ball)
        assert opt.value == pytest.approx(1.0, abs=1e-6)
        assert opt.feasible and opt.distance <= 1e-8

    def test_ball_never_beats_unconstrained(self, cantor24_map):
        free = sup_dim_ratio(cantor24_map)
        ball = ConstraintBall(center=Bernoulli([0.9, 0.1]), radius=0.05)
        constrained = sup_dim_ratio(cantor24_map, ball=ball)
        assert constrained.value <= free.value + 1e-9

    def test_bowen_root_consistent_with_variational_value(self, thirds_map, cantor24_map):
        for imap, oracle in ((thirds_map, LOG2_OVER_LOG3), (cantor24_map, S_STAR_24)):
            root = bowen_root(imap, UNCONSTRAINED, n_range=(6, 12))
            opt = sup_dim_ratio(imap)
            assert root.value >= opt.value - 2e-3
            assert abs(root.value - oracle) < 2e-3 and abs(opt.value - oracle) < 2e-3

    def test_blocked_order_two_on_doubling(self, doubling_map):
        opt = sup_dim_ratio(doubling_map, order=2, restarts=6, iterations=300)
        assert opt.value == pytest.approx(1.0, abs=5e-3)

    def test_infeasible_ball(self, mann_map):
        # center at the parabolic Dirac with zero radius: no hyperbolic point fits
        ball = ConstraintBall(center=DiracFixed(0), radius=0.0, lyap_floor=1e-3)
        with pytest.raises(Infeasible):
            sup_dim_ratio(mann_map, ball=ball, restarts=4, iterations=120)
