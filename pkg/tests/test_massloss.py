from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atinv.families import ScaleRule, opposite_family, pair_rational
from atinv.laurent import LaurentPoly, l1_norm, multiply, opposite
from atinv.massloss import (
    MixedScaleError,
    ProbeRule,
    digit_sum,
    dyadic_limit,
    dyadic_product,
    inverse_distinguish,
    massloss_invariant,
    noninteracting_split,
    partial_s,
    probe_norm_audit,
    probe_norm_limit,
    probe_norm_oracle,
    probe_norm_structural,
    slice_closed_form,
    slice_sum,
    two_adic,
)
from atinv.families import Rational, GeneratorRule

F = Fraction
R_VALUES = (F(1, 3), F(1, 2), F(2, 3), F(2))
S3 = ScaleRule.constant(3)
S2 = ScaleRule.constant(2)


def naive_norm_product(probe: LaurentPoly, terms) -> list:
    acc = probe
    out = [l1_norm(acc)]
    for t in terms:
        acc = multiply(acc, t)
        out.append(l1_norm(acc))
    return out


class TestDigits:
    def test_examples(self):
        assert (digit_sum(7), two_adic(7)) == (3, 0)
        assert (digit_sum(12), two_adic(12)) == (2, 2)
        with pytest.raises(ValueError):
            two_adic(0)

    @given(st.integers(1, 2**40))
    def test_identity(self, j):
        assert digit_sum(j - 1) == digit_sum(j) - 1 + two_adic(j)


class TestDyadicProduct:
    def test_small(self):
        assert dyadic_product(F(1, 2), 2) == LaurentPoly({0: 1, 1: F(1, 2), 2: F(1, 2), 3: F(1, 4)})

    @pytest.mark.parametrize("r", R_VALUES)
    def test_coefficients_are_digit_powers(self, r):
        Q = dyadic_product(r, 10)
        rng = random.Random(3)
        for j in rng.sample(range(2**10), 50):
            assert Q[j] == r ** digit_sum(j)
        assert Q.value_at_one() == (1 + r) ** 10

    def test_slices(self):
        r = F(5, 7)
        assert slice_sum(r, 2, 0) == r + r * r
        assert slice_sum(2, 3, 0) == 18
        for d in range(1, 12):
            assert sum(slice_sum(r, d, u) for u in range(d)) == (1 + r) ** d - 1
            for u in range(d):
                assert slice_sum(r, d, u) == slice_closed_form(r, d, u)
        with pytest.raises(ValueError):
            slice_sum(r, 3, 3)


class TestProbeNorms:
    def test_worked_example(self):
        assert probe_norm_limit(F(1, 2), F(1, 2), 2) == F(11, 8)

    @pytest.mark.parametrize("d", [1, 2, 3, 5, 7])
    @pytest.mark.parametrize("r", R_VALUES)
    def test_oracle_matches_direct_convolution(self, r, d):
        for a in (r, 1 / r, F(3, 5)):
            direct = l1_norm(multiply(LaurentPoly({0: 1, 1: -a}), dyadic_product(r, d)))
            assert probe_norm_oracle(a, r, d) == direct

    @given(st.builds(F, st.integers(1, 9), st.integers(1, 9)),
           st.builds(F, st.integers(1, 9), st.integers(1, 9)),
           st.integers(1, 12))
    @settings(max_examples=60, deadline=None)
    def test_structural_sum(self, a, r, d):
        assert probe_norm_structural(a, r, d) == probe_norm_oracle(a, r, d)

    def test_dyadic_limits(self):
        r = F(1, 2)
        assert dyadic_limit(r, r).meta["exact"]["value"] == {"num": 1, "den": 3}
        assert dyadic_limit(1 / r, r).meta["exact"]["value"] == {"num": 13, "den": 27}

    def test_audit_flags(self):
        rep = probe_norm_audit(F(1, 2), (2, 4))
        assert rep["all_structural_agree"]
        kinds = {dv["display"] for dv in rep["deviations"]}
        assert kinds == {"signed probe unnormalized norm", "reflected probe limit", "mirror probe first step"}


class TestPartialS:
    def test_noninteracting_split(self):
        assert noninteracting_split(LaurentPoly({0: 1, 5: 1}), 8)
        assert not noninteracting_split(LaurentPoly({0: 1, 8: 1}), 8)
        # dyadic: spread 2 T(k) equals T(k+1)
        assert not noninteracting_split(LaurentPoly({0: 1, 16: 1}), 16)

    def test_signed_probe_n3(self):
        spec = pair_rational(F(1, 2), 3)
        v = partial_s(ProbeRule("signed", F(1, 2), S3), spec, 4, 2)
        assert v.meta["noninteracting"]
        assert v.meta["exact"]["value"] == {"num": 5, "den": 9}

    def test_mirror_probe_n3(self):
        spec = pair_rational(F(1, 2), 3)
        v = partial_s(ProbeRule("mirror", F(1, 2), S3), spec, 4, 2)
        assert v.meta["exact"]["value"] == {"num": 7, "den": 9}

    def test_positive_probe(self):
        spec = pair_rational(F(1, 2), 3)
        assert massloss_invariant(ProbeRule("positive", F(1, 2), S3), spec).value == 1.0

    def test_noninteraction_preserves_norm(self):
        spec = pair_rational(F(2, 3), 3)
        probe = ProbeRule("signed", F(2, 3), S3).poly(3)
        terms = [spec.materialize(m) for m in range(2, 9)]
        norms = naive_norm_product(probe, terms)
        acc = probe
        for m, t in zip(range(2, 9), terms):
            before = l1_norm(acc)
            if noninteracting_split(acc, spec.lattice(m)):
                assert l1_norm(multiply(acc, t)) == before * l1_norm(t)
            acc = multiply(acc, t)
        assert all(b <= a for a, b in zip(norms, norms[1:]))

    def test_dyadic_monotone_and_geometric(self):
        spec = pair_rational(F(1, 2), 2)
        v = partial_s(ProbeRule("signed", F(1, 2), S2), spec, 3, 1)
        assert v.meta["tail"] == "geometric extrapolation"
        assert v.meta["exact"]["lower"] == {"num": 1, "den": 3}

    @pytest.mark.parametrize("r", [F(1, 2), F(2, 3)])
    @pytest.mark.parametrize("kind", ["signed", "mirror"])
    def test_op_involution(self, r, kind):
        for n in (2, 3):
            spec = pair_rational(r, n)
            probe = ProbeRule(kind, r, ScaleRule.constant(n))
            op_spec = opposite_family(spec)
            for k, l in ((3, 1), (4, 2)):
                d = 8
                lhs = naive_norm_product(opposite(probe.poly(k)), [spec.materialize(m) for m in range(l, l + d)])
                rhs = naive_norm_product(probe.poly(k), [op_spec.materialize(m) for m in range(l, l + d)])
                assert lhs == rhs


class TestDistinguish:
    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("r", [F(1, 3), F(1, 2), F(2, 3)])
    def test_distinct(self, n, r):
        rep = inverse_distinguish(pair_rational(r, n))
        assert rep["distinct"] and not rep["equal"]

    @pytest.mark.parametrize("n", [2, 3])
    def test_self_inverse(self, n):
        rep = inverse_distinguish(pair_rational(1, n))
        assert rep["equal"] and not rep["distinct"]

    def test_mixed_scale_refused(self):
        spec = Rational(GeneratorRule.constant(LaurentPoly({0: 1, 1: 1})), ScaleRule(0, 2, (3,)), F(1, 2))
        with pytest.raises(MixedScaleError):
            inverse_distinguish(spec)
