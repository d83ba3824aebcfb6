"""Mass-loss invariants and the dyadic combinatorics behind them.

For norm-one probes ``p_k`` the mass-loss invariant is
``lim_l inf_k lim_d ||p_k P_l ... P_{l+d}||``. The norms are nonincreasing in
``d``; the limit is reached exactly once the accumulated product is narrower
than the lattice carrying every remaining term (:func:`noninteracting_split`).
When that never happens (constant scale 2) the limit is handled through the
exact identity ``Q(X) = prod_{i<d} (1 + r X^{2^i}) = sum_j r^{delta(j)} X^j``
and the ``e(j)`` slice decomposition of ``(1 - aX) Q(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .engine import CertifiedValue
from .families import FamilySpec, Rational, ScaleRule, SpecError, as_ratio, ratio_to_json
from .laurent import LaurentPoly, l1_norm, multiply, opposite

DEFAULT_D_MAX = 12
DEFAULT_K_WINDOW = 8
DEFAULT_L_MAX = 4
EXACT_D_LIMIT = 24


class MixedScaleError(SpecError):
    """Raised for scale rules that mix the dyadic and the ``n >= 3`` regimes."""


# -- probes ----------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRule:
    """Norm-one probes built on the scale products ``T(k)``.

    ``signed``: ``(1 - r x^T(k)) / (1 + r)``; ``mirror``: ``(x^T(k) - r) / (1 + r)``;
    ``positive``: ``(1 + r x^T(k)) / (1 + r)``. With ``op`` the probe is reflected.
    """

    kind: str
    r: Fraction
    scale: ScaleRule
    op: bool = False

    def __post_init__(self):
        if self.kind not in ("signed", "mirror", "positive"):
            raise SpecError(f"unknown probe kind {self.kind!r}")
        object.__setattr__(self, "r", as_ratio(self.r))
        if self.r <= 0:
            raise SpecError("probe parameter r must be positive")

    def poly(self, k: int) -> LaurentPoly:
        T = self.scale.T(k)
        r = self.r
        c = 1 / (1 + r)
        if self.kind == "signed":
            p = LaurentPoly({0: c, T: -r * c})
        elif self.kind == "mirror":
            p = LaurentPoly({T: c, 0: -r * c})
        else:
            p = LaurentPoly({0: c, T: r * c})
        return opposite(p) if self.op else p

    def reflected(self) -> "ProbeRule":
        return ProbeRule(self.kind, self.r, self.scale, not self.op)

    @property
    def dyadic_a(self) -> Fraction:
        """The ``a`` with ``||p_k Q|| = ||(1 - a X) Q|| / (1 + a)`` up to a shift."""
        if self.kind == "positive":
            raise ValueError("positive probes have no cancellation")
        straight = (self.kind == "signed") != self.op
        return self.r if straight else 1 / self.r

    def to_dict(self) -> dict:
        return {"kind": self.kind, "r": ratio_to_json(self.r), "scale": self.scale.to_dict(), "op": self.op}

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeRule":
        return cls(d["kind"], as_ratio(d["r"]), ScaleRule.from_dict(d["scale"]), bool(d.get("op", False)))


def noninteracting_split(accumulated: LaurentPoly, next_period: int) -> bool:
    """True iff the exponent spread of ``accumulated`` is below ``next_period``.

    Then ``||accumulated * Q|| = ||accumulated|| ||Q||`` for every nonnegative
    ``Q`` supported on ``next_period * Z``: distinct terms never collide.
    """
    if len(accumulated) == 0:
        return True
    return accumulated.spread() < next_period


# -- s_{k,l} ---------------------------------------------------------------------


def _geometric_limit(norms: list) -> Optional[Fraction]:
    """Extrapolate when the last three decrements form an exact geometric progression."""
    if len(norms) < 4 or not all(isinstance(v, Fraction) for v in norms[-4:]):
        return None
    d1, d2, d3 = (norms[-4] - norms[-3]), (norms[-3] - norms[-2]), (norms[-2] - norms[-1])
    if d1 <= 0 or d2 <= 0 or d3 <= 0:
        return None
    c = d2 / d1
    if d3 / d2 != c or not 0 < c < 1:
        return None
    return norms[-1] - d3 * c / (1 - c)


def partial_s(probe, spec: FamilySpec, k: int, l: int, d_max: int = DEFAULT_D_MAX) -> CertifiedValue:
    """``s_{l,k} = lim_d ||p_k P_l ... P_{l+d}||``.

    ``probe`` is a :class:`ProbeRule` or a fixed :class:`LaurentPoly`.
    """
    p = probe.poly(k) if isinstance(probe, ProbeRule) else probe
    acc = p
    norms = [l1_norm(acc)]
    meta = {"k": k, "l": l}
    for m in range(l, l + d_max + 1):
        period = spec.lattice(m)
        if period is not None and noninteracting_split(acc, period):
            v = norms[-1]
            return _certified(v, v, v, acc.is_exact, meta | {"noninteracting": True, "d": m - l})
        acc = multiply(acc, spec.materialize(m))
        norms.append(l1_norm(acc))
    meta |= {"noninteracting": False, "d_max": d_max, "norms_tail": [float(v) for v in norms[-4:]]}
    lim = _geometric_limit(norms)
    if lim is not None:
        return _certified(norms[-1], lim, norms[-1], acc.is_exact, meta | {"tail": "geometric extrapolation"})
    return _certified(norms[-1], 0, norms[-1], acc.is_exact, meta | {"tail": "none"})


def _certified(value, lower, upper, exact: bool, meta: dict) -> CertifiedValue:
    if exact:
        meta = meta | {"exact": {"value": _frac_json(value), "lower": _frac_json(lower)}}
        return CertifiedValue(float(value), float(lower), float(upper), meta)
    slack = 1e-12
    return CertifiedValue(float(value), max(0.0, float(lower) - slack), min(1.0, float(upper) + slack), meta)


def _frac_json(v):
    v = Fraction(v)
    return {"num": v.numerator, "den": v.denominator}


def massloss_invariant(probe, spec: FamilySpec, l_max: int = DEFAULT_L_MAX, k_max: int = DEFAULT_K_WINDOW,
                       d_max: int = DEFAULT_D_MAX) -> CertifiedValue:
    """``lim_l inf_k s_{l,k}`` sampled over ``k in [l, l + k_max]`` at the last three ``l``.

    The infimum over ``k`` is taken over a finite window; the report states
    whether the window values were constant in ``k``.
    """
    levels = []
    for l in range(max(1, l_max - 2), l_max + 1):
        vals = [partial_s(probe, spec, k, l, d_max) for k in range(l, l + k_max + 1)]
        best = min(vals, key=lambda v: v.value)
        levels.append((l, best, vals))
    l, best, vals = levels[-1]
    lower = min(v.lower for v in vals)
    upper = min(v.upper for v in vals)
    values = [lv[1].value for lv in levels]
    stable = max(values) - min(values) == 0.0
    meta = {
        "l_values": {str(lv[0]): lv[1].value for lv in levels},
        "k_window": [l, l + k_max],
        "constant_in_k": len({v.value for v in vals}) == 1,
        "stabilized_in_l": stable,
        "certified_exact": all(v.meta.get("noninteracting") for v in vals),
    }
    if "exact" in best.meta:
        meta["exact"] = best.meta["exact"]
    if not stable:
        upper = 1.0
    return CertifiedValue(best.value, lower, upper, meta)


# -- dyadic combinatorics --------------------------------------------------------


def digit_sum(j: int) -> int:
    """Number of ones in the binary expansion of ``j``."""
    if j < 0:
        raise ValueError("digit_sum needs a nonnegative integer")
    return bin(j).count("1")


def two_adic(j: int) -> int:
    """Largest ``e`` with ``2**e`` dividing ``j``."""
    if j <= 0:
        raise ValueError("two_adic needs a positive integer")
    return (j & -j).bit_length() - 1


def dyadic_product(r, d: int) -> LaurentPoly:
    """``Q(X) = prod_{i=0}^{d-1} (1 + r X^{2^i})`` by exact repeated multiplication."""
    r = as_ratio(r)
    if d < 1:
        raise ValueError("d must be at least 1")
    q = LaurentPoly.one()
    for i in range(d):
        q = multiply(q, LaurentPoly({0: 1, 2**i: r}))
    return q


def slice_sum(r, d: int, u: int) -> Fraction:
    """``sum r^{delta(j)}`` over ``1 <= j < 2^d`` with ``e(j) = u``, by direct enumeration.

    The enumeration is vectorized: ``(digit_sum, two_adic)`` pairs are counted
    over all ``j`` and the power sum is then formed exactly.
    """
    r = as_ratio(r)
    if not 0 <= u <= d - 1:
        raise ValueError(f"u must lie in [0, {d - 1}]")
    counts = _slice_counts(d)
    return sum((Fraction(int(c)) * r**delta for delta, c in enumerate(counts[u]) if c), Fraction(0))


_SLICE_CACHE: dict = {}


def _slice_counts(d: int) -> np.ndarray:
    """``counts[u, delta]`` = number of ``1 <= j < 2^d`` with ``e(j) = u`` and ``delta(j) = delta``."""
    if d not in _SLICE_CACHE:
        j = np.arange(1, 2**d, dtype=np.uint64)
        delta = np.bitwise_count(j).astype(np.int64)
        low = j & (~j + np.uint64(1))
        e = np.bitwise_count(low - np.uint64(1)).astype(np.int64)
        counts = np.zeros((d, d + 1), dtype=np.int64)
        np.add.at(counts, (e, delta), 1)
        _SLICE_CACHE[d] = counts
    return _SLICE_CACHE[d]


def slice_closed_form(r, d: int, u: int) -> Fraction:
    """``r (1 + r)^{d - 1 - u}``."""
    r = as_ratio(r)
    return r * (1 + r) ** (d - 1 - u)


def _dyadic_coefficients(p: int, q: int, d: int) -> np.ndarray:
    """Integer coefficients of ``q^d Q(X)`` for ``r = p/q``, built by doubling."""
    big = max(p, q) ** d
    dtype = np.int64 if big < 2**40 else object
    arr = np.array([1], dtype=dtype)
    for _ in range(d):
        arr = np.concatenate((q * arr, p * arr))
    return arr


def _exact_abs_sum(arr: np.ndarray, chunk: int = 1 << 16) -> int:
    total = 0
    for i in range(0, len(arr), chunk):
        total += int(np.abs(arr[i:i + chunk]).sum())
    return total


def probe_norm_oracle(a, r, d: int) -> Fraction:
    """``||(1 - a X) Q(X)||`` by exact convolution of integer-scaled coefficient arrays."""
    a, r = as_ratio(a), as_ratio(r)
    if d < 1 or d > EXACT_D_LIMIT + 4:
        raise ValueError("d out of the exact range")
    qd = _dyadic_coefficients(r.numerator, r.denominator, d)
    s, t = a.numerator, a.denominator
    zero = np.zeros(1, dtype=qd.dtype)
    prod = t * np.concatenate((qd, zero)) - s * np.concatenate((zero, qd))
    return Fraction(_exact_abs_sum(prod), r.denominator**d * t)


def probe_norm_structural(a, r, d: int) -> Fraction:
    """``1 + a r^d + sum_u r (1 + r)^{d-1-u} |1 - a r^{u-1}|``: the slice decomposition."""
    a, r = as_ratio(a), as_ratio(r)
    total = 1 + a * r**d
    for u in range(d):
        total += slice_closed_form(r, d, u) * abs(1 - a * r ** (u - 1))
    return total


def probe_norm_limit(a, r, d: int) -> Fraction:
    """Exact ``||(1 - aX) Q||``; the structural sum is asserted to agree with the oracle."""
    oracle = probe_norm_oracle(a, r, d)
    structural = probe_norm_structural(a, r, d)
    if oracle != structural:
        raise ArithmeticError(f"slice decomposition disagrees with convolution: {structural} != {oracle}")
    return oracle


def normalized_probe_norm(a, r, d: int) -> Fraction:
    """``||(1 - aX)/(1 + a) * Q/(1 + r)^d||``, the norm of a probe against ``d`` dyadic factors."""
    a, r = as_ratio(a), as_ratio(r)
    return probe_norm_limit(a, r, d) / ((1 + a) * (1 + r) ** d)


def dyadic_limit(a, r, d: int = EXACT_D_LIMIT) -> CertifiedValue:
    """``lim_d`` of :func:`normalized_probe_norm` with a geometric-tail bracket.

    The normalized norms satisfy ``N_d = L + C c^d`` with ``c = rho/(1 + rho)``,
    ``rho = min(r, 1/r)``, for ``d >= 3``; the bracket comes from the exact
    decrements and is confirmed to be geometric before it is used.
    """
    seq = [normalized_probe_norm(a, r, dd) for dd in range(d - 3, d + 1)]
    lim = _geometric_limit(seq)
    meta = {"a": _frac_json(as_ratio(a)), "r": _frac_json(as_ratio(r)), "d": d}
    if lim is None:
        return CertifiedValue(float(seq[-1]), 0.0, float(seq[-1]), meta | {"tail": "none"})
    meta |= {"tail": "geometric decrements", "exact": {"value": _frac_json(lim), "lower": _frac_json(lim)}}
    return CertifiedValue(float(lim), float(lim), float(lim), meta)


def dyadic_error_constant(a, r, ds=(8, 16, 24)) -> dict:
    """``(N_d - L) / c^d`` at several ``d``; bounded values confirm the ``O(c^d)`` rate."""
    a, r = as_ratio(a), as_ratio(r)
    rho = min(r, 1 / r)
    c = rho / (1 + rho)
    exact = dyadic_limit(a, r).meta["exact"]["value"]
    L = Fraction(exact["num"], exact["den"])
    rows = {}
    for d in ds:
        err = normalized_probe_norm(a, r, d) - L
        rows[d] = {"error": float(err), "ratio": float(err / c**d)}
    return {"limit": float(L), "c": float(c), "rows": rows}


# -- audit of simplified displays ------------------------------------------------


def display_signed_unnormalized(r, d: int) -> Fraction:
    """The simplified closed form ``(1+r)^d (1-r)(1 - (r/(1+r))^d) + r^{d+1}`` for ``a = r``."""
    r = as_ratio(r)
    return (1 + r) ** d * (1 - r) * (1 - (r / (1 + r)) ** d) + r ** (d + 1)


def display_presimplified(r, d: int) -> Fraction:
    """``1 + r^{d+1} + sum_u r (1+r)^{d-1-u} (1 - r^u)`` for ``a = r``."""
    r = as_ratio(r)
    return 1 + r ** (d + 1) + sum((r * (1 + r) ** (d - 1 - u) * (1 - r**u) for u in range(d)), Fraction(0))


def display_reflected_limit(r) -> Fraction:
    """The factored form ``(1-r)/(1+r) (1 + 1/(1+r) - 1/(1+r)^3)`` offered for the ``a = 1/r`` limit."""
    r = as_ratio(r)
    return (1 - r) / (1 + r) * (1 + 1 / (1 + r) - 1 / (1 + r) ** 3)


def mirror_first_step(r) -> dict:
    """``||q_k P_k||`` for ``q_k = (X - r)/(1 + r)``, ``P_k = (1 + rX)/(1 + r)``: oracle versus display."""
    r = as_ratio(r)
    X = LaurentPoly({1: 1})
    q = (X - LaurentPoly({0: r})) / (1 + r)
    P = LaurentPoly({0: 1, 1: r}) / (1 + r)
    oracle = l1_norm(multiply(q, P))
    display = 2 * (1 - r) / (1 + r) ** 2
    return {"oracle": oracle, "display": display, "closed_form": (2 * r + abs(1 - r * r)) / (1 + r) ** 2}


def probe_norm_audit(r=Fraction(1, 2), ds=(2, 3, 4, 8, 12, 16), a_values=None) -> dict:
    """Compare the convolution oracle with the structural sum and the simplified displays."""
    r = as_ratio(r)
    a_values = a_values or (r, 1 / r)
    rows = []
    for a in a_values:
        for d in ds:
            oracle = probe_norm_oracle(a, r, d)
            structural = probe_norm_structural(a, r, d)
            row = {"a": _frac_json(a), "d": d, "oracle": _frac_json(oracle), "structural": _frac_json(structural),
                   "structural_agrees": oracle == structural}
            if a == r:
                disp = display_signed_unnormalized(r, d)
                row |= {"display": _frac_json(disp), "display_deviates": disp != oracle,
                        "presimplified_agrees": display_presimplified(r, d) == oracle,
                        "difference": float(oracle - disp)}
            rows.append(row)
    lim_reflected = dyadic_limit(1 / r, r)
    disp = display_reflected_limit(r)
    exact_lim = Fraction(lim_reflected.meta["exact"]["value"]["num"], lim_reflected.meta["exact"]["value"]["den"])
    mirror = mirror_first_step(r)
    deviations = [
        {"display": "signed probe unnormalized norm", "d": row["d"], "oracle": row["oracle"], "display_value": row["display"]}
        for row in rows if row.get("display_deviates")
    ]
    if disp != exact_lim:
        deviations.append({"display": "reflected probe limit", "oracle": _frac_json(exact_lim), "display_value": _frac_json(disp)})
    if mirror["display"] != mirror["oracle"]:
        deviations.append({"display": "mirror probe first step", "oracle": _frac_json(mirror["oracle"]),
                           "display_value": _frac_json(mirror["display"])})
    return {
        "r": _frac_json(r),
        "rows": rows,
        "all_structural_agree": all(row["structural_agrees"] for row in rows),
        "deviations": deviations,
    }


# -- distinguishing a system from its inverse ------------------------------------


def _is_pair_generator(spec: Rational) -> bool:
    if not spec.gen.is_constant:
        return False
    h = spec.gen.tail
    return h.support() == [0, 1] and h[0] == h[1]


def inverse_distinguish(spec: Rational, d: int = EXACT_D_LIMIT, **kw) -> dict:
    """Mass-loss invariants of ``spec`` under the signed probe and its reflection.

    Reflecting the probe is equivalent to reflecting every term, so a difference
    between the two values separates the system from its inverse.
    """
    if not isinstance(spec, Rational):
        raise SpecError("inverse_distinguish needs a rational family")
    n = spec.scale.constant_value
    if n is None:
        if spec.scale.min_n_from(1) >= 3:
            n = 3
        else:
            raise MixedScaleError("scale rules mixing n = 2 with larger n are not supported")
    r = spec.r
    probe = ProbeRule("signed", r, spec.scale)
    if n == 2:
        if not _is_pair_generator(spec):
            raise SpecError("the dyadic case is implemented for the generator 1 + x")
        straight = dyadic_limit(probe.dyadic_a, r, d)
        reflected = dyadic_limit(probe.reflected().dyadic_a, r, d)
        method = "dyadic slice identity"
    else:
        straight = massloss_invariant(probe, spec, **kw)
        reflected = massloss_invariant(probe.reflected(), spec, **kw)
        method = "non-interacting products"
    distinct = straight.upper < reflected.lower or reflected.upper < straight.lower
    same = straight.lower == straight.upper == reflected.lower == reflected.upper
    return {
        "r": float(r),
        "n": n,
        "method": method,
        "signed": straight.to_dict(),
        "reflected": reflected.to_dict(),
        "distinct": distinct,
        "equal": same,
    }


__all__ = [
    "MixedScaleError",
    "ProbeRule",
    "digit_sum",
    "dyadic_error_constant",
    "dyadic_limit",
    "dyadic_product",
    "inverse_distinguish",
    "massloss_invariant",
    "noninteracting_split",
    "normalized_probe_norm",
    "partial_s",
    "probe_norm_audit",
    "probe_norm_limit",
    "slice_closed_form",
    "slice_sum",
    "two_adic",
]
