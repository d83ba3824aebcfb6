"""Evaluation invariants with certified brackets.

For a family ``(P_m)`` and circle points ``(w_k)``:

* ``S_{k,l} = lim_d |P_l(w_k) ... P_{l+d}(w_k)|``  (:func:`partial_S`)
* ``S_l = inf_k S_{k,l}``                           (:func:`level_inf`)
* ``S = lim_l S_l``                                 (:func:`invariant`)

All products are accumulated as sums of ``ln|P_m(w_k)|`` computed by
:meth:`FamilySpec.log_modulus`, so no term is ever materialized.

Brackets come from three places. Root-of-unity witnesses make all but finitely
many factors exactly 1, so ``S_{k,l}`` is a finite product and only rounding
error is left. The infimum over ``k`` is closed off by a tail certificate
derived from second-moment (or variance) bounds on ``-ln|P(e^{i theta})|``.
The limit over ``l`` is exact when the rule is constant in ``l`` and otherwise
reported with an honest upper end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .families import (
    Divisible,
    Explicit,
    FamilySpec,
    GeneratorRule,
    Rational,
    ScaleRule,
    SpecError,
    Telescoped,
    Tensor,
    as_ratio,
    mass_U,
    tensor,
)
from .laurent import LaurentPoly, RationalAngle, exact_zero_at, modulus_defect, moment, real_defect, variance

TWO_PI = 2.0 * math.pi
# Relative rounding allowance per accumulated log term.
ROUND_EPS = 64 * 2.0**-52

DEFAULT_K_MAX = 64
DEFAULT_L_MAX = 32
DEFAULT_D_MAX = 256
STABLE_TOL = 1e-9


@dataclass(frozen=True)
class WitnessRule:
    """Rule ``k -> w_k`` producing rational circle points.

    ``canonical``: angle ``1/T(k)``; ``scaled``: ``1/(j T(k))``;
    ``next_scale``: ``1/n(k+1)``; ``explicit``: a listed finite sequence.
    """

    kind: str = "canonical"
    scale: Optional[ScaleRule] = None
    j: int = 1
    angles: tuple = ()

    def __post_init__(self):
        if self.kind not in ("canonical", "scaled", "next_scale", "explicit"):
            raise SpecError(f"unknown witness kind {self.kind!r}")
        if self.j < 1:
            raise SpecError("witness multiplier j must be positive")
        object.__setattr__(self, "angles", tuple(self.angles))
        if self.kind == "explicit" and not self.angles:
            raise SpecError("explicit witness needs at least one angle")

    @classmethod
    def canonical(cls, scale: Optional[ScaleRule] = None) -> "WitnessRule":
        return cls("canonical", scale)

    @classmethod
    def scaled(cls, j: int, scale: Optional[ScaleRule] = None) -> "WitnessRule":
        return cls("scaled", scale, j=j)

    @classmethod
    def next_scale(cls, scale: Optional[ScaleRule] = None) -> "WitnessRule":
        return cls("next_scale", scale)

    @classmethod
    def explicit(cls, angles: Sequence[RationalAngle]) -> "WitnessRule":
        return cls("explicit", angles=tuple(angles))

    def bind(self, spec: FamilySpec) -> "WitnessRule":
        if self.kind == "explicit" or self.scale is not None:
            return self
        rule = spec.scale_rule()
        if rule is None:
            raise SpecError("witness needs a scale rule and the family does not provide a single one")
        return WitnessRule(self.kind, rule, self.j, self.angles)

    @property
    def length(self) -> Optional[int]:
        return len(self.angles) if self.kind == "explicit" else None

    def angle(self, k: int) -> RationalAngle:
        if k < 1:
            raise ValueError("witness indices start at 1")
        if self.kind == "explicit":
            return self.angles[k - 1]
        if self.scale is None:
            raise SpecError("unbound witness; call bind(spec) first")
        if self.kind == "canonical":
            return RationalAngle(1, self.scale.T(k))
        if self.kind == "scaled":
            return RationalAngle(1, self.j * self.scale.T(k))
        return RationalAngle(1, self.scale.n(k + 1))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "scaled":
            d["j"] = self.j
        if self.kind == "explicit":
            d["angles"] = [a.to_dict() for a in self.angles]
        if self.scale is not None:
            d["scale"] = self.scale.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "WitnessRule":
        if d is None:
            return cls()
        scale = ScaleRule.from_dict(d["scale"]) if d.get("scale") else None
        angles = tuple(RationalAngle(int(a["num"]), int(a["den"])) for a in d.get("angles", ()))
        return cls(d.get("kind", "canonical"), scale, int(d.get("j", 1)), angles)


@dataclass
class CertifiedValue:
    """A number with a rigorous bracket ``lower <= true value <= upper``."""

    value: float
    lower: float
    upper: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lower = max(0.0, min(self.lower, self.value))
        self.upper = min(1.0, max(self.upper, self.value))

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def overlaps(self, other: "CertifiedValue") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def to_dict(self) -> dict:
        return {"value": self.value, "lower": self.lower, "upper": self.upper, "meta": _jsonable(self.meta)}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Fraction):
        return {"num": x.numerator, "den": x.denominator}
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _bracket_from_log(total: float, magnitude: float, nterms: int, meta: dict) -> CertifiedValue:
    if total == -math.inf:
        return CertifiedValue(0.0, 0.0, 0.0, meta | {"exact_zero": True})
    slack = ROUND_EPS * (nterms + 1) * magnitude
    value = math.exp(total)
    return CertifiedValue(value, math.exp(total - slack), math.exp(min(0.0, total + slack)), meta)


# -- S_{k,l} ---------------------------------------------------------------------


def partial_S(spec: FamilySpec, witness: WitnessRule, k: int, l: int, d_max: int = DEFAULT_D_MAX) -> CertifiedValue:
    """``S_{k,l}``: the limiting modulus of the tail product at ``w_k``."""
    if k < 1 or l < 1:
        raise ValueError("k and l must be positive")
    witness = witness.bind(spec)
    z = witness.angle(k)
    meta = {"k": k, "l": l}
    m0 = spec.unit_from(z, l)
    if m0 is not None:
        total, mag = _log_sum(spec, z, range(l, m0))
        return _bracket_from_log(total, mag, m0 - l, meta | {"terminated": True, "factors": m0 - l})

    cycle = _cycle_decay(spec, z, l, d_max)
    if cycle is not None:
        return CertifiedValue(0.0, 0.0, 0.0, meta | {"terminated": False, "periodic_decay": cycle})

    total, mag = _log_sum(spec, z, range(l, l + d_max + 1))
    upper = _bracket_from_log(total, mag, d_max + 1, {}).upper
    return CertifiedValue(math.exp(total) if total > -math.inf else 0.0, 0.0, upper,
                          meta | {"terminated": False, "non_terminating": True, "d_max": d_max})


def _log_sum(spec: FamilySpec, z: RationalAngle, ms) -> tuple:
    total = 0.0
    mag = 0.0
    for m in ms:
        v = spec.log_modulus(m, z)
        if v == -math.inf:
            return -math.inf, math.inf
        total += v
        mag += abs(v)
    return total, mag


def _cycle_decay(spec: FamilySpec, z: RationalAngle, start: int, max_states: int) -> Optional[dict]:
    """Detect an eventually periodic factor pattern whose cycle product is < 1.

    With a constant scale ``n`` and a ``p``-periodic generator, the factor at
    ``m`` depends only on ``(T(m) mod q, m mod p)``; once that state repeats the
    factors repeat forever, and a cycle product below 1 forces the limit 0.
    """
    st = _structure(spec)
    if st is None or isinstance(spec, Telescoped):
        return None
    n, period, _ = st
    seen = {}
    state_T = spec.lattice(start) % z.q
    for m in range(start, start + max_states):
        key = (state_T, m % period)
        if key in seen:
            m1 = seen[key]
            total, _ = _log_sum(spec, z, range(m1, m))
            if total < -1e-9:
                return {"cycle_start": m1, "cycle_length": m - m1, "cycle_log": total}
            return None
        seen[key] = m
        state_T = (state_T * n) % z.q
    return None


# -- structure and tail certificates ---------------------------------------------


def _kappa(h_base: LaurentPoly, divisible_r: Optional[Fraction] = None) -> float:
    """Curvature ``kappa`` with ``-ln|P(e^{i theta})| <= kappa theta^2 / (1 - 2 kappa theta^2)``."""
    if divisible_r is not None:
        return float(divisible_r) * float(moment(h_base.to_float(), 2)) / 2.0
    return float(variance(h_base.to_float())) / 2.0


def _rational_base(h: LaurentPoly, r: Fraction) -> LaurentPoly:
    g = h.to_float().scale_variable(float(r))
    return g / g.value_at_one()


def _structure(spec: FamilySpec):
    """``(n, period, class_kappas)`` for constant-scale periodic rules, else None."""
    if isinstance(spec, (Divisible, Rational)):
        n = spec.scale.constant_value
        if n is None or not spec.gen.is_constant:
            return None
        if isinstance(spec, Divisible):
            kap = _kappa(spec.gen.tail, spec.r)
        else:
            kap = _kappa(_rational_base(spec.gen.tail, spec.r))
        return n, 1, (kap,)
    if isinstance(spec, Explicit):
        if spec.scale is None or spec.scale.constant_value is None:
            return None
        # cycle index is m mod p; store kappas by that index
        return spec.scale.constant_value, spec.period, tuple(_kappa(g) for g in spec.cycle)
    if isinstance(spec, Tensor):
        a, b = _structure(spec.left), _structure(spec.right)
        if a is None or b is None or a[0] != b[0]:
            return None
        p = a[1] * b[1] // math.gcd(a[1], b[1])
        return a[0], p, tuple(a[2][c % a[1]] + b[2][c % b[1]] for c in range(p))
    if isinstance(spec, Telescoped):
        return _structure(spec.inner)
    return None


def _kappa_sup(spec: FamilySpec) -> Optional[float]:
    """Uniform curvature bound over all terms of a rule sharing one scale."""
    if isinstance(spec, Divisible):
        return max(_kappa(h, spec.r) for h in spec.gen.all_polys())
    if isinstance(spec, Rational):
        return max(_kappa(_rational_base(h, spec.r)) for h in spec.gen.all_polys())
    if isinstance(spec, Explicit):
        return None if spec.scale is None else max(_kappa(g) for g in spec.cycle)
    if isinstance(spec, Tensor):
        if spec.left.scale_rule() is None or spec.left.scale_rule() != spec.right.scale_rule():
            return None
        a, b = _kappa_sup(spec.left), _kappa_sup(spec.right)
        return None if a is None or b is None else a + b
    if isinstance(spec, Telescoped):
        return _kappa_sup(spec.inner)
    return None


def _geometric_tail(kappa: float, theta0: float, ratio2: float) -> Optional[float]:
    """Bound ``sum_{s>=0} kappa th_s^2 / (1 - 2 kappa th_s^2)`` with ``th_s^2 = theta0^2 ratio2^s``."""
    if kappa == 0.0:
        return 0.0
    denom = 1.0 - 2.0 * kappa * theta0 * theta0
    if denom <= 0.0 or ratio2 >= 1.0:
        return None
    return kappa * theta0 * theta0 / (1.0 - ratio2) / denom


def _inner_level(spec: FamilySpec, l: int) -> tuple:
    while isinstance(spec, Telescoped):
        l = spec.u(l)
        spec = spec.inner
    return spec, l


def _tail_certificate(spec: FamilySpec, witness: WitnessRule, l: int, k_max: int, values: dict) -> Optional[dict]:
    """Lower bound on ``inf_{k > k_max} S_{k,l}``, or None when no certificate applies."""
    if witness.kind not in ("canonical", "scaled"):
        return None
    if not all(v.meta.get("terminated") or v.meta.get("exact_zero") for v in values.values()):
        return None
    base, l_eff = _inner_level(spec, l)
    if witness.scale != base.scale_rule():
        return None
    j = witness.j if witness.kind == "scaled" else 1
    best = None

    st = _structure(base)
    if st is not None:
        n, period, kappas = st
        kap = max(kappas)
        bound = math.inf
        for c in range(period):
            ks = [k for k in values if k % period == c]
            if not ks:
                return None
            kc = max(ks)
            t0 = max(kc - l_eff, 0)
            tail = _geometric_tail(kap, TWO_PI / (j * n ** (t0 + 1)), 1.0 / (n * n))
            if tail is None:
                bound = None
                break
            bound = min(bound, values[kc].lower * math.exp(-tail))
        if bound is not None:
            best = {"lower": bound, "source": "monotone residue classes", "period": period}

    kap = _kappa_sup(base)
    rule = base.scale_rule()
    if kap is not None and rule is not None:
        n_far = rule.min_n_from(k_max + 1)
        n_min = rule.min_n_from(l_eff + 1)
        tail = _geometric_tail(kap, TWO_PI / (j * n_far), 1.0 / (n_min * n_min))
        if tail is not None:
            cand = math.exp(-tail)
            if best is None or cand > best["lower"]:
                best = {"lower": cand, "source": "uniform scale growth"}
    return best


# -- S_l and the limit -----------------------------------------------------------


def level_inf(spec: FamilySpec, witness: WitnessRule, l: int, k_max: int = DEFAULT_K_MAX,
              d_max: int = DEFAULT_D_MAX) -> CertifiedValue:
    """``S_l = inf_k S_{k,l}`` over ``k <= k_max`` closed off by a tail certificate."""
    witness = witness.bind(spec)
    if witness.length is not None:
        k_max = min(k_max, witness.length)
    values = {k: partial_S(spec, witness, k, l, d_max) for k in range(1, k_max + 1)}
    k_best = min(values, key=lambda k: (values[k].value, k))
    value = values[k_best].value
    upper = min(v.upper for v in values.values())
    computed_lower = min(v.lower for v in values.values())
    meta = {"l": l, "k_max": k_max, "argmin_k": k_best}

    st = _structure(_inner_level(spec, l)[0])
    if st is not None and st[1] > 1:
        period = st[1]
        meta["class_minima"] = {str(c): min(v.value for k, v in values.items() if k % period == c) for c in range(period)}

    if upper == 0.0:
        return CertifiedValue(0.0, 0.0, 0.0, meta | {"exact_zero": True})
    cert = _tail_certificate(spec, witness, l, k_max, values)
    if cert is None:
        if witness.length is not None and k_max == witness.length:
            # finite explicit witness list: the infimum is over the listed points only
            return CertifiedValue(value, computed_lower, upper, meta | {"tail": "finite witness list"})
        return CertifiedValue(value, 0.0, upper, meta | {"tail": "no tail certificate"})
    lower = min(computed_lower, cert["lower"])
    return CertifiedValue(value, lower, upper, meta | {"tail": cert["source"]})


def constant_in_l(spec: FamilySpec, witness: WitnessRule) -> bool:
    """True when ``S_l`` provably does not depend on ``l``.

    Holds for constant scale with periodic generators under canonical witnesses
    (every residue-class limit is an infinite product independent of ``l``).
    """
    witness = witness.bind(spec)
    base, _ = _inner_level(spec, 1)
    return witness.kind == "canonical" and _structure(base) is not None and witness.scale == base.scale_rule()


def _growing_scale_limit(spec: FamilySpec, witness: WitnessRule) -> bool:
    """Divisible or rational rules with constant generator tail and ``n(k) -> infinity`` have invariant 1."""
    base, _ = _inner_level(spec, 1)
    if witness.kind != "canonical" or not isinstance(base, (Divisible, Rational)):
        return False
    if witness.scale != base.scale:
        return False
    return base.scale.grows


def invariant(spec: FamilySpec, witness: Optional[WitnessRule] = None, l_max: int = DEFAULT_L_MAX,
              k_max: int = DEFAULT_K_MAX, d_max: int = DEFAULT_D_MAX) -> CertifiedValue:
    """``lim_l S_l`` with a certified bracket."""
    witness = (witness or WitnessRule()).bind(spec)
    if constant_in_l(spec, witness):
        s = level_inf(spec, witness, 1, k_max, d_max)
        return CertifiedValue(s.value, s.lower, s.upper, s.meta | {"constant_in_l": True, "l_used": 1})

    ls = list(range(max(1, l_max - 2), l_max + 1))
    levels = [level_inf(spec, witness, l, k_max, d_max) for l in ls]
    last = levels[-1]
    diffs = [b.value - a.value for a, b in zip(levels, levels[1:])]
    meta = last.meta | {
        "constant_in_l": False,
        "levels": {str(l): s.value for l, s in zip(ls, levels)},
        "monotone_in_l": all(d >= -1e-12 for d in diffs),
    }
    if _growing_scale_limit(spec, witness):
        return CertifiedValue(1.0, last.lower, 1.0, meta | {"value_source": "growing-scale limit", "l_used": l_max})
    if diffs and max(abs(d) for d in diffs) <= STABLE_TOL:
        slack = 3 * max(abs(d) for d in diffs)
        return CertifiedValue(last.value, last.lower, last.upper + slack, meta | {"stabilized": "empirical", "l_used": l_max})
    return CertifiedValue(last.value, last.lower, 1.0, meta | {"stabilized": False, "l_used": l_max})


# -- closed forms ----------------------------------------------------------------


def _geometric_terms(n: int, tol: float, kappa: float, j: int = 1) -> tuple:
    t = 1
    while True:
        tail = _geometric_tail(kappa, TWO_PI / (j * n ** (t + 1)), 1.0 / (n * n))
        if tail is not None and tail <= tol:
            return t, tail
        t += 1


def closed_form_divisible(h: LaurentPoly, n: int, tol: float = 1e-12) -> CertifiedValue:
    """``exp(-sum_{t>=1} Re(1 - h(e^{2 pi i / n^t})))`` for a constant generator and scale."""
    if n < 2:
        raise ValueError("n must be at least 2")
    hf = h.to_float()
    if not hf.is_nonnegative() or abs(hf.value_at_one() - 1.0) > 1e-12:
        raise ValueError("h must be nonnegative with h(1) = 1")
    mu2 = float(moment(hf, 2))
    K, tail = _geometric_terms(n, tol, mu2 / 2.0)
    terms = [real_defect(hf, RationalAngle(1, n**t)) for t in range(1, K + 1)]
    total = -sum(terms)
    first = math.exp(-terms[0])
    cv = _bracket_from_log(total, -total, K, {"terms": K, "tail_bound": tail, "mu2": mu2})
    cv = CertifiedValue(cv.value, cv.lower * math.exp(-tail), cv.upper, cv.meta)
    cv.meta["first_factor_bound"] = first
    cv.meta["strictly_inside"] = 0.0 < cv.lower and cv.upper < 1.0
    return cv


def closed_form_rational(h: LaurentPoly, n: int, r, tol: float = 1e-12) -> CertifiedValue:
    """``prod_{t>=1} |h(r e^{2 pi i/n^t})| / h(r)`` with a variance tail bound."""
    r = as_ratio(r)
    if n < 2 or r <= 0:
        raise ValueError("need n >= 2 and r > 0")
    if not h.is_nonnegative():
        raise ValueError("h must have nonnegative coefficients")
    base = _rational_base(h, r)
    kap = _kappa(base)
    K, tail = _geometric_terms(n, tol, kap)
    total = 0.0
    mag = 0.0
    for t in range(1, K + 1):
        z = RationalAngle(1, n**t)
        if exact_zero_at(h, z, r):
            return CertifiedValue(0.0, 0.0, 0.0, {"exact_zero": True, "zero_factor": t})
        d = modulus_defect(h, z, r)
        v = 0.5 * math.log1p(-d) if d < 1.0 else -math.inf
        if v == -math.inf:
            return CertifiedValue(0.0, 0.0, math.exp(total), {"underflow_factor": t})
        total += v
        mag += abs(v)
    cv = _bracket_from_log(total, mag, K, {"terms": K, "tail_bound": tail, "variance_hr": 2 * kap})
    return CertifiedValue(cv.value, cv.lower * math.exp(-tail), cv.upper, cv.meta)


# -- reports ---------------------------------------------------------------------


def power_law_check(gen: GeneratorRule, scale: ScaleRule, witness: Optional[WitnessRule] = None,
                    r_list: Sequence = (Fraction(1, 2), 2, 3), **kw) -> dict:
    """Compare ``S(r)`` with ``S(1)**r`` for the divisible family ``Exp(r h_m(x^T(m)))``."""
    witness = witness or WitnessRule()
    base = invariant(Divisible(gen, scale, 1), witness, **kw)
    rows = []
    for r in r_list:
        r = as_ratio(r)
        cur = invariant(Divisible(gen, scale, r), witness, **kw)
        pred_lo = _pow(base.lower, r)
        pred_hi = _pow(base.upper, r)
        pred = _pow(base.value, r)
        ok = cur.lower <= pred_hi and pred_lo <= cur.upper
        rows.append({
            "r": float(r), "value": cur.value, "lower": cur.lower, "upper": cur.upper,
            "predicted": pred, "predicted_lower": pred_lo, "predicted_upper": pred_hi,
            "gap": abs(cur.value - pred), "allowed": (cur.upper - cur.lower) + (pred_hi - pred_lo),
            "pass": ok,
        })
    return {"base": base.to_dict(), "rows": rows, "pass": all(row["pass"] for row in rows)}


def _pow(s: float, r) -> float:
    return 0.0 if s == 0.0 else math.exp(float(r) * math.log(s))


def multiplicativity_report(a: FamilySpec, b: FamilySpec, witness: Optional[WitnessRule] = None, **kw) -> dict:
    """Evaluate ``S(a)``, ``S(b)``, ``S(a (x) b)`` and test the tensor inequalities."""
    witness = (witness or WitnessRule()).bind(a)
    sa = invariant(a, witness, **kw)
    sb = invariant(b, witness, **kw)
    sab = invariant(tensor(a, b), witness, **kw)
    sandwich_left = sab.lower <= min(sa.upper, sb.upper)
    sandwich_right = sab.upper >= sa.lower * sb.lower
    zero_ok = True
    if sa.lower > 0:
        if sb.upper == 0.0:
            zero_ok = sab.upper == 0.0
        elif sb.lower > 0:
            zero_ok = sab.lower > 0
    report = {
        "a": sa.to_dict(), "b": sb.to_dict(), "tensor": sab.to_dict(),
        "sandwich": sandwich_left and sandwich_right,
        "zero_propagation": zero_ok,
        "product_matches": sab.lower <= sa.upper * sb.upper and sa.lower * sb.lower <= sab.upper,
    }
    if a == b:
        report["square_law"] = sab.lower <= sa.upper**2 and sa.lower**2 <= sab.upper
    if sa.lower >= 1.0 - 1e-12:
        report["absorption"] = sab.overlaps(sb)
    report["pass"] = report["sandwich"] and report["zero_propagation"] and report.get("square_law", True) \
        and report.get("absorption", True)
    return report


# -- sampled bounds on the invariant ---------------------------------------------


def _in_tails(gen: GeneratorRule, scale: ScaleRule, k_range: range) -> bool:
    return min(k_range) - 1 > max(len(gen.prefix), len(scale.prefix))


def _sequence_limits(gen: GeneratorRule, scale: ScaleRule, k_range: range) -> dict:
    """Limits of the sequences entering the moment lower bound.

    Uses exact structural limits when ``k_range`` lies past every prefix
    (constant tails, or an affine scale tending to infinity); otherwise the
    window is sampled and the result is labelled a diagnostic.
    """
    if _in_tails(gen, scale, k_range):
        h = gen.tail.to_float()
        mu2 = float(moment(h, 2))
        if scale.grows:
            return {"C": 0.0, "rho": 0.0, "lead": 0.0, "mode": "structural"}
        n = scale.b
        return {
            "C": 1.0 / (n * n),
            "rho": mu2 / n**4,
            "lead": real_defect(h, RationalAngle(1, n)),
            "mode": "structural",
        }
    Cs, rhos, leads = [], [], []
    for k in k_range:
        if k < 2:
            continue
        mu_prev = float(moment(gen.h(k - 1).to_float(), 2))
        mu_k = float(moment(gen.h(k).to_float(), 2))
        nk, nk1 = scale.n(k), scale.n(k - 1)
        Cs.append(mu_prev / (mu_k * nk * nk) if mu_k > 0 else math.inf)
        rhos.append(mu_prev / (nk * nk * nk1 * nk1))
        leads.append(real_defect(gen.h(k).to_float(), RationalAngle(1, scale.n(k + 1))))
    return {"C": max(Cs), "rho": max(rhos), "lead": max(leads), "mode": "sampled",
            "rho_sequence": rhos}


def moment_lower_bound(gen: GeneratorRule, scale: ScaleRule, k_range: range = range(2, 41)) -> dict:
    """Lower bound ``exp(-limsup Re(1 - h_k(e^{2 pi i/n(k+1)}))) exp(-M rho)``, ``M = 2 pi^2/(1 - C')``."""
    lim = _sequence_limits(gen, scale, k_range)
    C, rho = lim["C"], lim["rho"]
    out = {"C": C, "rho": rho, "lead": lim["lead"], "mode": lim["mode"], "window": [min(k_range), max(k_range)]}
    if not C < 1.0:
        return out | {"bound": None, "hypothesis_failed": "C >= 1"}
    c_prime = C + (1.0 - C) * 1e-6
    M = 2.0 * math.pi**2 / (1.0 - c_prime)
    bound = math.exp(-lim["lead"]) * math.exp(-M * rho)
    return out | {"bound": bound, "M": M, "equality": rho == 0.0}


def _eventual_U(gen: GeneratorRule, scale: ScaleRule, R, k_range: range) -> tuple:
    if _in_tails(gen, scale, k_range):
        if scale.grows:
            return 0.0, "structural"
        return float(mass_U(gen.tail, scale.b, R)), "structural"
    return min(float(mass_U(gen.h(k), scale.n(k + 1), R)) for k in k_range), "sampled"


def support_mass_upper_bound(gen: GeneratorRule, scale: ScaleRule, R, k_range: range = range(2, 41)) -> dict:
    """Upper bound ``exp(-2 eta sin^2(pi/R))`` with ``eta = liminf_k U(h_k, n(k+1), R)``."""
    R = as_ratio(R)
    eta, mode = _eventual_U(gen, scale, R, k_range)
    out = {"R": float(R), "eta": eta, "mode": mode, "window": [min(k_range), max(k_range)]}
    if eta <= 0.0:
        return out | {"bound": None, "flat": True}
    return out | {"bound": math.exp(-2.0 * eta * math.sin(math.pi / float(R)) ** 2), "flat": False}


def rate_separation_check(gen: GeneratorRule, scale: ScaleRule, R_grid: Sequence = (Fraction(3, 2), 2, 3, 4, 8, 16, 64),
                          k_range: range = range(2, 41), growth_factor: float = 4.0) -> dict:
    """Check the moment, growth and support-mass hypotheses that force ``0 < S < 1``.

    When every hypothesis holds the family ``Exp(r h_m(x^T(m)))`` has pairwise
    distinct invariants ``S**r`` and so pairwise non-isomorphic members.
    """
    finite = all(len(h) > 0 for h in gen.all_polys())
    lim = _sequence_limits(gen, scale, k_range)
    hyp_b = lim["C"] < 1.0
    if lim["mode"] == "structural":
        hyp_c = math.isfinite(lim["rho"])
    else:
        seq = lim["rho_sequence"]
        half = len(seq) // 2
        hyp_c = max(seq[half:]) <= growth_factor * max(seq[:half] or seq)
    uppers = [support_mass_upper_bound(gen, scale, R, k_range) for R in R_grid]
    hyp_d = any(u["bound"] is not None for u in uppers)
    report = {
        "hypotheses": {"finite_second_moment": finite, "ratio_limsup_below_one": hyp_b,
                       "moment_growth_bounded": hyp_c, "support_mass_positive": hyp_d},
        "mode": lim["mode"],
        "support_mass": uppers,
    }
    if finite and hyp_b and hyp_c and hyp_d:
        lo = moment_lower_bound(gen, scale, k_range)
        hi = min(u["bound"] for u in uppers if u["bound"] is not None)
        report |= {"lower": lo["bound"], "upper": hi,
                   "inside_unit_interval": lo["bound"] is not None and lo["bound"] > 0 and hi < 1,
                   "conclusion": "members pairwise non-isomorphic"}
    else:
        report |= {"lower": None, "upper": None, "inside_unit_interval": False, "conclusion": "inconclusive"}
    return report


def default_witness(spec: FamilySpec) -> WitnessRule:
    return WitnessRule().bind(spec)


__all__ = [
    "CertifiedValue",
    "WitnessRule",
    "closed_form_divisible",
    "closed_form_rational",
    "constant_in_l",
    "default_witness",
    "invariant",
    "level_inf",
    "moment_lower_bound",
    "multiplicativity_report",
    "partial_S",
    "power_law_check",
    "rate_separation_check",
    "support_mass_upper_bound",
]
