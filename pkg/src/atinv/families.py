"""Finite rules describing infinite sequences ``(P_m)`` of normalized nonnegative polynomials.

Every family is a frozen dataclass. Terms are indexed from ``m = 1``. The
scale ``T(m) = n(1) n(2) ... n(m)`` is kept as an unbounded Python integer;
only materializing a term (which turns ``T(m)`` into an exponent) enforces the
exponent range of :mod:`atinv.laurent`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional, Union

from .laurent import (
    EXACT,
    FLOAT,
    MAX_EXPONENT,
    LaurentPoly,
    RationalAngle,
    exact_zero_at,
    exp_distribution,
    modulus_defect,
    multiply,
    opposite,
    real_defect,
)

DEFAULT_SUPPORT_CAP = 2**20
DEFAULT_TOL = 1e-12

# ln of the smallest positive double; stands in for log(0) when a factor
# underflows in floating point without being provably zero.
LOG_TINY = math.log(5e-324)


class SpecError(ValueError):
    """Invalid family description."""


class MaterializationError(ValueError):
    """Refused to build a term whose support would exceed the configured cap."""


def as_ratio(x) -> Fraction:
    """Parse a rate parameter; JSON floats are read through their decimal text."""
    if isinstance(x, dict):
        return Fraction(int(x["num"]), int(x["den"]))
    if isinstance(x, float):
        return Fraction(str(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def ratio_to_json(x: Fraction):
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else {"num": x.numerator, "den": x.denominator}


def poly_to_json(f: LaurentPoly) -> dict:
    if f.is_exact:
        return {"coeffs": [[e, ratio_to_json(c)] for e, c in f.items()]}
    return {"coeffs": [[e, c] for e, c in f.items()], "mode": FLOAT}


def poly_from_json(d: dict) -> LaurentPoly:
    try:
        pairs = d["coeffs"]
    except (KeyError, TypeError) as exc:
        raise SpecError(f"polynomial needs a 'coeffs' list: {d!r}") from exc
    mode = d.get("mode")
    items = []
    for e, c in pairs:
        if isinstance(c, dict):
            c = as_ratio(c)
        items.append((int(e), c))
    return LaurentPoly(items, mode)


# -- scale and generator rules ---------------------------------------------------


@dataclass(frozen=True)
class ScaleRule:
    """``n(m)``: an explicit prefix followed by the affine tail ``a*m + b``."""

    a: int = 0
    b: int = 2
    prefix: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(v) for v in self.prefix))
        if self.a < 0 or self.b < 2:
            raise SpecError("affine tail needs a >= 0 and b >= 2")
        if any(v < 2 for v in self.prefix):
            raise SpecError("every n(m) must be at least 2")

    @classmethod
    def constant(cls, n: int) -> "ScaleRule":
        return cls(a=0, b=int(n))

    @property
    def constant_value(self) -> Optional[int]:
        return self.b if self.a == 0 and not self.prefix else None

    def n(self, m: int) -> int:
        if m < 1:
            raise ValueError("indices start at 1")
        if m <= len(self.prefix):
            return self.prefix[m - 1]
        return self.a * m + self.b

    def T(self, m: int) -> int:
        return _scale_product(self, m)

    def min_n_from(self, m: int) -> int:
        """``min_{j >= m} n(j)``; the tail is nondecreasing."""
        m = max(m, 1)
        vals = list(self.prefix[m - 1:])
        vals.append(self.a * max(m, len(self.prefix) + 1) + self.b)
        return min(vals)

    def nondecreasing_from(self, m: int) -> bool:
        seq = [self.n(j) for j in range(max(m, 1), len(self.prefix) + 2)]
        return all(x <= y for x, y in zip(seq, seq[1:]))

    @property
    def grows(self) -> bool:
        return self.a > 0

    def to_dict(self) -> dict:
        if self.constant_value is not None:
            return {"kind": "constant", "n": self.b}
        return {"kind": "affine", "a": self.a, "b": self.b, "prefix": list(self.prefix)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScaleRule":
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(int(d["n"]))
        if kind == "affine":
            return cls(a=int(d.get("a", 0)), b=int(d["b"]), prefix=tuple(d.get("prefix", ())))
        raise SpecError(f"unknown scale rule {kind!r}")


@lru_cache(maxsize=4096)
def _scale_product(rule: ScaleRule, m: int) -> int:
    if m <= 0:
        return 1
    return _scale_product(rule, m - 1) * rule.n(m)


@dataclass(frozen=True)
class GeneratorRule:
    """``h_m``: an explicit prefix list followed by a constant tail."""

    tail: LaurentPoly
    prefix: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        for h in self.all_polys():
            if not len(h) or not h.is_nonnegative():
                raise SpecError("generators need nonnegative coefficients and nonempty support")

    @classmethod
    def constant(cls, h: LaurentPoly) -> "GeneratorRule":
        return cls(tail=h)

    def h(self, m: int) -> LaurentPoly:
        if m < 1:
            raise ValueError("indices start at 1")
        return self.prefix[m - 1] if m <= len(self.prefix) else self.tail

    def all_polys(self) -> list:
        return list(self.prefix) + [self.tail]

    @property
    def is_constant(self) -> bool:
        return not self.prefix

    def map(self, fn) -> "GeneratorRule":
        return GeneratorRule(tail=fn(self.tail), prefix=tuple(fn(h) for h in self.prefix))

    def to_dict(self) -> dict:
        if self.is_constant:
            return {"kind": "constant", "h": poly_to_json(self.tail)}
        return {"kind": "list", "prefix": [poly_to_json(h) for h in self.prefix], "tail": poly_to_json(self.tail)}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorRule":
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(poly_from_json(d["h"]))
        if kind == "list":
            return cls(tail=poly_from_json(d["tail"]), prefix=tuple(poly_from_json(p) for p in d["prefix"]))
        raise SpecError(f"unknown generator rule {kind!r}")


@dataclass(frozen=True)
class IndexMap:
    """Strictly increasing affine index function ``u(i) = a*i + b`` with ``u(1) >= 1``."""

    a: int = 1
    b: int = 0

    def __post_init__(self):
        if self.a < 1:
            raise SpecError("telescoping index map must be strictly increasing")
        if self.a + self.b < 1:
            raise SpecError("telescoping index map needs u(1) >= 1")

    def __call__(self, i: int) -> int:
        return self.a * i + self.b

    def block(self, i: int) -> range:
        return range(self(i), self(i + 1))

    def first_block_at_or_after(self, m: int) -> int:
        """Smallest ``i >= 1`` with ``u(i) >= m``."""
        return max(1, -((self.b - m) // self.a))


def _check_normalized(h: LaurentPoly, what: str) -> None:
    s = h.value_at_one()
    ok = s == 1 if h.is_exact else abs(s - 1) <= 1e-12
    if not ok:
        raise SpecError(f"{what} must satisfy h(1) = 1, got {s}")


# -- family specs ----------------------------------------------------------------


class FamilySpec:
    """Base class for sequence rules. Subclasses are frozen dataclasses."""

    kind = "abstract"

    def term(self, m: int, tol: float = DEFAULT_TOL, cap: int = DEFAULT_SUPPORT_CAP) -> LaurentPoly:
        raise NotImplementedError

    def log_modulus(self, m: int, z: RationalAngle) -> float:
        raise NotImplementedError

    def support_size(self, m: int) -> Optional[int]:
        """Upper estimate of the support size of term ``m`` (None if unknown)."""
        raise NotImplementedError

    def lattice(self, m: int) -> Optional[int]:
        """``L`` such that term ``m`` lies in ``x**(L Z)`` and ``L(m) | L(m')`` for ``m' >= m``."""
        raise NotImplementedError

    def unit_from(self, z: RationalAngle, start: int, horizon: int = 512) -> Optional[int]:
        """Smallest ``m0 >= start`` after which every factor ``|P_m(z)|`` equals 1 exactly."""
        for m in range(start, start + horizon):
            L = self.lattice(m)
            if L is None:
                return None
            if L % z.q == 0:
                return m
        return None

    def scale_rule(self) -> Optional[ScaleRule]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def materialize(self, m: int, tol: float = DEFAULT_TOL, cap: int = DEFAULT_SUPPORT_CAP) -> LaurentPoly:
        size = self.support_size(m)
        if size is not None and size > cap:
            raise MaterializationError(f"term {m} of {self.kind} family has ~{size} support points (cap {cap})")
        return self.term(m, tol, cap)


def _lattice_from_scale(scale: ScaleRule, m: int) -> int:
    return scale.T(m)


@dataclass(frozen=True)
class Divisible(FamilySpec):
    """``P_m = Exp(r h_m(x**T(m))) = exp(r (h_m(x**T(m)) - 1))`` (compound Poisson terms)."""

    gen: GeneratorRule
    scale: ScaleRule
    r: Fraction = Fraction(1)
    kind = "divisible"

    def __post_init__(self):
        object.__setattr__(self, "r", as_ratio(self.r))
        if self.r <= 0:
            raise SpecError("r must be positive")
        for h in self.gen.all_polys():
            _check_normalized(h, "divisible generator")
            if h[0] != 0:
                raise SpecError("divisible generators must have zero constant term")

    def term(self, m, tol=DEFAULT_TOL, cap=DEFAULT_SUPPORT_CAP):
        H = self.gen.h(m).to_float().compose_power(_bounded(self.scale.T(m))) * float(self.r)
        try:
            return exp_distribution(H, tol, max_support=cap)
        except MemoryError as exc:
            raise MaterializationError(str(exc)) from exc

    def log_modulus(self, m, z):
        w = z.power(self.scale.T(m))
        if w.is_one:
            return 0.0
        return -float(self.r) * real_defect(self.gen.h(m), w)

    def support_size(self, m):
        return None

    def lattice(self, m):
        return self.scale.T(m)

    def scale_rule(self):
        return self.scale

    def with_r(self, r) -> "Divisible":
        return Divisible(self.gen, self.scale, as_ratio(r))

    def to_dict(self):
        return {"kind": self.kind, "gen": self.gen.to_dict(), "scale": self.scale.to_dict(), "r": ratio_to_json(self.r)}


@dataclass(frozen=True)
class Rational(FamilySpec):
    """``P_m = h_m(r x**T(m)) / h_m(r)``."""

    gen: GeneratorRule
    scale: ScaleRule
    r: Fraction = Fraction(1)
    kind = "rational"

    def __post_init__(self):
        object.__setattr__(self, "r", as_ratio(self.r))
        if self.r <= 0:
            raise SpecError("r must be positive")

    def base(self, m: int) -> LaurentPoly:
        """``h_m(r x) / h_m(r)``, the normalized generator before rescaling the variable."""
        h = self.gen.h(m)
        g = h.scale_variable(self.r) if h.is_exact else h.scale_variable(float(self.r))
        return g / g.value_at_one()

    def term(self, m, tol=DEFAULT_TOL, cap=DEFAULT_SUPPORT_CAP):
        return self.base(m).compose_power(_bounded(self.scale.T(m)))

    def log_modulus(self, m, z):
        w = z.power(self.scale.T(m))
        if w.is_one:
            return 0.0
        h = self.gen.h(m)
        if exact_zero_at(h, w, self.r):
            return -math.inf
        return half_log1m(modulus_defect(h, w, self.r))

    def support_size(self, m):
        return len(self.gen.h(m))

    def lattice(self, m):
        return self.scale.T(m)

    def scale_rule(self):
        return self.scale

    def with_r(self, r) -> "Rational":
        return Rational(self.gen, self.scale, as_ratio(r))

    def to_dict(self):
        return {"kind": self.kind, "gen": self.gen.to_dict(), "scale": self.scale.to_dict(), "r": ratio_to_json(self.r)}


@dataclass(frozen=True)
class Explicit(FamilySpec):
    """Periodic rule: ``P_m = cycle[m mod p](x**T(m))``, or ``cycle[m mod p]`` itself without a scale.

    With ``cycle = (A, B)`` even indices use ``A`` and odd indices ``B``.
    """

    cycle: tuple
    scale: Optional[ScaleRule] = None
    kind = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "cycle", tuple(self.cycle))
        if not self.cycle:
            raise SpecError("explicit family needs at least one polynomial")
        for g in self.cycle:
            if not g.is_nonnegative():
                raise SpecError("explicit terms need nonnegative coefficients")
            _check_normalized(g, "explicit term")

    @classmethod
    def trivial(cls) -> "Explicit":
        return cls(cycle=(LaurentPoly.one(),))

    @property
    def period(self) -> int:
        return len(self.cycle)

    def base(self, m: int) -> LaurentPoly:
        return self.cycle[m % self.period]

    def _power(self, m: int) -> int:
        return self.scale.T(m) if self.scale is not None else 1

    def term(self, m, tol=DEFAULT_TOL, cap=DEFAULT_SUPPORT_CAP):
        if m < 1:
            raise ValueError("indices start at 1")
        return self.base(m).compose_power(_bounded(self._power(m)))

    def log_modulus(self, m, z):
        g = self.base(m)
        if g.support() == [0]:
            return 0.0
        w = z.power(self._power(m))
        if w.is_one:
            return 0.0
        if exact_zero_at(g, w):
            return -math.inf
        return half_log1m(modulus_defect(g, w))

    def support_size(self, m):
        return len(self.base(m))

    def lattice(self, m):
        if all(g.support() == [0] for g in self.cycle):
            return 1
        return self.scale.T(m) if self.scale is not None else None

    def unit_from(self, z, start, horizon=512):
        if all(g.support() == [0] for g in self.cycle):
            return start
        return super().unit_from(z, start, horizon)

    def scale_rule(self):
        return self.scale

    def to_dict(self):
        return {
            "kind": self.kind,
            "cycle": [poly_to_json(g) for g in self.cycle],
            "scale": None if self.scale is None else self.scale.to_dict(),
        }


@dataclass(frozen=True)
class Tensor(FamilySpec):
    """Termwise product ``P_m Q_m`` of two families."""

    left: FamilySpec
    right: FamilySpec
    kind = "tensor"

    def term(self, m, tol=DEFAULT_TOL, cap=DEFAULT_SUPPORT_CAP):
        a = self.left.materialize(m, tol / 2, cap)
        b = self.right.materialize(m, tol / 2, cap)
        if a.mode != b.mode:
            a, b = a.to_float(), b.to_float()
        return multiply(a, b)

    def log_modulus(self, m, z):
        return self.left.log_modulus(m, z) + self.right.log_modulus(m, z)

    def support_size(self, m):
        a, b = self.left.support_size(m), self.right.support_size(m)
        return None if a is None or b is None else a * b

    def lattice(self, m):
        a, b = self.left.lattice(m), self.right.lattice(m)
        return None if a is None or b is None else math.gcd(a, b)

    def unit_from(self, z, start, horizon=512):
        a = self.left.unit_from(z, start, horizon)
        b = self.right.unit_from(z, start, horizon)
        return None if a is None or b is None else max(a, b)

    def scale_rule(self):
        a, b = self.left.scale_rule(), self.right.scale_rule()
        if a is None:
            return b
        if b is None or a == b:
            return a
        return None

    def to_dict(self):
        return {"kind": self.kind, "left": self.left.to_dict(), "right": self.right.to_dict()}


@dataclass(frozen=True)
class Telescoped(FamilySpec):
    """Consecutive products ``P_u(i) ... P_{u(i+1)-1}`` of an inner family."""

    inner: FamilySpec
    u: IndexMap = field(default_factory=IndexMap)
    kind = "telescoped"

    def term(self, i, tol=DEFAULT_TOL, cap=DEFAULT_SUPPORT_CAP):
        block = self.u.block(i)
        out = None
        for m in block:
            p = self.inner.materialize(m, tol / len(block), cap)
            if out is not None and out.mode != p.mode:
                out, p = out.to_float(), p.to_float()
            out = p if out is None else multiply(out, p)
            if len(out) > cap:
                raise MaterializationError(f"telescoped block {i} exceeds {cap} support points")
        return out

    def log_modulus(self, i, z):
        return sum(self.inner.log_modulus(m, z) for m in self.u.block(i))

    def support_size(self, i):
        total = 1
        for m in self.u.block(i):
            s = self.inner.support_size(m)
            if s is None:
                return None
            total *= s
        return total

    def lattice(self, i):
        return self.inner.lattice(self.u(i))

    def unit_from(self, z, start, horizon=512):
        m0 = self.inner.unit_from(z, self.u(start), horizon)
        return None if m0 is None else self.u.first_block_at_or_after(m0)

    def scale_rule(self):
        return self.inner.scale_rule()

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict(), "u": {"a": self.u.a, "b": self.u.b}}


def half_log1m(defect: float) -> float:
    """``0.5 * ln(1 - defect)``, i.e. ln|P| from the squared-modulus defect."""
    if defect >= 1.0:
        return LOG_TINY
    return min(0.0, 0.5 * math.log1p(-defect))


def _bounded(T: int) -> int:
    if T > MAX_EXPONENT:
        raise OverflowError(f"scale {T} exceeds the exponent range; use log_modulus_at")
    return T


# -- public operations -----------------------------------------------------------


def scale_product(spec: Union[FamilySpec, ScaleRule], m: int) -> int:
    """``T(m) = n(1) ... n(m)``, refused beyond the exponent range."""
    if m < 1:
        raise ValueError("m must be at least 1")
    rule = spec if isinstance(spec, ScaleRule) else spec.scale_rule()
    if rule is None:
        raise SpecError("family has no single scale rule")
    return _bounded(rule.T(m))


def term(spec: FamilySpec, m: int, tol: float = DEFAULT_TOL, cap: int = DEFAULT_SUPPORT_CAP) -> LaurentPoly:
    return spec.materialize(m, tol, cap)


def log_modulus_at(spec: FamilySpec, m: int, z: RationalAngle) -> float:
    """``ln |P_m(z)|`` without materializing ``P_m``; ``-inf`` marks an exact zero."""
    return spec.log_modulus(m, z)


def tensor(a: FamilySpec, b: FamilySpec) -> Tensor:
    return Tensor(a, b)


def telescope(spec: FamilySpec, u: IndexMap) -> Telescoped:
    return Telescoped(spec, u)


def opposite_family(spec: FamilySpec) -> FamilySpec:
    """The family of reflected terms ``P_m(1/x)``."""
    if isinstance(spec, Rational):
        return Rational(spec.gen.map(opposite), spec.scale, 1 / spec.r)
    if isinstance(spec, Divisible):
        return Divisible(spec.gen.map(opposite), spec.scale, spec.r)
    if isinstance(spec, Explicit):
        return Explicit(tuple(opposite(g) for g in spec.cycle), spec.scale)
    if isinstance(spec, Tensor):
        return Tensor(opposite_family(spec.left), opposite_family(spec.right))
    if isinstance(spec, Telescoped):
        return Telescoped(opposite_family(spec.inner), spec.u)
    raise SpecError(f"no reflection for {type(spec).__name__}")


def iter_terms(spec: FamilySpec, start: int, stop: int, tol: float = DEFAULT_TOL) -> Iterator[LaurentPoly]:
    for m in range(start, stop):
        yield spec.materialize(m, tol)


def support_set(h: LaurentPoly, n: int, R) -> set:
    """Support points of ``h`` lying in ``U_t (t n + [n/R, n (1 - 1/R)])`` (closed intervals)."""
    R = as_ratio(R)
    if n < 2 or R <= 1:
        raise ValueError("need n >= 2 and R > 1")
    out = set()
    for j in h.support():
        rho = j % n
        if rho * R >= n and (n - rho) * R >= n:
            out.add(j)
    return out


def mass_U(h: LaurentPoly, n: int, R):
    """Coefficient mass of ``h`` over :func:`support_set`."""
    S = support_set(h, n, R)
    zero = Fraction(0) if h.is_exact else 0.0
    return sum((h[j] for j in S), zero)


# -- JSON ------------------------------------------------------------------------


def spec_from_dict(d: dict) -> FamilySpec:
    if not isinstance(d, dict):
        raise SpecError(f"family spec must be an object, got {type(d).__name__}")
    kind = d.get("kind")
    try:
        if kind == "divisible":
            return Divisible(GeneratorRule.from_dict(d["gen"]), ScaleRule.from_dict(d["scale"]), as_ratio(d.get("r", 1)))
        if kind == "rational":
            return Rational(GeneratorRule.from_dict(d["gen"]), ScaleRule.from_dict(d["scale"]), as_ratio(d.get("r", 1)))
        if kind == "explicit":
            scale = d.get("scale")
            return Explicit(tuple(poly_from_json(p) for p in d["cycle"]), None if scale is None else ScaleRule.from_dict(scale))
        if kind == "tensor":
            return Tensor(spec_from_dict(d["left"]), spec_from_dict(d["right"]))
        if kind == "telescoped":
            u = d.get("u", {})
            return Telescoped(spec_from_dict(d["inner"]), IndexMap(int(u.get("a", 1)), int(u.get("b", 0))))
    except KeyError as exc:
        raise SpecError(f"{kind} family is missing field {exc}") from exc
    except (TypeError, ZeroDivisionError) as exc:
        raise SpecError(f"malformed {kind} family: {exc}") from exc
    raise SpecError(f"unknown family kind {kind!r}")


def spec_to_dict(spec: FamilySpec) -> dict:
    return spec.to_dict()


# -- convenient constructors -----------------------------------------------------


def poly(coeffs: dict) -> LaurentPoly:
    return LaurentPoly(coeffs)


def pair_rational(r, n: int = 2) -> Rational:
    """The family ``(1 + r x**T(m)) / (1 + r)`` with constant scale ``n``."""
    return Rational(GeneratorRule.constant(LaurentPoly({0: 1, 1: 1})), ScaleRule.constant(n), as_ratio(r))


def monomial_divisible(r=1, n: int = 2) -> Divisible:
    """``Exp(r x**T(m))`` with constant scale ``n``."""
    return Divisible(GeneratorRule.constant(LaurentPoly({1: 1})), ScaleRule.constant(n), as_ratio(r))


def alternating_pair(tau) -> tuple:
    """The two interleaved systems built from ``(1 + 2y)/3`` and ``(1 + tau y)/(1 + tau)``, ``y = x**(2**m)``."""
    tau = as_ratio(tau)
    A = LaurentPoly({0: Fraction(1, 3), 1: Fraction(2, 3)})
    B = LaurentPoly({0: 1 / (1 + tau), 1: tau / (1 + tau)})
    scale = ScaleRule.constant(2)
    return Explicit((A, B), scale), Explicit((B, A), scale)
