"""Sparse Laurent polynomials over exact rationals or binary floating point.

A :class:`LaurentPoly` is an immutable finite map ``exponent -> coefficient``.
Two arithmetic modes exist: ``"exact"`` (coefficients are
:class:`fractions.Fraction`) and ``"float"`` (coefficients are ``float``).
Mixing modes in one operation is an error; convert explicitly with
:meth:`LaurentPoly.to_float`.

Points of the unit circle are :class:`RationalAngle` values ``exp(2 pi i p/q)``
so that powers ``z**T`` are reduced exactly in integer arithmetic before any
trigonometric function is evaluated.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

Number = Union[int, Fraction, float]

EXACT = "exact"
FLOAT = "float"

# Exponents beyond this bound are refused rather than silently carried.
MAX_EXPONENT = 2**62


class ModeError(ValueError):
    """Operands live in different arithmetic modes."""


class NormalizationError(ValueError):
    """A distribution-valued input does not satisfy f(1) = 1."""


def _check_exponent(e: int) -> int:
    if not isinstance(e, int) or isinstance(e, bool):
        raise TypeError(f"exponent must be an int, got {type(e).__name__}")
    if abs(e) > MAX_EXPONENT:
        raise OverflowError(f"exponent {e} outside the supported range +/-2**62")
    return e


def _coerce(c: Number, mode: str) -> Union[Fraction, float]:
    if mode == EXACT:
        if isinstance(c, float):
            raise ModeError("float coefficient in an exact polynomial")
        return Fraction(c)
    return float(c)


@dataclass(frozen=True)
class RationalAngle:
    """The circle point ``exp(2 pi i p/q)`` with ``0 <= p < q`` and ``gcd(p, q) = 1``."""

    p: int
    q: int

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("denominator must be positive")
        g = math.gcd(self.p, self.q)
        object.__setattr__(self, "p", (self.p // g) % (self.q // g))
        object.__setattr__(self, "q", self.q // g)

    @classmethod
    def from_fraction(cls, x: Fraction) -> "RationalAngle":
        x = Fraction(x)
        return cls(x.numerator, x.denominator)

    def power(self, t: int) -> "RationalAngle":
        """The point ``z**t``; exact for arbitrarily large ``t``."""
        return RationalAngle(self.p * t, self.q)

    def turns(self, t: int = 1) -> float:
        """Fractional part of ``t*p/q`` mapped into ``[-1/2, 1/2)``."""
        r = (self.p * t) % self.q
        if 2 * r >= self.q:
            r -= self.q
        return r / self.q

    @property
    def is_one(self) -> bool:
        return self.p == 0

    def as_complex(self) -> complex:
        return cmath.exp(2j * math.pi * self.turns())

    def to_dict(self) -> dict:
        return {"num": self.p, "den": self.q}

    def __str__(self) -> str:
        return f"exp(2πi·{self.p}/{self.q})"


class LaurentPoly:
    """Immutable sparse Laurent polynomial ``sum a_t x**t``.

    >>> f = LaurentPoly({0: Fraction(1, 2), 1: Fraction(1, 2)})
    >>> (f * f).coeffs[1]
    Fraction(1, 2)
    """

    __slots__ = ("_coeffs", "_mode", "_hash")

    def __init__(self, coeffs: Mapping[int, Number] | Iterable = (), mode: str | None = None):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        items = list(items)
        if mode is None:
            mode = FLOAT if any(isinstance(c, float) for _, c in items) else EXACT
        if mode not in (EXACT, FLOAT):
            raise ValueError(f"unknown arithmetic mode {mode!r}")
        acc: dict[int, Union[Fraction, float]] = {}
        for e, c in items:
            e = _check_exponent(e)
            acc[e] = acc.get(e, 0) + _coerce(c, mode)
        self._coeffs = {e: c for e, c in sorted(acc.items()) if c != 0}
        self._mode = mode
        self._hash = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def monomial(cls, exponent: int, coeff: Number = 1, mode: str | None = None) -> "LaurentPoly":
        return cls({exponent: coeff}, mode)

    @classmethod
    def one(cls, mode: str = EXACT) -> "LaurentPoly":
        return cls({0: 1}, mode)

    @classmethod
    def _raw(cls, coeffs: dict, mode: str) -> "LaurentPoly":
        # Trusted constructor: keys already checked, zeros already dropped.
        obj = cls.__new__(cls)
        obj._coeffs = dict(sorted(coeffs.items()))
        obj._mode = mode
        obj._hash = None
        return obj

    # -- basic protocol -------------------------------------------------------

    @property
    def coeffs(self) -> dict:
        return dict(self._coeffs)

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def is_exact(self) -> bool:
        return self._mode == EXACT

    def items(self):
        return self._coeffs.items()

    def support(self) -> list[int]:
        return list(self._coeffs)

    def __len__(self) -> int:
        return len(self._coeffs)

    def __getitem__(self, e: int):
        return self._coeffs.get(e, 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self._mode == other._mode and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._mode, tuple(self._coeffs.items())))
        return self._hash

    def __repr__(self) -> str:
        if not self._coeffs:
            return "LaurentPoly(0)"
        terms = " + ".join(f"{c}·x^{e}" for e, c in self._coeffs.items())
        return f"LaurentPoly({terms}; {self._mode})"

    @property
    def min_exponent(self) -> int:
        if not self._coeffs:
            raise ValueError("zero polynomial has no support")
        return next(iter(self._coeffs))

    @property
    def max_exponent(self) -> int:
        if not self._coeffs:
            raise ValueError("zero polynomial has no support")
        return next(reversed(self._coeffs))

    def spread(self) -> int:
        """Largest difference between two exponents of the support."""
        return self.max_exponent - self.min_exponent if self._coeffs else 0

    def is_nonnegative(self) -> bool:
        return all(c > 0 for c in self._coeffs.values())

    def to_float(self) -> "LaurentPoly":
        if self._mode == FLOAT:
            return self
        return LaurentPoly._raw({e: float(c) for e, c in self._coeffs.items()}, FLOAT)

    def value_at_one(self):
        """f(1), i.e. the coefficient sum."""
        return sum(self._coeffs.values(), Fraction(0) if self.is_exact else 0.0)

    # -- algebra --------------------------------------------------------------

    def __mul__(self, other):
        if isinstance(other, LaurentPoly):
            return multiply(self, other)
        if isinstance(other, (int, Fraction, float)):
            if self.is_exact and isinstance(other, float):
                raise ModeError("float scalar times exact polynomial")
            c = _coerce(other, self._mode)
            return LaurentPoly._raw({e: a * c for e, a in self._coeffs.items() if a * c != 0}, self._mode)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, LaurentPoly):
            return NotImplemented
        c = _coerce(scalar, self._mode)
        return LaurentPoly._raw({e: a / c for e, a in self._coeffs.items()}, self._mode)

    def __add__(self, other: "LaurentPoly") -> "LaurentPoly":
        _same_mode(self, other)
        acc = dict(self._coeffs)
        for e, c in other._coeffs.items():
            acc[e] = acc.get(e, 0) + c
        return LaurentPoly._raw({e: c for e, c in acc.items() if c != 0}, self._mode)

    def __neg__(self) -> "LaurentPoly":
        return LaurentPoly._raw({e: -c for e, c in self._coeffs.items()}, self._mode)

    def __sub__(self, other: "LaurentPoly") -> "LaurentPoly":
        return self + (-other)

    def compose_power(self, k: int) -> "LaurentPoly":
        """Substitute ``x -> x**k``."""
        return LaurentPoly._raw({_check_exponent(e * k): c for e, c in self._coeffs.items()}, self._mode)

    def scale_variable(self, r) -> "LaurentPoly":
        """Substitute ``x -> r*x`` (coefficients ``a_t r**t``)."""
        r = _coerce(r, self._mode)
        return LaurentPoly._raw({e: c * r**e for e, c in self._coeffs.items()}, self._mode)

    def shift(self, k: int) -> "LaurentPoly":
        return LaurentPoly._raw({_check_exponent(e + k): c for e, c in self._coeffs.items()}, self._mode)

    def __call__(self, x):
        """Evaluate at a (real or complex) point; ``x`` may not be zero for negative exponents."""
        return sum((c * x**e for e, c in self._coeffs.items()), 0)


def _same_mode(f: LaurentPoly, g: LaurentPoly) -> None:
    if f.mode != g.mode:
        raise ModeError(f"cannot combine {f.mode} and {g.mode} polynomials")


def multiply(f: LaurentPoly, g: LaurentPoly) -> LaurentPoly:
    """Exponent-wise convolution of two polynomials in the same mode."""
    _same_mode(f, g)
    if len(f) > len(g):
        f, g = g, f
    acc: dict[int, object] = {}
    gi = list(g.items())
    for e1, c1 in f.items():
        for e2, c2 in gi:
            e = e1 + e2
            acc[e] = acc.get(e, 0) + c1 * c2
    if acc:
        _check_exponent(min(acc))
        _check_exponent(max(acc))
    return LaurentPoly._raw({e: c for e, c in acc.items() if c != 0}, f.mode)


def product(polys: Iterable[LaurentPoly], mode: str = EXACT) -> LaurentPoly:
    out = None
    for p in polys:
        out = p if out is None else multiply(out, p)
    return LaurentPoly.one(mode) if out is None else out


def l1_norm(f: LaurentPoly):
    """Sum of absolute coefficient values (exact in exact mode)."""
    return sum((abs(c) for _, c in f.items()), Fraction(0) if f.is_exact else 0.0)


def opposite(f: LaurentPoly) -> LaurentPoly:
    """Reflect exponents, ``t -> -t``."""
    return LaurentPoly._raw({-e: c for e, c in f.items()}, f.mode)


def eval_at(f: LaurentPoly, z: RationalAngle, radius: Number = 1) -> complex:
    """Evaluate ``f(radius * z)`` for a circle point ``z``.

    Each ``z**t`` is reduced exactly before the trigonometric call, so large
    exponents lose no accuracy.
    """
    rad = float(radius)
    total = 0j
    for e, c in f.items():
        total += float(c) * rad**e * cmath.exp(2j * math.pi * z.turns(e))
    return total


def modulus_defect(f: LaurentPoly, z: RationalAngle, radius: Number = 1) -> float:
    """``1 - |f(radius*z)|**2 / f(radius)**2`` computed from pairwise sine terms.

    Uses ``|sum b_j w**j|**2 = (sum b_j)**2 - 4 sum_{j<j'} b_j b_j' sin**2(pi (j'-j) s)``
    which avoids the cancellation in ``1 - cos`` for angles close to zero.
    """
    rad = float(radius)
    b = [(e, float(c) * rad**e) for e, c in f.items()]
    total = sum(v for _, v in b)
    if total == 0:
        raise ValueError("polynomial vanishes at the radius")
    defect = 0.0
    for i, (e1, v1) in enumerate(b):
        for e2, v2 in b[i + 1:]:
            defect += v1 * v2 * math.sin(math.pi * z.turns(e2 - e1)) ** 2
    return 4.0 * defect / (total * total)


def modulus_squared_ratio(f: LaurentPoly, z: RationalAngle, radius: Number = 1) -> float:
    """``|f(radius*z)|**2 / f(radius)**2``."""
    return 1.0 - modulus_defect(f, z, radius)


def real_defect(f: LaurentPoly, z: RationalAngle) -> float:
    """``Re(f(1) - f(z)) = 2 sum a_j sin**2(pi j s)`` in cancellation-free form."""
    return 2.0 * sum(float(c) * math.sin(math.pi * z.turns(e)) ** 2 for e, c in f.items())


def exact_zero_at(f: LaurentPoly, z: RationalAngle, radius: Number = 1) -> bool:
    """True when ``f(radius*z) == 0`` can be decided exactly.

    Exact decisions are available for points of order dividing 4 (the values
    ``z**t`` are then in ``{1, i, -1, -i}``) with exact coefficients and radius.
    Everything else returns False: a small floating value is never promoted to
    an exact zero.
    """
    if not f.is_exact or isinstance(radius, float) or 4 % z.q != 0:
        return False
    r = Fraction(radius)
    units = {0: (1, 0), 1: (0, 1), 2: (-1, 0), 3: (0, -1)}
    step = 4 // z.q
    re = Fraction(0)
    im = Fraction(0)
    for e, c in f.items():
        u_re, u_im = units[(z.p * step * e) % 4]
        w = c * r**e
        re += w * u_re
        im += w * u_im
    return re == 0 and im == 0


# -- moments ---------------------------------------------------------------


def moment(f: LaurentPoly, order: int):
    """``sum a_t t**order``; exact in exact mode."""
    if order not in (1, 2, 4):
        raise ValueError("moment order must be 1, 2 or 4")
    zero = Fraction(0) if f.is_exact else 0.0
    return sum((c * e**order for e, c in f.items()), zero)


def _require_normalized(f: LaurentPoly) -> None:
    s = f.value_at_one()
    ok = s == 1 if f.is_exact else abs(s - 1.0) <= 1e-12
    if not ok:
        raise NormalizationError(f"expected f(1) = 1, got {s}")


def variance(f: LaurentPoly):
    """``mu_2(f) - mu_1(f)**2`` for a normalized ``f``."""
    _require_normalized(f)
    return moment(f, 2) - moment(f, 1) ** 2


def _pairwise(f: LaurentPoly, power: int):
    items = list(f.items())
    zero = Fraction(0) if f.is_exact else 0.0
    total = zero
    for i, (e1, c1) in enumerate(items):
        for e2, c2 in items[i + 1:]:
            total += c1 * c2 * (e2 - e1) ** power
    return total


def variance_pairwise(f: LaurentPoly):
    """``sum_{j<j'} a_j a_j' (j'-j)**2``; equals :func:`variance` for normalized ``f``."""
    _require_normalized(f)
    return _pairwise(f, 2)


def fourth_spread(f: LaurentPoly):
    """``sum_{j<j'} a_j a_j' (j'-j)**4 / 12``."""
    _require_normalized(f)
    return _pairwise(f, 4) / 12


def bhatia_davis_bound(f: LaurentPoly):
    """``(M - mu_1)(mu_1 - m)`` with ``M``, ``m`` the extreme exponents; bounds the variance."""
    if not len(f):
        raise ValueError("empty support")
    _require_normalized(f)
    mu1 = moment(f, 1)
    return (f.max_exponent - mu1) * (mu1 - f.min_exponent)


# -- compound Poisson ------------------------------------------------------


def poisson_tail_bound(lam: float, order: int) -> float:
    """Upper bound on ``exp(-lam) sum_{s>order} lam**s/s!`` (factorial tail)."""
    if order + 2 <= lam:
        return 1.0
    log_first = -lam + (order + 1) * math.log(lam) - math.lgamma(order + 2) if lam > 0 else -math.inf
    return math.exp(log_first) / (1.0 - lam / (order + 2))


def exp_distribution(H: LaurentPoly, tol: float, max_support: int = 2**20) -> LaurentPoly:
    """Truncation of ``exp(H - H(1)) = exp(-H(1)) sum_s H**s / s!``.

    Half of ``tol`` is spent on the series order (factorial tail on ``H(1)``),
    the other half on discarding the smallest coefficients. The dropped l1 mass
    is at most ``tol`` and the result has nonnegative coefficients.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    H = H.to_float()
    if any(c < 0 for _, c in H.items()):
        raise ValueError("Exp requires nonnegative coefficients")
    lam = H.value_at_one()
    if lam == 0:
        return LaurentPoly.one(FLOAT)
    order = 0
    while poisson_tail_bound(lam, order) > tol / 2:
        order += 1
    scale = math.exp(-lam)
    acc: dict[int, float] = {0: scale}
    power = LaurentPoly.one(FLOAT)
    for s in range(1, order + 1):
        power = multiply(power, H) / s
        if len(power) > max_support:
            raise MemoryError(f"Exp support exceeds {max_support} terms")
        for e, c in power.items():
            acc[e] = acc.get(e, 0.0) + scale * c
    # Drop the smallest coefficients while the discarded mass stays below tol/2.
    budget = tol / 2
    dropped = 0.0
    for e, c in sorted(acc.items(), key=lambda kv: kv[1]):
        if dropped + c > budget:
            break
        dropped += c
        del acc[e]
    return LaurentPoly._raw({e: c for e, c in acc.items() if c > 0}, FLOAT)

