"""
Outward-rounded interval arithmetic
Every operation widens its result by one ulp on each side, so the true range
of an expression over a box is always contained in its natural extension.
"""

import math
from dataclasses import dataclass

import numpy as np

from services.errors import DomainError


def _down(value):
    if math.isinf(value) or math.isnan(value):
        return value
    return float(np.nextafter(value, -np.inf))


def _up(value):
    if math.isinf(value) or math.isnan(value):
        return value
    return float(np.nextafter(value, np.inf))


def _product(a, b):
    # 0 * inf is 0 for range bounds
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, value):
        value = float(value)
        return cls(value, value)

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, value):
        return self.lo <= value <= self.hi

    def hull(self, other):
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other):
        """Intersection of two enclosures of the same range; self if they are disjoint"""
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else self

    def __add__(self, other):
        other = _coerce(other)
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return Interval(_down(self.lo - other.hi), _up(self.hi - other.lo))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other):
        other = _coerce(other)
        products = [
            _product(self.lo, other.lo),
            _product(self.lo, other.hi),
            _product(self.hi, other.lo),
            _product(self.hi, other.hi),
        ]
        return Interval(_down(min(products)), _up(max(products)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other.lo == 0.0 and other.hi == 0.0:
            raise DomainError("division by an interval that is identically zero")
        if other.lo <= 0.0 <= other.hi:
            return Interval(-math.inf, math.inf)
        quotients = [
            self.lo / other.lo,
            self.lo / other.hi,
            self.hi / other.lo,
            self.hi / other.hi,
        ]
        quotients = [0.0 if math.isnan(q) else q for q in quotients]
        return Interval(_down(min(quotients)), _up(max(quotients)))

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __abs__(self):
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return -self
        return Interval(0.0, max(-self.lo, self.hi))

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            raise TypeError("interval powers take integer exponents only")
        if exponent == 0:
            return Interval(1.0, 1.0)
        if exponent < 0:
            return Interval(1.0, 1.0) / (self ** -exponent)
        lo_pow = _power(self.lo, exponent)
        hi_pow = _power(self.hi, exponent)
        if exponent % 2 == 1:
            return Interval(_down(lo_pow), _up(hi_pow))
        if self.lo >= 0.0:
            return Interval(_down(lo_pow), _up(hi_pow))
        if self.hi <= 0.0:
            return Interval(_down(hi_pow), _up(lo_pow))
        return Interval(0.0, _up(max(lo_pow, hi_pow)))

    def exp(self):
        return Interval(max(0.0, _down(_exp(self.lo))), _up(_exp(self.hi)))

    def log(self):
        if self.hi <= 0.0:
            raise DomainError(f"ln of a nonpositive interval [{self.lo}, {self.hi}]")
        lo = -math.inf if self.lo <= 0.0 else _down(math.log(self.lo))
        return Interval(lo, _up(math.log(self.hi)))

    def __repr__(self):
        return f"[{self.lo!r}, {self.hi!r}]"


def _power(value, exponent):
    try:
        return value ** exponent
    except OverflowError:
        return math.copysign(math.inf, value) if exponent % 2 else math.inf


def _exp(value):
    try:
        return math.exp(value)
    except OverflowError:
        return math.inf


def _coerce(value):
    if isinstance(value, Interval):
        return value
    return Interval.point(value)


def interval_min(items):
    items = list(items)
    return Interval(min(i.lo for i in items), min(i.hi for i in items))


def interval_max(items):
    items = list(items)
    return Interval(max(i.lo for i in items), max(i.hi for i in items))
