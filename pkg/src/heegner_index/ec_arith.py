"""Exact arithmetic on Weierstrass curves over Q and F_p.

Points are kept as exact rationals; only heights touch floating point.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import mpmath
import numpy as np
from sympy import factorint, primerange

ENUMERATION_LIMIT = 10_000
MAZUR_MAX_ORDER = 12


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class BadReductionError(DomainError):
    pass


class PrecisionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class WeierstrassModel:
    a1: int
    a2: int
    a3: int
    a4: int
    a6: int

    def __post_init__(self):
        if not all(isinstance(a, int) for a in self.ainvs):
            raise DomainError("Weierstrass coefficients must be integers")

    @property
    def ainvs(self):
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    @property
    def b2(self):
        return self.a1 * self.a1 + 4 * self.a2

    @property
    def b4(self):
        return 2 * self.a4 + self.a1 * self.a3

    @property
    def b6(self):
        return self.a3 * self.a3 + 4 * self.a6

    @property
    def b8(self):
        a1, a2, a3, a4, a6 = self.ainvs
        return (a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4
                + a2 * a3 * a3 - a4 * a4)

    @property
    def c4(self):
        return self.b2 ** 2 - 24 * self.b4

    @property
    def c6(self):
        return -self.b2 ** 3 + 36 * self.b2 * self.b4 - 216 * self.b6

    @property
    def discriminant(self):
        b2, b4, b6, b8 = self.b2, self.b4, self.b6, self.b8
        return -b2 * b2 * b8 - 8 * b4 ** 3 - 27 * b6 * b6 + 9 * b2 * b4 * b6


def model(E) -> WeierstrassModel:
    """Accept a WeierstrassModel, anything with a1..a6 attributes, or a 5-tuple."""
    if isinstance(E, WeierstrassModel):
        return E
    if isinstance(E, (tuple, list)):
        return _model_from_tuple(tuple(int(a) for a in E))
    return _model_from_tuple((E.a1, E.a2, E.a3, E.a4, E.a6))


@lru_cache(maxsize=256)
def _model_from_tuple(ainvs):
    return WeierstrassModel(*ainvs)


@dataclass(frozen=True)
class RationalPoint:
    """Point on a Weierstrass curve; the point at infinity has z == 0."""
    x: Fraction
    y: Fraction
    z: int = 1

    def __post_init__(self):
        object.__setattr__(self, "x", Fraction(self.x))
        object.__setattr__(self, "y", Fraction(self.y))

    @classmethod
    def infinity(cls) -> "RationalPoint":
        return cls(Fraction(0), Fraction(1), 0)

    @classmethod
    def from_projective(cls, X: int, Y: int, Z: int) -> "RationalPoint":
        if Z == 0:
            if X != 0 or Y == 0:
                raise DomainError(f"({X}:{Y}:{Z}) is not the point at infinity of a Weierstrass curve")
            return cls.infinity()
        return cls(Fraction(X, Z), Fraction(Y, Z))

    @property
    def is_zero(self) -> bool:
        return self.z == 0

    def projective(self) -> tuple[int, int, int]:
        """Coprime integer triple (X:Y:Z)."""
        if self.is_zero:
            return (0, 1, 0)
        Z = math.lcm(self.x.denominator, self.y.denominator)
        return (self.x.numerator * (Z // self.x.denominator),
                self.y.numerator * (Z // self.y.denominator), Z)

    def __str__(self):
        X, Y, Z = self.projective()
        return f"({X}:{Y}:{Z})"


O = RationalPoint.infinity()


def on_curve(P: RationalPoint, E) -> bool:
    if P.is_zero:
        return True
    m = model(E)
    x, y = P.x, P.y
    return y * y + m.a1 * x * y + m.a3 * y == x ** 3 + m.a2 * x * x + m.a4 * x + m.a6


def _check(P, E):
    if not on_curve(P, E):
        raise DomainError(f"point {P} is not on the curve {model(E).ainvs}")


def negate(P: RationalPoint, E) -> RationalPoint:
    _check(P, E)
    return _neg(P, model(E))


def _neg(P, m):
    if P.is_zero:
        return P
    return RationalPoint(P.x, -P.y - m.a1 * P.x - m.a3)


def _add(P, Q, m):
    if P.is_zero:
        return Q
    if Q.is_zero:
        return P
    a1, a2, a3, a4, a6 = m.ainvs
    x1, y1, x2, y2 = P.x, P.y, Q.x, Q.y
    if x1 == x2:
        if y1 + y2 + a1 * x2 + a3 == 0:
            return O
        den = 2 * y1 + a1 * x1 + a3
        lam = (3 * x1 * x1 + 2 * a2 * x1 + a4 - a1 * y1) / den
        nu = (-x1 ** 3 + a4 * x1 + 2 * a6 - a3 * y1) / den
    else:
        lam = (y2 - y1) / (x2 - x1)
        nu = (y1 * x2 - y2 * x1) / (x2 - x1)
    x3 = lam * lam + a1 * lam - a2 - x1 - x2
    y3 = -(lam + a1) * x3 - nu - a3
    return RationalPoint(x3, y3)


def add(P: RationalPoint, Q: RationalPoint, E) -> RationalPoint:
    _check(P, E)
    _check(Q, E)
    return _add(P, Q, model(E))


def sub(P, Q, E):
    return add(P, negate(Q, E), E)


def _mul(k, P, m):
    if k < 0:
        return _neg(_mul(-k, P, m), m)
    R = O
    while k:
        if k & 1:
            R = _add(R, P, m)
        k >>= 1
        if k:
            P = _add(P, P, m)
    return R


def scalar_mul(k: int, P: RationalPoint, E) -> RationalPoint:
    """k*P by double-and-add."""
    _check(P, E)
    return _mul(int(k), P, model(E))


def is_torsion(P: RationalPoint, E) -> bool:
    _check(P, E)
    m = model(E)
    # on an integral model only 2-torsion can be non-integral, and then 4x is integral
    if not P.is_zero and (4 * P.x).denominator != 1:
        return False
    Q = P
    for _ in range(MAZUR_MAX_ORDER):
        if Q.is_zero:
            return True
        Q = _add(Q, P, m)
    return False


# ---------------------------------------------------------------------------
# reduction mod p

def _count_enumerate(m: WeierstrassModel, p: int) -> int:
    """#E(F_p) including infinity, by enumerating x (works for singular reductions too)."""
    if p == 2:
        a1, a2, a3, a4, a6 = (a % 2 for a in m.ainvs)
        n = 1
        for x in range(2):
            for y in range(2):
                if (y * y + a1 * x * y + a3 * y - x ** 3 - a2 * x * x - a4 * x - a6) % 2 == 0:
                    n += 1
        return n
    xs = np.arange(p, dtype=np.int64)
    b2, b4, b6 = m.b2 % p, m.b4 % p, m.b6 % p
    # (2y + a1 x + a3)^2 = 4x^3 + b2 x^2 + 2 b4 x + b6
    rhs = (4 * xs) % p
    rhs = (rhs + b2) % p
    rhs = (rhs * xs) % p
    rhs = (rhs + 2 * b4) % p
    rhs = (rhs * xs + b6) % p
    is_sq = np.zeros(p, dtype=np.int64)
    is_sq[(xs * xs) % p] = 1
    chi = 2 * is_sq - 1
    chi[0] = 0
    return int(p + 1 + chi[rhs].sum())


def _short_model_mod(m, p):
    # y^2 = x^3 - 27 c4 x - 54 c6, isomorphic to the reduction for p > 3
    return (-27 * m.c4) % p, (-54 * m.c6) % p


def _ec_add_mod(P, Q, A, p):
    if P is None:
        return Q
    if Q is None:
        return P
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2) % p == 0:
            return None
        lam = (3 * x1 * x1 + A) * pow(2 * y1, -1, p) % p
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
    x3 = (lam * lam - x1 - x2) % p
    return x3, (lam * (x1 - x3) - y1) % p


def _ec_mul_mod(k, P, A, p):
    R = None
    if k < 0:
        k = -k
        P = None if P is None else (P[0], -P[1] % p)
    while k:
        if k & 1:
            R = _ec_add_mod(R, P, A, p)
        k >>= 1
        if k:
            P = _ec_add_mod(P, P, A, p)
    return R


def _orders_in_interval(P, A, p, lo, hi):
    """All n in [lo, hi] with nP = O, by baby-step/giant-step on x with y deciding the sign."""
    s = math.isqrt(hi - lo + 1) + 1
    baby = {}
    R = P
    for i in range(1, s + 1):
        if R is None:
            return [n for n in range(lo, hi + 1) if n % i == 0]
        hit = baby.get(R[0])
        if hit is not None:
            # iP = +-jP, so the order divides i -+ j
            j, yj = hit
            d = i - j if yj == R[1] else i + j
            o = _order_dividing(P, A, p, d)
            return [n for n in range(lo, hi + 1) if n % o == 0]
        baby[R[0]] = (i, R[1])
        R = _ec_add_mod(R, P, A, p)
    step = _ec_mul_mod(2 * s + 1, P, A, p)
    centre = lo + s
    G = _ec_mul_mod(centre, P, A, p)
    found = []
    while centre - s <= hi:
        # G = centre P; G = +-iP gives (centre -+ i) P = O
        if G is None:
            found.append(centre)
        else:
            hit = baby.get(G[0])
            if hit is not None:
                i, y = hit
                found.append(centre - i if y == G[1] else centre + i)
        G = _ec_add_mod(G, step, A, p)
        centre += 2 * s + 1
    return sorted(n for n in found if lo <= n <= hi)


def _order_dividing(P, A, p, d):
    n = d
    for q in factorint(d):
        while n % q == 0 and _ec_mul_mod(n // q, P, A, p) is None:
            n //= q
    return n


def _count_bsgs(m: WeierstrassModel, p: int) -> int:
    """#E(F_p) by Mestre's method: points on E and on its quadratic twist.

    For x with r = f(x) != 0, (r x, r^2) lies on Y^2 = X^3 + A r^2 X + B r^3,
    which is E when r is a square and the twist otherwise; its order n gives
    #E = n or #E = 2p + 2 - n.  Resolution is guaranteed for p > 229.
    """
    A, B = _short_model_mod(m, p)
    w = math.isqrt(4 * p)
    lo, hi = p + 1 - w, p + 1 + w
    rng = random.Random(p)
    possible = None
    for _ in range(200):
        x = rng.randrange(p)
        r = (x * x * x + A * x + B) % p
        if r == 0:
            continue
        r2 = r * r % p
        P = (r * x % p, r2)
        orders = _orders_in_interval(P, A * r2 % p, p, lo, hi)
        if pow(r, (p - 1) // 2, p) != 1:
            orders = [2 * p + 2 - n for n in orders]
        possible = set(orders) if possible is None else possible & set(orders)
        if len(possible) == 1:
            return possible.pop()
        if not possible:
            break
    raise ArithmeticError(f"point count for p={p} did not resolve")


def count_points_mod_p(E, p: int) -> int:
    """#E(F_p) for a prime of good reduction, point at infinity included."""
    m = model(E)
    if m.discriminant % p == 0:
        raise BadReductionError(f"p={p} divides the discriminant; use a_p_bad")
    if p < ENUMERATION_LIMIT:
        return _count_enumerate(m, p)
    return _count_bsgs(m, p)


def _reduce_model(m, p):
    return tuple(a % p for a in m.ainvs)


def _singular_point(m, p):
    a1, a2, a3, a4, a6 = _reduce_model(m, p)
    for x in range(p):
        for y in range(p):
            F = (y * y + a1 * x * y + a3 * y - x ** 3 - a2 * x * x - a4 * x - a6) % p
            Fx = (a1 * y - 3 * x * x - 2 * a2 * x - a4) % p
            Fy = (2 * y + a1 * x + a3) % p
            if F == 0 and Fx == 0 and Fy == 0:
                return x, y
    raise ArithmeticError("reduction has no singular point")


def a_p_bad(E, p: int) -> int:
    """Trace of Frobenius at a prime of bad reduction: +1 split, -1 non-split, 0 additive."""
    m = model(E)
    if m.discriminant % p != 0:
        raise DomainError(f"E has good reduction at {p}")
    if m.c4 % p == 0:
        return 0
    if p > 3:
        return 1 if pow(-m.c6 % p, (p - 1) // 2, p) == 1 else -1
    # tangent cone at the node: y^2 + a1 x y - (a2 + 3 x0) x^2 once the node is moved to 0
    x0, _ = _singular_point(m, p)
    a1, a2 = m.a1 % p, m.a2 % p
    a2s = (a2 + 3 * x0) % p
    split = any((t * t + a1 * t - a2s) % p == 0 for t in range(p))
    return 1 if split else -1


def a_p(E, p: int) -> int:
    m = model(E)
    if m.discriminant % p == 0:
        return a_p_bad(m, p)
    return p + 1 - count_points_mod_p(m, p)


def an_table(E, M: int, known=None):
    """Coefficients a(1..M) of the L-series, as a CoefficientCache.

    a(p) for p <= known.M is taken from an existing shorter table.
    """
    from .curve_store import CoefficientCache

    if M < 1:
        raise DomainError("M must be >= 1")
    m = model(E)
    disc = m.discriminant
    a = np.ones(M + 1, dtype=np.int64)
    a[0] = 0
    known_M = known.M if known is not None else 0
    for p in primerange(2, M + 1):
        p = int(p)
        ap = int(known.coefficients[p - 1]) if p <= known_M else a_p(m, p)
        bad = disc % p == 0
        prev, cur = 1, ap
        pk = p
        while pk <= M:
            # positions where p^k exactly divides n
            idx = np.arange(pk, M + 1, pk)
            if pk * p <= M:
                idx = idx[idx % (pk * p) != 0]
            if cur != 1:
                a[idx] *= cur
            if bad:
                prev, cur = cur, cur * ap
            else:
                prev, cur = cur, ap * cur - p * prev
            pk *= p
    label = getattr(E, "label", "") or ""
    return CoefficientCache(label=label, coefficients=a[1:].copy(), M=M)


# ---------------------------------------------------------------------------
# torsion

def _square_divisors(n: int, primes: Iterable[int]):
    n = abs(n)
    exps = []
    for q in primes:
        e = 0
        while n % q == 0:
            n //= q
            e += 1
        exps.append((q, e // 2))
    out = [1]
    for q, e in exps:
        out = [d * q ** k for d in out for k in range(e + 1)]
    return out


def _integer_roots_cubic(A, B, c):
    """Integer roots of X^3 + A X + (B - c)."""
    roots = []
    for r in np.roots([1.0, 0.0, float(A), float(B - c)]):
        if abs(r.imag) > 1e-6 * (1 + abs(r.real)):
            continue
        for X in (math.floor(r.real) + k for k in (-1, 0, 1, 2)):
            if X ** 3 + A * X + B - c == 0 and X not in roots:
                roots.append(X)
    return roots


@lru_cache(maxsize=128)
def _torsion_points_cached(ainvs):
    m = WeierstrassModel(*ainvs)
    # integral short model Y^2 = X^3 + A X + B with X = 36x + 3 b2, Y = 108(2y + a1 x + a3)
    A, B = -27 * m.c4, -54 * m.c6
    D = 4 * A ** 3 + 27 * B ** 2
    primes = set(factorint(abs(m.discriminant))) | {2, 3}
    found = {O}
    for Ysq in [0] + [d * d for d in _square_divisors(D, primes)]:
        for X in _integer_roots_cubic(A, B, Ysq):
            Yabs = math.isqrt(Ysq)
            for Y in {Yabs, -Yabs}:
                x = Fraction(X - 3 * m.b2, 36)
                y = (Fraction(Y, 108) - m.a1 * x - m.a3) / 2
                P = RationalPoint(x, y)
                if on_curve(P, m) and is_torsion(P, m):
                    found.add(P)
    return tuple(sorted(found, key=lambda P: (P.z, P.x, P.y)))


def torsion_points(E) -> list[RationalPoint]:
    """All rational torsion points (Nagell-Lutz on an integral short model)."""
    return list(_torsion_points_cached(model(E).ainvs))


def torsion_bound(E, nprimes: int = 20) -> int:
    m = model(E)
    g = 0
    count = 0
    for p in primerange(3, 10 ** 6):
        if m.discriminant % p == 0:
            continue
        g = math.gcd(g, count_points_mod_p(m, int(p)))
        count += 1
        if count >= nprimes or g == 1:
            break
    return g


def torsion_order(E) -> int:
    """#E(Q)_tors: gcd of #E(F_p) over good odd primes, confirmed by exhibiting points."""
    bound = torsion_bound(E)
    if bound == 1:
        return 1
    n = len(torsion_points(E))
    if bound % n:
        raise ArithmeticError(f"torsion order {n} does not divide the reduction bound {bound}")
    return n


# ---------------------------------------------------------------------------
# heights

@dataclass(frozen=True)
class HeightValue:
    value: mpmath.mpf
    precision_bits: int

    def __float__(self):
        return float(self.value)


def naive_height(P: RationalPoint, precision_bits: int = 53) -> HeightValue:
    """log max(|X|,|Y|,|Z|) for coprime projective coordinates."""
    with mpmath.workprec(precision_bits + 10):
        v = mpmath.log(max(abs(c) for c in P.projective()))
        return HeightValue(+v, precision_bits)


def _vp(n, p):
    if n == 0:
        return math.inf
    if isinstance(n, Fraction):
        return _vp(n.numerator, p) - _vp(n.denominator, p)
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e


def local_height_correction(P: RationalPoint, E, p: int) -> Fraction:
    """Correction to log(denominator) at a bad prime, in units of log p.

    Zero when P reduces to a nonsingular point; otherwise depends on the
    component of the Neron model that P meets.
    """
    m = model(E)
    x, y = P.x, P.y
    N = _vp(m.discriminant, p)
    A = _vp(3 * x * x + 2 * m.a2 * x + m.a4 - m.a1 * y, p)
    B = _vp(2 * y + m.a1 * x + m.a3, p)
    if A <= 0 or B <= 0:
        return Fraction(0)
    if m.c4 % p != 0:
        M = min(Fraction(B), Fraction(N, 2))
        return -M * (N - M) / (2 * N)
    C = _vp(3 * x ** 4 + m.b2 * x ** 3 + 3 * m.b4 * x * x + 3 * m.b6 * x + m.b8, p)
    if C >= 3 * B:
        return Fraction(-B, 3)
    return Fraction(-C, 8)


def canonical_height(P: RationalPoint, E, precision_bits: int = 256) -> HeightValue:
    """Neron-Tate height, normalised as lim h_x(nP)/n^2, from local heights.

    The archimedean term uses the Weierstrass sigma function; bad primes use
    the component corrections of local_height_correction.
    """
    from . import modparam

    _check(P, E)
    m = model(E)
    if P.is_zero or is_torsion(P, m):
        return HeightValue(mpmath.mpf(0), precision_bits)
    lattice = modparam.period_lattice(m, precision_bits)
    z = modparam.point_to_complex(P, lattice, m).z
    with mpmath.workprec(precision_bits + 32):
        h = modparam.archimedean_height_term(z, lattice)
        h += mpmath.log(P.x.denominator) / 2
        for p in factorint(abs(m.discriminant)):
            corr = local_height_correction(P, m, p)
            if corr:
                h += mpmath.mpf(corr.numerator) / corr.denominator * mpmath.log(p)
        # local heights above sum to half of lim h_x(nP)/n^2; report the latter
        h *= 2
        return HeightValue(+h, precision_bits)


def doubling_height_estimate(P: RationalPoint, E, n: int = 8) -> float:
    """4^-n h_x(2^n P) with exact doublings; slow convergence, used as a cross-check."""
    m = model(E)
    Q = P
    for _ in range(n):
        Q = _add(Q, Q, m)
    if Q.is_zero:
        return 0.0
    hx = math.log(max(abs(Q.x.numerator), Q.x.denominator))
    return hx / 4 ** n
