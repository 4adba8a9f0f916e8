"""Heegner points on X0(N), their traces to E(Q), and the index I_E."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import mpmath
from mpmath import mpc, mpf

from . import modparam
from .curve_store import CoefficientCache, CurveRecord, load_cache, store_cache
from .ec_arith import (DomainError, O, RationalPoint, add, an_table, canonical_height,
                       is_torsion, model, on_curve, scalar_mul, sub, torsion_points)
from .modparam import ComplexCurvePoint, UpperHalfPoint
from .quadforms import HeegnerPair, QuadForm, heegner_forms, heegner_pairs, is_fundamental

log = logging.getLogger(__name__)

MAX_ESCALATIONS = 3
VALIDATION_EXTRA_BITS = 64
MAX_MULTIPLE = 2 ** 16


class RecognitionError(ArithmeticError):
    """No candidate value could be identified with a rational point."""


class VerificationError(RecognitionError):
    """A rational x was found but the point it defines is not on the curve."""


class InconsistentIndexError(ArithmeticError):
    """The index could not be confirmed exactly."""


def weight_uD(D: int, N: int) -> int:
    if D >= 0 or not is_fundamental(D):
        raise DomainError(f"{D} is not a negative fundamental discriminant")
    if D == -3:
        return 3
    if D == -4:
        return 2
    return 2 if D % N == 0 else 1


@dataclass(frozen=True)
class HeegnerPoint:
    form: QuadForm
    tau: UpperHalfPoint
    pair: HeegnerPair

    @classmethod
    def from_form(cls, form: QuadForm, pair: HeegnerPair, precision_bits: int = 256):
        A, B, C = form
        with mpmath.workprec(precision_bits + modparam.GUARD_BITS):
            sq = mpmath.sqrt(-form.disc)
            tau = UpperHalfPoint(mpf(-B) / (2 * A), sq / (2 * A))
        return cls(form, tau, pair)


@dataclass(frozen=True)
class TraceResult:
    pair: HeegnerPair
    point: RationalPoint
    index: Optional[int]
    u_D: int
    residual: float
    precision_bits: int
    trace: complex = 0j
    torsion: bool = False

    def key(self):
        return (self.pair.D, self.pair.r, self.point.projective(), self.index)


@dataclass
class CurveContext:
    """Per-curve data shared by all traces: lattices, a(n), generator height."""
    record: CurveRecord
    cache_dir: Optional[str] = None
    use_cache: bool = True
    _lattices: dict = field(default_factory=dict)
    _coeffs: Optional[CoefficientCache] = None
    _gen_height: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.record.conductor

    def lattice(self, bits: int):
        if bits not in self._lattices:
            self._lattices[bits] = modparam.period_lattice(self.record, bits)
        return self._lattices[bits]

    def coefficients(self, M: int) -> CoefficientCache:
        if self._coeffs is not None and self._coeffs.M >= M:
            return self._coeffs
        label = self.record.label
        c = load_cache(label, M, self.cache_dir) if self.use_cache else None
        if c is None:
            log.info("%s: computing a(n) for n <= %d", label, M)
            c = an_table(self.record, M, known=self._coeffs)
            c = CoefficientCache(label, c.coefficients, c.M)
            if self.use_cache:
                try:
                    store_cache(c, self.cache_dir)
                except OSError as e:
                    log.warning("could not write coefficient cache: %s", e)
        self._coeffs = c
        return c

    def generator_height(self, bits: int = 256):
        if bits not in self._gen_height:
            g = self.record.generator
            if g is None:
                raise DomainError(f"{self.record.label} has no stored generator")
            self._gen_height[bits] = canonical_height(g, self.record, bits).value
        return self._gen_height[bits]


def heegner_points(pair: HeegnerPair, precision_bits: int = 256) -> list[HeegnerPoint]:
    return [HeegnerPoint.from_form(Q, pair, precision_bits) for Q in heegner_forms(pair)]


def _evaluation_points(pair, bits):
    return [modparam.best_representative(h.tau, pair.N, bits) for h in heegner_points(pair, bits)]


def coefficients_needed(pairs, bits: int) -> int:
    M = 1
    for pair in pairs:
        for t in _evaluation_points(pair, bits):
            M = max(M, modparam.terms_needed(t.im, bits))
    return M


def trace_sum(pair: HeegnerPair, ctx: CurveContext, precision_bits: int) -> ComplexCurvePoint:
    """sum over Pic(O_D) of phi at the Heegner points, before dividing by u_D."""
    pts = _evaluation_points(pair, precision_bits)
    M = max(modparam.terms_needed(t.im, precision_bits) for t in pts)
    coeffs = ctx.coefficients(M)
    with mpmath.workprec(precision_bits + modparam.GUARD_BITS):
        total, err = mpc(0), mpf(0)
        for t in pts:
            v = modparam.phi(t, coeffs, pair.N, precision_bits)
            total += v.z
            err += v.error
    return ComplexCurvePoint(total, err)


def _division_candidates(z: ComplexCurvePoint, u: int, lattice):
    with mpmath.workprec(lattice.precision_bits + modparam.GUARD_BITS):
        for j in range(u):
            for k in range(u):
                w = (z.z + j * lattice.w1 + k * lattice.w2) / u
                yield ComplexCurvePoint(w, z.error / u)


def _tolerance(bits, x=0):
    return mpf(2) ** (-(3 * bits) // 4) * (1 + abs(x))


def recognize(z, lattice, curve, denominator_bound: Optional[int] = None) -> tuple[RationalPoint, float]:
    """Exact rational point at z in C/Lambda, with the numerical residual.

    x is the best rational approximation with denominator at most the bound;
    it must have square denominator, give an exact point on the curve, and lie
    within 2^(-3 bits/4) of the numerical value, widened by the error carried
    on z when z is a ComplexCurvePoint.
    """
    m = model(curve)
    bits = lattice.precision_bits
    if denominator_bound is None:
        denominator_bound = 2 ** (bits // 3)
    xy = modparam.complex_to_point(z, lattice, m)
    if xy is None:
        return O, 0.0
    with mpmath.workprec(bits + modparam.GUARD_BITS):
        xn, yn = xy
        err = z.error if isinstance(z, ComplexCurvePoint) else 0
        # first-order propagation: dx = wp'(z) dz, dy = wp''(z)/2 dz
        tol = max(_tolerance(bits, xn), 4 * err * (1 + abs(2 * yn + m.a1 * xn + m.a3)))
        tol_y = max(_tolerance(bits, xn) * (1 + abs(yn)),
                    4 * err * (1 + 3 * abs(xn + mpf(m.b2) / 12) ** 2 + abs(mpf(m.c4)) / 48))
        if abs(xn.imag) > tol or abs(yn.imag) > tol_y:
            raise RecognitionError(f"value is not real: Im x = {mpmath.nstr(xn.imag, 5)}")
        x = modparam.as_fraction(xn.real).limit_denominator(denominator_bound)
        if abs(mpf(x.numerator) / x.denominator - xn.real) > tol:
            raise RecognitionError(f"no rational x with denominator <= {denominator_bound} "
                                   f"near {mpmath.nstr(xn.real, 20)}")
        d = x.denominator
        if math.isqrt(d) ** 2 != d:
            raise VerificationError(f"x = {x} has non-square denominator")
        # y^2 + (a1 x + a3) y - f(x) = 0
        b = m.a1 * x + m.a3
        c = -(x ** 3 + m.a2 * x ** 2 + m.a4 * x + m.a6)
        disc = b * b - 4 * c
        if disc < 0:
            raise VerificationError(f"x = {x} gives no real point")
        rn, rd = math.isqrt(disc.numerator), math.isqrt(disc.denominator)
        if rn * rn != disc.numerator or rd * rd != disc.denominator:
            raise VerificationError(f"x = {x} is not the x-coordinate of a rational point")
        s = Fraction(rn, rd)
        cands = [(-b + s) / 2, (-b - s) / 2]
        y = min(cands, key=lambda t: abs(mpf(t.numerator) / t.denominator - yn.real))
        P = RationalPoint(x, y)
        if not on_curve(P, m):
            raise VerificationError(f"{P} is not on the curve")
        res = abs(mpf(y.numerator) / y.denominator - yn.real)
        if res > tol_y:
            raise RecognitionError(f"y residual {mpmath.nstr(res, 5)} too large")
        res = max(res, abs(mpf(x.numerator) / x.denominator - xn.real))
        return P, float(res)


def _fixed_coordinates(z, lattice, W):
    a, b = modparam.lattice_coordinates(z, lattice)
    one = 1 << W
    return int(mpmath.nint(a * one)) % one, int(mpmath.nint(b * one)) % one


def recognize_multiple(z, lattice, curve, max_multiple: int = MAX_MULTIPLE) -> tuple[RationalPoint, float]:
    """Exact point I g + T at z in C/Lambda, for |I| <= max_multiple and T torsion.

    For traces whose x-denominator is beyond reach of the continued-fraction
    bound. I comes from the elliptic logarithms; the exact candidate must then
    match the numerical (x, y) as closely as recognize requires.
    """
    g = curve.generator
    if g is None:
        raise RecognitionError(f"{curve.label} has no stored generator")
    m = model(curve)
    bits = lattice.precision_bits
    if not isinstance(z, ComplexCurvePoint):
        with mpmath.workprec(bits + modparam.GUARD_BITS):
            z = ComplexCurvePoint(mpc(z))
    xy = modparam.complex_to_point(z, lattice, m)
    if xy is None:
        return O, 0.0
    W = bits
    one = 1 << W
    slack = 1 << (W - bits // 2)
    with mpmath.workprec(bits + modparam.GUARD_BITS):
        xn, yn = xy
        za, zb = _fixed_coordinates(z.z, lattice, W)
        ga, gb = _fixed_coordinates(modparam.point_to_complex(g, lattice, m).z, lattice, W)

        def near_zero(v):
            v %= one
            return v < slack or one - v < slack

        for T in torsion_points(curve):
            ta, tb = _fixed_coordinates(modparam.point_to_complex(T, lattice, m).z, lattice, W)
            ra, rb = za - ta, zb - tb
            # walk I = 0, 1, 2, ... checking z - T - (+-I) z_g in Lambda
            pa, pb = 0, 0
            for I in range(max_multiple + 1):
                for sign in ((1, -1) if I else (1,)):
                    if near_zero(ra - sign * pa) and near_zero(rb - sign * pb):
                        P = add(scalar_mul(sign * I, g, curve), T, curve)
                        if P.is_zero:
                            continue
                        res = max(abs(mpf(P.x.numerator) / P.x.denominator - xn),
                                  abs(mpf(P.y.numerator) / P.y.denominator - yn))
                        if res <= _tolerance(bits, xn) * (1 + abs(yn)):
                            return P, float(res)
                pa += ga
                pb += gb
    raise RecognitionError(f"no multiple I g + T with |I| <= {max_multiple} matches "
                           f"x = {mpmath.nstr(xn.real, 20)}")


def index_of(point: RationalPoint, curve: CurveRecord, precision_bits: int = 256,
             generator_height=None) -> int:
    """I with point = +-I g modulo torsion, confirmed with exact arithmetic."""
    g = curve.generator
    if g is None:
        raise DomainError(f"{curve.label} has no stored generator")
    if point.is_zero or is_torsion(point, curve):
        raise DomainError("index is undefined for a torsion point")
    hg = generator_height if generator_height is not None else \
        canonical_height(g, curve, precision_bits).value
    hp = canonical_height(point, curve, precision_bits).value
    with mpmath.workprec(precision_bits):
        guess = int(mpmath.nint(mpmath.sqrt(hp / hg)))
    for I in (guess, guess - 1, guess + 1):
        if I < 1:
            continue
        Ig = scalar_mul(I, g, curve)
        for Q in (sub(point, Ig, curve), add(point, Ig, curve)):
            if Q.is_zero or is_torsion(Q, curve):
                return I
    raise InconsistentIndexError(f"{point} is not +-I*g + torsion for I near {guess}")


def _pick(points):
    """Deterministic choice among candidates differing by rational torsion."""
    return min(points, key=lambda P: (P.is_zero, P.projective() if not P.is_zero else (0, 1, 0)))


def _trace_once(pair, ctx, bits):
    u = weight_uD(pair.D, pair.N)
    lattice = ctx.lattice(bits)
    z = trace_sum(pair, ctx, bits)
    found = []
    errors = []
    candidates = list(_division_candidates(z, u, lattice))
    for cand in candidates:
        try:
            found.append(recognize(cand, lattice, ctx.record))
        except RecognitionError as e:
            errors.append(str(e))
    if not found and ctx.record.generator is not None:
        # the trace may simply have too large a height for the denominator bound
        for cand in candidates:
            try:
                found.append(recognize_multiple(cand, lattice, ctx.record))
            except RecognitionError as e:
                errors.append(str(e))
    if not found:
        raise RecognitionError(f"D={pair.D} r={pair.r}: no candidate recognised ({errors[0]})")
    P = _pick([p for p, _ in found])
    res = max(r for p, r in found if p == P)
    return P, res, u, complex(z.z)


def trace(pair: HeegnerPair, curve: CurveRecord, precision_bits: int = 256,
          ctx: Optional[CurveContext] = None) -> TraceResult:
    """y_{D,r} with u_D y = sum of phi over the Heegner points, recognised exactly.

    Precision doubles (at most three times) when recognition fails.
    """
    if pair.N != curve.conductor:
        raise DomainError(f"pair level {pair.N} differs from conductor {curve.conductor}")
    ctx = ctx or CurveContext(curve)
    bits = precision_bits
    for attempt in range(MAX_ESCALATIONS + 1):
        try:
            P, res, u, z = _trace_once(pair, ctx, bits)
            break
        except RecognitionError as e:
            if attempt == MAX_ESCALATIONS:
                raise
            log.info("%s D=%d: %s; retrying at %d bits", curve.label, pair.D, e, 2 * bits)
            bits *= 2
    tors = P.is_zero or is_torsion(P, curve)
    idx = None
    if not tors and curve.generator is not None:
        idx = index_of(P, curve, bits, ctx.generator_height(bits))
    return TraceResult(pair, P, idx, u, res, bits, z, tors)


def same_result(a: TraceResult, b: TraceResult) -> bool:
    return a.point == b.point and a.index == b.index and a.torsion == b.torsion


@dataclass
class GlobalIndexResult:
    index: Optional[int]
    traces: list
    degenerate: bool = False
    early_exit: bool = False

    def __iter__(self):
        return iter((self.index, self.traces))


def global_index(curve: CurveRecord, Dmax: int = 163, precision_bits: int = 256,
                 validate: bool = True, early_exit: bool = True,
                 ctx: Optional[CurveContext] = None) -> GlobalIndexResult:
    """gcd of I_{D,r} over Heegner pairs with |D| <= Dmax; torsion traces are skipped.

    With validate, every trace is recomputed 64 bits higher and must agree exactly.
    """
    if curve.rank != 1:
        raise DomainError(f"{curve.label} has rank {curve.rank}, not 1")
    if curve.generator is None:
        raise DomainError(f"{curve.label} has no stored generator")
    ctx = ctx or CurveContext(curve)
    pairs = heegner_pairs(curve.conductor, Dmax)
    top = precision_bits + (VALIDATION_EXTRA_BITS if validate else 0)
    ctx.coefficients(coefficients_needed(pairs, top))
    g = 0
    results = []
    for pair in pairs:
        r = trace(pair, curve, precision_bits, ctx)
        if validate:
            r2 = trace(pair, curve, precision_bits + VALIDATION_EXTRA_BITS, ctx)
            if not same_result(r, r2):
                raise RecognitionError(f"{curve.label} D={pair.D}: results differ between "
                                       f"{r.precision_bits} and {r2.precision_bits} bits")
        results.append(r)
        if r.index is not None:
            g = math.gcd(g, r.index)
            if g == 1 and early_exit:
                return GlobalIndexResult(1, results, early_exit=True)
    if g == 0:
        return GlobalIndexResult(None, results, degenerate=True)
    return GlobalIndexResult(g, results)


# ---------------------------------------------------------------------------
# verdicts

VACUOUS = "vacuous"
BY_NU = "satisfied-by-nu"
BY_SHA = "satisfied-by-sha"
BY_BOTH = "satisfied-by-both"
COUNTEREXAMPLE = "COUNTEREXAMPLE"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class Verdict:
    label: str
    I_E: Optional[int]
    nu: int
    sha: Optional[int]
    verdict: str


def conjecture_check(curve, I_E: Optional[int], nu_value: int, sha: Optional[int]) -> Verdict:
    """If I_E > 1 then nu > 1 or Sha is non-trivial."""
    label = getattr(curve, "label", str(curve))
    if I_E is None:
        v = INDETERMINATE
    elif I_E == 1:
        v = VACUOUS
    elif nu_value > 1 and sha is not None and sha > 1:
        v = BY_BOTH
    elif nu_value > 1:
        v = BY_NU
    elif sha is None:
        v = INDETERMINATE
    elif sha > 1:
        v = BY_SHA
    else:
        v = COUNTEREXAMPLE
    return Verdict(label, I_E, nu_value, sha, v)
