"""Period lattices, Weierstrass functions and the modular parametrisation.

phi(tau) = sum a(n)/n q^n is summed in fixed point (Gaussian integers scaled
by 2^W) because it is the only loop that runs for 10^5 - 10^6 terms; everything
else goes through mpmath at the requested precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
from mpmath import mpc, mpf

from .ec_arith import (DomainError, PrecisionError, RationalPoint, _add,
                       model)

GUARD_BITS = 32


class TruncationError(ValueError):
    """Coefficient table too short for the requested precision."""


@dataclass(frozen=True)
class UpperHalfPoint:
    re: mpf
    im: mpf

    def __post_init__(self):
        object.__setattr__(self, "re", mpf(self.re))
        object.__setattr__(self, "im", mpf(self.im))
        if not self.im > 0:
            raise DomainError(f"Im(tau) = {self.im} is not positive")

    @classmethod
    def from_complex(cls, t) -> "UpperHalfPoint":
        t = mpc(t)
        return cls(t.real, t.imag)

    @property
    def value(self) -> mpc:
        return mpc(self.re, self.im)


@dataclass(frozen=True)
class ComplexCurvePoint:
    z: mpc
    error: mpf = mpf(0)


@dataclass(frozen=True)
class PeriodLattice:
    """Lattice of the Neron differential; w1 is the least positive real period."""
    w1: mpf
    w2: mpc
    real_components: int
    precision_bits: int
    roots: tuple
    ainvs: tuple
    _reduced: tuple = field(default=None, compare=False, repr=False)

    @property
    def omega(self) -> mpf:
        """Real period times the number of real components (the BSD Omega)."""
        return self.w1 * self.real_components

    @property
    def tau(self) -> mpc:
        return self.w2 / self.w1

    def reduced_basis(self):
        """(om1, om2) spanning the lattice with om2/om1 in the SL2(Z) fundamental domain."""
        if self._reduced is None:
            object.__setattr__(self, "_reduced", _reduce_basis(mpc(self.w1), mpc(self.w2)))
        return self._reduced


def _reduce_basis(om1, om2):
    # keep Im(om2/om1) > 0
    for _ in range(10_000):
        t = om2 / om1
        k = mpmath.nint(t.real)
        if k:
            om2 -= k * om1
            t -= k
        if abs(t) < 1 - mpf(2) ** (-mpmath.mp.prec // 2):
            om1, om2 = om2, -om1
            continue
        return om1, om2
    raise PrecisionError("lattice basis reduction did not terminate")


def period_lattice(E, precision_bits: int = 256) -> PeriodLattice:
    """Periods of the Neron differential by the arithmetic-geometric mean."""
    m = model(E)
    disc = m.discriminant
    if disc == 0:
        raise DomainError("singular curve")
    with mpmath.workprec(precision_bits + GUARD_BITS):
        roots = mpmath.polyroots([4, m.b2, 2 * m.b4, m.b6], maxsteps=400, extraprec=2 * precision_bits)
        pi = mpmath.pi
        if disc > 0:
            e1, e2, e3 = sorted((mpmath.re(r) for r in roots), reverse=True)
            w1 = pi / mpmath.agm(mpmath.sqrt(e1 - e3), mpmath.sqrt(e1 - e2))
            w2 = mpc(0, 1) * pi / mpmath.agm(mpmath.sqrt(e1 - e3), mpmath.sqrt(e2 - e3))
            roots = (e1, e2, e3)
            comps = 2
        else:
            real = min(roots, key=lambda r: abs(mpmath.im(r)))
            e1 = mpmath.re(real)
            others = sorted((r for r in roots if r is not real), key=lambda r: mpmath.im(r))
            a = 3 * e1 + mpf(m.b2) / 4
            b = mpmath.sqrt(3 * e1 * e1 + mpf(m.b2) / 2 * e1 + mpf(m.b4) / 2)
            w1 = 2 * pi / mpmath.agm(2 * mpmath.sqrt(b), mpmath.sqrt(2 * b + a))
            w2 = -w1 / 2 + mpc(0, 1) * pi / mpmath.agm(2 * mpmath.sqrt(b), mpmath.sqrt(2 * b - a))
            roots = (e1, others[1], others[0])
            comps = 1
        if not (mpmath.isfinite(w1) and w1 > 0 and mpmath.im(w2) > 0):
            raise PrecisionError("AGM did not produce a valid period basis")
        return PeriodLattice(+w1, +w2, comps, precision_bits, tuple(roots), m.ainvs)


def _lattice_prec(lattice):
    return mpmath.workprec(max(mpmath.mp.prec, lattice.precision_bits + GUARD_BITS))


def lattice_coordinates(z, lattice: PeriodLattice):
    """Real (a, b) with z = a*w1 + b*w2."""
    with _lattice_prec(lattice):
        z = mpc(z)
        b = z.imag / lattice.w2.imag
        a = (z.real - b * lattice.w2.real) / lattice.w1
        return a, b


def reduce_mod_lattice(z, lattice: PeriodLattice) -> mpc:
    with _lattice_prec(lattice):
        a, b = lattice_coordinates(z, lattice)
        return mpc(z) - mpmath.nint(a) * lattice.w1 - mpmath.nint(b) * lattice.w2


def lattice_distance(z, lattice: PeriodLattice) -> mpf:
    """Distance from z to the nearest lattice point."""
    with _lattice_prec(lattice):
        z = reduce_mod_lattice(z, lattice)
        best = abs(z)
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                best = min(best, abs(z - i * lattice.w1 - j * lattice.w2))
        return best


def _reduced_u(z, om1, om2):
    tau = om2 / om1
    u = mpc(z) / om1
    u -= mpmath.nint(u.imag / tau.imag) * tau
    u -= mpmath.nint(u.real)
    return u, tau


def _eps():
    return mpf(2) ** (-mpmath.mp.prec - 4)


def weierstrass_p(z, lattice: PeriodLattice):
    """(wp(z), wp'(z)) by q-series in a reduced basis."""
    with mpmath.workprec(lattice.precision_bits + GUARD_BITS):
        om1, om2 = lattice.reduced_basis()
        u, tau = _reduced_u(z, om1, om2)
        if u == 0:
            raise ZeroDivisionError("wp has a pole at lattice points")
        two_pi_i = 2 * mpmath.pi * mpc(0, 1)
        q = mpmath.exp(two_pi_i * tau)
        w = mpmath.exp(two_pi_i * u)
        wi = 1 / w
        s = mpf(1) / 12 + w / (1 - w) ** 2
        d = w * (1 + w) / (1 - w) ** 3
        qn = q
        eps = _eps()
        for _ in range(100_000):
            a, b = qn * w, qn * wi
            t = a / (1 - a) ** 2 + b / (1 - b) ** 2 - 2 * qn / (1 - qn) ** 2
            td = a * (1 + a) / (1 - a) ** 3 - b * (1 + b) / (1 - b) ** 3
            s += t
            d += td
            if abs(t) + abs(td) < eps * (abs(s) + abs(d)):
                break
            qn *= q
        k = two_pi_i / om1
        return k * k * s, k * k * k * d


def complex_to_point(z: ComplexCurvePoint, lattice: PeriodLattice, E):
    """Complex (x, y) on the model for z in C/Lambda; None signals the point at infinity."""
    m = model(E)
    with mpmath.workprec(lattice.precision_bits + GUARD_BITS):
        if not isinstance(z, ComplexCurvePoint):
            z = ComplexCurvePoint(mpc(z))
        zr = reduce_mod_lattice(z.z, lattice)
        tiny = max(z.error, mpf(2) ** (-lattice.precision_bits // 2))
        if lattice_distance(zr, lattice) <= tiny:
            return None
        wp, dwp = weierstrass_p(zr, lattice)
        x = wp - mpf(m.b2) / 12
        y = (dwp - m.a1 * x - m.a3) / 2
        return x, y


def _elliptic_log_identity(x, v, lattice, m):
    e1, e2, e3 = lattice.roots
    z = mpmath.elliprf(x - e1, x - e2, x - e3)
    _, d_plus = weierstrass_p(z, lattice)
    if abs(d_plus + v) < abs(d_plus - v):
        z = -z
    return mpc(z)


def point_to_complex(P: RationalPoint, lattice: PeriodLattice, E) -> ComplexCurvePoint:
    """Elliptic logarithm: z with (wp(z) - b2/12, ...) = P."""
    m = model(E)
    if P.is_zero:
        return ComplexCurvePoint(mpc(0), mpf(0))
    with mpmath.workprec(lattice.precision_bits + GUARD_BITS):
        x = mpf(P.x.numerator) / P.x.denominator
        v = 2 * P.y + m.a1 * P.x + m.a3
        v = mpf(v.numerator) / v.denominator
        if lattice.real_components == 2 and x < lattice.roots[0]:
            # egg component: halve the log of 2P and pick the matching half-period shift
            P2 = _add(P, P, m)
            if P2.is_zero:
                cands = [lattice.w1 / 2, lattice.w2 / 2, (lattice.w1 + lattice.w2) / 2]
            else:
                z2 = point_to_complex(P2, lattice, m).z
                cands = [z2 / 2 + s for s in (0, lattice.w1 / 2, lattice.w2 / 2,
                                                (lattice.w1 + lattice.w2) / 2)]
            best, err = None, None
            for c in cands:
                wp, dwp = weierstrass_p(c, lattice)
                e = abs(wp - mpf(m.b2) / 12 - x) + abs(dwp - v)
                if err is None or e < err:
                    best, err = c, e
            z = mpc(best)
        else:
            z = _elliptic_log_identity(x, v, lattice, m)
        error = mpf(2) ** (-lattice.precision_bits + 8) * (1 + abs(z))
        return ComplexCurvePoint(+z, error)


def archimedean_height_term(z, lattice: PeriodLattice) -> mpf:
    """-log|exp(-z eta(z)/2) sigma(z)|; lattice periodic in z."""
    with mpmath.workprec(lattice.precision_bits + GUARD_BITS):
        om1, om2 = lattice.reduced_basis()
        u, tau = _reduced_u(z, om1, om2)
        pi = mpmath.pi
        two_pi_i = 2 * pi * mpc(0, 1)
        q = mpmath.exp(two_pi_i * tau)
        w = mpmath.exp(two_pi_i * u)
        eps = _eps()
        # E2(tau) = 1 - 24 sum sigma_1(n) q^n = 1 - 24 sum n q^n / (1 - q^n)
        e2 = mpf(1)
        qn = q
        n = 1
        while True:
            t = n * qn / (1 - qn)
            e2 -= 24 * t
            if abs(t) < eps:
                break
            qn *= q
            n += 1
        eta1 = pi ** 2 * e2 / (3 * om1)
        eta2 = (eta1 * om2 - two_pi_i) / om1
        b = u.imag / tau.imag
        a = u.real - b * tau.real
        zz = u * om1
        eta_z = a * eta1 + b * eta2
        log_sigma = (mpmath.log(abs(om1 / (2 * pi)))
                     + mpmath.re(eta1 * om1 * u * u / 2)
                     + mpmath.log(abs(mpmath.exp(pi * mpc(0, 1) * u) - mpmath.exp(-pi * mpc(0, 1) * u))))
        qn = q
        while True:
            t = (mpmath.log(abs(1 - qn * w)) + mpmath.log(abs(1 - qn / w))
                 - 2 * mpmath.log(abs(1 - qn)))
            log_sigma += t
            if abs(qn) * (abs(w) + abs(1 / w) + 2) < eps:
                break
            qn *= q
        return -(log_sigma - mpmath.re(zz * eta_z) / 2)


# ---------------------------------------------------------------------------
# modular parametrisation

def tail_bound(im_tau, M: int) -> mpf:
    """Bound on |sum_{n>M} a(n)/n q^n| using |a(n)| <= d(n) sqrt(n) <= 2n."""
    r = mpmath.exp(-2 * mpmath.pi * mpf(im_tau))
    return 2 * r ** (M + 1) / (1 - r)


def terms_needed(im_tau, precision_bits: int) -> int:
    with mpmath.workprec(64):
        im_tau = mpf(im_tau)
        r = mpmath.exp(-2 * mpmath.pi * im_tau)
        target = (precision_bits + 4) * mpmath.log(2) + mpmath.log(2 / (1 - r))
        M = int(mpmath.ceil(target / (2 * mpmath.pi * im_tau)))
    while tail_bound(im_tau, M) >= mpf(2) ** (-precision_bits - 4):
        M += 1
    return max(M, 1)


def phi(tau: UpperHalfPoint, coeffs, N: int, precision_bits: int = 256) -> ComplexCurvePoint:
    """sum_{n<=M} a(n)/n e^{2 pi i n tau} with M fixed by the tail bound."""
    if not isinstance(tau, UpperHalfPoint):
        tau = UpperHalfPoint.from_complex(tau)
    M = terms_needed(tau.im, precision_bits)
    if coeffs.M < M:
        raise TruncationError(f"need {M} coefficients for Im(tau)={mpmath.nstr(tau.im, 6)} "
                              f"at {precision_bits} bits, have {coeffs.M}")
    W = precision_bits + 2 * M.bit_length() + 16
    with mpmath.workprec(W + 64):
        q = mpmath.exp(2 * mpmath.pi * mpc(0, 1) * tau.value)
        scale = mpf(2) ** W
        qr = int(mpmath.nint(q.real * scale))
        qi = int(mpmath.nint(q.imag * scale))
    alist = coeffs.as_list()
    pr, pim = qr, qi
    sr = si = 0
    for n in range(1, M + 1):
        a = alist[n - 1]
        if a:
            sr += a * pr // n
            si += a * pim // n
        pr, pim = (pr * qr - pim * qi) >> W, (pr * qi + pim * qr) >> W
    with mpmath.workprec(precision_bits + GUARD_BITS):
        value = mpc(mpf(sr) / 2 ** W, mpf(si) / 2 ** W)
        # truncation of q^n grows by at most 2 ulp per step; each term adds one more
        rounding = mpf(4 * M * M + 2 * M + 4) / mpf(2) ** W
        err = tail_bound(tau.im, M) + rounding
    return ComplexCurvePoint(value, err)


def _prec(precision_bits):
    return mpmath.workprec(precision_bits + GUARD_BITS if precision_bits else mpmath.mp.prec)


def fricke(tau: UpperHalfPoint, N: int, precision_bits: int | None = None) -> UpperHalfPoint:
    with _prec(precision_bits):
        return UpperHalfPoint.from_complex(-1 / (N * tau.value))


def _translate(tau: UpperHalfPoint) -> UpperHalfPoint:
    return UpperHalfPoint(tau.re - mpmath.nint(tau.re), tau.im)


def best_representative(tau: UpperHalfPoint, N: int, precision_bits: int | None = None) -> UpperHalfPoint:
    """tau or w_N(tau), translated to |Re| <= 1/2, whichever sits higher."""
    with _prec(precision_bits):
        if not isinstance(tau, UpperHalfPoint):
            tau = UpperHalfPoint.from_complex(tau)
        t = _translate(tau)
        w = _translate(fricke(t, N))
        return w if w.im > t.im else t


def apply_matrix(g, tau: UpperHalfPoint, precision_bits: int | None = None) -> UpperHalfPoint:
    a, b, c, d = g
    with _prec(precision_bits):
        t = tau.value
        return UpperHalfPoint.from_complex((a * t + b) / (c * t + d))


def as_fraction(x: mpf) -> Fraction:
    man, exp = mpmath.mpf(x).man_exp
    return Fraction(man) * Fraction(2) ** exp
