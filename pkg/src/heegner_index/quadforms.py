"""Binary quadratic forms: class groups, Heegner forms, Pell, automorphs, nu_N."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import count

from sympy import isprime
from sympy.ntheory import sqrt_mod

from .ec_arith import DomainError


@dataclass(frozen=True, order=True)
class QuadForm:
    A: int
    B: int
    C: int

    @property
    def disc(self) -> int:
        return self.B * self.B - 4 * self.A * self.C

    def __iter__(self):
        return iter((self.A, self.B, self.C))

    def is_primitive(self) -> bool:
        return math.gcd(math.gcd(self.A, self.B), self.C) == 1

    def __call__(self, x, y):
        return self.A * x * x + self.B * x * y + self.C * y * y

    def act(self, g) -> "QuadForm":
        """f(ax + by, cx + dy) for g = (a, b, c, d)."""
        a, b, c, d = g
        A, B, C = self
        return QuadForm(A * a * a + B * a * c + C * c * c,
                        2 * A * a * b + B * (a * d + b * c) + 2 * C * c * d,
                        A * b * b + B * b * d + C * d * d)

    def __str__(self):
        return f"[{self.A},{self.B},{self.C}]"


@dataclass(frozen=True)
class HeegnerPair:
    N: int
    D: int
    r: int
    r_conj: int | None = None

    def __post_init__(self):
        if (self.D - self.r * self.r) % (4 * self.N):
            raise DomainError(f"Heegner condition fails: {self.D} - {self.r}^2 = "
                              f"{self.D - self.r * self.r} is not divisible by 4N = {4 * self.N}")
        object.__setattr__(self, "r", self.r % (2 * self.N))
        if self.r_conj is None:
            object.__setattr__(self, "r_conj", (-self.r) % (2 * self.N))

    def conjugate(self) -> "HeegnerPair":
        return HeegnerPair(self.N, self.D, self.r_conj, self.r)


@dataclass(frozen=True)
class Automorph:
    a: int
    b: int
    c: int
    d: int
    x: int
    y: int
    disc: int

    @property
    def matrix(self):
        return ((self.a, self.b), (self.c, self.d))

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    def eigenvalue(self) -> float:
        return self.x + self.y * math.sqrt(self.disc)


def is_discriminant(D: int) -> bool:
    return D % 4 in (0, 1) and math.isqrt(D) ** 2 != D if D > 0 else D % 4 in (0, 1) and D != 0


def _squarefree(n: int) -> bool:
    n = abs(n)
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


def is_fundamental(D: int) -> bool:
    if D in (0, 1):
        return False
    if D % 4 == 1:
        return _squarefree(D)
    if D % 4 == 0:
        m = D // 4
        return m % 4 in (2, 3) and _squarefree(m)
    return False


# ---------------------------------------------------------------------------
# definite forms

def reduce_definite(f: QuadForm) -> QuadForm:
    """Gauss-reduced representative: |B| <= A <= C, B >= 0 when |B| = A or A = C."""
    A, B, C = f
    if f.disc >= 0 or A <= 0:
        raise DomainError(f"{f} is not positive definite")
    if not f.is_primitive():
        raise DomainError(f"{f} is not primitive")
    while True:
        if not -A < B <= A:
            k = (A - B) // (2 * A)
            B, C = B + 2 * k * A, A * k * k + B * k + C
        if A > C:
            A, B, C = C, -B, A
            continue
        if A == C and B < 0:
            B = -B
        return QuadForm(A, B, C)


def principal_form(D: int) -> QuadForm:
    b = D % 2
    return QuadForm(1, b, (b * b - D) // 4)


@lru_cache(maxsize=1024)
def _class_group(D):
    forms = []
    amax = math.isqrt(-D // 3)
    for A in range(1, amax + 1):
        for B in range(-A + 1, A + 1):
            if (B - D) % 2:
                continue
            num = B * B - D
            if num % (4 * A):
                continue
            C = num // (4 * A)
            if C < A or (C == A and B < 0):
                continue
            if math.gcd(math.gcd(A, B), C) == 1:
                forms.append(QuadForm(A, B, C))
    return tuple(forms)


def class_group(D: int) -> list[QuadForm]:
    """Reduced primitive forms of discriminant D < 0, one per class."""
    if D >= 0 or D % 4 not in (0, 1):
        raise DomainError(f"{D} is not a negative discriminant")
    return list(_class_group(D))


def class_number(D: int) -> int:
    return len(class_group(D)) if D < 0 else indefinite_class_number(D)


def compose(f: QuadForm, g: QuadForm) -> QuadForm:
    """Dirichlet composition, reduced."""
    if f.disc != g.disc:
        raise DomainError(f"discriminants differ: {f.disc} vs {g.disc}")
    if not (f.is_primitive() and g.is_primitive()):
        raise DomainError("composition needs primitive forms")
    D = f.disc
    a1, b1, _ = f
    a2, b2, c2 = g
    if a1 > a2:
        a1, b1, _, a2, b2, c2 = a2, b2, c2, a1, b1, f.C
    s = (b1 + b2) // 2
    n = b2 - s
    if a2 % a1 == 0:
        y1, d = 0, a1
    else:
        d, u, _ = _xgcd(a2, a1)
        y1 = u
    if s % d == 0:
        y2, x2, d1 = -1, 0, d
    else:
        d1, u, v = _xgcd(s, d)
        x2, y2 = u, -v
    v1, v2 = a1 // d1, a2 // d1
    r = (y1 * y2 * n - x2 * c2) % v1
    b3 = b2 + 2 * v2 * r
    a3 = v1 * v2
    c3 = (b3 * b3 - D) // (4 * a3)
    h = QuadForm(a3, b3, c3)
    return reduce_definite(h) if D < 0 else h


def _xgcd(a, b):
    """(g, u, v) with u a + v b = g >= 0."""
    u0, u1, v0, v1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        u0, u1 = u1, u0 - q * u1
        v0, v1 = v1, v0 - q * v1
    if a < 0:
        a, u0, v0 = -a, -u0, -v0
    return a, u0, v0


def inverse(f: QuadForm) -> QuadForm:
    return reduce_definite(QuadForm(f.A, -f.B, f.C))


# ---------------------------------------------------------------------------
# Heegner pairs and forms

def heegner_pairs(N: int, Dmax: int) -> list[HeegnerPair]:
    """Fundamental D in [-Dmax, 0) with D = r^2 mod 4N, one r per {r, -r} mod 2N."""
    if N < 1:
        raise DomainError("level must be positive")
    out = []
    for D in range(-3, -Dmax - 1, -1):
        if not is_fundamental(D):
            continue
        roots = sqrt_mod(D, 4 * N, all_roots=True) or []
        seen = set()
        for r in sorted({int(r) % (2 * N) for r in roots}):
            rc = (-r) % (2 * N)
            if r in seen or rc in seen:
                continue
            seen.update((r, rc))
            out.append(HeegnerPair(N, D, min(r, rc), max(r, rc)))
    return out


def heegner_forms(pair: HeegnerPair) -> list[QuadForm]:
    """One form [N a, B, C] with B = r mod 2N per class of Pic(O_D), a as small as possible.

    The class of [N a, B, C] is that of [a, B, N C]; forms are returned in the
    order of class_group(D).
    """
    N, D, r = pair.N, pair.D, pair.r
    if (D - r * r) % (4 * N):
        raise DomainError(f"{D} is not congruent to {r}^2 mod {4 * N}")
    classes = class_group(D)
    want = set(classes)
    found = {}
    for a in count(1):
        for t in range(a):
            B = r + 2 * N * t
            if (B * B - D) % (4 * N * a):
                continue
            # centre B in (-N a, N a]
            k = (N * a - B) // (2 * N * a)
            B += 2 * N * a * k
            C = (B * B - D) // (4 * N * a)
            Q = QuadForm(N * a, B, C)
            if not Q.is_primitive():
                continue
            cls = reduce_definite(QuadForm(a, B, N * C))
            if cls in want and cls not in found:
                found[cls] = Q
        if len(found) == len(want):
            break
        if a > 4 * N * abs(D):
            raise ArithmeticError(f"could not realise every class for {pair}")
    return [found[c] for c in classes]


# ---------------------------------------------------------------------------
# indefinite forms

def pell_fundamental(disc: int) -> tuple[int, int]:
    """Least x, y > 0 with x^2 - disc y^2 = 1, from the continued fraction of sqrt(disc)."""
    if disc <= 0 or math.isqrt(disc) ** 2 == disc:
        raise DomainError(f"{disc} must be a positive non-square")
    a0 = math.isqrt(disc)
    m, d, a = 0, 1, a0
    p_prev, p = 1, a0
    q_prev, q = 0, 1
    while p * p - disc * q * q != 1:
        m = d * a - m
        d = (disc - m * m) // d
        a = (a0 + m) // d
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
    return p, q


def fundamental_automorph(Q: QuadForm, N: int) -> Automorph:
    """M_Q = (x - B y, -2 C y; 2 A y, x + B y) from the least Pell solution of x^2 - disc y^2 = 1."""
    A, B, C = Q
    disc = Q.disc
    if A % N:
        raise DomainError(f"{N} does not divide A = {A}")
    x, y = pell_fundamental(disc)
    return Automorph(x - B * y, -2 * C * y, 2 * A * y, x + B * y, x, y, disc)


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n), with (a/-1) = sign(a) and (a/2) by a mod 8."""
    if n == 0:
        return 1 if a in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    while n % 2 == 0:
        n //= 2
        if a % 2 == 0:
            return 0
        if a % 8 in (3, 5):
            result = -result
    # Jacobi symbol for odd n
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def represented_values(f: QuadForm, bound: int = 10_000):
    """Values f(x, y) over coprime (x, y) in growing boxes, at most `bound` of them."""
    produced = 0
    for R in count(1):
        for x in range(-R, R + 1):
            for y in (range(0, R + 1) if abs(x) == R else (R,)):
                if (x, y) == (0, 0) or math.gcd(x, y) != 1:
                    continue
                yield f(x, y)
                produced += 1
                if produced >= bound:
                    return


def genus_character(D0: int, Q: QuadForm, N: int, N_prime: int | None = None,
                    bound: int = 10_000) -> int:
    """chi_{D0}(Q) for Q = [A, B, C] with N | A.

    0 if gcd(A/N, B, C, D0) > 1, else (D0/n) for some n coprime to D0
    represented by [A/N', B, C N'].
    """
    A, B, C = Q
    disc = Q.disc
    if A % N:
        raise DomainError(f"{N} does not divide A = {A}")
    if D0 % 4 not in (0, 1) or D0 == 0 or disc % D0 or (disc // D0) % 4 not in (0, 1):
        raise DomainError(f"{D0} is not a discriminant dividing {disc} with discriminant cofactor")
    if not sqrt_mod(D0, 4 * N, all_roots=True):
        # the symbol would depend on the choice of N'
        raise DomainError(f"{D0} is not a square mod {4 * N}")
    if math.gcd(math.gcd(A // N, B), math.gcd(C, D0)) > 1:
        return 0
    Np = N if N_prime is None else N_prime
    if N % Np:
        raise DomainError(f"{Np} does not divide {N}")
    f = QuadForm(A // Np, B, C * Np)
    while True:
        for n in represented_values(f, bound):
            if n != 0 and math.gcd(n, D0) == 1:
                return kronecker(D0, n)
        bound *= 4


def _indefinite_reduced_forms(disc):
    s = math.isqrt(disc)
    forms = []
    for B in range(1, s + 1):
        if (B - disc) % 2:
            continue
        ac = (B * B - disc) // 4
        if ac == 0:
            continue
        m = -ac
        for a in range(1, math.isqrt(m) + 1):
            if m % a:
                continue
            for aa in {a, m // a}:
                cc = m // aa
                for sgn in (1, -1):
                    A, C = sgn * aa, -sgn * cc
                    # reduced: |sqrt(disc) - 2|A|| < B < sqrt(disc)
                    t = 2 * abs(A)
                    if not (_lt_sqrt(B, disc) and _abs_sqrt_minus_lt(t, B, disc)):
                        continue
                    f = QuadForm(A, B, C)
                    if f.is_primitive():
                        forms.append(f)
    return sorted(set(forms))


def _lt_sqrt(B, disc):
    return B * B < disc


def _abs_sqrt_minus_lt(t, B, disc):
    """|sqrt(disc) - t| < B with B > 0, exactly."""
    # sqrt(disc) - B < t < sqrt(disc) + B
    lo_ok = t + B > 0 and (t + B) ** 2 > disc
    hi_ok = t - B < 0 or (t - B) ** 2 < disc
    return lo_ok and hi_ok


def _rho(f: QuadForm, disc: int) -> QuadForm:
    """Reduction step: the right neighbour of a reduced indefinite form."""
    _, B, C = f
    c = abs(C)
    if c * c < disc:
        # largest r = -B mod 2c below sqrt(disc)
        s = math.isqrt(disc)
        r = s - ((s + B) % (2 * c))
    else:
        r = -B % (2 * c)
        if r > c:
            r -= 2 * c
    return QuadForm(C, r, (r * r - disc) // (4 * C))


def _cycles(disc):
    forms = _indefinite_reduced_forms(disc)
    index = {f: i for i, f in enumerate(forms)}
    nxt = [index[_rho(f, disc)] for f in forms]
    cycle_of = [-1] * len(forms)
    ncyc = 0
    for i in range(len(forms)):
        if cycle_of[i] >= 0:
            continue
        j = i
        while cycle_of[j] < 0:
            cycle_of[j] = ncyc
            j = nxt[j]
        if cycle_of[j] != ncyc:
            raise ArithmeticError("reduction map is not a permutation")
        ncyc += 1
    return forms, index, cycle_of, ncyc


@lru_cache(maxsize=256)
def _indefinite_counts(disc):
    forms, index, cycle_of, narrow = _cycles(disc)
    # wide classes: also identify Q with -Q' = [-A, B, -C]
    parent = list(range(narrow))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for f, i in index.items():
        g = QuadForm(-f.A, f.B, -f.C)
        a, b = find(cycle_of[i]), find(cycle_of[index[g]])
        if a != b:
            parent[a] = b
    wide = len({find(i) for i in range(narrow)})
    return narrow, wide


def indefinite_class_number(disc: int, narrow: bool = False) -> int:
    """Classes of primitive forms of a positive non-square discriminant, via reduction cycles."""
    if disc <= 0 or disc % 4 not in (0, 1) or math.isqrt(disc) ** 2 == disc:
        raise DomainError(f"{disc} is not a positive non-square discriminant")
    n, w = _indefinite_counts(disc)
    return n if narrow else w


def reduction_cycles(disc: int) -> list[list[QuadForm]]:
    forms, _, cycle_of, ncyc = _cycles(disc)
    out = [[] for _ in range(ncyc)]
    for f, c in zip(forms, cycle_of):
        out[c].append(f)
    return out


def nu(N: int) -> int:
    """Number of real components of X0+(N) for prime N (Ogg)."""
    if not isprime(N):
        raise DomainError(f"{N} is not prime")
    if N == 2:
        # 4N = 8 and h(8) = 1
        return (indefinite_class_number(8) + 1) // 2
    if N % 4 == 1:
        total = indefinite_class_number(4 * N) + indefinite_class_number(N)
    else:
        total = indefinite_class_number(4 * N) + 1
    if total % 2:
        raise ArithmeticError(f"class numbers for N={N} give an odd numerator {total}")
    return total // 2
