"""Curve records, the curve file format, and the on-disk a(n) cache.

Curve file lines::

    label a1 a2 a3 a4 a6 conductor rank (x:y:z)|- torsion_order sha|-

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .ec_arith import (DomainError, RationalPoint, WeierstrassModel,
                       is_torsion, model, on_curve)

log = logging.getLogger(__name__)

CACHE_VERSION = 1
CACHE_ENV = "HEEGNER_INDEX_CACHE"

_POINT_RE = re.compile(r"^\((-?\d+):(-?\d+):(-?\d+)\)$")
_INT_RE = re.compile(r"^[+-]?\d+$")


class ParseError(ValueError):
    def __init__(self, msg, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = f"{path}:{lineno}: " if lineno is not None else ""
        super().__init__(where + msg)


class ValidationError(ParseError):
    pass


class ChecksumError(ValueError):
    pass


@dataclass(frozen=True)
class CurveRecord:
    label: str
    a1: int
    a2: int
    a3: int
    a4: int
    a6: int
    conductor: int
    rank: int
    generator: Optional[RationalPoint] = None
    torsion_order: int = 1
    sha_analytic: Optional[int] = None

    def __post_init__(self):
        if self.discriminant == 0:
            raise ValidationError(f"{self.label}: discriminant is zero")
        if self.conductor < 1:
            raise ValidationError(f"{self.label}: conductor must be positive")
        if self.rank < 0:
            raise ValidationError(f"{self.label}: rank must be non-negative")
        if self.torsion_order < 1:
            raise ValidationError(f"{self.label}: torsion order must be positive")
        if self.sha_analytic is not None and self.sha_analytic < 1:
            raise ValidationError(f"{self.label}: |Sha| must be positive")
        if self.generator is not None:
            if not on_curve(self.generator, self):
                raise ValidationError(f"{self.label}: generator {self.generator} is not on the curve")
            if is_torsion(self.generator, self):
                raise ValidationError(f"{self.label}: generator {self.generator} is torsion")

    @property
    def ainvs(self):
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    @property
    def model(self) -> WeierstrassModel:
        return model(self.ainvs)

    @property
    def discriminant(self) -> int:
        return self.model.discriminant

    def to_line(self) -> str:
        gen = str(self.generator) if self.generator is not None else "-"
        sha = str(self.sha_analytic) if self.sha_analytic is not None else "-"
        return " ".join([self.label, *map(str, self.ainvs), str(self.conductor),
                         str(self.rank), gen, str(self.torsion_order), sha])


def _int_field(tok, name, lineno, path):
    if not _INT_RE.match(tok):
        raise ParseError(f"{name}: expected an integer, got {tok!r}", lineno, path)
    return int(tok)


def parse_curve_line(line: str, lineno: int | None = None, path=None) -> CurveRecord:
    toks = line.split()
    if len(toks) != 11:
        raise ParseError(f"expected 11 fields, got {len(toks)}", lineno, path)
    label = toks[0]
    ainvs = [_int_field(t, n, lineno, path) for t, n in zip(toks[1:6], ("a1", "a2", "a3", "a4", "a6"))]
    conductor = _int_field(toks[6], "conductor", lineno, path)
    rank = _int_field(toks[7], "rank", lineno, path)
    gen = None
    if toks[8] != "-":
        mt = _POINT_RE.match(toks[8])
        if not mt:
            raise ParseError(f"generator: expected (x:y:z) or -, got {toks[8]!r}", lineno, path)
        X, Y, Z = (int(g) for g in mt.groups())
        from math import gcd
        if gcd(gcd(X, Y), Z) != 1:
            raise ParseError(f"generator coordinates {toks[8]} are not coprime", lineno, path)
        try:
            gen = RationalPoint.from_projective(X, Y, Z)
        except DomainError as e:
            raise ParseError(str(e), lineno, path) from None
    torsion = _int_field(toks[9], "torsion_order", lineno, path)
    sha = None if toks[10] == "-" else _int_field(toks[10], "sha", lineno, path)
    try:
        return CurveRecord(label, *ainvs, conductor=conductor, rank=rank, generator=gen,
                           torsion_order=torsion, sha_analytic=sha)
    except ValidationError as e:
        raise ValidationError(str(e), lineno, path) from None


def parse_curve_text(text: str, path=None) -> list[CurveRecord]:
    records = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        rec = parse_curve_line(line, lineno, path)
        if rec.label in seen:
            raise ParseError(f"duplicate label {rec.label}", lineno, path)
        seen.add(rec.label)
        records.append(rec)
    return records


def parse_curve_file(path) -> list[CurveRecord]:
    path = Path(path)
    return parse_curve_text(path.read_text(), path)


def bundled_curve_file() -> Path:
    return Path(__file__).with_name("data") / "curves.txt"


# ---------------------------------------------------------------------------
# coefficient cache

@dataclass
class CoefficientCache:
    label: str
    coefficients: np.ndarray
    M: int
    _list: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=np.int64)
        if len(self.coefficients) != self.M:
            raise ValueError(f"expected {self.M} coefficients, got {len(self.coefficients)}")
        if self.M >= 1 and self.coefficients[0] != 1:
            raise ValueError("a(1) must be 1")

    def __getitem__(self, n: int) -> int:
        """a(n), 1-based."""
        return int(self.coefficients[n - 1])

    def as_list(self) -> list:
        if self._list is None:
            self._list = self.coefficients.tolist()
        return self._list

    def truncate(self, M: int) -> "CoefficientCache":
        return CoefficientCache(self.label, self.coefficients[:M].copy(), M)


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "heegner_index"


def _cache_path(label: str, cache_dir) -> Path:
    safe = re.sub(r"[^A-Za-z0-9_.-]", "_", label)
    return Path(cache_dir) / f"{safe}.an"


def _checksum(body: str) -> str:
    return hashlib.sha256(body.encode()).hexdigest()


def _stored_length(path: Path, label: str) -> int:
    """M of a valid existing cache file, else 0."""
    try:
        with open(path) as fh:
            header = json.loads(fh.readline())
        if header.get("version") != CACHE_VERSION or header.get("label") != label:
            return 0
        M = int(header["M"])
    except (OSError, ValueError, KeyError):
        return 0
    return M if load_cache(label, M, path.parent) is not None else 0


def store_cache(cache: CoefficientCache, cache_dir=None) -> Path:
    """Atomically write a(1..M) for cache.label; keeps the longer table if one exists."""
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cache_dir.mkdir(parents=True, exist_ok=True)
    target = _cache_path(cache.label, cache_dir)
    if _stored_length(target, cache.label) >= cache.M:
        return target
    body = " ".join(map(str, cache.as_list()))
    header = {"label": cache.label, "M": cache.M, "version": CACHE_VERSION,
              "checksum": _checksum(body)}
    fd, tmp = tempfile.mkstemp(dir=cache_dir, prefix=".tmp-", suffix=".an")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n" + body + "\n")
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target


def load_cache(label: str, M: int, cache_dir=None) -> Optional[CoefficientCache]:
    """a(1..M) for label, or None if absent, too short, stale, or corrupt."""
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = _cache_path(label, cache_dir)
    if not path.exists():
        return None
    try:
        header_line, body = path.read_text().split("\n", 1)
        header = json.loads(header_line)
        body = body.strip()
        if header.get("version") != CACHE_VERSION or header.get("label") != label:
            return None
        if _checksum(body) != header.get("checksum"):
            raise ChecksumError(f"checksum mismatch in {path}")
        stored_M = int(header["M"])
        if stored_M < M:
            return None
        values = np.array([int(t) for t in body.split()], dtype=np.int64)
        if len(values) != stored_M:
            raise ChecksumError(f"length mismatch in {path}")
        if values[0] != 1:
            raise ChecksumError(f"a(1) != 1 in {path}")
        return CoefficientCache(label, values[:M].copy(), M)
    except (ChecksumError, ValueError, KeyError) as e:
        log.warning("ignoring cache file %s: %s", path, e)
        return None
