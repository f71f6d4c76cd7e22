"""Group arithmetic, word norms, walk increments, and binary sceneries.

Three group families are supported through one element interface:

* integer lattices Z^d (normal form: coordinate tuple),
* free groups F_s (normal form: reduced word of signed generator letters),
* the discrete Heisenberg group (normal form: upper-unitriangular integer
  triple (a, b, c) with (a,b,c)(a',b',c') = (a+a', b+b', c+c'+a*b')).

Normal forms are unique, so equality and hashing are structural.  The walk
alphabet always has 2s symbols (generators then inverses), even for
self-inverse structure, keeping the branching factor r = 2s uniform.

A scenery is a deterministic fair-bit labeling of the group realized lazily:
the bit at an element is a keyed hash of its normal form, so a walk can read
arbitrarily far without materializing anything.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import SizeCapError, StructuralError, UnsupportedGroupError

HEISENBERG_EXACT_NORM_CAP = 20


@dataclass(frozen=True)
class GroupSpec:
    """Group family plus its generator count."""

    kind: str
    d: int = 0  # lattice dimension (kind == "lattice")
    s: int = 0  # free generator count (kind == "free")

    def __post_init__(self):
        if self.kind == "lattice":
            if self.d < 1:
                raise StructuralError("lattice dimension must be >= 1")
        elif self.kind == "free":
            if self.s < 1:
                raise StructuralError("free group needs at least one generator")
        elif self.kind != "heisenberg":
            raise StructuralError(f"unknown group kind {self.kind!r}")

    @classmethod
    def lattice(cls, d: int) -> "GroupSpec":
        return cls(kind="lattice", d=d)

    @classmethod
    def free(cls, s: int) -> "GroupSpec":
        return cls(kind="free", s=s)

    @classmethod
    def heisenberg(cls) -> "GroupSpec":
        return cls(kind="heisenberg")

    @property
    def n_generators(self) -> int:
        if self.kind == "lattice":
            return self.d
        if self.kind == "free":
            return self.s
        return 2

    @property
    def alphabet_size(self) -> int:
        return 2 * self.n_generators

    def describe(self) -> str:
        if self.kind == "lattice":
            return f"Z^{self.d}"
        if self.kind == "free":
            return f"F_{self.s}"
        return "Heisenberg"


@dataclass(frozen=True)
class GroupElement:
    spec: GroupSpec
    data: tuple

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def norm_key(self) -> bytes:
        """Canonical byte encoding of the normal form (stable across processes)."""
        return repr((self.spec.kind, self.data)).encode("ascii")


def identity(spec: GroupSpec) -> GroupElement:
    if spec.kind == "lattice":
        return GroupElement(spec, (0,) * spec.d)
    if spec.kind == "free":
        return GroupElement(spec, ())
    return GroupElement(spec, (0, 0, 0))


def generator(spec: GroupSpec, i: int, inverse: bool = False) -> GroupElement:
    """The i-th generator (0-based) or its inverse."""
    s = spec.n_generators
    if not (0 <= i < s):
        raise StructuralError(f"generator index {i} out of range for {spec.describe()}")
    sign = -1 if inverse else 1
    if spec.kind == "lattice":
        vec = [0] * spec.d
        vec[i] = sign
        return GroupElement(spec, tuple(vec))
    if spec.kind == "free":
        return GroupElement(spec, (sign * (i + 1),))
    if i == 0:
        return GroupElement(spec, (sign, 0, 0))
    return GroupElement(spec, (0, sign, 0))


def symbol_element(spec: GroupSpec, symbol: int) -> GroupElement:
    """Walk symbol -> element: symbols 0..s-1 are generators, s..2s-1 inverses."""
    s = spec.n_generators
    if not (0 <= symbol < 2 * s):
        raise StructuralError(f"symbol {symbol} outside alphabet of size {2 * s}")
    return generator(spec, symbol % s, inverse=symbol >= s)


def multiply(a: GroupElement, b: GroupElement) -> GroupElement:
    if a.spec != b.spec:
        raise StructuralError("cannot multiply elements of different groups")
    spec = a.spec
    if spec.kind == "lattice":
        return GroupElement(spec, tuple(x + y for x, y in zip(a.data, b.data)))
    if spec.kind == "free":
        left = list(a.data)
        for letter in b.data:
            if left and left[-1] == -letter:
                left.pop()
            else:
                left.append(letter)
        return GroupElement(spec, tuple(left))
    a1, b1, c1 = a.data
    a2, b2, c2 = b.data
    return GroupElement(spec, (a1 + a2, b1 + b2, c1 + c2 + a1 * b2))


def inverse(a: GroupElement) -> GroupElement:
    spec = a.spec
    if spec.kind == "lattice":
        return GroupElement(spec, tuple(-x for x in a.data))
    if spec.kind == "free":
        return GroupElement(spec, tuple(-letter for letter in reversed(a.data)))
    x, y, z = a.data
    return GroupElement(spec, (-x, -y, -z + x * y))


# ---------------------------------------------------------------------------
# Word norms
# ---------------------------------------------------------------------------


class _HeisenbergBall:
    """Lazily grown BFS ball of the Heisenberg Cayley graph around identity."""

    def __init__(self):
        self.norm_of = {(0, 0, 0): 0}
        self.frontier = [(0, 0, 0)]
        self.radius = 0

    def expand_to(self, radius: int):
        spec = GroupSpec.heisenberg()
        steps = [generator(spec, i, inv).data for i in range(2) for inv in (False, True)]
        while self.radius < radius and self.frontier:
            nxt = []
            for tri in self.frontier:
                a1, b1, c1 = tri
                for a2, b2, c2 in steps:
                    cand = (a1 + a2, b1 + b2, c1 + c2 + a1 * b2)
                    if cand not in self.norm_of:
                        self.norm_of[cand] = self.radius + 1
                        nxt.append(cand)
            self.frontier = nxt
            self.radius += 1


_HEISENBERG_BALL = _HeisenbergBall()


def _heisenberg_bounds(data: tuple) -> tuple[int, int]:
    """Certified [lower, upper] word-length bracket for a Heisenberg element.

    Lower: the abelianization forces |a|+|b| letters, and the central
    coordinate grows at most quadratically in the word length (|c| <= (L/2)^2),
    so L >= 2 sqrt(|c|).  Upper: realize (a, b, 0) directly, then the central
    part via commutators [x^p, y^q] = z^{pq}.
    """
    a, b, c = data
    lower = max(abs(a) + abs(b), math.isqrt(max(4 * abs(c) - 1, 0)) + 1 if c else 0)
    cost_z = 0
    c_abs = abs(c)
    if c_abs:
        p = math.isqrt(c_abs)
        if p * p < c_abs:
            p += 1
        q, rem = divmod(c_abs, p)
        cost_z = 2 * (p + q)
        if rem:
            cost_z += 2 * rem + 2
    upper = abs(a) + abs(b) + cost_z
    return lower, max(lower, upper)


def word_norm_bounds(a: GroupElement) -> tuple[int, int]:
    """Certified bounds on the word norm; equal entries mean the norm is exact."""
    if a.spec.kind == "lattice":
        n = sum(abs(x) for x in a.data)
        return n, n
    if a.spec.kind == "free":
        n = len(a.data)
        return n, n
    known = _HEISENBERG_BALL.norm_of.get(a.data)
    if known is not None:
        return known, known
    lower, upper = _heisenberg_bounds(a.data)
    if lower <= HEISENBERG_EXACT_NORM_CAP:
        _HEISENBERG_BALL.expand_to(min(upper, HEISENBERG_EXACT_NORM_CAP))
        known = _HEISENBERG_BALL.norm_of.get(a.data)
        if known is not None:
            return known, known
        lower = max(lower, _HEISENBERG_BALL.radius + 1)
    return lower, upper


def word_norm(a: GroupElement) -> int:
    """Exact word length w.r.t. the symmetric generating set.

    Lattice and free norms are closed form; the Heisenberg norm is found by
    breadth-first search, exact up to length 20, beyond which only the
    bracket from :func:`word_norm_bounds` is certified and this raises.
    """
    lower, upper = word_norm_bounds(a)
    if lower == upper:
        return lower
    raise SizeCapError(
        f"exact Heisenberg norm exceeds the BFS cap {HEISENBERG_EXACT_NORM_CAP}; "
        f"bracket is [{lower}, {upper}]"
    )


def weighted_rank(spec: GroupSpec) -> int:
    """Scaling dimension d(G): lattice rank, or 4 for the Heisenberg group.

    Sum of i * (rank growth) over the lower central series quotients; the
    free group grows exponentially and has no polynomial scaling, so it is
    refused.
    """
    if spec.kind == "lattice":
        return spec.d
    if spec.kind == "heisenberg":
        # series ranks (2, 3): 1*(2-0) + 2*(3-2)
        return 4
    raise UnsupportedGroupError("free groups have exponential scaling, no weighted rank")


# ---------------------------------------------------------------------------
# Walk increments and sceneries
# ---------------------------------------------------------------------------


def _philox(seed: int, stream: int) -> np.random.Generator:
    # counter-based: the (seed, stream) pair fully determines the sequence,
    # independent of process or thread layout
    return np.random.Generator(np.random.Philox(key=((seed & 0xFFFFFFFFFFFFFFFF) << 64) | (stream & 0xFFFFFFFFFFFFFFFF)))


def sample_increments(spec: GroupSpec, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """n i.i.d. walk symbols, uniform over the 2s-letter alphabet."""
    if n < 0:
        raise StructuralError("length must be nonnegative")
    gen = _philox(seed, stream)
    return gen.integers(0, spec.alphabet_size, size=n, dtype=np.int64)


def symbols_to_string(spec: GroupSpec, symbols) -> str:
    """Dump increments as a readable word: g1 g2 ... for generators, G1 G2 ...
    for their inverses."""
    s = spec.n_generators
    parts = []
    for sym in symbols:
        sym = int(sym)
        if not (0 <= sym < 2 * s):
            raise StructuralError(f"symbol {sym} outside alphabet of size {2 * s}")
        name = f"g{sym % s + 1}"
        parts.append(name.upper() if sym >= s else name)
    return " ".join(parts)


def string_to_symbols(spec: GroupSpec, text: str) -> np.ndarray:
    """Inverse of :func:`symbols_to_string`."""
    s = spec.n_generators
    out = []
    for token in text.split():
        if len(token) < 2 or token[0] not in "gG":
            raise StructuralError(f"bad symbol token {token!r}")
        idx = int(token[1:]) - 1
        if not (0 <= idx < s):
            raise StructuralError(f"generator index out of range in {token!r}")
        out.append(idx + (s if token[0] == "G" else 0))
    return np.asarray(out, dtype=np.int64)


class Scenery:
    """Deterministic fair-bit labeling of group elements, keyed by a seed.

    The bit at an element is a keyed blake2b hash of its normal form: the
    infinite configuration exists exactly as far as it is ever read, and two
    processes with the same seed read identical bits.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._key = (self.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
        self._cache: dict = {}

    def value(self, element: GroupElement) -> int:
        data = element.data
        bit = self._cache.get(data)
        if bit is None:
            digest = hashlib.blake2b(element.norm_key(), key=self._key, digest_size=1)
            bit = digest.digest()[0] & 1
            self._cache[data] = bit
        return bit

    def __eq__(self, other):
        return isinstance(other, Scenery) and other.seed == self.seed

    def __hash__(self):
        return hash(("scenery", self.seed))


class DictScenery:
    """Explicit scenery for tests: bit values from a dict of normal forms."""

    def __init__(self, values: dict, default: int = 0):
        self.values = dict(values)
        self.default = int(default)

    def value(self, element: GroupElement) -> int:
        return self.values.get(element.data, self.default)


# ---------------------------------------------------------------------------
# Meeting diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeetingResult:
    """Outcome of the two-trajectory small-norm search on [h, h^5]."""

    n: int | None
    norm_bound_u: float = float("nan")
    norm_bound_v: float = float("nan")
    uncertain_skips: int = 0

    @property
    def found(self) -> bool:
        return self.n is not None


class _ProductTracker:
    """Running product of walk symbols with O(1) amortized norm brackets."""

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        if spec.kind == "lattice":
            self.vec = [0] * spec.d
        elif spec.kind == "free":
            self.stack: list[int] = []
        else:
            self.tri = (0, 0, 0)

    def push(self, symbol: int):
        spec = self.spec
        s = spec.n_generators
        i, sign = symbol % s, (-1 if symbol >= s else 1)
        if spec.kind == "lattice":
            self.vec[i] += sign
        elif spec.kind == "free":
            letter = sign * (i + 1)
            if self.stack and self.stack[-1] == -letter:
                self.stack.pop()
            else:
                self.stack.append(letter)
        else:
            a1, b1, c1 = self.tri
            step = generator(spec, i, inverse=sign < 0).data
            self.tri = (a1 + step[0], b1 + step[1], c1 + step[2] + a1 * step[1])

    def norm_bounds(self) -> tuple[int, int]:
        spec = self.spec
        if spec.kind == "lattice":
            n = sum(abs(x) for x in self.vec)
            return n, n
        if spec.kind == "free":
            n = len(self.stack)
            return n, n
        return word_norm_bounds(GroupElement(spec, self.tri))


def meeting_diagnostic(
    spec: GroupSpec,
    u: np.ndarray,
    v: np.ndarray,
    h: int,
    c: float,
    cap: int | None = None,
) -> MeetingResult:
    """Smallest n in [h, h^5] with both running products of norm < c sqrt(n).

    Whenever the exact Heisenberg norm is out of BFS range, the certified
    upper bound is used, so a returned n is always a true qualifier; steps
    whose bracket straddles the threshold are skipped and counted in
    `uncertain_skips`.  Absence is a value, not an error.
    """
    if h < 1:
        raise StructuralError("h must be >= 1")
    top = h**5 if cap is None else min(h**5, cap)
    top = min(top, len(u), len(v))
    pu = _ProductTracker(spec)
    pv = _ProductTracker(spec)
    uncertain = 0
    for step in range(top):
        pu.push(int(u[step]))
        pv.push(int(v[step]))
        n = step + 1
        if n < h:
            continue
        threshold = c * math.sqrt(n)
        lo_u, hi_u = pu.norm_bounds()
        lo_v, hi_v = pv.norm_bounds()
        if hi_u < threshold and hi_v < threshold:
            return MeetingResult(n=n, norm_bound_u=hi_u, norm_bound_v=hi_v)
        if (lo_u < threshold <= hi_u) or (lo_v < threshold <= hi_v):
            uncertain += 1
    return MeetingResult(n=None, uncertain_skips=uncertain)
