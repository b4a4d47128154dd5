"""Replayable uniform mark fields over potential edges.

Every mark is a pure function of ``(seed, stream, edge, channel)``: the
counter-based Philox4x64-10 generator is keyed with ``(seed, stream)`` and
fed a 256-bit counter built from the packed endpoint coordinates and the
channel tag. Nothing is stored, so marks can be queried in any order and any
number of times.

Counter layout (all words unsigned 64 bit)::

    c0 = packed first endpoint    c1 = packed second endpoint
    c2 = channel | d << 8 | directed << 16
    c3 = ENCODING_VERSION

Each coordinate takes 16 bits (offset by 2**15), so ``d <= 4`` and
``|coordinate| < 2**15``.  The 64-bit output word ``k`` is mapped to
``((k >> 11) + 0.5) / 2**53`` which lies strictly inside ``(0, 1)`` and is
exactly representable as a double.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import IntEnum

import numba as nb
import numpy as np

GENERATOR_NAME = "philox4x64-10"
ENCODING_VERSION = 1
GENERATOR_VERSION = f"{GENERATOR_NAME}/enc{ENCODING_VERSION}"

MAX_DIM = 4
_COORD_BITS = 16
_COORD_OFFSET = 1 << (_COORD_BITS - 1)
_MASK64 = (1 << 64) - 1


class Channel(IntEnum):
    U = 1
    VX = 2  # auxiliary V attached to the first endpoint of the edge key
    VY = 3  # auxiliary V attached to the second endpoint
    W = 4
    X = 5
    PRIORITY = 6
    TAIL = 7  # per-vertex indicator of an open edge leaving the region


# --- Philox4x64-10 ---------------------------------------------------------

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    lo = a * b
    al = a & _LO32
    ah = a >> _S32
    bl = b & _LO32
    bh = b >> _S32
    t = ah * bl + ((al * bl) >> _S32)
    w = (t & _LO32) + al * bh
    hi = ah * bh + (t >> _S32) + (w >> _S32)
    return hi, lo


@nb.njit(cache=True)
def philox_block(c0, c1, c2, c3, k0, k1):
    """One Philox4x64-10 block; all arguments are reinterpreted as uint64."""
    c0 = np.uint64(c0)
    c1 = np.uint64(c1)
    c2 = np.uint64(c2)
    c3 = np.uint64(c3)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def _word_to_uniform(w):
    return (float(w >> _S11) + 0.5) * _INV53


@nb.njit(cache=True)
def uniform_from_words(c0, c1, c2, c3, k0, k1):
    w = philox_block(c0, c1, c2, c3, k0, k1)[0]
    return _word_to_uniform(w)


@nb.njit(cache=True)
def uniforms_from_words(c0, c1, c2, c3, k0, k1):
    out = np.empty(c0.shape[0])
    for i in range(c0.shape[0]):
        w = philox_block(c0[i], c1[i], c2, c3, k0, k1)[0]
        out[i] = _word_to_uniform(w)
    return out


def _signed(x: int) -> int:
    x &= _MASK64
    return x - (1 << 64) if x >= (1 << 63) else x


@functools.lru_cache(maxsize=1 << 16)
def pack_vertex(v) -> int:
    """Signed 64-bit packing of a vertex (16 bits per coordinate)."""
    if len(v) > MAX_DIM:
        raise ValueError(f"mark encoding supports d <= {MAX_DIM}")
    word = 0
    for i, a in enumerate(v):
        if not -_COORD_OFFSET <= a < _COORD_OFFSET:
            raise ValueError(f"coordinate {a} outside the encodable range")
        word |= (a + _COORD_OFFSET) << (_COORD_BITS * i)
    return _signed(word)


def channel_word(channel: int, d: int, directed: bool) -> int:
    return int(channel) | (d << 8) | (int(directed) << 16)


_channel_word = functools.lru_cache(maxsize=256)(channel_word)


def parse_seed(seed) -> int:
    """Accept an int or a decimal / ``0x`` hex string; reduce modulo 2**64."""
    if isinstance(seed, str):
        seed = int(seed, 0)
    return int(seed) & _MASK64


@dataclass(frozen=True)
class MarkField:
    """Deterministic field of Uniform(0,1) marks.

    ``stream`` separates independent fields that share a seed (e.g. the
    fresh ``G_{pJ}`` samples used by domination reports).
    """

    seed: int
    stream: int = 0
    directed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "seed", parse_seed(self.seed))
        object.__setattr__(self, "stream", int(self.stream) & _MASK64)
        object.__setattr__(self, "_k", (_signed(self.seed), _signed(self.stream)))

    @property
    def key(self):
        return self._k

    def _mark(self, x, y, channel) -> float:
        k0, k1 = self._k
        return uniform_from_words(pack_vertex(x), pack_vertex(y),
                                  _channel_word(channel, len(x), self.directed),
                                  ENCODING_VERSION, k0, k1)

    def mark(self, edge, channel: Channel) -> float:
        x, y = edge
        if not self.directed and y < x:
            x, y = y, x
        return self._mark(x, y, channel)

    # named channels ---------------------------------------------------
    def u(self, edge) -> float:
        return self.mark(edge, Channel.U)

    def w(self, edge) -> float:
        return self.mark(edge, Channel.W)

    def x(self, edge) -> float:
        return self.mark(edge, Channel.X)

    def priority(self, edge) -> float:
        return self.mark(edge, Channel.PRIORITY)

    def v(self, edge, endpoint) -> float:
        """Auxiliary mark of ``edge`` attached to ``endpoint``."""
        return self.mark(edge, v_channel(edge, endpoint, self.directed))

    def tail(self, vertex) -> float:
        return self._mark(vertex, vertex, Channel.TAIL)

    def marks(self, edges, channel: Channel) -> np.ndarray:
        """Vectorised :meth:`mark` over a list of edges."""
        if not len(edges):
            return np.empty(0)
        k0, k1 = self.key
        first, second = [], []
        for x, y in edges:
            if not self.directed and y < x:
                x, y = y, x
            first.append(pack_vertex(x))
            second.append(pack_vertex(y))
        d = len(edges[0][0])
        return uniforms_from_words(np.array(first, dtype=np.int64), np.array(second, dtype=np.int64),
                                   channel_word(channel, d, self.directed), ENCODING_VERSION, k0, k1)


def v_channel(edge, endpoint, directed: bool = False) -> Channel:
    x, y = edge
    if not directed and y < x:
        x, y = y, x
    if endpoint == x:
        return Channel.VX
    if endpoint == y:
        return Channel.VY
    raise ValueError(f"{endpoint} is not an endpoint of {edge}")


def mark(field: MarkField, edge, channel: Channel) -> float:
    return field.mark(edge, channel)


def edge_order(field, edges) -> list:
    """Edges sorted by their priority mark; ties broken by the edge key."""
    edges = list(edges)
    if isinstance(field, MarkField):
        pri = field.marks(edges, Channel.PRIORITY).tolist()
    else:
        pri = [field.priority(e) for e in edges]
    return [e for _, e in sorted(zip(pri, edges))]
