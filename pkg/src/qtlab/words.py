"""Free-group word arithmetic on reduced strings.

Generators are lowercase letters, inverses the matching uppercase letters.
All functions expect and return freely reduced words; the Cayley graph of the
free group is a tree, so reduced words double as tree vertices and
d(u, v) = |u| + |v| - 2 * (length of the common prefix).
"""

from __future__ import annotations

GENERATOR_POOL = "abcdefghijklmnopqrstuvwxyz"


def generators(rank: int) -> str:
    if not (2 <= rank <= len(GENERATOR_POOL)):
        raise ValueError(f"rank must be in [2, {len(GENERATOR_POOL)}], got {rank}")
    return GENERATOR_POOL[:rank]


def inv_letter(c: str) -> str:
    return c.swapcase()


def inv(w: str) -> str:
    return w[::-1].swapcase()


def reduce_word(w: str) -> str:
    out: list[str] = []
    for c in w:
        if out and out[-1] == c.swapcase():
            out.pop()
        else:
            out.append(c)
    return "".join(out)


def mul(u: str, v: str) -> str:
    """Product of two reduced words, reduced."""
    i = len(u)
    j = 0
    n = len(v)
    while i > 0 and j < n and u[i - 1] == v[j].swapcase():
        i -= 1
        j += 1
    return u[:i] + v[j:]


def is_reduced(w: str) -> bool:
    return all(w[i] != w[i + 1].swapcase() for i in range(len(w) - 1))


def common_prefix_len(u: str, v: str) -> int:
    n = min(len(u), len(v))
    i = 0
    while i < n and u[i] == v[i]:
        i += 1
    return i


def word_dist(u: str, v: str) -> int:
    """Tree distance between reduced words (both read from the identity)."""
    return len(u) + len(v) - 2 * common_prefix_len(u, v)


def geodesic(u: str, v: str) -> list[str]:
    """Vertices along the tree geodesic from u to v, endpoints included."""
    p = common_prefix_len(u, v)
    down = [u[:k] for k in range(len(u), p, -1)]
    up = [v[:k] for k in range(p, len(v) + 1)]
    return down + up


def is_cyclically_reduced(w: str) -> bool:
    if not w:
        return False
    return is_reduced(w) and w[0] != w[-1].swapcase()


def cyclic_rotations(w: str) -> list[str]:
    return [w[k:] + w[:k] for k in range(len(w))]


def is_proper_power(w: str) -> bool:
    """True if w = u^k for some k >= 2 (w assumed cyclically reduced)."""
    n = len(w)
    for d in range(1, n):
        if n % d == 0 and w == w[:d] * (n // d):
            return True
    return False


def conjugate_as_cyclic(w1: str, w2: str) -> bool:
    """Conjugacy test for cyclically reduced words, inversion included."""
    if len(w1) != len(w2):
        return False
    rots = cyclic_rotations(w1)
    return w2 in rots or inv(w2) in rots


def periodic_prefix_len(s: str, w: str) -> int:
    """Length of the longest prefix of s matching w repeated forever."""
    n = len(w)
    i = 0
    m = len(s)
    while i < m and s[i] == w[i % n]:
        i += 1
    return i
