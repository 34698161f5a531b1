"""Counter-keyed coordinate sampling.

Coordinate choices are keyed to the update's rank ``t`` rather than to
worker identity, so the coordinate drawn at rank ``t`` is reproducible
regardless of thread/process scheduling.  The generator is a stateless
64-bit mix (splitmix64) combined with a multiply-shift bounded
reduction, which is rejection-free and modulo-free and gives identical
streams on every platform.
"""

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    """One splitmix64 mixing round; maps any 64-bit value to a 64-bit value."""
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def split_stream(seed: int, label: int) -> int:
    """Derive an independent substream seed (e.g. one per experiment arm)."""
    return splitmix64((seed & MASK64) ^ splitmix64(label & MASK64))


def coord_at(seed: int, t: int, n: int) -> int:
    """Coordinate drawn at rank ``t``, uniform on ``[0, n)``.

    Lemire multiply-shift reduction of a mixed 64-bit word; the bias is
    at most ``n / 2**64`` per draw.
    """
    word = splitmix64((seed & MASK64) ^ splitmix64(t & MASK64))
    return (word * n) >> 64


def uniform_at(seed: int, t: int) -> float:
    """Deterministic uniform float in [0, 1) keyed by (seed, t)."""
    word = splitmix64((seed & MASK64) ^ splitmix64(t & MASK64))
    return (word >> 11) * (1.0 / (1 << 53))
