"""Counter-based pseudo-random streams.

All randomness in this package flows through a stateless counter scheme:
a 64-bit key identifies a stream, a 64-bit counter indexes a position in
it, and every draw is a pure function of ``(key, counter)``.  Streams for
different purposes (kernel draws, per-site noise) are derived from a user
seed by folding small context ids into the key.  Because draws are
addressed rather than sequenced, results do not depend on evaluation
order, chunking, or thread count, and a simulation of ``T`` frames is a
bitwise prefix of a longer one with the same seed.

The bit mixer is the SplitMix64 finalizer.  Gaussian variates use the
Marsaglia polar method with an attempt-indexed counter layout so that
rejected proposals never shift the stream seen by other draws.

References
----------
Steele, Lea, Flood (2014), "Fast splittable pseudorandom number
generators", OOPSLA.
Marsaglia, Bray (1964), "A convenient method for generating normal
variables", SIAM Review.
"""

import numpy as np

from .errors import NumericalError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = float(2.0 ** -53)

# counter layout for per-frame draws: bits [33..63] frame index,
# bits [1..32] rejection attempt, bit 0 polar component
FRAME_SHIFT = np.uint64(33)
_MAX_ATTEMPTS = 64


def mix64(z):
    """SplitMix64 finalizer on uint64 scalars or arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):  # wraparound is the point
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_key(seed, ids=()):
    """Derive a stream key from a seed and a sequence of context ids.

    Parameters
    ----------
    seed : int
        Base seed, taken modulo 2**64.
    ids : sequence of int or ndarray
        Context identifiers folded into the key one at a time.  An array
        entry broadcasts, yielding an array of keys, which is how per-site
        key vectors are produced in one shot.

    Returns
    -------
    numpy.uint64 or ndarray of uint64
    """
    key = mix64(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))
    for x in ids:
        x = np.asarray(x)
        if x.dtype.kind not in "iu":
            raise TypeError("context ids must be integers")
        with np.errstate(over="ignore"):
            key = mix64(key ^ (x.astype(np.uint64) + _GOLDEN))
    return key


def raw_u64(key, counters):
    """Word at position ``counters`` of stream ``key`` (both broadcast)."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.asarray(key, dtype=np.uint64) + _GOLDEN * c)


def uniforms(key, counters):
    """Uniform [0, 1) doubles with 53-bit mantissas, one per counter."""
    return (raw_u64(key, counters) >> np.uint64(11)).astype(np.float64) * _INV53


def gaussians(keys, base_counters):
    """Standard normal draws, one per (key, base counter) pair.

    Each draw runs the polar method on the uniform pair at counters
    ``base + 2a`` and ``base + 2a + 1`` for attempts ``a = 0, 1, ...``
    and keeps the first accepted component.  ``keys`` and
    ``base_counters`` broadcast against each other.

    Returns
    -------
    ndarray of float64 with the broadcast shape.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    base = np.asarray(base_counters, dtype=np.uint64)
    keys, base = np.broadcast_arrays(keys, base)
    out = np.empty(keys.shape, dtype=np.float64)
    kf = keys.reshape(-1)
    bf = base.reshape(-1)
    of = out.reshape(-1)

    pending = np.arange(kf.size)
    for attempt in range(_MAX_ATTEMPTS):
        if pending.size == 0:
            break
        step = np.uint64(2 * attempt)
        with np.errstate(over="ignore"):
            c0 = bf[pending] + step
            c1 = c0 + np.uint64(1)
        v1 = 2.0 * uniforms(kf[pending], c0) - 1.0
        v2 = 2.0 * uniforms(kf[pending], c1) - 1.0
        s = v1 * v1 + v2 * v2
        ok = (s > 0.0) & (s < 1.0)
        if np.any(ok):
            idx = pending[ok]
            sa = s[ok]
            of[idx] = v1[ok] * np.sqrt(-2.0 * np.log(sa) / sa)
            pending = pending[~ok]
    if pending.size:
        raise NumericalError(
            f"polar sampler failed to accept after {_MAX_ATTEMPTS} attempts "
            f"for {pending.size} draws"
        )
    return out


def _frame_base(frames):
    f = np.asarray(frames, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return f << FRAME_SHIFT


def frame_gaussians(site_keys, frames):
    """Standard normal noise for a block of frames.

    Parameters
    ----------
    site_keys : ndarray of uint64, shape (n,)
        One stream key per site.
    frames : ndarray of int, shape (B,)
        Absolute frame indices; each must be below 2**31.

    Returns
    -------
    ndarray, shape (B, n)
        Entry (b, s) depends only on (site_keys[s], frames[b]).
    """
    return gaussians(site_keys[None, :], _frame_base(frames)[:, None])


def frame_uniforms(site_keys, frames):
    """Uniform [0, 1) noise addressed like :func:`frame_gaussians`."""
    return uniforms(site_keys[None, :], _frame_base(frames)[:, None])
