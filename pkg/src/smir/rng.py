"""Seeded, splittable xoshiro256++ streams.

The generator is implemented here (rather than using numpy's bit generators)
so the exact bit stream is pinned by this file: 64 independent xoshiro256++
lanes advanced in lockstep with wrapping uint64 arithmetic.  Outputs are
read step-major (all lanes of step 0, then all lanes of step 1, ...), so a
shorter draw from a fresh stream is always a prefix of a longer one.

Each stream is keyed by ``(seed, name)``; lanes are initialised with
SplitMix64 from ``seed ^ blake2b64(name)``.
"""
from __future__ import annotations

import hashlib

import numpy as np

LANES = 64
_MASK = (1 << 64) - 1


def _name_hash(name: str) -> int:
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "little")


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step on a Python int; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _rotl(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


class Stream:
    """A named random stream; draws continue where the previous one stopped."""

    def __init__(self, seed: int, name: str = ""):
        self.seed = int(seed) & _MASK
        self.name = name
        sm = self.seed ^ _name_hash(name)
        words = []
        for _ in range(4 * LANES):
            sm, out = splitmix64(sm)
            words.append(out)
        self._s = np.array(words, dtype=np.uint64).reshape(LANES, 4).T.copy()
        self._buf = np.empty(0, dtype=np.uint64)

    @classmethod
    def from_lane_states(cls, states) -> "Stream":
        """A stream whose 64 lanes start from explicit (s0, s1, s2, s3) words."""
        st = np.asarray(states, dtype=np.uint64)
        if st.shape != (LANES, 4):
            raise ValueError(f"expected lane states of shape ({LANES}, 4), got {st.shape}")
        obj = cls.__new__(cls)
        obj.seed, obj.name = None, "<explicit>"
        obj._s = st.T.copy()
        obj._buf = np.empty(0, dtype=np.uint64)
        return obj

    def _step(self) -> np.ndarray:
        s0, s1, s2, s3 = self._s
        with np.errstate(over="ignore"):
            result = _rotl(s0 + s3, 23) + s0
        t = s1 << np.uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self._s[3] = _rotl(s3, 45)
        return result

    def bits(self, k: int) -> np.ndarray:
        """k raw 64-bit outputs."""
        k = int(k)
        if k < 0:
            raise ValueError("negative draw size")
        need = k - self._buf.size
        if need > 0:
            blocks = [self._buf] + [self._step() for _ in range(-(-need // LANES))]
            self._buf = np.concatenate(blocks)
        out, self._buf = self._buf[:k], self._buf[k:]
        return out

    def uniform(self, k: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """k doubles in [low, high) from the top 53 bits of each output."""
        u = (self.bits(k) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        if low == 0.0 and high == 1.0:
            return u
        return low + (high - low) * u

    def normal(self, k: int) -> np.ndarray:
        """k standard normals via Box-Muller (cos and sin branches interleaved)."""
        m = -(-int(k) // 2)
        u = self.uniform(2 * m)
        r = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))  # 1 - u lies in (0, 1]
        t = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * m)
        z[0::2] = r * np.cos(t)
        z[1::2] = r * np.sin(t)
        return z[:k]

    def integers(self, low: int, high: int, k: int) -> np.ndarray:
        """k integers uniform on the closed range [low, high]."""
        span = high - low + 1
        if span <= 0:
            raise ValueError("empty integer range")
        return low + np.floor(self.uniform(k) * span).astype(np.int64)

    def log_uniform(self, k: int, low: float, high: float) -> np.ndarray:
        """k values whose logarithm is uniform on [log low, log high)."""
        return np.exp(self.uniform(k, np.log(low), np.log(high)))


def stream(seed: int, *names) -> Stream:
    """The stream for ``seed`` and a hierarchical name such as ('A', 'rotations')."""
    return Stream(seed, "/".join(str(n) for n in names))
