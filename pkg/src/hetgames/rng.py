"""Counter-based 64-bit random number generation.

Reproducibility across platforms and processes is a stated contract of the
simulation harness, so the generator is owned by the package rather than
delegated to a platform default. The core is splitmix64 (Steele, Lea &
Flood's SplittableRandom finalizer): a 64-bit counter advanced by a fixed
odd constant, hashed through two xor-multiply rounds. Every draw is a pure
function of (seed, draw index), which makes streams trivially restartable
and lets the compiled simulation kernel reproduce the exact same stream
with integer ops alone.

Trial seeds are derived, not sequential: ``derive_trial_seed`` mixes
(base_seed, trial_id) through two finalizer rounds so neighboring trial ids
land in uncorrelated regions of the state space. The derivation is frozen
by golden tests; changing it silently would invalidate recorded runs.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
# 2**-53: top 53 bits of a draw -> uniform double in [0, 1)
_INV53 = 1.1102230246251565e-16


def splitmix64_mix(z: int) -> int:
    """One splitmix64 finalizer round on a 64-bit value."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive_trial_seed(base_seed: int, trial_id: int) -> int:
    """Map (base_seed, trial_id) to a 64-bit stream seed.

    Two finalizer rounds over base_seed offset by (trial_id + 1) times the
    golden-ratio constant. The +1 keeps trial 0 from collapsing onto the
    base seed itself.
    """
    if not 0 <= base_seed <= _MASK:
        raise ValueError(f"base_seed must be a u64, got {base_seed}")
    if trial_id < 0:
        raise ValueError(f"trial_id must be >= 0, got {trial_id}")
    z = (base_seed + GOLDEN * (trial_id + 1)) & _MASK
    return splitmix64_mix(splitmix64_mix(z))


class SplitMix64:
    """Sequential splitmix64 stream with the sampling helpers trials need.

    State is a single u64. ``next_uint64`` advances the counter by the
    golden-ratio constant and finalizes it; all other draws are built on
    top of the resulting uniform doubles, in documented order, so a stream
    is fully determined by its seed and the sequence of calls.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK:
            raise ValueError(f"seed must be a u64, got {seed}")
        self.state = seed

    def next_uint64(self) -> int:
        self.state = (self.state + GOLDEN) & _MASK
        return splitmix64_mix(self.state)

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits of one draw."""
        return (self.next_uint64() >> 11) * _INV53

    def bernoulli(self, p: float) -> bool:
        """One draw; true with probability p."""
        return self.uniform() < p

    def categorical(self, probs) -> int:
        """Index sampled by inverse CDF walked in index order.

        Consumes exactly one draw. Accepts any sequence summing to ~1; the
        last index absorbs rounding slack so the walk always terminates.
        """
        u = self.uniform()
        acc = 0.0
        last = len(probs) - 1
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        return last

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def exponential(self) -> float:
        """Exp(1) by inversion. uniform() < 1 keeps the log argument > 0."""
        import math

        return -math.log(1.0 - self.uniform())
