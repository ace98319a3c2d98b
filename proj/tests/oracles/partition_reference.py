#!/usr/bin/env python3
"""Reference splitmix64 + Fisher-Yates + balanced chunk split.

Independent of the C++ implementation; used once to produce the golden
vectors frozen in tests/test_partition.cpp.
"""
import sys

MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def bounded(self, rng):
        # Lemire's multiply-shift with rejection, uniform on [0, rng)
        m = self.next() * rng
        low = m & MASK
        if low < rng:
            t = ((1 << 64) - rng) % rng
            while low < t:
                m = self.next() * rng
                low = m & MASK
        return m >> 64


def assignment(seed, n, d):
    rng = SplitMix64(seed)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.bounded(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    q, r = divmod(n, d)
    out = [0] * n
    pos = 0
    for g in range(d):
        size = q + 1 if g < r else q
        for _ in range(size):
            out[perm[pos]] = g
            pos += 1
    return out


if __name__ == "__main__":
    s = SplitMix64(0)
    print("splitmix64(seed=0) first three:", [hex(s.next()) for _ in range(3)])
    for seed, n, d in [(42, 6, 3), (7, 10, 4), (123456789, 12, 5)]:
        print(f"seed={seed} N={n} d={d}:", assignment(seed, n, d))
    sys.exit(0)
