#!/usr/bin/env python3
"""Measure the level-tuning effect with the synthetic imperfect player.

For a fixed simulated player and seed, compares hit rates on a rhythm level
vs. one with doubled note spacing, and on a skiing level vs. one with gates
1.5x wider. Prints one table row per seed.

Usage: python3 scripts/tuning_effect.py [seed ...]
"""

import sys

from wristgames.player import tuning_comparison


def main(argv):
    seeds = [int(a) for a in argv[1:]] or [42]
    print(f"{'seed':>8} | {'rhythm':>7} {'2x sp.':>7} {'gain':>6} | {'skiing':>7} {'1.5x w':>7} {'gain':>6}")
    print("-" * 64)
    for seed in seeds:
        r = tuning_comparison(seed=seed)
        print(
            f"{seed:>8} | {r.rhythm_original:>7.3f} {r.rhythm_spaced:>7.3f} {r.rhythm_spaced - r.rhythm_original:>+6.2f}"
            f" | {r.skiing_original:>7.3f} {r.skiing_widened:>7.3f} {r.skiing_widened - r.skiing_original:>+6.2f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
