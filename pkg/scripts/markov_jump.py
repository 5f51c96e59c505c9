"""Equilibrium moments and the assembled d1 bound for the birth-death chain with jumps."""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from steinpert.models import MarkovJumpModel, markov_jump_equilibrium


@dataclass(frozen=True)
class MarkovJumpConfig:
    Ns: tuple[int, ...] = (25, 100, 400, 1600)
    z: float = 0.1
    alpha: float = 0.5


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, nargs="+", default=list(MarkovJumpConfig.Ns))
    ap.add_argument("--z", type=float, default=MarkovJumpConfig.z)
    ap.add_argument("--alpha", type=float, default=MarkovJumpConfig.alpha)
    args = ap.parse_args()
    cfg = MarkovJumpConfig(tuple(args.N), args.z, args.alpha)
    print(f"{'N':>6} {'E W':>10} {'E W^2':>10} {'bound':>10} {'C':>8} {'d1 bound':>10}")
    for N in cfg.Ns:
        m = MarkovJumpModel(N, cfg.z, cfg.alpha)
        eq = markov_jump_equilibrium(m)
        d = eq.d1_ingredients()
        print(f"{N:6d} {eq.mean_w:10.5f} {eq.second_moment_w:10.5f} {m.second_moment_bound():10.5f} "
              f"{d['C']:8.4f} {d['d1_bound']:10.5f}")


if __name__ == "__main__":
    main()
