"""Worst observed ratio of each Poisson solution bound over seeded probes."""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from steinpert.stein import NormKind, stein_factor_sweep


@dataclass(frozen=True)
class MagicFactorConfig:
    lams: tuple[float, ...] = (0.5, 1.0, 5.0, 20.0, 100.0)
    probes: int = 1000
    seed: int = 0


def run(cfg: MagicFactorConfig):
    return [r for lam in cfg.lams for n in NormKind for r in stein_factor_sweep(lam, n, cfg.probes, cfg.seed)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lams", type=float, nargs="+", default=list(MagicFactorConfig.lams))
    ap.add_argument("--probes", type=int, default=MagicFactorConfig.probes)
    ap.add_argument("--seed", type=int, default=MagicFactorConfig.seed)
    args = ap.parse_args()
    print(f"{'lam':>8} {'norm':>22} {'quantity':>14} {'worst':>8} {'violations':>10}")
    for r in run(MagicFactorConfig(tuple(args.lams), args.probes, args.seed)):
        print(f"{r.lam:8g} {r.norm.value:>22} {r.quantity:>14} {r.worst_ratio:8.4f} {r.violations:10d}")


if __name__ == "__main__":
    main()
