"""Grid estimates of the normal Stein solution norms against their bounds."""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from steinpert.normal import bound_matrix


@dataclass(frozen=True)
class NormalBoundsConfig:
    psis: tuple[float, ...] = (0.0, 0.25, 0.5)
    zs: tuple[float, ...] = (-2.0, -1.0, 0.0, 1.0, 2.0)
    lipschitz_probes: int = 5
    bounded_probes: int = 5
    seed: int = 0


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--psis", type=float, nargs="+", default=list(NormalBoundsConfig.psis))
    ap.add_argument("--seed", type=int, default=NormalBoundsConfig.seed)
    args = ap.parse_args()
    cfg = NormalBoundsConfig(psis=tuple(args.psis), seed=args.seed)
    reports = bound_matrix(cfg.psis, cfg.zs, cfg.lipschitz_probes, cfg.bounded_probes, cfg.seed)
    for rep in reports:
        tight = max(l.estimate / l.bound for l in rep.lines)
        print(f"psi={rep.psi:<5g} {rep.label:<22} tightest ratio {tight:.4f} ode residual {rep.ode_residual:.1e} "
              f"{'ok' if rep.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
