"""Actual distance versus bound for the records family over a grid of n."""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field

from steinpert.distances import MetricKind
from steinpert.models import records_experiment


@dataclass(frozen=True)
class RecordsGridConfig:
    ns: tuple[int, ...] = (25, 50, 100, 200, 400)
    s: int = 4
    metrics: tuple[str, ...] = field(default=tuple(k.value for k in (MetricKind.TOTAL_VARIATION, MetricKind.POINT, MetricKind.WASSERSTEIN)))


def run(cfg: RecordsGridConfig) -> list[dict]:
    rows = []
    for n in cfg.ns:
        for r in records_experiment(n, cfg.s, cfg.metrics):
            rows.append({"n": n, "metric": r.metric.value, "actual": r.actual, "bound": r.bound,
                         "ratio": r.ratio, "actual_x_nlogn": r.actual * n * math.log(n)})
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=list(RecordsGridConfig.ns))
    ap.add_argument("--s", type=int, default=RecordsGridConfig.s)
    args = ap.parse_args()
    rows = run(RecordsGridConfig(tuple(args.n), args.s))
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: f"{v:.6g}" if isinstance(v, float) else v for k, v in r.items()})


if __name__ == "__main__":
    main()
