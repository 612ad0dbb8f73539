"""Monte Carlo evaluation of the bootstrap selection on simulated data.

Profiles:
  quick  n=400, p=10, 10 reps, B=20, m=200
  desk   n=600, p=20, 20 reps, B=20, m=300
  full   n=1000, p=100, 100 reps, B=50, m=500 (days of CPU)

    python scripts/run_montecarlo.py --profile quick --scenario A --out mc_quick_A.json
"""

import argparse
import json
import time
from pathlib import Path

from brbvs.algorithm import BrbvsConfig
from brbvs.cli import dumps
from brbvs.experiment import monte_carlo
from brbvs.simulate import SimConfig

PROFILES = {
    "quick": dict(n=400, p=10, n_rep=10, B=20, m=200),
    "desk": dict(n=600, p=20, n_rep=20, B=20, m=300),
    "full": dict(n=1000, p=100, n_rep=100, B=50, m=500),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--profile", choices=sorted(PROFILES), default="quick")
    ap.add_argument("--scenario", choices=["A", "B"], default="A")
    ap.add_argument("--metrics", default="FIM,Abs")
    ap.add_argument("--kmax", type=int, default=6)
    ap.add_argument("--tau", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    prof = PROFILES[args.profile]
    sim = SimConfig(n=prof["n"], p=prof["p"], scenario=args.scenario)
    cfg = BrbvsConfig(kmax=args.kmax, m=prof["m"], tau=args.tau, B=prof["B"], seed=args.seed, threads=args.threads)

    t0 = time.perf_counter()

    def progress(h, results):
        sel = {mt: [r.selected_names(1), r.selected_names(2)] for mt, r in results.items()}
        print(f"rep {h + 1}/{prof['n_rep']}  {time.perf_counter() - t0:7.0f}s  {json.dumps(sel)}", flush=True)

    mc = monte_carlo(sim, cfg, prof["n_rep"], args.seed, tuple(args.metrics.split(",")), progress=progress)
    print(f"\nScenario {args.scenario}, profile {args.profile}, truth s1={sim.s1} s2={sim.s2}")
    print(f"{'metric':<6} {'margin':>6} {'FP':>6} {'FN':>6} {'<s>':>6} {'<hits>':>7} {'contain':>8}")
    for mt, rep in mc.reports.items():
        for v in range(2):
            print(f"{mt:<6} {v + 1:>6} {rep.fp[v]:6.2f} {rep.fn[v]:6.2f} {rep.mean_size[v]:6.2f} "
                  f"{rep.mean_hits[v]:7.2f} {rep.containment[v]:8.2f}")
    print(f"failed subsample fits: {sum(mc.failures)}; elapsed {time.perf_counter() - t0:.0f}s")
    if args.out:
        Path(args.out).write_text(dumps(mc.to_dict()))


if __name__ == "__main__":
    main()
