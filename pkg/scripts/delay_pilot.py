"""Brute-force pilot for the delay-sweep slope contrast.

Runs the tabular DF and FF over D in {25, 50, 100, 200} with T = 4*N*D and
prints both slopes, their ratio, and a conservative 99% lower bound on the
ratio (DF slope lower end over FF slope upper end). The acceptance test's
asserted factor must not exceed that bound.

    python3 scripts/delay_pilot.py --trials 100 --seed 99 --epsilon 0.1
"""

import argparse
import time

from proxyforecast import ExperimentConfig, ForecasterSpec, delay_sweep
from proxyforecast.environment import TASK_PRESETS
from proxyforecast.harness import regret_slope

Z99 = 2.5758293035489


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=99)
    ap.add_argument("--epsilon", type=float, nargs="+", default=[0.1])
    args = ap.parse_args()
    specs = [ForecasterSpec("tabular-df"), ForecasterSpec("tabular-ff")]
    for eps in args.epsilon:
        start = time.time()
        cfg = ExperimentConfig(specs, TASK_PRESETS["appendix"].replace(epsilon=eps),
                               n_trials=args.trials, seed=args.seed)
        rows = delay_sweep(cfg, [25, 50, 100, 200])
        df, ff = regret_slope(rows, "tabular-df"), regret_slope(rows, "tabular-ff")
        bound = df.lower(Z99) / (ff.slope + Z99 * ff.stderr)
        print(f"epsilon={eps} DF slope {df.slope:.3f} (se {df.stderr:.3f}, p={df.pvalue:.2g}) "
              f"FF slope {ff.slope:.3f} (se {ff.stderr:.3f}) ratio {df.slope / ff.slope:.2f} "
              f"99% lower bound {bound:.2f} [{time.time() - start:.0f}s]")


if __name__ == "__main__":
    main()
