"""Print the three-phase learning-rate curve as step,eta_t CSV.

Defaults reproduce the reference shape: 10000 steps at base rate 1e-3 with
beta2 = 0.999, warm-up 2200 and warm-down 2800.
"""

import argparse

from optlab import ScheduleSpec, lr_factor


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eta", type=float, default=1e-3)
    parser.add_argument("--t-max", type=int, default=10000)
    parser.add_argument("--beta2", type=float, default=0.999)
    parser.add_argument("--t-warmup", type=int, default=None)
    parser.add_argument("--t-warmdown", type=int, default=None)
    args = parser.parse_args()

    spec = ScheduleSpec(
        eta=args.eta, t_max=args.t_max, beta2=args.beta2,
        t_warmup=args.t_warmup, t_warmdown=args.t_warmdown,
    )
    print("step,eta_t")
    for t in range(1, spec.t_max + 1):
        print(f"{t},{spec.eta * lr_factor(t, spec)!r}")


if __name__ == "__main__":
    main()
