"""Trainability gap on a deep unnormalized tanh MLP (16 affine layers).

Trains the same seeded blob-classification problem with both presets at
eta=3e-3 across five seeds and prints per-seed final losses/accuracies
plus the median-loss margin. The plain preset gets stuck at a high,
near-constant loss on most seeds; the full preset trains all of them.
"""

import argparse
import statistics

from optlab import Optimizer
from optlab.problems import BlobsMLPProblem, make_blobs, philox


def train(preset, seed, dataset, hidden, steps, batch_size, eta):
    problem = BlobsMLPProblem(dataset=dataset, hidden=hidden, batch_size=batch_size)
    params = problem.init_params(philox((seed, 0)))
    batch_rng = philox((seed, 1))
    if preset == "adamw":
        opt = Optimizer.adamw(params, eta=eta)
    else:
        opt = Optimizer.ranger21(params, eta=eta, t_max=steps)
    for _ in range(steps):
        batch = problem.sample_batch(batch_rng)
        _, grads = problem.evaluate(opt.params, batch)
        opt.step(grads)
    return problem.metrics(opt.params)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=1500)
    parser.add_argument("--eta", type=float, default=3e-3)
    parser.add_argument("--depth", type=int, default=15, help="hidden tanh layers")
    parser.add_argument("--width", type=int, default=16)
    parser.add_argument("--seeds", type=int, default=5)
    args = parser.parse_args()

    dataset = make_blobs(0, 2000, 20, 4, 8.0)
    hidden = (args.width,) * args.depth
    medians = {}
    for preset in ("adamw", "ranger21"):
        rows = [
            train(preset, s, dataset, hidden, args.steps, 128, args.eta)
            for s in range(args.seeds)
        ]
        losses = [r[0] for r in rows]
        medians[preset] = statistics.median(losses)
        print(f"{preset:9s} losses={[f'{l:.4f}' for l in losses]} "
              f"accs={[f'{r[1]:.2f}' for r in rows]} median={medians[preset]:.4f}")
    print(f"median-loss margin (adamw - ranger21) = "
          f"{medians['adamw'] - medians['ranger21']:+.4f}")


if __name__ == "__main__":
    main()
