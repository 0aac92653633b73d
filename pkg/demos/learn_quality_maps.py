"""Learn a trait-quality map from labels, querying the most uncertain points.

Builds the synthetic roster dataset (500 players, 53 traits, 6 position
scores), holds out an evaluation split, then compares max-entropy querying
against uniform random querying at the same label budget. Finishes by
saving one learned model and using it as a task's quality map.

Run:  python demos/learn_quality_maps.py
"""

import numpy as np

from staq.instance_io import save_gp_model, write_learning_csv, LearningCurveRow
from staq.learning import (
    GPQualityMap,
    QueryPool,
    active_learn,
    gp_fit,
    split_eval,
    synthetic_position_dataset,
    uniform_baseline,
)

BUDGET = 50
N_UNIFORM_SEEDS = 20


def learning_curves(features, column, pool_idx, eval_idx):
    pool_features = features[pool_idx]
    eval_set = (features[eval_idx], column[eval_idx])

    def labeler(i):
        return float(column[pool_idx[i]])

    _, active = active_learn(labeler, QueryPool(pool_features), eval_set, BUDGET)
    uniform = [
        uniform_baseline(labeler, QueryPool(pool_features), eval_set, BUDGET, seed)[1]
        for seed in range(N_UNIFORM_SEEDS)
    ]
    return active, np.mean(np.array(uniform), axis=0)


def main():
    features, labels, names = synthetic_position_dataset()
    pool_idx, eval_idx = split_eval(features.shape[0], 0.3, 0)
    print(f"{features.shape[0]} players x {features.shape[1]} traits, "
          f"{len(pool_idx)} pool / {len(eval_idx)} eval")

    rows = []
    print(f"\nrmse after {BUDGET} labels (uniform averaged over "
          f"{N_UNIFORM_SEEDS} seeds):")
    for p, name in enumerate(names):
        active, uniform_mean = learning_curves(features, labels[:, p], pool_idx, eval_idx)
        rows += [LearningCurveRow("entropy", 0, s + 1, v) for s, v in enumerate(active)]
        better = "ahead" if active[-1] <= uniform_mean[-1] else "behind"
        print(f"  {name:<12} entropy {active[-1]:.4f}  "
              f"uniform {uniform_mean[-1]:.4f}  ({better})")

    write_learning_csv(rows, "learning_curves.csv")
    print("wrote learning_curves.csv")

    # fit a final model on everything the active learner would know for
    # position 0 and wire it into a quality map
    column = labels[:, 0]
    model = gp_fit(features[pool_idx[:BUDGET]], column[pool_idx[:BUDGET]])
    save_gp_model(model, "position_model.json")
    qmap = GPQualityMap(model)
    some_player = features[eval_idx[0]]
    print(f"\nlearned map scores eval player 0 at {qmap(some_player):.4f} "
          f"(true {column[eval_idx[0]]:.4f})")
    print("wrote position_model.json; reference it from an instance with "
          '{"type": "learned", "model_path": "position_model.json"}')


if __name__ == "__main__":
    main()
