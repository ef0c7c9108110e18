# %% [markdown]
# # Pretraining on the bundled procedural dataset
# Builds the toy archive (3 families, 60 train / 30 test), then trains the six
# networks jointly. Pass an iteration count to shorten the run.

# %%
import sys
from pathlib import Path

import torch

from trimodal import toy
from trimodal.pipeline import loss_trend, prepare_toy_data
from trimodal.trainer import fit

torch.set_num_threads(1)
work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/toy")
iters = int(sys.argv[2]) if len(sys.argv) > 2 else 300

data = prepare_toy_data(work)
cfg = toy.toy_train_config(iterations=iters, checkpoint_every=100)


def show(row):
    if row["iter"] % 50 == 0:
        print(f"iter {row['iter']:5d}  lr {row['lr']:.4g}  total {row['total']:.3f}")


fit(data, cfg, work / "run", resume=True, progress=show)
print(loss_trend(work / "run" / "metrics.jsonl"))
