# %% [markdown]
# # Probing and retrieving with a pretrained checkpoint
# Run 03_toy_pretraining.py first; this reads its archive and latest checkpoint.

# %%
import sys
from pathlib import Path

import torch

from trimodal.encoders import load_checkpoint
from trimodal.eval import extract_feature_table, few_shot_probe, linear_probe, permutation_chance
from trimodal.retrieval import evaluate_retrieval
from trimodal.trainer import latest_checkpoint

torch.set_num_threads(1)
work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/toy")
data = work / "data"
model, meta, _ = load_checkpoint(latest_checkpoint(work / "run"))
print("checkpoint at iteration", meta["iteration"])

# %% [markdown]
# Linear SVM on frozen backbone features, next to a shuffled-label baseline.

# %%
for m in ("mesh", "point", "image"):
    tr = extract_feature_table(model, data, "train", m)
    te = extract_feature_table(model, data, "test", m)
    chance, _ = permutation_chance(tr, te, n_perm=10)
    shots = {s: round(few_shot_probe(tr, te, s, rounds=5)["mean"], 3) for s in (5, 10, 20)}
    print(f"{m:5s} probe {linear_probe(tr, te):.3f}  chance {chance:.3f}  few-shot {shots}")

# %% [markdown]
# Cross-modal retrieval in the shared space, and the effect of more query views.

# %%
for s, t in [("point", "mesh"), ("image", "point"), ("mesh", "image")]:
    r = evaluate_retrieval(model, data, s, t, baseline_perms=20)
    print(f"{s:5s} -> {t:5s} mAP {r['mAP']:.3f}  (shuffled {r['baseline_mAP']:.3f})")
for v in (1, 4):
    print(f"image -> image, {v} view(s): mAP {evaluate_retrieval(model, data, 'image', 'image', views=v)['mAP']:.3f}")
