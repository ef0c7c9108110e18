# %% [markdown]
# # The contrastive objective on hand-checkable batches

# %%
import math

import torch

from trimodal.contrastive import pair_loss, reference_total_loss, total_loss

ortho = torch.eye(2, dtype=torch.float64)
print("orthogonal pair, tau=1:", float(pair_loss(ortho, ortho, 1.0)), "expected", math.log(2 + math.e) - 1)

same = torch.ones(2, 2, dtype=torch.float64)
print("collapsed pair, tau=1:", float(pair_loss(same, same, 1.0)), "expected", math.log(3))

# %% [markdown]
# The batched loss against the scalar double-loop reference on random features.

# %%
g = torch.Generator().manual_seed(0)
feats = [torch.randn(6, 16, dtype=torch.float64, generator=g) for _ in range(4)]
fast = total_loss(*feats, tau=0.1).as_floats()
slow = reference_total_loss(*[f.tolist() for f in feats], 0.1)
for name in fast:
    print(f"{name:6s} {fast[name]:.9f} {slow[name]:.9f}")
