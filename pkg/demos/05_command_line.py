# %% [markdown]
# # The same pipeline through the command line
# Each step is what a shell user would type after `trimodal`.

# %%
import json
import sys
from pathlib import Path

from trimodal.cli import main

work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/cli")
work.mkdir(parents=True, exist_ok=True)


def run(*args):
    print("$ trimodal", " ".join(args))
    code = main(list(args))
    assert code == 0, code


run("make-toy", "--out", str(work / "toy.jsonl"), "--train-per-class", "6", "--test-per-class", "4")
run("prep", "--manifest", str(work / "toy.jsonl"), "--out", str(work / "data"),
    "--views", "4", "--points", "256", "--faces", "128", "--resolution", "48")

(work / "config.json").write_text(json.dumps({
    "train": {"batch_size": 6, "iterations": 40, "base_lr": 0.01, "knn": 4, "checkpoint_every": 20},
    "seed": 0,
}))
run("train", "--data", str(work / "data"), "--config", str(work / "config.json"), "--out", str(work / "run"))

ck = str(work / "run" / "checkpoints" / "iter_0000040")
run("eval", "--task", "probe", "--modality", "point", "--checkpoint", ck, "--data", str(work / "data"),
    "--out", str(work / "probe.json"))
run("eval", "--task", "retrieval", "--source", "image", "--target", "mesh", "--views", "4",
    "--checkpoint", ck, "--data", str(work / "data"), "--out", str(work / "retrieval.json"))
run("report", "--from", str(work / "probe.json"), str(work / "retrieval.json"), "--out", str(work / "report.html"))
