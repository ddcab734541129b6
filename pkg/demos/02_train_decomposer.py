"""Train the convolutional decomposer on a small synthetic dataset.

The network maps a flow (plus its divergence) to the scalar potential of its
curl-free part.  Because the solenoidal estimate is formed as
v* - grad(predicted potential), it sums with the curl-free estimate to the
input exactly, whatever the network weights are.

This is a scaled-down run for illustration (a few minutes); see the CLI
`hdflow train-hdnet` for configurable full runs.
"""

import tempfile
from pathlib import Path

import numpy as np

from hdflow.hdnet import HDNetConfig, format_eval_table, hdnet_eval, hdnet_train
from hdflow.synthesis import generate_dataset

workdir = Path(tempfile.mkdtemp(prefix="hdflow_demo_"))
print(f"working in {workdir}")

manifest = generate_dataset(count=64, height=32, width=32, base_seed=1,
                            out_dir=workdir / "data", octave_set=(2, 3))
config = HDNetConfig(resolution=32, depth=3, base_channels=8,
                     epochs=30, batch_size=16, seed=0)
model, log = hdnet_train(config, manifest, workdir / "data",
                         out_dir=workdir / "run", eval_fraction=0.25)

print(f"train loss: {log[0]['train_loss']:.3e} -> {log[-1]['train_loss']:.3e}")
rows = hdnet_eval(model, workdir / "data", manifest["samples"][-16:],
                  normalized=True)
print("held-out divergence MSE of the solenoidal estimate, per octave group")
print(format_eval_table(rows))
print(f"checkpoint written to {workdir / 'run' / 'model.hckp'}")
