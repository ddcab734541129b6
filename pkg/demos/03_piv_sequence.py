"""Render a synthetic particle-image sequence advected by a known flow.

Tracer particles with Gaussian footprints are seeded uniformly, advected by
a divergence-free flow (sampled bilinearly at each particle), and rendered
with total brightness conserved to the 6-sigma footprint truncation
(~1e-5 relative) — the standard synthetic benchmark setup for particle
image velocimetry.
"""

import numpy as np

from hdflow.fields import VectorField
from hdflow.pivsim import advect_sequence, seed_particles
from hdflow.synthesis import synthesize_sample
from hdflow.viz import export_gray_png

pair = synthesize_sample(seed=5, height=64, width=64,
                         octaves_phi=3, octaves_psi=3)
vs = pair.v_sol_gt
peak = np.max(np.hypot(vs.u, vs.w))
flow = VectorField(vs.u / peak, vs.w / peak, spacing=1.0)  # 1 px max shift

cloud = seed_particles(count=10000, height=64, width=64, seed=7)
frames = advect_sequence(cloud, flow, frames=8)

total = frames[0].data.sum()
for k, frame in enumerate(frames):
    drift = abs(frame.data.sum() - total) / total
    print(f"frame {k}: mean intensity {frame.data.mean():.4f}, "
          f"mass drift {drift:.2e}")
    export_gray_png(f"demo_frame_{k}.png", frame)
print("wrote demo_frame_0.png ... demo_frame_7.png")
