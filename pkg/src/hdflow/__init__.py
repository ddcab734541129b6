"""hdflow: physics-constrained 2D flow synthesis, decomposition, reconstruction."""

from . import metrics, viz
from .fields import (FieldError, ScalarField, VectorField, curl, curl2d,
                     divergence, gradient, laplacian)
from .hdnet import (HDNetConfig, HDNetModel, TrainingError, hdnet_eval,
                    hdnet_forward, hdnet_train, init_hdnet, load_hdnet,
                    save_hdnet)
from .io import FormatError, read_hckp, read_hfld, write_hckp, write_hfld
from .perlin import PerlinSpec, perlin_layer, split_seed, turbulence
from .pivsim import ParticleCloud, advect_cloud, advect_sequence, seed_particles
from .poisson import (PoissonError, helmholtz_decompose, pcg_poisson,
                      project_to_range, solve_poisson)
from .reconstruct import (ReconProblem, ReconResult, ReconstructionError,
                          horn_schunck, reconstruct, warp)
from .synthesis import (SamplePair, generate_dataset, load_manifest,
                        load_sample, sample_chi, synthesize_sample)
from .wire import (CoordinateError, MotionMLP, WireConfig, frame_coords,
                   init_wire, wire_forward)

__all__ = [
    "FieldError", "ScalarField", "VectorField",
    "curl", "curl2d", "divergence", "gradient", "laplacian",
    "PerlinSpec", "perlin_layer", "split_seed", "turbulence",
    "PoissonError", "helmholtz_decompose", "pcg_poisson",
    "project_to_range", "solve_poisson",
    "SamplePair", "generate_dataset", "load_manifest", "load_sample",
    "sample_chi", "synthesize_sample",
    "HDNetConfig", "HDNetModel", "TrainingError", "hdnet_eval",
    "hdnet_forward", "hdnet_train", "init_hdnet", "load_hdnet", "save_hdnet",
    "CoordinateError", "MotionMLP", "WireConfig", "frame_coords",
    "init_wire", "wire_forward",
    "ParticleCloud", "advect_cloud", "advect_sequence", "seed_particles",
    "ReconProblem", "ReconResult", "ReconstructionError",
    "horn_schunck", "reconstruct", "warp",
    "FormatError", "read_hckp", "read_hfld", "write_hckp", "write_hfld",
    "metrics", "viz",
]

__version__ = "0.1.0"
