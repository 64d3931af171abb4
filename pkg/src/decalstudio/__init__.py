"""Disentangled appearance reconstruction under split-sum image-based
lighting, with ARAP-parameterized neural texturing and instant decal editing."""

__version__ = "0.1.0"

from .mesh import TriMesh, load_mesh, select_region, geodesic_distance  # noqa: F401
from .raster import Camera, rasterize, interpolate, orbit_camera  # noqa: F401
from .uvparam import UvChart, tutte_embed, arap_solve, parameterize_region, uv_to_texel  # noqa: F401
from .ibl import EnvLight, MicrofacetParams, prefilter, bake_lut, split_sum_specular, reference_specular  # noqa: F401
from .nn import Mlp, AdamState, adam_step, encode  # noqa: F401
from .shading import VertexAppearance, gather_features, shade, shade_backward  # noqa: F401
from .scene import Scene, create_scene, render_image, save_checkpoint, load_checkpoint  # noqa: F401
from .trainer import Dataset, TrainConfig, ingest, train, bake_inference_caches  # noqa: F401
from .editor import DecalSpec, apply_decal, revert_region  # noqa: F401
from .metrics import psnr, warping_variance, WarpReport  # noqa: F401
