"""Ground-aware LiDAR correspondence, registration and loop-closure toolkit.

Submodules: ``geometry`` and ``io`` (types, file formats), ``ground``
(polar-patch ground probability), ``features`` (keypoints, local
descriptors), ``correspondence`` (unbalanced transport), ``registration``,
``global_desc`` (VLAD retrieval), ``evaluation`` (metrics), ``synth`` and
``bench`` (synthetic data), ``cli``.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config
from .core_geometry import PointCloud, RigidTransform
from .registration import PairRegistrar, RegistrationResult, register_pair

__all__ = ["PipelineConfig", "load_config", "PointCloud", "RigidTransform",
           "PairRegistrar", "RegistrationResult", "register_pair", "__version__"]
