"""Oriented 2D Gaussian surfel SLAM: differentiable splatting, pose tracking,
and mapping, backed by the C++ core."""

try:
    from ._sslam import *  # noqa: F401,F403  (installed wheel layout)
    from ._sslam import __doc__ as _core_doc
except ImportError:  # in-tree build: the extension sits next to the package
    from _sslam import *  # noqa: F401,F403
    from _sslam import __doc__ as _core_doc

__all__ = [
    "SurfelMap",
    "RenderResult",
    "Slam",
    "TrackingError",
    "render",
    "backward_surfels",
    "backward_pose",
    "mapping_loss",
    "track_frame",
    "synthetic_frame",
    "exp_se3",
    "log_se3",
]
