"""Monocular sizing of floating debris, detector evaluation and leak-free dataset splits."""
from .geometry import (BehindCamera, CameraRig, DegenerateVectors, GeometryError, GroundRect,
                       OutOfView, ParallelRay, PixelBox, Plane, Ray, SizeEstimate, Stage,
                       estimate_size, focal_pixels, pitch_rotation, pixel_ray_local,
                       pixel_ray_world, pixel_sensitivity, plane_from_point_vectors,
                       point_plane_distance, project_footprint, project_to_box,
                       ray_plane_intersection)

__version__ = "0.1.0"
