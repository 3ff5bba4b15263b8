"""Pinhole lifting of pixel boxes to metric object sizes on the water plane.

World frame: the optical center sits at the origin, y points up and the water
surface is the plane ``y = -height_m``. The camera looks along ``-z`` in its
local frame; positive ``pitch_rad`` tilts the optical axis down toward the water.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

DEGENERACY_TOL = 1e-12
IDENTITY_TOL = 1e-9


class GeometryError(ValueError):
    """Base class for geometric failures; ``box`` names the offending input."""

    def __init__(self, message: str, box: "Optional[PixelBox]" = None):
        if box is not None:
            message = f"{message} (box {box.as_tuple()})"
        super().__init__(message)
        self.box = box


class DegenerateVectors(GeometryError):
    pass


class ParallelRay(GeometryError):
    pass


class BehindCamera(GeometryError):
    pass


class OutOfView(GeometryError):
    pass


def _vec(v) -> np.ndarray:
    a = np.array(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"non-finite vector {tuple(a)}")
    a.setflags(write=False)
    return a


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class CameraRig:
    focal_mm: float
    sensor_w_mm: float
    sensor_h_mm: float
    image_w_px: int
    image_h_px: int
    height_m: float
    pitch_rad: float

    def __post_init__(self):
        for name in ("focal_mm", "sensor_w_mm", "sensor_h_mm", "height_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        for name in ("image_w_px", "image_h_px"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if not (0.0 < self.pitch_rad < math.pi / 2):
            raise ValueError(f"pitch_rad must lie in (0, pi/2), got {self.pitch_rad!r}")

    @property
    def center_px(self) -> tuple[float, float]:
        return (self.image_w_px - 1) / 2.0, (self.image_h_px - 1) / 2.0

    @property
    def ground_plane(self) -> "Plane":
        return Plane(normal=(0.0, 1.0, 0.0), offset=self.height_m)

    def rotation(self) -> np.ndarray:
        """Camera-to-world rotation (a downward pitch is a negative x-rotation)."""
        return pitch_rotation(-self.pitch_rad)


@dataclass(frozen=True)
class PixelBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_id: Optional[int] = None
    confidence: Optional[float] = None

    def __post_init__(self):
        coords = self.as_tuple()
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must have positive extent: {coords}")
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def shifted(self, dx: float, dy: float) -> "PixelBox":
        return PixelBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy,
                        self.class_id, self.confidence)

    def inside(self, width_px: int, height_px: int) -> bool:
        return (self.x_min >= 0 and self.y_min >= 0
                and self.x_max <= width_px - 1 and self.y_max <= height_px - 1)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", _vec(self.origin))
        d = _vec(self.direction)
        norm = np.linalg.norm(d)
        if not norm > DEGENERACY_TOL:
            raise DegenerateVectors("ray direction has zero length")
        object.__setattr__(self, "direction", _vec(d / norm))

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class Plane:
    """Implicit plane ``normal . x + offset = 0`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _vec(self.normal)
        norm = np.linalg.norm(n)
        if not norm > DEGENERACY_TOL:
            raise DegenerateVectors("plane normal has zero length")
        if not math.isfinite(float(self.offset)):
            raise GeometryError(f"plane offset must be finite, got {self.offset!r}")
        object.__setattr__(self, "normal", _vec(n / norm))
        object.__setattr__(self, "offset", float(self.offset) / norm)

    def signed_distance(self, p) -> float:
        return float(np.dot(self.normal, p) + self.offset)


class Stage(str, Enum):
    RAW = "raw"
    SHAPE_CORRECTED = "shape_corrected"
    DIM_CORRECTED = "dim_corrected"


@dataclass(frozen=True)
class SizeEstimate:
    dim_x_cm: float
    dim_y_cm: float
    ground_point: np.ndarray = field(default_factory=lambda: _vec((0.0, 0.0, 0.0)))
    stage: Stage = Stage.RAW

    def __post_init__(self):
        object.__setattr__(self, "ground_point", _vec(self.ground_point))
        object.__setattr__(self, "stage", Stage(self.stage))
        if not (self.dim_x_cm > 0 and self.dim_y_cm > 0):
            raise ValueError(f"sizes must be positive: {self.dim_x_cm!r}, {self.dim_y_cm!r}")

    @property
    def range_m(self) -> float:
        return float(np.linalg.norm(self.ground_point))


def focal_pixels(rig: CameraRig) -> tuple[float, float]:
    """Focal length expressed in pixels along x and y."""
    return (rig.image_w_px * rig.focal_mm / rig.sensor_w_mm,
            rig.image_h_px * rig.focal_mm / rig.sensor_h_mm)


def pixel_ray_local(rig: CameraRig, x_pix: float, y_pix: float) -> np.ndarray:
    fx, fy = focal_pixels(rig)
    cx, cy = rig.center_px
    # image rows grow downward, camera y grows upward
    return _normalize(np.array([(x_pix - cx) / fx, (cy - y_pix) / fy, -1.0]))


def pitch_rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[1.0, 0.0, 0.0],
                     [0.0, c, -s],
                     [0.0, s, c]])


def pixel_ray_world(rig: CameraRig, x_pix: float, y_pix: float) -> Ray:
    direction = rig.rotation() @ pixel_ray_local(rig, x_pix, y_pix)
    return Ray(origin=(0.0, 0.0, 0.0), direction=direction)


def plane_from_point_vectors(p0, v1, v2) -> Plane:
    p0 = _vec(p0)
    cross = np.cross(_vec(v1), _vec(v2))
    norm = np.linalg.norm(cross)
    if not norm > DEGENERACY_TOL:
        raise DegenerateVectors(f"vectors are colinear (|v1 x v2| = {norm:.3g})")
    normal = cross / norm
    return Plane(normal=normal, offset=-float(np.dot(normal, p0)))


def ray_plane_parameter(ray: Ray, plane: Plane) -> float:
    denom = float(np.dot(plane.normal, ray.direction))
    if abs(denom) <= DEGENERACY_TOL:
        raise ParallelRay(f"ray is parallel to the plane (n.v = {denom:.3g})")
    t = -(float(np.dot(plane.normal, ray.origin)) + plane.offset) / denom
    if t < 0:
        raise BehindCamera(f"plane lies behind the ray origin (t = {t:.6g})")
    return t


def ray_plane_intersection(ray: Ray, plane: Plane) -> np.ndarray:
    return ray.at(ray_plane_parameter(ray, plane))


def point_plane_distance(p, plane: Plane) -> float:
    return abs(plane.signed_distance(p))


def estimate_size(rig: CameraRig, box: PixelBox) -> SizeEstimate:
    """Metric width/height of the object enclosed by ``box``.

    The center ray fixes the object's position on the water plane; the width
    is the sum of distances from that point to the planes through the left and
    right box edges, the height likewise with the top and bottom edges.
    """
    origin = np.zeros(3)
    try:
        tl = pixel_ray_world(rig, box.x_min, box.y_min).direction
        tr = pixel_ray_world(rig, box.x_max, box.y_min).direction
        bl = pixel_ray_world(rig, box.x_min, box.y_max).direction
        br = pixel_ray_world(rig, box.x_max, box.y_max).direction
        top = plane_from_point_vectors(origin, tl, tr)
        bottom = plane_from_point_vectors(origin, bl, br)
        left = plane_from_point_vectors(origin, tl, bl)
        right = plane_from_point_vectors(origin, tr, br)
        center = pixel_ray_world(rig, *box.center)
        ground = ray_plane_intersection(center, rig.ground_plane)
    except GeometryError as exc:
        raise type(exc)(str(exc), box) from exc

    dim_x = point_plane_distance(ground, left) + point_plane_distance(ground, right)
    dim_y = point_plane_distance(ground, top) + point_plane_distance(ground, bottom)
    return SizeEstimate(dim_x_cm=100.0 * dim_x, dim_y_cm=100.0 * dim_y,
                        ground_point=ground, stage=Stage.RAW)


@dataclass(frozen=True)
class GroundRect:
    """Synthetic object centred on the water plane at world ``(x_m, -height, z_m)``.

    ``width_m`` is the object's extent across the line of sight along the
    camera's horizontal axis, ``height_m`` its extent along the camera's
    vertical viewing axis. ``z_m`` is negative in front of the camera.
    """

    x_m: float
    z_m: float
    width_m: float
    height_m: float

    def center(self, rig: CameraRig) -> np.ndarray:
        return np.array([self.x_m, -rig.height_m, self.z_m])


def world_to_pixel(rig: CameraRig, point) -> tuple[float, float]:
    """Exact pinhole projection of a world point; inverse of ``pixel_ray_world``."""
    local = rig.rotation().T @ np.asarray(point, dtype=float)
    return _local_to_pixel(rig, local)


def _local_to_pixel(rig: CameraRig, local: np.ndarray) -> tuple[float, float]:
    depth = -local[2]
    if depth <= DEGENERACY_TOL:
        raise OutOfView(f"point {tuple(local)} is not in front of the camera")
    fx, fy = focal_pixels(rig)
    cx, cy = rig.center_px
    return float(cx + fx * local[0] / depth), float(cy - fy * local[1] / depth)


def _tangent_points(center_2d: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Points where the two lines from the origin touch a circle."""
    d2 = float(center_2d @ center_2d)
    if d2 <= radius * radius:
        raise OutOfView("object encloses the optical center")
    perp = np.array([-center_2d[1], center_2d[0]])
    base = center_2d * (1.0 - radius * radius / d2)
    offset = perp * (radius * math.sqrt(d2 - radius * radius) / d2)
    return base + offset, base - offset


def _check_in_image(rig: CameraRig, box: PixelBox) -> PixelBox:
    if not box.inside(rig.image_w_px, rig.image_h_px):
        raise OutOfView(f"projected box {box.as_tuple()} leaves the image")
    return box


def project_to_box(rig: CameraRig, rect: GroundRect) -> PixelBox:
    """Forward-project ``rect`` to the tight pixel box seen by the camera.

    The extremal points are the silhouette points of the object's horizontal
    and vertical extents: for each axis, the points at half-extent from the
    center where the viewing plane through the optical center grazes the
    object. Their pixel columns/rows bound the box.
    """
    local = rig.rotation().T @ rect.center(rig)
    if rect.width_m < 0 or rect.height_m < 0:
        raise ValueError("rectangle extents must be non-negative")

    # horizontal extent: circle in the camera x-z plane
    a, b = _tangent_points(np.array([local[0], local[2]]), rect.width_m / 2.0)
    cols = sorted(_local_to_pixel(rig, np.array([p[0], local[1], p[1]]))[0] for p in (a, b))
    # vertical extent: circle in the camera y-z plane
    a, b = _tangent_points(np.array([local[1], local[2]]), rect.height_m / 2.0)
    rows = sorted(_local_to_pixel(rig, np.array([local[0], p[0], p[1]]))[1] for p in (a, b))
    return _check_in_image(rig, PixelBox(cols[0], rows[0], cols[1], rows[1]))


def project_footprint(rig: CameraRig, rect: GroundRect) -> PixelBox:
    """Tight box around a flat rectangle lying on the water plane.

    ``width_m`` runs along world x and ``height_m`` along world z. Unlike
    ``project_to_box`` the estimator is biased on these boxes (the flat
    footprint is foreshortened), which makes them useful for exercising the
    regression correction.
    """
    c = rect.center(rig)
    hw, hd = rect.width_m / 2.0, rect.height_m / 2.0
    corners = [c + np.array([sx * hw, 0.0, sz * hd]) for sx in (-1, 1) for sz in (-1, 1)]
    px = [world_to_pixel(rig, p) for p in corners]
    xs, ys = [p[0] for p in px], [p[1] for p in px]
    return _check_in_image(rig, PixelBox(min(xs), min(ys), max(xs), max(ys)))


@dataclass(frozen=True)
class SensitivityReport:
    s_width_cm: float
    s_height_cm: float
    n_boxes: int
    skipped: tuple[int, ...] = ()


_SHIFTS = {"left": (-1.0, 0.0), "right": (1.0, 0.0), "top": (0.0, -1.0), "bottom": (0.0, 1.0)}


def pixel_sensitivity(rig: CameraRig, boxes: Sequence[PixelBox],
                      shift_px: float = 1.0) -> SensitivityReport:
    """Mean size change caused by translating each box by ``shift_px`` pixels.

    Width sensitivity averages over left/right shifts, height over top/bottom.
    Boxes whose shifted copies leave the image are skipped and listed by index.
    """
    if not boxes:
        raise ValueError("pixel_sensitivity needs at least one box")
    dx_changes: list[float] = []
    dy_changes: list[float] = []
    skipped: list[int] = []
    for i, box in enumerate(boxes):
        shifted = {d: box.shifted(sx * shift_px, sy * shift_px) for d, (sx, sy) in _SHIFTS.items()}
        if not all(b.inside(rig.image_w_px, rig.image_h_px) for b in shifted.values()):
            skipped.append(i)
            continue
        base = estimate_size(rig, box)
        for d in ("left", "right"):
            dx_changes.append(abs(base.dim_x_cm - estimate_size(rig, shifted[d]).dim_x_cm))
        for d in ("top", "bottom"):
            dy_changes.append(abs(base.dim_y_cm - estimate_size(rig, shifted[d]).dim_y_cm))
    if not dx_changes:
        raise ValueError("every box was skipped; no sensitivity can be computed")
    return SensitivityReport(
        s_width_cm=math.fsum(dx_changes) / len(dx_changes),
        s_height_cm=math.fsum(dy_changes) / len(dy_changes),
        n_boxes=len(boxes) - len(skipped),
        skipped=tuple(skipped),
    )
