"""Rigid-body poses, relative-pose harmonization, and pose-error metrics.

All geometry runs in float64 with translations in mm and rotations stored as
3x3 matrices. Rotation vectors (axis * angle, radians) appear only at the
network boundary via :class:`PoseVec6`. Angular errors are reported in
degrees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Pose",
    "RelativeTransform",
    "PoseVec6",
    "DegenerateRotationError",
    "identity_pose",
    "rot_x",
    "rot_y",
    "rot_z",
    "compose",
    "inverse",
    "rel_pose",
    "rel_pose_inv",
    "to_vec6",
    "from_vec6",
    "pose_error",
    "harmonize",
    "rotvec_to_matrix",
    "matrix_to_rotvec",
]

_ORTHO_TOL = 1e-9
_REPROJECT_TOL = 1e-7


class DegenerateRotationError(ValueError):
    """Rotation angle within tolerance of pi: the axis is ambiguous."""


class Pose:
    """Rigid transform: world-frame orientation (3x3) plus translation (mm)."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation, translation, validate: bool = True):
        R = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(translation, dtype=np.float64).reshape(3)
        if validate:
            err = np.abs(R.T @ R - np.eye(3)).max()
            if err > 1e-6:
                raise ValueError(f"rotation not orthonormal (|R'R - I| = {err:.3g})")
            if err > _REPROJECT_TOL:
                R = _project_to_so3(R)
            if np.linalg.det(R) < 0:
                raise ValueError("rotation has determinant -1 (reflection)")
            if not (np.isfinite(t).all() and np.isfinite(R).all()):
                raise ValueError("pose contains non-finite values")
        self.rotation = R
        self.translation = t

    def matrix(self) -> np.ndarray:
        """4x4 row-major homogeneous matrix (the serialization layout)."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=np.float64).reshape(4, 4)
        return cls(m[:3, :3], m[:3, 3])

    def __repr__(self):
        t = self.translation
        return f"{type(self).__name__}(t=[{t[0]:.3f}, {t[1]:.3f}, {t[2]:.3f}] mm)"


class RelativeTransform(Pose):
    """Same layout as Pose; semantically a transform expressed in a local frame."""

    __slots__ = ()


@dataclass
class PoseVec6:
    """Vector form of a relative transform: translation (mm) + rotation vector (rad)."""

    translation: np.ndarray
    rotation: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.translation, self.rotation]).astype(np.float64)

    @classmethod
    def from_array(cls, v) -> "PoseVec6":
        v = np.asarray(v, dtype=np.float64).reshape(6)
        return cls(translation=v[:3].copy(), rotation=v[3:].copy())


def identity_pose(cls=Pose) -> Pose:
    return cls(np.eye(3), np.zeros(3), validate=False)


def rot_x(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _project_to_so3(R: np.ndarray) -> np.ndarray:
    # Polar decomposition: nearest orthonormal matrix in Frobenius norm.
    u, _, vt = np.linalg.svd(R)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


def compose(a: Pose, b: Pose) -> Pose:
    """a then b applied in a's frame: result maps x -> a(b(x))."""
    R = a.rotation @ b.rotation
    t = a.rotation @ b.translation + a.translation
    if np.abs(R.T @ R - np.eye(3)).max() > _REPROJECT_TOL:
        R = _project_to_so3(R)
    return type(a)(R, t, validate=False)


def inverse(p: Pose) -> Pose:
    Rt = p.rotation.T
    return type(p)(Rt, -(Rt @ p.translation), validate=False)


def rel_pose(p2: Pose, p1: Pose) -> RelativeTransform:
    """Transform of p2 expressed in the local frame of p1.

    Returns [R1' R2, R1' (t2 - t1)]; satisfies p1 o result = p2.
    """
    R1t = p1.rotation.T
    return RelativeTransform(
        R1t @ p2.rotation, R1t @ (p2.translation - p1.translation), validate=False
    )


def rel_pose_inv(t_rel: RelativeTransform, p_tcp: Pose) -> RelativeTransform:
    """Map a local-frame transform onto the robot frame of the current TCP pose.

    Returns P_tcp * T_rel * P_tcp^-1, so left-applying the result to p_tcp
    equals p_tcp o t_rel.
    """
    out = compose(compose(p_tcp, t_rel), inverse(p_tcp))
    return RelativeTransform(out.rotation, out.translation, validate=False)


def matrix_to_rotvec(R: np.ndarray, degenerate_tol: float = 1e-6) -> np.ndarray:
    """Log map SO(3) -> R^3. Raises DegenerateRotationError near angle pi."""
    R = np.asarray(R, dtype=np.float64)
    cos_angle = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(cos_angle)
    if angle > np.pi - degenerate_tol:
        raise DegenerateRotationError(
            f"rotation angle {angle:.9f} rad is within {degenerate_tol} of pi"
        )
    skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if angle < 1e-8:
        # sin(x)/x -> 1: first-order term of the log map.
        return 0.5 * skew
    return skew * (angle / (2.0 * np.sin(angle)))


def rotvec_to_matrix(v: np.ndarray) -> np.ndarray:
    """Exp map R^3 -> SO(3) (Rodrigues)."""
    v = np.asarray(v, dtype=np.float64).reshape(3)
    angle = np.linalg.norm(v)
    K = np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )
    if angle < 1e-8:
        # Second-order Taylor keeps the result orthonormal to machine precision.
        return np.eye(3) + K + 0.5 * (K @ K)
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + a * K + b * (K @ K)


def to_vec6(t: RelativeTransform) -> PoseVec6:
    return PoseVec6(
        translation=t.translation.copy(), rotation=matrix_to_rotvec(t.rotation)
    )


def from_vec6(v: PoseVec6 | np.ndarray) -> RelativeTransform:
    if not isinstance(v, PoseVec6):
        v = PoseVec6.from_array(v)
    return RelativeTransform(
        rotvec_to_matrix(v.rotation), v.translation, validate=False
    )


def pose_error(a: Pose, b: Pose) -> tuple[float, float]:
    """(translation error in mm, geodesic angular error in degrees)."""
    trans = float(np.linalg.norm(a.translation - b.translation))
    cos_angle = np.clip((np.trace(a.rotation.T @ b.rotation) - 1.0) / 2.0, -1.0, 1.0)
    return trans, float(np.degrees(np.arccos(cos_angle)))


def harmonize(poses, reference_index: int) -> list[RelativeTransform]:
    """Re-express every pose relative to poses[reference_index]'s local frame."""
    n = len(poses)
    if not (-n <= reference_index < n):
        raise IndexError(f"reference_index {reference_index} out of range for {n} poses")
    ref = poses[reference_index]
    return [rel_pose(p, ref) for p in poses]
