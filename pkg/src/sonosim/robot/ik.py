"""Damped least-squares inverse kinematics with analytic warm starts.

The chain splits cleanly: (theta, l, z) place the tool, and the residual
orientation Rz(-theta) * R_target decomposes as Rx(alpha) Ry(beta) Rz(gamma).
Both (theta, l) branches are tried analytically, then polished numerically;
the numeric stage also rescues targets the closed form cannot express
(e.g. clamped joints).
"""

from __future__ import annotations

import numpy as np

from ..geom import Pose, matrix_to_rotvec, pose_error, rot_z
from .model import JOINT_NAMES, JointLimits, JointState, forward_kinematics

__all__ = ["NotReachable", "inverse_kinematics"]

# Rotation-error weight in mm per radian. Deliberately position-heavy: on an
# infeasible target the clamped best-effort solution must hold the commanded
# position rather than trade millimeters for unreachable degrees.
_ROT_WEIGHT = 10.0
_FD_STEP = 1e-5


class NotReachable(RuntimeError):
    """IK did not converge; carries the best-effort joints and residual."""

    def __init__(self, joints: JointState, residual: tuple):
        self.joints = joints
        self.residual = residual
        super().__init__(
            f"IK residual {residual[0]:.3f} mm / {residual[1]:.3f} deg exceeds tolerance"
        )


def _wrap_deg(a: float) -> float:
    return (a + 180.0) % 360.0 - 180.0


def _euler_xyz(R: np.ndarray) -> tuple:
    """Decompose R = Rx(a) Ry(b) Rz(c); angles in radians."""
    b = np.arcsin(np.clip(R[0, 2], -1.0, 1.0))
    if abs(abs(R[0, 2]) - 1.0) < 1e-9:
        # Gimbal-lock fallback; exact beta = +/-90 deg cannot occur within limits.
        a = np.arctan2(R[1, 0], R[1, 1])
        c = 0.0
    else:
        a = np.arctan2(-R[1, 2], R[2, 2])
        c = np.arctan2(-R[0, 1], R[0, 0])
    return a, b, c


def _analytic_seeds(target: Pose, limits: JointLimits):
    x, y, z = target.translation
    r = np.hypot(x, y)
    base = np.degrees(np.arctan2(y, x)) if r > 1e-9 else 0.0
    seeds = []
    for theta_deg, l in ((base, r), (_wrap_deg(base + 180.0), -r)):
        if not (limits.theta[0] <= theta_deg <= limits.theta[1]):
            continue
        rem = rot_z(np.radians(theta_deg)).T @ target.rotation
        a, b, c = _euler_xyz(rem)
        seeds.append(
            limits.clamp(
                JointState(
                    l=l,
                    theta=theta_deg,
                    z=z,
                    alpha=np.degrees(a),
                    beta=np.degrees(b),
                    gamma=np.degrees(c),
                )
            )
        )
    return seeds


def _error_vec(q_deg: JointState, target: Pose) -> np.ndarray:
    pose = forward_kinematics(q_deg)
    dt = target.translation - pose.translation
    try:
        dr = matrix_to_rotvec(target.rotation @ pose.rotation.T)
    except ValueError:
        # Half-turn residual: push along any valid axis of the relative turn.
        w, v = np.linalg.eigh(target.rotation @ pose.rotation.T)
        axis = v[:, np.argmax(w.real)].real
        dr = axis / np.linalg.norm(axis) * np.pi
    return np.concatenate([dt, _ROT_WEIGHT * dr])


def _dls_polish(q0: np.ndarray, target: Pose, limits: JointLimits, tol, budget: int):
    """q is in natural units (mm / degrees). Returns (q, iterations_used)."""
    lo, hi = limits.lo_hi_arrays()
    q = np.clip(q0, lo, hi)
    lam = 0.1
    err = _error_vec(JointState.from_array(q), target)
    cost = float(err @ err)
    used = 0
    while used < budget:
        used += 1
        J = np.empty((6, 6))
        for k in range(6):
            dq = np.zeros(6)
            dq[k] = _FD_STEP
            e_plus = _error_vec(JointState.from_array(np.clip(q + dq, lo, hi)), target)
            e_minus = _error_vec(JointState.from_array(np.clip(q - dq, lo, hi)), target)
            J[:, k] = (e_plus - e_minus) / (2 * _FD_STEP)
        # err(q) decreases along -J; solve (J J' + lam I) y = err, step = -J' y
        JJt = J @ J.T + lam * np.eye(6)
        try:
            step = -J.T @ np.linalg.solve(JJt, err)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        q_new = np.clip(q + step, lo, hi)
        err_new = _error_vec(JointState.from_array(q_new), target)
        cost_new = float(err_new @ err_new)
        if cost_new < cost:
            q, err, cost = q_new, err_new, cost_new
            lam = max(lam * 0.5, 1e-6)
            trans = np.linalg.norm(err[:3])
            ang = np.degrees(np.linalg.norm(err[3:]) / _ROT_WEIGHT)
            if trans <= tol[0] and ang <= tol[1]:
                break
        else:
            lam *= 4.0
            if lam > 1e8:
                break
    return q, used


def inverse_kinematics(
    target: Pose,
    seed: JointState | None = None,
    limits: JointLimits | None = None,
    tol: tuple = (0.1, 0.1),
    max_iters: int = 200,
) -> JointState:
    """Joints reproducing ``target`` within ``tol`` = (mm, degrees).

    Raises :class:`NotReachable` (carrying the best-effort joints) when the
    iteration budget is exhausted or the target lies outside the workspace.
    """
    limits = limits or JointLimits()
    if seed is not None and not limits.contains(seed):
        raise ValueError("IK seed outside joint limits")

    candidates = []
    if seed is not None:
        candidates.append(seed.as_array())
    candidates.extend(s.as_array() for s in _analytic_seeds(target, limits))
    candidates.append(np.zeros(6))
    # Cheapest start first; a stalled basin must not starve the others.
    costs = [
        float(np.square(_error_vec(JointState.from_array(c), target)).sum())
        for c in candidates
    ]
    order = np.argsort(costs, kind="stable")
    per_candidate = max(40, max_iters // len(candidates))

    best_q, best_err = None, (np.inf, np.inf)
    budget = max_iters
    for idx in order:
        if budget <= 0:
            break
        q0 = candidates[idx]
        q, used = _dls_polish(q0, target, limits, tol, min(per_candidate, budget))
        budget -= used
        js = limits.clamp(JointState.from_array(q))
        err = pose_error(forward_kinematics(js), target)
        if err[0] + _ROT_WEIGHT * np.radians(err[1]) < best_err[0] + _ROT_WEIGHT * np.radians(best_err[1]):
            best_q, best_err = js, err
        if err[0] <= tol[0] and err[1] <= tol[1]:
            return js
    raise NotReachable(best_q, best_err)
