"""Numerically guarded algebra on the rotation group SO(3) and its Lie algebra.

Conventions used throughout the package:

* an *axial vector* is a plain ``(3,)`` float array (angular velocities in
  rad/s, rotation vectors in rad);
* a *skew matrix* is the image of an axial vector under :func:`hat`;
* a *rotation matrix* is a ``(3, 3)`` float array ``R`` with
  ``R.T @ R = I`` (to ``ROTATION_TOL``) and ``det R > 0``.

All functions are pure and operate on plain numpy arrays.
"""
from __future__ import annotations

import numpy as np

# Frobenius tolerance for accepting a matrix as a member of the group.
ROTATION_TOL = 1e-9

# Below this rotation angle the Rodrigues coefficients switch to their
# second-order Taylor expansions to avoid cancellation in (1 - cos)/theta^2.
SMALL_ANGLE = 1e-4

# log_so3 switches to the symmetric-part axis extraction this close to pi,
# where the antisymmetric part loses the axis direction.
_NEAR_PI = 1e-3


class NotNearGroup(ValueError):
    """Raised when a matrix is too far from the rotation group to repair."""


def hat(v):
    """Map an axial vector to its skew matrix: ``hat(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def vex(M, *, tol=1e-12):
    """Inverse of :func:`hat`.

    Accepts a raw matrix and rejects it if its asymmetry ``M + M.T`` exceeds
    ``tol`` (entry-wise); exact skew images of :func:`hat` always pass.
    """
    M = np.asarray(M, dtype=float)
    if np.abs(M + M.T).max() > tol:
        raise ValueError("matrix is not skew-symmetric within tolerance")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def _rodrigues_coeffs(theta):
    """Coefficients (sin t/t, (1-cos t)/t^2), Taylor-guarded near zero."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0
    return np.sin(theta) / theta, (1.0 - np.cos(theta)) / (theta * theta)


def exp_so3(v):
    """Exponential map: rotation by ``|v|`` radians about ``v``.

    Closed-form Rodrigues evaluation; even/odd structure in ``v`` makes
    ``exp_so3(-v)`` the exact float transpose of ``exp_so3(v)``.
    """
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v)
    a, b = _rodrigues_coeffs(theta)
    V = hat(v)
    return np.eye(3) + a * V + b * (V @ V)


def log_so3(R):
    """Rotation vector of ``R`` with angle in [0, pi].

    At angle pi the axis sign is not determined by ``R``; a fixed convention
    (first nonzero component positive) makes the result deterministic.
    """
    R = np.asarray(R, dtype=float)
    s = vex((R - R.T) / 2.0, tol=np.inf)  # symmetric part cancels exactly
    c = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    phi = np.arctan2(np.linalg.norm(s), c)
    if phi < 1e-7:
        # R ~ I + hat(v): the antisymmetric part is the vector itself.
        return s
    if phi <= np.pi - _NEAR_PI:
        return phi * s / np.linalg.norm(s)
    # Near pi: the outer product of the axis survives in the symmetric part.
    # aa^T = (sym(R) - cos(phi) I) / (1 - cos(phi))
    A = (0.5 * (R + R.T) - c * np.eye(3)) / (1.0 - c)
    j = int(np.argmax(np.diag(A)))
    axis = A[:, j] / np.sqrt(max(A[j, j], np.finfo(float).tiny))
    axis = axis / np.linalg.norm(axis)
    # Choose the sign: follow the antisymmetric part while it is nonzero,
    # otherwise (exactly at pi) first nonzero component positive.
    if np.linalg.norm(s) > 1e-12:
        if axis @ s < 0.0:
            axis = -axis
    else:
        for comp in axis:
            if comp != 0.0:
                if comp < 0.0:
                    axis = -axis
                break
    return phi * axis


def principal_angle(Q):
    """Rotation angle of ``Q`` in [0, pi], from the trace."""
    Q = np.asarray(Q, dtype=float)
    return float(np.arccos(np.clip((np.trace(Q) - 1.0) / 2.0, -1.0, 1.0)))


def is_rotation(R, tol=ROTATION_TOL):
    """True if ``R`` satisfies the group invariants within ``tol``."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    err = np.linalg.norm(R.T @ R - np.eye(3))
    return bool(err <= tol and np.linalg.det(R) > 0.0)


def require_rotation(R, tol=ROTATION_TOL, what="matrix"):
    """Validate and return ``R`` as a float array; raise ValueError if invalid."""
    R = np.asarray(R, dtype=float)
    if not is_rotation(R, tol):
        raise ValueError(f"{what} is not a rotation matrix (tol={tol:g})")
    return R


def project_to_so3(M):
    """Nearest rotation to ``M``: the special orthogonal polar factor.

    Only repairs matrices genuinely near the group (Frobenius distance
    <= 0.5 after sign correction) with a safely nonzero determinant;
    anything else raises :class:`NotNearGroup`.
    """
    M = np.asarray(M, dtype=float)
    u, s, vt = np.linalg.svd(M)
    if s[2] < 1e-12:
        raise NotNearGroup("matrix is singular or nearly so")
    d = np.linalg.det(u @ vt)
    R = u @ np.diag([1.0, 1.0, d]) @ vt
    if np.linalg.norm(M - R) > 0.5:
        raise NotNearGroup("matrix is too far from the rotation group")
    return R


def adjoint_rotate(R, v):
    """Rotate an axial vector: ``hat(R @ v) == R @ hat(v) @ R.T``."""
    R = np.asarray(R, dtype=float)
    v = np.asarray(v, dtype=float)
    return R @ v
