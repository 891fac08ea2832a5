"""Ground-truth rigid-body simulation and multi-rate sensor sampling.

Truth: Euler's rotational dynamics ``J dOmega/dt = tau(t) - Omega x (J Omega)``
integrated with fixed-step RK4; attitude advanced by the trapezoidal
exponential step ``R_{i+1} = R_i exp((h/2)(Omega_{i+1} + Omega_i))``. Using
the same step for truth and for measurement propagation makes the propagated
body vectors *exactly* equal ``R_i.T @ E`` in the noise-free case — a
testable identity rather than an approximation.

Sensors: the gyro is sampled every step with noise uniform in a ball; full
direction-vector blocks arrive only every ``n``-th step, with a random count
of directions, each perturbed by a bounded random rotation about an axis
perpendicular to it (norm-preserving). Between vector instants the last
block is bridged forward with gyro data.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .catalog import DEFAULT_CATALOG
from .so3 import exp_so3, hat, project_to_so3
from .wahba import DegeneratePair, augment_two_vectors


@dataclass(frozen=True)
class TruthState:
    """Attitude (body->inertial), body angular velocity, and time."""
    R: np.ndarray
    Omega: np.ndarray
    t: float


@dataclass(frozen=True)
class SensorConfig:
    """Sampling rates, noise bounds (radians), direction-count range, seed.

    ``vector_noise_mode`` selects how direction measurements are corrupted:
    ``"rot"`` rotates each unit vector by a bounded random angle (norm
    preserved by construction), ``"add"`` adds a bounded random offset and
    renormalizes. Both consume the same number of random draws per vector.
    """
    h: float
    n: int = 1
    gyro_noise_bound: float = 0.0
    vector_noise_bound: float = 0.0
    vector_noise_mode: str = "rot"
    k_min: int = 2
    k_max: int = 9
    seed: int = 0

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValueError("h must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.gyro_noise_bound < 0.0 or self.vector_noise_bound < 0.0:
            raise ValueError("noise bounds must be nonnegative")
        if self.vector_noise_mode not in ("rot", "add"):
            raise ValueError("vector_noise_mode must be 'rot' or 'add'")
        if not (2 <= self.k_min <= self.k_max):
            raise ValueError("need 2 <= k_min <= k_max")


@dataclass(frozen=True)
class MeasurementRecord:
    """One step of sensor output.

    ``omega_m`` is the gyro reading. ``u_tilde`` is the body-frame direction
    set the filter consumes: the measured block at fresh steps, otherwise the
    last block propagated forward. ``E``/``u_m`` carry the inertial columns
    and raw body measurements only at fresh steps; ``k_observed`` is the
    direction count actually drawn for the active block (before any
    two-vector augmentation).
    """
    step: int
    omega_m: np.ndarray
    u_tilde: np.ndarray
    fresh: bool
    k_observed: int
    E: Optional[np.ndarray] = None
    u_m: Optional[np.ndarray] = None


def discrete_attitude_step(R, omega_now, omega_next, h):
    """Advance attitude by the trapezoidal exponential step."""
    R = np.asarray(R, dtype=float)
    avg = 0.5 * h * (np.asarray(omega_next, dtype=float)
                     + np.asarray(omega_now, dtype=float))
    return R @ exp_so3(avg)


def propagate_vectors(U_prev, omega_m_prev, omega_m_now, h):
    """Bridge a body-frame direction set one step forward with gyro data.

    Left-multiplication by the transpose of the attitude increment, so a
    chain of these steps tracks ``R_i.T @ E`` exactly when the gyro is exact
    and truth uses :func:`discrete_attitude_step`.
    """
    U_prev = np.asarray(U_prev, dtype=float)
    avg = -0.5 * h * (np.asarray(omega_m_prev, dtype=float)
                      + np.asarray(omega_m_now, dtype=float))
    return exp_so3(avg) @ U_prev


def torque_sinusoidal(amplitude, frequency):
    """Torque law tau_j(t) = amplitude_j * sin(frequency_j * t)."""
    amplitude = np.asarray(amplitude, dtype=float)
    frequency = np.asarray(frequency, dtype=float)

    def tau(t):
        return amplitude * np.sin(frequency * t)

    return tau


def simulate_truth(J_diag, torque, R0, Omega0, h, n_steps):
    """Integrate rigid-body truth for ``n_steps`` steps of size ``h``.

    ``J_diag``: positive inertia diagonal. ``torque``: callable t -> (3,).
    Returns a list of ``n_steps + 1`` :class:`TruthState`. Angular velocity
    uses RK4 on Euler's equations; attitude uses the trapezoidal exponential
    step on consecutive velocity samples.
    """
    J = np.asarray(J_diag, dtype=float)
    if J.shape != (3,) or np.any(J <= 0.0):
        raise ValueError("inertia diagonal must be three positive values")
    Jinv = 1.0 / J

    def omega_dot(t, om):
        return Jinv * (torque(t) - np.cross(om, J * om))

    R = np.asarray(R0, dtype=float).copy()
    om = np.asarray(Omega0, dtype=float).copy()
    out = [TruthState(R=R.copy(), Omega=om.copy(), t=0.0)]
    for i in range(n_steps):
        t = i * h
        k1 = omega_dot(t, om)
        k2 = omega_dot(t + 0.5 * h, om + 0.5 * h * k1)
        k3 = omega_dot(t + 0.5 * h, om + 0.5 * h * k2)
        k4 = omega_dot(t + h, om + h * k3)
        om_next = om + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        R = discrete_attitude_step(R, om, om_next, h)
        om = om_next
        out.append(TruthState(R=R.copy(), Omega=om.copy(), t=(i + 1) * h))
    return out


def simulate_truth_rk4_attitude(J_diag, torque, R0, Omega0, h, n_steps):
    """Truth variant integrating attitude kinematics dR/dt = R hat(Omega) by RK4.

    Joint RK4 on the coupled (R, Omega) system, with the attitude projected
    back to the group each step. Breaks the exact propagation identity of
    the trapezoidal step; provided for comparison (``truth_attitude = rk4``).
    """
    J = np.asarray(J_diag, dtype=float)
    if J.shape != (3,) or np.any(J <= 0.0):
        raise ValueError("inertia diagonal must be three positive values")
    Jinv = 1.0 / J

    def omega_dot(t, om):
        return Jinv * (torque(t) - np.cross(om, J * om))

    R = np.asarray(R0, dtype=float).copy()
    om = np.asarray(Omega0, dtype=float).copy()
    out = [TruthState(R=R.copy(), Omega=om.copy(), t=0.0)]
    for i in range(n_steps):
        t = i * h
        k1w = omega_dot(t, om)
        k1R = R @ hat(om)
        k2w = omega_dot(t + 0.5 * h, om + 0.5 * h * k1w)
        k2R = (R + 0.5 * h * k1R) @ hat(om + 0.5 * h * k1w)
        k3w = omega_dot(t + 0.5 * h, om + 0.5 * h * k2w)
        k3R = (R + 0.5 * h * k2R) @ hat(om + 0.5 * h * k2w)
        k4w = omega_dot(t + h, om + h * k3w)
        k4R = (R + h * k3R) @ hat(om + h * k3w)
        om = om + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        R = project_to_so3(R + (h / 6.0) * (k1R + 2.0 * k2R + 2.0 * k3R + k4R))
        out.append(TruthState(R=R.copy(), Omega=om.copy(), t=(i + 1) * h))
    return out


def sample_gyro(Omega_true, bound, rng):
    """Gyro reading: truth plus zero-mean noise uniform in a ball."""
    Omega_true = np.asarray(Omega_true, dtype=float)
    if bound < 0.0:
        raise ValueError("bound must be nonnegative")
    if bound == 0.0:
        return Omega_true.copy()
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    radius = bound * rng.random() ** (1.0 / 3.0)
    return Omega_true + radius * direction


def _perturb_direction(u, bound, rng):
    """Rotate ``u`` by a uniform angle in [0, bound] about a random axis
    perpendicular to it; draws are consumed even at bound 0 so the stream
    layout does not depend on the noise setting."""
    axis = rng.standard_normal(3)
    axis -= (axis @ u) * u
    axis /= np.linalg.norm(axis)
    angle = bound * rng.random()
    if angle == 0.0:
        return u.copy()
    return exp_so3(angle * axis) @ u


def _perturb_additive(u, bound, rng):
    """Add an offset uniform in a ball of radius ``bound`` and renormalize.

    Same draw count as :func:`_perturb_direction` (three normals, one
    uniform) so switching modes does not shift the rest of the stream.
    """
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    radius = bound * rng.random() ** (1.0 / 3.0)
    if radius == 0.0:
        return u.copy()
    noisy = u + radius * direction
    return noisy / np.linalg.norm(noisy)


def sample_vectors(R_true, E_full, k, bound, rng, mode="rot"):
    """Observe ``k`` directions drawn uniformly from the catalog.

    Returns ``(E_observed, U_m)``: the inertial columns actually used and
    their measured body-frame counterparts, each perturbed per ``mode``
    ("rot" or "add"). A two-direction draw is augmented with the normalized
    cross product on both sides *after* perturbation; if the perturbed pair
    ends up nearly parallel the perturbation is retried once, then
    :class:`~so3me.wahba.DegeneratePair` propagates.
    """
    R_true = np.asarray(R_true, dtype=float)
    E_full = np.asarray(E_full, dtype=float)
    if not (2 <= k <= E_full.shape[1]):
        raise ValueError("k out of range for the catalog")
    perturb = {"rot": _perturb_direction, "add": _perturb_additive}[mode]
    idx = np.sort(rng.choice(E_full.shape[1], size=k, replace=False))
    E_obs = E_full[:, idx].copy()
    U_true = R_true.T @ E_obs

    def perturb_all():
        U = np.empty_like(U_true)
        for j in range(k):
            U[:, j] = perturb(U_true[:, j], bound, rng)
        return U

    U_m = perturb_all()
    if k == 2:
        try:
            U_m = augment_two_vectors(U_m[:, 0], U_m[:, 1])
        except DegeneratePair:
            U_m = perturb_all()
            U_m = augment_two_vectors(U_m[:, 0], U_m[:, 1])
        E_obs = augment_two_vectors(E_obs[:, 0], E_obs[:, 1])
    return E_obs, U_m


def build_stream(truth, sensors, catalog=None, rng=None):
    """Generate the full measurement stream for a truth trajectory.

    Gyro every step; a fresh direction block exactly at ``i mod n == 0``
    with count drawn uniformly in ``[k_min, k_max]``; in between, the body
    vectors are propagated with consecutive gyro readings. Deterministic for
    a fixed :class:`SensorConfig` (including seed).
    """
    if catalog is None:
        catalog = DEFAULT_CATALOG
    if rng is None:
        rng = np.random.default_rng(sensors.seed)
    records = []
    u_tilde = None
    omega_prev = None
    k_active = 0
    for i, state in enumerate(truth):
        omega_m = sample_gyro(state.Omega, sensors.gyro_noise_bound, rng)
        if i % sensors.n == 0:
            k = int(rng.integers(sensors.k_min, sensors.k_max + 1))
            E_obs, u_m = sample_vectors(state.R, catalog, k,
                                        sensors.vector_noise_bound, rng,
                                        mode=sensors.vector_noise_mode)
            u_tilde = u_m.copy()
            k_active = k
            records.append(MeasurementRecord(
                step=i, omega_m=omega_m, u_tilde=u_tilde.copy(), fresh=True,
                k_observed=k, E=E_obs, u_m=u_m))
        else:
            u_tilde = propagate_vectors(u_tilde, omega_prev, omega_m, sensors.h)
            records.append(MeasurementRecord(
                step=i, omega_m=omega_m, u_tilde=u_tilde.copy(), fresh=False,
                k_observed=k_active))
        omega_prev = omega_m
    return records
