"""Weighted direction-matching machinery on SO(3).

Given a 3xk matrix ``E`` of known inertial unit directions and a body-frame
counterpart ``U`` (ideally ``U = R.T @ E``), the weighted matching cost

    cost(Rhat) = 1/2 <E - Rhat U, (E - Rhat U) W>

drives the attitude filter. The weight matrix ``W`` is constructed from the
SVD of ``E`` so that ``K = E W E.T`` has a *prescribed* distinct positive
spectrum ``d`` regardless of the ensemble's conditioning; the induced error
potential ``<I - Q, K>`` is then a Morse function on the group whose only
minimum is the identity, with three rotation-by-pi saddles at the
eigenvectors of ``K``.

Operations accept either plain arrays or the thin wrapper types below
(wrappers are unwrapped via their ``E``/``U``/``W``/``K`` attributes).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .so3 import require_rotation, vex

# Ensembles whose third singular value falls below this are treated as
# effectively rank-deficient: the weight 1/sigma^2 would explode.
RANK_TOL = 1e-6

# Pairs closer to parallel than this cross-product norm cannot be augmented.
PAIR_TOL = 1e-6

# Diagonal value for the unobservable tail of the weight spectrum (k > 3);
# keeps W positive definite without affecting K = E W E.T.
EPS_W = 1e-6

# Prescribed-spectrum default: distinct, positive, O(1).
DEFAULT_D = (3.0, 2.0, 1.0)


class DegeneratePair(ValueError):
    """Two direction vectors too close to parallel to span a frame."""


class RankDeficient(ValueError):
    """Direction ensemble does not span 3-space within tolerance."""


class NonDistinct(ValueError):
    """Prescribed eigenvalues are not pairwise distinct."""


def _as_matrix(x, attr):
    m = np.asarray(getattr(x, attr, x), dtype=float)
    return m


@dataclass(frozen=True)
class DirectionEnsemble:
    """Inertial direction matrix with unit columns spanning 3-space.

    ``k_observed`` counts the directions actually measured; a two-direction
    set is stored augmented to three columns, so ``E`` always has >= 3.
    """
    E: np.ndarray
    k_observed: int

    def __post_init__(self):
        E = np.asarray(self.E, dtype=float)
        object.__setattr__(self, "E", E)
        if E.ndim != 2 or E.shape[0] != 3 or E.shape[1] < 3:
            raise ValueError("ensemble must be 3xk with k >= 3 after augmentation")
        norms = np.linalg.norm(E, axis=0)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("ensemble columns must be unit-norm")
        if np.linalg.svd(E, compute_uv=False)[2] <= RANK_TOL:
            raise RankDeficient("ensemble does not span 3-space")

    @property
    def k_effective(self):
        return self.E.shape[1]

    @classmethod
    def from_columns(cls, E):
        """Build from raw columns, augmenting a two-column input."""
        E = np.asarray(E, dtype=float)
        k = E.shape[1] if E.ndim == 2 else 0
        if k == 2:
            E = augment_two_vectors(E[:, 0], E[:, 1])
        return cls(E, k_observed=k)


@dataclass(frozen=True)
class BodyVectorSet:
    """Body-frame counterpart of a :class:`DirectionEnsemble`.

    ``fresh`` records whether the columns were directly measured at this
    instant or propagated forward from the last measurement by gyro data.
    """
    U: np.ndarray
    fresh: bool = True

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        object.__setattr__(self, "U", U)
        if U.ndim != 2 or U.shape[0] != 3:
            raise ValueError("body vector set must be 3xk")


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric positive-definite weights with prescribed K-spectrum ``d``."""
    W: np.ndarray
    d: tuple

    def __post_init__(self):
        object.__setattr__(self, "W", np.asarray(self.W, dtype=float))
        object.__setattr__(self, "d", tuple(float(x) for x in self.d))


@dataclass(frozen=True)
class KMatrix:
    """K = E W E.T with its eigendecomposition cached (descending order)."""
    K: np.ndarray
    eigvals: np.ndarray = field(default=None)
    eigvecs: np.ndarray = field(default=None)

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        K = 0.5 * (K + K.T)
        object.__setattr__(self, "K", K)
        if self.eigvals is None or self.eigvecs is None:
            w, v = np.linalg.eigh(K)
            order = np.argsort(w)[::-1]
            w, v = w[order], v[:, order]
            v = _fix_column_signs(v)
            object.__setattr__(self, "eigvals", w)
            object.__setattr__(self, "eigvecs", v)
        if np.min(np.abs(np.diff(np.sort(self.eigvals)))) < 1e-9:
            raise NonDistinct("K eigenvalues are not pairwise distinct")


def _fix_column_signs(u, vh=None):
    """Deterministic SVD/eig signs: largest-|entry| of each column positive."""
    u = u.copy()
    if vh is not None:
        vh = vh.copy()
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0.0:
            u[:, j] = -u[:, j]
            if vh is not None:
                vh[j, :] = -vh[j, :]
    return u if vh is None else (u, vh)


def augment_two_vectors(u1, u2):
    """Complete a linearly independent pair to a right-handed unit triple.

    The third column is the normalized cross product, so all columns stay
    unit-norm; rotating both inputs rotates all three columns identically.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    c = np.cross(u1, u2)
    nc = np.linalg.norm(c)
    if nc <= PAIR_TOL:
        raise DegeneratePair("direction pair is (nearly) parallel")
    return np.column_stack([u1, u2, c / nc])


def construct_weights(E, d=DEFAULT_D):
    """Weights making ``E W E.T`` have spectrum exactly ``d``.

    With SVD ``E = U_E S V_E.T`` (deterministic signs), the weight is
    ``W = sum_j (d_j / s_j^2) v_j v_j.T`` plus ``EPS_W`` on the k-3
    dimensional row-space complement, which contributes nothing to K but
    keeps W positive definite.
    """
    E = _as_matrix(E, "E")
    d = tuple(float(x) for x in d)
    if len(d) != 3 or min(d) <= 0.0:
        raise ValueError("d must be three positive reals")
    if min(abs(d[0] - d[1]), abs(d[0] - d[2]), abs(d[1] - d[2])) < 1e-9:
        raise NonDistinct("prescribed eigenvalues must be pairwise distinct")
    u, s, vh = np.linalg.svd(E, full_matrices=False)
    if s[2] < RANK_TOL:
        raise RankDeficient("ensemble does not span 3-space")
    u, vh = _fix_column_signs(u, vh)
    k = E.shape[1]
    W = EPS_W * np.eye(k)
    for j in range(3):
        W += (d[j] / s[j] ** 2 - EPS_W) * np.outer(vh[j], vh[j])
    W = 0.5 * (W + W.T)
    return WeightMatrix(W=W, d=d)


def k_matrix(E, W):
    """Assemble K = E W E.T with cached eigendecomposition."""
    E = _as_matrix(E, "E")
    Wm = _as_matrix(W, "W")
    K = E @ Wm @ E.T
    return KMatrix(K=K)


def wahba_cost(R_hat, U, E, W):
    """Weighted matching cost 1/2 <E - Rhat U, (E - Rhat U) W>; >= 0."""
    R_hat = require_rotation(R_hat, what="estimate")
    U = _as_matrix(U, "U")
    E = _as_matrix(E, "E")
    Wm = _as_matrix(W, "W")
    D = E - R_hat @ U
    return 0.5 * float(np.trace(D.T @ D @ Wm))


def potential_error(Q, K):
    """Attitude-error potential <I - Q, K> = trace(K) - trace(Q.T K); >= 0."""
    Q = np.asarray(Q, dtype=float)
    Km = _as_matrix(K, "K")
    return float(np.trace(Km) - np.trace(Q.T @ Km))


def s_l(R_hat, E, W, U_tilde):
    """Measurement-side potential gradient vex(L.T Rhat - Rhat.T L).

    ``L = E W U.T`` uses only measured/propagated quantities; for exact
    measurements it equals the truth-side gradient :func:`s_k` pulled back
    through the estimate.

    Evaluated as the equivalent weighted cross-product sum
    ``sum_jl W[j,l] (Rhat.T e_j) x u_l`` with the (j,l)/(l,j) terms paired
    before accumulation. Pairing makes the gradient *bitwise* zero when the
    measured set equals ``Rhat.T E`` bitwise (the perfect-estimate state),
    since float cross products anticommute exactly — so the filter's fixed
    point is exact, not merely within rounding.
    """
    R_hat = np.asarray(R_hat, dtype=float)
    E = _as_matrix(E, "E")
    Wm = _as_matrix(W, "W")
    U = _as_matrix(U_tilde, "U")
    D = R_hat.T @ E
    C = np.cross(D.T[:, None, :], U.T[None, :, :]) * Wm[:, :, None]
    return 0.5 * np.sum(C + np.transpose(C, (1, 0, 2)), axis=(0, 1))


def s_k(Q, K):
    """Truth-side potential gradient vex(K Q.T - Q K); zero at critical points."""
    Q = np.asarray(Q, dtype=float)
    Km = _as_matrix(K, "K")
    return vex(Km @ Q.T - Q @ Km)


def critical_points(K):
    """The four stationary rotations of the error potential.

    Returns ``[I, Q1, Q2, Q3]`` where ``Qj`` is the rotation by pi about the
    j-th eigenvector of K (descending eigenvalues). The potential values are
    0 < 2(d2+d3) < 2(d1+d3) < 2(d1+d2): a unique minimum at the identity.
    """
    km = K if isinstance(K, KMatrix) else KMatrix(K=np.asarray(K, dtype=float))
    out = [np.eye(3)]
    for j in range(3):
        a = km.eigvecs[:, j]
        out.append(2.0 * np.outer(a, a) - np.eye(3))
    return out
