"""Monodromy, characteristic multipliers, and the eigenfunction frame.

The frame holds the four curves needed by the bifurcation integrals: the
cycle velocity and the second eigenfunction of the linearized system, and
the two eigenfunctions of its adjoint.  All four are evaluated densely from
the stored fundamental-matrix trajectory (the adjoint ones through the
inverse-transpose relation), then rescaled so the biorthogonal pairings at
t = 0 are exactly one.

A long-time extraction of the periodic adjoint eigenfunction by plain
integration over several periods is provided as an independent cross-check
of the eigenvector route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HypothesisFailure
from .cycle import perp
from .integrate import MatrixTrajectory, flow, flow_with_variational

MULTIPLIER_GAP = 1e-3  # minimum |rho - 1| for an isolated hyperbolic cycle
DEFAULT_GRID = 1024
DEFAULT_TOL = 1e-12


def monodromy(system, cycle, tol=DEFAULT_TOL):
    """Fundamental matrix over one period along the cycle, Y(T, 0)."""
    _, mat = flow_with_variational(system, cycle.anchor, 0.0, cycle.T, tol=tol)
    return mat.endpoint


def _apply_inverse_transpose(Y, w):
    """solve(Y^T, w) batched over leading axes of Y."""
    a = Y[..., 0, 0]
    b = Y[..., 0, 1]
    c = Y[..., 1, 0]
    d = Y[..., 1, 1]
    det = a * d - b * c
    z0 = (d * w[0] - c * w[1]) / det
    z1 = (-b * w[0] + a * w[1]) / det
    return np.stack([z0, z1], axis=-1)


def _orient(v, reference):
    """Fix the sign freedom of an eigenvector: positive pairing with reference."""
    s = float(v @ reference)
    if s == 0.0:
        i = int(np.argmax(np.abs(v)))
        return -v if v[i] < 0 else v
    return -v if s < 0 else v


@dataclass(frozen=True)
class FloquetFrame:
    """Eigenfunction frame along the cycle, normalized per the t=0 pairings."""

    system: object
    cycle: object
    Y: MatrixTrajectory
    rho: float
    rho_star: float
    trivial_residual: float
    v_rho: np.ndarray  # y1(0)
    w_one: np.ndarray  # z0(0)
    w_star: np.ndarray  # z1(0)
    grid: np.ndarray  # sample times on [0, T]

    @property
    def T(self):
        return self.cycle.T

    def xdot0(self, t):
        return self.system.psi(self.cycle.at(t))

    def y1(self, t, extend=False):
        """Eigenfunction of the linearized system for multiplier rho.

        With ``extend=True``, times outside [0, T] are reduced by the
        Floquet relation y1(t + mT) = rho^m y1(t).
        """
        t = np.asarray(t, dtype=float)
        if extend:
            m = np.floor(t / self.T)
            tau = t - m * self.T
            val = (self.Y.at(tau) @ self.v_rho) * (self.rho ** m)[..., None]
            return val
        return self.Y.at(t) @ self.v_rho

    def z0(self, t):
        """Periodic eigenfunction of the adjoint system (multiplier 1)."""
        t = np.mod(np.asarray(t, dtype=float), self.T)
        return _apply_inverse_transpose(self.Y.at(t), self.w_one)

    def z1(self, t, extend=False):
        """Adjoint eigenfunction for multiplier rho_star.

        With ``extend=True``, times outside [0, T] use
        z1(t + mT) = rho_star^m z1(t).
        """
        t = np.asarray(t, dtype=float)
        if extend:
            m = np.floor(t / self.T)
            tau = t - m * self.T
            val = _apply_inverse_transpose(self.Y.at(tau), self.w_star)
            return val * (self.rho_star ** m)[..., None]
        return _apply_inverse_transpose(self.Y.at(t), self.w_star)

    def pairing_matrix(self, t):
        """(xdot0(t) y1(t))^T (z0(t) z1(t)); constant diag(1, 1) in exact arithmetic."""
        t = np.asarray(t, dtype=float)
        xd = self.xdot0(t)
        y1 = self.y1(t)
        z0 = self.z0(t)
        z1 = self.z1(t)
        out = np.empty(t.shape + (2, 2))
        out[..., 0, 0] = (xd * z0).sum(axis=-1)
        out[..., 0, 1] = (xd * z1).sum(axis=-1)
        out[..., 1, 0] = (y1 * z0).sum(axis=-1)
        out[..., 1, 1] = (y1 * z1).sum(axis=-1)
        return out

    def pairing_deviation(self, t=None):
        """Max deviation of the pairing matrix from diag(1,1), entrywise scaled.

        Each entry (i, j) is scaled by the product of the factor norms
        |u_i(t)| |v_j(t)| so the measure is a cosine-level error; the raw
        off-diagonal inner products grow like |z1| ~ rho_star and would
        otherwise drown in their own magnitude.
        """
        t = self.grid if t is None else np.asarray(t, dtype=float)
        P = self.pairing_matrix(t)
        nu = np.stack([np.linalg.norm(self.xdot0(t), axis=-1), np.linalg.norm(self.y1(t), axis=-1)], axis=-1)
        nv = np.stack([np.linalg.norm(self.z0(t), axis=-1), np.linalg.norm(self.z1(t), axis=-1)], axis=-1)
        scale = np.maximum(nu[..., :, None] * nv[..., None, :], 1.0)
        return float(np.max(np.abs(P - np.eye(2)) / scale))

    def sample_table(self):
        """Columns (t, xdot0, y1, z0, z1) on the stored grid, for export."""
        t = self.grid
        return np.column_stack([t, self.xdot0(t), self.y1(t), self.z0(t), self.z1(t)])


def build_frame(system, cycle, n_grid=DEFAULT_GRID, tol=DEFAULT_TOL):
    """Construct the normalized eigenfunction frame for an isolated cycle.

    Raises :class:`HypothesisFailure` when the nontrivial multiplier is
    within :data:`MULTIPLIER_GAP` of 1 (trivial multiplier not simple).
    """
    _, Ymat = flow_with_variational(system, cycle.anchor, 0.0, cycle.T, tol=tol)
    M = Ymat.endpoint
    lam, vecs = np.linalg.eig(M)
    if np.abs(lam.imag).max() > 1e-8:
        raise HypothesisFailure(
            f"complex characteristic multipliers {lam} (no real isolated-cycle structure)"
        )
    lam = lam.real
    vecs = vecs.real
    trivial = int(np.argmin(np.abs(lam - 1.0)))
    other = 1 - trivial
    rho = float(lam[other])
    trivial_residual = float(abs(lam[trivial] - 1.0))
    if abs(rho - 1.0) <= MULTIPLIER_GAP:
        raise HypothesisFailure(
            f"nontrivial multiplier {rho} too close to 1: trivial multiplier not simple"
        )

    xdot_perp = perp(system.psi(cycle.anchor))
    v_rho = _orient(vecs[:, other] / np.linalg.norm(vecs[:, other]), xdot_perp)

    Madj = np.linalg.inv(M).T
    lam_a, vecs_a = np.linalg.eig(Madj)
    lam_a = lam_a.real
    vecs_a = vecs_a.real
    a_triv = int(np.argmin(np.abs(lam_a - 1.0)))
    a_other = 1 - a_triv
    rho_star = float(lam_a[a_other])

    xdot0_0 = system.psi(cycle.anchor)
    w_one = vecs_a[:, a_triv]
    w_one = w_one / float(xdot0_0 @ w_one)
    w_star = vecs_a[:, a_other]
    w_star = w_star / float(v_rho @ w_star)

    grid = np.linspace(0.0, cycle.T, n_grid + 1)
    return FloquetFrame(
        system=system,
        cycle=cycle,
        Y=Ymat,
        rho=rho,
        rho_star=rho_star,
        trivial_residual=trivial_residual,
        v_rho=v_rho,
        w_one=w_one,
        w_star=w_star,
        grid=grid,
    )


@dataclass(frozen=True)
class AdjointExtraction:
    """Result of the long-time adjoint run: extracted periodic curve and its
    sup-distance to the frame's eigenvector-route curve after optimal scalar
    rescaling."""

    grid: np.ndarray
    z0_curve: np.ndarray  # (N, 2)
    deviation: float
    scale: float
    k_used: int
    backward: bool


def longtime_adjoint_extract(system, cycle, k, frame=None, ic=None, tol=DEFAULT_TOL, n_grid=512):
    """Extract the periodic adjoint eigenfunction by integrating over k periods.

    The adjoint transient direction is set by the nontrivial adjoint
    multiplier: a growing one is handled by running time backward so the
    non-periodic mode decays.  ``k`` is capped so the decay factor stays
    representable.  The default initial vector deliberately mixes both
    adjoint modes.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if frame is None:
        frame = build_frame(system, cycle, tol=tol)
    T = cycle.T
    factor = min(abs(frame.rho_star), 1.0 / abs(frame.rho_star))
    if factor > 0:
        k_cap = max(2, int(np.floor(-300.0 * np.log(10.0) / np.log(factor))))
        k_used = min(int(k), k_cap)
    else:
        k_used = int(k)

    xd0 = system.psi(cycle.anchor)
    if ic is None:
        ic = xd0 + perp(xd0)
    ic = np.asarray(ic, dtype=float)

    def adjoint_rhs(t, z):
        A = system.jac(cycle.at(t))
        return -(A.T @ z)

    backward = abs(frame.rho_star) > 1.0
    if backward:
        run = flow(adjoint_rhs, ic, T, (1 - k_used) * T, tol=tol)
        offset = (1 - k_used) * T
    else:
        run = flow(adjoint_rhs, ic, 0.0, k_used * T, tol=tol)
        offset = (k_used - 1) * T

    grid = np.linspace(0.0, T, n_grid + 1)
    curve = run.at(grid + offset)
    ref = frame.z0(grid)
    num = float(np.sum(curve * ref))
    den = float(np.sum(curve * curve))
    scale = num / den if den > 0 else 0.0
    deviation = float(np.max(np.linalg.norm(scale * curve - ref, axis=1)))
    return AdjointExtraction(
        grid=grid,
        z0_curve=scale * curve,
        deviation=deviation,
        scale=scale,
        k_used=k_used,
        backward=backward,
    )


def export_frame_csv(frame, path):
    """Write the sampled frame as CSV with one row per grid time."""
    table = frame.sample_table()
    header = "t,xdot0_1,xdot0_2,y1_1,y1_2,z0_1,z0_2,z1_1,z1_2"
    np.savetxt(path, table, delimiter=",", header=header, comments="")
    return path
