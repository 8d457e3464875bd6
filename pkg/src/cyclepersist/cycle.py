"""Limit-cycle location by Poincare-section shooting.

Newton iterates on (section offset, period) of the return map, using the
variational matrix for derivatives.  Repelling cycles are found by time
reversal and mapped back; the stored orbit is always integrated in the
stable direction, so the shooting residual stays at integration accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .errors import CycleSearchError, IntegrationError, PointOnBoundaryError
from .integrate import Trajectory, flow, flow_with_variational, find_event

DEFAULT_POLYLINE = 2048
_MAX_NEWTON = 50


def perp(v):
    """Rotation by pi/2 clockwise: (x, y) -> (y, -x)."""
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


@dataclass(frozen=True)
class LimitCycle:
    """An isolated periodic orbit with period, orientation and geometry."""

    orbit: Trajectory  # dense orbit over [0, T]
    T: float
    anchor: np.ndarray  # x0(0), the converged section point
    orientation: int  # +1 when the interior lies left along increasing t
    shooting_residual: float
    polyline: np.ndarray  # (N, 2) closed sample (last point != first)
    min_field_norm: float
    reversed_search: bool = False  # located via time reversal (repelling cycle)

    def at(self, t):
        """Evaluate x0 at times reduced modulo T."""
        t = np.mod(np.asarray(t, dtype=float), self.T)
        return self.orbit.at(t)

    def interior_point(self):
        """Centroid of the polyline (inside for star-shaped-enough cycles)."""
        return self.polyline.mean(axis=0)


def signed_area(polyline):
    """Shoelace area of a closed polyline (last vertex joins the first)."""
    x = polyline[:, 0]
    y = polyline[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def orientation(obj):
    """Orientation of a LimitCycle or of a raw polyline: +1 counterclockwise."""
    poly = obj.polyline if isinstance(obj, LimitCycle) else np.asarray(obj, dtype=float)
    area = signed_area(poly)
    scale = float(np.max(np.abs(poly))) or 1.0
    if abs(area) < 1e-12 * scale * scale:
        raise CycleSearchError("degenerate polyline: signed area is numerically zero")
    return 1 if area > 0 else -1


def winding_number_of_point(polyline, p):
    """Integer winding of the closed polyline around p (angle summation)."""
    v = polyline - np.asarray(p, dtype=float)
    w = np.roll(v, -1, axis=0)
    ang = np.arctan2(v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0], (v * w).sum(axis=1))
    return int(np.rint(ang.sum() / (2 * np.pi)))


def _distance_to_polyline(polyline, p):
    a = polyline
    b = np.roll(polyline, -1, axis=0)
    ab = b - a
    ap = np.asarray(p, dtype=float) - a
    denom = (ab * ab).sum(axis=1)
    denom[denom == 0] = 1.0
    s = np.clip((ap * ab).sum(axis=1) / denom, 0.0, 1.0)
    proj = a + s[:, None] * ab
    return float(np.min(np.linalg.norm(proj - p, axis=1)))


def contains(cycle, p, boundary_tol=1e-9):
    """True iff p lies in the interior of the cycle, by winding number.

    Raises :class:`PointOnBoundaryError` when p is within ``boundary_tol``
    of the polyline.
    """
    poly = cycle.polyline if isinstance(cycle, LimitCycle) else np.asarray(cycle, dtype=float)
    if _distance_to_polyline(poly, p) < boundary_tol:
        raise PointOnBoundaryError(f"point {tuple(np.asarray(p))} lies on the cycle boundary")
    return winding_number_of_point(poly, p) != 0


def _first_return_time(system, seed, tol, horizon):
    """Time of the first same-direction crossing of the section through seed.

    Returns None when no such crossing exists in the horizon or the orbit
    blows up (e.g. seeding the unstable side of a repelling cycle).
    """
    n = system.psi(seed)
    nn = np.linalg.norm(n)
    if nn < 1e-12:
        raise CycleSearchError("degenerate section: field vanishes at the seed")
    n = n / nn

    def g(p):
        return (p - seed) @ n

    try:
        traj = flow(lambda t, y: system.psi(y), seed, 0.0, horizon, tol=tol)
    except IntegrationError:
        return None
    blank = 1e-6 * horizon
    for ev in find_event(traj, g):
        if ev.time > blank and ev.direction > 0:
            return ev.time
    return None


def _newton_shooting(system, seed, T_init, tol, int_tol):
    """Newton on (section coordinate, period) for the return map."""
    n = system.psi(seed)
    n = n / np.linalg.norm(n)
    tang = perp(n)
    c = 0.0
    T = float(T_init)
    history = []

    def point(cv):
        return seed + cv * tang

    def shoot(cv, Tv):
        traj, mat = flow_with_variational(system, point(cv), 0.0, Tv, tol=int_tol)
        G = traj.endpoint - point(cv)
        return traj, mat, G, float(np.linalg.norm(G))

    traj, mat, G, res = shoot(c, T)
    history.append(res)
    for _ in range(_MAX_NEWTON):
        xi = point(c)
        if res <= tol * (1.0 + np.linalg.norm(xi)):
            return xi, T, res, history
        Y = mat.endpoint
        J = np.column_stack([(Y - np.eye(2)) @ tang, system.psi(traj.endpoint)])
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e12:
            raise CycleSearchError(
                "shooting Jacobian singular (multiplier 1 duplicated / non-isolated cycle?)"
            )
        dc, dT = np.linalg.solve(J, -G)
        lam = 1.0
        for _ in range(9):
            c_try, T_try = c + lam * dc, T + lam * dT
            if T_try > 0:
                traj_t, mat_t, G_t, res_t = shoot(c_try, T_try)
                if res_t < res or lam <= 1.0 / 256:
                    c, T = c_try, T_try
                    traj, mat, G, res = traj_t, mat_t, G_t, res_t
                    history.append(res)
                    break
            lam *= 0.5
        else:
            raise CycleSearchError(
                f"shooting step rejected at residual {res:.2e} (period sign constraint)"
            )
    raise CycleSearchError(
        f"shooting Newton did not converge in {_MAX_NEWTON} iterations; "
        f"residual history {['%.2e' % r for r in history[-6:]]}"
    )


def _reverse_trajectory(traj, T):
    """View of a [0, T] trajectory with time running the other way."""
    order = slice(None, None, -1)
    return Trajectory(
        ts=T - traj.ts[order],
        ys=traj.ys[order],
        anchor_t=(T - traj.anchor_t)[order],
        anchor_state=traj.anchor_state[order],
        hsign=(-traj.hsign)[order],
        Q=(-traj.Q)[order],
        t0=0.0,
        t1=T,
        tol=traj.tol,
    )


def _validate_smallest_period(system, orbit, anchor, T):
    n = system.psi(anchor)
    n = n / np.linalg.norm(n)

    def g(p):
        return (p - anchor) @ n

    margin = 1e-6 * T
    scale = 1.0 + float(np.linalg.norm(anchor))
    for ev in find_event(orbit, g, window=(margin, T - margin)):
        if ev.direction > 0 and np.linalg.norm(orbit.at(ev.time) - anchor) <= 1e-6 * scale:
            raise CycleSearchError(
                f"period {T:.6g} is not smallest: same-direction return at t={ev.time:.6g}"
            )
    for k in (2, 3, 4, 5):
        if np.linalg.norm(orbit.at(T / k) - anchor) <= 1e-6 * scale:
            raise CycleSearchError(f"period {T:.6g} is not smallest: T/{k} is also a period")


def find_limit_cycle(system, seed, period_guess=None, tol=1e-10, polyline_n=DEFAULT_POLYLINE):
    """Locate the isolated limit cycle reachable from ``seed``.

    The seed must lie in the basin of an attracting cycle, or of a repelling
    one (found by integrating the reversed field).  ``tol`` bounds the
    shooting residual relative to ``1 + |anchor|``; integration runs tighter.
    """
    seed = np.asarray(seed, dtype=float)
    int_tol = float(np.clip(tol * 1e-2, 1e-13, 1e-6))

    search = system
    reversed_search = False
    horizons = (2.5 * float(period_guess),) if period_guess else (10.0, 100.0)
    t_ret = None
    for horizon in horizons:
        t_ret = _first_return_time(search, seed, min(1e-9, tol), horizon)
        if t_ret is not None:
            break
    if t_ret is None:
        # no same-direction forward return: assume a repelling cycle
        reversed_search = True
        neg_entries = None
        if system.jac_entries is not None:
            neg_entries = tuple(
                (lambda e: (lambda **kw: -e(**kw)))(e) for e in system.jac_entries
            )
        search = dc_replace(
            system,
            psi1=lambda **kw: -system.psi1(**kw),
            psi2=lambda **kw: -system.psi2(**kw),
            jac_entries=neg_entries,
        )
        for horizon in horizons:
            t_ret = _first_return_time(search, seed, min(1e-9, tol), horizon)
            if t_ret is not None:
                break
        if t_ret is None:
            raise CycleSearchError("no sign-changing return found in either time direction")
    T_init = float(period_guess) if period_guess is not None else t_ret

    anchor, T, _, _ = _newton_shooting(search, seed, T_init, tol, int_tol)
    if period_guess is not None and abs(T - period_guess) > 0.3 * abs(period_guess):
        raise CycleSearchError(
            f"converged period {T:.6g} deviates more than 30% from guess {period_guess:.6g}"
        )

    final = flow(lambda t, y: search.psi(y), anchor, 0.0, T, tol=int_tol)
    residual = float(np.linalg.norm(final.endpoint - anchor))
    scale = 1.0 + float(np.linalg.norm(anchor))
    if residual > tol * scale:
        raise CycleSearchError(f"shooting residual {residual:.3e} exceeds {tol * scale:.3e}")

    orbit = _reverse_trajectory(final, T) if reversed_search else final
    _validate_smallest_period(system, orbit, anchor, T)

    tgrid = np.linspace(0.0, T, polyline_n, endpoint=False)
    polyline = orbit.at(tgrid)
    speeds = np.linalg.norm(system.psi(polyline), axis=1)
    min_field_norm = float(speeds.min())
    if min_field_norm <= 0:
        raise CycleSearchError("field vanishes on the located orbit (not a limit cycle)")
    k = orientation(polyline)

    return LimitCycle(
        orbit=orbit,
        T=float(T),
        anchor=anchor,
        orientation=k,
        shooting_residual=residual,
        polyline=polyline,
        min_field_norm=min_field_norm,
        reversed_search=reversed_search,
    )
