"""Adaptive Runge-Kutta integration with dense output and event location.

The stepper is the classic embedded 5(4) Dormand-Prince pair with its free
quartic interpolant (scipy's RK45); this module owns the trajectory
representation, the piecewise integration at declared non-smooth forcing
times, and derivative-free event refinement, so that dense evaluation is a
vectorized numpy operation.

Trajectories are immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import RK45

from .errors import IntegrationError, NonFiniteFieldError

TOL_MIN = 1e-13
TOL_MAX = 1e-3
DEFAULT_TOL = 1e-10

_EVENT_REFINE = 1e-10  # scaled |g| target for bisection refinement
_N_COEF = 4  # quartic interpolant: coefficients for theta^1..theta^4


def _check_tol(tol):
    if not (TOL_MIN <= tol <= TOL_MAX):
        raise ValueError(f"tol must lie in [{TOL_MIN:g}, {TOL_MAX:g}], got {tol:g}")


@dataclass(frozen=True)
class Trajectory:
    """Dense-output solution segments over one integration run.

    Per accepted step i the interpolant is
    ``y(t) = anchor_state[i] + hsign[i] * (Q[i] @ [th, th^2, th^3, th^4])``
    with ``th = (t - anchor_t[i]) / hsign[i]``; the anchor is the step's
    start node in integration order, so backward runs evaluate with the
    same formula.
    """

    ts: np.ndarray  # (m+1,) ascending node times
    ys: np.ndarray  # (m+1, n) states at nodes
    anchor_t: np.ndarray  # (m,)
    anchor_state: np.ndarray  # (m, n)
    hsign: np.ndarray  # (m,) signed step widths
    Q: np.ndarray  # (m, n, 4) dense coefficients
    t0: float  # requested start
    t1: float  # requested end (may be < t0)
    tol: float

    @property
    def dim(self):
        return self.ys.shape[1]

    @property
    def span(self):
        return float(self.ts[0]), float(self.ts[-1])

    @property
    def endpoint(self):
        return self.at(self.t1)

    def at(self, t):
        """Evaluate at scalar or array times within the span."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tq = np.atleast_1d(t).copy()
        lo, hi = self.span
        slack = 1e-9 * max(1.0, hi - lo)
        if np.any(tq < lo - slack) or np.any(tq > hi + slack):
            bad = tq[(tq < lo - slack) | (tq > hi + slack)][0]
            raise ValueError(f"query time {bad} outside trajectory span [{lo}, {hi}]")
        np.clip(tq, lo, hi, out=tq)

        if len(self.ts) == 1:
            out = np.broadcast_to(self.ys[0], tq.shape + (self.dim,)).copy()
            return out[0] if scalar else out

        idx = np.clip(np.searchsorted(self.ts, tq, side="right") - 1, 0, len(self.hsign) - 1)
        th = (tq - self.anchor_t[idx]) / self.hsign[idx]
        p = th[:, None] ** np.arange(1, _N_COEF + 1)
        out = self.anchor_state[idx] + self.hsign[idx, None] * np.einsum(
            "mnk,mk->mn", self.Q[idx], p
        )
        # exact node queries reproduce stored endpoint states
        node = np.searchsorted(self.ts, tq)
        node = np.clip(node, 0, len(self.ts) - 1)
        exact = self.ts[node] == tq
        out[exact] = self.ys[node[exact]]
        return out[0] if scalar else out

    def __call__(self, t):
        return self.at(t)


@dataclass(frozen=True)
class MatrixTrajectory:
    """Dense 2x2 matrix solution (fundamental matrix) sharing the base flow's steps."""

    flat: Trajectory  # 4-component row-major flattening
    base: Trajectory  # the state trajectory it was propagated along

    @property
    def span(self):
        return self.flat.span

    @property
    def t1(self):
        return self.flat.t1

    def at(self, t):
        out = self.flat.at(t)
        return out.reshape(out.shape[:-1] + (2, 2))

    def __call__(self, t):
        return self.at(t)

    @property
    def endpoint(self):
        return self.at(self.flat.t1)


def _single_point(start, t0, t1, tol):
    y = np.atleast_1d(np.asarray(start, dtype=float))
    n = y.shape[0]
    return Trajectory(
        ts=np.array([t0]),
        ys=y[None, :].copy(),
        anchor_t=np.empty(0),
        anchor_state=np.empty((0, n)),
        hsign=np.empty(0),
        Q=np.empty((0, n, _N_COEF)),
        t0=t0,
        t1=t1,
        tol=tol,
    )


def _wrap_field(field):
    def fun(t, y):
        v = np.asarray(field(t, y), dtype=float)
        if not np.all(np.isfinite(v)):
            raise NonFiniteFieldError(f"field returned non-finite value at t={t}", last_t=t)
        return v

    return fun


def flow(field, start, t0, t1, tol=DEFAULT_TOL, kink_times=(), max_step=np.inf, first_step=None):
    """Integrate ``dy/dt = field(t, y)`` from t0 to t1 with dense output.

    Backward runs (t1 < t0) are supported.  ``kink_times`` are mandatory
    step points (times where the field is continuous but not smooth); the
    run is split there so no step straddles a kink.

    Raises :class:`IntegrationError` on step-size underflow (stiffness or
    blow-up; carries the last reached time) and
    :class:`NonFiniteFieldError` on non-finite field values.
    """
    _check_tol(tol)
    t0 = float(t0)
    t1 = float(t1)
    y0 = np.atleast_1d(np.asarray(start, dtype=float))
    if t1 == t0:
        return _single_point(y0, t0, t1, tol)

    direction = 1.0 if t1 > t0 else -1.0
    inside = [tk for tk in kink_times if (tk - t0) * direction > 1e-14 and (t1 - tk) * direction > 1e-14]
    breaks = [t0] + sorted(set(inside), key=lambda v: v * direction) + [t1]

    fun = _wrap_field(field)
    ts = [t0]
    ys = [y0.copy()]
    anchor_t, anchor_state, hsign, Qs = [], [], [], []
    y = y0
    for a, b in zip(breaks[:-1], breaks[1:]):
        solver = RK45(fun, a, y, b, rtol=tol, atol=tol, max_step=max_step, first_step=first_step)
        while solver.status == "running":
            solver.step()
            if solver.status == "failed":
                raise IntegrationError(
                    f"step size underflow near t={solver.t:.6g} (stiffness or blow-up)",
                    last_t=solver.t,
                )
            dense = solver.dense_output()
            anchor_t.append(dense.t_old)
            anchor_state.append(dense.y_old.copy())
            hsign.append(dense.t - dense.t_old)
            Qs.append(dense.Q.copy())
            ts.append(solver.t)
            ys.append(solver.y.copy())
        y = solver.y

    ts = np.asarray(ts)
    ys = np.asarray(ys)
    anchor_t = np.asarray(anchor_t)
    anchor_state = np.asarray(anchor_state)
    hsign = np.asarray(hsign)
    Qs = np.asarray(Qs)
    if direction < 0:
        order = np.argsort(ts, kind="stable")
        ts, ys = ts[order], ys[order]
        seg_order = np.argsort(anchor_t + hsign, kind="stable")
        anchor_t, anchor_state = anchor_t[seg_order], anchor_state[seg_order]
        hsign, Qs = hsign[seg_order], Qs[seg_order]
    return Trajectory(
        ts=ts,
        ys=ys,
        anchor_t=anchor_t,
        anchor_state=anchor_state,
        hsign=hsign,
        Q=Qs,
        t0=t0,
        t1=t1,
        tol=tol,
    )


def flow_with_variational(system, start, t0, t1, tol=DEFAULT_TOL):
    """Integrate the unperturbed flow together with its 2x2 variational matrix.

    Returns ``(trajectory, matrix_trajectory)`` where the matrix solves
    ``dY/dt = psi'(x(t)) Y`` with ``Y(t0) = I`` along the base flow.
    """
    x0 = np.asarray(start, dtype=float)

    def fun(t, y):
        x = y[:2]
        Y = y[2:].reshape(2, 2)
        try:
            A = system.jac(x)
        except Exception as exc:
            raise IntegrationError(f"Jacobian evaluation failed at t={t}: {exc}", last_t=t) from exc
        return np.concatenate([system.psi(x), (A @ Y).ravel()])

    aug0 = np.concatenate([x0, np.eye(2).ravel()])
    aug = flow(fun, aug0, t0, t1, tol=tol)
    base = Trajectory(
        ts=aug.ts,
        ys=aug.ys[:, :2],
        anchor_t=aug.anchor_t,
        anchor_state=aug.anchor_state[:, :2],
        hsign=aug.hsign,
        Q=aug.Q[:, :2, :],
        t0=t0,
        t1=t1,
        tol=tol,
    )
    flat = Trajectory(
        ts=aug.ts,
        ys=aug.ys[:, 2:],
        anchor_t=aug.anchor_t,
        anchor_state=aug.anchor_state[:, 2:],
        hsign=aug.hsign,
        Q=aug.Q[:, 2:, :],
        t0=t0,
        t1=t1,
        tol=tol,
    )
    return base, MatrixTrajectory(flat=flat, base=base)


@dataclass(frozen=True)
class EventCrossing:
    time: float
    direction: int  # +1: g goes negative -> positive, -1: opposite


def _eval_g(g, points):
    try:
        v = np.asarray(g(points), dtype=float)
        if v.shape == (points.shape[0],):
            return v
    except Exception:
        pass
    return np.array([float(g(p)) for p in points])


def find_event(traj, g, window=None, subsamples=8):
    """Locate zero crossings of ``g(y(t))`` on the dense output.

    Each step is scanned at ``subsamples`` interior points, sign changes are
    refined by bisection (no derivatives; g may be non-smooth), and crossings
    are returned in increasing time with their sign-change direction.
    Returns an empty list when g never changes sign.
    """
    lo, hi = traj.span
    if window is None:
        a, b = lo, hi
    else:
        a, b = float(window[0]), float(window[1])
        slack = 1e-9 * max(1.0, hi - lo)
        if a < lo - slack or b > hi + slack or a > b:
            raise ValueError(f"window [{a}, {b}] not inside trajectory span [{lo}, {hi}]")
        a, b = max(a, lo), min(b, hi)

    nodes = traj.ts[(traj.ts > a) & (traj.ts < b)]
    edges = np.concatenate([[a], nodes, [b]])
    samples = [edges]
    for u, v in zip(edges[:-1], edges[1:]):
        if v > u:
            samples.append(np.linspace(u, v, subsamples + 2)[1:-1])
    tg = np.unique(np.concatenate(samples))
    vals = _eval_g(g, traj.at(tg))
    scale = max(np.max(np.abs(vals)), 1e-300)
    ztol = _EVENT_REFINE * scale

    crossings = []
    exact = np.abs(vals) <= 1e-14 * scale
    for i in np.flatnonzero(exact):
        before = vals[i - 1] if i > 0 else -vals[i + 1] if i + 1 < len(vals) else 0.0
        after = vals[i + 1] if i + 1 < len(vals) else -before
        direction = 1 if after > before else -1
        crossings.append((float(tg[i]), direction))

    sign_change = (vals[:-1] * vals[1:] < 0) & ~exact[:-1] & ~exact[1:]
    for i in np.flatnonzero(sign_change):
        ta, tb = tg[i], tg[i + 1]
        va, vb = vals[i], vals[i + 1]
        for _ in range(200):
            tm = 0.5 * (ta + tb)
            vm = float(_eval_g(g, traj.at(np.array([tm])))[0])
            if abs(vm) <= ztol or (tb - ta) <= 1e-15 * max(1.0, abs(tm)):
                break
            if (vm < 0) == (va < 0):
                ta, va = tm, vm
            else:
                tb, vb = tm, vm
        direction = 1 if vb > va else -1
        crossings.append((0.5 * (ta + tb), direction))

    crossings.sort()
    out = []
    min_gap = 1e-9 * max(1.0, hi - lo)
    for t, d in crossings:
        if out and abs(t - out[-1].time) < min_gap:
            continue
        out.append(EventCrossing(time=float(t), direction=int(d)))
    return out
