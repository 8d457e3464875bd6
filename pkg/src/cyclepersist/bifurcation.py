"""Bifurcation integrals over the cycle, their zeros, and hypothesis checks.

Two integrals drive the analysis: the phase-parametrized pairing of the
periodic adjoint eigenfunction with the forcing (zeros of which are the
candidate phases of persisting solutions), and the analogous sliding-window
pairing with the non-periodic adjoint eigenfunction (whose non-vanishing at
a zero phase controls the linear-in-amplitude separation of the perturbed
solution from the cycle).

Quadrature is adaptive Simpson with batched integrand evaluation, mandatory
subdivision at declared forcing kinks, and initial panel widths keyed to the
exponential weight of the non-periodic eigenfunction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HypothesisFailure, NumericsError

DEFAULT_QUAD_TOL = 1e-9
REFINE_QUAD_TOL = 1e-12
ZERO_RESIDUAL = 1e-10  # |f0(theta0)| <= ZERO_RESIDUAL * scale after refinement
SIMPLE_SLOPE_FACTOR = 1e-6  # |slope| > factor * max|f0| / T
PR1_NORMALIZED_MIN = 1e-6
_MAX_DEPTH = 30

_GL5_NODES = np.polynomial.legendre.leggauss(5)


def _adaptive_simpson(fvec, a, b, abs_tol, breakpoints=(), min_panels=8):
    """Adaptive Simpson of a vectorized integrand on [a, b].

    ``breakpoints`` are mandatory panel edges (integrand kinks).  Panels are
    refined until the Richardson error estimate, allocated proportionally to
    panel width, meets ``abs_tol``; depth beyond 30 halvings raises.
    """
    if b == a:
        return 0.0
    edges = {float(a), float(b)}
    for p in breakpoints:
        p = float(p)
        if a < p < b:
            edges.add(p)
    edges = sorted(edges)
    refined = []
    for u, v in zip(edges[:-1], edges[1:]):
        n = max(1, int(np.ceil(min_panels * (v - u) / (b - a))))
        refined.extend(np.linspace(u, v, n + 1))
    edges = np.unique(np.asarray(refined))

    lefts = edges[:-1]
    rights = edges[1:]
    mids = 0.5 * (lefts + rights)
    pts = np.concatenate([edges, mids])
    vals = fvec(pts)
    fl = vals[: len(lefts)]
    fr = vals[1 : len(edges)]
    fm = vals[len(edges) :]
    S = (rights - lefts) / 6.0 * (fl + 4.0 * fm + fr)

    total = 0.0
    depth = 0
    span = b - a
    while len(lefts):
        if depth > _MAX_DEPTH:
            raise NumericsError(f"quadrature did not converge after depth {_MAX_DEPTH}")
        mids = 0.5 * (lefts + rights)
        lm = 0.5 * (lefts + mids)
        rm = 0.5 * (mids + rights)
        new_vals = fvec(np.concatenate([lm, rm]))
        flm = new_vals[: len(lefts)]
        frm = new_vals[len(lefts) :]
        h = rights - lefts
        Sl = h / 12.0 * (fl + 4.0 * flm + fm)
        Sr = h / 12.0 * (fm + 4.0 * frm + fr)
        S2 = Sl + Sr
        err = np.abs(S2 - S) / 15.0
        ok = err <= abs_tol * (h / span)
        total += float(np.sum(S2[ok] + (S2[ok] - S[ok]) / 15.0))
        bad = ~ok
        lefts = np.concatenate([lefts[bad], mids[bad]])
        rights = np.concatenate([mids[bad], rights[bad]])
        new_fl = np.concatenate([fl[bad], fm[bad]])
        new_fm = np.concatenate([flm[bad], frm[bad]])
        new_fr = np.concatenate([fm[bad], fr[bad]])
        S = np.concatenate([Sl[bad], Sr[bad]])
        fl, fm, fr = new_fl, new_fm, new_fr
        depth += 1
    return total


def _kink_breaks(system, theta, lo, hi):
    """Integrand kink positions: tau with tau - theta at a declared kink (mod T)."""
    T = system.period
    kt = system.kink_times()
    if not kt or T is None:
        return ()
    out = []
    for tk in kt:
        base = theta + tk
        n0 = int(np.floor((lo - base) / T))
        tau = base + n0 * T
        while tau <= hi:
            if tau >= lo:
                out.append(tau)
            tau += T
    return tuple(out)


def _f0_integrand(frame, system, theta):
    cycle = frame.cycle

    def w(tau):
        x = cycle.at(tau)
        return np.sum(frame.z0(tau) * system.phi(tau - theta, x, 0.0), axis=-1)

    return w


def _f1_integrand(frame, system, theta):
    cycle = frame.cycle

    def w(tau):
        x = cycle.at(np.mod(tau, frame.T))
        return np.sum(frame.z1(tau, extend=True) * system.phi(tau - theta, x, 0.0), axis=-1)

    return w


def _integrand_scale(w, lo, hi, width):
    probe = np.abs(w(np.linspace(lo, hi, 33)))
    return max(1.0, float(probe.max()) * width), float(probe.max())


def eval_f0(frame, system, theta, quad_tol=DEFAULT_QUAD_TOL):
    """Phase-theta bifurcation integral over one period (adaptive quadrature)."""
    T = frame.T
    w = _f0_integrand(frame, system, float(theta))
    scale, _ = _integrand_scale(w, 0.0, T, T)
    breaks = _kink_breaks(system, float(theta), 0.0, T)
    return _adaptive_simpson(w, 0.0, T, quad_tol * scale, breakpoints=breaks)


def eval_f1(frame, system, theta, s, quad_tol=DEFAULT_QUAD_TOL):
    """Sliding-window adjoint integral over [s - T, s].

    The non-periodic eigenfunction is extended outside [0, T] by its
    multiplier relation; initial panels are capped so the exponential
    weight varies by at most a factor of 2 per panel.
    """
    T = frame.T
    s = float(s)
    w = _f1_integrand(frame, system, float(theta))
    scale, _ = _integrand_scale(w, s - T, s, T)
    breaks = list(_kink_breaks(system, float(theta), s - T, s))
    for cut in (0.0, T):
        if s - T < cut < s:
            breaks.append(cut)
    lam = abs(np.log(abs(frame.rho_star))) / T
    min_panels = max(8, int(np.ceil(T * lam / np.log(2.0))))
    return _adaptive_simpson(
        w, s - T, s, quad_tol * scale, breakpoints=breaks, min_panels=min_panels
    )


def f1_profile(frame, system, theta, s_grid, quad_tol=DEFAULT_QUAD_TOL):
    """f1(theta, s) on an array of s in [0, T] via one cumulative quadrature.

    Writes the window integral as F(s) + (F(T) - F(s)) / rho_star with
    F(s) the cumulative integral of the fixed integrand over [0, s]; each
    gap between requested nodes (and kink positions) is integrated with
    5-point Gauss-Legendre.
    """
    T = frame.T
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid < -1e-12) or np.any(s_grid > T + 1e-12):
        raise ValueError("s_grid must lie in [0, T]")
    w = _f1_integrand(frame, system, float(theta))

    lam = abs(np.log(abs(frame.rho_star))) / T
    n_min = max(256, 8 * len(s_grid), int(np.ceil(4 * T * lam / np.log(2.0))))
    base = np.linspace(0.0, T, n_min + 1)
    edges = np.unique(
        np.concatenate(
            [base, np.clip(s_grid, 0.0, T), np.asarray(_kink_breaks(system, float(theta), 0.0, T))]
        )
    )
    lo = edges[:-1]
    hi = edges[1:]
    xg, wg = _GL5_NODES
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    vals = w(pts).reshape(len(lo), len(xg))
    gaps = half * (vals @ wg)
    cumF = np.concatenate([[0.0], np.cumsum(gaps)])
    FT = cumF[-1]
    # requested nodes are panel edges, so interpolation is exact there
    Fs = np.interp(np.clip(s_grid, 0.0, T), edges, cumF)
    return Fs + (FT - Fs) / frame.rho_star


@dataclass(frozen=True)
class F0Zero:
    theta: float
    slope: float
    simple: bool


@dataclass(frozen=True)
class ZeroSet:
    zeros: tuple  # sign-changing zeros, F0Zero
    degenerate: tuple  # even-touch zero locations
    f0_scale: float  # max |f0| on the grid
    theta_grid: np.ndarray
    f0_values: np.ndarray


def find_f0_zeros(frame, system, M=256, quad_tol=DEFAULT_QUAD_TOL):
    """Grid-scan f0 on [0, T), refine its sign changes, classify slopes.

    Raises :class:`HypothesisFailure` when f0 is identically zero at
    quadrature resolution (higher-order degeneracy, out of scope).
    """
    if M < 64:
        raise ValueError("grid M must be at least 64")
    T = frame.T
    thetas = np.linspace(0.0, T, M, endpoint=False)
    vals = np.array([eval_f0(frame, system, th, quad_tol) for th in thetas])
    f0_scale = float(np.max(np.abs(vals)))

    wprobe = _f0_integrand(frame, system, 0.0)
    _, wmax = _integrand_scale(wprobe, 0.0, T, T)
    iscale = max(wmax * T, 1e-300)
    if f0_scale < 1e-12 * iscale:
        raise HypothesisFailure(
            "bifurcation function identically zero (higher-order case, out of scope)"
        )

    def f0(th):
        return eval_f0(frame, system, th, REFINE_QUAD_TOL)

    zeros = []
    ext = np.append(vals, vals[0])
    ext_th = np.append(thetas, T)
    for i in range(M):
        va, vb = ext[i], ext[i + 1]
        if va == 0.0:
            va = f0(ext_th[i])
        if va * vb < 0:
            ta, tb = ext_th[i], ext_th[i + 1]
            fa = va
            for _ in range(80):
                tm = 0.5 * (ta + tb)
                fm_ = f0(tm)
                if abs(fm_) <= ZERO_RESIDUAL * f0_scale and (tb - ta) < 1e-6 * T:
                    ta = tb = tm
                    break
                if (fm_ < 0) == (fa < 0):
                    ta, fa = tm, fm_
                else:
                    tb = tm
                if (tb - ta) <= 1e-14 * T:
                    break
            theta0 = 0.5 * (ta + tb)
            h = T / (8.0 * M)
            slope = (f0(theta0 + h) - f0(theta0 - h)) / (2.0 * h)
            simple = abs(slope) > SIMPLE_SLOPE_FACTOR * f0_scale / T
            zeros.append(F0Zero(theta=float(np.mod(theta0, T)), slope=float(slope), simple=simple))

    degenerate = []
    absvals = np.abs(ext[:-1])
    for i in range(M):
        im, ip = (i - 1) % M, (i + 1) % M
        if absvals[i] <= absvals[im] and absvals[i] <= absvals[ip] and absvals[i] < 1e-5 * f0_scale:
            if ext[im] * ext[ip] > 0:  # no sign change: candidate touch zero
                a_, b_ = thetas[i] - T / M, thetas[i] + T / M
                ga, gb = a_, b_
                for _ in range(60):
                    m1 = ga + 0.381966 * (gb - ga)
                    m2 = gb - 0.381966 * (gb - ga)
                    if abs(f0(m1)) < abs(f0(m2)):
                        gb = m2
                    else:
                        ga = m1
                tmin = 0.5 * (ga + gb)
                if abs(f0(tmin)) <= 1e-8 * f0_scale:
                    degenerate.append(float(np.mod(tmin, T)))

    zeros.sort(key=lambda z: z.theta)
    return ZeroSet(
        zeros=tuple(zeros),
        degenerate=tuple(sorted(degenerate)),
        f0_scale=f0_scale,
        theta_grid=thetas,
        f0_values=vals,
    )


@dataclass(frozen=True)
class Pr1Result:
    theta0: float
    margin: float  # min over [0, T] of |f1(theta0, .)|
    argmin_s: float
    max_abs: float
    normalized_margin: float
    holds: bool


def check_pr1(frame, system, theta0, n_grid=512):
    """Minimum of |f1(theta0, .)| over one period, grid + golden-section.

    The condition holds iff the margin normalized by max |f1(theta0, .)|
    exceeds :data:`PR1_NORMALIZED_MIN`.
    """
    T = frame.T
    s_grid = np.linspace(0.0, T, n_grid + 1)
    prof = np.abs(f1_profile(frame, system, theta0, s_grid))
    max_abs = float(prof.max())
    i = int(np.argmin(prof))
    a = s_grid[max(0, i - 1)]
    b = s_grid[min(n_grid, i + 1)]

    def g(s):
        return abs(eval_f1(frame, system, theta0, s, REFINE_QUAD_TOL))

    ga, gb = a, b
    for _ in range(60):
        m1 = ga + 0.381966 * (gb - ga)
        m2 = gb - 0.381966 * (gb - ga)
        if g(m1) < g(m2):
            gb = m2
        else:
            ga = m1
        if gb - ga < 1e-10 * T:
            break
    s_star = 0.5 * (ga + gb)
    margin = min(g(s_star), float(prof[i]))
    normalized = margin / max_abs if max_abs > 0 else 0.0
    return Pr1Result(
        theta0=float(theta0),
        margin=float(margin),
        argmin_s=float(s_star),
        max_abs=max_abs,
        normalized_margin=float(normalized),
        holds=bool(normalized > PR1_NORMALIZED_MIN),
    )


@dataclass(frozen=True)
class SymmetryFlags:
    antiperiodic: bool
    f0_sym: bool
    f1_sym: bool
    prop1_applicable: bool


def check_symmetries(frame, system, zeroset, n_t=64, n_theta=32):
    """Half-period antisymmetry of the forcing and of both integrals.

    ``prop1_applicable`` additionally requires exactly one simple
    sign-changing zero in [0, T/2) with nonvanishing f1 at window end.
    """
    T = frame.T
    half = 0.5 * T

    tg = np.linspace(0.0, T, n_t, endpoint=False)
    xs = frame.cycle.polyline[:: max(1, len(frame.cycle.polyline) // 16)]
    phi_a = np.stack([system.phi(tg, x[None, :], 0.0) for x in xs])
    phi_b = np.stack([system.phi(tg + half, x[None, :], 0.0) for x in xs])
    phi_scale = max(1.0, float(np.abs(phi_a).max()))
    antiperiodic = bool(np.abs(phi_b + phi_a).max() <= 1e-8 * phi_scale)

    M = len(zeroset.f0_values)
    if M % 2 == 0:
        rolled = np.roll(zeroset.f0_values, -M // 2)
        f0_sym = bool(
            np.abs(zeroset.f0_values + rolled).max() <= 1e-8 * max(zeroset.f0_scale, 1e-300)
        )
    else:
        probe = np.linspace(0.0, half, 16, endpoint=False)
        dev = max(
            abs(eval_f0(frame, system, th) + eval_f0(frame, system, th + half)) for th in probe
        )
        f0_sym = bool(dev <= 1e-8 * max(zeroset.f0_scale, 1e-300))

    th_probe = np.linspace(0.0, half, n_theta, endpoint=False)
    vals_a = np.array([eval_f1(frame, system, th, T) for th in th_probe])
    vals_b = np.array([eval_f1(frame, system, th + half, T) for th in th_probe])
    f1_scale = max(1.0e-300, float(np.abs(vals_a).max()), float(np.abs(vals_b).max()))
    f1_sym = bool(np.abs(vals_a + vals_b).max() <= 1e-8 * f1_scale)

    in_half = [z for z in zeroset.zeros if 0.0 <= z.theta < half]
    prop1 = len(in_half) == 1 and in_half[0].simple and not zeroset.degenerate
    if prop1:
        f1_end = eval_f1(frame, system, in_half[0].theta, T)
        prop1 = abs(f1_end) > 1e-8 * f1_scale
    return SymmetryFlags(
        antiperiodic=antiperiodic,
        f0_sym=f0_sym,
        f1_sym=f1_sym,
        prop1_applicable=bool(prop1),
    )


@dataclass(frozen=True)
class BifurcationProfile:
    """Gridded f0, its classified zeros, the f1 evaluator, and hypothesis flags."""

    frame: object
    system: object
    theta_grid: np.ndarray
    f0_values: np.ndarray
    zeros: tuple
    degenerate: tuple
    f0_scale: float
    pr1: tuple  # Pr1Result per zero
    flags: SymmetryFlags

    @property
    def T(self):
        return self.frame.T

    def f0(self, theta, quad_tol=DEFAULT_QUAD_TOL):
        return eval_f0(self.frame, self.system, theta, quad_tol)

    def f1(self, theta, s, quad_tol=DEFAULT_QUAD_TOL):
        return eval_f1(self.frame, self.system, theta, s, quad_tol)

    def f1_on_grid(self, theta, s_grid):
        return f1_profile(self.frame, self.system, theta, s_grid)

    def pr1_holds_everywhere(self):
        return all(r.holds for r in self.pr1)


def build_profile(frame, system, M=256, quad_tol=DEFAULT_QUAD_TOL):
    """Run the full bifurcation stage: grid, zeros, margins, symmetry flags."""
    if system.period is None and system.forcing_clock == "scaled":
        system = system.bind_period(frame.T)
    zs = find_f0_zeros(frame, system, M=M, quad_tol=quad_tol)
    pr1 = tuple(check_pr1(frame, system, z.theta) for z in zs.zeros)
    flags = check_symmetries(frame, system, zs)
    return BifurcationProfile(
        frame=frame,
        system=system,
        theta_grid=zs.theta_grid,
        f0_values=zs.f0_values,
        zeros=zs.zeros,
        degenerate=zs.degenerate,
        f0_scale=zs.f0_scale,
        pr1=pr1,
        flags=flags,
    )
