"""Problem instances: unperturbed planar field, its Jacobian, and the forcing term.

A :class:`PlanarSystem` bundles elementwise component functions so that every
field evaluation works on scalars and on numpy arrays alike.  The forcing
term ``phi`` may use either a *scaled* clock (its time argument is rescaled
by ``2*pi/T`` once the cycle period ``T`` is known, so that it is exactly
``T``-periodic by construction) or an *absolute* clock (used as written; the
user guarantees ``T``-periodicity).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .expressions import parse_expression

FD_JACOBIAN_STEP = 1e-6  # central-difference step scale: h = 1e-6 * (1 + |x|)


def _zero(t=0.0, x1=0.0, x2=0.0, eps=0.0):
    return np.zeros(np.broadcast(t, x1, x2, eps).shape)


@dataclass(frozen=True)
class PlanarSystem:
    """Planar autonomous field plus small periodic perturbation.

    Component functions are elementwise in (t, x1, x2, eps).  ``jac_entries``
    is either a 4-tuple of |elementwise closures (rows first) or None, in
    which case a central finite difference of ``psi`` is used.
    """

    psi1: callable
    psi2: callable
    phi1: callable = _zero
    phi2: callable = _zero
    jac_entries: tuple | None = None
    forcing_clock: str = "scaled"
    declared_kinks: tuple = ()
    period: float | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.forcing_clock not in ("scaled", "absolute"):
            raise ConfigError(f"forcing clock must be 'scaled' or 'absolute', got {self.forcing_clock!r}")
        for frac in self.declared_kinks:
            if not 0.0 <= frac < 1.0:
                raise ConfigError(f"kink phase fractions must lie in [0,1), got {frac}")

    # -- autonomous field ------------------------------------------------

    def psi(self, x):
        """Field value; x has shape (..., 2), result matches."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x1, x2 = x[0], x[1]
            return np.array([self.psi1(x1=x1, x2=x2), self.psi2(x1=x1, x2=x2)], dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack(np.broadcast_arrays(self.psi1(x1=x1, x2=x2), self.psi2(x1=x1, x2=x2)), axis=-1)

    def jac(self, x):
        """Jacobian of psi; x has shape (..., 2), result shape (..., 2, 2)."""
        x = np.asarray(x, dtype=float)
        if self.jac_entries is not None:
            if x.ndim == 1:
                x1, x2 = x[0], x[1]
                e = self.jac_entries
                return np.array(
                    [
                        [e[0](x1=x1, x2=x2), e[1](x1=x1, x2=x2)],
                        [e[2](x1=x1, x2=x2), e[3](x1=x1, x2=x2)],
                    ],
                    dtype=float,
                )
            x1, x2 = x[..., 0], x[..., 1]
            rows = [e(x1=x1, x2=x2) for e in self.jac_entries]
            rows = np.broadcast_arrays(*rows, x1)[:4]
            return np.stack(
                [np.stack(rows[0:2], axis=-1), np.stack(rows[2:4], axis=-1)], axis=-2
            )
        h = FD_JACOBIAN_STEP * (1.0 + np.linalg.norm(x, axis=-1))
        h = np.asarray(h)[..., None]
        e1 = np.zeros_like(x)
        e1[..., 0] = h[..., 0]
        e2 = np.zeros_like(x)
        e2[..., 1] = h[..., 0]
        col1 = (self.psi(x + e1) - self.psi(x - e1)) / (2 * h)
        col2 = (self.psi(x + e2) - self.psi(x - e2)) / (2 * h)
        return np.stack([col1, col2], axis=-1)

    # -- forcing ---------------------------------------------------------

    def phi(self, t, x, eps):
        """Perturbation value at time t; x has shape (..., 2)."""
        x = np.asarray(x, dtype=float)
        tau = np.asarray(t, dtype=float)
        if self.forcing_clock == "scaled":
            if self.period is None:
                raise ConfigError("scaled forcing clock used before the cycle period was bound")
            tau = 2.0 * np.pi * tau / self.period
        if x.ndim == 1 and tau.ndim == 0:
            v1 = self.phi1(t=tau, x1=x[0], x2=x[1], eps=eps)
            v2 = self.phi2(t=tau, x1=x[0], x2=x[1], eps=eps)
            return np.array([v1, v2], dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        v1 = self.phi1(t=tau, x1=x1, x2=x2, eps=eps)
        v2 = self.phi2(t=tau, x1=x1, x2=x2, eps=eps)
        v1, v2, _ = np.broadcast_arrays(v1, v2, x1 + 0.0 * tau)
        return np.stack([v1, v2], axis=-1)

    def bind_period(self, T):
        """Return a copy with the forcing period fixed to the cycle period T."""
        return replace(self, period=float(T))

    def kink_times(self):
        """Absolute times in [0, T) at which phi is non-smooth, per declaration."""
        if self.period is None:
            return ()
        return tuple(sorted(frac * self.period for frac in self.declared_kinks))

    def rhs(self, eps):
        """Right-hand side (t, y) -> dy of the forced system for the integrator."""
        if eps == 0.0:
            return lambda t, y: self.psi(y)
        return lambda t, y: self.psi(y) + eps * self.phi(t, y, eps)


# -- built-in instances ---------------------------------------------------


def _hopf_psi1(x1, x2, **_):
    return x1 - x2 - x1 * (x1 * x1 + x2 * x2)


def _hopf_psi2(x1, x2, **_):
    return x1 + x2 - x2 * (x1 * x1 + x2 * x2)


_HOPF_JAC = (
    lambda x1, x2, **_: 1.0 - 3.0 * x1 * x1 - x2 * x2,
    lambda x1, x2, **_: -1.0 - 2.0 * x1 * x2,
    lambda x1, x2, **_: 1.0 - 2.0 * x1 * x2,
    lambda x1, x2, **_: 1.0 - x1 * x1 - 3.0 * x2 * x2,
)


def _vdp_psi1(x1, x2, **_):
    return x2 + 0.0 * x1


def _vdp_psi2(x1, x2, **_):
    return (1.0 - x1 * x1) * x2 - x1


_VDP_JAC = (
    lambda x1, x2, **_: 0.0 * x1,
    lambda x1, x2, **_: 1.0 + 0.0 * x1,
    lambda x1, x2, **_: -2.0 * x1 * x2 - 1.0,
    lambda x1, x2, **_: 1.0 - x1 * x1,
)


def builtin_system(name):
    """Return a named built-in instance: 'hopf', 'hopf_rot', or 'vdp'."""
    if name == "hopf":
        return PlanarSystem(psi1=_hopf_psi1, psi2=_hopf_psi2, jac_entries=_HOPF_JAC, name="hopf")
    if name == "hopf_rot":
        return PlanarSystem(
            psi1=_hopf_psi1,
            psi2=_hopf_psi2,
            jac_entries=_HOPF_JAC,
            phi1=lambda t, **_: np.cos(t),
            phi2=lambda t, **_: np.sin(t),
            forcing_clock="scaled",
            name="hopf_rot",
        )
    if name == "vdp":
        return PlanarSystem(
            psi1=_vdp_psi1,
            psi2=_vdp_psi2,
            jac_entries=_VDP_JAC,
            phi1=lambda t, **_: 0.0 * t,
            phi2=lambda t, **_: np.cos(t),
            forcing_clock="scaled",
            name="vdp",
        )
    raise ConfigError(f"unknown builtin system {name!r}")


# -- config-defined instances ----------------------------------------------


def _component(table, key, section, required=True):
    src = table.get(key)
    if src is None:
        if required:
            raise ConfigError(f"missing key {key!r} in [{section}]")
        return None
    if not isinstance(src, str):
        raise ConfigError(f"[{section}] {key} must be an expression string")
    try:
        return parse_expression(src)
    except Exception as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def build_system(config):
    """Build a :class:`PlanarSystem` from a parsed config mapping.

    Expected sections: ``[system]`` with either ``builtin = <name>`` or
    ``psi1``/``psi2`` expressions (optional ``jac11..jac22``);
    optional ``[perturbation]`` with ``phi1``/``phi2`` expressions,
    ``clock`` and ``kinks``.
    """
    sys_tab = config.get("system")
    if not sys_tab:
        raise ConfigError("config has no [system] section")
    pert = config.get("perturbation", {})

    if "builtin" in sys_tab:
        base = builtin_system(sys_tab["builtin"])
        if not pert:
            return base
        kwargs = {}
    else:
        psi1 = _component(sys_tab, "psi1", "system")
        psi2 = _component(sys_tab, "psi2", "system")
        jac_keys = ("jac11", "jac12", "jac21", "jac22")
        if any(k in sys_tab for k in jac_keys):
            entries = tuple(_component(sys_tab, k, "system") for k in jac_keys)
        else:
            entries = None
        base = PlanarSystem(
            psi1=psi1, psi2=psi2, jac_entries=entries, name=str(sys_tab.get("name", "custom"))
        )
        kwargs = {}

    phi1 = _component(pert, "phi1", "perturbation", required=False)
    phi2 = _component(pert, "phi2", "perturbation", required=False)
    if (phi1 is None) != (phi2 is None):
        raise ConfigError("[perturbation] needs both phi1 and phi2 (or neither)")
    if phi1 is not None:
        kwargs["phi1"] = phi1
        kwargs["phi2"] = phi2
    clock = pert.get("clock", "scaled")
    kinks = tuple(float(v) for v in pert.get("kinks", ()))
    kwargs["forcing_clock"] = clock
    kwargs["declared_kinks"] = kinks
    return replace(base, **kwargs)


def load_config(path):
    """Read a TOML config file; returns the parsed mapping.

    Sections: ``[system]``, ``[perturbation]`` (see :func:`build_system`)
    and ``[analysis]`` (seed, period_guess, tol, grid, eps).
    """
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
