"""Error mathematics for dead-reckoned paths.

Worst-case receiver error bound, area between real and extrapolated
paths, action-integral and stationarity checks for sampled paths, nearest
point distance, and closed-form update-rate predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .kinematics import Vec3

KINETIC = "kinetic"
ARC_LENGTH = "arc_length"

_trapezoid = getattr(np, "trapezoid", np.trapz)


@dataclass(frozen=True)
class ErrorBound:
    """Worst receiver-side error: threshold + delay-driven growth terms."""

    th_pos: float
    v_dev_max: float
    a_dev_max: float
    dt_max: float
    components: tuple[float, float, float]
    e_max: float


def emax_bound(th_pos: float, v_dev_max: float, a_dev_max: float, dt_max: float) -> ErrorBound:
    """Bound the receiver error by Th + V_dev*DT + A_dev*DT^2/2.

    While an update is in flight for at most dt_max seconds, the receiver
    keeps extrapolating a state whose velocity may be off by v_dev_max and
    acceleration by a_dev_max; integrating that drift on top of the
    threshold the sender tolerated gives the three terms.
    """
    for name, v in (("th_pos", th_pos), ("v_dev_max", v_dev_max), ("a_dev_max", a_dev_max), ("dt_max", dt_max)):
        if not (math.isfinite(v) and v >= 0):
            raise DomainError(f"{name} must be finite and >= 0, got {v}")
    components = (th_pos, v_dev_max * dt_max, 0.5 * a_dev_max * dt_max**2)
    return ErrorBound(th_pos, v_dev_max, a_dev_max, dt_max, components, sum(components))


@dataclass(frozen=True)
class SampledPath:
    """Uniformly sampled 3D path: times (K,), points (K, 3)."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = np.column_stack([points, np.zeros_like(points), np.zeros_like(points)])
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)
        if times.ndim != 1 or len(times) < 2:
            raise DomainError("path needs at least 2 samples")
        if points.shape != (len(times), 3):
            raise DomainError(f"points must be ({len(times)}, 3), got {points.shape}")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(points))):
            raise DomainError("path samples must be finite")
        steps = np.diff(times)
        if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise DomainError("sample times must increase with uniform spacing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return len(self.times)

    def interpolate(self, t) -> np.ndarray:
        """Linear interpolation; (3,) for scalar t, (K, 3) for arrays."""
        ts = np.asarray(t, dtype=float)
        cols = [np.interp(ts, self.times, self.points[:, i]) for i in range(3)]
        return np.stack(cols, axis=-1)

    @classmethod
    def from_callable(cls, fn, t0: float, t1: float, count: int) -> "SampledPath":
        """Sample fn(t) -> float | Vec3 | 3-sequence on a uniform grid."""
        if count < 2:
            raise DomainError("need at least 2 samples")
        times = np.linspace(t0, t1, count)
        rows = []
        for t in times:
            v = fn(float(t))
            if isinstance(v, Vec3):
                rows.append(v.as_tuple())
            elif np.isscalar(v):
                rows.append((float(v), 0.0, 0.0))
            else:
                rows.append(tuple(v))
        return cls(times, np.array(rows))


@dataclass(frozen=True)
class SurfaceErrorEstimate:
    """Area between two paths with its refinement record."""

    riemann_sum: float
    subdivisions: tuple[int, int]
    refinement: list[tuple[int, int, float]]


def surface_error(actual: SampledPath, estimated: SampledPath, n: int) -> SurfaceErrorEstimate:
    """Midpoint-rule area between two paths over n uniform time cells.

    Integrates |actual(t) - estimated(t)| dt, interpolating both paths at
    cell midpoints; the refinement record holds the value at n, 2n and 4n
    cells so convergence can be inspected.
    """
    if n < 1:
        raise DomainError(f"need n >= 1 cells, got {n}")
    if abs(actual.t0 - estimated.t0) > 1e-9 or abs(actual.t1 - estimated.t1) > 1e-9:
        raise DomainError("paths must cover the same time interval")

    def midpoint_sum(cells: int) -> float:
        width = (actual.t1 - actual.t0) / cells
        mids = actual.t0 + (np.arange(cells) + 0.5) * width
        gap = np.linalg.norm(actual.interpolate(mids) - estimated.interpolate(mids), axis=1)
        return float(gap.sum() * width)

    m = len(actual)
    refinement = [(k, m, midpoint_sum(k)) for k in (n, 2 * n, 4 * n)]
    return SurfaceErrorEstimate(refinement[0][2], (n, m), refinement)


def _derivative(path: SampledPath) -> np.ndarray:
    return np.gradient(path.points, path.times, axis=0, edge_order=2)


def _integrand_values(choice, u: np.ndarray, up: np.ndarray, t: np.ndarray) -> np.ndarray:
    if isinstance(choice, str):
        if choice == KINETIC:
            return 0.5 * np.sum(up * up, axis=1)
        if choice == ARC_LENGTH:
            return np.linalg.norm(up, axis=1)
        raise DomainError(f"unknown integrand {choice!r}")
    if callable(choice):
        return np.asarray(choice(u, up, t), dtype=float)
    vals = np.asarray(choice, dtype=float)
    if vals.shape != t.shape:
        raise DomainError("tabulated integrand must give one value per sample")
    return vals


def action_integral(path: SampledPath, integrand=KINETIC) -> float:
    """J = integral of f(u, u', t) dt by the trapezoid rule.

    `integrand` is "kinetic" (0.5*|u'|^2), "arc_length" (|u'|), a
    per-sample value table, or a vectorized callable f(u, up, t).
    """
    if len(path) < 3:
        raise DomainError("action integral needs at least 3 samples")
    up = _derivative(path)
    values = _integrand_values(integrand, path.points, up, path.times)
    return float(_trapezoid(values, path.times))


def stationarity_residual(path: SampledPath, integrand=KINETIC) -> float:
    """How far the path is from satisfying the Euler-Lagrange equation.

    Max over interior samples of |df/du - d/dt(df/du')|, with both partial
    derivatives taken by central finite differences of the integrand.
    Near zero exactly when the path makes the action stationary.
    """
    if len(path) < 5:
        raise DomainError("stationarity check needs at least 5 samples")
    if not (isinstance(integrand, str) or callable(integrand)):
        raise DomainError("tabulated integrands cannot be differentiated pointwise")
    u = path.points
    up = _derivative(path)
    t = path.times

    def partials(base: np.ndarray, other_args) -> np.ndarray:
        out = np.empty_like(base)
        for c in range(3):
            h = 1e-6 * np.maximum(1.0, np.abs(base[:, c]))
            bump = np.zeros_like(base)
            bump[:, c] = h
            f_plus = _integrand_values(integrand, *other_args(base + bump))
            f_minus = _integrand_values(integrand, *other_args(base - bump))
            out[:, c] = (f_plus - f_minus) / (2.0 * h)
        return out

    df_du = partials(u, lambda uu: (uu, up, t))
    df_dup = partials(up, lambda uu: (u, uu, t))
    momentum_rate = np.gradient(df_dup, t, axis=0, edge_order=2)
    residual = np.linalg.norm(df_du - momentum_rate, axis=1)
    return float(residual[1:-1].max())


@dataclass(frozen=True)
class ActionEvaluation:
    """Action of a path perturbed by lam * n(t) with n vanishing at the ends."""

    j: float
    lam: float
    path: SampledPath
    perturbation: SampledPath


def perturbed_action(
    path: SampledPath, perturbation: SampledPath, lam: float, integrand=KINETIC
) -> ActionEvaluation:
    """Evaluate J(lam) for the varied path u + lam*n."""
    if len(perturbation) != len(path) or not np.array_equal(perturbation.times, path.times):
        raise DomainError("perturbation must share the path's sample grid")
    if np.any(perturbation.points[0] != 0.0) or np.any(perturbation.points[-1] != 0.0):
        raise DomainError("perturbation must vanish exactly at both endpoints")
    varied = SampledPath(path.times, path.points + lam * perturbation.points)
    return ActionEvaluation(action_integral(varied, integrand), lam, path, perturbation)


def fuzzy_distance(x: Vec3, path: SampledPath) -> float:
    """Distance from x to the nearest path sample (discrete infimum)."""
    return float(np.linalg.norm(path.points - np.array(x.as_tuple()), axis=1).min())


def update_frequency(kind: str, e_p: float, *, jerk_max: float | None = None,
                     radius: float | None = None, angular_rate: float | None = None) -> float:
    """Predicted threshold-update rate of a second-order extrapolator.

    The leading extrapolation error term grows like jerk * dt^3 / 6, so
    the error reaches e_p after dt = cbrt(6 e_p / jerk), giving rate
    f = cbrt(jerk / (6 e_p)). On a circle the jerk magnitude is r*w^3.
    """
    if not e_p > 0:
        raise DomainError(f"e_p must be positive, got {e_p}")
    if kind == "general":
        if jerk_max is None or jerk_max < 0:
            raise DomainError("general motion needs jerk_max >= 0")
        return float(np.cbrt(jerk_max / (6.0 * e_p)))
    if kind == "circular":
        if radius is None or angular_rate is None or radius <= 0 or angular_rate <= 0:
            raise DomainError("circular motion needs radius > 0 and angular_rate > 0")
        return update_frequency("general", e_p, jerk_max=radius * angular_rate**3)
    raise DomainError(f"kind must be 'general' or 'circular', got {kind!r}")
