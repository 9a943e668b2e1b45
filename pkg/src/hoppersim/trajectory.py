"""C4-continuous polynomial trajectories through timestamped waypoints.

Each segment is a degree-9 polynomial in normalized local time.  The five
derivative orders (position through snap) at every knot parameterize the
spline: positions are the waypoints, derivatives 1-4 vanish at both ends
(rest-to-rest), and the interior knot derivatives are chosen to minimize
the integral of squared snap.  Continuity through order 4 then holds by
construction, so the planning problem reduces to one small positive
definite solve per axis.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial
from pathlib import Path

import numpy as np

_DEG = 9          # polynomial degree per segment
_NC = _DEG + 1    # coefficients per segment
_ND = 5           # derivative orders carried (pos..snap)

# falling factorials k!/(k-j)! for derivative j of the monomial s^k
_FALL = np.zeros((_ND, _NC))
for _j in range(_ND):
    for _k in range(_j, _NC):
        _FALL[_j, _k] = factorial(_k) / factorial(_k - _j)


def _hermite_inverse() -> np.ndarray:
    """Map from the 10 boundary derivatives (local time) to coefficients."""
    A = np.zeros((_NC, _NC))
    for j in range(_ND):
        A[j, j] = factorial(j)          # derivative j at s=0
        A[_ND + j, :] = _FALL[j, :]     # derivative j at s=1
    return np.linalg.inv(A)


_HERMITE_INV = _hermite_inverse()


def _snap_gram() -> np.ndarray:
    """Gram matrix of the 4th derivative of the monomial basis on [0, 1]."""
    Q = np.zeros((_NC, _NC))
    for a in range(4, _NC):
        for b in range(4, _NC):
            Q[a, b] = _FALL[4, a] * _FALL[4, b] / (a + b - 7)
    return Q


_SNAP_GRAM = _HERMITE_INV.T @ _snap_gram() @ _HERMITE_INV


@dataclass
class Waypoint:
    t: float
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != (3,) or not np.all(np.isfinite(self.p)):
            raise ValueError("waypoint position must be a finite 3-vector")


@dataclass
class TrajectorySample:
    """Reference row: timestamp plus position and its first four derivatives."""

    t: float
    derivs: np.ndarray  # shape (5, 3): pos, vel, acc, jerk, snap

    def __post_init__(self):
        self.derivs = np.asarray(self.derivs, dtype=float)
        if self.derivs.shape != (_ND, 3):
            raise ValueError("derivs must have shape (5, 3)")

    @property
    def pos(self) -> np.ndarray:
        return self.derivs[0]

    @property
    def vel(self) -> np.ndarray:
        return self.derivs[1]

    @property
    def acc(self) -> np.ndarray:
        return self.derivs[2]

    @property
    def jerk(self) -> np.ndarray:
        return self.derivs[3]

    @property
    def snap(self) -> np.ndarray:
        return self.derivs[4]

    @staticmethod
    def hold(t: float, p: np.ndarray) -> "TrajectorySample":
        d = np.zeros((_ND, 3))
        d[0] = p
        return TrajectorySample(t, d)


@dataclass
class PolySpline:
    """Piecewise degree-9 polynomial, coefficients in normalized local time."""

    knots: np.ndarray            # (n+1,) strictly increasing times
    coeffs: np.ndarray           # (n, 3, 10) per segment, per axis, ascending powers

    @property
    def t_start(self) -> float:
        return float(self.knots[0])

    @property
    def t_end(self) -> float:
        return float(self.knots[-1])

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def plan_spline(waypoints: list[Waypoint]) -> PolySpline:
    """Plan a rest-to-rest minimum-snap spline through the waypoints.

    Derivatives 1-4 are zero at the first and last knot; interior knot
    derivatives are free and solved per axis from the snap objective.
    """
    if len(waypoints) < 2:
        raise ValueError("need at least 2 waypoints")
    times = np.array([w.t for w in waypoints], dtype=float)
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("waypoint timestamps must be strictly increasing")
    pos = np.stack([w.p for w in waypoints])  # (n+1, 3)
    n = len(waypoints) - 1
    tau = np.diff(times)

    # scale local derivatives by tau^j and weight each segment cost by tau^-7
    nvar = _ND * (n + 1)
    P = np.zeros((nvar, nvar))
    for i in range(n):
        s = np.concatenate([tau[i] ** np.arange(_ND)] * 2)
        H = (np.outer(s, s) * _SNAP_GRAM) / tau[i] ** 7
        sl = slice(_ND * i, _ND * i + 2 * _ND)
        P[sl, sl] += H

    fixed_idx = [_ND * k for k in range(n + 1)]
    fixed_idx += [j for j in range(1, _ND)] + [_ND * n + j for j in range(1, _ND)]
    fixed_idx = sorted(set(fixed_idx))
    free_idx = [i for i in range(nvar) if i not in fixed_idx]

    coeffs = np.zeros((n, 3, _NC))
    for axis in range(3):
        x = np.zeros(nvar)
        for k in range(n + 1):
            x[_ND * k] = pos[k, axis]
        if free_idx:
            rhs = -P[np.ix_(free_idx, fixed_idx)] @ x[fixed_idx]
            x[free_idx] = np.linalg.solve(P[np.ix_(free_idx, free_idx)], rhs)
        for i in range(n):
            d = x[_ND * i: _ND * i + 2 * _ND].copy()
            scale = np.concatenate([tau[i] ** np.arange(_ND)] * 2)
            coeffs[i, axis] = _HERMITE_INV @ (scale * d)
    return PolySpline(knots=times, coeffs=coeffs)


def _eval_segment(c: np.ndarray, s: float, tau: float) -> np.ndarray:
    """Value and derivatives 1-4 of one segment at local time s in [0, 1]."""
    out = np.zeros((_ND, c.shape[0]))
    for j in range(_ND):
        acc = np.zeros(c.shape[0])
        for k in range(_NC - 1, j - 1, -1):
            acc = acc * s + c[:, k] * _FALL[j, k]
        out[j] = acc / tau ** j
    return out


def sample(spline: PolySpline, t: float) -> TrajectorySample:
    """Analytic evaluation; outside the domain the endpoint is held at rest."""
    if t <= spline.t_start:
        if t < spline.t_start:
            return TrajectorySample.hold(t, _eval_segment(spline.coeffs[0], 0.0, 1.0)[0])
        t = spline.t_start
    if t >= spline.t_end:
        end = _eval_segment(spline.coeffs[-1], 1.0, 1.0)[0]
        return TrajectorySample.hold(t, end)
    i = int(np.searchsorted(spline.knots, t, side="right") - 1)
    i = min(max(i, 0), len(spline.coeffs) - 1)
    tau = spline.knots[i + 1] - spline.knots[i]
    s = (t - spline.knots[i]) / tau
    return TrajectorySample(t, _eval_segment(spline.coeffs[i], s, tau))


def discretize(spline: PolySpline, rate: float) -> list[TrajectorySample]:
    """Uniform fixed-step samples covering the spline duration."""
    if rate <= 0.0:
        raise ValueError("rate must be positive")
    dt = 1.0 / rate
    count = int(round(spline.duration * rate)) + 1
    return [sample(spline, spline.t_start + k * dt) for k in range(count)]


@dataclass
class ArenaBounds:
    """Axis-aligned flight volume (NED: z is down, ceiling at negative z)."""

    lo: np.ndarray = field(default_factory=lambda: np.array([-3.9, -2.5, -2.5]))
    hi: np.ndarray = field(default_factory=lambda: np.array([3.9, 2.5, 0.05]))

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if np.any(self.lo >= self.hi):
            raise ValueError("bounds lo must be strictly below hi")

    def contains(self, p: np.ndarray, margin: float = 0.0) -> bool:
        return bool(np.all(p >= self.lo - margin) and np.all(p <= self.hi + margin))


def spline_within_bounds(spline: PolySpline, bounds: ArenaBounds, rate: float = 50.0) -> bool:
    """Sampled containment check of a planned trajectory in the flight volume."""
    return all(bounds.contains(s.pos) for s in discretize(spline, rate))


def vertical_segment(p0: np.ndarray, z_target: float, duration: float) -> PolySpline:
    """Rest-to-rest vertical climb or descent from p0 to the target depth."""
    end = np.array([p0[0], p0[1], z_target])
    return plan_spline([Waypoint(0.0, np.asarray(p0, dtype=float)), Waypoint(duration, end)])


def load_waypoints_csv(path: str | Path) -> list[Waypoint]:
    """Read waypoints from a CSV with header ``t,x,y,z`` (seconds, meters)."""
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["t", "x", "y", "z"]:
            raise ValueError(f"waypoint CSV must have header t,x,y,z, got {reader.fieldnames}")
        for row in reader:
            out.append(Waypoint(float(row["t"]), np.array([float(row["x"]), float(row["y"]), float(row["z"])])))
    return out


def save_waypoints_csv(path: str | Path, waypoints: list[Waypoint]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "x", "y", "z"])
        for wp in waypoints:
            w.writerow([wp.t, wp.p[0], wp.p[1], wp.p[2]])


SAMPLE_CSV_HEADER = (
    "t,px,py,pz,vx,vy,vz,ax,ay,az,jx,jy,jz,sx,sy,sz"
)


def save_samples_csv(path: str | Path, samples: list[TrajectorySample]) -> None:
    """Write discretized reference rows (header t plus 15 derivative columns)."""
    with open(path, "w", newline="") as f:
        f.write(SAMPLE_CSV_HEADER + "\n")
        for s in samples:
            f.write(",".join(str(x) for x in [s.t, *s.derivs.ravel()]) + "\n")


def load_samples_csv(path: str | Path) -> list[TrajectorySample]:
    out = []
    with open(path, newline="") as f:
        header = f.readline().strip()
        if header != SAMPLE_CSV_HEADER:
            raise ValueError("unexpected sample CSV header")
        for line in f:
            vals = [float(x) for x in line.strip().split(",")]
            out.append(TrajectorySample(vals[0], np.array(vals[1:]).reshape(_ND, 3)))
    return out
