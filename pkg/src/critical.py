# -*- coding: utf-8 -*-
"""Critical structure of a dissipative Hénon-like map.

Invariant direction fields and local manifolds, the critical orbit (where
the strong-stable and center directions become tangent), polynomial charts
bringing the map to (x^2 - λ y, x) near the critical point, tunnels, and
the distortion and recurrence diagnostics built on them.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import wraps
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats
from scipy.cluster.hierarchy import fcluster, linkage

from src.cocycle import OrbitCocycle
from src.dynamics import Box, HenonLikeMap, Polyline, as_points, iterate_orbit
from src.errors import (ChartRangeError, DomainError, EscapeError, FieldError, FitError, NoTangencyError,
                        SampleError, ShrinkHint, SingularError)
from src.pesin import lyapunov_exponents

logger = logging.getLogger(__name__)

STRONG_STABLE = "strong_stable"
CENTER = "center"
TANGENCY_ANGLE = 0.1
TANGENCY_R2 = 0.99
NORMAL_FORM_TOLERANCE = 1e-3
CONSTRAINT_WEIGHT = 10.0
TIKHONOV = 1e-10


def _perp(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _canonical(v: np.ndarray) -> np.ndarray:
    """Representative of a projective direction with y >= 0 (x > 0 on the horizontal)."""
    v = _unit(v)
    if v[1] < 0 or (v[1] == 0 and v[0] < 0):
        v = -v
    return v + 0.0


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    """Unsigned angle between two lines."""
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), abs(u[0] * v[0] + u[1] * v[1]))


# -- direction fields -----------------------------------------------------------------

def _forward_products(map_: HenonLikeMap, pts: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Images after n steps and the normalized Jacobian products DF^n (batch)."""
    cur = as_points(pts)
    prod = np.broadcast_to(np.eye(2), (len(cur), 2, 2)).copy()
    for k in range(1, n + 1):
        try:
            cur, jac, _ = map_.apply(cur)
        except DomainError as exc:
            raise EscapeError(f"forward orbit left the domain at step {k}", index=k) from exc
        prod = np.matmul(jac, prod)
        scale = np.max(np.abs(prod), axis=(1, 2))
        prod /= np.where(scale > 0, scale, 1.0)[:, None, None]
    return cur, prod


def _most_contracted(prods: np.ndarray) -> np.ndarray:
    """Right singular direction of the smallest singular value, per matrix."""
    _, _, vh = np.linalg.svd(prods)
    top = vh[:, 0, :]
    return np.column_stack((-top[:, 1], top[:, 0]))


def strong_stable_batch(map_: HenonLikeMap, pts, N: int) -> np.ndarray:
    _, prods = _forward_products(map_, pts, N)
    return np.array([_canonical(v) for v in _most_contracted(prods)])


def strong_stable_direction(map_: HenonLikeMap, p, N: int = 20) -> np.ndarray:
    """Most contracted singular direction of DF^N at p.

    Raises:
        EscapeError: the forward orbit of length N leaves the domain
    """
    return strong_stable_batch(map_, as_points(p), N)[0]


def center_direction(map_: HenonLikeMap, p, M: int = 20, history: Optional[np.ndarray] = None) -> np.ndarray:
    """Direction at p whose backward iterates expand least.

    With `history` (points oldest first, ending at p) the past is read from the
    record and an arbitrary direction is pushed forward along it; otherwise the
    explicit inverse supplies DF^{-M}.

    Raises:
        EscapeError: the backward orbit leaves the domain
        SingularError: the map has no inverse and no history was given
    """
    p = as_points(p)[0]
    if history is not None:
        past = as_points(history)
        if len(past) < M + 1:
            raise EscapeError(f"history holds {len(past) - 1} steps, need {M}", index=-M)
        _, jacs, _ = map_.apply(past[-M - 1:-1])
        e = np.array([math.cos(0.3), math.sin(0.3)])
        for jac in jacs:
            w = jac @ e
            nrm = math.hypot(w[0], w[1])
            if nrm > 0:
                e = w / nrm
        return _canonical(e)
    cur = p[None, :]
    prod = np.eye(2)
    for k in range(1, M + 1):
        cur, jac, _ = map_.apply_inverse(cur)
        if not map_.domain.contains(cur)[0]:
            raise EscapeError(f"backward orbit left the domain at step {k}", index=-k)
        prod = jac[0] @ prod
        prod /= np.max(np.abs(prod))
    return _canonical(_most_contracted(prod[None])[0])


def _field(map_: HenonLikeMap, kind: str, horizon: int) -> Callable[[np.ndarray], np.ndarray]:
    if kind == STRONG_STABLE:
        return lambda q: strong_stable_direction(map_, q, horizon)
    if kind == CENTER:
        def center(q):
            try:
                return center_direction(map_, q, horizon)
            except SingularError as exc:
                raise FieldError(f"center field needs an invertible map ({exc.message})") from exc
        return center
    raise ValueError(f"unknown manifold kind '{kind}'")


def _cauchy_check(map_: HenonLikeMap, kind: str, q: np.ndarray, horizon: int, tol: float) -> float:
    gap = _angle(_field(map_, kind, horizon)(q), _field(map_, kind, 2 * horizon)(q))
    if gap > tol:
        raise FieldError(f"{kind} direction not converged at {q.tolist()} (angle {gap:.2e})",
                         angle=gap, horizon=horizon)
    return gap


def _trace(direction: Callable[[np.ndarray], np.ndarray], p: np.ndarray, sign: float, h: float,
           steps: int, stop: Optional[Callable[[np.ndarray], bool]] = None) -> List[np.ndarray]:
    """RK4 integral curve of a line field, keeping the orientation continuous."""
    def oriented(q, ref):
        d = direction(q)
        return d if d @ ref >= 0 else -d

    ref = sign * direction(p)
    out = []
    q = p.copy()
    for _ in range(steps):
        k1 = oriented(q, ref)
        k2 = oriented(q + 0.5 * h * k1, k1)
        k3 = oriented(q + 0.5 * h * k2, k1)
        k4 = oriented(q + h * k3, k1)
        q = q + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        ref = k1
        out.append(q.copy())
        if stop is not None and stop(q):
            break
    return out


def local_manifold(map_: HenonLikeMap, p, kind: str, arclen: float, steps: int = 128, horizon: int = 20,
                   history: Optional[np.ndarray] = None, cauchy_tol: float = 1e-6) -> Polyline:
    """Local strong-stable or center manifold through p as an arclength polyline.

    The strong-stable manifold is an integral curve of the finite-horizon
    direction field. The center manifold is the forward image of a short
    segment at the start of `history` when one is given, else an integral curve
    of the backward field.

    Raises:
        FieldError: a direction field fails its Cauchy check along the curve
    """
    p = as_points(p)[0]
    if kind == CENTER and history is not None:
        return _center_from_history(map_, p, arclen, steps, horizon, as_points(history))
    direction = _field(map_, kind, horizon)
    h = arclen / (2 * steps)
    _cauchy_check(map_, kind, p, horizon, cauchy_tol)
    forward = _trace(direction, p, 1.0, h, steps)
    backward = _trace(direction, p, -1.0, h, steps)
    for q in (forward[-1], backward[-1]):
        _cauchy_check(map_, kind, q, horizon, cauchy_tol)
    return Polyline(backward[::-1] + [p] + forward)


def _center_from_history(map_: HenonLikeMap, p: np.ndarray, arclen: float, steps: int, horizon: int,
                         history: np.ndarray) -> Polyline:
    if len(history) < 2 * horizon + 1:
        raise FieldError(f"history of {len(history)} points is too short for horizon {horizon}")
    base = history[-horizon - 1]
    e = center_direction(map_, base, horizon, history=history[:-horizon])
    stretch = np.linalg.norm(_raw_push(map_, base, e, horizon))
    half = 0.5 * arclen / stretch
    ts = np.linspace(-half, half, 2 * steps + 1)
    curve, _ = _push_segment(map_, base, e, ts, horizon)
    return Polyline(curve)


def _raw_push(map_: HenonLikeMap, base: np.ndarray, e: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(e, dtype=float)
    cur = base[None, :]
    for _ in range(n):
        cur, jac, _ = map_.apply(cur)
        v = jac[0] @ v
    return v


def _push_segment(map_: HenonLikeMap, base: np.ndarray, e: np.ndarray, ts: np.ndarray,
                  n: int) -> Tuple[np.ndarray, np.ndarray]:
    """F^n(base + t e) and the pushed tangents DF^n e for every t."""
    cur = base[None, :] + np.outer(ts, e)
    tang = np.tile(e, (len(ts), 1))
    for k in range(1, n + 1):
        try:
            cur, jac, _ = map_.apply(cur)
        except DomainError as exc:
            raise EscapeError(f"segment left the domain at step {k}", index=k) from exc
        tang = np.einsum("kij,kj->ki", jac, tang)
    return cur, tang


# -- critical orbit --------------------------------------------------------------------

@dataclass
class CriticalOrbit:
    """Two-sided orbit through the critical point c0 (orbit index `orbit.offset`)."""

    c0: np.ndarray
    c1: np.ndarray
    orbit: OrbitCocycle
    lambda_est: float
    tangent0: np.ndarray
    tangent1: np.ndarray
    splitting_angle: float
    seed_point: np.ndarray
    seed_direction: np.ndarray
    lead: int
    seed_offset: float = 0.0
    tangency_exponent: float = math.nan
    tangency_r2: float = math.nan
    meta: Dict[str, Any] = field(default_factory=dict)

    def point(self, m: int) -> np.ndarray:
        return self.orbit.points[self.orbit.offset + m]

    @property
    def index_range(self) -> Tuple[int, int]:
        return -self.orbit.offset, len(self.orbit.points) - 1 - self.orbit.offset

    def center_curve(self, radius: float, steps: int = 100, at: int = 0) -> Polyline:
        """W^c through c_at (at = 0 or 1), about `radius` to each side."""
        n = self.lead - 1 + at
        half = radius / np.linalg.norm(self.push_tangent(n))
        ts = self.seed_offset + np.linspace(-half, half, 2 * steps + 1)
        pts, _ = _push_segment(self.meta["map"], self.seed_point, self.seed_direction, ts, n)
        return Polyline(pts)

    def push_tangent(self, n: int) -> np.ndarray:
        """DF^n e at the orbit's seed, e the seed direction."""
        start = self.seed_point + self.seed_offset * self.seed_direction
        return _raw_push(self.meta["map"], start, self.seed_direction, n)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "c0": self.c0.tolist(), "c1": self.c1.tolist(), "lambda_est": self.lambda_est,
            "tangent0": self.tangent0.tolist(), "tangent1": self.tangent1.tolist(),
            "splitting_angle": self.splitting_angle, "tangency_exponent": self.tangency_exponent,
            "tangency_r2": self.tangency_r2, "index_range": list(self.index_range),
        }


def _tip_candidates(sample: OrbitCocycle, lead: int, tail: int, fraction: float) -> np.ndarray:
    idx = np.arange(lead, len(sample.points) - tail)
    if len(idx) == 0:
        raise SampleError("orbit record too short for the critical search", length=len(sample.points))
    xs = sample.points[idx, 0]
    cut = np.quantile(xs, fraction)
    return idx[xs <= cut]


def _tangency_function(map_: HenonLikeMap, base: np.ndarray, e: np.ndarray, lead: int, horizon: int,
                       ref: np.ndarray):
    def phi(ts: np.ndarray) -> np.ndarray:
        pts, tang = _push_segment(map_, base, e, ts, lead)
        ess = strong_stable_batch(map_, pts, horizon)
        ess = np.where((ess @ ref)[:, None] < 0, -ess, ess)
        tn = tang / np.linalg.norm(tang, axis=1)[:, None]
        return tn[:, 0] * ess[:, 1] - tn[:, 1] * ess[:, 0]
    return phi


def find_critical_orbit(map_: HenonLikeMap, sample: OrbitCocycle, horizon: int = 20, lead: int = 40,
                        forward: int = 4096, tip_fraction: float = 0.01,
                        radii: Sequence[float] = (1e-3, 4e-3, 1.6e-2, 6.4e-2)) -> CriticalOrbit:
    """Locate c1 as the tangency of W^c with the strong-stable field near the leftmost tip.

    The sample point minimizing the splitting angle among the leftmost tip
    points seeds the search; the tangency is then solved along the center
    curve F^lead(segment), and the two-sided orbit runs from c_{1-lead} to
    c_{forward}.

    Raises:
        NoTangencyError: the splitting stays transverse (angle above 0.1 rad), or the offset
            between W^c and W^ss near c1 does not fit a power law with R² above 0.99
    """
    margin = max(lead, 64)
    candidates = _tip_candidates(sample, margin, 64, tip_fraction)
    angles = sample.splitting_angles()
    best = int(candidates[np.argmin(angles[candidates])])
    min_angle = float(angles[best])
    logger.info(f"📊 [CRITICAL] best tip candidate #{best} at {sample.points[best].tolist()}, "
                f"angle {min_angle:.3e}")
    if min_angle > TANGENCY_ANGLE:
        raise NoTangencyError(f"splitting stays transverse (min angle {min_angle:.3f} rad)", min_angle=min_angle)

    j = best - lead
    base = sample.points[j].copy()
    e = sample.center_direction(j)
    log_stretch = sample.center_log_stretch(j, lead)
    ref = sample.strong_stable_direction(best)
    phi = _tangency_function(map_, base, e, lead, horizon, ref)
    t_star = None
    for radius in radii:
        half = radius * math.exp(-min(log_stretch, 700.0))
        ts = np.linspace(-half, half, 101)
        values = phi(ts)
        changes = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)[0]
        if len(changes):
            k = int(changes[np.argmin(np.abs(ts[changes]))])
            if values[k] == 0:
                t_star = float(ts[k])
            else:
                t_star = optimize.brentq(lambda t: float(phi(np.array([t]))[0]), ts[k], ts[k + 1],
                                         xtol=1e-16 * max(half, 1e-300), rtol=1e-15)
            break
        logger.warning(f"⚠️ [CRITICAL] no tangency within radius {radius:g}, widening")
    if t_star is None:
        raise NoTangencyError("center curve never becomes tangent to the strong-stable field",
                              min_angle=min_angle)

    start = base + t_star * e
    record = iterate_orbit(map_, start, lead + forward).with_offset(lead - 1)
    c0 = record.points[lead - 1].copy()
    c1 = record.points[lead].copy()
    _, tang = _push_segment(map_, base, e, np.array([t_star]), lead)
    tangent1 = _unit(tang[0])
    tangent0 = _unit(_raw_push(map_, start, e, lead - 1))
    try:
        chi2 = lyapunov_exponents(sample)[1]
    except SampleError:
        chi2 = float(np.mean(sample.logdets))
    co = CriticalOrbit(c0=c0, c1=c1, orbit=record, lambda_est=math.exp(chi2) if chi2 > -math.inf else 0.0,
                       tangent0=tangent0, tangent1=tangent1, splitting_angle=min_angle,
                       seed_point=base, seed_direction=e, lead=lead, seed_offset=t_star,
                       meta={"map": map_, "horizon": horizon})
    try:
        exponent, r2 = tangency_exponent(map_, co, radius=radii[0], horizon=horizon)
    except (FieldError, EscapeError, ValueError) as exc:
        raise NoTangencyError(f"quadratic tangency could not be fitted: {exc}", min_angle=min_angle) from exc
    if not (math.isfinite(exponent) and r2 > TANGENCY_R2):
        raise NoTangencyError(f"tangency fit is not quadratic (exponent {exponent:.3f}, R² {r2:.4f})",
                              exponent=exponent, r2=r2)
    co.tangency_exponent, co.tangency_r2 = exponent, r2
    logger.info(f"✅ [CRITICAL] c0 = {c0.tolist()}, c1 = {c1.tolist()}, "
                f"tangency exponent {co.tangency_exponent:.3f}")
    return co


def tangency_exponent(map_: HenonLikeMap, co: CriticalOrbit, radius: float = 1e-3, horizon: int = 20,
                      halvings: int = 6) -> Tuple[float, float]:
    """Slope and R² of log(offset of W^c from W^ss) against log(distance from c1)."""
    wss = local_manifold(map_, co.c1, STRONG_STABLE, arclen=8 * radius, steps=256, horizon=horizon,
                         cauchy_tol=1e-4)
    half = radius / np.linalg.norm(co.push_tangent(co.lead))
    ts = co.seed_offset + np.concatenate([s * half * 2.0 ** -np.arange(halvings + 1) for s in (-1.0, 1.0)])
    pts, _ = _push_segment(map_, co.seed_point, co.seed_direction, ts, co.lead)
    dist = np.linalg.norm(pts - co.c1, axis=1)
    offset = wss.distance(pts)
    keep = (dist > 0) & (offset > 0)
    if np.count_nonzero(keep) < 4:
        raise ValueError("too few usable offsets for the tangency fit")
    fit = stats.linregress(np.log(dist[keep]), np.log(offset[keep]))
    return float(fit.slope), float(fit.rvalue ** 2)


# -- charts ----------------------------------------------------------------------------

def _monomials(degree: int) -> List[Tuple[int, int]]:
    return [(i, d - i) for d in range(1, degree + 1) for i in range(d, -1, -1)]


def _design(u: np.ndarray, v: np.ndarray, monos: Sequence[Tuple[int, int]]) -> np.ndarray:
    return np.column_stack([u ** i * v ** j for i, j in monos])


def _design_grad(u: np.ndarray, v: np.ndarray, monos) -> Tuple[np.ndarray, np.ndarray]:
    du = np.column_stack([i * u ** max(i - 1, 0) * v ** j if i else np.zeros_like(u) for i, j in monos])
    dv = np.column_stack([j * u ** i * v ** max(j - 1, 0) if j else np.zeros_like(u) for i, j in monos])
    return du, dv


@dataclass(frozen=True, eq=False)
class Chart:
    """Polynomial chart p -> (X, Y) with zero constant term at `center`.

    Monomials are taken in the local coordinates u = <p - center, e1>/s1,
    v = <p - center, e2>/s2 with (e1, e2) the rows of `frame`.
    """

    center: Tuple[float, float]
    frame: Tuple[Tuple[float, float], Tuple[float, float]]
    scales: Tuple[float, float]
    coeffs_x: Tuple[float, ...]
    coeffs_y: Tuple[float, ...]
    degree: int
    valid_radius: float

    @classmethod
    def identity(cls, center=(0.0, 0.0), valid_radius: float = math.inf) -> "Chart":
        return cls(tuple(center), ((1.0, 0.0), (0.0, 1.0)), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0), 1, valid_radius)

    @property
    def monomials(self) -> List[Tuple[int, int]]:
        return _monomials(self.degree)

    def _local(self, pts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        d = pts - np.asarray(self.center)
        frame = np.asarray(self.frame)
        return d @ frame[0] / self.scales[0], d @ frame[1] / self.scales[1]

    def _check_range(self, pts: np.ndarray) -> None:
        r = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        if np.any(r > self.valid_radius):
            raise ChartRangeError(f"point at distance {float(np.max(r)):.3e} beyond chart radius "
                                  f"{self.valid_radius:.3e}", radius=self.valid_radius)

    def __call__(self, pts, check: bool = True) -> np.ndarray:
        pts = as_points(pts)
        if check:
            self._check_range(pts)
        u, v = self._local(pts)
        D = _design(u, v, self.monomials)
        return np.column_stack((D @ np.asarray(self.coeffs_x), D @ np.asarray(self.coeffs_y)))

    def jacobian(self, pts) -> np.ndarray:
        pts = as_points(pts)
        u, v = self._local(pts)
        du, dv = _design_grad(u, v, self.monomials)
        cx, cy = np.asarray(self.coeffs_x), np.asarray(self.coeffs_y)
        # d/dp = d/du * e1/s1 + d/dv * e2/s2
        frame = np.asarray(self.frame)
        g_u = np.stack((du @ cx, du @ cy), axis=1)[:, :, None] * (frame[0] / self.scales[0])[None, None, :]
        g_v = np.stack((dv @ cx, dv @ cy), axis=1)[:, :, None] * (frame[1] / self.scales[1])[None, None, :]
        return g_u + g_v

    def inverse(self, XY, tol: float = 1e-13, max_iter: int = 60) -> np.ndarray:
        """Newton inverse started from the linear part.

        Raises:
            ChartRangeError: the preimage leaves the valid radius or Newton stalls
        """
        XY = as_points(XY)
        J0 = self.jacobian(np.asarray(self.center)[None, :])[0]
        p = np.asarray(self.center) + np.linalg.solve(J0, XY.T).T
        for _ in range(max_iter):
            err = self(p, check=False) - XY
            if np.max(np.abs(err)) <= tol * (1.0 + np.max(np.abs(XY))):
                self._check_range(p)
                return p
            p = p - np.linalg.solve(self.jacobian(p), err[:, :, None])[:, :, 0]
        raise ChartRangeError("chart inverse did not converge", radius=self.valid_radius)

    def to_dict(self) -> Dict[str, Any]:
        return {"center": list(self.center), "frame": [list(r) for r in self.frame], "scales": list(self.scales),
                "degree": self.degree, "monomials": [list(m) for m in self.monomials],
                "coeffs_x": list(self.coeffs_x), "coeffs_y": list(self.coeffs_y), "valid_radius": self.valid_radius}


class NormalForm(NamedTuple):
    chart0: Chart
    chart1: Chart
    lam: float
    residual: float


def _polyline_points_near(line: Polyline, center: np.ndarray, radius: float) -> np.ndarray:
    pts = line.vertices
    return pts[np.linalg.norm(pts - center, axis=1) <= radius]


def _snap_to_fold(map_: HenonLikeMap, c0: np.ndarray, rho: float) -> np.ndarray:
    def slope(x: float) -> float:
        return float(map_.jacobian(np.array([x, c0[1]]))[0, 0])

    lo, hi = c0[0] - rho, c0[0] + rho
    if slope(lo) * slope(hi) >= 0:
        return np.array(c0, dtype=float)
    x = optimize.brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    if abs(x - c0[0]) > 1e-6:
        logger.warning(f"⚠️ [NORMAL-FORM] fold sits {abs(x - c0[0]):.2e} away from c0")

    def height(s: float) -> float:
        return float(map_.eval(np.array([s, c0[1]]))[0]) - x

    # stay on the invariant graph x = f(y)
    lo, hi = c0[1] - rho, c0[1] + rho
    if height(lo) * height(hi) >= 0:
        return np.array([x, c0[1]])
    y = optimize.brentq(height, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return np.array([x, y])


def _fit_degenerate(map_: HenonLikeMap, co: CriticalOrbit, degree: int, rho: float, grid: int) -> NormalForm:
    """b = 0: charts (x - c0x, x - f(y)) and (φ1(q_x), q_y - c1y) with φ1(f(x)) = x^2.

    c0 is snapped to the zero of ∂f/∂x in the box; an offset d from the fold
    leaves an odd defect of size 2d/ρ.
    """
    c0 = _snap_to_fold(map_, co.c0, rho)
    c1 = map_.eval(c0)
    xs = c0[0] + rho * np.linspace(-1.0, 1.0, 4 * grid)
    ys = np.full_like(xs, c0[1])
    images = map_.eval_many(np.column_stack((xs, ys)))
    w = (images[:, 0] - c1[0]) / rho ** 2
    V = np.column_stack([w ** k for k in range(1, degree + 1)])
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > 1e12:
        raise FitError(f"1D normal-form fit ill-conditioned (cond = {cond:.3e})", cond=float(cond))
    target = ((xs - c0[0]) / rho) ** 2
    coef, *_ = np.linalg.lstsq(V, target, rcond=None)
    residual = float(np.max(np.abs(V @ coef - target)))
    y0 = c0[1]
    monos0 = _monomials(2)
    cx0 = [1.0 if m == (1, 0) else 0.0 for m in monos0]
    cy0 = [{(1, 0): 1.0, (0, 1): -2.0 * y0, (0, 2): -1.0}.get(m, 0.0) for m in monos0]
    chart0 = Chart(tuple(c0), ((1.0, 0.0), (0.0, 1.0)), (1.0, 1.0), tuple(cx0), tuple(cy0), 2, rho)
    monos1 = _monomials(degree)
    cx1 = [rho ** 2 * coef[i - 1] / rho ** (2 * i) if j == 0 else 0.0 for i, j in monos1]
    cy1 = [1.0 if (i, j) == (0, 1) else 0.0 for i, j in monos1]
    chart1 = Chart(tuple(c1), ((1.0, 0.0), (0.0, 1.0)), (1.0, 1.0), tuple(cx1), tuple(cy1), degree,
                   float(np.max(np.abs(images - c1))) * 2.0)
    return NormalForm(chart0, chart1, 0.0, residual)


def fit_normal_form(map_: HenonLikeMap, co: CriticalOrbit, degree: int = 4, rho: float = 0.05,
                    grid: int = 15, horizon: int = 20) -> NormalForm:
    """Least-squares charts with Φ1 ∘ F ∘ Φ0⁻¹ ≈ (x^2 - λ y, x) on a box of radius ρ at c0.

    Φ0 has derivative 1 along W^c(c0) for X and 1 across it for Y, sends
    W^c(c0) to the horizontal axis, and Φ1 sends W^ss(c1) to the vertical
    axis. `residual` is the worst grid defect in units of ρ^2 (first
    component) and ρ (second component).

    Raises:
        FitError: the image design matrix is ill-conditioned beyond 1e12
    """
    if map_.base_log_det is not None and map_.base_log_det == -math.inf:
        return _fit_degenerate(map_, co, degree, rho, grid)
    c0, c1 = co.c0, co.c1
    tau0 = co.tangent0
    n0 = _perp(tau0)
    g = np.linspace(-1.0, 1.0, grid)
    U, Vv = np.meshgrid(g, g, indexing="ij")
    u, v = U.ravel(), Vv.ravel()
    pts = c0 + rho * (np.outer(u, tau0) + np.outer(v, n0))
    images = map_.eval_many(pts)
    et = co.tangent1
    en = _perp(et)
    dq = images - c1
    w1, w2 = dq @ en, dq @ et
    s_n, s_t = float(np.max(np.abs(w1))), float(np.max(np.abs(w2)))
    monos = _monomials(degree)
    W = _design(w1 / s_n, w2 / s_t, monos)
    cond = np.linalg.cond(W)
    if not np.isfinite(cond) or cond > 1e12:
        raise FitError(f"normal-form design ill-conditioned (cond = {cond:.3e})", cond=float(cond))

    wc = _polyline_points_near(co.center_curve(rho), c0, rho)
    uc, vc = (wc - c0) @ tau0 / rho, (wc - c0) @ n0 / rho
    wss_line = local_manifold(map_, c1, STRONG_STABLE, arclen=2 * s_t, steps=64, horizon=horizon,
                              cauchy_tol=1e-4)
    ws = wss_line.vertices - c1
    Wss = _design((ws @ en) / s_n, (ws @ et) / s_t, monos)

    idx_p = [k for k, m in enumerate(monos) if m != (1, 0)]
    idx_q = [k for k, m in enumerate(monos) if m not in ((1, 0), (0, 1))]
    D = _design(u, v, monos)
    Dp, Dq = D[:, idx_p], D[:, idx_q]
    Dq_c = _design(uc, vc, monos)[:, idx_q]
    m, npar, nq = len(monos), len(idx_p), len(idx_q)
    sl_p = slice(0, npar)
    sl_q = slice(npar, npar + nq)
    sl_a = slice(npar + nq, npar + nq + m)
    sl_b = slice(npar + nq + m, npar + nq + 2 * m)
    n_x = npar + nq + 2 * m + 1

    def residuals(x):
        P = u + Dp @ x[sl_p]
        Q = v + Dq @ x[sl_q]
        ell = x[-1]
        return np.concatenate((
            W @ x[sl_a] - P * P + ell * Q,
            W @ x[sl_b] - P,
            CONSTRAINT_WEIGHT * (vc + Dq_c @ x[sl_q]),
            CONSTRAINT_WEIGHT * (Wss @ x[sl_a]),
            TIKHONOV * x,
        ))

    def jacobian(x):
        P = u + Dp @ x[sl_p]
        Q = v + Dq @ x[sl_q]
        ell = x[-1]
        rows = len(u)
        J = np.zeros((2 * rows + len(uc) + len(Wss) + n_x, n_x))
        J[:rows, sl_p] = -2.0 * P[:, None] * Dp
        J[:rows, sl_q] = ell * Dq
        J[:rows, sl_a] = W
        J[:rows, -1] = Q
        J[rows:2 * rows, sl_p] = -Dp
        J[rows:2 * rows, sl_b] = W
        r = 2 * rows
        J[r:r + len(uc), sl_q] = CONSTRAINT_WEIGHT * Dq_c
        r += len(uc)
        J[r:r + len(Wss), sl_a] = CONSTRAINT_WEIGHT * Wss
        r += len(Wss)
        J[r:, :] = TIKHONOV * np.eye(n_x)
        return J

    # linear start: Φ0 = identity frame, solve for Φ1 and λ
    A = np.vstack((np.column_stack((W, v)), np.column_stack((CONSTRAINT_WEIGHT * Wss, np.zeros(len(Wss))))))
    rhs = np.concatenate((u * u, np.zeros(len(Wss))))
    sol_a, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    sol_b, *_ = np.linalg.lstsq(W, u, rcond=None)
    x0 = np.zeros(n_x)
    x0[sl_a], x0[-1], x0[sl_b] = sol_a[:-1], sol_a[-1], sol_b
    fit = optimize.least_squares(residuals, x0, jac=jacobian, method="lm", xtol=1e-15, ftol=1e-15,
                                 gtol=1e-15, max_nfev=200 * n_x)
    x = fit.x
    rows = len(u)
    res = residuals(x)
    residual = float(max(np.max(np.abs(res[:rows])), np.max(np.abs(res[rows:2 * rows]))))

    cx0 = np.zeros(m)
    cy0 = np.zeros(m)
    cx0[monos.index((1, 0))] = 1.0
    cx0[idx_p] = x[sl_p]
    cy0[monos.index((0, 1))] = 1.0
    cy0[idx_q] = x[sl_q]
    chart0 = Chart(tuple(c0), (tuple(tau0), tuple(n0)), (rho, rho), tuple(rho * cx0), tuple(rho * cy0),
                   degree, rho)
    chart1 = Chart(tuple(c1), (tuple(en), tuple(et)), (s_n, s_t), tuple(rho ** 2 * x[sl_a]),
                   tuple(rho * x[sl_b]), degree, math.hypot(s_n, s_t))
    lam = rho * float(x[-1])
    logger.info(f"📊 [NORMALFORM] ρ={rho:g} degree={degree}: λ = {lam:.6e}, residual = {residual:.3e}")
    return NormalForm(chart0, chart1, lam, residual)


def retry_with_radius_halving(max_retries: int = 3, factor: float = 0.5):
    """
    Decorator retrying a chart fit at a smaller radius on ShrinkHint.

    Args:
        max_retries: Maximum number of radius reductions
        factor: Radius multiplier used when the hint carries no suggestion

    Returns:
        Decorated function; the wrapped call must take `rho` as a keyword

    Raises:
        FitError: the residual stays too large after the last retry
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            last_hint = None

            for attempt in range(max_retries + 1):
                try:
                    return func(*args, **kwargs)
                except ShrinkHint as hint:
                    last_hint = hint
                    if attempt == max_retries:
                        break
                    rho = hint.suggested_radius or factor * kwargs.get("rho", 0.05)
                    logger.warning(f"⚠️ Residual {hint.residual:.3e} too large, retrying at ρ = {rho:g} "
                                   f"(attempt {attempt + 1}/{max_retries})")
                    kwargs["rho"] = rho

            logger.error(f"❌ Normal form still above tolerance after {max_retries} radius halvings")
            raise FitError(last_hint.message, residual=last_hint.residual,
                           radius=kwargs.get("rho")) from last_hint
        return wrapper
    return decorator


@retry_with_radius_halving(max_retries=3)
def uniformize_critical(map_: HenonLikeMap, co: CriticalOrbit, degree: int = 4, *, rho: float = 0.05,
                        tolerance: float = NORMAL_FORM_TOLERANCE) -> NormalForm:
    """Charts at c0 and c1 realizing (x^2 - λ y, x), halving ρ while the residual is too large.

    Raises:
        FitError: ill-conditioned fit, or residual above `tolerance` after the retries
    """
    nf = fit_normal_form(map_, co, degree, rho)
    if nf.residual > tolerance:
        raise ShrinkHint(f"normal-form residual {nf.residual:.3e} above {tolerance:g}",
                         suggested_radius=rho / 2, residual=nf.residual)
    return nf


# -- tunnels and pinching ---------------------------------------------------------------

@dataclass(frozen=True)
class TunnelSpec:
    """{|x| < t, |y| < |x|^omega} in chart coordinates."""

    omega: float
    t: float
    chart: Chart
    truncation: float = math.inf
    side: str = "critical"

    def __post_init__(self):
        if self.omega <= 1:
            raise ValueError("pinch exponent must exceed 1")
        if self.side not in ("critical", "valuable"):
            raise ValueError(f"unknown tunnel side '{self.side}'")


def _inside(xy: np.ndarray, omega: float, t: float) -> np.ndarray:
    ax = np.abs(xy[:, 0])
    return (ax < t) & (np.abs(xy[:, 1]) < ax ** omega)


def tunnel_membership(spec: TunnelSpec, p) -> bool:
    """Whether p lies in the tunnel.

    Raises:
        ChartRangeError: p outside the chart's valid radius
    """
    return bool(_inside(spec.chart(as_points(p)), spec.omega, spec.t)[0])


def tunnel_membership_many(spec: TunnelSpec, pts) -> np.ndarray:
    return _inside(spec.chart(as_points(pts)), spec.omega, spec.t)


@dataclass
class PinchingReport:
    fraction: float
    omega_hat: float
    envelope_slope: float
    n_points: int
    omega: float
    t: float
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"fraction": self.fraction, "omega_hat": self.omega_hat, "envelope_slope": self.envelope_slope,
                "n_points": self.n_points, "omega": self.omega, "t": self.t}


def pinching_check(map_: HenonLikeMap, co: CriticalOrbit, charts: NormalForm, sample, omega: float = 1.5,
                   t: Optional[float] = None, min_points: int = 200) -> PinchingReport:
    """Fraction of limit-set points near c0 inside the ω-pinched tunnel, and the fitted exponent.

    ω̂ is the 1st percentile of log|Y| / log|X| over the disk (inf when every Y
    vanishes); the envelope slope regresses the largest log|Y| per log|X| bin.

    Raises:
        SampleError: fewer than `min_points` sample points in the disk
    """
    chart = charts.chart0
    t = 0.5 * chart.valid_radius if t is None else t
    pts = as_points(sample)
    near = pts[np.linalg.norm(pts - co.c0, axis=1) < t]
    if len(near) < min_points:
        raise SampleError(f"only {len(near)} sample points within {t:g} of c0 (need {min_points})",
                          n_points=int(len(near)))
    xy = chart(near)
    inside = _inside(xy, omega, t)
    ax, ay = np.abs(xy[:, 0]), np.abs(xy[:, 1])
    usable = (ax > 0) & (ax < 1) & (ay > 0)
    if not np.any(usable):
        omega_hat = math.inf
        slope = math.inf
    else:
        ratio = np.log(ay[usable]) / np.log(ax[usable])
        omega_hat = float(np.percentile(ratio, 1))
        slope = _envelope_slope(np.log(ax[usable]), np.log(ay[usable]))
    report = PinchingReport(float(np.mean(inside)), omega_hat, slope, int(len(near)), omega, t,
                            [{"x_chart": float(a), "y_chart": float(b), "inside": bool(f)}
                             for (a, b), f in zip(xy, inside)])
    logger.info(f"📊 [PINCH] {report.n_points} points, fraction inside {report.fraction:.4f}, "
                f"ω̂ = {report.omega_hat:.3f}")
    return report


def _envelope_slope(lx: np.ndarray, ly: np.ndarray, bins: int = 12) -> float:
    edges = np.linspace(lx.min(), lx.max(), bins + 1)
    which = np.clip(np.digitize(lx, edges) - 1, 0, bins - 1)
    xs, ys = [], []
    for b in range(bins):
        sel = which == b
        if np.any(sel):
            k = np.argmax(np.where(sel, ly, -np.inf))
            xs.append(lx[k])
            ys.append(ly[k])
    if len(xs) < 3:
        return math.nan
    return float(stats.linregress(xs, ys).slope)


# -- recurrence -------------------------------------------------------------------------

@dataclass
class ReturnReport:
    kappa: float
    returns: int
    periodic: bool
    dyadic_distances: List[float]
    dyadic_monotone: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"kappa": self.kappa, "returns": self.returns, "periodic": self.periodic,
                "dyadic_distances": self.dyadic_distances, "dyadic_monotone": self.dyadic_monotone}


def closest_return_check(co: CriticalOrbit, M: int, disk: float = 0.1, lam: Optional[float] = None,
                         exact_tol: float = 1e-13) -> ReturnReport:
    """Best κ with |m| >= κ log_λ dist(c_m, c0) over returns into the disk, |m| <= M.

    Exact returns (periodic orbits) are flagged and excluded; with no other
    returns κ is infinite. λ defaults to the orbit's estimate, or e^{-1} when
    that is degenerate.
    """
    lam = co.lambda_est if lam is None else lam
    log_lam = math.log(lam) if 0 < lam < 1 else -1.0
    lo, hi = co.index_range
    ms = np.array([m for m in range(max(lo, -M), min(hi, M) + 1) if m != 0])
    pts = co.orbit.points[co.orbit.offset + ms]
    d = np.linalg.norm(pts - co.c0, axis=1)
    periodic = bool(np.any(d <= exact_tol))
    sel = (d < disk) & (d > exact_tol)
    kappa = math.inf
    if np.any(sel):
        kappa = float(np.min(np.abs(ms[sel]) * log_lam / np.log(d[sel])))
    dyadic = []
    n = 0
    while 2 ** n <= min(M, hi):
        dyadic.append(float(np.linalg.norm(co.point(2 ** n) - co.c0)))
        n += 1
    monotone = all(b <= a for a, b in zip(dyadic, dyadic[1:]))
    report = ReturnReport(kappa, int(np.count_nonzero(sel)), periodic, dyadic, monotone)
    logger.info(f"📊 [RETURNS] κ̂ = {kappa:.4f} over {report.returns} returns (periodic: {periodic})")
    return report


# -- distortion ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistortionReport:
    log_distortion: float
    total_length: float
    lengths: Tuple[float, ...]

    @property
    def distortion(self) -> float:
        return math.exp(self.log_distortion)


def distortion(map_: HenonLikeMap, gamma: Polyline, n: int) -> DistortionReport:
    """Distortion of F^n along gamma from per-segment stretching, with Σ_{i=1..n} |F^i γ|.

    Raises:
        EscapeError: an iterate of gamma leaves the domain
    """
    verts = gamma.vertices
    base = np.diff(verts, axis=0)
    base_len = np.linalg.norm(base, axis=1)
    lengths = []
    cur = verts
    for k in range(1, n + 1):
        try:
            cur = map_.eval_many(cur)
        except DomainError as exc:
            raise EscapeError(f"curve left the domain at step {k}", index=k) from exc
        lengths.append(float(np.sum(np.linalg.norm(np.diff(cur, axis=0), axis=1))))
    stretch = np.log(np.linalg.norm(np.diff(cur, axis=0), axis=1)) - np.log(base_len)
    return DistortionReport(float(np.max(stretch) - np.min(stretch)), math.fsum(lengths), tuple(lengths))


# -- components ------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterFit:
    size: int
    diameter: float
    deviation: float


def component_triviality_check(sample, scale: float, degree: int = 3, max_points: int = 4096) -> List[ClusterFit]:
    """Single-linkage clusters at `scale`; clusters wider than `scale` get a curve fit.

    The fit is a polynomial of the normal coordinate over the principal axis;
    its deviation is the worst normal residual.
    """
    pts = as_points(sample)
    if len(pts) > max_points:
        pts = pts[np.linspace(0, len(pts) - 1, max_points).astype(int)]
    if len(pts) < 2:
        return []
    labels = fcluster(linkage(pts, method="single"), t=scale, criterion="distance")
    out = []
    for label in np.unique(labels):
        cluster = pts[labels == label]
        if len(cluster) < degree + 2:
            continue
        centered = cluster - cluster.mean(axis=0)
        _, _, vh = np.linalg.svd(centered, full_matrices=False)
        s = centered @ vh[0]
        w = centered @ vh[1]
        diameter = float(math.hypot(np.ptp(s), np.ptp(w)))
        if diameter <= scale:
            continue
        coef = np.polynomial.polynomial.polyfit(s, w, degree)
        deviation = float(np.max(np.abs(w - np.polynomial.polynomial.polyval(s, coef))))
        out.append(ClusterFit(len(cluster), diameter, deviation))
    logger.debug(f"[COMPONENTS] {len(out)} clusters above scale {scale:g}")
    return out


def stable_manifold_properness(map_: HenonLikeMap, p, box: Box, horizon: int = 20,
                               max_steps: int = 4000) -> Dict[str, Any]:
    """Trace W^ss through p both ways until it leaves `box`; proper iff both exits are top/bottom."""
    p = as_points(p)[0]
    h = min(box.half_widths) / 200.0
    direction = _field(map_, STRONG_STABLE, horizon)
    outside = lambda q: not box.contains(q)[0]
    exits = []
    for sign in (1.0, -1.0):
        path = _trace(direction, p, sign, h, max_steps, stop=outside)
        q = path[-1]
        if not outside(q):
            exits.append("none")
            continue
        rel = (q - np.asarray(box.center)) / np.asarray(box.half_widths)
        exits.append("top" if rel[1] >= 1 else "bottom" if rel[1] <= -1 else "side")
    proper = all(e in ("top", "bottom") for e in exits) and exits[0] != exits[1]
    return {"proper": proper, "exits": exits}
