# -*- coding: utf-8 -*-
"""Period-doubling renormalization of Hénon-like maps.

Each level is rescale(prerenorm_step(previous)): the second iterate in
horizontally straightened coordinates, conjugated by the affine map that
puts the critical point at the origin and the critical value at -1.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize

from src import precision as prec
from src.dynamics import (AffineRescale, Box, HenonLikeMap, HorizontalStraighten, Inverse, henon)
from src.errors import (ContinuationError, DepthError, EscapeError, FitError, NoCriticalPointError,
                        NotRenormalizableError)
from src.renorm_1d import accumulation_param, aitken, critical_orbit, superstable_ladder

logger = logging.getLogger(__name__)

SCAN_POINTS = 401
PRERENORM_HALF_WIDTH = 0.7
LEVEL_HALF_WIDTH = 1.2
DEPTH_DISAGREEMENT = 0.1
MIN_HALF_PERIOD_GAP = 1e-6
ROOT_TOLERANCE = 1e-12


def _first_coordinate(G: HenonLikeMap, pts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    img, jac, _ = G.apply(pts)
    return img[:, 0], jac


def _diagonal(G: HenonLikeMap) -> np.ndarray:
    lo = max(G.domain.lo[0], G.domain.lo[1])
    hi = min(G.domain.hi[0], G.domain.hi[1])
    return np.linspace(lo, hi, SCAN_POINTS)


def _roots_on_diagonal(G: HenonLikeMap, func) -> List[float]:
    """Roots of `func` along the diagonal; grid nodes within ROOT_TOLERANCE count as roots."""
    xs = _diagonal(G)
    vals = func(xs)
    tol = ROOT_TOLERANCE * max(1.0, float(np.max(np.abs(vals))))

    def scalar(t: float) -> float:
        return float(func(np.array([t]))[0])

    roots = [float(x) for x, v in zip(xs, vals) if abs(v) <= tol]
    for i in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
        lo, hi = float(xs[i]), float(xs[i + 1])
        f_lo, f_hi = scalar(lo), scalar(hi)
        if abs(f_lo) <= tol or abs(f_hi) <= tol or f_lo * f_hi > 0:
            roots.append(lo if abs(f_lo) <= abs(f_hi) else hi)
            continue
        roots.append(optimize.brentq(scalar, lo, hi, xtol=1e-15, rtol=1e-15))
    roots.sort()
    return [r for i, r in enumerate(roots) if i == 0 or r - roots[i - 1] > 1e-12]


def critical_point(G: HenonLikeMap) -> float:
    """Root of x -> ∂_x g(x, x) nearest the domain center.

    Raises:
        NoCriticalPointError: ∂_x g has no root on the diagonal of the domain
    """
    def slope(xs):
        _, jac = _first_coordinate(G, np.column_stack((xs, xs)))
        return jac[:, 0, 0]

    roots = _roots_on_diagonal(G, slope)
    if not roots:
        raise NoCriticalPointError(f"∂_x g has no root on the diagonal of {G.name}")
    center = G.domain.center[0]
    return min(roots, key=lambda r: abs(r - center))


def fixed_point(G: HenonLikeMap) -> np.ndarray:
    """Fixed point (x*, x*) nearest the domain center; fixed points of (g, x) lie on the diagonal."""
    def excess(xs):
        g, _ = _first_coordinate(G, np.column_stack((xs, xs)))
        return g - xs

    roots = _roots_on_diagonal(G, excess)
    if not roots:
        raise NoCriticalPointError(f"no fixed point on the diagonal of {G.name}")
    center = G.domain.center[0]
    x = min(roots, key=lambda r: abs(r - center))
    return np.array([x, x])


def _critical_data(G: HenonLikeMap) -> Tuple[float, float, float]:
    c = critical_point(G)
    g_c, _ = _first_coordinate(G, np.array([[c, c]]))
    h = 1e-5 * max(G.domain.half_widths)
    _, jac = _first_coordinate(G, np.array([[c + h, c], [c - h, c]]))
    kappa = (jac[0, 0, 0] - jac[1, 0, 0]) / (4.0 * h)
    return c, float(g_c[0]), float(kappa)


def prerenorm_step(F: HenonLikeMap) -> HenonLikeMap:
    """H ∘ F² ∘ H⁻¹ with H(x, y) = (f(x, y), y), on a square around (c, c).

    Raises:
        SingularStraightenError: ∂_x f vanishes where H must be inverted
        EscapeError: F² leaves the domain
    """
    c, v, kappa = _critical_data(F)
    if v == c:
        raise NotRenormalizableError(f"critical point of {F.name} is fixed")
    if kappa == 0:
        raise NotRenormalizableError(f"critical point of {F.name} is degenerate")
    H = HorizontalStraighten(F, pivot=c, side=math.copysign(1.0, v - c), kappa=kappa)
    domain = Box((c, c), (PRERENORM_HALF_WIDTH * abs(v - c),) * 2)
    G = HenonLikeMap((Inverse(H), F, F, H), domain, name=f"pR({F.name})",
                     depth=F.depth + 1, base_log_det=F.base_log_det)
    logger.debug(f"[TOWER] prerenorm of {F.name}: c={c:.12f}, v={v:.12f}, κ={kappa:.6f}")
    return G


def rescale(G: HenonLikeMap) -> HenonLikeMap:
    """S_G ∘ G ∘ S_G⁻¹ with S_G(x, y) = s (x - c, y - c), s = -1/(g(c, c) - c).

    The signed scale puts the critical value at -1 at every level.
    """
    c, v, _ = _critical_data(G)
    if v == c:
        raise NotRenormalizableError(f"critical point of {G.name} is fixed")
    S = AffineRescale((c, c), -1.0 / (v - c))
    conj = G.conjugate(S)
    domain = Box((0.0, 0.0), (LEVEL_HALF_WIDTH * abs(S.scale * (v - c)),) * 2)
    return HenonLikeMap(conj.chain, domain, name=f"R^{G.depth}", depth=G.depth, base_log_det=G.base_log_det)


def renormalize(F: HenonLikeMap) -> Tuple[HenonLikeMap, float]:
    """One tower level and the length of its domain in the previous level's coordinates."""
    G = prerenorm_step(F)
    c, v, _ = _critical_data(G)
    return rescale(G), abs(v - c)


def shape_residual(G: HenonLikeMap, grid: int = 32) -> float:
    """max |second output coordinate - first input coordinate| on a grid."""
    pts = G.domain.grid(grid, shrink=0.98)
    img = G.eval_many(pts)
    return float(np.max(np.abs(img[:, 1] - pts[:, 0])))


def thinness(G: HenonLikeMap, grid: int = 32, precision: str = prec.STANDARD) -> float:
    """log max |∂_y g| over a grid (-inf for degenerate maps).

    For a Hénon-like map |det DG| = |∂_y g|; compensated mode reads the
    thinness from the log-space determinant, which does not underflow.
    """
    if grid < 16:
        raise ValueError("thinness needs at least 16 grid points per axis")
    pts = G.domain.grid(grid, shrink=0.98)
    _, jac, logdet = G.apply(pts)
    if prec.resolve(precision) == prec.COMPENSATED:
        return float(np.max(logdet))
    m = float(np.max(np.abs(jac[:, 0, 1])))
    return math.log(m) if m > 0 else -math.inf


def _grid_stats(G: HenonLikeMap, grid: int) -> Dict[str, float]:
    pts = G.domain.grid(grid, shrink=0.98)
    _, jac, logdet = G.apply(pts)
    j12 = float(np.max(np.abs(jac[:, 0, 1])))
    j11 = float(np.max(np.abs(jac[:, 0, 0])))
    return {
        "log_j12": math.log(j12) if j12 > 0 else -math.inf,
        "max_logdet": float(np.max(logdet)),
        "min_logdet": float(np.min(logdet)),
        "dist_to_1d": j12 / j11 if j11 > 0 else math.inf,
    }


@dataclass(frozen=True)
class DeterminantLaw:
    log_det: float
    expected: float
    distortion: float

    @property
    def relative_error(self) -> float:
        if self.expected in (0.0, -math.inf):
            return 0.0 if self.log_det == self.expected else math.inf
        return abs(self.distortion) / abs(self.expected)


def determinant_law(G: HenonLikeMap, p: Optional[np.ndarray] = None) -> DeterminantLaw:
    """Compare log|det DG(p)| with 2^depth log|b| (exact at periodic points of the base)."""
    p = fixed_point(G) if p is None else np.asarray(p, dtype=float)
    _, _, logdet = G.apply(p[None, :])
    expected = (2 ** G.depth) * G.base_log_det if G.base_log_det is not None else math.nan
    ld = float(logdet[0])
    distortion = 0.0 if ld == expected else ld - expected
    return DeterminantLaw(ld, expected, distortion)


@dataclass(frozen=True)
class TowerLevel:
    n: int
    map: HenonLikeMap
    R_n: int
    log_delta: float
    domain_scale: float
    dist_to_1d: float
    shape_residual: float
    det_distortion: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "R_n": self.R_n,
            "log_delta_n": self.log_delta,
            "domain_scale": self.domain_scale,
            "dist_to_1d": self.dist_to_1d,
            "residuals": {"shape": self.shape_residual, "det_distortion": self.det_distortion},
        }


@dataclass
class RenormTower:
    """R^1 F, ..., R^N F with per-level diagnostics."""

    base: HenonLikeMap
    levels: List[TowerLevel] = field(default_factory=list)

    def __getitem__(self, n: int) -> TowerLevel:
        return self.levels[n - 1]

    @property
    def log_deltas(self) -> List[float]:
        return [lvl.log_delta for lvl in self.levels]

    def to_dict(self) -> Dict[str, Any]:
        return {"base": self.base.name, "levels": [lvl.to_dict() for lvl in self.levels]}


def renorm_sequence(F: HenonLikeMap, N: int, grid: int = 32, precision: str = prec.STANDARD) -> RenormTower:
    """Tower of N renormalizations of F.

    Raises:
        DepthError: standard precision can no longer resolve ∂_y g
    """
    mode = prec.resolve(precision)
    tower = RenormTower(base=F)
    current = F
    scale = 1.0
    for n in range(1, N + 1):
        current, length = renormalize(current)
        scale *= length
        stats = _grid_stats(current, grid)
        if mode == prec.STANDARD:
            log_delta = stats["log_j12"]
            resolved = not math.isfinite(stats["max_logdet"]) or (
                math.isfinite(log_delta) and abs(log_delta - stats["max_logdet"]) <= DEPTH_DISAGREEMENT)
            if not resolved:
                raise DepthError(
                    f"standard precision cannot resolve thinness at level {n}; enable compensated mode",
                    level=n, log_j12=log_delta, max_logdet=stats["max_logdet"])
            if not prec.representable_log(stats["max_logdet"]) and math.isfinite(stats["max_logdet"]):
                raise DepthError(f"thinness underflows at level {n}; enable compensated mode", level=n)
        else:
            log_delta = stats["max_logdet"]
        expected = (2 ** n) * F.base_log_det if F.base_log_det is not None else math.nan
        distortion = 0.0 if not math.isfinite(expected) else max(
            abs(stats["max_logdet"] - expected), abs(stats["min_logdet"] - expected))
        level = TowerLevel(n=n, map=current, R_n=2 ** n, log_delta=log_delta, domain_scale=scale,
                           dist_to_1d=stats["dist_to_1d"], shape_residual=shape_residual(current, grid),
                           det_distortion=distortion)
        tower.levels.append(level)
        logger.info(f"📊 [TOWER] level {n}: log δ = {log_delta:.6f}, scale = {scale:.6e}, "
                    f"dist_to_1d = {level.dist_to_1d:.3e}")
    return tower


@dataclass(frozen=True)
class ValuableChartFit:
    residual: float
    profile_error: float
    coefficients: Tuple[float, ...]


def valuable_chart_fit(G: HenonLikeMap, degree: int = 4, grid: int = 32) -> ValuableChartFit:
    """Split g(x, y) = h(x) + e(x, y) with h a least-squares polynomial profile along y = y0.

    `residual` is max |e(x, y)| - max |e(x, y0)| over the grid, the part of
    the defect the profile cannot absorb; `profile_error` is max |e(x, y0)|.
    The row y = y0 belongs to the grid, so the residual is never negative.

    Raises:
        FitError: the Vandermonde system is ill-conditioned beyond 1e12
    """
    xs = G.domain.center[0] + 0.98 * G.domain.half_widths[0] * np.linspace(-1.0, 1.0, grid)
    y0 = G.domain.center[1]
    ys = np.unique(np.append(y0 + 0.98 * G.domain.half_widths[1] * np.linspace(-1.0, 1.0, grid), y0))
    profile = G.eval_many(np.column_stack((xs, np.full_like(xs, y0))))[:, 0]
    half = G.domain.half_widths[0]
    vander = np.polynomial.polynomial.polyvander((xs - G.domain.center[0]) / half, degree)
    cond = np.linalg.cond(vander)
    if not np.isfinite(cond) or cond > 1e12:
        raise FitError(f"profile fit ill-conditioned (cond = {cond:.3e})", cond=float(cond))
    h = Polynomial.fit(xs, profile, degree)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack((gx.ravel(), gy.ravel()))
    g = G.eval_many(pts)[:, 0].reshape(gx.shape)
    e = g - h(gx)
    e0 = profile - h(xs)
    profile_error = float(np.max(np.abs(e0)))
    return ValuableChartFit(residual=max(0.0, float(np.max(np.abs(e))) - profile_error),
                            profile_error=profile_error,
                            coefficients=tuple(float(c) for c in h.convert().coef))


def valuable_chart_residual(F: HenonLikeMap, level: int, degree: int = 4,
                            tower: Optional[RenormTower] = None) -> float:
    """Size of the y-dependence of the level-`level` map after the split fit."""
    tower = tower if tower is not None and len(tower.levels) >= level else renorm_sequence(F, level)
    return valuable_chart_fit(tower[level].map, degree).residual


# -- boundary of chaos ----------------------------------------------------------

@dataclass(frozen=True)
class BoundaryOfChaosPoint:
    b: float
    a_star: float
    levels_used: int
    residual: float
    level_params: Tuple[float, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {"b": self.b, "a_star": self.a_star, "levels_used": self.levels_used,
                "residual": self.residual, "level_params": list(self.level_params)}


def _cycle_system(z: np.ndarray, b: float, period: int) -> Tuple[np.ndarray, np.ndarray]:
    """x_{k+1} = x_k^2 + a - b x_{k-1} around the cycle, closed by trace(DF^period) = 0.

    Unknowns are (x_0, ..., x_{period-1}, a). Among cycles of the cascade the
    trace-zero one has the smallest spectral radius, b^{period/2}; at b = 0 it
    is the superstable cycle.
    """
    x = z[:-1]
    a = z[-1]
    k = np.arange(period)
    nxt = np.roll(x, -1)
    prv = np.roll(x, 1)
    res = np.empty(period + 1)
    res[:period] = nxt - (x * x + a - b * prv)
    jac = np.zeros((period + 1, period + 1))
    jac[k, (k + 1) % period] += 1.0
    jac[k, k] += -2.0 * x
    jac[k, (k - 1) % period] += b
    jac[:period, -1] = -1.0
    prefix = [np.eye(2)]
    for xk in x:
        prefix.append(np.array([[2.0 * xk, -b], [1.0, 0.0]]) @ prefix[-1])
    suffix = np.eye(2)
    res[period] = np.trace(prefix[period])
    for j in range(period - 1, -1, -1):
        jac[period, j] = 2.0 * (prefix[j] @ suffix)[0, 0]
        suffix = suffix @ np.array([[2.0 * x[j], -b], [1.0, 0.0]])
    return res, jac


def _seed_cycle(level: int) -> np.ndarray:
    a_n = superstable_ladder(max(level, 1))[level]
    period = 2 ** level
    orbit = np.asarray(critical_orbit(a_n, period))
    return np.concatenate((orbit[:period], [a_n]))


def _signs(z: np.ndarray) -> np.ndarray:
    x = z[:-1]
    return np.where(np.abs(x) > 1e-3, np.sign(x), 0.0)


def _half_period_gap(z: np.ndarray) -> float:
    """max |x_k - x_{k+P/2}|; zero when the cycle has collapsed onto half its period."""
    x = z[:-1]
    half = len(x) // 2
    return float(np.max(np.abs(x[:half] - x[half:]))) if half else math.inf


def _solve_cycle(z0: np.ndarray, b: float, period: int) -> Tuple[Optional[np.ndarray], float]:
    sol = optimize.root(_cycle_system, z0, args=(b, period), jac=True, method="hybr",
                        options={"xtol": 1e-14})
    res, _ = _cycle_system(sol.x, b, period)
    return sol.x, float(np.max(np.abs(res)))


def continue_cycle(level: int, b: float, step: float = 0.01, min_step: float = 1e-4) -> Tuple[np.ndarray, float]:
    """Track the trace-zero 2^level cycle from b = 0 to `b`.

    Returns (x_0, ..., x_{P-1}, a) and the residual of the last solve.

    Raises:
        ContinuationError: the branch is lost (no convergence, sign pattern change
            or collapse onto a cycle of half the period)
    """
    period = 2 ** level
    if period == 1:
        return np.array([0.0, 0.0]), 0.0
    z = _seed_cycle(level)
    pattern = _signs(z)
    residual = float(np.max(np.abs(_cycle_system(z, 0.0, period)[0])))
    b_cur, z_prev, b_prev = 0.0, None, None
    h = step
    while b_cur < b:
        b_next = min(b, b_cur + h)
        if z_prev is not None:
            guess = z + (z - z_prev) * (b_next - b_cur) / (b_cur - b_prev)
        else:
            guess = z.copy()
        z_new, res = _solve_cycle(guess, b_next, period)
        signs = _signs(z_new)
        same_branch = bool(np.all((pattern == 0) | (signs == 0) | (signs == pattern)))
        gap = _half_period_gap(z_new)
        if res < 1e-10 and same_branch and gap > MIN_HALF_PERIOD_GAP:
            z_prev, b_prev = z, b_cur
            z, b_cur, residual = z_new, b_next, res
            h = min(step, 2 * h)
            continue
        h *= 0.5
        logger.warning(f"⚠️ [BOUNDARY] level {level}: step halved to {h:.2e} at b={b_cur:.6f} "
                       f"(residual {res:.2e}, same branch {same_branch}, half-period gap {gap:.2e})")
        if h < min_step:
            raise ContinuationError(f"lost the period-{period} branch near b = {b_cur:.6f}",
                                    level=level, b=b_cur, residual=res, half_period_gap=gap)
    return z, residual


@lru_cache(maxsize=64)
def _boundary(b: float, max_level: int, step: float) -> BoundaryOfChaosPoint:
    if b == 0.0:
        ladder = superstable_ladder(max_level)
        params = tuple(ladder.params)
        residual = max(abs(e.residual) for e in ladder.entries)
        return BoundaryOfChaosPoint(0.0, accumulation_param(max_level), max_level, residual, params)
    params = []
    residual = 0.0
    for level in range(max_level + 1):
        z, res = continue_cycle(level, b, step)
        if params and not z[-1] < params[-1]:
            raise ContinuationError(f"period-{2 ** level} parameter {z[-1]:.12f} does not follow "
                                    f"period-{2 ** (level - 1)} parameter {params[-1]:.12f}",
                                    level=level, b=b)
        params.append(float(z[-1]))
        residual = res
    a_star = aitken(params[-3], params[-2], params[-1])
    logger.info(f"✅ [BOUNDARY] a_*({b}) = {a_star:.12f} (levels {max_level}, residual {residual:.2e})")
    return BoundaryOfChaosPoint(b, a_star, max_level, residual, tuple(params))


def boundary_of_chaos_param(b: float, max_level: int = 6, step: float = 0.01) -> BoundaryOfChaosPoint:
    """a_*(b): Aitken limit of the parameters of superstable-analog 2^n cycles of F_{a,b}.

    The superstable analog is the 2^n cycle with trace(DF^{2^n}) = 0, whose
    multipliers both have modulus b^{2^{n-1}}. It is continued in b from the
    1D superstable orbit at b = 0. Parameters must decrease with the level.
    """
    if not 0.0 <= b < 0.25:
        raise ContinuationError(f"b = {b} outside [0, 0.25)", b=b)
    if max_level < 2:
        raise ContinuationError("extrapolation needs at least three levels", max_level=max_level)
    return _boundary(float(b), int(max_level), float(step))


def boundary_scan(b_values, max_level: int = 6, step: float = 0.01) -> List[BoundaryOfChaosPoint]:
    """a_*(b) along a list of Jacobian parameters."""
    return [boundary_of_chaos_param(b, max_level, step) for b in b_values]


def boundary_map(b: float, max_level: int = 6) -> HenonLikeMap:
    """F_{a_*(b), b}."""
    return henon(boundary_of_chaos_param(b, max_level).a_star, b)
