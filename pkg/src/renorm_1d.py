# -*- coding: utf-8 -*-
"""One-dimensional period doubling for f_a(x) = x^2 + a.

Superstable ladder, Feigenbaum ratios, the accumulation parameter a_*,
the normalized renormalization operator and the a priori / regular
unicriticality scans along the critical orbit.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from src import precision as prec
from src.dynamics import QuadraticMap
from src.errors import (BracketError, DivisionError, NotRenormalizableError, SampleError,
                        ToleranceError)

logger = logging.getLogger(__name__)

LADDER_TOLERANCE = 1e-12
DEFAULT_MAX_LEVEL = 10
LADDER_CSV_HEADER = ["level", "a_n", "residual", "bracket_lo", "bracket_hi"]


@dataclass(frozen=True)
class LadderEntry:
    level: int
    a: float
    residual: float
    bracket_lo: float
    bracket_hi: float


@dataclass(frozen=True)
class SuperstableLadder:
    """Parameters a_n with f_{a_n}^{2^n}(0) = 0, strictly decreasing."""

    entries: Tuple[LadderEntry, ...]

    def __getitem__(self, level: int) -> float:
        return self.entries[level].a

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def params(self) -> List[float]:
        return [e.a for e in self.entries]

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(LADDER_CSV_HEADER)
            for e in self.entries:
                writer.writerow([e.level, repr(e.a), repr(e.residual), repr(e.bracket_lo), repr(e.bracket_hi)])
        return path


def _residual(a: float, level: int, precision: str) -> float:
    return prec.critical_orbit_value(a, 2 ** level, precision)


def _scan_bracket(level: int, upper: float, gap: float) -> Tuple[float, float]:
    """First sign change of a -> f_a^{2^n}(0) scanning downward from just below a_{n-1}."""
    step = min(1e-4, gap / 2000.0)
    grid = np.arange(upper - gap / 20.0, upper - 0.6 * gap, -step)
    x = np.zeros_like(grid)
    for _ in range(2 ** level):
        x = x * x + grid
    sign = np.sign(x)
    flips = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    if len(flips) == 0:
        raise BracketError(f"no sign change of f_a^(2^{level})(0) below a = {upper:.12g}", level=level)
    i = int(flips[0])
    return float(grid[i + 1]), float(grid[i])


def _bisect(level: int, lo: float, hi: float, tol: float, precision: str) -> Tuple[float, float]:
    r_lo = _residual(lo, level, precision)
    if r_lo == 0.0:
        return lo, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r_mid = _residual(mid, level, precision)
        if abs(r_mid) < tol:
            return mid, r_mid
        if mid in (lo, hi):
            break
        if (r_mid < 0) == (r_lo < 0):
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    raise ToleranceError(f"bisection stalled at level {level} above tolerance {tol:g}",
                         level=level, lo=lo, hi=hi)


@lru_cache(maxsize=32)
def _ladder(levels: int, tol: float, precision: str) -> Tuple[LadderEntry, ...]:
    entries = [LadderEntry(0, 0.0, 0.0, 0.0, 0.0)]
    if levels >= 1:
        entries.append(LadderEntry(1, -1.0, _residual(-1.0, 1, precision), -1.0, -1.0))
    for n in range(2, levels + 1):
        prev, prev2 = entries[n - 1].a, entries[n - 2].a
        lo, hi = _scan_bracket(n, prev, prev2 - prev)
        a_n, resid = _bisect(n, lo, hi, tol, precision)
        entries.append(LadderEntry(n, a_n, resid, lo, hi))
        logger.debug(f"[LADDER] a_{n} = {a_n:.15f} (residual {resid:.2e})")
    return tuple(entries)


def superstable_ladder(levels: int, tolerance: float = LADDER_TOLERANCE,
                       precision: str = prec.STANDARD) -> SuperstableLadder:
    return SuperstableLadder(_ladder(int(levels), float(tolerance), prec.resolve(precision)))


def superstable_param(n: int, tolerance: float = LADDER_TOLERANCE, precision: str = prec.STANDARD) -> float:
    """a_n with f_{a_n}^{2^n}(0) = 0 to `tolerance`.

    Raises:
        BracketError: No sign change in the period-doubling window
        ToleranceError: Bisection stalled above the tolerance
    """
    if n < 0:
        raise BracketError("level must be non-negative", level=n)
    return superstable_ladder(n, tolerance, precision)[n]


def aitken(x0: float, x1: float, x2: float) -> float:
    denom = (x2 - x1) - (x1 - x0)
    if denom == 0:
        raise DivisionError("Aitken denominator vanished", values=[x0, x1, x2])
    return x2 - (x2 - x1) ** 2 / denom


def accumulation_param(max_level: int = DEFAULT_MAX_LEVEL, precision: str = prec.STANDARD) -> float:
    """a_* by Aitken extrapolation of the last three ladder entries."""
    ladder = superstable_ladder(max_level, precision=precision)
    return aitken(ladder[max_level - 2], ladder[max_level - 1], ladder[max_level])


def feigenbaum_ratio(ladder: SuperstableLadder, n: int) -> float:
    """(a_{n-1} - a_{n-2}) / (a_n - a_{n-1})."""
    if n < 2 or n >= len(ladder):
        raise DivisionError(f"ladder does not hold levels {n - 2}..{n}", level=n)
    denom = ladder[n] - ladder[n - 1]
    if denom == 0:
        raise DivisionError(f"a_{n} equals a_{n - 1}", level=n)
    return (ladder[n - 1] - ladder[n - 2]) / denom


# -- renormalization operator -------------------------------------------------

@dataclass(frozen=True)
class UnimodalComposite:
    """x -> s (f^P(x/s + c) - c), an affinely normalized iterate of a unimodal map."""

    base: Union[QuadraticMap, "UnimodalComposite"]
    period: int
    center: float
    scale: float

    critical_point = 0.0

    def _iterate(self, y):
        for _ in range(self.period):
            y = self.base(y)
        return y

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * (self._iterate(x / self.scale + self.center) - self.center)

    def derivative(self, x):
        y = np.asarray(x, dtype=float) / self.scale + self.center
        d = np.ones_like(y)
        for _ in range(self.period):
            d = d * self.base.derivative(y)
            y = self.base(y)
        return d


def _normalize(f, period: int) -> UnimodalComposite:
    c = float(f.critical_point)
    value = c
    for _ in range(period):
        value = float(f(value))
    if value == c:
        raise NotRenormalizableError("critical point is fixed by the return map", period=period)
    return UnimodalComposite(f, period, c, -1.0 / (value - c))


def _doubling_admissible(g: UnimodalComposite, tol: float = 1e-10) -> bool:
    """g(-1) <= p' for the orientation-reversing fixed point p and its co-preimage p'."""
    try:
        p = optimize.brentq(lambda x: float(g(x)) - x, -1.0, 0.0, xtol=1e-15)
        hi = 1.5
        while float(g(hi)) < p and hi < 64:
            hi *= 2
        p_prime = optimize.brentq(lambda x: float(g(x)) - p, 0.0, hi, xtol=1e-15)
    except ValueError:
        return False
    return float(g(-1.0)) <= p_prime + tol


def renorm_1d(f, level: int) -> UnimodalComposite:
    """Normalized return map s ∘ f^{2^level} ∘ s⁻¹.

    The return map's critical point is the critical point of f (chain rule),
    and the signed scale puts the critical value at -1, so every level has the
    same orientation.

    Raises:
        NotRenormalizableError: the period-doubling return interval is not invariant
    """
    if level < 0:
        raise NotRenormalizableError("level must be non-negative", level=level)
    for k in range(1, level + 1):
        if not _doubling_admissible(_normalize(f, 2 ** (k - 1))):
            raise NotRenormalizableError(f"map is not {k}-times renormalizable", level=k)
    return _normalize(f, 2 ** level)


def renormalization_distances(a: float, levels: int, grid: int = 256) -> List[float]:
    """sup |R^n f - R^{n+1} f| on [-1, 1] for n = 1..levels."""
    xs = np.linspace(-1.0, 1.0, grid)
    f = QuadraticMap(a)
    maps = [renorm_1d(f, n) for n in range(1, levels + 2)]
    return [float(np.max(np.abs(maps[n](xs) - maps[n + 1](xs)))) for n in range(levels)]


# -- critical orbit scans -------------------------------------------------------

@lru_cache(maxsize=16)
def critical_orbit(a: float, length: int) -> np.ndarray:
    """c_0 = 0, c_1 = a, ..., c_length."""
    out = np.empty(length + 1)
    x = 0.0
    out[0] = x
    for k in range(1, length + 1):
        x = x * x + a
        out[k] = x
    out.flags.writeable = False
    return out


def backward_critical_orbit(a: float, depth: int, reference_length: int = 2 ** 16) -> np.ndarray:
    """c_0, c_{-1}, ..., c_{-(depth-1)} on the limit set.

    Branches follow the long forward orbit c_{L-i}, which shadows the backward
    orbit because c_L with L = 2^16 is a closest return to c_0.
    """
    ref = critical_orbit(a, reference_length)
    out = np.empty(depth)
    out[0] = 0.0
    for i in range(1, depth):
        branch = math.copysign(1.0, ref[reference_length - i])
        out[i] = branch * math.sqrt(max(out[i - 1] - a, 0.0))
    return out


@dataclass(frozen=True)
class UnicritReport1D:
    t: float
    epsilon: float
    N: int
    L_min: float
    witness: Tuple[int, int]
    admissible: int
    log_L_min: float = field(default=float("nan"))
    full_horizon: int = 0


def admissible_horizons(a: float, xs: np.ndarray, t: float, eps_under: float, N: int) -> np.ndarray:
    """First i < N with x in D^t_{-i} = [c_{-i} - t e^{-ε̲ i}, c_{-i} + t e^{-ε̲ i}], else N.

    A point with horizon h lies outside D^t_0, ..., D^t_{h-1}, so the
    derivative bound applies to it for 1 <= n <= h.
    """
    back = backward_critical_orbit(a, N)
    radii = t * np.exp(-eps_under * np.arange(N))
    horizon = np.full(len(xs), N, dtype=int)
    for start in range(0, N, 128):
        hit = np.abs(xs[:, None] - back[None, start:start + 128]) < radii[None, start:start + 128]
        first = np.where(hit.any(axis=1), start + hit.argmax(axis=1), N)
        horizon = np.minimum(horizon, first)
    return horizon


def verify_1d_unicriticality(a: float, t: float, epsilon: float, N: int,
                             sample: Optional[Sequence[float]] = None,
                             epsilon_under: Optional[float] = None,
                             sample_size: int = 4096) -> UnicritReport1D:
    """Best constant L with |(f^n)'(x)| >= L^{-1} e^{-εn} for 1 <= n <= h(x) <= N.

    h(x) is the admissible horizon of x (see `admissible_horizons`); points
    inside D^t_0 have h = 0 and are not admissible. The default sample is the
    forward critical orbit c_1..c_S.

    Raises:
        SampleError: fewer than 100 admissible sample points
    """
    eps_under = epsilon ** 2 if epsilon_under is None else epsilon_under
    f = QuadraticMap(a)
    xs = (np.asarray(sample, dtype=float) if sample is not None
          else np.array(critical_orbit(a, sample_size)[1:]))
    horizon = admissible_horizons(a, xs, t, eps_under, N)
    idx = np.nonzero(horizon > 0)[0]
    if len(idx) < 100:
        raise SampleError(f"only {len(idx)} admissible sample points (need 100)", admissible=int(len(idx)))

    x = xs[idx].copy()
    h = horizon[idx]
    log_deriv = np.zeros(len(x))
    best = -math.inf
    witness = (-1, -1)
    with np.errstate(divide="ignore"):
        for n in range(1, int(h.max()) + 1):
            log_deriv += np.log(np.abs(f.derivative(x)))
            x = f(x)
            margin = np.where(h >= n, -epsilon * n - log_deriv, -math.inf)
            k = int(np.argmax(margin))
            if margin[k] > best:
                best = float(margin[k])
                witness = (int(idx[k]) + (1 if sample is None else 0), n)
    full = int(np.count_nonzero(h == N))
    logger.info(f"📊 [UNICRIT] a={a:.12g} t={t} ε={epsilon} N={N}: log L_min = {best:.6f} at {witness} "
                f"({len(idx)} admissible, {full} over the full horizon)")
    return UnicritReport1D(t=t, epsilon=epsilon, N=N, L_min=math.exp(best) if best < 709 else math.inf,
                           witness=witness, admissible=int(len(idx)), log_L_min=best, full_horizon=full)


def apriori_expansion_1d(a: float, n: int, sample_size: int = 1000) -> float:
    """min(1, min |(f^{R_n})'(x)|) over critical-orbit points of I^n_0 minus I^{n+1}_0.

    Orbit points c_k with k ≡ 2^n (mod 2^{n+1}) are exactly those in the
    depth-n central piece but not in the depth-(n+1) one.
    """
    period = 2 ** n
    length = sample_size * 2 * period + period + 1
    orbit = np.asarray(critical_orbit(a, length))
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(2.0 * orbit))
    cum = np.concatenate(([0.0], np.cumsum(logs)))
    ks = period + 2 * period * np.arange(sample_size)
    ks = ks[ks + period < len(cum)]
    if len(ks) == 0:
        raise SampleError("no sample points in the annular piece", level=n)
    log_d = cum[ks + period] - cum[ks]
    nu = min(1.0, float(np.exp(np.min(log_d))))
    logger.debug(f"[APRIORI] n={n}: ν = {nu:.6f} over {len(ks)} points")
    return nu
