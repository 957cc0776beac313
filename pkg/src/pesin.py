# -*- coding: utf-8 -*-
"""Finite-horizon Pesin theory along orbit records.

Everything here works in log space on an OrbitCocycle: exponents,
regularity factors, homogeneity margins, projective derivatives and the
Pliss moment bookkeeping.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from src.cocycle import OrbitCocycle
from src.dynamics import HenonLikeMap, as_points
from src.errors import (DegenerateError, DomainError, EscapeError, HypothesisError, SampleError,
                        SingularError)

logger = logging.getLogger(__name__)

MIN_LYAPUNOV_LENGTH = 1000
DIRECTION_GRID = 1024
HOMOGENEITY_DIRECTIONS = 64


@dataclass(frozen=True)
class RegularityParams:
    """Regularity factor L, marginal exponent ε, secondary exponent δ, contraction λ, slack η, scale t."""

    L: float = 1.0
    epsilon: float = 0.1
    delta: float = 0.5
    lam: float = 0.1
    eta: float = 0.01
    t: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise HypothesisError(f"contraction rate must lie in (0, 1), got {self.lam}")
        if not 0.0 <= self.eta < self.epsilon < self.delta < 1.0:
            raise HypothesisError("need η < ε < δ < 1", eta=self.eta, epsilon=self.epsilon, delta=self.delta)
        if self.L < 1.0:
            raise HypothesisError(f"regularity factor must be >= 1, got {self.L}")

    @property
    def log_lam(self) -> float:
        return math.log(self.lam)


# -- exponents -------------------------------------------------------------------

def lyapunov_exponents(orbit: OrbitCocycle, strict: bool = False,
                       min_length: int = MIN_LYAPUNOV_LENGTH) -> Tuple[float, float]:
    """(χ1, χ2) from the log singular values of the full product.

    χ1 + χ2 equals the mean log|det| by construction.

    Raises:
        SampleError: orbit shorter than `min_length`
        DegenerateError: det vanishes somewhere and `strict` is set
    """
    n = len(orbit)
    if n < min_length:
        raise SampleError(f"orbit of length {n} is too short for exponents (need {min_length})", length=n)
    log_s1, _ = orbit.log_singular_values(0, n)
    total = orbit.log_det_sum(0, n)
    if total == -math.inf:
        if strict:
            raise DegenerateError("Jacobian determinant vanishes along the orbit")
        logger.warning("⚠️ [LYAPUNOV] degenerate cocycle, reporting χ2 = -inf")
        return log_s1 / n, -math.inf
    chi1 = log_s1 / n
    return chi1, (total - log_s1) / n


def lyapunov_gap(chi2: float, b: float) -> float:
    """|log λ - log b| with λ = exp(χ2)."""
    if b == 0:
        return 0.0 if chi2 == -math.inf else math.inf
    if chi2 == -math.inf:
        return math.inf
    return abs(chi2 - math.log(abs(b)))


# -- regularity factors --------------------------------------------------------------

def _default_index(orbit: OrbitCocycle, index: Optional[int]) -> int:
    return len(orbit) // 2 if index is None else index


def _clip_exp(log_value: float) -> float:
    return math.exp(log_value) if log_value < 709.0 else math.inf


def forward_regularity_log(orbit: OrbitCocycle, E, params: RegularityParams, N: int,
                           index: Optional[int] = None) -> float:
    index = _default_index(orbit, index)
    logs = orbit.log_norms_forward(index, E, N)
    n = np.arange(1, N + 1)
    excess = logs - (1.0 - params.epsilon) * n * params.log_lam
    return max(0.0, float(np.max(excess)))


def forward_regularity_factor(orbit: OrbitCocycle, E, params: RegularityParams, N: int,
                              index: Optional[int] = None) -> float:
    """Smallest L >= 1 with ‖DF^n|_E‖ <= L λ^{(1-ε)n} for 1 <= n <= N.

    Args:
        orbit: orbit record holding at least index + N steps
        E: direction at p_index
        params: supplies ε and λ
        N: horizon
        index: base point (middle of the record by default)
    """
    return _clip_exp(forward_regularity_log(orbit, E, params, N, index))


def backward_regularity_log(orbit: OrbitCocycle, E, params: RegularityParams, M: int,
                            index: Optional[int] = None) -> float:
    index = _default_index(orbit, index)
    logs = orbit.log_norms_backward(index, E, M)
    m = np.arange(1, M + 1)
    excess = logs + params.epsilon * m * params.log_lam
    return max(0.0, float(np.max(excess)))


def backward_regularity_factor(orbit: OrbitCocycle, E, params: RegularityParams, M: int,
                               index: Optional[int] = None) -> float:
    """Smallest L >= 1 with ‖DF^{-m}|_E‖ <= L λ^{-εm} for 1 <= m <= M."""
    return _clip_exp(backward_regularity_log(orbit, E, params, M, index))


def regularity_family_log(orbit: OrbitCocycle, E, params: RegularityParams, N: int,
                          s_values: Sequence[int] = (-2, 1), index: Optional[int] = None) -> Dict[int, float]:
    """log of the factor needed by L^{-1} λ^{(1+ε)n} <= (Jac F^n)^s / ‖DF^n|_E‖^{s-1}, per s.

    Logged for inspection only; the homogeneous form above is what gets enforced.
    """
    index = _default_index(orbit, index)
    logs = orbit.log_norms_forward(index, E, N)
    jac = orbit.cum_logdet[index + 1:index + N + 1] - orbit.cum_logdet[index]
    n = np.arange(1, N + 1)
    out = {}
    for s in s_values:
        with np.errstate(invalid="ignore"):
            quantity = s * jac - (s - 1) * logs
            need = (1.0 + params.epsilon) * n * params.log_lam - quantity
        need = np.where(np.isnan(need), np.inf, need)
        out[int(s)] = max(0.0, float(np.max(need)))
        logger.info(f"📊 [REGULARITY] s={s}: log L = {out[int(s)]:.6f} over N={N}")
    return out


# -- homogeneity -----------------------------------------------------------------------

@dataclass(frozen=True)
class HomogeneityReport:
    norm_margin: float
    jac_margin: float
    worst_index: int
    power: int

    @property
    def passed(self) -> bool:
        return self.norm_margin > 0 and self.jac_margin > 0


def homogeneity_check(map_: HenonLikeMap, sample, eta: float, lam: float, power: int = 1,
                      directions: int = HOMOGENEITY_DIRECTIONS) -> HomogeneityReport:
    """Worst log margins of λ^{1+η} < ‖DF^k|_E‖ < λ^{-η} and λ^{1+η} < Jac F^k < λ^{1-η}.

    For F^k the contraction rate is λ^k.
    """
    pts = as_points(sample)
    if len(pts) == 0:
        raise SampleError("homogeneity check needs a nonempty sample")
    target = map_ if power == 1 else map_.power(power)
    _, jac, logdet = target.apply(pts)
    log_lam = power * math.log(lam)
    theta = np.pi * np.arange(directions) / directions
    dirs = np.stack((np.cos(theta), np.sin(theta)))
    images = np.einsum("pij,jd->pid", jac, dirs)
    with np.errstate(divide="ignore"):
        lognorms = np.log(np.hypot(images[:, 0, :], images[:, 1, :]))
    lower = np.min(lognorms, axis=1) - (1.0 + eta) * log_lam
    upper = -eta * log_lam - np.max(lognorms, axis=1)
    norm_margin = np.minimum(lower, upper)
    jac_margin = np.minimum(logdet - (1.0 + eta) * log_lam, (1.0 - eta) * log_lam - logdet)
    worst = int(np.argmin(np.minimum(norm_margin, jac_margin)))
    report = HomogeneityReport(float(np.min(norm_margin)), float(np.min(jac_margin)), worst, power)
    logger.debug(f"[HOMOGENEITY] k={power}: margins {report.norm_margin:.4f} / {report.jac_margin:.4f}")
    return report


# -- projective derivative --------------------------------------------------------------

def _step(map_: HenonLikeMap, p: np.ndarray, backward: bool, k: int):
    try:
        if backward:
            img, jac, logdet = map_.apply_inverse(p[None, :])
            if not map_.domain.contains(img)[0]:
                raise DomainError(f"preimage {img[0].tolist()} outside domain of {map_.name}")
        else:
            img, jac, logdet = map_.apply(p[None, :])
    except DomainError as exc:
        raise EscapeError(f"orbit left the domain at step {k}", index=-k if backward else k) from exc
    return img[0], jac[0], float(logdet[0])


def log_projective_derivative(map_: HenonLikeMap, p, E, n: int) -> float:
    """log(Jac_p F^n / ‖D_p F^n|_E‖^2) for signed n."""
    p = as_points(p)[0]
    v = np.asarray(E, dtype=float)
    v = v / np.linalg.norm(v)
    log_jac = 0.0
    log_norm = 0.0
    for k in range(1, abs(n) + 1):
        p, jac, ld = _step(map_, p, n < 0, k)
        w = jac @ v
        nrm = math.hypot(w[0], w[1])
        if nrm == 0:
            return math.nan
        log_norm += math.log(nrm)
        log_jac += ld
        v = w / nrm
    return log_jac - 2.0 * log_norm


def projective_derivative(map_: HenonLikeMap, p, E, n: int) -> float:
    """∂_P F^n(E) = Jac_p F^n / ‖D_p F^n|_E‖^2.

    Raises:
        EscapeError: the orbit segment of length |n| leaves the domain
    """
    value = log_projective_derivative(map_, p, E, n)
    return math.nan if math.isnan(value) else _clip_exp(value)


class CriticalDirection(NamedTuple):
    direction: np.ndarray
    margin: float
    log_margin: float


def _segment_jacobians(map_: HenonLikeMap, p: np.ndarray, N: int, backward: bool):
    jacs = np.empty((N, 2, 2))
    logdets = np.empty(N)
    q = p
    for k in range(1, N + 1):
        q, jacs[k - 1], logdets[k - 1] = _step(map_, q, backward, k)
    return jacs, logdets


def _log_margins(jacs: np.ndarray, logdets: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """min over n of log ∂_P F^n for every angle (nan for kernel directions)."""
    v = np.stack((np.cos(theta), np.sin(theta)))
    log_norm = np.zeros(len(theta))
    best = np.full(len(theta), np.inf)
    cum = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for jac, ld in zip(jacs, logdets):
            w = jac @ v
            nrm = np.hypot(w[0], w[1])
            log_norm = log_norm + np.log(nrm)
            v = w / np.where(nrm > 0, nrm, 1.0)
            cum += ld
            best = np.minimum(best, cum - 2.0 * log_norm)
    return best


def critical_direction_search(map_: HenonLikeMap, p, N: int, grid: int = DIRECTION_GRID,
                              seed=None) -> CriticalDirection:
    """Direction maximizing min over 1 <= n <= N of ∂_P F^{±n}(E).

    A projective grid is refined by bounded scalar minimization around the
    best grid angle (and around `seed` when given). Backward steps are skipped
    for maps without an inverse.
    """
    p = as_points(p)[0]
    fwd = _segment_jacobians(map_, p, N, backward=False)
    try:
        bwd = _segment_jacobians(map_, p, N, backward=True)
    except SingularError:
        logger.info(f"[CRITICAL] {map_.name} is not invertible, searching forward derivatives only")
        bwd = None

    def objective(theta: np.ndarray) -> np.ndarray:
        values = _log_margins(*fwd, theta)
        if bwd is not None:
            values = np.minimum(values, _log_margins(*bwd, theta))
        return np.where(np.isnan(values), -np.inf, values)

    thetas = np.pi * np.arange(grid) / grid
    scores = objective(thetas)
    starts = [float(thetas[int(np.argmax(scores))])]
    if seed is not None:
        s = np.asarray(seed, dtype=float)
        starts.append(float(math.atan2(s[1], s[0]) % math.pi))
    half_cell = math.pi / grid
    best_theta, best_score = starts[0], float(np.max(scores))
    for start in starts:
        res = optimize.minimize_scalar(lambda t: -float(objective(np.array([t]))[0]),
                                       bounds=(start - half_cell, start + half_cell), method="bounded",
                                       options={"xatol": 1e-15})
        if np.isfinite(res.fun) and -res.fun > best_score:
            best_theta, best_score = float(res.x), float(-res.fun)
    direction = np.array([math.cos(best_theta), math.sin(best_theta)])
    margin = _clip_exp(best_score) if best_score > -math.inf else 0.0
    logger.debug(f"[CRITICAL] best direction angle {best_theta:.12f}, margin {margin:.6f}")
    return CriticalDirection(direction, margin, best_score)


# -- Pliss moments -------------------------------------------------------------------

PRESERVING = "preserving"
REVERSING = "reversing"
ABSOLUTE = "absolute"


@dataclass(frozen=True)
class PlissQuery:
    """Sequence a_1..a_N with thresholds α1 < α2 < α3 (reversed when `lower`)."""

    seq: Tuple[float, ...]
    alpha1: float
    alpha2: float
    alpha3: float
    lower: bool = False

    def __post_init__(self):
        object.__setattr__(self, "seq", tuple(float(v) for v in self.seq))
        a1, a2, a3 = self._upper_alphas()
        if not a1 < a2 < a3:
            raise HypothesisError("thresholds must satisfy α1 < α2 < α3 (mirrored for lower bounds)",
                                  alphas=[self.alpha1, self.alpha2, self.alpha3])
        values = self.upper_values()
        if len(values) and float(np.min(values)) <= a1:
            raise HypothesisError("sequence must stay above α1 (below for lower bounds)")

    def _upper_alphas(self) -> Tuple[float, float, float]:
        if self.lower:
            return -self.alpha1, -self.alpha2, -self.alpha3
        return self.alpha1, self.alpha2, self.alpha3

    def upper_values(self) -> np.ndarray:
        v = np.asarray(self.seq, dtype=float)
        return -v if self.lower else v

    def __len__(self) -> int:
        return len(self.seq)


def _prefix(q: PlissQuery, level: float) -> np.ndarray:
    """S_0 = 0, S_n = Σ_{l<=n} (a_l - level) in upper form."""
    return np.concatenate(([0.0], np.cumsum(q.upper_values() - level)))


def pliss_hypothesis_holds(q: PlissQuery) -> bool:
    """Every prefix average is at most α2."""
    _, a2, _ = q._upper_alphas()
    return bool(np.all(_prefix(q, a2)[1:] <= 0.0))


def _moment_flags(q: PlissQuery) -> Tuple[np.ndarray, np.ndarray]:
    _, _, a3 = q._upper_alphas()
    S = _prefix(q, a3)
    N = len(q)
    if N == 0:
        return np.zeros(0, dtype=bool), np.zeros(0, dtype=bool)
    # k preserving iff max(S_k..S_N) <= S_{k-1}
    suffix_max = np.maximum.accumulate(S[::-1])[::-1]
    preserving = suffix_max[1:] <= S[:-1]
    # m reversing iff m = 1 or S_{m-1} <= min(S_0..S_{m-2})
    prefix_min = np.minimum.accumulate(S[:-1])
    reversing = np.ones(N, dtype=bool)
    reversing[1:] = S[1:N] <= prefix_min[:-1]
    return preserving, reversing


def pliss_moments(q: PlissQuery, kind: str = PRESERVING) -> List[int]:
    """1-based indices of the Pliss moments of the given kind."""
    preserving, reversing = _moment_flags(q)
    if kind == PRESERVING:
        flags = preserving
    elif kind == REVERSING:
        flags = reversing
    elif kind == ABSOLUTE:
        flags = preserving & reversing
    else:
        raise ValueError(f"unknown Pliss moment kind '{kind}'")
    return [int(i) + 1 for i in np.nonzero(flags)[0]]


def pliss_table(q: PlissQuery) -> List[Dict[str, object]]:
    """Rows (index, value, preserving, reversing, absolute) for CSV export."""
    preserving, reversing = _moment_flags(q)
    return [{"index": i + 1, "value": q.seq[i], "preserving": bool(preserving[i]),
             "reversing": bool(reversing[i]), "absolute": bool(preserving[i] and reversing[i])}
            for i in range(len(q))]


@dataclass(frozen=True)
class PlissDensity:
    kind: str
    moments: int
    violations: int
    margin: float


def _require_hypothesis(q: PlissQuery) -> None:
    if not pliss_hypothesis_holds(q):
        raise HypothesisError("some prefix average exceeds α2")


def pliss_density_check(q: PlissQuery, kind: str = PRESERVING) -> PlissDensity:
    """Check i/j_i >= (α2 - α3)/(α1 - α3) for every moment j_i.

    The comparison i (α3 - α1) >= j_i (α3 - α2) is exact on dyadic data;
    `margin` is min over i of i/j_i minus the bound.

    Raises:
        HypothesisError: a prefix average exceeds α2
    """
    if kind not in (PRESERVING, REVERSING):
        raise ValueError("density lemma applies to preserving or reversing moments")
    _require_hypothesis(q)
    a1, a2, a3 = q._upper_alphas()
    moments = np.asarray(pliss_moments(q, kind), dtype=float)
    if len(moments) == 0:
        return PlissDensity(kind, 0, 0, math.inf)
    i = np.arange(1, len(moments) + 1, dtype=float)
    violations = int(np.sum(i * (a3 - a1) < moments * (a3 - a2)))
    bound = (a2 - a3) / (a1 - a3)
    return PlissDensity(kind, len(moments), violations, float(np.min(i / moments)) - bound)


def absolute_pliss_density_check(q: PlissQuery) -> float:
    """min over i of (i + 2)/n_i minus (2α2 - α1 - α3)/(α1 - α3) over absolute moments n_i.

    Raises:
        HypothesisError: a prefix average exceeds α2
    """
    return absolute_pliss_density(q).margin


def absolute_pliss_density(q: PlissQuery) -> PlissDensity:
    _require_hypothesis(q)
    a1, a2, a3 = q._upper_alphas()
    moments = np.asarray(pliss_moments(q, ABSOLUTE), dtype=float)
    if len(moments) == 0:
        return PlissDensity(ABSOLUTE, 0, 0, math.inf)
    i = np.arange(1, len(moments) + 1, dtype=float)
    violations = int(np.sum((i + 2) * (a3 - a1) < moments * (a1 + a3 - 2 * a2)))
    bound = (2 * a2 - a1 - a3) / (a1 - a3)
    return PlissDensity(ABSOLUTE, len(moments), violations, float(np.min((i + 2) / moments)) - bound)


def random_admissible_sequence(rng: np.random.Generator, N: int, alpha1: float, alpha2: float,
                               spread: float, max_tries: int = 10000) -> np.ndarray:
    """Dyadic sequence uniform in (α1, α2 + spread] whose prefix averages stay below α2.

    Values are multiples of 2^-20 so that every window sum is exact.
    """
    scale = 2.0 ** 20
    lo = int(math.floor(alpha1 * scale)) + 1
    hi = int(math.floor((alpha2 + spread) * scale))
    for _ in range(max_tries):
        seq = rng.integers(lo, hi + 1, size=N) / scale
        if np.all(np.cumsum(seq - alpha2) <= 0.0):
            return seq
    raise HypothesisError(f"no admissible sequence found in {max_tries} draws", N=N)
