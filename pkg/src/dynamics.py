# -*- coding: utf-8 -*-
"""Evaluation, differentiation and iteration of unimodal and Hénon-like maps.

A Hénon-like map is stored as a composition chain of elementary transforms.
Every transform maps a batch of points ``(N, 2)`` to its images together with
the ``(N, 2, 2)`` Jacobians and the ``(N,)`` log-determinants, so the Jacobian
of any chain is the exact chain-rule product and thinness never goes through an
interpolated grid.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.cocycle import OrbitCocycle
from src.errors import DomainError, EscapeError, SingularError, SingularStraightenError

logger = logging.getLogger(__name__)

Batch = Tuple[np.ndarray, np.ndarray, np.ndarray]

AMBIENT_HALF_WIDTH = 3.0


def as_points(p) -> np.ndarray:
    pts = np.asarray(p, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError(f"expected plane points, got shape {pts.shape}")
    return pts


def _safe_log_abs(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(values))


@dataclass(frozen=True)
class QuadraticMap:
    """f_a(x) = x^2 + a, critical point 0."""

    a: float

    critical_point = 0.0

    def __call__(self, x):
        return x * x + self.a

    def derivative(self, x):
        return 2.0 * x

    def second_derivative(self, x):
        return 2.0 + 0.0 * np.asarray(x, dtype=float)

    def iterate(self, x, n: int):
        for _ in range(n):
            x = x * x + self.a
        return x


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle center ± half_widths."""

    center: Tuple[float, float]
    half_widths: Tuple[float, float]

    def __post_init__(self):
        hw = tuple(float(h) for h in np.broadcast_to(np.asarray(self.half_widths, dtype=float), (2,)))
        c = tuple(float(v) for v in np.broadcast_to(np.asarray(self.center, dtype=float), (2,)))
        if not all(h > 0 and math.isfinite(h) for h in hw):
            raise DomainError(f"box half-widths must be positive, got {hw}")
        object.__setattr__(self, "half_widths", hw)
        object.__setattr__(self, "center", c)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - np.asarray(self.half_widths)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.half_widths)

    def contains(self, pts) -> np.ndarray:
        pts = as_points(pts)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def grid(self, n: int, shrink: float = 1.0) -> np.ndarray:
        """n×n grid covering the box (scaled by `shrink` about the center)."""
        xs = self.center[0] + shrink * self.half_widths[0] * np.linspace(-1.0, 1.0, n)
        ys = self.center[1] + shrink * self.half_widths[1] * np.linspace(-1.0, 1.0, n)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack((gx.ravel(), gy.ravel()))

    def scaled(self, factor: float) -> "Box":
        return Box(self.center, (self.half_widths[0] * factor, self.half_widths[1] * factor))


class Transform(ABC):
    """Elementary planar transform with exact Jacobian."""

    @abstractmethod
    def apply(self, pts: np.ndarray, check: bool = True) -> Batch:
        ...

    def apply_inverse(self, pts: np.ndarray, check: bool = True) -> Batch:
        raise SingularError(f"{type(self).__name__} has no inverse")


@dataclass(frozen=True)
class HenonStep(Transform):
    """(x, y) -> (x^2 + a - b y, x)."""

    a: float
    b: float

    def apply(self, pts, check=True):
        x, y = pts[:, 0], pts[:, 1]
        img = np.column_stack((x * x + self.a - self.b * y, x))
        jac = np.zeros((len(pts), 2, 2))
        jac[:, 0, 0] = 2.0 * x
        jac[:, 0, 1] = -self.b
        jac[:, 1, 0] = 1.0
        logdet = np.full(len(pts), math.log(abs(self.b)) if self.b != 0 else -math.inf)
        return img, jac, logdet

    def apply_inverse(self, pts, check=True):
        if self.b == 0:
            raise SingularError("HenonStep with b = 0 is not invertible")
        u, v = pts[:, 0], pts[:, 1]
        img = np.column_stack((v, (v * v + self.a - u) / self.b))
        jac = np.zeros((len(pts), 2, 2))
        jac[:, 0, 1] = 1.0
        jac[:, 1, 0] = -1.0 / self.b
        jac[:, 1, 1] = 2.0 * v / self.b
        logdet = np.full(len(pts), -math.log(abs(self.b)))
        return img, jac, logdet


@dataclass(frozen=True)
class Embed1D(Transform):
    """The degenerate map (x, y) -> (f(x), x)."""

    f: QuadraticMap

    def apply(self, pts, check=True):
        x = pts[:, 0]
        img = np.column_stack((self.f(x), x))
        jac = np.zeros((len(pts), 2, 2))
        jac[:, 0, 0] = self.f.derivative(x)
        jac[:, 1, 0] = 1.0
        return img, jac, np.full(len(pts), -math.inf)


@dataclass(frozen=True)
class AffineRescale(Transform):
    """S(p) = scale * (p - center)."""

    center: Tuple[float, float]
    scale: float

    def __post_init__(self):
        if self.scale == 0 or not math.isfinite(self.scale):
            raise DomainError(f"invalid rescale factor {self.scale}")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    def _batch(self, n: int, s: float) -> Tuple[np.ndarray, np.ndarray]:
        jac = np.zeros((n, 2, 2))
        jac[:, 0, 0] = s
        jac[:, 1, 1] = s
        return jac, np.full(n, 2.0 * math.log(abs(s)))

    def apply(self, pts, check=True):
        jac, logdet = self._batch(len(pts), self.scale)
        return self.scale * (pts - np.asarray(self.center)), jac, logdet

    def apply_inverse(self, pts, check=True):
        jac, logdet = self._batch(len(pts), 1.0 / self.scale)
        return pts / self.scale + np.asarray(self.center), jac, logdet

    def image_box(self, box: Box) -> Box:
        c = self.scale * (np.asarray(box.center) - np.asarray(self.center))
        return Box(tuple(c), tuple(abs(self.scale) * np.asarray(box.half_widths)))


@dataclass(frozen=True)
class LinearStep(Transform):
    """p -> M p; used for synthetic cocycles."""

    matrix: Tuple[Tuple[float, float], Tuple[float, float]]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 2):
            raise DomainError("LinearStep needs a 2x2 matrix")
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in m))

    @cached_property
    def _m(self) -> np.ndarray:
        return np.asarray(self.matrix)

    def apply(self, pts, check=True):
        m = self._m
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        logdet = float(_safe_log_abs(np.asarray(det)))
        return pts @ m.T, np.broadcast_to(m, (len(pts), 2, 2)).copy(), np.full(len(pts), logdet)

    def apply_inverse(self, pts, check=True):
        m = self._m
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if det == 0:
            raise SingularError("singular linear step")
        inv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
        return pts @ inv.T, np.broadcast_to(inv, (len(pts), 2, 2)).copy(), np.full(len(pts), -math.log(abs(det)))


@dataclass(frozen=True, eq=False)
class HorizontalStraighten(Transform):
    """H(x, y) = (g(x, y), y) with g the first coordinate of `inner`.

    The inverse solves g(x, y) = u by Newton's method on the branch
    `side` of the fold line through `pivot` (the critical point of g).
    """

    inner: "HenonLikeMap"
    pivot: float
    side: float
    kappa: float
    tol: float = 1e-15
    max_iter: int = 80

    def apply(self, pts, check=True):
        img, jac, _ = self.inner.apply(pts, check=check)
        out = np.column_stack((img[:, 0], pts[:, 1]))
        hjac = np.zeros((len(pts), 2, 2))
        hjac[:, 0, 0] = jac[:, 0, 0]
        hjac[:, 0, 1] = jac[:, 0, 1]
        hjac[:, 1, 1] = 1.0
        return out, hjac, _safe_log_abs(jac[:, 0, 0])

    def _first(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        img, jac, _ = self.inner.apply(np.column_stack((x, y)), check=False)
        return img[:, 0], jac[:, 0, 0], jac[:, 0, 1]

    def apply_inverse(self, pts, check=True):
        u, y = pts[:, 0].copy(), pts[:, 1].copy()
        with np.errstate(all="ignore"):
            v_y, _, _ = self._first(np.full_like(y, self.pivot), y)
            x = self.pivot + self.side * np.sqrt(np.maximum((u - v_y) / self.kappa, 0.0)) + self.side * 1e-12
            for _ in range(self.max_iter):
                g, gx, _ = self._first(x, y)
                resid = g - u
                done = np.abs(resid) <= self.tol * (1.0 + np.abs(u))
                if done.all():
                    break
                x_new = x - np.where(done, 0.0, resid / gx)
                crossed = self.side * (x_new - self.pivot) <= 0
                x_new = np.where(crossed, 0.5 * (x + self.pivot), x_new)
                small = np.abs(x_new - x) <= 4e-16 * (1.0 + np.abs(x))
                x = x_new
                if np.all(done | small):
                    break
            g, gx, gy = self._first(x, y)
            resid = np.abs(g - u)
        bad = ~np.isfinite(x) | ~np.isfinite(gx) | (gx == 0) | ~(resid <= 1e-10 * (1.0 + np.abs(u)))
        if bad.any():
            raise SingularStraightenError(
                f"straightening inverse failed at {int(bad.sum())} point(s)",
                first_point=pts[np.argmax(bad)].tolist(),
            )
        jac = np.zeros((len(u), 2, 2))
        jac[:, 0, 0] = 1.0 / gx
        jac[:, 0, 1] = -gy / gx
        jac[:, 1, 1] = 1.0
        return np.column_stack((x, y)), jac, -np.log(np.abs(gx))


@dataclass(frozen=True, eq=False)
class Inverse(Transform):
    element: Transform

    def apply(self, pts, check=True):
        return self.element.apply_inverse(pts, check=check)

    def apply_inverse(self, pts, check=True):
        return self.element.apply(pts, check=check)


@dataclass(frozen=True, eq=False)
class HenonLikeMap(Transform):
    """Composition chain applied in list order, valid on `domain`."""

    chain: Tuple[Transform, ...]
    domain: Box
    name: str = "map"
    depth: int = 0
    base_log_det: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "chain", tuple(self.chain))
        if not self.chain:
            raise DomainError("empty composition chain")

    # -- Transform protocol -------------------------------------------------

    def apply(self, pts, check=True):
        pts = as_points(pts)
        if check:
            inside = self.domain.contains(pts)
            if not inside.all():
                raise DomainError(f"point {pts[np.argmin(inside)].tolist()} outside domain of {self.name}")
        cur = pts
        jac = np.broadcast_to(np.eye(2), (len(pts), 2, 2)).copy()
        logdet = np.zeros(len(pts))
        with np.errstate(over="ignore", invalid="ignore"):
            for element in self.chain:
                try:
                    cur, ejac, eld = element.apply(cur, check=check)
                except DomainError as exc:
                    raise EscapeError(f"intermediate point escaped inside {self.name}: {exc.message}") from exc
                jac = np.matmul(ejac, jac)
                logdet = logdet + eld
        if not np.all(np.isfinite(cur)):
            raise EscapeError(f"non-finite image under {self.name}")
        return cur, jac, logdet

    def apply_inverse(self, pts, check=True):
        cur = as_points(pts)
        jac = np.broadcast_to(np.eye(2), (len(cur), 2, 2)).copy()
        logdet = np.zeros(len(cur))
        with np.errstate(over="ignore", invalid="ignore"):
            for element in reversed(self.chain):
                cur, ejac, eld = element.apply_inverse(cur, check=check)
                jac = np.matmul(ejac, jac)
                logdet = logdet + eld
        if not np.all(np.isfinite(cur)):
            raise EscapeError(f"non-finite preimage under {self.name}")
        return cur, jac, logdet

    # -- convenience --------------------------------------------------------

    @property
    def henon_parameters(self) -> Optional[Tuple[float, float]]:
        """(a, b) when the chain is a single plain Hénon or embedded step."""
        if len(self.chain) != 1:
            return None
        element = self.chain[0]
        if isinstance(element, HenonStep):
            return element.a, element.b
        if isinstance(element, Embed1D):
            return element.f.a, 0.0
        return None

    @property
    def return_time(self) -> int:
        return 2 ** self.depth

    def eval(self, p) -> np.ndarray:
        return self.apply(as_points(p))[0][0]

    def jacobian(self, p) -> np.ndarray:
        return self.apply(as_points(p))[1][0]

    def eval_many(self, pts, check: bool = True) -> np.ndarray:
        return self.apply(as_points(pts), check=check)[0]

    def power(self, k: int) -> "HenonLikeMap":
        if k < 1:
            raise DomainError("power needs k >= 1")
        return HenonLikeMap((self,) * k, self.domain, f"{self.name}^{k}", self.depth, self.base_log_det)

    def conjugate(self, rescale: AffineRescale) -> "HenonLikeMap":
        """S ∘ F ∘ S⁻¹ on the image of the domain."""
        return HenonLikeMap((Inverse(rescale), self, rescale), rescale.image_box(self.domain),
                            f"S∘{self.name}∘S⁻¹", self.depth, self.base_log_det)

    def inverse(self) -> "HenonLikeMap":
        return HenonLikeMap((Inverse(self),), self.domain, f"{self.name}⁻¹", self.depth,
                            None if self.base_log_det is None else -self.base_log_det)


def henon(a: float, b: float, half_width: float = AMBIENT_HALF_WIDTH) -> HenonLikeMap:
    return HenonLikeMap((HenonStep(float(a), float(b)),), Box((0.0, 0.0), (half_width, half_width)),
                        name=f"henon(a={a:.12g}, b={b:.6g})",
                        base_log_det=math.log(abs(b)) if b != 0 else -math.inf)


def embed_1d(f: QuadraticMap, half_width: float = AMBIENT_HALF_WIDTH) -> HenonLikeMap:
    """ι(f)(x, y) = (f(x), x)."""
    return HenonLikeMap((Embed1D(f),), Box((0.0, 0.0), (half_width, half_width)),
                        name=f"embed(a={f.a:.12g})", base_log_det=-math.inf)


def linear_map(matrix, half_width: float = 1e6) -> HenonLikeMap:
    step = LinearStep(tuple(map(tuple, np.asarray(matrix, dtype=float))))
    det = float(np.linalg.det(np.asarray(matrix, dtype=float)))
    return HenonLikeMap((step,), Box((0.0, 0.0), (half_width, half_width)), name="linear",
                        base_log_det=math.log(abs(det)) if det != 0 else -math.inf)


def eval(map_: HenonLikeMap, p) -> np.ndarray:  # noqa: A001
    return map_.eval(p)


def jacobian(map_: HenonLikeMap, p) -> np.ndarray:
    return map_.jacobian(p)


def _fast_orbit(a: float, b: float, embedded: bool, p0: np.ndarray, n: int, box: Box) -> np.ndarray:
    lo, hi = box.lo, box.hi
    x0, x1, y0, y1 = lo[0], hi[0], lo[1], hi[1]
    pts = np.empty((n + 1, 2))
    x, y = float(p0[0]), float(p0[1])
    pts[0] = x, y
    for k in range(1, n + 1):
        if embedded:
            x, y = x * x + a, x
        else:
            x, y = x * x + a - b * y, x
        if not (x0 <= x <= x1 and y0 <= y <= y1):
            raise EscapeError(f"orbit escaped the domain at step {k}", index=k, point=[x, y])
        pts[k] = x, y
    return pts


def iterate_orbit(map_: HenonLikeMap, p0, n: int) -> OrbitCocycle:
    """Orbit p0, F(p0), ..., F^n(p0) with per-step Jacobians.

    Raises:
        DomainError: p0 outside the domain
        EscapeError: an iterate left the domain (index = failing step)
    """
    p0 = as_points(p0)[0]
    if not map_.domain.contains(p0)[0]:
        raise DomainError(f"start point {p0.tolist()} outside domain of {map_.name}")
    params = map_.henon_parameters
    if params is not None:
        a, b = params
        embedded = isinstance(map_.chain[0], Embed1D)
        pts = _fast_orbit(a, b, embedded, p0, n, map_.domain)
        _, jacs, logdets = map_.chain[0].apply(pts[:-1])
        return OrbitCocycle(pts, jacs, logdets=logdets)

    pts = np.empty((n + 1, 2))
    jacs = np.empty((n, 2, 2))
    logdets = np.empty(n)
    pts[0] = p0
    for k in range(n):
        try:
            img, jac, ld = map_.apply(pts[k][None, :])
        except (DomainError, EscapeError) as exc:
            raise EscapeError(f"orbit escaped at step {k + 1}: {exc.message}", index=k + 1) from exc
        if not map_.domain.contains(img)[0]:
            raise EscapeError(f"orbit escaped the domain at step {k + 1}", index=k + 1, point=img[0].tolist())
        pts[k + 1], jacs[k], logdets[k] = img[0], jac[0], ld[0]
    return OrbitCocycle(pts, jacs, logdets=logdets)


def backward_orbit(map_: HenonLikeMap, p0, n: int) -> np.ndarray:
    """Points F^{-n}(p0), ..., F^{-1}(p0), p0 (oldest first) via the explicit inverse."""
    pts = np.empty((n + 1, 2))
    pts[n] = as_points(p0)[0]
    for k in range(n, 0, -1):
        img, _, _ = map_.apply_inverse(pts[k][None, :])
        if not map_.domain.contains(img)[0]:
            raise EscapeError(f"backward orbit escaped at step {n - k + 1}", index=-(n - k + 1))
        pts[k - 1] = img[0]
    return pts


def attractor_orbit(map_: HenonLikeMap, length: int, transient: int = 2000,
                    start: Sequence[float] = (0.0, 0.0)) -> OrbitCocycle:
    """Orbit record of `length` steps after discarding a transient."""
    warm = iterate_orbit(map_, start, transient)
    logger.debug(f"[ORBIT] transient of {transient} steps done for {map_.name}")
    return iterate_orbit(map_, warm.points[-1], length)


class Polyline:
    """Ordered plane vertices with cached cumulative arclength."""

    def __init__(self, vertices: Iterable[Sequence[float]]):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise DomainError("a polyline needs at least two plane vertices")
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
        if np.any(seg == 0):
            raise DomainError("consecutive polyline vertices must be distinct")
        self.vertices = v
        self.segment_lengths = seg
        self.arclength = np.concatenate(([0.0], np.cumsum(seg)))

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def point_at(self, s) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        return np.column_stack((np.interp(s, self.arclength, self.vertices[:, 0]),
                                np.interp(s, self.arclength, self.vertices[:, 1])))

    def tangent_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        idx = np.clip(np.searchsorted(self.arclength, s, side="right") - 1, 0, len(self.segment_lengths) - 1)
        d = self.vertices[idx + 1] - self.vertices[idx]
        return d / self.segment_lengths[idx][:, None]

    def resample(self, n: int) -> "Polyline":
        return Polyline(self.point_at(np.linspace(0.0, self.length, n)))

    def curvature(self) -> np.ndarray:
        """Turning angle per unit length at interior vertices."""
        d = np.diff(self.vertices, axis=0)
        ang = np.arctan2(d[:, 1], d[:, 0])
        turn = np.angle(np.exp(1j * np.diff(ang)))
        return turn / (0.5 * (self.segment_lengths[:-1] + self.segment_lengths[1:]))

    def distance(self, pts, chunk: int = 2048) -> np.ndarray:
        """Distance of each point to the polyline."""
        pts = as_points(pts)
        a = self.vertices[:-1]
        ab = np.diff(self.vertices, axis=0)
        ab2 = np.sum(ab * ab, axis=1)
        out = np.empty(len(pts))
        for start in range(0, len(pts), chunk):
            p = pts[start:start + chunk]
            ap = p[:, None, :] - a[None, :, :]
            t = np.clip(np.sum(ap * ab[None], axis=2) / ab2[None], 0.0, 1.0)
            d = ap - t[..., None] * ab[None]
            out[start:start + chunk] = np.sqrt(np.min(np.sum(d * d, axis=2), axis=1))
        return out

    def nearest(self, p) -> Tuple[float, float]:
        """(arclength parameter, distance) of the closest point to p."""
        p = as_points(p)[0]
        a = self.vertices[:-1]
        ab = np.diff(self.vertices, axis=0)
        t = np.clip(np.sum((p - a) * ab, axis=1) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        d = np.linalg.norm(p - (a + t[:, None] * ab), axis=1)
        i = int(np.argmin(d))
        return float(self.arclength[i] + t[i] * self.segment_lengths[i]), float(d[i])

    def hausdorff(self, other: "Polyline") -> float:
        return float(max(np.max(other.distance(self.vertices)), np.max(self.distance(other.vertices))))

    def map(self, map_: HenonLikeMap, check: bool = True) -> "Polyline":
        return Polyline(map_.eval_many(self.vertices, check=check))
