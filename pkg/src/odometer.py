# -*- coding: utf-8 -*-
"""Combinatorics of the renormalization pieces.

The adding machine on ∏ Z/r_n Z, the projection of limit-set points onto it
through return-time bookkeeping along the orbit of c1, blow-up total orders
and the ordering checks (combinatorial connectedness, extremal points, order
preservation) built on an order oracle.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from src.critical import CriticalOrbit, strong_stable_batch
from src.dynamics import HenonLikeMap, as_points
from src.errors import DomainError, EscapeError, MembershipError, OrderOracleError

logger = logging.getLogger(__name__)

LT, EQ, GT = "lt", "eq", "gt"
PLAIN, BLOWUP = "plain", "blowup"
MAX_AMBIGUOUS_FRACTION = 0.05


# -- adding machine -----------------------------------------------------------------------

@dataclass(frozen=True)
class OdometerState:
    """Digits a_1..a_depth (least significant first) with 0 <= a_n < r_n."""

    digits: Tuple[int, ...]
    radices: Tuple[int, ...] = ()

    def __post_init__(self):
        digits = tuple(int(d) for d in self.digits)
        radices = tuple(int(r) for r in self.radices) or (2,) * len(digits)
        if len(radices) != len(digits):
            raise ValueError(f"{len(digits)} digits but {len(radices)} radices")
        for n, (d, r) in enumerate(zip(digits, radices), start=1):
            if r < 2 or not 0 <= d < r:
                raise ValueError(f"digit a_{n} = {d} outside Z/{r}Z")
        object.__setattr__(self, "digits", digits)
        object.__setattr__(self, "radices", radices)

    @classmethod
    def zero(cls, depth: int, radices: Optional[Sequence[int]] = None) -> "OdometerState":
        return cls((0,) * depth, tuple(radices or ()))

    @classmethod
    def from_integer(cls, value: int, radices: Sequence[int]) -> "OdometerState":
        """Mixed-radix encoding of value mod ∏ r_n."""
        digits = []
        for r in radices:
            value, d = divmod(value, r)
            digits.append(d)
        return cls(tuple(digits), tuple(radices))

    @property
    def depth(self) -> int:
        return len(self.digits)

    @property
    def modulus(self) -> int:
        return math.prod(self.radices)

    def to_integer(self) -> int:
        value = 0
        for d, r in zip(reversed(self.digits), reversed(self.radices)):
            value = value * r + d
        return value

    def truncate(self, depth: int) -> "OdometerState":
        return OdometerState(self.digits[:depth], self.radices[:depth])

    def to_dict(self) -> Dict[str, Any]:
        return {"radices": list(self.radices), "digits": "".join(map(str, self.digits))
                if all(r <= 10 for r in self.radices) else list(self.digits)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OdometerState":
        digits = data["digits"]
        if isinstance(digits, str):
            digits = [int(ch) for ch in digits]
        return cls(tuple(digits), tuple(data["radices"]))

    def __str__(self) -> str:
        return "".join(map(str, self.digits))


def odometer_add(s: OdometerState) -> OdometerState:
    """S(a) = (0, ..., 0, a_n + 1, a_{n+1}, ...) at the first non-maximal digit; all-max wraps to zero."""
    digits = list(s.digits)
    for n, r in enumerate(s.radices):
        if digits[n] + 1 < r:
            digits[n] += 1
            return OdometerState(tuple(digits), s.radices)
        digits[n] = 0
    return OdometerState(tuple(digits), s.radices)


@dataclass(frozen=True)
class PieceIndex:
    """Piece Λ^n_i, 1 <= i <= R_n = 2^n."""

    n: int
    i: int

    def __post_init__(self):
        if self.n < 0 or not 1 <= self.i <= 2 ** self.n:
            raise ValueError(f"piece index ({self.n}, {self.i}) out of range")

    @classmethod
    def of_orbit_index(cls, m: int, n: int) -> "PieceIndex":
        """Piece of depth n holding c_{m+1}."""
        return cls(n, m % 2 ** n + 1)

    def parent(self) -> "PieceIndex":
        if self.n == 0:
            raise ValueError("the depth-0 piece has no parent")
        return PieceIndex(self.n - 1, (self.i - 1) % 2 ** (self.n - 1) + 1)

    def contains(self, other: "PieceIndex") -> bool:
        return other.n >= self.n and (other.i - 1) % 2 ** self.n == self.i - 1


# -- projection onto the odometer ---------------------------------------------------------

class PieceTracker:
    """Orbit c_1, ..., c_K of the critical value with kd-tree lookup.

    A point belongs to Λ^n_i when its nearest tracked orbit point c_{m+1}
    satisfies m ≡ i - 1 mod 2^n; the assignment is ambiguous when a point of
    another residue is within `separation` times the nearest distance.
    """

    def __init__(self, map_: HenonLikeMap, points: np.ndarray, separation: float = 4.0,
                 resolution: float = math.inf, neighbors: int = 8):
        self.map = map_
        self.points = as_points(points)
        self.tree = cKDTree(self.points)
        self.separation = separation
        self.resolution = resolution
        self.neighbors = min(neighbors, len(self.points))

    @classmethod
    def from_critical_orbit(cls, map_: HenonLikeMap, co: CriticalOrbit, length: Optional[int] = None,
                            **kwargs: Any) -> "PieceTracker":
        pts = co.orbit.points[co.orbit.offset + 1:]
        return cls(map_, pts if length is None else pts[:length], **kwargs)

    def __len__(self) -> int:
        return len(self.points)

    def locate_many(self, pts, depth: int) -> Tuple[np.ndarray, np.ndarray]:
        """Orbit indices of the nearest tracked points and an ambiguity mask."""
        pts = as_points(pts)
        dist, idx = self.tree.query(pts, k=self.neighbors)
        dist = dist.reshape(len(pts), -1)
        idx = idx.reshape(len(pts), -1)
        modulus = 2 ** depth
        residue = idx % modulus
        other = residue != residue[:, :1]
        masked = np.where(other, dist, np.inf)
        nearest_other = masked.min(axis=1)
        ambiguous = (nearest_other < self.separation * dist[:, 0]) | (dist[:, 0] > self.resolution)
        return idx[:, 0], ambiguous

    def project(self, p, depth: int) -> OdometerState:
        """
        Odometer state of p at the given depth.

        Raises:
            MembershipError: the piece assignment is ambiguous at this resolution
        """
        idx, ambiguous = self.locate_many(p, depth)
        if ambiguous[0]:
            raise MembershipError(f"piece of {as_points(p)[0].tolist()} ambiguous at depth {depth}",
                                  depth=depth)
        return OdometerState.from_integer(int(idx[0]), (2,) * depth)


def project_pi(tracker: PieceTracker, p, depth: int) -> OdometerState:
    return tracker.project(p, depth)


@dataclass
class SemiconjugacyReport:
    depth: int
    checked: int
    violations: int
    ambiguous: int
    escaped: int

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def semiconjugacy_check(tracker: PieceTracker, sample, depth: int,
                        max_ambiguous: float = MAX_AMBIGUOUS_FRACTION) -> SemiconjugacyReport:
    """Count points with π(F(p)) != S(π(p)).

    Points whose own or image assignment is ambiguous are left out of the count.

    Raises:
        MembershipError: more than `max_ambiguous` of the sample is ambiguous
    """
    pts = as_points(sample)
    try:
        images = tracker.map.eval_many(pts)
        escaped = 0
    except (DomainError, EscapeError):
        inside = tracker.map.domain.contains(pts)
        pts = pts[inside]
        images = tracker.map.eval_many(pts, check=False)
        finite = np.all(np.isfinite(images), axis=1)
        pts, images = pts[finite], images[finite]
        escaped = int(len(sample) - len(pts))
    idx, amb = tracker.locate_many(pts, depth)
    idx_img, amb_img = tracker.locate_many(images, depth)
    usable = ~(amb | amb_img)
    n_ambiguous = int(np.count_nonzero(~usable))
    if len(pts) == 0 or n_ambiguous > max_ambiguous * len(pts):
        raise MembershipError(f"{n_ambiguous} of {len(pts)} piece assignments ambiguous at depth {depth}",
                              depth=depth, ambiguous=n_ambiguous, sample=int(len(pts)))
    modulus = 2 ** depth
    violations = int(np.count_nonzero((idx_img[usable] - idx[usable] - 1) % modulus))
    report = SemiconjugacyReport(depth, int(np.count_nonzero(usable)), violations, n_ambiguous, escaped)
    status = "✅" if violations == 0 else "❌"
    logger.info(f"{status} [ODOMETER] depth {depth}: {violations} violations over {report.checked} points "
                f"({report.ambiguous} ambiguous)")
    return report


# -- blow-up orders -------------------------------------------------------------------------

@dataclass
class Element:
    kind: str
    payload: Any = None
    child: Optional["OrderNode"] = None


@dataclass
class OrderNode:
    """A totally ordered list; blow-up elements stand for the ordered set replacing them."""

    elements: List[Element] = field(default_factory=list)


class BlowupOrder:
    """Iterated blow-up of a base order together with its completion.

    Leaves are root-to-leaf position paths. A plain element ends a path; a
    blow-up element whose set is not expanded ends the path of a limit point
    (its chain u_0, u_1, ... truncated at the depth of the tree).
    """

    def __init__(self, root: OrderNode):
        self.root = root
        self._validate(root, ())

    def _validate(self, node: OrderNode, path: Tuple[int, ...]) -> None:
        if not node.elements:
            raise ValueError(f"empty ordered set at {path}")
        for pos, element in enumerate(node.elements):
            if element.kind not in (PLAIN, BLOWUP):
                raise ValueError(f"unknown element kind '{element.kind}' at {path + (pos,)}")
            if element.kind == PLAIN and element.child is not None:
                raise ValueError(f"plain element with children at {path + (pos,)}")
            if element.child is not None:
                self._validate(element.child, path + (pos,))

    def leaves(self) -> List[Tuple[int, ...]]:
        out: List[Tuple[int, ...]] = []

        def walk(node: OrderNode, path: Tuple[int, ...]) -> None:
            for pos, element in enumerate(node.elements):
                if element.child is None:
                    out.append(path + (pos,))
                else:
                    walk(element.child, path + (pos,))
        walk(self.root, ())
        return out

    def element(self, path: Sequence[int]) -> Element:
        node = self.root
        element = None
        for pos in path:
            if node is None:
                raise KeyError(f"path {tuple(path)} runs past a leaf")
            element = node.elements[pos]
            node = element.child
        if element is None or element.child is not None:
            raise KeyError(f"{tuple(path)} is not a leaf")
        return element

    def is_limit(self, path: Sequence[int]) -> bool:
        return self.element(path).kind == BLOWUP

    def __len__(self) -> int:
        return len(self.leaves())


def _cmp(a: int, b: int) -> str:
    return LT if a < b else GT if a > b else EQ


def blowup_compare(order: BlowupOrder, x: Sequence[int], y: Sequence[int]) -> str:
    """Compare two leaves of an iterated blow-up (limit points included).

    At each level the two leaves sit in the same ordered set: both plain
    compare by position; a plain element against a blown-up u compares with u;
    leaves inside distinct blow-ups Y_u, Y_v compare u with v; leaves inside
    the same Y_u compare inside it at the next level. Two limit points compare
    at the first level where their chains differ.
    """
    order.element(x)
    order.element(y)
    node = order.root
    level = 0
    while True:
        ux, uy = x[level], y[level]
        ex, ey = node.elements[ux], node.elements[uy]
        x_inside = ex.kind == BLOWUP and level + 1 < len(x)
        y_inside = ey.kind == BLOWUP and level + 1 < len(y)
        # plain or limit ends compare by position, as do distinct blow-ups
        if not (x_inside and y_inside) or ux != uy:
            return _cmp(ux, uy)
        node = ex.child
        level += 1


def random_blowup_order(rng: np.random.Generator, max_depth: int = 6, max_children: int = 5,
                        blowup_prob: float = 0.35, max_leaves: int = 200) -> BlowupOrder:
    """Random finite tree; unexpanded blow-ups at the depth limit become limit points."""
    budget = [max_leaves]

    def build(depth: int) -> OrderNode:
        size = int(rng.integers(1, max_children + 1))
        elements = []
        for _ in range(size):
            if budget[0] <= 0 and elements:
                break
            if rng.random() < blowup_prob:
                if depth < max_depth and budget[0] > 1:
                    elements.append(Element(BLOWUP, child=build(depth + 1)))
                else:
                    budget[0] -= 1
                    elements.append(Element(BLOWUP))
            else:
                budget[0] -= 1
                elements.append(Element(PLAIN, payload=int(rng.integers(0, 10 ** 6))))
        return OrderNode(elements)

    return BlowupOrder(build(0))


@dataclass
class OrderAxiomReport:
    leaves: int
    reflexivity: int = 0
    antisymmetry: int = 0
    totality: int = 0
    transitivity: int = 0

    @property
    def violations(self) -> int:
        return self.reflexivity + self.antisymmetry + self.totality + self.transitivity

    def to_dict(self) -> Dict[str, Any]:
        return {**self.__dict__, "violations": self.violations}


_FLIP = {LT: GT, GT: LT, EQ: EQ}


def check_order_axioms(order: BlowupOrder, rng: Optional[np.random.Generator] = None,
                       triples: int = 1000) -> OrderAxiomReport:
    """Exhaustive pairwise check against the sorted leaf sequence, plus sampled triples.

    Every pair agreeing with one linear arrangement makes the relation that
    arrangement, so transitivity over all triples follows from the pairwise pass.
    """
    leaves = order.leaves()
    report = OrderAxiomReport(len(leaves))
    cmp = lambda a, b: {LT: -1, EQ: 0, GT: 1}[blowup_compare(order, a, b)]
    ranked = sorted(leaves, key=functools.cmp_to_key(cmp))
    for i, a in enumerate(ranked):
        if blowup_compare(order, a, a) != EQ:
            report.reflexivity += 1
        for b in ranked[i + 1:]:
            ab, ba = blowup_compare(order, a, b), blowup_compare(order, b, a)
            if ab == EQ:
                report.totality += 1
            if ba != _FLIP[ab]:
                report.antisymmetry += 1
            if ab != LT:
                report.transitivity += 1
    if rng is not None and len(leaves) >= 3:
        for _ in range(triples):
            a, b, c = (leaves[k] for k in rng.choice(len(leaves), size=3, replace=False))
            if blowup_compare(order, a, b) == LT and blowup_compare(order, b, c) == LT \
                    and blowup_compare(order, a, c) != LT:
                report.transitivity += 1
    return report


# -- order oracles --------------------------------------------------------------------------

def symbolic_order_key(state: OdometerState) -> int:
    """Position of a binary state in the order of the nested pieces.

    Each 1-digit reverses the orientation of the deeper levels, so the
    position digits are the prefix parities of the state digits.
    """
    key = 0
    parity = 0
    for d in state.digits:
        parity ^= d
        key = 2 * key + parity
    return key


class StrongStableOrder:
    """Order points by where their strong-stable leaves cross the line y = y_ref.

    Leaves are followed as graphs over y with RK4; the order is refused when a
    leaf turns too horizontal or two distinct points land on the same crossing.
    """

    def __init__(self, map_: HenonLikeMap, y_ref: float, horizon: int = 12, steps: int = 32,
                 min_slope: float = 0.1, resolution: float = 1e-13):
        self.map = map_
        self.y_ref = float(y_ref)
        self.horizon = horizon
        self.steps = steps
        self.min_slope = min_slope
        self.resolution = resolution

    def _slope(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        e = strong_stable_batch(self.map, np.column_stack((x, y)), self.horizon)
        if np.any(np.abs(e[:, 1]) < self.min_slope):
            raise OrderOracleError("strong-stable leaf too close to horizontal for the projection",
                                   min_component=float(np.min(np.abs(e[:, 1]))))
        return e[:, 0] / e[:, 1]

    def keys(self, pts) -> np.ndarray:
        """
        Crossing abscissae of the leaves through the points.

        Raises:
            OrderOracleError: leaf too flat or distinct points sharing a crossing
        """
        pts = as_points(pts)
        x, y = pts[:, 0].copy(), pts[:, 1].copy()
        h = (self.y_ref - y) / self.steps
        for _ in range(self.steps):
            k1 = self._slope(x, y)
            k2 = self._slope(x + 0.5 * h * k1, y + 0.5 * h)
            k3 = self._slope(x + 0.5 * h * k2, y + 0.5 * h)
            k4 = self._slope(x + h * k3, y + h)
            x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            y = y + h
        self._check_ties(pts, x)
        return x

    def _check_ties(self, pts: np.ndarray, keys: np.ndarray) -> None:
        order = np.argsort(keys, kind="stable")
        gaps = np.diff(keys[order])
        apart = np.linalg.norm(np.diff(pts[order], axis=0), axis=1) > 1e-9
        ties = np.count_nonzero((gaps <= self.resolution) & apart)
        if ties:
            raise OrderOracleError(f"{ties} distinct points share a strong-stable crossing", ties=int(ties))


@dataclass
class OrderedSample:
    """Orbit points c_{m+1} (index m) with their order keys."""

    indices: np.ndarray
    keys: np.ndarray
    points: Optional[np.ndarray] = None

    @classmethod
    def from_tracker(cls, tracker: PieceTracker, oracle: StrongStableOrder,
                     count: Optional[int] = None) -> "OrderedSample":
        pts = tracker.points if count is None else tracker.points[:count]
        return cls(np.arange(len(pts)), oracle.keys(pts), pts)

    @classmethod
    def symbolic(cls, depth: int) -> "OrderedSample":
        idx = np.arange(2 ** depth)
        keys = np.array([symbolic_order_key(OdometerState.from_integer(int(m), (2,) * depth)) for m in idx])
        return cls(idx, keys.astype(float))

    def in_piece(self, piece: PieceIndex) -> np.ndarray:
        return self.indices % 2 ** piece.n == piece.i - 1


def combinatorial_components(sample: OrderedSample, m: int, n: int, i: int, k: int) -> int:
    """Maximal order-intervals of the Λ^m_i sample occupied by Λ^n_{i + k R_m}."""
    if not 0 <= m < n:
        raise ValueError(f"need 0 <= m < n, got m={m}, n={n}")
    if not 0 <= k < 2 ** (n - m):
        raise ValueError(f"k={k} outside [0, {2 ** (n - m)})")
    outer = PieceIndex(m, i)
    inner = PieceIndex(n, i + k * 2 ** m)
    sel = sample.in_piece(outer)
    keys = sample.keys[sel]
    marked = (sample.indices[sel] % 2 ** n == inner.i - 1)[np.argsort(keys, kind="stable")]
    if not np.any(marked):
        return 0
    return int(marked[0]) + int(np.count_nonzero(marked[1:] & ~marked[:-1]))


def connectedness_table(sample: OrderedSample, max_depth: int, max_gap: int = 6) -> List[Dict[str, int]]:
    """Rows (m, n, i, k, components) for every piece pair with n - m <= max_gap."""
    rows = []
    for m in range(max_depth):
        for n in range(m + 1, min(max_depth, m + max_gap) + 1):
            for i in range(1, 2 ** m + 1):
                for k in range(2 ** (n - m)):
                    rows.append({"m": m, "n": n, "i": i, "k": k,
                                 "components": combinatorial_components(sample, m, n, i, k)})
    return rows


class ExtremalPoints(NamedTuple):
    low_index: int
    high_index: int
    low: Optional[np.ndarray]
    high: Optional[np.ndarray]


def extremal_points(sample: OrderedSample, n: int) -> ExtremalPoints:
    """Order-minimal and order-maximal sample points of Λ^n_1."""
    sel = np.nonzero(sample.in_piece(PieceIndex(n, 1)))[0]
    if len(sel) == 0:
        raise OrderOracleError(f"no sample points in the depth-{n} critical-value piece", depth=n)
    lo = sel[np.argmin(sample.keys[sel])]
    hi = sel[np.argmax(sample.keys[sel])]
    pts = sample.points
    return ExtremalPoints(int(sample.indices[lo]), int(sample.indices[hi]),
                          None if pts is None else pts[lo], None if pts is None else pts[hi])


@dataclass
class OrientationReport:
    depth: int
    orientations: Dict[int, int]
    critical_piece: int

    @property
    def passed(self) -> bool:
        return all(o != 0 for i, o in self.orientations.items() if i != self.critical_piece)

    def to_dict(self) -> Dict[str, Any]:
        return {"depth": self.depth, "orientations": {str(k): v for k, v in self.orientations.items()},
                "critical_piece": self.critical_piece, "passed": self.passed}


def order_preservation_check(sample: OrderedSample, n: int) -> OrientationReport:
    """Orientation of F on each depth-n piece: +1 preserving, -1 reversing, 0 mixed.

    The image of c_{m+1} is c_{m+2}; the piece Λ^n_{R_n} holding c_0 is where
    the fold is expected.
    """
    position = {int(m): key for m, key in zip(sample.indices, sample.keys)}
    out = {}
    for i in range(1, 2 ** n + 1):
        sel = sample.in_piece(PieceIndex(n, i)) & np.isin(sample.indices + 1, sample.indices)
        if np.count_nonzero(sel) < 2:
            continue
        keys = sample.keys[sel]
        order = np.argsort(keys, kind="stable")
        images = np.array([position[int(m) + 1] for m in sample.indices[sel][order]])
        steps = np.sign(np.diff(images))
        out[i] = 1 if np.all(steps > 0) else -1 if np.all(steps < 0) else 0
    report = OrientationReport(n, out, 2 ** n)
    logger.info(f"📊 [ORDER] depth {n}: {sum(1 for v in out.values() if v)} uniform pieces, "
                f"critical piece orientation {out.get(2 ** n, 'n/a')}")
    return report


def fiber_diameters(sample: OrderedSample, depths: Iterable[int]) -> Dict[str, Any]:
    """Largest piece diameter per depth and the fitted exponential decay rate."""
    if sample.points is None:
        raise ValueError("fiber diameters need sample points")
    rows = []
    for n in depths:
        best = 0.0
        for i in range(1, 2 ** n + 1):
            pts = sample.points[sample.in_piece(PieceIndex(n, i))]
            if len(pts) > 1:
                best = max(best, float(math.hypot(*np.ptp(pts, axis=0))))
        rows.append({"depth": int(n), "max_diameter": best})
    usable = [(r["depth"], math.log(r["max_diameter"])) for r in rows if r["max_diameter"] > 0]
    rate = math.nan
    if len(usable) >= 2:
        rate = float(stats.linregress(*zip(*usable)).slope)
    return {"rows": rows, "log_decay_rate": rate}
