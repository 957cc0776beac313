# -*- coding: utf-8 -*-
"""Orbit records with cached Jacobians and their invariant splitting."""

import logging
import math
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

REORTHONORMALIZE_EVERY = 16


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _log_add(la: np.ndarray, lb: np.ndarray, cross: np.ndarray) -> np.ndarray:
    """log sqrt(A^2 + B^2 + 2 A B cross) from log|A|, log|B| (signs folded into `cross`)."""
    hi = np.maximum(la, lb)
    with np.errstate(invalid="ignore", over="ignore", under="ignore"):
        ra = np.exp(la - hi)
        rb = np.exp(lb - hi)
        inner = ra * ra + rb * rb + 2.0 * ra * rb * cross
    inner = np.maximum(inner, 0.0)
    with np.errstate(divide="ignore"):
        out = hi + 0.5 * np.log(inner)
    return np.where(np.isneginf(hi), -np.inf, out)


class OrbitCocycle:
    """Orbit p_0..p_n with per-step Jacobians J_k = DF(p_k).

    `offset` is the index of the reference point when the record is a
    two-sided orbit (so p_{offset} plays the role of time 0).
    """

    def __init__(self, points: np.ndarray, jacs: np.ndarray, logdets: Optional[np.ndarray] = None,
                 offset: int = 0):
        self.points = np.asarray(points, dtype=float)
        self.jacs = np.asarray(jacs, dtype=float)
        if self.points.shape != (len(self.jacs) + 1, 2) or self.jacs.shape[1:] != (2, 2):
            raise ValueError("points must have one more entry than jacs")
        if logdets is None:
            det = self.jacs[:, 0, 0] * self.jacs[:, 1, 1] - self.jacs[:, 0, 1] * self.jacs[:, 1, 0]
            with np.errstate(divide="ignore"):
                logdets = np.log(np.abs(det))
        self.logdets = np.asarray(logdets, dtype=float)
        self.offset = int(offset)
        with np.errstate(invalid="ignore"):
            self.cum_logdet = np.concatenate(([0.0], np.cumsum(self.logdets)))

    def __len__(self) -> int:
        return len(self.jacs)

    @classmethod
    def constant(cls, matrix, n: int, point=(0.0, 0.0)) -> "OrbitCocycle":
        """Synthetic cocycle repeating one matrix along a fixed point."""
        m = np.asarray(matrix, dtype=float)
        pts = np.tile(np.asarray(point, dtype=float), (n + 1, 1))
        return cls(pts, np.tile(m, (n, 1, 1)))

    def with_offset(self, offset: int) -> "OrbitCocycle":
        return OrbitCocycle(self.points, self.jacs, self.logdets, offset)

    # -- products -----------------------------------------------------------

    def product(self, start: int, n: int) -> np.ndarray:
        """J_{start+n-1} ... J_{start} (n >= 0)."""
        self._check_range(start, n)
        out = np.eye(2)
        for k in range(start, start + n):
            out = self.jacs[k] @ out
        return out

    def inverse_product(self, start: int, n: int) -> np.ndarray:
        """D F^{-n} at p_start, i.e. J_{start-n}^{-1} ... J_{start-1}^{-1}."""
        self._check_range(start - n, n)
        out = np.eye(2)
        for k in range(start - 1, start - n - 1, -1):
            out = np.linalg.inv(self.jacs[k]) @ out
        return out

    def log_det_sum(self, start: int, n: int) -> float:
        self._check_range(start, n)
        seg = self.logdets[start:start + n]
        if np.any(np.isneginf(seg)):
            return -math.inf
        return math.fsum(seg)

    def log_singular_values(self, start: int = 0, n: Optional[int] = None) -> Tuple[float, float]:
        """log σ1 ≥ log σ2 of the product over [start, start+n).

        Accumulates the triangular factor of a QR decomposition, re-orthonormalized
        every 16 steps; log σ2 is taken from the determinant identity.
        """
        n = len(self) - start if n is None else n
        self._check_range(start, n)
        if n == 0:
            return 0.0, 0.0
        a = [1.0, 0.0, 0.0, 1.0]  # row-major; columns are the current basis images
        l11 = l22 = 0.0
        s22 = 1.0
        t = 0.0
        chunk_logdet = 0.0
        chunk_sign = 1.0
        jacs = self.jacs
        logdets = self.logdets
        for idx, k in enumerate(range(start, start + n), start=1):
            j00, j01, j10, j11 = jacs[k, 0, 0], jacs[k, 0, 1], jacs[k, 1, 0], jacs[k, 1, 1]
            a = [j00 * a[0] + j01 * a[2], j00 * a[1] + j01 * a[3],
                 j10 * a[0] + j11 * a[2], j10 * a[1] + j11 * a[3]]
            chunk_logdet += logdets[k]
            chunk_sign *= math.copysign(1.0, j00 * j11 - j01 * j10)
            if idx % REORTHONORMALIZE_EVERY == 0 or idx == n:
                c1x, c1y = a[0], a[2]
                r11 = math.hypot(c1x, c1y)
                if r11 == 0.0:
                    return -math.inf, -math.inf
                q1x, q1y = c1x / r11, c1y / r11
                r12 = q1x * a[1] + q1y * a[3]
                # det(A) = r11 * r22 with q2 = rot90(q1); det(A) includes det(Q_prev) = 1
                log_r22 = chunk_logdet - math.log(r11)
                sign_r22 = chunk_sign
                # accumulate R_new @ R_acc in scaled form
                if t != 0.0 or r12 != 0.0:
                    ratio = s22 * math.exp(l22 - l11) if l22 - l11 > -745 else 0.0
                    t = t + (r12 / r11) * ratio
                l11 += math.log(r11)
                l22 += log_r22
                s22 *= sign_r22
                a = [q1x, -q1y, q1y, q1x]
                chunk_logdet = 0.0
                chunk_sign = 1.0
        rho = s22 * math.exp(l22 - l11) if l22 - l11 > -745 else 0.0
        sigma = np.linalg.svd(np.array([[1.0, t], [0.0, rho]]), compute_uv=False)
        log_s1 = l11 + math.log(sigma[0])
        total = self.log_det_sum(start, n)
        return log_s1, total - log_s1

    # -- invariant splitting --------------------------------------------------

    @cached_property
    def _center(self) -> Tuple[np.ndarray, np.ndarray]:
        n = len(self)
        dirs = np.empty((n + 1, 2))
        nus = np.empty(n)
        e = np.array([math.cos(0.3), math.sin(0.3)])
        dirs[0] = e
        for k in range(n):
            w = self.jacs[k] @ e
            nrm = math.hypot(w[0], w[1])
            if nrm > 0:
                e = w / nrm
            nus[k] = nrm
            dirs[k + 1] = e
        return dirs, nus

    @cached_property
    def _stable(self) -> Tuple[np.ndarray, np.ndarray]:
        n = len(self)
        v = np.array([math.cos(1.1), math.sin(1.1)])
        rows = np.empty((n + 1, 2))
        rows[n] = v
        for k in range(n - 1, -1, -1):
            w = self.jacs[k].T @ v
            nrm = math.hypot(w[0], w[1])
            if nrm > 0:
                v = w / nrm
            rows[k] = v
        ess = np.column_stack((-rows[:, 1], rows[:, 0]))
        # J_k e_ss_k is parallel to e_ss_{k+1} by construction
        mus = np.einsum("kij,kj,ki->k", self.jacs, ess[:-1], ess[1:])
        return ess, mus

    def center_direction(self, index: int) -> np.ndarray:
        """Forward-pushed direction at p_index (the image of the past)."""
        return self._center[0][index].copy()

    def center_log_stretch(self, start: int, n: int) -> float:
        """log‖DF^n E^c‖ at p_start."""
        self._check_range(start, n)
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(self._center[1][start:start + n])))

    def strong_stable_direction(self, index: int) -> np.ndarray:
        """Most contracted direction of the future products at p_index."""
        return self._stable[0][index].copy()

    def splitting_angles(self) -> np.ndarray:
        """Unsigned angle between E^ss and E^c at every orbit point."""
        ess = self._stable[0]
        ec = self._center[0]
        cross = np.abs(ess[:, 0] * ec[:, 1] - ess[:, 1] * ec[:, 0])
        dot = np.abs(np.sum(ess * ec, axis=1))
        return np.arctan2(cross, dot)

    def _decompose(self, index: int, direction) -> Tuple[float, float]:
        e = _unit(np.asarray(direction, dtype=float))
        ess = self._stable[0][index]
        ec = self._center[0][index]
        d = ess[0] * ec[1] - ess[1] * ec[0]
        alpha = (e[0] * ec[1] - e[1] * ec[0]) / d
        beta = (ess[0] * e[1] - ess[1] * e[0]) / d
        return alpha, beta

    def log_norms_forward(self, index: int, direction, n_max: int) -> np.ndarray:
        """log‖DF^n E‖ for n = 1..n_max at p_index (E unit)."""
        self._check_range(index, n_max)
        alpha, beta = self._decompose(index, direction)
        ess, mus = self._stable
        ec, nus = self._center
        with np.errstate(divide="ignore"):
            lmu = np.cumsum(np.log(np.abs(mus[index:index + n_max])))
            lnu = np.cumsum(np.log(nus[index:index + n_max]))
            sign_mu = np.cumprod(np.sign(mus[index:index + n_max]))
            la = math.log(abs(alpha)) + lmu if alpha != 0 else np.full(n_max, -np.inf)
            lb = math.log(abs(beta)) + lnu if beta != 0 else np.full(n_max, -np.inf)
        cross = np.sign(alpha) * np.sign(beta) * sign_mu * np.sum(
            ess[index + 1:index + n_max + 1] * ec[index + 1:index + n_max + 1], axis=1)
        return _log_add(la, lb, cross)

    def log_norms_backward(self, index: int, direction, m_max: int) -> np.ndarray:
        """log‖DF^{-m} E‖ for m = 1..m_max at p_index (E unit)."""
        self._check_range(index - m_max, m_max)
        alpha, beta = self._decompose(index, direction)
        ess, mus = self._stable
        ec, nus = self._center
        with np.errstate(divide="ignore"):
            back_mu = -np.cumsum(np.log(np.abs(mus[index - m_max:index][::-1])))
            back_nu = -np.cumsum(np.log(nus[index - m_max:index][::-1]))
            sign_mu = np.cumprod(np.sign(mus[index - m_max:index][::-1]))
            la = math.log(abs(alpha)) + back_mu if alpha != 0 else np.full(m_max, -np.inf)
            lb = math.log(abs(beta)) + back_nu if beta != 0 else np.full(m_max, -np.inf)
        targets = np.arange(index - 1, index - m_max - 1, -1)
        cross = np.sign(alpha) * np.sign(beta) * sign_mu * np.sum(ess[targets] * ec[targets], axis=1)
        return _log_add(la, lb, cross)

    def _check_range(self, start: int, n: int) -> None:
        if start < 0 or n < 0 or start + n > len(self):
            raise IndexError(f"range [{start}, {start + n}) outside orbit record of length {len(self)}")
