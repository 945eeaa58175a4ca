"""Normalised fixed densities of an Ulam matrix."""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NegativeDensity, NoConvergence, SingularSystem
from .ulam import DensityVector, UlamMatrix

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000


class Method(enum.Enum):
    POWER_CESARO = "power"
    DIRECT_NULLSPACE = "direct"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, Method):
            return value
        key = str(value).strip().lower()
        for m in cls:
            if key in (m.value, m.name.lower(), m.name.lower().replace("_", "")):
                return m
        if key in ("powercesaro", "cesaro"):
            return cls.POWER_CESARO
        if key in ("directnullspace", "nullspace"):
            return cls.DIRECT_NULLSPACE
        raise ValueError(f"unknown method {value!r}")


@dataclass(frozen=True)
class SolveReport:
    density: DensityVector
    iterations: int
    residual_l1: float
    method: Method
    monotonicity_defect: float
    averaged: bool = False

    def record(self) -> dict:
        return {
            "method": self.method.value,
            "k": self.density.k,
            "iterations": self.iterations,
            "residual_l1": self.residual_l1,
            "monotonicity_defect": self.monotonicity_defect,
            "averaged": self.averaged,
            "mass": self.density.mass(),
        }

    def to_json(self) -> str:
        return json.dumps(self.record(), sort_keys=True)


def _l1(v: np.ndarray) -> float:
    return float(np.abs(v).sum() / v.size)


def residual(M: UlamMatrix, f: np.ndarray) -> float:
    """``||f M - f||_1`` for a density vector ``f`` (cell width ``1/k``)."""
    return _l1(M.matrix.T @ f - f)


def _normalize(f: np.ndarray) -> np.ndarray:
    return f * (f.size / f.sum())


def _report(M, f, iterations, method, averaged=False):
    d = DensityVector(_normalize(f))
    return SolveReport(d, iterations, residual(M, d.values), method,
                       d.monotonicity_defect(), averaged)


def power_cesaro(M: UlamMatrix, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, f0=None) -> SolveReport:
    """Iterate ``f -> f M`` from the uniform density and track Cesaro averages.

    The Cesaro averages ``(1/s) sum_{m<=s} f^(m)`` always converge to an
    invariant density, but only at rate ``O(1/s)``.  When the plain iterates
    themselves settle (aperiodic case) their limit equals the Cesaro limit and
    is returned as soon as its residual drops below ``tol``.
    """
    A = M.matrix.T.tocsr()
    k = M.k
    f = np.ones(k) if f0 is None else np.asarray(f0, dtype=float).copy()
    f = _normalize(f)
    avg = np.zeros(k)
    prev_avg = None
    for s in range(1, max_iter + 1):
        g = A @ f
        g *= k / g.sum()
        step = _l1(g - f)  # residual of the previous iterate
        if step <= tol:
            return _report(M, f, s - 1, Method.POWER_CESARO)
        avg += (g - avg) / s
        if prev_avg is not None and _l1(avg - prev_avg) < tol:
            rep = _report(M, avg, s, Method.POWER_CESARO, averaged=True)
            if rep.residual_l1 <= tol:
                return rep
        prev_avg = avg.copy()
        f = g
    raise NoConvergence(f"no convergence in {max_iter} iterations (last step {step:.3e})")


def direct_nullspace(M: UlamMatrix, tol: float = DEFAULT_TOL) -> SolveReport:
    """Solve ``(M^T - I) f = 0`` with one equation replaced by ``sum f / k = 1``."""
    k = M.k
    A = (M.matrix.T - sp.identity(k, format="csr")).tolil()
    A[k - 1, :] = np.full(k, 1.0 / k)
    b = np.zeros(k)
    b[-1] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            f = spla.spsolve(A.tocsc(), b)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SingularSystem(str(exc)) from exc
    f = np.atleast_1d(f)
    if not np.all(np.isfinite(f)):
        raise SingularSystem("fixed-point system is singular")
    if np.min(f) < -tol:
        raise NegativeDensity(f"solution has entries down to {np.min(f):.3e}")
    f = np.clip(f, 0.0, None)
    rep = _report(M, f, 1, Method.DIRECT_NULLSPACE)
    if rep.residual_l1 > max(tol, 1e-9) * 1e3:
        raise SingularSystem(f"residual {rep.residual_l1:.3e}: system is ill-conditioned")
    return rep


def stationary_density(M: UlamMatrix, method="power", tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER) -> SolveReport:
    """Normalised fixed density ``f_{n,k}`` of the Ulam matrix ``M``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    method = Method.parse(method)
    if method is Method.POWER_CESARO:
        return power_cesaro(M, tol, max_iter)
    return direct_nullspace(M, tol)
