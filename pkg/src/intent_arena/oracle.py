"""Exact power control for per-user rate targets.

Two independent routes to the minimal power vector are provided and are
expected to agree:

* ``min_power_direct`` solves the linear system ``(I - F) p = u`` densely.
* ``min_power_iterative`` runs the Foschini-Miljanic update
  ``p_i <- gamma_i * (n + I_i) / g_i`` to its fixed point.

Here ``F_ij = gamma_i * g_j / g_i`` (zero diagonal) and ``u_i = gamma_i * n / g_i``.
The targets are jointly achievable iff the spectral radius of ``F`` is
below one; ``feasibility`` estimates it by power iteration.

Users with a zero target are dropped from the system and held at zero power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .env import LN2, InvalidArgument

#: spectral radius above which solutions are flagged ``ill_conditioned``
ILL_CONDITIONED_RHO = 0.95


class NumericFailure(ArithmeticError):
    """A numerical routine failed to converge or hit a singular system.

    ``last`` holds the last estimate (a scalar or an iterate) when one exists.
    """

    def __init__(self, message: str, last=None):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class RateTargets:
    """Per-user minimum rates in bit/s."""

    targets_bps: tuple

    def __post_init__(self):
        vals = tuple(float(r) for r in self.targets_bps)
        if any(not math.isfinite(r) or r < 0 for r in vals):
            raise InvalidArgument(f"rate targets must be finite and >= 0, got {vals}")
        object.__setattr__(self, "targets_bps", vals)

    def __len__(self):
        return len(self.targets_bps)


@dataclass(frozen=True)
class OracleSolution:
    feasible: bool
    min_powers_w: Optional[tuple]
    target_sinrs: tuple
    spectral_radius: float
    iterations: int = 0
    ill_conditioned: bool = False
    method: str = "direct"

    @property
    def total_power_w(self) -> Optional[float]:
        if self.min_powers_w is None:
            return None
        return math.fsum(self.min_powers_w)


def target_sinr(targets, bandwidth_hz: float) -> np.ndarray:
    """SINR needed for each target rate: ``2**(r/b) - 1``."""
    if not (math.isfinite(bandwidth_hz) and bandwidth_hz > 0):
        raise InvalidArgument(f"bandwidth_hz must be > 0, got {bandwidth_hz!r}")
    if not isinstance(targets, RateTargets):
        targets = RateTargets(tuple(targets))
    return np.array([math.expm1(r / bandwidth_hz * LN2) for r in targets.targets_bps])


def _validate(gains, noise_linear, gammas):
    g = np.asarray(gains, dtype=float).reshape(-1)
    gam = np.asarray(gammas, dtype=float).reshape(-1)
    if g.shape != gam.shape:
        raise InvalidArgument("gains and gammas differ in length")
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise InvalidArgument("gains must be finite and > 0")
    if np.any(~np.isfinite(gam)) or np.any(gam < 0):
        raise InvalidArgument("target SINRs must be finite and >= 0")
    if not (math.isfinite(noise_linear) and noise_linear > 0):
        raise InvalidArgument("noise_linear must be > 0")
    return g, gam


def gain_matrix(gains, gammas) -> np.ndarray:
    """Normalized cross-gain matrix ``F_ij = gamma_i g_j / g_i``, zero diagonal."""
    g = np.asarray(gains, dtype=float)
    gam = np.asarray(gammas, dtype=float)
    F = np.outer(gam / g, g)
    np.fill_diagonal(F, 0.0)
    return F


def spectral_radius(matrix, tol: float = 1e-12, max_iter: int = 100_000) -> tuple[float, int]:
    """Perron root of a nonnegative matrix by shifted power iteration.

    The shift ``s`` (an upper bound on the radius) makes ``F + sI`` primitive,
    which removes the oscillation plain power iteration shows on two-user
    (bipartite) matrices. Iteration stops once the Collatz-Wielandt bounds
    ``min(Ax/x) <= rho(A) <= max(Ax/x)`` agree to ``tol`` relative.
    Returns ``(rho, iterations)``.
    """
    F = np.asarray(matrix, dtype=float)
    n = F.shape[0]
    if n == 0 or not np.any(F):
        return 0.0, 0
    if np.any(F < 0):
        raise InvalidArgument("matrix must be nonnegative")
    shift = float(min(F.sum(axis=1).max(), F.sum(axis=0).max()))
    A = F + shift * np.eye(n)
    x = np.ones(n)
    lo = hi = shift
    for it in range(1, max_iter + 1):
        y = A @ x
        ratios = y / x
        lo, hi = float(ratios.min()), float(ratios.max())
        if hi - lo <= tol * hi:
            return max(0.5 * (lo + hi) - shift, 0.0), it
        x = y / y.max()
    raise NumericFailure(
        f"power iteration did not converge in {max_iter} iterations "
        f"(bounds {lo - shift:.6g}..{hi - shift:.6g})",
        last=0.5 * (lo + hi) - shift,
    )


def feasibility(gains, noise_linear: float, gammas, tol: float = 1e-12,
                max_iter: int = 100_000) -> tuple[bool, float]:
    """Whether the target SINRs are jointly achievable, and the spectral radius."""
    g, gam = _validate(gains, noise_linear, gammas)
    active = gam > 0
    rho, _ = spectral_radius(gain_matrix(g[active], gam[active]), tol=tol, max_iter=max_iter)
    return rho < 1.0, rho


def min_power_direct(gains, noise_linear: float, gammas) -> OracleSolution:
    """Componentwise-minimal power vector via a dense linear solve.

    Infeasible targets return a solution with ``feasible=False`` rather than
    raising; a numerically singular system raises :class:`NumericFailure`.
    """
    g, gam = _validate(gains, noise_linear, gammas)
    feasible, rho = feasibility(g, noise_linear, gam)
    sol_args = dict(target_sinrs=tuple(gam.tolist()), spectral_radius=rho,
                    ill_conditioned=ILL_CONDITIONED_RHO <= rho < 1.0, method="direct")
    if not feasible:
        return OracleSolution(feasible=False, min_powers_w=None, **sol_args)

    active = np.flatnonzero(gam > 0)
    powers = np.zeros_like(g)
    if active.size:
        ga, gama = g[active], gam[active]
        F = gain_matrix(ga, gama)
        u = gama * noise_linear / ga
        try:
            sub = np.linalg.solve(np.eye(active.size) - F, u)
        except np.linalg.LinAlgError as exc:
            raise NumericFailure(f"singular system at rho={rho:.6g}") from exc
        if not np.all(np.isfinite(sub)) or np.any(sub < 0):
            raise NumericFailure(f"solve produced an invalid power vector at rho={rho:.6g}", last=sub)
        powers[active] = sub
    return OracleSolution(feasible=True, min_powers_w=tuple(powers.tolist()), **sol_args)


def fm_step(gains: np.ndarray, noise_linear: float, gammas: np.ndarray,
            powers: np.ndarray) -> np.ndarray:
    """One simultaneous Foschini-Miljanic update of every user."""
    rx = gains * powers
    out = np.empty_like(powers)
    for i in range(powers.size):
        if gammas[i] == 0:
            out[i] = 0.0
            continue
        interf = math.fsum(float(rx[j]) for j in range(powers.size) if j != i)
        out[i] = gammas[i] * (noise_linear + interf) / gains[i]
    return out


def single_user_min_power(gains, noise_linear: float, gamma: float, powers, user: int) -> float:
    """Smallest power for ``user`` to reach ``gamma`` with everyone else held fixed."""
    if gamma == 0:
        return 0.0
    g = np.asarray(gains, dtype=float)
    rx = g * np.asarray(powers, dtype=float)
    interf = math.fsum(float(rx[j]) for j in range(g.size) if j != user)
    return float(gamma * (noise_linear + interf) / g[user])


def min_power_iterative(gains, noise_linear: float, gammas, start_powers=None,
                        tol: float = 1e-12, max_iter: int = 100_000,
                        divergence_factor: float = 1e6) -> OracleSolution:
    """Minimal power vector by Foschini-Miljanic fixed-point iteration.

    Converges when the largest componentwise change falls below
    ``tol * max(p)``. Divergence (infeasible targets) is declared once the
    total power exceeds ``divergence_factor`` times the starting total (or the
    first iterate's total when starting from zero). ``iterations`` counts the
    updates that moved the iterate; the final confirming update is not counted.
    """
    g, gam = _validate(gains, noise_linear, gammas)
    if tol <= 0:
        raise InvalidArgument("tol must be > 0")
    p = np.zeros_like(g) if start_powers is None else np.asarray(start_powers, dtype=float).copy()
    if p.shape != g.shape or np.any(~np.isfinite(p)) or np.any(p < 0):
        raise InvalidArgument("start_powers must be finite, >= 0 and of length K")

    _, rho = feasibility(g, noise_linear, gam)
    common = dict(target_sinrs=tuple(gam.tolist()), spectral_radius=rho,
                  ill_conditioned=ILL_CONDITIONED_RHO <= rho < 1.0, method="iterative")

    ceiling = divergence_factor * p.sum() if p.sum() > 0 else None
    for it in range(1, max_iter + 1):
        nxt = fm_step(g, noise_linear, gam, p)
        total = nxt.sum()
        if ceiling is None:
            ceiling = divergence_factor * total if total > 0 else math.inf
        if not math.isfinite(total) or total > ceiling:
            return OracleSolution(feasible=False, min_powers_w=None, iterations=it, **common)
        scale = nxt.max() if nxt.size else 0.0
        done = np.max(np.abs(nxt - p)) <= tol * scale if scale > 0 else True
        p = nxt
        if done:
            return OracleSolution(feasible=True, min_powers_w=tuple(p.tolist()),
                                  iterations=it - 1, **common)
    raise NumericFailure(f"fixed-point iteration did not settle in {max_iter} iterations", last=p)
