"""Minimal-transmit-power downlink beamforming under per-user SINR targets
and per-RRH power caps.

The solver runs the classical uplink-downlink duality fixed point for
sum-power minimization:

  1. iterate virtual uplink powers  q_i <- iota_i / (g_i^H S_i^{-1} g_i)
     from q = 0, where S_i is the noise-plus-interference covariance seen by
     user i under MMSE receive vectors (g_i is the conjugated channel column);
  2. take the unit-norm MMSE receivers as downlink beam directions;
  3. solve the linear system that meets every downlink SINR target with
     equality for the downlink power scalars.

The map in step 1 is a standard interference function: starting from zero it
is componentwise non-decreasing and converges exactly when the target profile
is achievable, so unbounded growth or a non-converged monotone run signals
SINR infeasibility. Per-RRH caps are checked after the fact; a violated cap
yields an InfeasibleCap verdict rather than a re-optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .netmodel import ChannelRealization, NetworkConfig, compute_sinr

# Any virtual uplink power beyond this multiple of the total cap budget is
# treated as divergence.
_DIVERGENCE_FACTOR = 1e6
# Slack allowed on the monotonicity of the fixed-point iterates before the
# run is declared oscillating (pure numerics; the exact map never decreases).
_MONOTONE_SLACK = 1e-9


class SolutionStatus(Enum):
    FEASIBLE = "feasible"
    INFEASIBLE_SINR = "infeasible_sinr"
    INFEASIBLE_CAP = "infeasible_cap"


class SolverFailure(RuntimeError):
    """The fixed point oscillated or produced inconsistent powers.

    Distinct from infeasibility: this is a numerical breakdown, not a verdict
    about the problem, and it aborts the run that triggered it.
    """


@dataclass(frozen=True)
class SolverParams:
    tolerance: float = 1e-8
    max_iterations: int = 500

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class BeamformingProblem:
    """One solver instance restricted to the active RRHs.

    `channel` holds only the active rows; `active_set` remembers which rows
    of the full channel they are.
    """

    active_set: np.ndarray
    channel: np.ndarray
    sinr_targets: np.ndarray
    per_rrh_cap_w: np.ndarray
    noise_w: float

    def __post_init__(self):
        self.active_set = np.asarray(self.active_set, dtype=int)
        self.channel = np.asarray(self.channel, dtype=complex)
        self.sinr_targets = np.asarray(self.sinr_targets, dtype=float)
        self.per_rrh_cap_w = np.broadcast_to(
            np.asarray(self.per_rrh_cap_w, dtype=float), (len(self.active_set),)
        ).copy()
        if self.channel.shape != (len(self.active_set), len(self.sinr_targets)):
            raise ValueError(
                f"channel shape {self.channel.shape} inconsistent with "
                f"{len(self.active_set)} active RRHs / {len(self.sinr_targets)} users")
        if np.any(self.sinr_targets < 0):
            raise ValueError("SINR targets must be >= 0")
        if len(self.active_set) == 0 and np.any(self.sinr_targets > 0):
            raise ValueError("active set must be non-empty when any target is positive")
        if not self.noise_w > 0:
            raise ValueError("noise power must be strictly positive")

    @classmethod
    def from_state(cls, channel: ChannelRealization, active_pattern,
                   sinr_targets, config: NetworkConfig) -> "BeamformingProblem":
        active_pattern = np.asarray(active_pattern, dtype=bool)
        active_set = np.flatnonzero(active_pattern)
        return cls(
            active_set=active_set,
            channel=channel.gains[active_set, :],
            sinr_targets=sinr_targets,
            per_rrh_cap_w=np.full(len(active_set), config.max_tx_power_w),
            noise_w=config.noise_power_w,
        )


@dataclass
class BeamformingSolution:
    weights: np.ndarray
    total_tx_w: float
    per_rrh_tx_w: np.ndarray
    status: SolutionStatus
    iterations: int
    residual: float

    @property
    def feasible(self) -> bool:
        return self.status is SolutionStatus.FEASIBLE


def sinr_targets(demands_mbps, config: NetworkConfig):
    """Per-user SINR targets iota and the constants mu = (iota+1)/iota.

    iota_i = margin * (2^(R_i/B) - 1); mu is +inf for users demanding nothing.
    """
    demands_mbps = np.asarray(demands_mbps, dtype=float)
    if np.any(demands_mbps < 0):
        raise ValueError("demands must be >= 0")
    rate_bps = demands_mbps * 1e6
    iota = config.sinr_margin * (2.0 ** (rate_bps / config.bandwidth_hz) - 1.0)
    with np.errstate(divide="ignore"):
        mu = np.where(iota > 0, (iota + 1.0) / np.where(iota > 0, iota, 1.0), np.inf)
    return iota, mu


def _empty_solution(problem: BeamformingProblem, status, iterations=0, residual=0.0):
    na = len(problem.active_set)
    n = len(problem.sinr_targets)
    return BeamformingSolution(
        weights=np.zeros((na, n), dtype=complex),
        total_tx_w=0.0,
        per_rrh_tx_w=np.zeros(na),
        status=status,
        iterations=iterations,
        residual=residual,
    )


def solve_beamforming(problem: BeamformingProblem,
                      params: SolverParams = SolverParams()) -> BeamformingSolution:
    """Solve one minimal-power beamforming instance.

    Returns a feasible solution in which every served user's SINR equals its
    target (within tolerance), or an infeasibility verdict. Raises
    SolverFailure on fixed-point oscillation, which cannot happen for an
    exactly evaluated interference map.
    """
    iota_all = problem.sinr_targets
    served = np.flatnonzero(iota_all > 0)
    na = len(problem.active_set)
    n = len(iota_all)

    if len(served) == 0:
        return _empty_solution(problem, SolutionStatus.FEASIBLE)

    # Conjugate once so every inner product below is g^H w == h^T w.
    g = np.conj(problem.channel[:, served])  # (na, ns)
    iota = iota_all[served]
    ns = len(served)
    noise = problem.noise_w

    gain_sq = np.real(np.sum(np.conj(g) * g, axis=0))
    if np.any(gain_sq <= 0):
        return _empty_solution(problem, SolutionStatus.INFEASIBLE_SINR)

    cap_total = float(np.sum(problem.per_rrh_cap_w))
    q_limit = _DIVERGENCE_FACTOR * cap_total if np.isfinite(cap_total) else np.inf

    q = np.zeros(ns)
    eye = np.eye(na)
    residual = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        cov = noise * eye + (g * q) @ g.conj().T
        solved = np.linalg.solve(cov, g)  # cov^{-1} g, columnwise
        a = np.real(np.sum(np.conj(g) * solved, axis=0))
        # Sherman-Morrison: g_i^H S_i^{-1} g_i = a_i / (1 - q_i a_i).
        downdate = 1.0 - q * a
        if np.any(downdate <= 0):
            raise SolverFailure("interference downdate became non-positive")
        q_next = iota * downdate / a
        if np.any(q_next < q * (1.0 - _MONOTONE_SLACK) - noise * _MONOTONE_SLACK):
            raise SolverFailure("fixed-point iterates oscillated")
        residual = float(np.max(np.abs(q_next - q) / np.maximum(q_next, noise)))
        q = q_next
        if np.any(q > q_limit):
            return _empty_solution(
                problem, SolutionStatus.INFEASIBLE_SINR, iterations, residual)
        if residual < params.tolerance:
            converged = True
            break

    if not converged:
        # Monotone all the way and still moving: the targets are unreachable.
        return _empty_solution(
            problem, SolutionStatus.INFEASIBLE_SINR, iterations, residual)

    # MMSE receive vectors at the fixed point give the beam directions
    # (the Sherman-Morrison rescaling leaves the direction unchanged).
    cov = noise * eye + (g * q) @ g.conj().T
    directions = np.linalg.solve(cov, g)
    directions = directions / np.linalg.norm(directions, axis=0, keepdims=True)

    # Downlink power scalars from the exact per-user target equalities.
    cross = np.abs(g.conj().T @ directions) ** 2  # cross[i, j] = |g_i^H w_j|^2
    system = -iota[:, None] * cross
    system[np.arange(ns), np.arange(ns)] = np.diag(cross)
    rhs = iota * noise
    powers = np.linalg.solve(system, rhs)
    if np.any(powers < -1e-12 * np.max(np.abs(powers))):
        raise SolverFailure("negative downlink power at a converged fixed point")
    powers = np.maximum(powers, 0.0)

    weights = np.zeros((na, n), dtype=complex)
    weights[:, served] = directions * np.sqrt(powers)
    per_rrh = np.sum(np.abs(weights) ** 2, axis=1)
    total = float(np.sum(per_rrh))

    status = SolutionStatus.FEASIBLE
    if np.any(per_rrh > problem.per_rrh_cap_w * (1.0 + 1e-9) + 1e-15):
        status = SolutionStatus.INFEASIBLE_CAP
    return BeamformingSolution(
        weights=weights,
        total_tx_w=total,
        per_rrh_tx_w=per_rrh,
        status=status,
        iterations=iterations,
        residual=residual,
    )


@dataclass(frozen=True)
class VerificationReport:
    achieved_sinr: np.ndarray
    targets: np.ndarray
    per_rrh_tx_w: np.ndarray
    total_tx_w: float
    max_rel_violation: float
    max_rel_slack: float
    sinr_ok: bool
    caps_ok: bool
    tight: bool
    power_consistent: bool


def verify_solution(solution: BeamformingSolution, problem: BeamformingProblem,
                    tol: float = 1e-6) -> VerificationReport:
    """Recompute every constraint of a feasible solution from scratch.

    At a true optimum every SINR target is met with equality, so both the
    violation and the slack must stay within `tol` (relative).
    """
    if not solution.feasible:
        raise ValueError("can only verify a feasible solution")
    channel = ChannelRealization(gains=problem.channel)
    iota = problem.sinr_targets
    served = iota > 0
    achieved = np.zeros(len(iota))
    for i in range(len(iota)):
        achieved[i] = compute_sinr(solution.weights, channel, i, problem.noise_w)
    rel = np.zeros(len(iota))
    rel[served] = achieved[served] / iota[served] - 1.0
    max_violation = float(max(0.0, -np.min(rel[served], initial=0.0)))
    max_slack = float(max(0.0, np.max(rel[served], initial=0.0)))

    per_rrh = np.sum(np.abs(solution.weights) ** 2, axis=1)
    total = float(np.sum(per_rrh))
    caps_ok = bool(np.all(per_rrh <= problem.per_rrh_cap_w * (1.0 + tol) + 1e-15))
    power_consistent = (
        abs(total - solution.total_tx_w) <= tol * max(total, 1e-30)
        and np.allclose(per_rrh, solution.per_rrh_tx_w, rtol=tol, atol=1e-30)
    )
    return VerificationReport(
        achieved_sinr=achieved,
        targets=iota,
        per_rrh_tx_w=per_rrh,
        total_tx_w=total,
        max_rel_violation=max_violation,
        max_rel_slack=max_slack,
        sinr_ok=max_violation <= tol,
        caps_ok=caps_ok,
        tight=max_violation <= tol and max_slack <= tol,
        power_consistent=power_consistent,
    )
