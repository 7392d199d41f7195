"""
Bounded-variable two-phase primal simplex on a dense tableau.

Maximizes c.x subject to A x (<=, =, >=) b and 0 <= x <= upper.
1. Slacks are added for inequality rows, rows with negative rhs are negated.
2. Phase 1 drives one artificial per row to zero.
3. Phase 2 optimizes the real objective with artificials pinned at zero.
Entering and leaving variables follow Bland's smallest-index rule, so degenerate
problems terminate. Upper bounds are handled as bound flips, not as rows.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

REFACTOR_EVERY = 100


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit
    x: np.ndarray
    duals: np.ndarray
    objective: float
    pivots: int
    reduced_costs: np.ndarray
    row_residual: float


class BoundedSimplex:
    def __init__(self, c, A, senses: Sequence[str], b, upper, max_pivots: int = 100000, tol: float = 1e-9):
        A = np.asarray(A, dtype=float)
        self.m, self.n = A.shape
        b = np.asarray(b, dtype=float).copy()
        upper = np.asarray(upper, dtype=float)
        if np.any(upper < 0):
            raise ValueError("upper bounds must be non-negative")

        slack_rows = [i for i, s in enumerate(senses) if s in ("<=", ">=")]
        S = np.zeros((self.m, len(slack_rows)))
        for k, i in enumerate(slack_rows):
            S[i, k] = 1.0 if senses[i] == "<=" else -1.0
        A_full = np.hstack([A, S])

        self.row_sign = np.where(b < 0, -1.0, 1.0)
        A_full *= self.row_sign[:, None]
        b *= self.row_sign

        self.n_struct = A_full.shape[1]
        self.art = np.arange(self.n_struct, self.n_struct + self.m)
        self.A = np.hstack([A_full, np.eye(self.m)])
        self.b = b
        self.N = self.A.shape[1]
        self.c = np.concatenate([np.asarray(c, dtype=float), np.zeros(self.N - self.n)])
        self.ub = np.concatenate([upper, np.full(self.N - self.n, np.inf)])

        self.T = self.A.copy()
        self.basis = self.art.copy()
        self.xB = b.copy()
        self.at_upper = np.zeros(self.N, dtype=bool)
        self.max_pivots = max_pivots
        self.tol = tol
        self.pivots = 0

    def _refactor(self) -> None:
        B = self.A[:, self.basis]
        self.T = np.linalg.solve(B, self.A)
        rhs = self.b - self.A[:, self.at_upper] @ self.ub[self.at_upper]
        self.xB = np.linalg.solve(B, rhs)

    def _reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        d = cost - cost[self.basis] @ self.T
        d[self.basis] = 0.0
        return d

    def _iterate(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        d = self._reduced_costs(cost)
        is_basic = np.zeros(self.N, dtype=bool)
        is_basic[self.basis] = True
        while True:
            if self.pivots >= self.max_pivots:
                return "iteration_limit"
            eligible = allowed & ~is_basic & (
                (~self.at_upper & (d > self.tol) & (self.ub > 0)) | (self.at_upper & (d < -self.tol))
            )
            candidates = np.flatnonzero(eligible)
            if candidates.size == 0:
                return "optimal"
            j = int(candidates[0])
            direction = -1.0 if self.at_upper[j] else 1.0
            delta = direction * self.T[:, j]

            ub_basic = self.ub[self.basis]
            rising = delta > self.tol
            falling = (delta < -self.tol) & np.isfinite(ub_basic)
            limits = np.full(self.m, np.inf)
            limits[rising] = np.maximum(self.xB[rising], 0.0) / delta[rising]
            limits[falling] = np.maximum(ub_basic[falling] - self.xB[falling], 0.0) / -delta[falling]
            theta_row = float(limits.min(initial=np.inf))
            if np.isfinite(theta_row):
                ties = np.flatnonzero(limits <= theta_row + 1e-12)
                leave = int(ties[np.argmin(self.basis[ties])])
                leave_upper = bool(falling[leave])

            theta_flip = self.ub[j]
            if not np.isfinite(theta_row) and not np.isfinite(theta_flip):
                return "unbounded"

            self.pivots += 1
            if theta_flip <= theta_row:
                self.xB -= theta_flip * delta
                self.at_upper[j] = not self.at_upper[j]
                continue

            self.xB -= theta_row * delta
            entering_value = theta_row if direction > 0 else self.ub[j] - theta_row
            leaving = self.basis[leave]
            self.at_upper[leaving] = leave_upper
            is_basic[leaving] = False

            pivot = self.T[leave, j]
            self.T[leave] /= pivot
            factor = self.T[:, j].copy()
            factor[leave] = 0.0
            self.T -= np.outer(factor, self.T[leave])
            self.basis[leave] = j
            self.xB[leave] = entering_value
            self.at_upper[j] = False
            is_basic[j] = True

            if self.pivots % REFACTOR_EVERY == 0:
                self._refactor()
            d = self._reduced_costs(cost)

    def _solution(self) -> np.ndarray:
        x = np.where(self.at_upper, self.ub, 0.0)
        x[self.basis] = self.xB
        return x

    def solve(self) -> LPResult:
        phase1 = np.zeros(self.N)
        phase1[self.art] = -1.0
        everything = np.ones(self.N, dtype=bool)
        status = self._iterate(phase1, everything)
        x = self._solution()
        infeasibility = float(x[self.art].sum())
        scale = max(1.0, float(np.abs(self.b).max(initial=0.0)))
        if status == "optimal" and infeasibility > 1e-8 * scale:
            logger.info(f"LP infeasible: phase 1 ended with artificial mass {infeasibility:.3e}")
            return self._result("infeasible")
        if status != "optimal":
            return self._result(status)

        self.ub[self.art] = 0.0
        allowed = np.ones(self.N, dtype=bool)
        allowed[self.art] = False
        return self._result(self._iterate(self.c, allowed))

    def _result(self, status: str) -> LPResult:
        if self.pivots:
            self._refactor()
        x = self._solution()
        y = self.c[self.basis] @ self.T[:, self.art]
        y = y * self.row_sign
        d = self._reduced_costs(self.c)
        residual = float(np.abs(self.A[:, : self.n_struct] @ x[: self.n_struct] - self.b).max(initial=0.0))
        logger.debug(f"simplex {status} after {self.pivots} iterations, row residual {residual:.2e}")
        return LPResult(
            status=status,
            x=x[: self.n],
            duals=y,
            objective=float(self.c[: self.n] @ x[: self.n]),
            pivots=self.pivots,
            reduced_costs=d[: self.n],
            row_residual=residual,
        )


def solve_lp(c, A, senses, b, upper, max_pivots: int = 100000, tol: float = 1e-9) -> LPResult:
    return BoundedSimplex(c, A, senses, b, upper, max_pivots=max_pivots, tol=tol).solve()
