"""Error-dynamics matrices and the maximum tolerable wireless delay."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Literal

import numpy as np

from .errors import UnstableSystemError
from .linalg import is_hurwitz, lyapunov_residual, max_eigenvalue_symmetric, solve_lyapunov

DEFAULT_K = 1.01

M1Variant = Literal["derived", "printed"]


@dataclass(frozen=True)
class ControlGains:
    """Per-follower gains of the control law.

    ``a*`` weight the spacing error to the leader, ``b*`` the velocity
    difference to the leader, ``a_hat*``/``b_hat*`` the same terms toward
    the other follower. Suffix 2 or 3 names the follower.
    """

    a2: float = 1.0
    b2: float = 1.0
    a_hat2: float = 1.5
    b_hat2: float = 1.5
    a3: float = 1.0
    b3: float = 1.0
    a_hat3: float = 1.5
    b_hat3: float = 1.5

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"gain {f.name} must be strictly positive, got {v}")

    def follower(self, i: int) -> tuple[float, float, float, float]:
        """(a, b, a_hat, b_hat) for follower 2 or 3."""
        if i == 2:
            return self.a2, self.b2, self.a_hat2, self.b_hat2
        if i == 3:
            return self.a3, self.b3, self.a_hat3, self.b_hat3
        raise ValueError(f"follower index must be 2 or 3, got {i}")

    def scaled(self, factor: float) -> "ControlGains":
        return ControlGains(*(getattr(self, f.name) * factor for f in fields(self)))


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """The pair (M1, M2) of de/dt = M1 e(t) + M2 e(t - dtau)."""

    m1: np.ndarray
    m2: np.ndarray

    @property
    def closed_loop(self) -> np.ndarray:
        """M1 + M2, the zero-delay system matrix."""
        return self.m1 + self.m2

    @property
    def hurwitz(self) -> bool:
        return is_hurwitz(self.closed_loop)


@dataclass(frozen=True, eq=False)
class DelayBound:
    c: np.ndarray
    lambda_max: float
    tau_max: float
    k: float

    @property
    def tau_max_ms(self) -> float:
        return self.tau_max * 1e3

    def residual(self, mats: SystemMatrices) -> float:
        return lyapunov_residual(self.c, mats.closed_loop)


def build_error_matrices(gains: ControlGains, variant: M1Variant = "derived",
                         validate: bool = True) -> SystemMatrices:
    """Assemble M1 and M2 from the follower gains.

    ``variant="derived"`` puts -a_hat3 at entry (4, 1), which is what
    substituting the control law into the error derivatives produces.
    ``variant="printed"`` uses -a3 there instead; it is kept only so the two
    readings can be compared.
    """
    if validate:
        gains.validate()
    a2, b2, ah2, bh2 = gains.follower(2)
    a3, b3, ah3, bh3 = gains.follower(3)
    if variant == "derived":
        e41 = -ah3
    elif variant == "printed":
        e41 = -a3
    else:
        raise ValueError(f"unknown M1 variant {variant!r}")
    m1 = np.array([
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [a2 + ah2, -ah2, -(b2 + bh2), 0.0],
        [e41, a3 + ah3, 0.0, -(b3 + bh3)],
    ])
    m2 = np.zeros((4, 4))
    m2[2, 3] = bh2
    m2[3, 2] = bh3
    m1.setflags(write=False)
    m2.setflags(write=False)
    return SystemMatrices(m1, m2)


def delay_bound(mats: SystemMatrices, k: float = DEFAULT_K) -> DelayBound:
    """Largest delay for which the delayed error dynamics stay asymptotically stable.

    tau_max = 1 / lambda_max(P P^T + Q Q^T + 2kI) with P = C M2 M1,
    Q = C M2 M2 and C the Lyapunov solution for M1 + M2.
    """
    if not k > 1:
        raise ValueError(f"k must be > 1, got {k}")
    c = solve_lyapunov(mats.closed_loop)
    p = c @ mats.m2 @ mats.m1
    q = c @ mats.m2 @ mats.m2
    g = p @ p.T + q @ q.T + 2.0 * k * np.eye(4)
    g = 0.5 * (g + g.T)
    lam = max_eigenvalue_symmetric(g)
    c.setflags(write=False)
    return DelayBound(c=c, lambda_max=lam, tau_max=1.0 / lam, k=k)


def formation_delay_requirement(gains: ControlGains, k: float = DEFAULT_K,
                                variant: M1Variant = "derived") -> float:
    """min(tau_x, tau_y) in seconds.

    The control law uses the same gains on both axes, so the x- and y-axis
    error systems share (M1, M2) and tau_x == tau_y; the bound is computed once.
    """
    mats = build_error_matrices(gains, variant)
    if not mats.hurwitz:
        raise UnstableSystemError("M1 + M2 is not Hurwitz for these gains")
    tau_x = delay_bound(mats, k).tau_max
    tau_y = tau_x
    return min(tau_x, tau_y)
