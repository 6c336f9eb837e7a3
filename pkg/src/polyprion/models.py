"""Reaction kinetics of the heterodimer and Fisher-Kolmogorov models.

Concentrations are in ug/g, rates in 1/year, diffusivities in cm^2/year.
The stochastic triple is (p_min, p_delta, q_max); ``k12`` is held fixed.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

AXES = ("q_max", "p_min", "p_delta")

# boundary band for the node/focus decision, relative to the scale of the
# bifurcation function's two terms
DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    p_min: float
    p_delta: float
    q_max: float
    k12: float = 0.2
    d_ext: float = 8e-6
    d_axn: float = 8e-5

    def __post_init__(self):
        if self.p_delta == 0:
            raise ValueError("degenerate: zero healthy-protein drop (p_delta = 0)")
        for name in ("p_min", "p_delta", "k12"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.q_max >= 0:
            raise ValueError(f"q_max must be non-negative, got {self.q_max}")
        if self.d_ext < 0 or self.d_axn < 0:
            raise ValueError("diffusivities must be non-negative")

    @property
    def p_max(self) -> float:
        return self.p_min + self.p_delta

    def with_value(self, axis: str, value: float) -> "ModelParams":
        if axis not in AXES:
            raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")
        return ModelParams(**{**self.__dict__, axis: float(value)})


@dataclass(frozen=True)
class DerivedRates:
    k0: float
    k1: float
    k1_tilde: float
    alpha: float


def derive_rates(p: ModelParams) -> DerivedRates:
    """Production, clearance and conversion rates reproducing the equilibria.

    E1 = (p_max, 0) and E2 = (p_min, q_max) for the heterodimer kinetics;
    alpha is the logistic rate of the Fisher-Kolmogorov reduction.
    """
    if p.p_delta == 0:
        raise ValueError("degenerate: zero healthy-protein drop (p_delta = 0)")
    k0 = p.p_min * (p.p_min + p.p_delta) * p.q_max / p.p_delta * p.k12
    k1 = p.p_min * p.q_max / p.p_delta * p.k12
    k1_tilde = p.p_min * p.k12
    alpha = p.p_delta * p.k12
    return DerivedRates(k0, k1, k1_tilde, alpha)


def invert_rates(r: DerivedRates, k12: float) -> tuple[float, float, float]:
    """Recover (p_min, p_delta, q_max) from the heterodimer rates."""
    p_min = r.k1_tilde / k12
    q_max = r.k0 / r.k1_tilde - r.k1 / k12
    p_max = r.k0 / r.k1
    return p_min, p_max - p_min, q_max


def diffusion_tensor(d_ext: float, d_axn: float, axonal) -> np.ndarray:
    """D = d_ext I + d_axn a (x) a. Accepts one vector (2,) or a field (E, 2)."""
    a = np.asarray(axonal, dtype=float)
    d_axn = np.asarray(d_axn, dtype=float)
    if a.ndim == 1:
        return d_ext * np.eye(2) + d_axn * np.outer(a, a)
    outer = a[:, :, None] * a[:, None, :]
    return d_ext * np.eye(2)[None] + np.reshape(d_axn, (-1, 1, 1)) * outer


def heterodimer_rhs(p: ModelParams):
    """Right-hand side f(t, y) of the spatially homogeneous kinetics, y = (p, q)."""
    r = derive_rates(p)
    k12 = p.k12

    def f(t, y):
        pp, qq = y[0], y[1]
        return np.array([r.k0 - r.k1 * pp - k12 * pp * qq, -r.k1_tilde * qq + k12 * pp * qq])

    return f


def fk_rhs(p: ModelParams):
    alpha = derive_rates(p).alpha

    def f(t, y):
        return alpha * y * (1.0 - y)

    return f


def kinetics_jacobian(p: ModelParams, state) -> np.ndarray:
    """Jacobian of the heterodimer kinetics at ``state = (p, q)``."""
    r = derive_rates(p)
    pp, qq = state
    return np.array([
        [-r.k1 - p.k12 * qq, -p.k12 * pp],
        [p.k12 * qq, -r.k1_tilde + p.k12 * pp],
    ])


def jacobian_E2(p: ModelParams) -> np.ndarray:
    """Jacobian at the diseased equilibrium (p_min, q_max), in 1/year."""
    return p.k12 * np.array([
        [-p.q_max * (p.p_min + p.p_delta) / p.p_delta, -p.p_min],
        [p.q_max, 0.0],
    ])


def jacobian_E1(p: ModelParams) -> np.ndarray:
    return kinetics_jacobian(p, (p.p_max, 0.0))


def bifurcation_function(p_min, p_delta, q_max):
    """(p_delta + p_min)^2 q_max - 4 p_min p_delta^2; negative for a focus."""
    return (p_delta + p_min) ** 2 * q_max - 4.0 * p_min * p_delta**2


def discriminant(p: ModelParams) -> float:
    """trace^2 - 4 det of J(E2) in closed form."""
    return p.k12**2 * (p.q_max**2 * (p.p_min + p.p_delta) ** 2 / p.p_delta**2 - 4.0 * p.p_min * p.q_max)


class EquilibriumKind(str, enum.Enum):
    STABLE_NODE = "StableNode"
    STABLE_FOCUS = "StableFocus"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class EquilibriumReport:
    E1: tuple[float, float]
    E2: tuple[float, float]
    eigenvalues: tuple[complex, complex]
    kind: EquilibriumKind
    bifurcation_residual: float


def classify_equilibrium(p: ModelParams) -> EquilibriumReport:
    """Node/focus classification of E2 from the sign of the bifurcation function."""
    g = bifurcation_function(p.p_min, p.p_delta, p.q_max)
    scale = max((p.p_delta + p.p_min) ** 2 * p.q_max, 4.0 * p.p_min * p.p_delta**2)
    if abs(g) <= DEGENERATE_RTOL * scale:
        kind = EquilibriumKind.DEGENERATE
    elif g < 0:
        kind = EquilibriumKind.STABLE_FOCUS
    else:
        kind = EquilibriumKind.STABLE_NODE
    J = jacobian_E2(p)
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    root = np.sqrt(complex(tr * tr - 4.0 * det))
    lam = (0.5 * (tr - root), 0.5 * (tr + root))
    return EquilibriumReport((p.p_max, 0.0), (p.p_min, p.q_max), lam, kind, float(g))


def _positive_quadratic_roots(a: float, b: float, c: float) -> list[float]:
    """Positive real roots of a x^2 + b x + c, ascending (cancellation-free)."""
    if a == 0.0:
        if b == 0.0:
            return []
        x = -c / b
        return [x] if x > 0 else []
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    qq = -0.5 * (b + math.copysign(sq, b))
    roots = []
    if qq != 0.0:
        roots += [qq / a, c / qq]
    else:
        roots += [0.0]
    return sorted({r for r in roots if r > 0})


def bifurcation_value(axis: str, *, p_min: float | None = None, p_delta: float | None = None,
                      q_max: float | None = None) -> list[float]:
    """Roots of the node/focus boundary along ``axis`` with the other two fixed.

    Returns all positive real roots in ascending order; an empty list when
    the boundary is not crossed along that axis.
    """
    if axis == "q_max":
        _require(p_min=p_min, p_delta=p_delta)
        return [4.0 * p_min * p_delta**2 / (p_min + p_delta) ** 2]
    if axis == "p_delta":
        _require(p_min=p_min, q_max=q_max)
        # (q - 4 pm) d^2 + 2 q pm d + q pm^2 = 0
        return _positive_quadratic_roots(q_max - 4.0 * p_min, 2.0 * q_max * p_min, q_max * p_min**2)
    if axis == "p_min":
        _require(p_delta=p_delta, q_max=q_max)
        # q m^2 + (2 q d - 4 d^2) m + q d^2 = 0
        return _positive_quadratic_roots(q_max, 2.0 * q_max * p_delta - 4.0 * p_delta**2, q_max * p_delta**2)
    raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")


def _require(**kw):
    for k, v in kw.items():
        if v is None or not v > 0:
            raise ValueError(f"{k} must be given and positive")


def bifurcation_surface(p_min_grid, p_delta_grid) -> np.ndarray:
    """Rows (p_min, p_delta, q_max*) sampling the node/focus surface."""
    pm, pd = np.meshgrid(np.asarray(p_min_grid, float), np.asarray(p_delta_grid, float), indexing="ij")
    if np.any(pm <= 0) or np.any(pd <= 0):
        raise ValueError("grid values must be positive")
    q = 4.0 * pm * pd**2 / (pm + pd) ** 2
    return np.column_stack([pm.ravel(), pd.ravel(), q.ravel()])
