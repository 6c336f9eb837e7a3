"""Linearly implicit IMEX Runge-Kutta integration of M y' = F(t) + L y + N(y).

The linear operator L is taken implicitly with a singly diagonal tableau,
the nonlinear map N explicitly with a tableau carrying one extra stage.
Because F is constant and L time independent for both models, the stage
matrix ``M - dt * gamma * L`` is factored once and reused.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dgspace import (DGSpace, assemble_linear_reaction, assemble_load, assemble_mass,
                      assemble_stiffness, nonlinear_apply, space_average)
from .mesh import WHITE, PolyMesh
from .models import ModelParams, derive_rates, diffusion_tensor

log = logging.getLogger(__name__)


class NumericalAbort(RuntimeError):
    """The state became non-finite during time stepping."""

    def __init__(self, time: float, message: str | None = None):
        self.time = time
        super().__init__(message or f"non-finite state at t = {time:.6g} years")


# ---------------------------------------------------------------------------
# tableaux


@dataclass(frozen=True)
class ImexTableau:
    """Implicit s-stage tableau (``a``, ``b``, ``c``) with constant diagonal
    ``gamma`` paired with an explicit (s+1)-stage tableau (``a_hat``, ``b_hat``)."""

    name: str
    a: np.ndarray
    b: np.ndarray
    a_hat: np.ndarray
    b_hat: np.ndarray
    order: int

    def __post_init__(self):
        a, b, ah, bh = (np.asarray(x, dtype=float) for x in (self.a, self.b, self.a_hat, self.b_hat))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a_hat", ah)
        object.__setattr__(self, "b_hat", bh)
        s = len(b)
        if a.shape != (s, s) or ah.shape != (s + 1, s + 1) or bh.shape != (s + 1,):
            raise ValueError(f"{self.name}: inconsistent tableau shapes")
        d = np.diag(a)
        if not (d[0] > 0 and np.allclose(d, d[0], rtol=0, atol=1e-15)):
            raise ValueError(f"{self.name}: implicit diagonal must be a constant gamma > 0")
        if np.any(np.triu(a, 1) != 0):
            raise ValueError(f"{self.name}: implicit tableau must be lower triangular")
        if np.any(np.triu(ah) != 0):
            raise ValueError(f"{self.name}: explicit tableau must be strictly lower triangular")
        if abs(b.sum() - 1.0) > 1e-12 or abs(bh.sum() - 1.0) > 1e-12:
            raise ValueError(f"{self.name}: weights must sum to one")

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def gamma(self) -> float:
        return float(self.a[0, 0])

    @property
    def c(self) -> np.ndarray:
        return self.a.sum(axis=1)

    def stability_function(self, z: complex) -> complex:
        """R(z) of the implicit tableau applied to y' = lambda y."""
        s = self.stages
        ones = np.ones(s)
        return complex(1.0 + z * self.b @ np.linalg.solve(np.eye(s) - z * self.a, ones))

    @classmethod
    def from_dict(cls, d: dict) -> "ImexTableau":
        return cls(d["name"], d["a"], d["b"], d["a_hat"], d["b_hat"], int(d["order"]))

    def to_dict(self) -> dict:
        return {"name": self.name, "order": self.order, "a": self.a.tolist(), "b": self.b.tolist(),
                "a_hat": self.a_hat.tolist(), "b_hat": self.b_hat.tolist()}


def _imex_euler() -> ImexTableau:
    return ImexTableau("imex-euler", [[1.0]], [1.0], [[0.0, 0.0], [1.0, 0.0]], [1.0, 0.0], 1)


def _ars222() -> ImexTableau:
    g = 1.0 - 1.0 / np.sqrt(2.0)
    d = 1.0 - 1.0 / (2.0 * g)
    return ImexTableau(
        "ars222",
        [[g, 0.0], [1.0 - g, g]],
        [1.0 - g, g],
        [[0.0, 0.0, 0.0], [g, 0.0, 0.0], [d, 1.0 - d, 0.0]],
        [d, 1.0 - d, 0.0],
        2,
    )


def _ars343() -> ImexTableau:
    # gamma: root of 6x^3 - 18x^2 + 9x - 1 in (1/3, 1/2), the L-stable SDIRK3 value
    g = float(min(r.real for r in np.roots([6.0, -18.0, 9.0, -1.0]) if 1 / 3 < r.real < 0.5))
    b1 = -1.5 * g * g + 4.0 * g - 0.25
    b2 = 1.5 * g * g - 5.0 * g + 1.25
    c3 = 0.5 * (1.0 + g)
    a32 = 0.3966543747
    a42 = a43 = 0.5529291479
    a_hat = [
        [0.0, 0.0, 0.0, 0.0],
        [g, 0.0, 0.0, 0.0],
        [c3 - a32, a32, 0.0, 0.0],
        [1.0 - a42 - a43, a42, a43, 0.0],
    ]
    a = [[g, 0.0, 0.0], [0.5 * (1.0 - g), g, 0.0], [b1, b2, g]]
    return ImexTableau("ars343", a, [b1, b2, g], a_hat, [0.0, b1, b2, g], 3)


TABLEAUX: dict[str, Callable[[], ImexTableau]] = {
    "imex-euler": _imex_euler,
    "ars222": _ars222,
    "ars343": _ars343,
}


def get_tableau(name_or_dict) -> ImexTableau:
    if isinstance(name_or_dict, ImexTableau):
        return name_or_dict
    if isinstance(name_or_dict, dict):
        return ImexTableau.from_dict(name_or_dict)
    try:
        return TABLEAUX[name_or_dict]()
    except KeyError:
        raise ValueError(f"unknown tableau {name_or_dict!r}; available: {sorted(TABLEAUX)}") from None


# ---------------------------------------------------------------------------
# systems


@dataclass(eq=False)
class SemiLinearSystem:
    """M y' = F(t) + L y + N(y) over a stacked state of ``len(names)`` DG fields."""

    space: DGSpace
    M: sp.csr_matrix
    L: sp.csr_matrix
    N: Callable[[np.ndarray], np.ndarray]
    F: Callable[[float], np.ndarray]
    names: tuple[str, ...]

    @property
    def size(self) -> int:
        return self.M.shape[0]

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.F(t) + self.L @ y + self.N(y)

    def split(self, y: np.ndarray) -> list[np.ndarray]:
        n = self.space.ndof
        return [y[i * n:(i + 1) * n] for i in range(len(self.names))]

    def averages(self, y: np.ndarray) -> np.ndarray:
        return np.array([space_average(self.space, u) for u in self.split(y)])


def diffusion_field(mesh: PolyMesh, d_ext: float, d_axn: float) -> np.ndarray:
    """Elementwise tensors with axonal diffusion in white matter only."""
    d_axn_el = np.where(mesh.element_region == WHITE, d_axn, 0.0)
    return diffusion_tensor(d_ext, d_axn_el, mesh.axonal)


def heterodimer_system(space: DGSpace, params: ModelParams, D=None, eta0: float = 10.0) -> SemiLinearSystem:
    """Stacked (P, Q) system of the heterodimer model."""
    r = derive_rates(params)
    if D is None:
        D = diffusion_field(space.mesh, params.d_ext, params.d_axn)
    D = np.asarray(D, dtype=float)
    if D.shape == (2, 2):
        D = np.broadcast_to(D, (space.n_elements, 2, 2))
    if D.shape[0] != space.n_elements:
        raise ValueError("diffusion field does not match the space")
    A = assemble_stiffness(space, D, params.k12 + r.k1, eta0)
    A_t = assemble_stiffness(space, D, params.k12 + r.k1_tilde, eta0)
    M = assemble_mass(space)
    L = sp.block_diag([-A - assemble_linear_reaction(space, r.k1),
                       -A_t - assemble_linear_reaction(space, r.k1_tilde)], format="csr")
    n = space.ndof
    k12 = params.k12
    load = np.concatenate([assemble_load(space, r.k0), np.zeros(n)])

    def nonlinear(y):
        P, Q = y[:n], y[n:]
        conv = nonlinear_apply(space, k12, P, Q)
        return np.concatenate([-conv, conv])

    return SemiLinearSystem(space, sp.block_diag([M, M], format="csr"), L, nonlinear,
                            lambda t: load, ("p", "q"))


def fk_system(space: DGSpace, params: ModelParams, D=None, eta0: float = 10.0) -> SemiLinearSystem:
    """Fisher-Kolmogorov system for the relative concentration C."""
    alpha = derive_rates(params).alpha
    if D is None:
        D = diffusion_field(space.mesh, params.d_ext, params.d_axn)
    D = np.asarray(D, dtype=float)
    if D.shape == (2, 2):
        D = np.broadcast_to(D, (space.n_elements, 2, 2))
    A = assemble_stiffness(space, D, abs(alpha), eta0)
    M = assemble_mass(space)
    L = (-A + assemble_linear_reaction(space, alpha)).tocsr()
    zero = np.zeros(space.ndof)

    def nonlinear(c):
        return -nonlinear_apply(space, alpha, c, c)

    return SemiLinearSystem(space, M, L, nonlinear, lambda t: zero, ("c",))


# ---------------------------------------------------------------------------
# stepping


class StageSolver:
    """Factorisations of M and of the stage matrix for one (system, dt, gamma)."""

    def __init__(self, system: SemiLinearSystem, dt: float, gamma: float, method: str = "direct",
                 rtol: float = 1e-12):
        self.system = system
        self.dt = dt
        self.gamma = gamma
        self.method = method
        self.rtol = rtol
        S = (system.M - (dt * gamma) * system.L).tocsc()
        self.S = S
        if method == "direct":
            try:
                self._stage = spla.splu(S)
            except RuntimeError as exc:
                raise np.linalg.LinAlgError(f"singular stage matrix: {exc}") from None
            self._mass = spla.splu(system.M.tocsc())
        elif method == "cg":
            self._precond = self._block_jacobi(S)
            self._mass = spla.splu(system.M.tocsc())
        else:
            raise ValueError(f"unknown linear solver {method!r}")

    def _block_jacobi(self, S):
        n = self.system.space.n_loc
        nb = S.shape[0] // n
        blocks = np.empty((nb, n, n))
        Sd = S.tocsr()
        for k in range(nb):
            sl = slice(k * n, (k + 1) * n)
            blocks[k] = Sd[sl, sl].toarray()
        inv = np.linalg.inv(blocks)

        def apply(x):
            return np.einsum("kij,kj->ki", inv, x.reshape(nb, n)).ravel()

        return spla.LinearOperator(S.shape, matvec=apply)

    def stage(self, rhs: np.ndarray) -> np.ndarray:
        if self.method == "direct":
            return self._stage.solve(rhs)
        x, info = spla.cg(self.S, rhs, rtol=self.rtol, atol=0.0, M=self._precond, maxiter=10_000)
        if info != 0:
            raise np.linalg.LinAlgError(f"CG did not converge (info={info})")
        return x

    def mass(self, rhs: np.ndarray) -> np.ndarray:
        return self._mass.solve(rhs)


def imex_step(system: SemiLinearSystem, y: np.ndarray, t: float, dt: float, tableau: ImexTableau,
              solver: StageSolver | None = None) -> np.ndarray:
    """Advance one step of the linearly implicit IMEX scheme."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if solver is None:
        solver = StageSolver(system, dt, tableau.gamma)
    a, b, ah, bh = tableau.a, tableau.b, tableau.a_hat, tableau.b_hat
    c = tableau.c
    s = tableau.stages
    L = system.L
    K: list[np.ndarray] = []
    Kh = [solver.mass(system.N(y))]
    for i in range(s):
        acc = np.zeros_like(y)
        for j in range(i):
            acc += a[i, j] * K[j]
        for j in range(i + 1):
            acc += ah[i + 1, j] * Kh[j]
        K.append(solver.stage(system.F(t + c[i] * dt) + L @ (y + dt * acc)))
        ybar = y + dt * (acc + a[i, i] * K[i])
        Kh.append(solver.mass(system.N(ybar)))
    inc = np.zeros_like(y)
    for j in range(s):
        inc += b[j] * K[j]
    for j in range(s + 1):
        inc += bh[j] * Kh[j]
    return y + dt * inc


@dataclass
class Trajectory:
    names: tuple[str, ...]
    times: np.ndarray
    averages: np.ndarray                     # (n_times, n_fields)
    snapshots: dict[float, np.ndarray]
    final: np.ndarray | None = None

    def average(self, name: str) -> np.ndarray:
        return self.averages[:, self.names.index(name)]


def _step_index(t: float, dt: float, what: str) -> int:
    k = int(round(t / dt))
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"{what} {t} is not a multiple of dt = {dt}")
    return k


def solve(system: SemiLinearSystem, y0: np.ndarray, dt: float, T: float, tableau,
          snapshot_times: Sequence[float] = (), linear_solver: str = "direct") -> Trajectory:
    """Integrate to ``T`` recording space averages every step and states at ``snapshot_times``."""
    if not T > 0:
        raise ValueError("final time T must be positive")
    tableau = get_tableau(tableau)
    n_steps = _step_index(T, dt, "final time")
    snap_steps = {}
    for ts in snapshot_times:
        k = _step_index(float(ts), dt, "snapshot time")
        if not 0 <= k <= n_steps:
            raise ValueError(f"snapshot time {ts} outside [0, {T}]")
        snap_steps[k] = float(ts)
    y = np.array(y0, dtype=float)
    if y.shape != (system.size,):
        raise ValueError(f"initial state has length {y.size}, expected {system.size}")
    solver = StageSolver(system, dt, tableau.gamma, linear_solver)
    times = np.arange(n_steps + 1) * dt
    avgs = np.empty((n_steps + 1, len(system.names)))
    avgs[0] = system.averages(y)
    snaps = {}
    if 0 in snap_steps:
        snaps[snap_steps[0]] = y.copy()
    for k in range(n_steps):
        y = imex_step(system, y, times[k], dt, tableau, solver)
        if not np.all(np.isfinite(y)):
            raise NumericalAbort(float(times[k + 1]))
        avgs[k + 1] = system.averages(y)
        if k + 1 in snap_steps:
            snaps[snap_steps[k + 1]] = y.copy()
    log.debug("integrated %d steps of %s", n_steps, tableau.name)
    return Trajectory(system.names, times, avgs, snaps, y)
