"""Gamma calibration of the concentration parameters and one-at-a-time sweeps.

The Gamma law uses an offset shape: density b^(a+1)/Gamma(a+1) y^a exp(-b y),
so mean = (a+1)/b and variance = (a+1)/b^2.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import special

from .dgspace import DGSpace, build_space, project, project_elementwise
from .integrator import Trajectory, fk_system, heterodimer_system, solve
from .mesh import PolyMesh
from .models import AXES, EquilibriumKind, ModelParams, classify_equilibrium

MODELS = ("heterodimer", "fk")
DEFAULT_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)

# reference (mean, variance) pairs in ug/g and ug^2/g^2
PROTEIN_STATS: dict[str, dict[str, tuple[float, float]]] = {
    "tau": {
        "p_min": (4.4557, 3.0400),
        "p_delta": (3.5042, 1.8217),
        "q_max": (0.7168, 0.2737),
    },
    "amyloid": {
        "p_min": (5.7400, 2.2464),
        "p_delta": (3.0500, 8.2143),
        "q_max": (13.086, 101.33),
    },
}

# seed centres as fractions of the mesh bounding box
SEED_CENTERS = {"tau": (0.25, 0.25), "amyloid": (0.25, 0.75)}


# ---------------------------------------------------------------------------
# Gamma law


@dataclass(frozen=True)
class GammaDist:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > -1 and self.b > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"invalid Gamma parameters a={self.a}, b={self.b} (need a > -1, b > 0)")

    @property
    def shape(self) -> float:
        return self.a + 1.0

    @property
    def mean(self) -> float:
        return (self.a + 1.0) / self.b

    @property
    def variance(self) -> float:
        return (self.a + 1.0) / self.b**2

    def pdf(self, y):
        return gamma_pdf(self, y)

    def cdf(self, y):
        return gamma_cdf(self, y)

    def quantile(self, prob):
        prob = np.asarray(prob, dtype=float)
        if np.any((prob <= 0) | (prob >= 1)):
            raise ValueError("quantile probabilities must lie in (0, 1)")
        return special.gammaincinv(self.shape, prob) / self.b


def fit_gamma(mean: float, variance: float) -> GammaDist:
    """Moment-matched Gamma law."""
    if not (mean > 0 and variance > 0):
        raise ValueError(f"mean and variance must be positive, got {mean}, {variance}")
    return GammaDist(mean * mean / variance - 1.0, mean / variance)


def gamma_pdf(d: GammaDist, y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    k = d.shape
    logp = k * np.log(d.b) - special.gammaln(k) + d.a * np.log(y[pos]) - d.b * y[pos]
    out[pos] = np.exp(logp)
    if k == 1.0:
        out[y == 0] = d.b
    elif k < 1.0:
        out[y == 0] = np.inf
    return out if out.ndim else float(out)


def gamma_cdf(d: GammaDist, y):
    y = np.asarray(y, dtype=float)
    out = np.where(y > 0, special.gammainc(d.shape, d.b * np.where(y > 0, y, 0.0)), 0.0)
    return out if out.ndim else float(out)


# counter-based sampling: index i lives in block i // _BLOCK, and every block
# is generated in full from its own Philox key, so any prefix of a longer
# draw equals a shorter draw with the same seed.
_BLOCK = 256


def _standard_gamma_block(rng: np.random.Generator, k: float, n: int) -> np.ndarray:
    """Marsaglia-Tsang squeeze/rejection for k >= 1; boosting for k < 1."""
    boost = k < 1.0
    kk = k + 1.0 if boost else k
    d = kk - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    todo = np.arange(n)
    while todo.size:
        x = rng.standard_normal(todo.size)
        u = rng.random(todo.size)
        v = (1.0 + c * x) ** 3
        ok = v > 0
        vs = np.where(ok, v, 1.0)
        accept = ok & ((u < 1.0 - 0.0331 * x**4)
                       | (np.log(np.where(u > 0, u, 1e-300)) < 0.5 * x * x + d * (1.0 - vs + np.log(vs))))
        out[todo[accept]] = d * vs[accept]
        todo = todo[~accept]
    if boost:
        out *= rng.random(n) ** (1.0 / k)
    return out


def gamma_sample(d: GammaDist, n: int, seed: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    blocks = []
    for j in range(-(-n // _BLOCK)):
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, j], dtype=np.uint64)))
        blocks.append(_standard_gamma_block(rng, d.shape, _BLOCK))
    return np.concatenate(blocks)[:n] / d.b


@dataclass(frozen=True)
class EcdfComparison:
    ks: float
    band: float
    passed: bool


def dkw_halfwidth(n: int, confidence: float = 0.95) -> float:
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


def ecdf_compare(samples, d: GammaDist) -> EcdfComparison:
    """Kolmogorov-Smirnov distance to ``d`` against the DKW 95% band."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample set")
    F = gamma_cdf(d, x)
    i = np.arange(1, n + 1)
    ks = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    band = dkw_halfwidth(n)
    return EcdfComparison(ks, band, ks <= band)


def protein_distributions(protein: str) -> dict[str, GammaDist]:
    try:
        stats = PROTEIN_STATS[protein]
    except KeyError:
        raise ValueError(f"unknown protein {protein!r}; expected one of {sorted(PROTEIN_STATS)}") from None
    return {axis: fit_gamma(*mv) for axis, mv in stats.items()}


def mean_params(protein: str, **overrides) -> ModelParams:
    """Parameters at the distribution means, with optional overrides."""
    protein_distributions(protein)
    values = {axis: mv[0] for axis, mv in PROTEIN_STATS[protein].items()}
    values.update(overrides)
    return ModelParams(**values)


# ---------------------------------------------------------------------------
# initial conditions


def _signed_distance(poly: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Signed distance to a simple polygon, negative inside."""
    px, py = x.ravel(), y.ravel()
    a = poly
    b = np.roll(poly, -1, axis=0)
    dist = np.full(px.shape, np.inf)
    inside = np.zeros(px.shape, dtype=bool)
    for (ax, ay), (bx, by) in zip(a, b):
        ex, ey = bx - ax, by - ay
        t = np.clip(((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey), 0.0, 1.0)
        dist = np.minimum(dist, np.hypot(px - ax - t * ex, py - ay - t * ey))
        crosses = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * ex / np.where(ey == 0, 1.0, ey)
        inside ^= crosses & (px < xint)
    return np.where(inside, -dist, dist).reshape(np.shape(x))


@dataclass(frozen=True)
class SeedRegion:
    """Initial misfolded-protein seed.

    The region is a disc (``center``, ``radius``) or a polygon. ``width`` > 0
    smooths the edge with a logistic profile in the signed distance; 0 gives
    the sharp indicator.
    """

    center: tuple[float, float] | None = None
    radius: float | None = None
    polygon: tuple[tuple[float, float], ...] | None = None
    width: float = 0.0
    amplitude: float = 0.1

    def __post_init__(self):
        if (self.polygon is None) == (self.center is None):
            raise ValueError("seed region needs exactly one of a disc centre or a polygon")
        if self.center is not None and not (self.radius is not None and self.radius > 0):
            raise ValueError("disc seed needs a positive radius")
        if self.polygon is not None and len(self.polygon) < 3:
            raise ValueError("seed polygon needs at least three vertices")
        if self.width < 0:
            raise ValueError("seed width must be non-negative")
        if not self.amplitude >= 0:
            raise ValueError("seed amplitude must be non-negative")

    def signed_distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.polygon is not None:
            return _signed_distance(np.asarray(self.polygon, dtype=float), x, y)
        return np.hypot(x - self.center[0], y - self.center[1]) - self.radius

    def profile(self, x, y):
        sd = self.signed_distance(x, y)
        if self.width == 0:
            return (sd <= 0).astype(float)
        return special.expit(-sd / self.width)

    def to_dict(self) -> dict:
        return {"center": None if self.center is None else list(self.center), "radius": self.radius,
                "polygon": None if self.polygon is None else [list(p) for p in self.polygon],
                "width": self.width, "amplitude": self.amplitude}

    @classmethod
    def from_dict(cls, d: dict) -> "SeedRegion":
        d = dict(d)
        if d.get("center") is not None:
            d["center"] = tuple(float(v) for v in d["center"])
        if d.get("polygon") is not None:
            d["polygon"] = tuple(tuple(float(v) for v in p) for p in d["polygon"])
        return cls(**d)


def default_seed(protein: str, mesh: PolyMesh, amplitude: float = 0.1) -> SeedRegion:
    """Disc of radius 0.1 W at the preset location, smoothed over 0.1 W (W = box width)."""
    if protein not in SEED_CENTERS:
        raise ValueError(f"unknown protein {protein!r}")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    width = float(hi[0] - lo[0])
    fx, fy = SEED_CENTERS[protein]
    center = (float(lo[0] + fx * (hi[0] - lo[0])), float(lo[1] + fy * (hi[1] - lo[1])))
    return SeedRegion(center=center, radius=0.1 * width, width=0.1 * width, amplitude=amplitude)


def initial_state(space: DGSpace, model: str, params: ModelParams, seed: SeedRegion) -> np.ndarray:
    s = project(space, seed.profile)
    if model == "heterodimer":
        return np.concatenate([project_elementwise(space, params.p_max), seed.amplitude * params.q_max * s])
    if model == "fk":
        return seed.amplitude * s
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


# ---------------------------------------------------------------------------
# single runs and sweeps


@dataclass(frozen=True)
class SolverSettings:
    degree: int = 5
    eta0: float = 10.0
    dt: float = 0.025
    T: float = 40.0
    tableau: str = "ars222"
    linear_solver: str = "direct"


def build_system(space: DGSpace, model: str, params: ModelParams, eta0: float):
    if model == "heterodimer":
        return heterodimer_system(space, params, eta0=eta0)
    if model == "fk":
        return fk_system(space, params, eta0=eta0)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def simulate(mesh: PolyMesh, model: str, params: ModelParams, solver: SolverSettings,
             seed: SeedRegion, snapshot_times: Sequence[float] = (),
             space: DGSpace | None = None) -> tuple[DGSpace, Trajectory]:
    if space is None:
        space = build_space(mesh, solver.degree)
    system = build_system(space, model, params, solver.eta0)
    y0 = initial_state(space, model, params, seed)
    traj = solve(system, y0, solver.dt, solver.T, solver.tableau, snapshot_times, solver.linear_solver)
    return space, traj


@dataclass(frozen=True)
class SweepSpec:
    model: str
    protein: str
    axis: str
    values: tuple[float, ...] | None = None
    quantiles: tuple[float, ...] | None = None
    fixed: dict = field(default_factory=dict)
    solver: SolverSettings = SolverSettings()
    snapshot_times: tuple[float, ...] = ()
    seed: SeedRegion | None = None
    k12: float = 0.2
    d_ext: float = 8e-6
    d_axn: float = 8e-5

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        protein_distributions(self.protein)
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}; expected one of {AXES}")
        if self.model == "fk" and self.axis != "p_delta":
            raise ValueError("the Fisher-Kolmogorov rate alpha = k12 * p_delta depends only on p_delta; "
                             f"sweeping {self.axis} has no effect on the FK model")
        if self.values is not None and any(not v > 0 for v in self.values):
            raise ValueError("sweep values must be positive")
        if self.quantiles is not None and any(not 0 < v < 1 for v in self.quantiles):
            raise ValueError("quantiles must lie in (0, 1)")
        unknown = set(self.fixed) - set(AXES)
        if unknown:
            raise ValueError(f"unknown fixed axes {sorted(unknown)}")

    def resolved_values(self) -> list[float]:
        dist = protein_distributions(self.protein)[self.axis]
        if self.values is not None:
            vals = [float(v) for v in self.values]
            if self.quantiles is not None:
                vals += [float(v) for v in dist.quantile(self.quantiles)]
        elif self.quantiles is not None:
            vals = [float(v) for v in dist.quantile(self.quantiles)]
        else:
            vals = [float(v) for v in dist.quantile(DEFAULT_QUANTILES)] + [dist.mean]
        return sorted(set(vals))

    def params_for(self, value: float) -> ModelParams:
        base = {axis: mv[0] for axis, mv in PROTEIN_STATS[self.protein].items()}
        base.update({k: float(v) for k, v in self.fixed.items()})
        base[self.axis] = float(value)
        return ModelParams(**base, k12=self.k12, d_ext=self.d_ext, d_axn=self.d_axn)


@dataclass
class SweepRecord:
    value: float
    params: ModelParams
    kind: EquilibriumKind
    times: np.ndarray
    p_avg: np.ndarray | None      # None for FK
    q_avg: np.ndarray             # FK reports q_max * c
    snapshots: dict[float, np.ndarray]

    def phase_space(self) -> np.ndarray | None:
        if self.p_avg is None:
            return None
        return np.column_stack([self.p_avg, self.q_avg])


@dataclass
class SweepResult:
    spec: SweepSpec
    records: list[SweepRecord]

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.records]


def _run_point(mesh: PolyMesh, spec: SweepSpec, value: float) -> SweepRecord:
    params = spec.params_for(value)
    seed = spec.seed or default_seed(spec.protein, mesh)
    _, traj = simulate(mesh, spec.model, params, spec.solver, seed, spec.snapshot_times)
    kind = classify_equilibrium(params).kind
    if spec.model == "fk":
        return SweepRecord(value, params, kind, traj.times, None, params.q_max * traj.average("c"),
                           traj.snapshots)
    return SweepRecord(value, params, kind, traj.times, traj.average("p"), traj.average("q"), traj.snapshots)


def run_sweep(spec: SweepSpec, mesh: PolyMesh, values: Sequence[float] | None = None,
              workers: int = 1) -> SweepResult:
    """Solve each sweep point independently; records come back sorted by value."""
    vals = sorted(set(float(v) for v in values)) if values is not None else spec.resolved_values()
    if workers > 1 and len(vals) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_point, [mesh] * len(vals), [spec] * len(vals), vals))
    else:
        records = [_run_point(mesh, spec, v) for v in vals]
    return SweepResult(spec, sorted(records, key=lambda r: r.value))


def merge_sweeps(results: Sequence[SweepResult]) -> SweepResult:
    """Combine sweeps of one spec over disjoint value sets."""
    if not results:
        raise ValueError("nothing to merge")
    spec = results[0].spec
    for r in results[1:]:
        if replace(r.spec, values=None, quantiles=None) != replace(spec, values=None, quantiles=None):
            raise ValueError("cannot merge sweeps with different settings")
    records = [rec for r in results for rec in r.records]
    vals = [rec.value for rec in records]
    if len(set(vals)) != len(vals):
        raise ValueError("sweep value sets overlap")
    return SweepResult(spec, sorted(records, key=lambda r: r.value))


def time_to_fraction(times: np.ndarray, series: np.ndarray, level: float) -> float | None:
    """First time ``series`` reaches ``level`` (linear interpolation), or None."""
    idx = np.flatnonzero(series >= level)
    if idx.size == 0:
        return None
    k = int(idx[0])
    if k == 0:
        return float(times[0])
    s0, s1 = series[k - 1], series[k]
    return float(times[k - 1] + (level - s0) / (s1 - s0) * (times[k] - times[k - 1]))
