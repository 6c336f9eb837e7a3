import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from polyprion.mesh import generate_structured, split_rule
from polyprion.models import EquilibriumKind
from polyprion.sensitivity import (GammaDist, SeedRegion, SolverSettings, SweepSpec, default_seed, dkw_halfwidth,
                                   ecdf_compare, fit_gamma, gamma_cdf, gamma_pdf, gamma_sample, initial_state,
                                   mean_params, merge_sweeps, protein_distributions, run_sweep, simulate,
                                   time_to_fraction)

from oracles import FROZEN, gamma_cdf_by_quadrature

TAU_PMIN = fit_gamma(4.4557, 3.0400)


@pytest.mark.parametrize("mv,ab", [((4.4557, 3.0400), (5.5307, 1.4657)),
                                   ((0.7168, 0.2737), (0.8772, 2.6189)),
                                   ((3.5042, 1.8217), (5.7406, 1.9236))])
def test_fit_examples(mv, ab):
    d = fit_gamma(*mv)
    assert d.a == pytest.approx(ab[0], abs=5e-4) and d.b == pytest.approx(ab[1], abs=5e-4)


def test_fit_rejects_nonpositive():
    for mv in ((0.0, 1.0), (1.0, 0.0), (-1.0, 2.0)):
        with pytest.raises(ValueError):
            fit_gamma(*mv)
    with pytest.raises(ValueError):
        GammaDist(-1.0, 1.0)


@given(m=st.floats(1e-3, 1e3), v=st.floats(1e-3, 1e3))
def test_fit_inverse(m, v):
    d = fit_gamma(m, v)
    # a = m^2/v - 1 cancels when m^2 << v, costing about v/m^2 ulps on the way back
    tol = 1e-12 * max(1.0, v / m**2)
    assert d.mean == pytest.approx(m, rel=tol)
    assert d.variance == pytest.approx(v, rel=tol)
    d2 = fit_gamma(d.mean, d.variance)
    assert d2.a == pytest.approx(d.a, rel=1e-12, abs=1e-12) and d2.b == pytest.approx(d.b, rel=tol)


def test_pdf_integrates_to_one():
    for d in [TAU_PMIN, GammaDist(-0.5, 2.0), GammaDist(0.0, 0.3)]:
        tot, _ = quad(lambda y: gamma_pdf(d, y), 0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)
        assert tot == pytest.approx(1.0, abs=1e-8)


def test_cdf_against_quadrature_oracle():
    assert gamma_cdf(TAU_PMIN, 4.4557) == pytest.approx(FROZEN["tau_pmin_cdf_at_mean"], abs=1e-12)
    for y in (0.5, 2.0, 7.0):
        assert gamma_cdf(TAU_PMIN, y) == pytest.approx(gamma_cdf_by_quadrature(TAU_PMIN.a, TAU_PMIN.b, y), abs=1e-12)
    assert 0.5 < gamma_cdf(TAU_PMIN, TAU_PMIN.mean) < 0.6


def test_cdf_conventions():
    d = GammaDist(0.0, 1.7)
    assert gamma_cdf(d, 0.0) == 0.0
    assert gamma_cdf(d, np.inf) == 1.0
    assert gamma_cdf(d, -3.0) == 0.0 and gamma_pdf(d, -3.0) == 0.0
    y = np.linspace(0, 5, 11)
    assert np.allclose(gamma_cdf(d, y), 1 - np.exp(-1.7 * y), atol=1e-14)


@given(a=st.floats(-0.9, 20), b=st.floats(0.01, 10), ys=st.lists(st.floats(-5, 100), min_size=2, max_size=20))
def test_cdf_monotone_pdf_nonnegative(a, b, ys):
    d = GammaDist(a, b)
    ys = np.sort(ys)
    assert np.all(np.diff(gamma_cdf(d, ys)) >= 0)
    assert np.all(gamma_pdf(d, ys) >= 0)


def test_sampling_mean_clt():
    x = gamma_sample(TAU_PMIN, 100_000, seed=1)
    assert abs(x.mean() - 4.4557) < 3 * math.sqrt(TAU_PMIN.variance / 1e5)
    assert np.all(x >= 0)


def test_sampling_boost_branch():
    d = GammaDist(-0.6, 1.5)   # shape 0.4 < 1
    x = gamma_sample(d, 100_000, seed=4)
    assert abs(x.mean() - d.mean) < 4 * math.sqrt(d.variance / 1e5)
    assert ecdf_compare(x, d).passed


@given(seed=st.integers(0, 2**32), n=st.integers(1, 700), m=st.integers(1, 700))
def test_sampling_counter_based(seed, n, m):
    a = gamma_sample(TAU_PMIN, n, seed)
    b = gamma_sample(TAU_PMIN, m, seed)
    k = min(n, m)
    assert np.array_equal(a[:k], b[:k])


def test_sampling_errors():
    with pytest.raises(ValueError):
        gamma_sample(TAU_PMIN, 0, 1)


def test_ecdf_examples():
    d = TAU_PMIN
    r = ecdf_compare([float(d.quantile(0.5))], d)
    assert r.ks == pytest.approx(0.5, abs=1e-12) and r.band == pytest.approx(1.358, abs=1e-3) and r.passed
    assert not ecdf_compare(gamma_sample(d, 500, 3) + 10.0, d).passed
    assert dkw_halfwidth(500) == pytest.approx(math.sqrt(math.log(40) / 1000))
    with pytest.raises(ValueError):
        ecdf_compare([], d)


def test_protein_presets():
    assert set(protein_distributions("amyloid")) == {"p_min", "p_delta", "q_max"}
    with pytest.raises(ValueError):
        protein_distributions("prion")
    p = mean_params("tau", q_max=1.0)
    assert p.q_max == 1.0 and p.p_min == 4.4557


def test_seed_region_profiles():
    disc = SeedRegion(center=(0.0, 0.0), radius=1.0)
    assert disc.profile(np.array([0.5, 1.5]), np.array([0.0, 0.0])).tolist() == [1.0, 0.0]
    square = SeedRegion(polygon=((0, 0), (1, 0), (1, 1), (0, 1)), width=0.1)
    v = square.profile(np.array([0.5, 3.0, 1.0]), np.array([0.5, 0.5, 0.5]))
    assert v[0] > 0.99 and v[1] < 1e-6 and v[2] == pytest.approx(0.5)
    assert SeedRegion.from_dict(square.to_dict()) == square
    with pytest.raises(ValueError):
        SeedRegion()
    with pytest.raises(ValueError):
        SeedRegion(center=(0, 0), radius=-1.0)


@pytest.fixture(scope="module")
def mesh():
    return generate_structured(3, 3, region_rule=split_rule(0.5))


SOLVER = SolverSettings(degree=1, dt=0.05, T=0.5)


def test_initial_state(mesh):
    from polyprion.dgspace import build_space, space_average
    S = build_space(mesh, 1)
    p = mean_params("tau")
    y = initial_state(S, "heterodimer", p, SeedRegion(polygon=((0, 0), (1, 0), (1, 1), (0, 1)), amplitude=0.1))
    assert space_average(S, y[:S.ndof]) == pytest.approx(p.p_max)
    assert space_average(S, y[S.ndof:]) == pytest.approx(0.1 * p.q_max)
    seed = default_seed("amyloid", mesh)
    assert seed.center == pytest.approx((0.25, 0.75)) and seed.radius == pytest.approx(0.1)
    with pytest.raises(ValueError):
        initial_state(S, "smoluchowski", p, seed)


def test_fk_sweep_axis_rejected():
    with pytest.raises(ValueError, match="alpha"):
        SweepSpec("fk", "tau", "q_max")


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("heterodimer", "tau", "q_max", values=(0.0,))
    with pytest.raises(ValueError):
        SweepSpec("heterodimer", "tau", "q_max", quantiles=(1.0,))
    spec = SweepSpec("heterodimer", "tau", "q_max")
    vals = spec.resolved_values()
    d = protein_distributions("tau")["q_max"]
    assert len(vals) == 6 and d.mean in vals
    assert vals[0] == pytest.approx(float(d.quantile(0.05)))


def test_single_point_sweep_equals_direct_solve(mesh):
    spec = SweepSpec("heterodimer", "tau", "q_max", values=(0.7168,), solver=SOLVER)
    res = run_sweep(spec, mesh)
    (rec,) = res.records
    _, traj = simulate(mesh, "heterodimer", spec.params_for(0.7168), SOLVER, default_seed("tau", mesh))
    assert np.array_equal(rec.q_avg, traj.average("q")) and np.array_equal(rec.p_avg, traj.average("p"))
    assert rec.kind is EquilibriumKind.STABLE_FOCUS
    assert rec.phase_space().shape == (len(traj.times), 2)


def test_sweep_merge_order_independent(mesh):
    spec = SweepSpec("fk", "tau", "p_delta", values=(1.0, 2.0, 3.0), solver=SOLVER)
    whole = run_sweep(spec, mesh)
    parts = [run_sweep(spec, mesh, values=[3.0]), run_sweep(spec, mesh, values=[1.0, 2.0])]
    merged = merge_sweeps(parts)
    pooled = run_sweep(spec, mesh, workers=2)
    for other in (merged, pooled):
        assert other.values == whole.values == [1.0, 2.0, 3.0]
        for a, b in zip(whole.records, other.records):
            assert np.array_equal(a.q_avg, b.q_avg)
    assert whole.records[0].p_avg is None
    with pytest.raises(ValueError):
        merge_sweeps([whole, parts[0]])


def test_fk_reports_non_normalised(mesh):
    spec = SweepSpec("fk", "tau", "p_delta", values=(2.0,), solver=SOLVER)
    rec = run_sweep(spec, mesh).records[0]
    _, traj = simulate(mesh, "fk", rec.params, SOLVER, default_seed("tau", mesh))
    assert np.array_equal(rec.q_avg, rec.params.q_max * traj.average("c"))


def test_time_to_fraction():
    t = np.array([0.0, 1.0, 2.0])
    assert time_to_fraction(t, np.array([0.0, 0.4, 0.8]), 0.6) == pytest.approx(1.5)
    assert time_to_fraction(t, np.array([0.0, 0.1, 0.2]), 0.6) is None
