"""Independent reference solutions used by the tests.

Each oracle avoids the package's own numerics: the kinetics oracle is an
adaptive Runge-Kutta 4(5) integration of the two-equation ODE written out
here, the logistic oracle is closed form, and the Gamma CDF oracle integrates
the density by adaptive quadrature.
"""
import math

import numpy as np
from scipy.integrate import quad, solve_ivp

K12 = 0.2

# (p_min, p_delta, q_max) at the distribution means
TAU_MEANS = (4.4557, 3.5042, 0.7168)
AMYLOID_MEANS = (5.74, 3.05, 13.086)


def heterodimer_ode(p_min, p_delta, q_max, k12=K12):
    k0 = p_min * (p_min + p_delta) * q_max / p_delta * k12
    k1 = p_min * q_max / p_delta * k12
    kt = p_min * k12

    def f(t, y):
        return [k0 - k1 * y[0] - k12 * y[0] * y[1], -kt * y[1] + k12 * y[0] * y[1]]

    return f


def kinetics_oracle(p_min, p_delta, q_max, y0, times, k12=K12):
    """(len(times), 2) array of (p, q) from a tightly converged RK45 run."""
    times = np.asarray(times, dtype=float)
    sol = solve_ivp(heterodimer_ode(p_min, p_delta, q_max, k12), (times[0], times[-1]), y0,
                    method="RK45", t_eval=times, rtol=1e-12, atol=1e-14)
    assert sol.success
    return sol.y.T


def logistic(c0, alpha, t):
    t = np.asarray(t, dtype=float)
    e = np.exp(alpha * t)
    return c0 * e / (1.0 + c0 * (e - 1.0))


def gamma_cdf_by_quadrature(a, b, y):
    """CDF of b^(a+1)/Gamma(a+1) x^a exp(-b x) by numerical integration."""
    norm = math.exp((a + 1) * math.log(b) - math.lgamma(a + 1))
    val, _ = quad(lambda x: norm * x**a * math.exp(-b * x), 0.0, y, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def manufactured_u(x, y):
    return np.cos(np.pi * x) * np.cos(np.pi * y)


def manufactured_f(x, y):
    # -Laplace(u) + u for u above
    return (2.0 * np.pi**2 + 1.0) * manufactured_u(x, y)


# Values produced by the oracles above on first run and frozen here; the
# oracle test re-derives them so a drifting environment is caught.
FROZEN = {
    "tau_t40": (4.460911451974843, 0.7152589323144996),
    "amyloid_t40": (5.740000412534554, 13.085997441169203),
    "logistic_tau_t10": 0.9919274089270873,
    "tau_pmin_cdf_at_mean": 0.5520655396306245,
}
