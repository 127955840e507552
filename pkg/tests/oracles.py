"""Independent reference computations used to freeze expected test values.

Nothing in here imports the package under test. Every function recomputes
its quantity by a route different from the library implementation: exact
rational arithmetic, brute-force series summation, generic quadrature, or
black-box scalar minimization.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar


def hamiltonian_exact(p, p_x, p_p, m, g):
    """Optimal Hamiltonian in exact rational arithmetic."""
    p, p_x, p_p, m, g = map(Fraction, (p, p_x, p_p, m, g))
    return -Fraction(1, 2) * p_p**2 + p_x * p / m - m * g * p_p


def costate_jump_exact(p, p_x, p_p, m, g, c):
    """Impact map on (p, p_x, p_p) in exact rational arithmetic."""
    p, p_x, p_p, m, g, c = map(Fraction, (p, p_x, p_p, m, g, c))
    c2 = c * c
    p_new = -c2 * p
    pp_new = -p_p / c2
    px_new = (-p_x / c2
              + (m / (2 * c2)) * (p_p**2 / p) * (1 - 1 / c2**2)
              + (m**2 * g / c2) * (p_p / p) * (1 + 1 / c2))
    return p_new, px_new, pp_new


def zeno_time_brute(x0, p0, m, g, c, n_bounces=2000):
    """Accumulation time by explicit flight-by-flight summation.

    First flight integrated in closed form from (x0, p0); every subsequent
    flight starts at ground level with the restitution-damped momentum, so
    its duration is 2*q/(m*g). No geometric-series shortcut.
    """
    s = math.sqrt((p0 / m) ** 2 + 2 * g * x0)
    t = (p0 / m + s) / g
    q = c * c * m * s
    for _ in range(n_bounces):
        t += 2 * q / (m * g)
        q *= c * c
    return t


def zeno_time_printed(x0, p0, m, g, c):
    """The alternative closed form, coefficient 3, substituted verbatim."""
    return p0 / (m * g) + 3 / (g * (1 - c * c)) * math.sqrt((p0 / m) ** 2 + 2 * g * x0)


def steering_cost_quadrature(T, g, m=1.0):
    """Minimum-energy cost to steer the double integrator (0,0) -> (1,0).

    Solves the two-point boundary problem by linear algebra on the control
    primitives u(t) = a + b*t (the optimal control is affine in time), then
    integrates u^2/2 numerically. Independent of any closed-form cost.
    """
    # p(T) = int (u - m g) = a T + b T^2/2 - m g T  == 0
    # x(T) = (1/m) int p   = a T^2/2 + b T^3/6 - g T^2/2  == 1  (times 1/m)
    A = np.array([[T, T**2 / 2.0], [T**2 / (2 * m), T**3 / (6 * m)]])
    rhs = np.array([m * g * T, 1.0 + g * T**2 / 2.0])
    a, b = np.linalg.solve(A, rhs)
    val, _ = quad(lambda t: 0.5 * (a + b * t) ** 2, 0.0, T, limit=200)
    return val


def optimal_switch_numeric(g, m=1.0):
    """Black-box 1-D minimization of the quadrature-based steering cost."""
    res = minimize_scalar(lambda T: steering_cost_quadrature(T, g, m),
                          bounds=(0.1, 100.0), method="bounded",
                          options={"xatol": 1e-10})
    return res.x, res.fun


def geometric_impact_times(t0, first_gap, ratio, n):
    """Impact times with exactly geometric gaps, plus the exact limit."""
    times = [t0]
    gap = first_gap
    for _ in range(n):
        times.append(times[-1] + gap)
        gap *= ratio
    limit = t0 + first_gap / (1.0 - ratio)
    return times, limit


def first_cubic_root_reference(coeffs, t_hi, m=1.0):
    """Smallest root in (0, t_hi] of a cubic height polynomial where the
    momentum (m * dx/dt) is negative, via numpy's companion-matrix roots."""
    c0, c1, c2, c3 = coeffs  # x(t) = c0 + c1 t + c2 t^2 + c3 t^3
    roots = np.roots([c3, c2, c1, c0]) if abs(c3) > 0 else (
        np.roots([c2, c1, c0]) if abs(c2) > 0 else np.roots([c1, c0]))
    best = None
    for r in roots:
        if abs(r.imag) > 1e-9:
            continue
        t = r.real
        if t <= 1e-12 or t > t_hi:
            continue
        slope = c1 + 2 * c2 * t + 3 * c3 * t**2
        if slope < 0 and (best is None or t < best):
            best = t
    return best


if __name__ == "__main__":
    # Frozen-value report; run once and copy literals into tests.
    print("== extended reset example (0,-1,1,1), m=g=1, c=3/4 ==")
    p_new, px_new, pp_new = costate_jump_exact(-1, 1, 1, 1, 1, Fraction(3, 4))
    print("p+  =", p_new, float(p_new))
    print("px+ =", px_new, float(px_new))
    print("pp+ =", pp_new, float(pp_new))
    h0 = hamiltonian_exact(-1, 1, 1, 1, 1)
    h1 = hamiltonian_exact(p_new, px_new, pp_new, 1, 1)
    print("H before/after:", h0, h1, "equal:", h0 == h1)

    print("== zeno times ==")
    print("series (1,0) brute :", repr(zeno_time_brute(1.0, 0.0, 1.0, 1.0, 0.75)))
    print("series (0.1,0)     :", repr(zeno_time_brute(0.1, 0.0, 1.0, 1.0, 0.75)))
    print("series (0,1) c=.5  :", repr(zeno_time_brute(0.0, 1.0, 1.0, 1.0, 0.5)))
    print("printed (1,0)      :", repr(zeno_time_printed(1.0, 0.0, 1.0, 1.0, 0.75)))

    print("== steering cost by quadrature ==")
    print("J(1, g=2)    :", repr(steering_cost_quadrature(1.0, 2.0)))
    print("J(sqrt6, g=1):", repr(steering_cost_quadrature(math.sqrt(6.0), 1.0)))
    print("J(1000, g=1) :", repr(steering_cost_quadrature(1000.0, 1.0)))
    print("closed J*    :", repr(2.0 * math.sqrt(6.0) / 3.0))

    print("== numeric optimal switch ==")
    for g in (1.0, 4.0):
        T, J = optimal_switch_numeric(g)
        print(f"g={g}: T*={T!r} (closed {math.sqrt(6.0 / g)!r}) J*={J!r} "
              f"(closed {(2.0 / 3.0) * g * math.sqrt(6.0 * g)!r})")

    print("== switch-on costates, m=1 ==")
    for g in (1.0, 4.0):
        print(f"g={g}: px={-math.sqrt(2.0 / 3.0) * g ** 1.5!r} pp={-2.0 * g!r}")

    print("== free fall from (1,0) ==")
    print("t1 =", repr(math.sqrt(2.0)), " v1 =", repr(-math.sqrt(2.0)))

    print("== ratio of printed to series sqrt coefficients over c ==")
    for c in (0.5, math.sqrt(3.0) - 1.0, 1.0 / math.sqrt(2.0), 0.75, 0.9):
        print(f"c={c:.5f}: 3/(1+c^2) = {3.0 / (1.0 + c * c):.6f}")
