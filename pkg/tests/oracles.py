"""Independent reference values used by the tests.

Nothing here imports the package: each oracle is a separate transcription of
the closed forms, evaluated exactly (rational Taylor coefficients) or in
extended precision (mpmath).
"""

from fractions import Fraction
from math import factorial

import mpmath
import numpy as np

# f(z) = (P(z) + Q(z) exp(s z)) / (d z^p); polynomials low order first
RATIONAL_EXP = {
    "phi1": ([-1], [1], Fraction(1), 1, 1),
    "phi1_half": ([-1], [1], Fraction(1, 2), 1, 1),
    "a2": ([-1, -1], [1], Fraction(1), 1, 2),
    "a2_printed": ([1, 1], [-1], Fraction(1), 1, 2),
    "e1": ([-4, -1], [4, -3, 1], Fraction(1), 1, 3),
    "e2": ([4, 2], [-4, 2], Fraction(1), 1, 3),
    "e3": ([-4, -3, -1], [4, -1], Fraction(1), 1, 3),
    "b4": ([8, 4], [-8, 4], Fraction(1), 1, 3),
    "variance": ([-1], [1], Fraction(2), 2, 1),
}


def taylor_coefficients(name, n_terms=20):
    """Exact Taylor coefficients of f about z = 0."""
    P, Q, s, d, p = RATIONAL_EXP[name]
    total = n_terms + p
    num = [Fraction(0)] * total
    for i, c in enumerate(P):
        if i < total:
            num[i] += c
    for j, q in enumerate(Q):
        for n in range(j, total):
            num[n] += Fraction(q) * s ** (n - j) / factorial(n - j)
    if any(num[:p]):
        raise ValueError(f"{name}: numerator does not vanish to order {p}")
    return [c / d for c in num[p:]]


def taylor_eval(name, z, n_terms=20):
    coeffs = [complex(c) for c in taylor_coefficients(name, n_terms)]
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for c in reversed(coeffs):
        out = out * z + c
    return out


def mp_closed_form(name, z, dps=50):
    """Closed form evaluated in extended precision."""
    P, Q, s, d, p = RATIONAL_EXP[name]
    with mpmath.workdps(dps):
        zz = mpmath.mpc(complex(z))
        poly = lambda c: sum(mpmath.mpf(ci) * zz ** i for i, ci in enumerate(c))
        val = (poly(P) + poly(Q) * mpmath.exp(mpmath.mpf(s.numerator) / s.denominator * zz))
        val /= d * zz ** p
        return complex(val)


def limit_at_zero(name):
    return taylor_coefficients(name, 1)[0]


def levy_alt_second_moment(T, n_steps=None):
    """E[Alt(J_12)^2] with Alt = (J_12 - J_21)/2.

    Continuum (Ito isometry): J_12 - J_21 = int W1 dW2 - int W2 dW1, each term
    has second moment int_0^T t dt = T^2/2 and the cross moment is
    int_0^T E[W1 W2] dt = 0, so E[(J_12 - J_21)^2] = T^2.

    Midpoint sums on n steps of size h: E[(sum mid(W1) dW2)^2] =
    h sum_k (k h + h/4) = T^2/2 - T h/4, and the cross moment picks up
    (dW1_k/2)(dW2_k/2) dW1_k dW2_k per step, i.e. T h/4.  Hence
    E[(J_12 - J_21)^2] = T^2 - T h.
    """
    if n_steps is None:
        return T**2 / 4
    h = T / n_steps
    return (T**2 - T * h) / 4
