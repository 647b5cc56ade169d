"""One-step maps: SRK, SIFRK, SETDRK and the exponential Ito family.

The Stratonovich schemes are written as ordinary deterministic integrators
acting on a vector field ``F(t, u)``.  The stochastic versions differ only in
what ``F`` is: the frozen field from :mod:`stochetd.sde_core` with this step's
increment folded in.  Consequently a step with M = 0 runs exactly the same
code path as the deterministic method.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (BlowUp, CoefficientMismatch, InvalidConfig, MissingLinearPart,
                     NonFinite)
from .noise import BrownianPaths, rng_for
from .phi_functions import ContourConfig, EtdCoefficientSet, etd_coefficient_set, operator_hash
from .sde_core import Increment, SdeProblem, check_increment, frozen_field, frozen_nonlinear


class SchemeId(str, Enum):
    SRK = "srk"
    SSP22 = "ssp22"
    SSP33 = "ssp33"
    SRK4 = "srk4"
    SIFRK = "sifrk"
    IFSRK4 = "ifsrk4"
    ESSPIFSRK22 = "esspifsrk22"
    ESSPIFSRK33 = "esspifsrk33"
    SETDRK2 = "setdrk2"
    SETDRK3 = "setdrk3"
    SETDRK4 = "setdrk4"
    SIFEM = "sifem"
    SETDM10 = "setdm10"
    SETDM01 = "setdm01"
    CSETDRK1 = "csetdrk1"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float)
        s = len(b)
        if A.shape != (s, s):
            raise InvalidConfig(f"A must be {s}x{s}, got {A.shape}")
        if np.any(np.triu(A) != 0):
            raise InvalidConfig("only explicit (strictly lower-triangular) tableaux")
        c = A.sum(axis=1) if self.c is None else np.asarray(self.c, dtype=float)
        if not np.allclose(c, A.sum(axis=1), atol=1e-14):
            raise InvalidConfig("nodes violate c = A 1")
        if abs(b.sum() - 1) > 1e-14:
            raise InvalidConfig("weights must sum to 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return len(self.b)


HEUN = ButcherTableau([[0, 0], [1, 0]], [0.5, 0.5], name="heun")
SSP33_TABLEAU = ButcherTableau([[0, 0, 0], [1, 0, 0], [0.25, 0.25, 0]],
                               [1 / 6, 1 / 6, 2 / 3], name="ssp33")
RK4 = ButcherTableau([[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]],
                     [1 / 6, 1 / 3, 1 / 3, 1 / 6], name="rk4")
EULER = ButcherTableau([[0]], [1], name="euler")


@dataclass(frozen=True)
class OrderProfile:
    P_d: Fraction
    P_dc: Fraction
    P_c: Fraction
    P_s: Fraction


def _strat_profile(p):
    return OrderProfile(Fraction(p), Fraction(p // 2), Fraction(1), Fraction(1, 2))


_ITO_PROFILE = OrderProfile(Fraction(1), Fraction(0), Fraction(1, 2), Fraction(1, 2))

ORDER_PROFILES = {
    SchemeId.SSP22: _strat_profile(2),
    SchemeId.SSP33: _strat_profile(3),
    SchemeId.SRK4: _strat_profile(4),
    SchemeId.IFSRK4: _strat_profile(4),
    SchemeId.ESSPIFSRK22: _strat_profile(2),
    SchemeId.ESSPIFSRK33: _strat_profile(3),
    SchemeId.SETDRK2: _strat_profile(2),
    SchemeId.SETDRK3: _strat_profile(3),
    SchemeId.SETDRK4: _strat_profile(4),
    SchemeId.SIFEM: _ITO_PROFILE,
    SchemeId.SETDM10: _ITO_PROFILE,
    SchemeId.SETDM01: _ITO_PROFILE,
    SchemeId.CSETDRK1: _ITO_PROFILE,
}

SRK_FAMILY = {SchemeId.SRK, SchemeId.SSP22, SchemeId.SSP33, SchemeId.SRK4}
SIFRK_FAMILY = {SchemeId.SIFRK, SchemeId.IFSRK4, SchemeId.ESSPIFSRK22, SchemeId.ESSPIFSRK33}
SETDRK_FAMILY = {SchemeId.SETDRK2, SchemeId.SETDRK3, SchemeId.SETDRK4}
ITO_FAMILY = {SchemeId.SIFEM, SchemeId.SETDM10, SchemeId.SETDM01, SchemeId.CSETDRK1}

# The nine Stratonovich schemes compared throughout, keyed by deterministic order.
NAMED_SCHEMES = {
    2: (SchemeId.SSP22, SchemeId.ESSPIFSRK22, SchemeId.SETDRK2),
    3: (SchemeId.SSP33, SchemeId.ESSPIFSRK33, SchemeId.SETDRK3),
    4: (SchemeId.SRK4, SchemeId.IFSRK4, SchemeId.SETDRK4),
}
SRK_COUNTERPART = {
    SchemeId.ESSPIFSRK22: SchemeId.SSP22, SchemeId.SETDRK2: SchemeId.SSP22,
    SchemeId.ESSPIFSRK33: SchemeId.SSP33, SchemeId.SETDRK3: SchemeId.SSP33,
    SchemeId.IFSRK4: SchemeId.SRK4, SchemeId.SETDRK4: SchemeId.SRK4,
}


def scheme_id(name) -> SchemeId:
    if isinstance(name, SchemeId):
        return name
    try:
        return SchemeId(str(name).lower())
    except ValueError:
        raise InvalidConfig(f"unknown scheme {name!r}") from None


def scheme_order(name) -> int:
    return int(ORDER_PROFILES[scheme_id(name)].P_d)


# -- stage checking -----------------------------------------------------------

class _StageCheck:
    """Wraps a field so the first non-finite stage is reported by index."""

    def __init__(self, f):
        self.f = f
        self.stage = 0

    def __call__(self, t, u):
        self.stage += 1
        if not np.all(np.isfinite(u)):
            raise NonFinite(f"non-finite state entering stage {self.stage}", self.stage)
        out = self.f(t, u)
        if not np.all(np.isfinite(out)):
            raise NonFinite(f"non-finite field value at stage {self.stage}", self.stage)
        return out


def _final_check(u, stage):
    if not np.all(np.isfinite(u)):
        raise NonFinite("non-finite result", stage)
    return u


# -- deterministic maps: plain Runge-Kutta -----------------------------------

def rk_tableau_map(f, tab: ButcherTableau, t, u, h):
    ks = []
    for i in range(tab.stages):
        ui = u
        for j in range(i):
            if tab.A[i, j] != 0:
                ui = ui + h * tab.A[i, j] * ks[j]
        ks.append(f(t + tab.c[i] * h, ui))
    out = u
    for bi, k in zip(tab.b, ks):
        if bi != 0:
            out = out + h * bi * k
    return out


def ssp22_map(f, t, u, h):
    u1 = u + h * f(t, u)
    return 0.5 * u + 0.5 * (u1 + h * f(t + h, u1))


def ssp33_map(f, t, u, h):
    u1 = u + h * f(t, u)
    u2 = 0.75 * u + 0.25 * (u1 + h * f(t + h, u1))
    return u / 3 + (2 / 3) * (u2 + h * f(t + 0.5 * h, u2))


def rk4_map(f, t, u, h):
    k1 = f(t, u)
    k2 = f(t + 0.5 * h, u + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, u + 0.5 * h * k2)
    k4 = f(t + h, u + h * k3)
    return u + h * (k1 / 6 + k2 / 3 + k3 / 3 + k4 / 6)


# -- deterministic maps: integrating factor ----------------------------------

class IfPropagators:
    """exp(c * h * L) for the node offsets a scheme needs, computed once."""

    def __init__(self, lin, h):
        self.lin = np.asarray(lin)
        self.h = h
        self._cache = {}

    def __call__(self, c):
        key = round(float(c), 14)
        e = self._cache.get(key)
        if e is None:
            e = np.exp(key * self.h * self.lin)
            self._cache[key] = e
        return e


def sifrk_map(N, tab: ButcherTableau, E: IfPropagators, t, u, h):
    ns = []
    c = tab.c
    for i in range(tab.stages):
        ui = E(c[i]) * u
        for j in range(i):
            if tab.A[i, j] != 0:
                ui = ui + h * tab.A[i, j] * (E(c[i] - c[j]) * ns[j])
        ns.append(N(t + c[i] * h, ui))
    out = E(1.0) * u
    for i in range(tab.stages):
        if tab.b[i] != 0:
            out = out + h * tab.b[i] * (E(1.0 - c[i]) * ns[i])
    return out


def ifsrk4_map(N, E: IfPropagators, t, u, h):
    e_half, e_full = E(0.5), E(1.0)
    n1 = N(t, u)
    u2 = e_half * (u + 0.5 * h * n1)
    n2 = N(t + 0.5 * h, u2)
    u3 = e_half * u + 0.5 * h * n2
    n3 = N(t + 0.5 * h, u3)
    u4 = e_full * u + h * (e_half * n3)
    n4 = N(t + h, u4)
    return e_full * u + h * (e_full * n1 / 6 + e_half * (n2 + n3) / 3 + n4 / 6)


def esspifsrk22_map(N, E: IfPropagators, t, u, h, form="source"):
    e = E(1.0)
    k1 = e * (u + h * N(t, u))
    if form == "printed":
        return 0.5 * e * u + 0.5 * e * (k1 + h * N(t + h, k1))
    return 0.5 * e * u + 0.5 * (k1 + h * N(t + h, k1))


def esspifsrk33_map(N, E: IfPropagators, t, u, h):
    e23, e1, e13 = E(2 / 3), E(1.0), E(1 / 3)
    n0 = N(t, u)
    euler0 = u + (4 / 3) * h * n0
    k1 = 0.5 * e23 * u + 0.5 * e23 * euler0
    k2 = (2 / 3) * e23 * u + (1 / 3) * (k1 + (4 / 3) * h * N(t + (2 / 3) * h, k1))
    return ((59 / 128) * e1 * u + (15 / 128) * e1 * euler0
            + (27 / 64) * e13 * (k2 + (4 / 3) * h * N(t + (2 / 3) * h, k2)))


# -- deterministic maps: exponential time differencing -----------------------

def etdrk2_map(N, C: EtdCoefficientSet, t, u, h):
    n0 = N(t, u)
    k1 = C["exp_full"] * u + C["A1"] * n0
    return k1 + C["A2"] * (N(t + h, k1) - n0)


def etdrk3_map(N, C: EtdCoefficientSet, t, u, h):
    e_full = C["exp_full"]
    n0 = N(t, u)
    k1 = C["exp_half"] * u + C["B1"] * n0
    n1 = N(t + 0.5 * h, k1)
    k2 = e_full * u + C["B2"] * (2 * n1 - n0)
    n2 = N(t + h, k2)
    return e_full * u + C["B3"] * n0 + C["B4"] * n1 + C["B5"] * n2


def etdrk4_map(N, C: EtdCoefficientSet, t, u, h):
    e_half = C["exp_half"]
    E0 = C["E0"]
    n0 = N(t, u)
    a = e_half * u + E0 * n0
    na = N(t + 0.5 * h, a)
    b = e_half * u + E0 * na
    nb = N(t + 0.5 * h, b)
    c = e_half * a + E0 * (2 * nb - n0)
    nc = N(t + h, c)
    return C["exp_full"] * u + C["E1"] * n0 + C["E2"] * (na + nb) + C["E3"] * nc


# -- steppers -----------------------------------------------------------------

@dataclass
class SchemeOptions:
    esspifsrk22_form: str = "source"
    a2_form: str = "corrected"
    csetdrk1_form: str = "factored"
    contour: ContourConfig = field(default_factory=ContourConfig)


class Stepper:
    """A scheme bound to one problem and one step size, coefficients precomputed.

    ``advance(t, u, dW, z=None)`` performs one step; ``dW`` is shaped (M,) or
    (M, B) and ``u`` correspondingly (n,) or (B, n).
    """

    def __init__(self, problem: SdeProblem, scheme, dt: float, tableau: ButcherTableau = None,
                 options: SchemeOptions = None, coeffs: EtdCoefficientSet = None):
        self.problem = problem
        self.scheme = scheme_id(scheme)
        self.dt = float(dt)
        self.options = options or SchemeOptions()
        self.tableau = tableau
        self.coeffs = None
        self.props = None
        if not self.dt > 0:
            raise InvalidConfig("dt must be positive")
        sid = self.scheme
        if sid in ITO_FAMILY and problem.calculus != "ito":
            raise InvalidConfig(f"{sid} targets Ito problems only")
        if sid not in ITO_FAMILY and problem.calculus == "ito":
            raise InvalidConfig(f"{sid} targets Stratonovich problems only")
        if sid in (SchemeId.SRK, SchemeId.SIFRK) and tableau is None:
            raise InvalidConfig(f"{sid} needs a Butcher tableau")

        start = time.perf_counter()
        if sid in SIFRK_FAMILY:
            if problem.linear_part is None:
                raise MissingLinearPart(f"{sid} needs a linear part")
            self.props = IfPropagators(problem.linear_part, self.dt)
            cs = {0.0, 1.0, 0.5, 2 / 3, 1 / 3}
            if tableau is not None:
                cs |= {float(ci) for ci in tableau.c} | {1 - float(ci) for ci in tableau.c}
                cs |= {float(a - b) for a in tableau.c for b in tableau.c if a >= b}
            for cval in cs:
                self.props(cval)
        elif sid in SETDRK_FAMILY or sid in ITO_FAMILY:
            lin = problem.linear_part
            if lin is None:
                if sid in SETDRK_FAMILY:
                    raise MissingLinearPart(f"{sid} needs a linear part")
                lin = np.zeros(max(problem.dimension, 1))
            if coeffs is None:
                coeffs = etd_coefficient_set(sid, lin, self.dt, self.options.contour,
                                             a2_form=self.options.a2_form)
            self._check_coeffs(coeffs, lin)
            self.coeffs = coeffs
        self.precompute_seconds = time.perf_counter() - start
        self._map = self._bind()

    def _check_coeffs(self, coeffs, lin):
        if coeffs.scheme_id != self.scheme.value:
            raise CoefficientMismatch(f"coefficients built for {coeffs.scheme_id}")
        if abs(coeffs.dt - self.dt) > 1e-15 * self.dt:
            raise CoefficientMismatch(f"coefficients built for dt={coeffs.dt}, step uses {self.dt}")
        if coeffs.operator_hash != operator_hash(np.asarray(lin)):
            raise CoefficientMismatch("coefficients built for a different operator")

    def _bind(self):
        sid, h = self.scheme, self.dt
        tab, E, C = self.tableau, self.props, self.coeffs
        if sid is SchemeId.SRK:
            return lambda f, t, u: rk_tableau_map(f, tab, t, u, h)
        if sid is SchemeId.SSP22:
            return lambda f, t, u: ssp22_map(f, t, u, h)
        if sid is SchemeId.SSP33:
            return lambda f, t, u: ssp33_map(f, t, u, h)
        if sid is SchemeId.SRK4:
            return lambda f, t, u: rk4_map(f, t, u, h)
        if sid is SchemeId.SIFRK:
            return lambda f, t, u: sifrk_map(f, tab, E, t, u, h)
        if sid is SchemeId.IFSRK4:
            return lambda f, t, u: ifsrk4_map(f, E, t, u, h)
        if sid is SchemeId.ESSPIFSRK22:
            form = self.options.esspifsrk22_form
            return lambda f, t, u: esspifsrk22_map(f, E, t, u, h, form)
        if sid is SchemeId.ESSPIFSRK33:
            return lambda f, t, u: esspifsrk33_map(f, E, t, u, h)
        if sid is SchemeId.SETDRK2:
            return lambda f, t, u: etdrk2_map(f, C, t, u, h)
        if sid is SchemeId.SETDRK3:
            return lambda f, t, u: etdrk3_map(f, C, t, u, h)
        if sid is SchemeId.SETDRK4:
            return lambda f, t, u: etdrk4_map(f, C, t, u, h)
        return None

    @property
    def uses_full_field(self) -> bool:
        return self.scheme in SRK_FAMILY

    def deterministic(self, f, t, u):
        """Apply the underlying deterministic map to an arbitrary field."""
        return self._map(f, t, u)

    def field_for(self, weights):
        if self.uses_full_field:
            return frozen_field(self.problem, weights)
        return frozen_nonlinear(self.problem, weights)

    def advance(self, t, u, dW, z=None, check=False):
        dW = np.asarray(dW, dtype=float)
        if self.scheme in ITO_FAMILY:
            return self._ito(t, u, dW, z)
        f = self.field_for(dW / self.dt)
        if check:
            f = _StageCheck(f)
            out = self._map(f, t, u)
            return _final_check(out, f.stage)
        return self._map(f, t, u)

    def _ito(self, t, u, dW, z):
        problem, h, C = self.problem, self.dt, self.coeffs
        sid = self.scheme
        e = C["exp_full"]
        n = problem.nonlinear(t, u)
        if problem.channels == 0:
            noise = 0.0
        elif sid is SchemeId.SETDM01:
            if z is None:
                raise InvalidConfig("SETDM01 needs the auxiliary standard normal z")
            noise = problem.noise(t, u, np.asarray(z, dtype=float))
        else:
            noise = problem.noise(t, u, dW)
        if sid is SchemeId.SIFEM:
            return e * (u + h * n + noise)
        if sid is SchemeId.SETDM10:
            return e * u + C["P1"] * n + e * noise
        if sid is SchemeId.SETDM01:
            return e * u + C["P1"] * n + C["V"] * noise
        # CSETDRK1
        if self.options.csetdrk1_form == "separate":
            return e * u + C["P1"] * n + (C["P1"] / h) * noise
        return e * u + C["P1"] * (n + noise / h)


_STEPPERS: dict = {}


def get_stepper(problem, scheme, dt, tableau=None, options=None) -> Stepper:
    """Cached stepper; keyed on object identity of the problem and tableau."""
    options = options or SchemeOptions()
    key = (id(problem), scheme_id(scheme), float(dt), id(tableau), repr(options))
    hit = _STEPPERS.get(key)
    if hit is not None and hit.problem is problem and hit.tableau is tableau:
        return hit
    st = Stepper(problem, scheme, dt, tableau=tableau, options=options)
    if len(_STEPPERS) > 256:
        _STEPPERS.clear()
    _STEPPERS[key] = st
    return st


# -- public single-step operations -------------------------------------------

_NAMED_TABLEAU_IDS = {"heun": None, "ssp22": SchemeId.SSP22, "ssp33": SchemeId.SSP33,
                      "rk4": SchemeId.SRK4, "srk4": SchemeId.SRK4}


def step_srk(problem: SdeProblem, tableau, t, u, inc: Increment, check=True):
    """One SRK step.  ``tableau`` is a ButcherTableau or one of the named ids
    ssp22 / ssp33 / srk4, which dispatch to their Shu-Osher or classical forms."""
    check_increment(problem, inc)
    if isinstance(tableau, ButcherTableau):
        st = get_stepper(problem, SchemeId.SRK, inc.dt, tableau=tableau)
    else:
        sid = scheme_id(tableau)
        if sid not in SRK_FAMILY - {SchemeId.SRK}:
            raise InvalidConfig(f"{sid} is not an SRK scheme")
        st = get_stepper(problem, sid, inc.dt)
    return st.advance(t, u, inc.dW, check=check)


def step_sifrk(problem: SdeProblem, scheme, t, u, inc: Increment, tableau=None,
               options: SchemeOptions = None, check=True):
    check_increment(problem, inc)
    sid = scheme_id(scheme)
    if sid not in SIFRK_FAMILY:
        raise InvalidConfig(f"{sid} is not an SIFRK scheme")
    if problem.linear_part is None:
        raise MissingLinearPart(f"{sid} needs a linear part")
    st = get_stepper(problem, sid, inc.dt, tableau=tableau, options=options)
    return st.advance(t, u, inc.dW, check=check)


def step_setdrk(problem: SdeProblem, coeffs: EtdCoefficientSet, t, u, inc: Increment,
                check=True):
    check_increment(problem, inc)
    if problem.linear_part is None:
        raise MissingLinearPart("SETDRK schemes need a linear part")
    sid = scheme_id(coeffs.scheme_id)
    if sid not in SETDRK_FAMILY:
        raise CoefficientMismatch(f"{sid} coefficients are not SETDRK coefficients")
    st = Stepper(problem, sid, inc.dt, coeffs=coeffs)
    return st.advance(t, u, inc.dW, check=check)


def step_ito(problem: SdeProblem, scheme, t, u, inc: Increment, z=None,
             options: SchemeOptions = None):
    check_increment(problem, inc)
    sid = scheme_id(scheme)
    if sid not in ITO_FAMILY:
        raise InvalidConfig(f"{sid} is not an Ito scheme")
    st = get_stepper(problem, sid, inc.dt, options=options)
    out = st.advance(t, u, inc.dW, z=z)
    return _final_check(out, 1)


def step(problem: SdeProblem, scheme, t, u, inc: Increment, tableau=None,
         options: SchemeOptions = None, z=None):
    """Uniform entry point over every family."""
    check_increment(problem, inc)
    st = get_stepper(problem, scheme, inc.dt, tableau=tableau, options=options)
    return st.advance(t, u, inc.dW, z=z)


# -- trajectories ---------------------------------------------------------------

@dataclass
class Trajectory:
    final: np.ndarray
    times: list
    snapshots: list
    blowup_step: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.blowup_step is None

    def raise_for_blowup(self):
        if self.blowup_step is not None:
            raise BlowUp(self.blowup_step)
        return self


@dataclass
class EnsembleResult:
    final: np.ndarray          # (B, n); rows of failed members are NaN
    blowup_step: np.ndarray    # (B,), -1 where the member survived
    times: list
    snapshots: list            # each (B, n)
    seconds: float = 0.0

    @property
    def ok(self) -> np.ndarray:
        return self.blowup_step < 0


def integrate_ensemble(problem: SdeProblem, scheme, u0, t0, increments, dt, tableau=None,
                       options: SchemeOptions = None, snapshot_every: int = 0,
                       aux_normals=None, stepper: Stepper = None) -> EnsembleResult:
    """Advance B members together; ``increments`` has shape (M, B, n_steps).

    Members that go non-finite are frozen at zero and reported with the step
    index at which they failed; the others continue.
    """
    increments = np.asarray(increments, dtype=float)
    M, B, n_steps = increments.shape
    if M != problem.channels:
        raise InvalidConfig(f"increments carry {M} channels, problem has {problem.channels}")
    st = stepper or get_stepper(problem, scheme, dt, tableau=tableau, options=options)
    u = np.array(np.broadcast_to(u0, (B,) + np.shape(u0)[-1:]))
    blown = np.full(B, -1)
    alive = np.ones(B, dtype=bool)
    times, snaps = [], []
    if snapshot_every:
        times.append(t0)
        snaps.append(u.copy())
    start = time.perf_counter()
    with np.errstate(all="ignore"):
        for i in range(n_steps):
            t = t0 + i * dt
            z = None if aux_normals is None else aux_normals[:, :, i]
            u = st.advance(t, u, increments[:, :, i], z=z)
            finite = np.isfinite(u).all(axis=-1)
            if not finite.all():
                newly = alive & ~finite
                blown[newly] = i
                alive &= finite
                u[~finite] = 0
            if snapshot_every and (i + 1) % snapshot_every == 0:
                times.append(t0 + (i + 1) * dt)
                snaps.append(u.copy())
    seconds = time.perf_counter() - start
    final = u.astype(complex if np.iscomplexobj(u) else float)
    final[~alive] = np.nan
    for s in snaps:
        s[~alive] = np.nan
    return EnsembleResult(final, blown, times, snaps, seconds)


def integrate_path(problem: SdeProblem, scheme, u0, t0, paths: BrownianPaths, n_steps=None,
                   tableau=None, options: SchemeOptions = None, snapshot_every: int = 0,
                   aux_normals=None) -> Trajectory:
    """Iterate a one-step map along one Brownian path at the path's own resolution."""
    dt = paths.dt_fine
    n_steps = paths.n_steps if n_steps is None else int(n_steps)
    if n_steps > paths.n_steps:
        raise InvalidConfig("path is shorter than the requested number of steps")
    if n_steps == 0:
        u0 = np.array(u0)
        return Trajectory(u0, [t0], [u0.copy()] if snapshot_every else [])
    inc = paths.increments[:, None, :n_steps]
    if aux_normals is None and scheme_id(scheme) is SchemeId.SETDM01:
        rng = rng_for(paths.seed, paths.path_index + (1 << 40))
        aux_normals = rng.standard_normal(inc.shape)
    elif aux_normals is not None:
        aux_normals = np.asarray(aux_normals)[:, None, :n_steps]
    res = integrate_ensemble(problem, scheme, np.asarray(u0)[None], t0, inc, dt, tableau=tableau,
                             options=options, snapshot_every=snapshot_every,
                             aux_normals=aux_normals)
    blow = None if res.blowup_step[0] < 0 else int(res.blowup_step[0])
    return Trajectory(res.final[0], res.times, [s[0] for s in res.snapshots], blow)


def select_esspifsrk22_form(lam: complex = -1.0 + 2.0j, dt_base: float = 0.1) -> str:
    """Pick the eSSPIFSRK22 formulation that is second order on u' = lam u.

    With N = 0 only the integrating factor acts, so the exact answer is
    exp(lam t); the printed form squares the propagator on one branch.
    """
    lin = np.array([lam])
    # N = 0 alone cannot reveal a missing order; add a small linear forcing
    prob = SdeProblem(nonlinear=lambda t, u: 0.5 * u, linear_part=lin, dimension=1)
    exact_rate = lam + 0.5
    best, best_err = None, math.inf
    for form in ("source", "printed"):
        errs = []
        for dt in (dt_base, dt_base / 2, dt_base / 4):
            st = Stepper(prob, SchemeId.ESSPIFSRK22, dt,
                         options=SchemeOptions(esspifsrk22_form=form))
            u = np.array([1.0 + 0j])
            n = int(round(1.0 / dt))
            for i in range(n):
                u = st.deterministic(prob.nonlinear, i * dt, u)
            errs.append(abs(u[0] - np.exp(exact_rate)))
        slope = math.log2(errs[1] / errs[2]) if errs[2] > 0 else math.inf
        if abs(slope - 2) < 0.3 and errs[2] < best_err:
            best, best_err = form, errs[2]
    if best is None:
        raise InvalidConfig("neither eSSPIFSRK22 form is second order")
    return best
