"""Finite-difference Lie brackets and noise commutativity classification.

[F, G](u) = DG(u)[F(u)] - DF(u)[G(u)], each directional derivative taken by
central differences along the normalised direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateDirection, InvalidConfig
from .sde_core import SdeProblem

DEGENERATE_NORM = 1e-14


class Commutativity(str, Enum):
    NON_COMMUTATIVE = "NonCommutative"
    COMMUTATIVE = "Commutative"
    DRIFT_COMMUTATIVE = "DriftCommutative"

    def __str__(self):
        return self.value


def default_eps(u) -> float:
    return 1e-5 * max(float(np.linalg.norm(u)), 1.0)


def directional_derivative(phi, u, v, eps=None):
    """DPhi(u)[v] by a central difference along v / |v|."""
    nv = float(np.linalg.norm(v))
    if nv < DEGENERATE_NORM:
        raise DegenerateDirection(f"direction norm {nv:.3g} is below {DEGENERATE_NORM}")
    eps = default_eps(u) if eps is None else eps
    if not eps > 0:
        raise InvalidConfig("eps must be positive")
    vh = v / nv
    return (phi(u + eps * vh) - phi(u - eps * vh)) * (nv / (2 * eps))


def _dd_or_zero(phi, u, v, eps):
    try:
        return directional_derivative(phi, u, v, eps)
    except DegenerateDirection:
        return np.zeros_like(phi(u))


def bracket_terms(F, G, u, eps=None):
    """The two halves DG(u)[F(u)] and DF(u)[G(u)] of the bracket."""
    return _dd_or_zero(G, u, F(u), eps), _dd_or_zero(F, u, G(u), eps)


def lie_bracket(F, G, u, eps=None):
    """[F, G](u); ``F`` and ``G`` take the state only."""
    a, b = bracket_terms(F, G, u, eps)
    return a - b


@dataclass
class CommutativityReport:
    drift_brackets: np.ndarray       # (M,) max |[f, g_i]|
    noise_brackets: np.ndarray       # (M, M) max |[g_i, g_j]|
    drift_relative: np.ndarray       # divided by |Dg[f]| + |Df[g]|
    noise_relative: np.ndarray       # divided by sqrt(|Dg_i[g_i]| |Dg_j[g_j]|)
    tolerance: float
    classification: Commutativity
    eps: float = None
    n_probes: int = 0
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "drift_brackets": self.drift_brackets.tolist(),
            "noise_brackets": self.noise_brackets.tolist(),
            "drift_relative": self.drift_relative.tolist(),
            "noise_relative": self.noise_relative.tolist(),
            "tolerance": self.tolerance,
            "classification": self.classification.value,
            "eps": self.eps,
            "n_probes": self.n_probes,
            "probe_states": "initial condition plus random low-mode perturbations"
            if self.n_probes > 1 else "initial condition",
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def default_probe_states(u0, n_random=2, seed=0, scale=0.1, modes=8):
    """u0 plus ``n_random`` perturbations supported on the lowest few modes."""
    u0 = np.asarray(u0)
    rng = np.random.default_rng(seed)
    amp = scale * max(float(np.linalg.norm(u0)), 1.0)
    out = [u0]
    for _ in range(n_random):
        p = np.zeros_like(u0)
        m = min(modes, u0.shape[-1] - 1)
        if np.iscomplexobj(u0):
            p[1:m + 1] = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        else:
            p[:m] = rng.standard_normal(m)
        out.append(u0 + amp * p / np.linalg.norm(p))
    return out


def _ratio(nb, scale):
    return nb / scale if scale > 0 else 0.0


def self_composition(G, u, eps=None):
    """|DG(u)[G(u)]|, the size of a field acting on itself."""
    return float(np.linalg.norm(_dd_or_zero(G, u, G(u), eps)))


def commutativity_report(problem: SdeProblem, probe_states, eps=None, tol=1e-3,
                         t=0.0) -> CommutativityReport:
    """Maximum bracket norms over the probes and the resulting noise class.

    A drift bracket counts as zero when it is below ``tol`` times the two
    compositions it is the difference of.  A noise bracket is measured
    against sqrt(|Dg_i[g_i]| |Dg_j[g_j]|) instead: for fields with disjoint
    supports both cross compositions are themselves only truncation leakage,
    so they are no scale at all.
    """
    probes = list(probe_states)
    if not probes:
        raise InvalidConfig("need at least one probe state")
    M = problem.channels
    f = lambda u: problem.drift(t, u)
    gs = [(lambda u, g=g: g(t, u)) for g in problem.diffusions]
    drift_abs = np.zeros(M)
    drift_rel = np.zeros(M)
    noise_abs = np.zeros((M, M))
    noise_rel = np.zeros((M, M))
    eps_used = None
    for u in probes:
        e = default_eps(u) if eps is None else eps
        eps_used = e if eps_used is None else max(eps_used, e)
        selfs = [self_composition(g, u, e) for g in gs]
        for i, gi in enumerate(gs):
            a, b = bracket_terms(f, gi, u, e)
            nb = float(np.linalg.norm(a - b))
            rel = _ratio(nb, float(np.linalg.norm(a) + np.linalg.norm(b)))
            drift_abs[i] = max(drift_abs[i], nb)
            drift_rel[i] = max(drift_rel[i], rel)
            for j in range(i + 1, M):
                a, b = bracket_terms(gi, gs[j], u, e)
                nb = float(np.linalg.norm(a - b))
                rel = _ratio(nb, np.sqrt(selfs[i] * selfs[j]))
                noise_abs[i, j] = noise_abs[j, i] = max(noise_abs[i, j], nb)
                noise_rel[i, j] = noise_rel[j, i] = max(noise_rel[i, j], rel)
    if np.any(noise_rel >= tol):
        cls = Commutativity.NON_COMMUTATIVE
    elif np.all(drift_rel < tol):
        cls = Commutativity.DRIFT_COMMUTATIVE
    else:
        cls = Commutativity.COMMUTATIVE
    return CommutativityReport(drift_abs, noise_abs, drift_rel, noise_rel, tol, cls,
                               eps_used, len(probes))
