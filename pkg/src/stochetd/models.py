"""Pseudo-spectral 1D transport-noise SPDEs on a periodic interval.

    d_t u + c0 u_x + c1 u u_x + c2 u_xx + c3 u_xxx + c4 u_xxxx
          + sum_m (xi_m u)_x o dW^m = 0

The state is the real-FFT half spectrum of u (length n_x // 2 + 1).  Odd
derivatives drop the Nyquist mode, and every quadratic product (u^2 and
xi_m u) is dealiased with the 2/3 rule.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidConfig, NonFinite
from .sde_core import SdeProblem

SNAP_MAGIC = b"SNAP"
_SNAP_HEADER = struct.Struct("<4sqd")


@dataclass(frozen=True)
class SpectralGrid1D:
    n_x: int
    length: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        n = int(self.n_x)
        if n < 4 or n & (n - 1):
            raise InvalidConfig(f"n_x must be a power of two >= 4, got {self.n_x}")
        if not self.length > 0:
            raise InvalidConfig("domain length must be positive")
        scale = 2 * np.pi / self.length
        idx = np.arange(n // 2 + 1)
        k = scale * idx
        k_odd = k.copy()
        k_odd[-1] = 0.0
        mask = (idx <= n // 3).astype(float)
        for name, arr in (("x", self.x0 + self.length * np.arange(n) / n), ("k", k),
                          ("k_odd", k_odd), ("mask", mask), ("mode_index", idx)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        # Parseval weights for the half spectrum
        wts = np.full(n // 2 + 1, 2.0)
        wts[0] = wts[-1] = 1.0
        wts.setflags(write=False)
        object.__setattr__(self, "_weights", wts)

    @property
    def n_modes(self) -> int:
        return self.n_x // 2 + 1

    @property
    def wavenumbers(self) -> np.ndarray:
        return self.k

    def to_spectral(self, u):
        return np.fft.rfft(u, axis=-1)

    def to_physical(self, u_hat):
        return np.fft.irfft(u_hat, n=self.n_x, axis=-1)

    def dealias(self, u_hat):
        return self.mask * u_hat

    def full_spectrum(self, u_hat):
        """Expand a half spectrum to the full conjugate-symmetric DFT."""
        u_hat = np.asarray(u_hat)
        tail = np.conj(u_hat[..., 1:-1][..., ::-1])
        return np.concatenate([u_hat, tail], axis=-1)

    def norm(self, u_hat):
        """Discrete L2 norm of the physical field (up to the constant 1/n)."""
        return np.sqrt(np.sum(self._weights * np.abs(u_hat) ** 2, axis=-1))

    def l2_norm(self, u_hat):
        """Continuous L2 norm of the trigonometric interpolant."""
        return self.norm(u_hat) * np.sqrt(self.length) / self.n_x

    def derivative(self, u_hat, order=1):
        k = self.k_odd if order % 2 else self.k
        return (1j * k) ** order * u_hat


@dataclass(frozen=True)
class SpdeCoefficients:
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    c4: float = 0.0

    def __post_init__(self):
        if not any((self.c0, self.c1, self.c2, self.c3, self.c4)):
            raise InvalidConfig("at least one coefficient must be nonzero")

    @classmethod
    def kdv(cls):
        return cls(c1=1.0, c3=1.0)

    @classmethod
    def heat(cls):
        return cls(c2=-1.0)

    @classmethod
    def ks(cls):
        return cls(c1=1.0, c2=1.0, c4=1.0)


# -- noise bases --------------------------------------------------------------

@dataclass(frozen=True)
class SineDecay:
    M: int = 3
    kind: str = "sine_decay"

    def fields(self, x):
        m = np.arange(1, self.M + 1)[:, None]
        return np.sin(2 * np.pi * x[None, :] * m) / (100 * m)


@dataclass(frozen=True)
class SmoothBump:
    M: int = 3
    x_min: float = 0.0
    x_max: float = 1.0
    kind: str = "smooth_bump"

    @property
    def width(self):
        return (self.x_max - self.x_min) / (self.M + 1)

    def centers(self):
        return self.x_min + self.width * np.arange(1, self.M + 1)

    def fields(self, x):
        w = self.width
        r = 2 * (x[None, :] - self.centers()[:, None]) / w
        inside = np.abs(r) < 1
        out = np.zeros_like(r)
        out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
        return out


@dataclass(frozen=True)
class ConstantAdvection:
    a: float = 1.0
    kind: str = "constant_advection"

    @property
    def M(self):
        return 1

    def fields(self, x):
        return np.full((1, len(x)), float(self.a))


@dataclass(frozen=True)
class NoNoise:
    kind: str = "none"

    @property
    def M(self):
        return 0

    def fields(self, x):
        return np.zeros((0, len(x)))


NoiseBasisSpec = (SineDecay, SmoothBump, ConstantAdvection, NoNoise)


def noise_basis(kind: str, **params):
    table = {"sine_decay": SineDecay, "smooth_bump": SmoothBump,
             "constant_advection": ConstantAdvection, "none": NoNoise}
    try:
        return table[kind](**params)
    except KeyError:
        raise InvalidConfig(f"unknown noise basis {kind!r}") from None
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from None


# -- operators ----------------------------------------------------------------

def linear_symbol(coeffs: SpdeCoefficients, grid: SpectralGrid1D) -> np.ndarray:
    """L(k) such that the linear part of the right-hand side is L(k) u_hat."""
    k, ko = grid.k, grid.k_odd
    lin = -1j * coeffs.c0 * ko + coeffs.c2 * k**2 + 1j * coeffs.c3 * ko**3 - coeffs.c4 * k**4
    return lin.astype(complex)


def _finite(x, what):
    if not np.all(np.isfinite(x)):
        raise NonFinite(f"non-finite {what}")
    return x


def nonlinear_flux(u_hat, grid: SpectralGrid1D, c1: float, check=True):
    """-(c1/2) (u^2)_x in spectral form, dealiased."""
    u = grid.to_physical(u_hat)
    out = (-0.5j * c1) * grid.k_odd * grid.mask * grid.to_spectral(u * u)
    return _finite(out, "nonlinear flux") if check else out


def diffusion_field(u_hat, grid: SpectralGrid1D, xi_m, check=True):
    """-(xi_m u)_x in spectral form, dealiased."""
    u = grid.to_physical(u_hat)
    out = -1j * grid.k_odd * grid.mask * grid.to_spectral(np.asarray(xi_m) * u)
    return _finite(out, "diffusion field") if check else out


def travelling_wave_solution(x, t, beta, a=0.0, W_t=0.0, length: Optional[float] = None):
    """3 beta sech^2(sqrt(beta)/2 (x - beta t - a W)), wrapped onto a periodic domain.

    With ``length`` given, the offset from the wave centre is reduced to the
    nearest periodic image.
    """
    if not beta > 0:
        raise InvalidConfig("beta must be positive")
    xi = np.asarray(x, dtype=float) - beta * t - a * W_t
    if length is not None:
        xi = np.mod(xi + 0.5 * length, length) - 0.5 * length
    with np.errstate(over="ignore"):
        return 3 * beta / np.cosh(0.5 * np.sqrt(beta) * xi) ** 2


def soliton_domain(beta: float, tail: float = 1e-13):
    """Symmetric interval on which the soliton tail drops below ``tail`` times its peak."""
    half = 2 * np.arccosh(1 / np.sqrt(tail)) / np.sqrt(beta)
    return -half, 2 * half


def build_problem(grid: SpectralGrid1D, coeffs: SpdeCoefficients, basis=None,
                  name: str = "") -> SdeProblem:
    basis = basis or NoNoise()
    lin = linear_symbol(coeffs, grid)
    xi = basis.fields(grid.x)
    M = xi.shape[0]
    c1 = coeffs.c1
    half_c1 = 0.5 * c1
    dk = -1j * grid.k_odd * grid.mask
    to_p, to_s = grid.to_physical, grid.to_spectral

    def nonlinear(t, u_hat):
        if c1 == 0:
            return np.zeros_like(u_hat)
        u = to_p(u_hat)
        return dk * to_s(half_c1 * u * u)

    def make_g(row):
        def g(t, u_hat):
            return dk * to_s(row * to_p(u_hat))
        return g

    def weighted_xi(w):
        # sum_m w_m xi_m; w is (M,) or (M, B)
        return np.asarray(w).T @ xi

    def noise_sum(t, u_hat, w):
        return dk * to_s(weighted_xi(w) * to_p(u_hat))

    def forcing(t, u_hat, w):
        u = to_p(u_hat)
        return dk * to_s((half_c1 * u + weighted_xi(w)) * u)

    def freeze(w):
        s = weighted_xi(w)

        def forced(t, u_hat):
            u = to_p(u_hat)
            return dk * to_s((half_c1 * u + s) * u)

        return forced

    meta = {"grid": grid, "coeffs": coeffs, "basis": basis, "xi": xi}
    return SdeProblem(
        nonlinear=nonlinear,
        diffusions=tuple(make_g(xi[m]) for m in range(M)),
        linear_part=lin,
        dimension=grid.n_modes,
        noise_sum=noise_sum if M else None,
        forcing=forcing if M else None,
        freeze=freeze if M else None,
        name=name or f"{getattr(basis, 'kind', 'none')}",
        meta=meta,
    )


# -- initial conditions -------------------------------------------------------

def gaussian_initial(grid: SpectralGrid1D, project: bool = False):
    u_hat = grid.to_spectral(np.exp(-50.0 * (grid.x - 0.5) ** 2))
    return grid.dealias(u_hat) if project else u_hat


def soliton_initial(grid: SpectralGrid1D, beta: float = 64.0, project: bool = True):
    u = travelling_wave_solution(grid.x, 0.0, beta, length=grid.length)
    u_hat = grid.to_spectral(u)
    return grid.dealias(u_hat) if project else u_hat


def initial_condition(name: str, grid: SpectralGrid1D, project: Optional[bool] = None, **kw):
    if name == "gaussian":
        return gaussian_initial(grid, project=bool(project))
    if name == "soliton":
        return soliton_initial(grid, project=True if project is None else project, **kw)
    raise InvalidConfig(f"unknown initial condition {name!r}")


# -- snapshots ----------------------------------------------------------------

def write_snapshots_csv(path, grid: SpectralGrid1D, times, states):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "u"])
        for t, u_hat in zip(times, states):
            u = grid.to_physical(u_hat)
            for xv, uv in zip(grid.x, u):
                w.writerow([repr(float(t)), repr(float(xv)), repr(float(uv))])


def write_snapshots_binary(path, grid: SpectralGrid1D, times, states):
    with open(path, "wb") as fh:
        for t, u_hat in zip(times, states):
            fh.write(_SNAP_HEADER.pack(SNAP_MAGIC, grid.n_x, float(t)))
            fh.write(np.ascontiguousarray(grid.to_physical(u_hat), dtype="<f8").tobytes())


def read_snapshots_binary(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    times, fields_ = [], []
    pos = 0
    while pos < len(raw):
        magic, n, t = _SNAP_HEADER.unpack_from(raw, pos)
        if magic != SNAP_MAGIC:
            raise InvalidConfig(f"bad snapshot magic {magic!r}")
        pos += _SNAP_HEADER.size
        fields_.append(np.frombuffer(raw, dtype="<f8", count=n, offset=pos).copy())
        pos += 8 * n
        times.append(t)
    return times, fields_
