"""Pseudo-spectral operators on a doubly periodic grid.

Fields are plain numpy arrays whose last two axes are ``(nx, ny)``, indexed
``f[i, j] = f(x1_i, x2_j)`` with ``x1_i = i*Lx/nx`` and ``x2_j = j*Ly/ny``.
Leading axes, if any, are components (e.g. ``(3, nx, ny)`` for the state
``u = (iota, n1, n2)``).

Transform convention: forward FFT unnormalized, inverse divided by
``nx*ny`` (numpy's default).  With this convention the discrete L2 norm
on the torus is

    ||f||_0^2 = Lx*Ly/(nx*ny)^2 * sum_k |F_k|^2 = (cell area) * sum_ij f_ij^2

and the Sobolev norms weight each mode by ``(1 + |k|^2)^s`` with ``k`` the
physical wavenumber ``2*pi*m/L``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, NumericError


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on ``[0, Lx) x [0, Ly)`` with periodic wrap-around."""

    nx: int
    ny: int
    Lx: float = 2 * np.pi
    Ly: float = 2 * np.pi

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if int(n) != n or n < 8 or n % 2:
                raise DomainError(f"grid sizes must be even integers >= 8, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise DomainError("domain periods must be positive")

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def hx(self):
        return self.Lx / self.nx

    @property
    def hy(self):
        return self.Ly / self.ny

    @property
    def cell_area(self):
        return self.hx * self.hy

    @cached_property
    def x1(self):
        return np.arange(self.nx) * self.hx

    @cached_property
    def x2(self):
        return np.arange(self.ny) * self.hy

    @cached_property
    def mesh(self):
        """Node coordinates ``(X1, X2)``, each of shape ``(nx, ny)``."""
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    # -- wavenumbers -------------------------------------------------------
    # Half-spectrum (rfft2) layout: axis 0 full, axis 1 non-negative.

    @cached_property
    def _modes(self):
        mx = np.fft.fftfreq(self.nx, 1.0 / self.nx)
        my = np.fft.rfftfreq(self.ny, 1.0 / self.ny)
        return mx[:, None], my[None, :]

    @cached_property
    def _ik(self):
        mx, my = self._modes
        kx = 2 * np.pi / self.Lx * mx
        ky = 2 * np.pi / self.Ly * my
        # Nyquist modes have no real-valued odd derivative.
        kx = np.where(np.abs(mx) == self.nx // 2, 0.0, kx)
        ky = np.where(my == self.ny // 2, 0.0, ky)
        return 1j * kx, 1j * ky

    @cached_property
    def k_squared(self):
        """``|k|^2`` on the half-spectrum layout (Nyquist kept)."""
        mx, my = self._modes
        return (2 * np.pi / self.Lx * mx) ** 2 + (2 * np.pi / self.Ly * my) ** 2

    @cached_property
    def dealias_mask(self):
        mx, my = self._modes
        return (np.abs(mx) <= self.nx / 3) & (np.abs(my) <= self.ny / 3)

    @cached_property
    def _full_weight(self):
        mx = np.fft.fftfreq(self.nx, 1.0 / self.nx)[:, None]
        my = np.fft.fftfreq(self.ny, 1.0 / self.ny)[None, :]
        return (2 * np.pi / self.Lx * mx) ** 2 + (2 * np.pi / self.Ly * my) ** 2

    # -- transforms --------------------------------------------------------

    def check(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape[-2:] != self.shape:
            raise DomainError(f"field shape {f.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(f)):
            raise NumericError("field contains non-finite values")
        return f

    def fft(self, f):
        return np.fft.rfft2(f, axes=(-2, -1))

    def ifft(self, fh):
        return np.fft.irfft2(fh, s=self.shape, axes=(-2, -1))

    # -- operators ---------------------------------------------------------

    def ddx(self, f):
        """Spectral derivative along ``x1``."""
        f = self.check(f)
        return self.ifft(self._ik[0] * self.fft(f))

    def ddy(self, f):
        """Spectral derivative along ``x2``."""
        f = self.check(f)
        return self.ifft(self._ik[1] * self.fft(f))

    def gradient(self, f):
        """Both derivatives from one forward transform; returns ``(2, ...)``."""
        fh = self.fft(self.check(f))
        ikx, iky = self._ik
        return np.stack([self.ifft(ikx * fh), self.ifft(iky * fh)])

    def laplacian(self, f):
        f = self.check(f)
        return self.ifft(-self.k_squared * self.fft(f))

    def helmholtz(self, f):
        """Apply ``1 - Laplacian``."""
        f = self.check(f)
        return self.ifft((1.0 + self.k_squared) * self.fft(f))

    def helmholtz_inverse(self, q):
        """Solve ``(1 - Laplacian) I = q``; the symbol ``1 + |k|^2`` never vanishes."""
        q = self.check(q)
        return self.ifft(self.fft(q) / (1.0 + self.k_squared))

    def dealias(self, f):
        """2/3-rule truncation: zero modes with ``|m_x| > nx/3`` or ``|m_y| > ny/3``."""
        f = self.check(f)
        return self.ifft(self.dealias_mask * self.fft(f))

    def sobolev_norm(self, f, s=0.0):
        """``(sum_k (1+|k|^2)^s |f_k|^2)^(1/2)``, summed over leading components.

        ``s = 0`` equals the cell-area-weighted root sum of squares.
        """
        if s < 0:
            raise DomainError("Sobolev index must be non-negative")
        f = self.check(f)
        F = np.fft.fft2(f, axes=(-2, -1))
        weight = (1.0 + self._full_weight) ** s
        total = np.sum(weight * np.abs(F) ** 2)
        return float(np.sqrt(self.cell_area / (self.nx * self.ny) * total))

    def integrate(self, f):
        """Grid sum times cell area (exact for trigonometric polynomials in band)."""
        return float(np.sum(self.check(f)) * self.cell_area)


def trapezoid_weights(times):
    """Trapezoidal quadrature weights on (possibly non-uniform) nodes."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("time grid must be a non-empty 1-d sequence")
    if t.size == 1:
        return np.zeros(1)
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise DomainError("time grid must be strictly increasing")
    w = np.zeros_like(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def pairing(grid, trajectory, psi, times):
    """Space-time pairing ``int_0^T int u . Psi dx dt``.

    ``trajectory`` has shape ``(nt, ncomp, nx, ny)``; ``psi`` is either an
    array of the same shape or a callable ``psi(t) -> (ncomp, nx, ny)``.
    Time uses the trapezoidal rule on ``times``; space is the exact
    grid-sum quadrature.
    """
    traj = np.asarray(trajectory, dtype=float)
    times = np.asarray(times, dtype=float)
    if traj.ndim != 4 or traj.shape[-2:] != grid.shape:
        raise DomainError(f"trajectory shape {traj.shape} does not match grid {grid.shape}")
    if traj.shape[0] != times.size:
        raise DomainError("trajectory and time grid lengths differ")
    w = trapezoid_weights(times)
    total = 0.0
    for k, t in enumerate(times):
        p = psi(t) if callable(psi) else psi[k]
        p = np.asarray(p, dtype=float)
        if p.shape != traj.shape[1:]:
            raise DomainError(f"test function shape {p.shape} does not match state {traj.shape[1:]}")
        total += w[k] * np.sum(traj[k] * p)
    return float(total * grid.cell_area)


class PairingAccumulator:
    """Online trapezoidal pairing, fed one ``(t, u)`` at a time.

    Gives the same value as :func:`pairing` over the same nodes without
    holding the trajectory in memory.
    """

    def __init__(self, grid, psi):
        self.grid = grid
        self.psi = psi
        self.value = 0.0
        self._last = None

    def add(self, t, u):
        inner = float(np.sum(np.asarray(u) * self.psi(t))) * self.grid.cell_area
        if self._last is not None:
            t0, inner0 = self._last
            if t <= t0:
                raise DomainError("pairing times must increase")
            self.value += 0.5 * (t - t0) * (inner0 + inner)
        self._last = (t, inner)
