"""Truncated Fourier discretization of the periodic kinetic operator on [0, 1).

The basis is the plane waves e_p(x) = exp(2*pi*i*p*x) for p = -M, ..., M
(this ordering is fixed; every file format relies on it).  Operators are
dense Hermitian (2M+1) x (2M+1) matrices in this basis.  Real fields
(densities, potentials) live on the uniform grid x_j = j/Nx, which doubles
as the quadrature rule: sums over the grid weighted by 1/Nx are exact for
trigonometric polynomials of degree < Nx.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

HERMITICITY_TOL = 1e-12


class NonHermitianError(ValueError):
    """Raised when a matrix fails the Hermiticity tolerance."""


class EigendecompositionError(RuntimeError):
    """Raised when the eigenvalue iteration does not converge."""


@dataclass(frozen=True)
class SpectralSpace:
    """Mode cutoff M, grid size Nx and temperature T of one discretization.

    Nx must satisfy Nx >= 4M+2 so products of two basis functions are
    alias-free on the grid; the default Nx = 8M+4 doubles that margin for
    accurate quadrature of densities.
    """

    M: int
    Nx: int = 0
    T: float = 1.0

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("mode cutoff M must be >= 0")
        if self.Nx == 0:
            object.__setattr__(self, "Nx", 8 * self.M + 4)
        if self.Nx < 4 * self.M + 2:
            raise ValueError(f"Nx={self.Nx} below aliasing minimum {4 * self.M + 2}")
        if not self.T > 0:
            raise ValueError("temperature T must be positive")

    @property
    def n_modes(self) -> int:
        return 2 * self.M + 1

    @cached_property
    def modes(self) -> np.ndarray:
        p = np.arange(-self.M, self.M + 1)
        p.setflags(write=False)
        return p

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Kinetic eigenvalues lambda_p = (2 pi p)^2 in mode order."""
        lam = (2.0 * np.pi * self.modes) ** 2
        lam.setflags(write=False)
        return lam

    @cached_property
    def grid(self) -> np.ndarray:
        x = np.arange(self.Nx) / self.Nx
        x.setflags(write=False)
        return x

    @cached_property
    def plane_waves(self) -> np.ndarray:
        """Nx x N matrix E[j, k] = exp(2 pi i p_k x_j)."""
        E = np.exp(2j * np.pi * np.outer(self.grid, self.modes))
        E.setflags(write=False)
        return E

    # -- field calculus on the grid (full FFT bins, not just the band) -----

    def integrate(self, f) -> float:
        return float(np.mean(np.asarray(f)))

    def grid_gradient(self, f) -> np.ndarray:
        """Spectral derivative of a real grid function (Nyquist bin zeroed)."""
        k = np.fft.fftfreq(self.Nx, d=1.0 / self.Nx)
        if self.Nx % 2 == 0:
            k = k.copy()
            k[self.Nx // 2] = 0.0
        return np.real(np.fft.ifft(2j * np.pi * k * np.fft.fft(f)))

    def grid_laplacian(self, f) -> np.ndarray:
        k = np.fft.fftfreq(self.Nx, d=1.0 / self.Nx)
        return np.real(np.fft.ifft(-((2.0 * np.pi * k) ** 2) * np.fft.fft(f)))

    def h_minus1_norm(self, f) -> float:
        """Dual Sobolev norm (sum_{p!=0} |f_p|^2/lambda_p + |f_0|^2)^(1/2).

        The p = 0 weight is 1 by convention so constants are measured too.
        """
        coeff = np.fft.fft(np.asarray(f, dtype=float)) / self.Nx
        k = np.fft.fftfreq(self.Nx, d=1.0 / self.Nx)
        lam = (2.0 * np.pi * k) ** 2
        lam[0] = 1.0
        return float(np.sqrt(np.sum(np.abs(coeff) ** 2 / lam)))


def grid_to_modes(space: SpectralSpace, f) -> np.ndarray:
    """Fourier coefficients f_hat(p), |p| <= M, of a grid function."""
    f = np.asarray(f)
    if f.shape != (space.Nx,):
        raise ValueError(f"expected grid size {space.Nx}, got {f.shape}")
    return space.plane_waves.conj().T @ f / space.Nx


def modes_to_grid(space: SpectralSpace, coeffs) -> np.ndarray:
    """Evaluate a band-limited function with given mode coefficients."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (space.n_modes,):
        raise ValueError(f"expected {space.n_modes} coefficients, got {coeffs.shape}")
    return space.plane_waves @ coeffs


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense Hermitian matrix in the fixed mode order of its space."""

    space: SpectralSpace
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=complex)
        n = self.space.n_modes
        if m.shape != (n, n):
            raise ValueError(f"expected {n}x{n} matrix, got {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL * scale:
            raise NonHermitianError("matrix is not Hermitian within tolerance")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        self._check_space(other)
        return HermitianOperator(self.space, self.mat + other.mat)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        self._check_space(other)
        return HermitianOperator(self.space, self.mat - other.mat)

    def __mul__(self, a) -> "HermitianOperator":
        return HermitianOperator(self.space, float(a) * self.mat)

    __rmul__ = __mul__

    def _check_space(self, other):
        if other.space is not self.space and other.space != self.space:
            raise ValueError("operators live on different spaces")

    def trace(self) -> float:
        return float(np.real(np.trace(self.mat)))

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.mat))

    def trace_norm(self) -> float:
        return float(np.sum(np.abs(np.linalg.eigvalsh(self.mat))))


def identity(space: SpectralSpace) -> HermitianOperator:
    return HermitianOperator(space, np.eye(space.n_modes, dtype=complex))


def laplacian(space: SpectralSpace) -> HermitianOperator:
    """Kinetic operator: diagonal with entries (2 pi p)^2."""
    return HermitianOperator(space, np.diag(space.eigenvalues.astype(complex)))


def multiplication_operator(space: SpectralSpace, f) -> HermitianOperator:
    """Truncated multiplication operator by a real grid function.

    Entries are [p, q] = f_hat(p - q); Hermiticity is automatic because f
    is real.  Complex input is rejected.
    """
    f = np.asarray(f)
    if np.iscomplexobj(f) and np.max(np.abs(f.imag)) > 0:
        raise ValueError("multiplication operator requires a real-valued function")
    f = np.real(f).astype(float)
    if f.shape != (space.Nx,):
        raise ValueError(f"expected grid size {space.Nx}, got {f.shape}")
    coeff = np.fft.fft(f) / space.Nx
    diff = space.modes[:, None] - space.modes[None, :]
    return HermitianOperator(space, coeff[diff % space.Nx])


def eigendecompose(op: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvector columns."""
    try:
        w, v = np.linalg.eigh(op.mat)
    except np.linalg.LinAlgError as exc:  # iteration cap inside LAPACK
        raise EigendecompositionError(str(exc)) from exc
    return w, v
