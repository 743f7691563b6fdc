"""Density operators and their observables.

A density operator is a positive-semidefinite Hermitian operator with its
spectral decomposition cached at construction: eigenvalues rho_k >= 0 stored
in descending order, eigenvectors kept both as mode vectors and as grid
samples.  This module provides the local density, the trace / HS / energy
norms, the Boltzmann entropy and free energy, relative entropy, certified
initial states, and the self-describing text format shared with the CLI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .spectral import HermitianOperator, SpectralSpace, eigendecompose

# Eigenvalues below EIG_FLOOR * trace are treated as exact zeros in beta
# (0 log 0 = 0) and make the second argument of relative_entropy singular.
EIG_FLOOR = 1e-14
CLAMP_TOL = 1e-12


class NotPositiveError(ValueError):
    """Raised when an operator is negative beyond the clamping tolerance."""


@dataclass(frozen=True)
class DensityField:
    """Real grid function n(x_j) on [0, 1) with periodic convention."""

    space: SpectralSpace
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.space.Nx,):
            raise ValueError(f"expected grid size {self.space.Nx}, got {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def mass(self) -> float:
        return self.space.integrate(self.values)

    def min(self) -> float:
        return float(np.min(self.values))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class InitialCertificate:
    """Record of the decomposition bound checked by make_initial."""

    gamma: float
    delta_e_norm: float

    @property
    def epsilon(self) -> float:
        return 2.0 * self.delta_e_norm / self.gamma


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """PSD Hermitian operator with cached spectrum (descending rho_k)."""

    space: SpectralSpace
    mat: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)      # mode-space columns
    eigenfunctions: np.ndarray = field(repr=False)    # grid samples, columns
    certificate: InitialCertificate | None = None

    @classmethod
    def from_operator(cls, op: HermitianOperator, certificate=None) -> "DensityOperator":
        w, v = eigendecompose(op)
        wmax = float(w[-1]) if w.size else 0.0
        if w.size and float(w[0]) < -CLAMP_TOL * max(1.0, wmax):
            raise NotPositiveError(
                f"operator has eigenvalue {w[0]:.3e} below the PSD clamp tolerance"
            )
        w = np.clip(w, 0.0, None)
        order = np.argsort(-w, kind="stable")
        w = w[order]
        v = v[:, order]
        mat = (v * w) @ v.conj().T
        return cls._assemble(op.space, mat, w, v, certificate)

    @classmethod
    def _assemble(cls, space, mat, w, v, certificate=None) -> "DensityOperator":
        mat = 0.5 * (mat + mat.conj().T)
        grid = space.plane_waves @ v
        for a in (mat, w, v, grid):
            a.setflags(write=False)
        return cls(space, mat, w, v, grid, certificate)

    @classmethod
    def from_spectrum(cls, space, eigenvalues, eigenvectors, certificate=None):
        """Build from a known spectral decomposition (skips the eigensolve)."""
        w = np.asarray(eigenvalues, dtype=float)
        v = np.asarray(eigenvectors, dtype=complex)
        if np.any(w < 0):
            raise NotPositiveError("negative weight in spectral data")
        order = np.argsort(-w, kind="stable")
        w = w[order]
        v = v[:, order]
        mat = (v * w) @ v.conj().T
        return cls._assemble(space, mat, w, v, certificate)

    def as_operator(self) -> HermitianOperator:
        return HermitianOperator(self.space, self.mat)

    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))

    def gradient_norms_sq(self) -> np.ndarray:
        """Per-eigenfunction |grad phi_k|_{L2}^2, computed spectrally."""
        return np.abs(self.eigenvectors.T) ** 2 @ self.space.eigenvalues

    def kinetic_trace(self) -> float:
        """Tr(sqrt(H) rho sqrt(H)) = sum_k rho_k |grad phi_k|^2."""
        return float(self.eigenvalues @ self.gradient_norms_sq())


@dataclass(frozen=True)
class NormReport:
    trace_norm: float
    hs_norm: float
    e_norm: float
    h_norm: float
    sobolev_minus1: float | None = None


def local_density(rho: DensityOperator) -> DensityField:
    """n(x_j) = sum_k rho_k |phi_k(x_j)|^2."""
    n = (np.abs(rho.eigenfunctions) ** 2) @ rho.eigenvalues
    return DensityField(rho.space, n)


def local_density_of(op: HermitianOperator) -> DensityField:
    """Local density of a general Hermitian operator (may change sign)."""
    E = op.space.plane_waves
    n = np.real(np.einsum("jp,pq,jq->j", E, op.mat, E.conj(), optimize=True))
    return DensityField(op.space, n)


def norms(rho) -> NormReport:
    """Trace, Hilbert-Schmidt and energy-weighted norms of an operator.

    Accepts a DensityOperator or any HermitianOperator; the energy norms
    use |rho| via the spectral decomposition.
    """
    if isinstance(rho, DensityOperator):
        w, v, space = rho.eigenvalues, rho.eigenvectors, rho.space
    else:
        w, v = eigendecompose(rho)
        space = rho.space
    absw = np.abs(w)
    grad_sq = np.abs(v.T) ** 2 @ space.eigenvalues
    lap_sq = np.abs(v.T) ** 2 @ space.eigenvalues**2
    return NormReport(
        trace_norm=float(np.sum(absw)),
        hs_norm=float(np.sqrt(np.sum(absw**2))),
        e_norm=float(np.sum(absw) + absw @ grad_sq),
        h_norm=float(np.sum(absw) + absw @ lap_sq),
    )


def e_norm(op) -> float:
    return norms(op).e_norm


def beta_entropy(values: np.ndarray, floor_scale: float) -> float:
    """sum beta(rho_k) with beta(x) = x log x - x and 0 log 0 = 0."""
    w = np.asarray(values, dtype=float)
    live = w > EIG_FLOOR * max(floor_scale, 1e-300)
    w = w[live]
    return float(np.sum(w * np.log(w) - w))


def entropy(rho: DensityOperator) -> float:
    """Tr beta(rho), beta evaluated on the eigenvalues with the 0 log 0 rule."""
    return beta_entropy(rho.eigenvalues, rho.trace())


def free_energy(rho: DensityOperator) -> float:
    """F(rho) = T Tr beta(rho) + Tr(sqrt(H) rho sqrt(H))."""
    return rho.space.T * entropy(rho) + rho.kinetic_trace()


def log_trace_against(rho: DensityOperator, weight_mat: np.ndarray) -> float:
    """Tr(W log rho) for PSD W, dropping spectral weight below roundoff.

    Terms with rho_k <= 0 are skipped; along trajectories their exact
    contribution is below double precision because the paired weight
    <phi_k| W |phi_k> decays with the same spectral tail.
    """
    w = rho.eigenvalues
    live = w > 0.0
    if not np.any(live):
        return 0.0
    v = rho.eigenvectors[:, live]
    weights = np.real(np.sum(v.conj() * (weight_mat @ v), axis=0))
    return float(weights @ np.log(w[live]))


def relative_entropy(u: DensityOperator, v: DensityOperator) -> float:
    """S(u, v) = Tr((log u - log v) u); v must be strictly positive definite."""
    floor_v = EIG_FLOOR * max(v.trace(), 1e-300)
    if v.eigenvalues.size == 0 or float(v.eigenvalues[-1]) <= floor_v:
        raise ValueError("relative entropy undefined: second argument is singular")
    wu = u.eigenvalues
    floor_u = EIG_FLOOR * max(u.trace(), 1e-300)
    live = wu > floor_u
    term_u = float(np.sum(wu[live] * np.log(wu[live])))
    log_v = (v.eigenvectors * np.log(v.eigenvalues)) @ v.eigenvectors.conj().T
    term_cross = float(np.real(np.trace(u.mat @ log_v)))
    return term_u - term_cross


def operator_function(space: SpectralSpace, op: HermitianOperator, f) -> HermitianOperator:
    """f(op) by functional calculus on the eigendecomposition."""
    w, v = eigendecompose(op)
    return HermitianOperator(space, (v * f(w)) @ v.conj().T)


def make_initial(space: SpectralSpace, f, delta: HermitianOperator,
                 gamma: float) -> DensityOperator:
    """Certified initial state f(H) + delta.

    f maps kinetic eigenvalues to nonnegative weights; the construction is
    accepted only if n[f(H)] >= gamma everywhere (the density of f(H) is the
    constant sum of the weights) and |delta|_E < gamma/2, and the sum is PSD.
    The certificate (gamma, |delta|_E) is recorded on the returned state.
    """
    weights = np.asarray([float(f(lam)) for lam in space.eigenvalues])
    if np.any(weights < 0):
        raise ValueError("rejected: f(H) has a negative weight (f(H) not PSD)")
    n_fH = float(np.sum(weights))
    if n_fH < gamma:
        raise ValueError(
            f"rejected: n[f(H)] = {n_fH:.6g} < gamma = {gamma:.6g}"
        )
    delta_e = e_norm(delta)
    if not delta_e < gamma / 2.0:
        raise ValueError(
            f"rejected: |delta|_E = {delta_e:.6g} >= gamma/2 = {gamma / 2.0:.6g}"
        )
    base = HermitianOperator(space, np.diag(weights.astype(complex)))
    cert = InitialCertificate(gamma=float(gamma), delta_e_norm=delta_e)
    return DensityOperator.from_operator(base + delta, certificate=cert)


def coherence(space: SpectralSpace, p: int, q: int, amplitude: float) -> HermitianOperator:
    """Hermitian rank-two coherence amplitude*(|e_p><e_q| + |e_q><e_p|)."""
    if not (-space.M <= p <= space.M and -space.M <= q <= space.M):
        raise ValueError("modes outside the truncation band")
    m = np.zeros((space.n_modes, space.n_modes), dtype=complex)
    i, j = p + space.M, q + space.M
    m[i, j] += amplitude
    m[j, i] += amplitude
    return HermitianOperator(space, m)


# -- state file format ------------------------------------------------------

STATE_FORMAT = "qlbk-state"
STATE_VERSION = 1


def write_state(path, op) -> None:
    """Write an operator as the shared self-describing text document.

    json's shortest round-trip float repr keeps every entry bit-faithful
    within 17 significant digits.
    """
    if isinstance(op, DensityOperator):
        space, mat = op.space, op.mat
    else:
        space, mat = op.space, op.mat
    doc = {
        "format": STATE_FORMAT,
        "version": STATE_VERSION,
        "M": space.M,
        "Nx": space.Nx,
        "T": space.T,
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in mat],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def read_state(path) -> HermitianOperator:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != STATE_FORMAT:
        raise ValueError(f"not a {STATE_FORMAT} document")
    if doc.get("version") != STATE_VERSION:
        raise ValueError(f"unsupported state version {doc.get('version')}")
    space = SpectralSpace(M=int(doc["M"]), Nx=int(doc["Nx"]), T=float(doc["T"]))
    raw = np.asarray(doc["matrix"], dtype=float)
    n = space.n_modes
    if raw.shape != (n, n, 2):
        raise ValueError("matrix block has the wrong shape")
    return HermitianOperator(space, raw[..., 0] + 1j * raw[..., 1])


def read_density(path) -> DensityOperator:
    return DensityOperator.from_operator(read_state(path))
