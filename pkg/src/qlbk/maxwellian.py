"""Local equilibrium solver: invert a positive density into its Maxwellian.

Given n(x) > 0 on the grid, find the real potential A(x) such that
exp(-(H+A)/T) has local density n.  The solver runs damped Newton on the
concave dual

    G(A) = -T Tr exp(-(H+A)/T) - (A, n),

whose gradient is n[rho_A] - n and whose Hessian is assembled in the
eigenbasis of H+A through first divided differences of x -> exp(-x/T).
Also here: the pointwise representation formula recovering A from the
spectral data of a Maxwellian, and the a-priori estimate report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    HermitianOperator,
    SpectralSpace,
    eigendecompose,
    laplacian,
    multiplication_operator,
)
from .states import DensityField, DensityOperator, EIG_FLOOR, local_density

# Newton step directions whose Hessian eigenvalue falls this far below the
# largest one are numerically unobservable (their density response sits at
# roundoff); stepping along them only amplifies noise through the Tikhonov
# floor, so they are frozen instead.
HESSIAN_RELATIVE_CUTOFF = 1e-7
TIKHONOV = 1e-10


class DensityPositivityError(ValueError):
    """Raised when the target density is not bounded below by a positive value."""


@dataclass(frozen=True)
class Potential:
    """Real chemical-potential field A(x_j) with norm accessors."""

    space: SpectralSpace
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.space.Nx,):
            raise ValueError(f"expected grid size {self.space.Nx}, got {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def fourier(self) -> np.ndarray:
        return np.fft.fft(self.values) / self.space.Nx

    def norm_l1(self) -> float:
        return self.space.integrate(np.abs(self.values))

    def norm_l2(self) -> float:
        return float(np.sqrt(self.space.integrate(self.values**2)))

    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def norm_h_minus1(self) -> float:
        return self.space.h_minus1_norm(self.values)


@dataclass
class SolveOptions:
    tol_inf: float = 1e-9
    max_iter: int = 60
    damping: float = 0.5


@dataclass
class MomentSolution:
    potential: Potential
    maxwellian: DensityOperator
    residual: float
    iterations: int
    dual_value: float
    converged: bool


@dataclass(frozen=True)
class EstimateReport:
    """A-priori bounds evaluated on a solved instance.

    h0 and h1 are the estimate arguments built from the density alone; the
    observed quantities are what they bound up to unknown constants, so the
    ratios are diagnostics rather than pass/fail numbers.
    """

    h0: float
    h1: float
    e_norm: float
    entropy_norm: float
    a_h_minus1: float
    ratio_state: float
    ratio_potential: float


def hamiltonian_with_potential(space: SpectralSpace, a_values) -> HermitianOperator:
    return laplacian(space) + multiplication_operator(space, a_values)


def maxwellian_from_potential(potential: Potential | np.ndarray,
                              space: SpectralSpace | None = None) -> DensityOperator:
    """exp(-(H+A)/T) via functional calculus; PSD and Hermitian by construction."""
    if isinstance(potential, Potential):
        space = potential.space
        values = potential.values
    else:
        if space is None:
            raise ValueError("space required when passing raw potential values")
        values = np.asarray(potential, dtype=float)
    mu, v = eigendecompose(hamiltonian_with_potential(space, values))
    return DensityOperator.from_spectrum(space, np.exp(-mu / space.T), v)


def partition_sum(space: SpectralSpace) -> float:
    """Z = sum_p exp(-lambda_p / T) by direct summation."""
    return float(np.sum(np.exp(-space.eigenvalues / space.T)))


def dual_value(space: SpectralSpace, a_values, n_values) -> float:
    mu, _ = eigendecompose(hamiltonian_with_potential(space, a_values))
    return _dual_from_mu(space, mu, a_values, n_values)


def _dual_from_mu(space, mu, a_values, n_values) -> float:
    return float(-space.T * np.sum(np.exp(-mu / space.T))
                 - np.mean(np.asarray(a_values) * np.asarray(n_values)))


def _exp_divided_differences(mu: np.ndarray, T: float) -> np.ndarray:
    """First divided differences of x -> exp(-x/T) on the spectrum mu.

    Uses the sinh form near coincident eigenvalues (cancellation-safe) and
    the plain difference quotient elsewhere.
    """
    d = mu[:, None] - mu[None, :]
    m = 0.5 * (mu[:, None] + mu[None, :])
    half = d / (2.0 * T)
    small = np.abs(half) < 0.5
    ratio = np.ones_like(half)
    np.divide(np.sinh(half, where=small, out=np.zeros_like(half)), half,
              out=ratio, where=small & (half != 0.0))
    k_small = -np.exp(-m / T) * ratio / T
    f = np.exp(-mu / T)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_big = (f[:, None] - f[None, :]) / d
    return np.where(small, k_small, k_big)


def density_jacobian(space: SpectralSpace, mu: np.ndarray,
                     eigenfunctions_grid: np.ndarray) -> np.ndarray:
    """Nx x Nx matrix L[j, k] = d n[rho_A](x_j) / d A(x_k); symmetric NSD."""
    K = _exp_divided_differences(mu, space.T)
    B = eigenfunctions_grid
    Nx, N = B.shape
    Q = (B[:, :, None] * B.conj()[:, None, :]).reshape(Nx, N * N)
    kf = K.reshape(-1)
    # Re(Q diag(K) Q*) through two contiguous real products (L is symmetric)
    qr = np.ascontiguousarray(Q.real)
    qi = np.ascontiguousarray(Q.imag)
    L = ((qr * kf) @ qr.T + (qi * kf) @ qi.T) / Nx
    return L


def _factor_newton_operator(L: np.ndarray):
    # factor (-L) once; -L is PSD, Tikhonov-shifted, with flat directions
    # (relative eigenvalue < cutoff) zeroed rather than amplified
    S = -0.5 * (L + L.T)
    s, U = np.linalg.eigh(S)
    smax = max(float(s[-1]), 0.0)
    inv = np.where(s > smax * HESSIAN_RELATIVE_CUTOFF, 1.0 / (s + TIKHONOV), 0.0)
    return U, inv


def _newton_direction(factor, residual: np.ndarray) -> np.ndarray:
    U, inv = factor
    return U @ (inv * (U.T @ residual))


def solve_moment(n: DensityField, options: SolveOptions | None = None,
                 warm_start: np.ndarray | Potential | None = None) -> MomentSolution:
    """Solve the moment problem for a strictly positive target density."""
    opts = options or SolveOptions()
    space = n.space
    if n.min() <= 0.0:
        raise DensityPositivityError("density not bounded below")

    if warm_start is None:
        a = space.T * np.log(partition_sum(space) / n.values)
    elif isinstance(warm_start, Potential):
        a = warm_start.values.copy()
    else:
        a = np.asarray(warm_start, dtype=float).copy()

    mu, v = eigendecompose(hamiltonian_with_potential(space, a))
    g_cur = _dual_from_mu(space, mu, a, n.values)
    iterations = 0
    converged = False
    best = None

    factor = None
    prev_res = np.inf
    for _ in range(opts.max_iter):
        rho = DensityOperator.from_spectrum(space, np.exp(-mu / space.T), v)
        r = local_density(rho).values - n.values
        res = float(np.max(np.abs(r)))
        if best is None or res < best[0]:
            best = (res, a.copy(), rho, g_cur)
        if res <= opts.tol_inf:
            converged = True
            break

        # modified Newton: keep the factored operator while contraction is
        # healthy, reassemble when progress slows
        fresh = factor is None or res > 0.25 * prev_res
        if fresh:
            L = density_jacobian(space, mu, rho.eigenfunctions)
            factor = _factor_newton_operator(L)
        delta = _newton_direction(factor, r)
        prev_res = res
        step = 1.0
        accepted = False
        while step > 2.0**-40:
            a_try = a + step * delta
            mu_try, v_try = eigendecompose(hamiltonian_with_potential(space, a_try))
            g_try = _dual_from_mu(space, mu_try, a_try, n.values)
            rho_try = DensityOperator.from_spectrum(space, np.exp(-mu_try / space.T), v_try)
            res_try = float(np.max(np.abs(local_density(rho_try).values - n.values)))
            # near the maximizer the dual increments sink below the rounding
            # noise of G; a halved residual is then the reliable progress test
            if res_try <= 0.5 * res or g_try > g_cur:
                a, mu, v, g_cur = a_try, mu_try, v_try, g_try
                accepted = True
                break
            step *= opts.damping
        iterations += 1
        if not accepted:
            if not fresh:
                factor = None  # stale operator: rebuild and retry once
                continue
            break  # neither the dual nor the residual can improve further

    res, a, rho, g_cur = best if not converged else (res, a, rho, g_cur)
    return MomentSolution(
        potential=Potential(space, a),
        maxwellian=rho,
        residual=res,
        iterations=iterations,
        dual_value=g_cur,
        converged=converged,
    )


def representation_formula(maxwellian, n: DensityField | None = None) -> Potential:
    """Recover A pointwise from the spectral data of a Maxwellian.

    A = -(1/n) ( -Delta n / 2 + sum_p rho_p |grad phi_p|^2
                 + T sum_p (rho_p log rho_p) |phi_p|^2 ),

    all series summed over the full truncated spectrum and Delta n taken
    spectrally.  The entropy series carries the factor T because the
    spectrum is exp(-mu_p/T) (at T = 1 the factor drops out).
    """
    if isinstance(maxwellian, MomentSolution):
        rho = maxwellian.maxwellian
        n = local_density(rho) if n is None else n
    else:
        rho = maxwellian
        if n is None:
            n = local_density(rho)
    space = rho.space
    if n.min() <= 0.0:
        raise ZeroDivisionError("density touches zero: representation formula singular")

    deriv = space.plane_waves @ (rho.eigenvectors * (2j * np.pi * space.modes)[:, None])
    kinetic = (np.abs(deriv) ** 2) @ rho.eigenvalues

    w = rho.eigenvalues
    live = w > EIG_FLOOR * max(rho.trace(), 1e-300)
    wlogw = np.zeros_like(w)
    wlogw[live] = w[live] * np.log(w[live])
    entropy_series = (np.abs(rho.eigenfunctions) ** 2) @ wlogw

    lap_n = space.grid_laplacian(n.values)
    a = -(-0.5 * lap_n + kinetic + space.T * entropy_series) / n.values
    return Potential(space, a)


def estimate_report(n: DensityField, sol: MomentSolution) -> EstimateReport:
    space = n.space
    mass = n.mass()
    sqrt_n = np.sqrt(np.clip(n.values, 0.0, None))
    grad_sq = space.integrate(space.grid_gradient(sqrt_n) ** 2)
    sqrt_n_h1_sq = mass + grad_sq
    h0 = 1.0 + (mass * np.log(mass) - mass) + sqrt_n_h1_sq
    n_low = n.min()
    h1 = (1.0 + np.sqrt(sqrt_n_h1_sq / n_low)) * h0 / n_low

    rho = sol.maxwellian
    from .states import norms  # local import to avoid cycle at module load

    rep = norms(rho)
    w = rho.eigenvalues
    live = w > EIG_FLOOR * max(rho.trace(), 1e-300)
    entropy_norm = float(np.sum(np.abs(w[live] * np.log(w[live]))))
    a_h = sol.potential.norm_h_minus1()
    return EstimateReport(
        h0=float(h0),
        h1=float(h1),
        e_norm=rep.e_norm,
        entropy_norm=entropy_norm,
        a_h_minus1=a_h,
        ratio_state=(rep.e_norm + entropy_norm) / h0,
        ratio_potential=a_h / h1,
    )


def dual_gradient_check(a_values, n: DensityField, directions: int = 20,
                        step: float = 1e-5, seed: int = 0) -> float:
    """Max error of the analytic dual gradient against central differences.

    Each random unit direction d gives |fd - (grad, d)| measured relative to
    the L2 size of the gradient itself, so directions nearly orthogonal to
    the gradient do not inflate the report through a vanishing denominator.
    """
    space = n.space
    if isinstance(a_values, Potential):
        a_values = a_values.values
    a_values = np.asarray(a_values, dtype=float)
    rho = maxwellian_from_potential(Potential(space, a_values))
    grad = local_density(rho).values - n.values
    scale = max(float(np.sqrt(space.integrate(grad**2))), 1e-14)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(directions):
        d = rng.standard_normal(space.Nx)
        d /= np.sqrt(space.integrate(d**2))
        analytic = float(np.mean(grad * d))
        gp = dual_value(space, a_values + step * d, n.values)
        gm = dual_value(space, a_values - step * d, n.values)
        fd = (gp - gm) / (2.0 * step)
        worst = max(worst, abs(fd - analytic) / scale)
    return worst


def hessian_asymmetry(a_values, space: SpectralSpace) -> float:
    """Max absolute asymmetry of the assembled Newton matrix at A."""
    if isinstance(a_values, Potential):
        a_values = a_values.values
    mu, v = eigendecompose(hamiltonian_with_potential(space, a_values))
    B = space.plane_waves @ v
    L = density_jacobian(space, mu, B)
    return float(np.max(np.abs(L - L.T)))
