"""Boltzmann collision operator (hard spheres) by the fast spectral method.

The velocity cube [v_min, v_max]^3 is mapped linearly onto [-pi, pi)^3 and
the distribution is treated as periodic there.  Fourier coefficients use

    f_hat_k = N^-3 * sum_j f(xi_j) exp(-i k . xi_j),    k in [-N/2, N/2)^3

so that the inverse transform is the plain trigonometric sum.  The
collision term in mode space is

    Q_hat_k = sum_{l + m = k} (B_F(l, m) - B_F(m, m)) f_hat_l f_hat_m

with B_F replaced by a separable angular quadrature

    B_F(l, m) ~ w * sum_{p,q} alpha_pq(l) * alpha'_pq(m),
    w = 4 C_alpha * pi^2 / (A1 A2).

Each term of the sum is a convolution, evaluated with 3/2-padded FFTs.
The Nyquist plane k_i = -N/2 is dropped before the product so the mode
set is closed under k -> -k and the result is real.

Radial profile: the Carleman integral over x = rho*e with the delta(x.y)
constraint reduces to phi(s) = int_{-R}^{R} |rho| exp(i rho s) d rho
(real and even), and the constrained y-integral is the disk integral
psi(s) = int_0^pi phi(s cos theta) d theta = 2 pi R J1(R s) / s.  The
polar Jacobian sin(theta_p) is carried by alpha'.  phi_r3_literal keeps
the unsigned-rho form for reference; it is purely imaginary and odd.
"""
import threading
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy import fft as sfft
from scipy.special import j1, roots_legendre

from errors import ConfigError, CostGuardError, NumericError
from logger import get_logger
from phase_space import VelocityGrid

logger = get_logger(__name__)

LAMBDA = 2.0 / (3.0 + np.sqrt(2.0))
DIRECT_MAX_MODES = 16
REALNESS_TOL = 1e-10
SUPPORT_TOL = 1e-8
PSI_ORACLE_TOL = 1e-10
PSI_CHUNK_VALUES = 1 << 18


@dataclass(frozen=True)
class SpectralConfig:
    """Mode count per axis, angular resolution and VHS constant."""
    n_modes_per_axis: int
    a1: int = 4
    a2: int = 4
    alpha_const: float = 1.0
    psi_order: int = 64
    fft_workers: int = 1

    def __post_init__(self):
        n = self.n_modes_per_axis
        if int(n) != n or n < 2 or n % 2:
            raise ConfigError(f"spectral modes per axis must be an even integer >= 2, got {n}")
        if self.a1 < 1 or self.a2 < 1:
            raise ConfigError(f"angular counts must be >= 1, got A1={self.a1}, A2={self.a2}")
        if not self.alpha_const > 0:
            raise ConfigError(f"C_alpha must be positive, got {self.alpha_const}")
        if self.psi_order < 2:
            raise ConfigError(f"psi quadrature order must be >= 2, got {self.psi_order}")

    @property
    def lambda_(self) -> float:
        return LAMBDA

    @property
    def radius(self) -> float:
        """Cut-off radius R = lambda * pi in scaled coordinates."""
        return self.lambda_ * np.pi

    @property
    def padded_size(self) -> int:
        return 3 * self.n_modes_per_axis // 2

    @property
    def angular_weight(self) -> float:
        """w = 4 C_alpha pi^2 / (A1 A2) of the half-sphere rule."""
        return 4.0 * self.alpha_const * np.pi ** 2 / (self.a1 * self.a2)


@dataclass
class ModeArray:
    """Fourier coefficients in FFT order; modes[..., :] holds the multi-index."""
    coefficients: np.ndarray
    modes: np.ndarray

    def at(self, k) -> complex:
        n = self.coefficients.shape[0]
        i, j, l = (int(c) % n for c in k)
        return complex(self.coefficients[i, j, l])


def mode_axis(n: int) -> np.ndarray:
    """Integer modes [0, 1, ..., N/2-1, -N/2, ..., -1] (FFT order)."""
    return np.rint(sfft.fftfreq(n, 1.0 / n)).astype(np.int64)


def mode_grid(n: int) -> np.ndarray:
    k = mode_axis(n)
    kx, ky, kz = np.meshgrid(k, k, k, indexing='ij')
    return np.stack([kx, ky, kz], axis=-1)


def phi_r3_literal(s, radius: float):
    """int_{-R}^{R} rho exp(i rho s) d rho, evaluated in closed form."""
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape, dtype=complex)
    nz = s != 0
    sn = s[nz]
    out[nz] = 2j * (np.sin(radius * sn) / sn ** 2 - radius * np.cos(radius * sn) / sn)
    return out if out.ndim else complex(out)


def phi_r3(s, radius: float):
    """int_{-R}^{R} |rho| exp(i rho s) d rho = 2 int_0^R rho cos(rho s) d rho."""
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, radius ** 2)
    nz = s != 0
    sn = s[nz]
    half = np.sin(0.5 * radius * sn)
    out[nz] = 2.0 * radius * np.sin(radius * sn) / sn - 4.0 * half * half / sn ** 2
    return out if out.ndim else float(out)


def psi_r3(s, radius: float, order: int = 64):
    """int_0^pi phi(s cos theta) d theta by Gauss-Legendre in theta.

    Evaluated over chunks of s so the (len(s), order) node table stays
    below PSI_CHUNK_VALUES entries.
    """
    s = np.asarray(s, dtype=float)
    nodes, weights = roots_legendre(order)
    theta = 0.5 * np.pi * (nodes + 1.0)
    weights = 0.5 * np.pi * weights
    cos_theta = np.cos(theta)
    flat = s.ravel()
    out = np.empty(flat.shape)
    step = max(1, PSI_CHUNK_VALUES // order)
    for start in range(0, len(flat), step):
        part = flat[start:start + step]
        out[start:start + step] = phi_r3(part[:, None] * cos_theta, radius) @ weights
    out = out.reshape(s.shape)
    return out if np.ndim(out) else float(out)


def psi_r3_exact(s, radius: float):
    """Disk integral 2 pi R J1(R s) / s, with the limit pi R^2 at s = 0."""
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, np.pi * radius ** 2)
    nz = s != 0
    out[nz] = 2.0 * np.pi * radius * j1(radius * s[nz]) / s[nz]
    return out if out.ndim else float(out)


def angular_directions(a1: int, a2: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unit vectors e(theta_p, phi_q) = (p pi / A1, q pi / A2) and sin(theta_p)."""
    theta = np.arange(a1) * np.pi / a1
    phi = np.arange(a2) * np.pi / a2
    tt, pp = np.meshgrid(theta, phi, indexing='ij')
    tt, pp = tt.ravel(), pp.ravel()
    e = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1)
    return e, np.sin(tt)


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    """Precomputed decoupled weights; immutable and shared by all workers."""
    config: SpectralConfig
    modes: np.ndarray
    directions: np.ndarray
    alpha: np.ndarray
    alpha_prime: np.ndarray
    weight: float
    loss_diag: np.ndarray
    active: np.ndarray
    precompute_seconds: float = 0.0
    psi_replaced: bool = False

    @property
    def n(self) -> int:
        return self.config.n_modes_per_axis

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active))

    @property
    def transforms_per_cell(self) -> int:
        # forward, two per active direction, two for the loss term,
        # one padded forward and one inverse back to velocity space
        return 1 + 2 * self.n_active + 2 + 1 + 1

    @cached_property
    def resolved(self) -> np.ndarray:
        """Modes with every component strictly inside (-N/2, N/2)."""
        return np.all(np.abs(self.modes) < self.n // 2, axis=-1)

    @cached_property
    def phase(self) -> np.ndarray:
        """exp(i k . (pi - h/2)) per mode, aligning cell centers with the DFT."""
        n = self.n
        h = 2.0 * np.pi / n
        ph = np.exp(1j * mode_axis(n) * (np.pi - 0.5 * h))
        return ph[:, None, None] * ph[None, :, None] * ph[None, None, :]

    @cached_property
    def pad_index(self):
        p = mode_axis(self.n) % self.config.padded_size
        return np.ix_(p, p, p)

    def carleman_weight(self, l, m) -> float:
        """Quadrature value of B_F(l, m) for integer multi-indices l, m."""
        n = self.n
        li = tuple(int(c) % n for c in l)
        mi = tuple(int(c) % n for c in m)
        a = self.alpha[(slice(None),) + li]
        b = self.alpha_prime[(slice(None),) + mi]
        return float(self.weight * np.dot(a, b))


def precompute_kernel(config: SpectralConfig) -> SpectralKernel:
    """Fill alpha, alpha' and the diagonal loss table for every mode and direction."""
    start = time.perf_counter()
    n = config.n_modes_per_axis
    radius = config.radius
    modes = mode_grid(n)
    e, sin_theta = angular_directions(config.a1, config.a2)

    kf = modes.reshape(-1, 3).astype(float)
    dots = e @ kf.T
    alpha = phi_r3(dots, radius)

    norm2 = np.einsum('ij,ij->j', kf.T, kf.T)
    perp = np.sqrt(np.maximum(norm2[None, :] - dots ** 2, 0.0))
    psi = psi_r3(perp, radius, config.psi_order)

    # the disk integral is the authority for psi; fall back to it on disagreement
    exact = psi_r3_exact(perp, radius)
    gap = float(np.max(np.abs(psi - exact)))
    scale = float(np.max(np.abs(exact)))
    replaced = False
    if gap > PSI_ORACLE_TOL * scale:
        logger.warning(f"psi quadrature (order {config.psi_order}) deviates from the disk integral "
                       f"by {gap:.3e} (scale {scale:.3e}); using the disk integral")
        psi = exact
        replaced = True

    alpha_prime = sin_theta[:, None] * psi
    weight = config.angular_weight
    loss_diag = weight * np.einsum('pk,pk->k', alpha, alpha_prime)

    shape = (len(e), n, n, n)
    kernel = SpectralKernel(
        config=config,
        modes=modes,
        directions=e,
        alpha=alpha.reshape(shape),
        alpha_prime=alpha_prime.reshape(shape),
        weight=weight,
        loss_diag=loss_diag.reshape(n, n, n),
        active=sin_theta > 0,
        precompute_seconds=time.perf_counter() - start,
        psi_replaced=replaced,
    )
    logger.info(f"Spectral kernel {n}^3 modes, {config.a1}x{config.a2} angles "
                f"({kernel.n_active} active) precomputed in {kernel.precompute_seconds:.3f}s, "
                f"{kernel.transforms_per_cell} transforms per cell")
    return kernel


def quadrature_weight(l, m, config: SpectralConfig) -> float:
    """B_F(l, m) by the A1 x A2 rule for one pair, without the full mode tables."""
    radius = config.radius
    l = np.asarray(l, dtype=float)
    m = np.asarray(m, dtype=float)
    e, sin_theta = angular_directions(config.a1, config.a2)
    me = e @ m
    perp = np.sqrt(np.maximum(m @ m - me ** 2, 0.0))
    alpha = phi_r3(e @ l, radius)
    alpha_prime = sin_theta * psi_r3(perp, radius, config.psi_order)
    return float(config.angular_weight * np.dot(alpha, alpha_prime))


def carleman_reference(l, m, config: SpectralConfig, n_theta: int = 96, n_phi: int = 192) -> float:
    """B_F(l, m) from the reduced Carleman integral over the unit sphere.

    Gauss-Legendre in theta and the periodic trapezoid rule in phi, with
    the radial and disk integrals in closed form; used as the oracle for
    the A1 x A2 quadrature.
    """
    radius = config.radius
    l = np.asarray(l, dtype=float)
    m = np.asarray(m, dtype=float)
    nodes, weights = roots_legendre(n_theta)
    theta = 0.5 * np.pi * (nodes + 1.0)
    w_theta = 0.5 * np.pi * weights * np.sin(theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing='ij')
    e = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1)
    le = e @ l
    me = e @ m
    perp = np.sqrt(np.maximum(m @ m - me ** 2, 0.0))
    integrand = phi_r3(le, radius) * psi_r3_exact(perp, radius)
    sphere = np.sum(w_theta[:, None] * integrand) * (2.0 * np.pi / n_phi)
    return float(0.5 * 4.0 * config.alpha_const * sphere)


def velocity_scale(vgrid: VelocityGrid) -> float:
    """Physical velocity per unit of scaled velocity."""
    return (vgrid.v_max - vgrid.v_min) / (2.0 * np.pi)


def _check_dimensions(masses: np.ndarray, kernel: SpectralKernel, vgrid: VelocityGrid):
    if vgrid.n_per_axis != kernel.n:
        raise ConfigError(f"kernel has {kernel.n}^3 modes but the velocity grid has {vgrid.n_per_axis}^3 points")
    if masses.shape[-1] != vgrid.n_points:
        raise ConfigError(f"mass array has {masses.shape[-1]} velocity slots, expected {vgrid.n_points}")


def forward_modes(masses_for_cell: np.ndarray, vgrid: VelocityGrid, config: SpectralConfig) -> ModeArray:
    """Discrete Fourier coefficients of one cell's masses on the scaled cube."""
    n = config.n_modes_per_axis
    if vgrid.n_per_axis != n or np.size(masses_for_cell) != n ** 3:
        raise ConfigError(f"expected {n}^3 masses on a matching grid, got {np.size(masses_for_cell)}")
    h = 2.0 * np.pi / n
    ph = np.exp(1j * mode_axis(n) * (np.pi - 0.5 * h))
    phase = ph[:, None, None] * ph[None, :, None] * ph[None, None, :]
    f = np.asarray(masses_for_cell, dtype=float).reshape(n, n, n)
    coeffs = sfft.fftn(f, norm='forward', workers=config.fft_workers) * phase
    return ModeArray(coeffs, mode_grid(n))


def inverse_modes(coefficients: np.ndarray, kernel: SpectralKernel) -> np.ndarray:
    """Trigonometric sum of FFT-ordered coefficients at the grid points (complex)."""
    return sfft.ifftn(coefficients * np.conj(kernel.phase), norm='forward',
                      workers=kernel.config.fft_workers)


class FastSpectralCollision:
    """Per-cell evaluation of Q with the decoupled convolution structure.

    Scratch buffers for the padded transforms are thread-local, so one
    instance can serve every collision thread of a worker.
    """

    def __init__(self, kernel: SpectralKernel, vgrid: VelocityGrid):
        if vgrid.n_per_axis != kernel.n:
            raise ConfigError(f"kernel has {kernel.n}^3 modes but the velocity grid has {vgrid.n_per_axis}^3 points")
        self.kernel = kernel
        self.vgrid = vgrid
        self._scale4 = velocity_scale(vgrid) ** 4
        self._alpha = kernel.alpha[kernel.active]
        self._alpha_prime = kernel.alpha_prime[kernel.active]
        self._scratch = threading.local()

    @property
    def transforms_per_cell(self) -> int:
        return self.kernel.transforms_per_cell

    def _buffers(self):
        buffers = getattr(self._scratch, 'buffers', None)
        if buffers is None:
            m = self.kernel.config.padded_size
            p = self.kernel.n_active
            buffers = (np.zeros((p, m, m, m), dtype=complex),
                       np.zeros((p, m, m, m), dtype=complex),
                       np.zeros((2, m, m, m), dtype=complex))
            self._scratch.buffers = buffers
        return buffers

    def filtered_modes(self, masses_for_cell: np.ndarray) -> np.ndarray:
        n = self.kernel.n
        f = np.asarray(masses_for_cell, dtype=float).reshape(n, n, n)
        fhat = sfft.fftn(f, norm='forward', workers=self.kernel.config.fft_workers) * self.kernel.phase
        fhat[~self.kernel.resolved] = 0.0
        return fhat

    def collision_modes(self, masses_for_cell: np.ndarray) -> np.ndarray:
        """Q_hat in scaled units on the resolved modes (FFT order, Nyquist zero)."""
        kernel = self.kernel
        workers = kernel.config.fft_workers
        idx = (slice(None),) + kernel.pad_index
        fhat = self.filtered_modes(masses_for_cell)
        gain_a, gain_b, loss = self._buffers()

        gain_a[idx] = self._alpha * fhat
        gain_b[idx] = self._alpha_prime * fhat
        loss[0][kernel.pad_index] = fhat
        loss[1][kernel.pad_index] = kernel.loss_diag * fhat

        ga = sfft.ifftn(gain_a, axes=(1, 2, 3), norm='forward', workers=workers)
        gb = sfft.ifftn(gain_b, axes=(1, 2, 3), norm='forward', workers=workers)
        gl = sfft.ifftn(loss, axes=(1, 2, 3), norm='forward', workers=workers)

        product = np.einsum('pijk,pijk->ijk', ga, gb)
        product *= kernel.weight
        product -= gl[0] * gl[1]
        qpad = sfft.fftn(product, norm='forward', workers=workers)
        qhat = qpad[kernel.pad_index]
        qhat[~kernel.resolved] = 0.0
        return qhat

    def back_transform(self, qhat: np.ndarray) -> Tuple[np.ndarray, float]:
        """Physical Q values and the largest imaginary residue before discarding it."""
        values = inverse_modes(qhat, self.kernel)
        imag = float(np.max(np.abs(values.imag))) if values.size else 0.0
        real = values.real * self._scale4
        return real.ravel(), imag * self._scale4

    def q(self, masses_for_cell: np.ndarray) -> np.ndarray:
        real, imag = self.back_transform(self.collision_modes(masses_for_cell))
        peak = float(np.max(np.abs(real))) if real.size else 0.0
        if imag > REALNESS_TOL * peak:
            raise NumericError(f"spectral collision term is not real: imaginary residue {imag:.3e} vs peak {peak:.3e}")
        return real

    def step_block(self, masses: np.ndarray, dt: float) -> None:
        """Forward Euler update, in place, of a (..., N_v) block or a strided view of one."""
        for cell in np.ndindex(*masses.shape[:-1]):
            masses[cell] += dt * self.q(masses[cell])


def q_boltzmann_fast(masses_for_cell: np.ndarray, kernel: SpectralKernel, config: SpectralConfig,
                     vgrid: VelocityGrid) -> np.ndarray:
    """Collision term Q_k (length N_v, real) by the fast convolution path."""
    masses_for_cell = np.asarray(masses_for_cell, dtype=float)
    if kernel.config != config:
        raise ConfigError("spectral kernel was precomputed for a different configuration")
    _check_dimensions(masses_for_cell, kernel, vgrid)
    return FastSpectralCollision(kernel, vgrid).q(masses_for_cell)


def q_boltzmann_direct(masses_for_cell: np.ndarray, kernel: SpectralKernel, config: SpectralConfig,
                       vgrid: VelocityGrid, allow_large: bool = False) -> np.ndarray:
    """Collision term by the O(N^2) double sum over l + m = k with the same tables."""
    masses_for_cell = np.asarray(masses_for_cell, dtype=float)
    if kernel.config != config:
        raise ConfigError("spectral kernel was precomputed for a different configuration")
    _check_dimensions(masses_for_cell, kernel, vgrid)
    n = kernel.n
    if n > DIRECT_MAX_MODES and not allow_large:
        raise CostGuardError(f"direct spectral sum refused for {n}^3 modes (limit {DIRECT_MAX_MODES}^3)")

    evaluator = FastSpectralCollision(kernel, vgrid)
    fhat = evaluator.filtered_modes(masses_for_cell).ravel()
    res = np.flatnonzero(kernel.resolved.ravel())
    modes = kernel.modes.reshape(-1, 3)[res]
    f_res = fhat[res]
    alpha = kernel.alpha[kernel.active].reshape(kernel.n_active, -1)[:, res]
    alpha_prime = kernel.alpha_prime[kernel.active].reshape(kernel.n_active, -1)[:, res]
    diag = kernel.loss_diag.ravel()[res]
    half = n // 2

    qhat = np.zeros(n ** 3, dtype=complex)
    chunk = max(1, (1 << 20) // len(res))
    for start in range(0, len(res), chunk):
        rows = slice(start, start + chunk)
        beta = kernel.weight * (alpha[:, rows].T @ alpha_prime)
        beta -= diag[None, :]
        contrib = beta * f_res[rows, None] * f_res[None, :]
        k = modes[rows, None, :] + modes[None, :, :]
        inside = np.all(np.abs(k) < half, axis=-1)
        km = k[inside] % n
        target = (km[:, 0] * n + km[:, 1]) * n + km[:, 2]
        values = contrib[inside]
        qhat += np.bincount(target, weights=values.real, minlength=n ** 3)
        qhat += 1j * np.bincount(target, weights=values.imag, minlength=n ** 3)

    real, imag = evaluator.back_transform(qhat.reshape(n, n, n))
    peak = float(np.max(np.abs(real))) if real.size else 0.0
    if imag > REALNESS_TOL * peak:
        raise NumericError(f"direct collision term is not real: imaginary residue {imag:.3e} vs peak {peak:.3e}")
    return real


def boltzmann_step(masses_for_cell: np.ndarray, kernel: SpectralKernel, config: SpectralConfig,
                   vgrid: VelocityGrid, dt: float) -> np.ndarray:
    """Forward Euler collision update m + dt * Q(m)."""
    if dt < 0:
        raise ConfigError(f"time step must be non-negative, got {dt}")
    masses_for_cell = np.asarray(masses_for_cell, dtype=float)
    if dt == 0:
        return masses_for_cell.copy()
    return masses_for_cell + dt * q_boltzmann_fast(masses_for_cell, kernel, config, vgrid)


def support_leak_fraction(masses: np.ndarray, vgrid: VelocityGrid, config: SpectralConfig) -> float:
    """Largest per-cell fraction of |mass| lying outside B_0(R) in scaled coordinates."""
    center = 0.5 * (vgrid.v_min + vgrid.v_max)
    xi = (vgrid.points - center) / velocity_scale(vgrid)
    outside = np.sqrt(np.einsum('ij,ij->i', xi, xi)) > config.radius
    flat = np.abs(np.asarray(masses, dtype=float)).reshape(-1, vgrid.n_points)
    total = flat.sum(axis=1)
    leak = flat[:, outside].sum(axis=1)
    with np.errstate(invalid='ignore', divide='ignore'):
        fraction = np.where(total > 0, leak / np.where(total > 0, total, 1.0), 0.0)
    return float(fraction.max()) if fraction.size else 0.0


def check_support(masses: np.ndarray, vgrid: VelocityGrid, config: SpectralConfig) -> float:
    fraction = support_leak_fraction(masses, vgrid, config)
    if fraction > SUPPORT_TOL:
        logger.warning(f"{fraction:.3e} of the mass lies outside the spectral ball B_0(R); "
                       f"widen the velocity bounds for an accurate collision term")
    return fraction
