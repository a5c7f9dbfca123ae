"""Trap-field propagation between the SLM plane and trap positions.

Two routes compute the complex field at each trap from a pixelwise phase mask:

* a separable path that factors the Fresnel kernel into per-axis matrices
  ``kernel_x`` (N x grid_x) and ``kernel_y`` (N x grid_y), contracted as
  ``E = scale * c * diag(U @ (A0 * exp(i*phi)) @ V^T)``;
* a dense N x M matrix built independently from the single-exponential kernel,
  kept as a verification oracle for small problems.

Both paths share one sign convention: the kernel for trap n is
``exp(-i * (pi*z_n*(u^2+v^2)/(lambda f^2) + 2*pi*(x_n*u + y_n*v)/(lambda f)))``
with pixel coordinates (u, v) centered on the SLM.  The per-trap scalar
``d^2 * u0 / (i * lambda * (f + z_n))`` is retained (not approximated to 1/f)
so trap intensities across axial layers remain physically comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import OpticalConfig, TrapLayout

__all__ = [
    "PhaseMask",
    "TrapField",
    "SeparablePropagator",
    "DensePropagator",
    "wrap_phase",
    "build_separable",
    "build_dense",
    "forward",
    "forward_field",
    "forward_dense",
    "adjoint_phase",
    "row_power",
]

# Dense matrices are for oracle use only; N*M above this is refused.
DENSE_ENTRY_LIMIT = 8_388_608

TWO_PI = 2.0 * np.pi


def wrap_phase(x):
    """Wrap angles into (-pi, pi]; ties at +-pi map to +pi."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)


@dataclass(frozen=True)
class PhaseMask:
    """Pixelwise SLM phases in radians, shape (grid_x, grid_y).

    Values are unconstrained for internal arithmetic; canonical() folds them
    into [0, 2*pi) for serialization and export.
    """

    phases: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.phases, dtype=float)
        if arr.ndim != 2:
            raise ValueError("phase mask must be 2D")
        if not np.isfinite(arr).all():
            raise ValueError("phase mask entries must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "phases", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.phases.shape

    def canonical(self) -> np.ndarray:
        return np.mod(self.phases, TWO_PI)

    def shifted(self, offset: float) -> "PhaseMask":
        return PhaseMask(self.phases + offset)


@dataclass(frozen=True)
class TrapField:
    """Complex field amplitudes at the trap centers."""

    amplitudes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.amplitudes, dtype=complex)
        if arr.ndim != 1:
            raise ValueError("trap field must be a 1D complex vector")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "amplitudes", arr)

    def __len__(self) -> int:
        return len(self.amplitudes)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.amplitudes)


@dataclass(frozen=True)
class SeparablePropagator:
    """Factored Fresnel propagator for one (config, layout) pair.

    axial_phase (c) has unit modulus and carries the whole phase of the
    per-trap prefactor, including the constant -pi/2 from the 1/i of the
    Fresnel integral; trap_scale is the real positive amplitude
    d^2*u0 / (lambda*(f+z_n)).  Keeping the prefactor phase inside c matters:
    the solvers cancel c between forward and back-propagation, and a phase
    left in trap_scale instead would rotate every realized trap phase each
    iteration and wreck frame-to-frame continuity.
    """

    config: OpticalConfig
    layout: TrapLayout
    axial_phase: np.ndarray = field(repr=False)
    kernel_x: np.ndarray = field(repr=False)
    kernel_y: np.ndarray = field(repr=False)
    trap_scale: np.ndarray = field(repr=False)

    @property
    def trap_count(self) -> int:
        return len(self.layout)


@dataclass(frozen=True)
class DensePropagator:
    """Explicit N x M propagation matrix (row-major pixel flattening)."""

    config: OpticalConfig
    layout: TrapLayout
    matrix: np.ndarray = field(repr=False)

    @property
    def trap_count(self) -> int:
        return len(self.layout)


def _kernel_phase(trap_axis: np.ndarray, trap_z: np.ndarray, pix: np.ndarray, config: OpticalConfig) -> np.ndarray:
    """Per-axis kernel exponent: pi*z*u^2/(lambda f^2) + 2*pi*x*u/(lambda f)."""
    lam = config.wavelength
    f = config.focal_length
    quad = (np.pi / (lam * f * f)) * trap_z[:, None] * (pix * pix)[None, :]
    lin = (TWO_PI / (lam * f)) * trap_axis[:, None] * pix[None, :]
    return quad + lin


def build_separable(config: OpticalConfig, layout: TrapLayout) -> SeparablePropagator:
    """Build the factored c / kernel_x / kernel_y propagator."""
    z = layout.z
    if np.any(config.focal_length + z <= 0):
        raise ValueError("trap z must satisfy f + z > 0")
    u = config.pixel_coords_x()
    v = config.pixel_coords_y()
    kernel_x = np.exp(-1j * _kernel_phase(layout.x, z, u, config))
    kernel_y = np.exp(-1j * _kernel_phase(layout.y, z, v, config))
    axial = np.exp(
        1j * (TWO_PI * (2.0 * config.focal_length + z) / config.wavelength - np.pi / 2.0)
    )
    scale = config.pixel_pitch**2 / (config.wavelength * (config.focal_length + z))
    return SeparablePropagator(
        config=config,
        layout=layout,
        axial_phase=axial,
        kernel_x=kernel_x,
        kernel_y=kernel_y,
        trap_scale=scale,
    )


def forward_field(prop: SeparablePropagator, pixel_field: np.ndarray) -> TrapField:
    """Propagate an arbitrary complex pixel field (illumination applied here)."""
    cfg = prop.config
    if pixel_field.shape != (cfg.grid_x, cfg.grid_y):
        raise ValueError(
            f"pixel field shape {pixel_field.shape} != grid ({cfg.grid_x}, {cfg.grid_y})"
        )
    if cfg.illumination is None:
        f = np.asarray(pixel_field, dtype=complex)
    else:
        f = cfg.illumination * pixel_field
    contracted = ((prop.kernel_x @ f) * prop.kernel_y).sum(axis=1)
    return TrapField(prop.trap_scale * prop.axial_phase * contracted)


def forward(prop: SeparablePropagator, mask: PhaseMask) -> TrapField:
    """Trap field produced by a phase mask through the separable kernel."""
    return forward_field(prop, np.exp(1j * mask.phases))


def adjoint_phase(prop: SeparablePropagator, b: np.ndarray, return_diagnostics: bool = False):
    """Phase of the back-propagated pixel field ``U^H diag(b) V^*``.

    Pixels with an exactly zero back-propagated field get phase 0; their count
    is available via return_diagnostics.  The caller supplies the per-trap
    source vector b (the solver uses conj(c) * w * s * E_tar).
    """
    b = np.asarray(b, dtype=complex)
    if b.shape != (prop.trap_count,):
        raise ValueError(f"b must have length {prop.trap_count}")
    pixel = (np.conj(prop.kernel_x) * b[:, None]).T @ np.conj(prop.kernel_y)
    mask = PhaseMask(np.angle(pixel))
    if return_diagnostics:
        return mask, int(np.count_nonzero(pixel == 0))
    return mask


def build_dense(config: OpticalConfig, layout: TrapLayout) -> DensePropagator:
    """Dense oracle matrix; independent of the separable factorization.

    Entry (n, j) is scale_n * c_n * exp(-i * Delta_j^n) * A0_j with the full
    2D exponent evaluated in one expression, pixels flattened row-major
    (j = jx * grid_y + jy).
    """
    n = len(layout)
    m = config.pixel_count
    if n * m > DENSE_ENTRY_LIMIT:
        raise ValueError(f"dense propagator refused: N*M = {n * m} > {DENSE_ENTRY_LIMIT}")
    z = layout.z
    if np.any(config.focal_length + z <= 0):
        raise ValueError("trap z must satisfy f + z > 0")
    lam = config.wavelength
    f = config.focal_length
    uu, vv = np.meshgrid(config.pixel_coords_x(), config.pixel_coords_y(), indexing="ij")
    uu = uu.ravel()
    vv = vv.ravel()
    delta = (np.pi / (lam * f * f)) * z[:, None] * (uu * uu + vv * vv)[None, :] + (
        TWO_PI / (lam * f)
    ) * (layout.x[:, None] * uu[None, :] + layout.y[:, None] * vv[None, :])
    axial = np.exp(1j * TWO_PI * (2.0 * f + z) / lam)
    scale = config.pixel_pitch**2 / (1j * lam * (f + z))
    matrix = (scale * axial)[:, None] * np.exp(-1j * delta)
    matrix *= config.illumination_map().ravel()[None, :]
    return DensePropagator(config=config, layout=layout, matrix=matrix)


def forward_dense(dense: DensePropagator, mask: PhaseMask) -> TrapField:
    """Oracle forward: E = A exp(i*phi), phases flattened row-major."""
    cfg = dense.config
    if mask.shape != (cfg.grid_x, cfg.grid_y):
        raise ValueError(f"mask shape {mask.shape} != grid ({cfg.grid_x}, {cfg.grid_y})")
    return TrapField(dense.matrix @ np.exp(1j * mask.phases.ravel()))


def row_power(prop) -> np.ndarray:
    """Per-trap sum_j |A_nj|^2 (used by the transient residual bound)."""
    if isinstance(prop, DensePropagator):
        return (np.abs(prop.matrix) ** 2).sum(axis=1)
    illum2 = (prop.config.illumination_map() ** 2).sum()
    return np.abs(prop.trap_scale) ** 2 * illum2
