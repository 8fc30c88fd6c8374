"""Sensing matrices and data matrices.

Constructions covered: far-field plane-wave sensing (which reduces to a
random partial Fourier matrix at the matched frequency), the exact
free-space kernel for point sensors, its paraxial factorization into
diagonal-phase times Fourier factors, multiple scattering via the discrete
Foldy-Lax system, and data for extended objects synthesized on the grid by
unit-cell interpolation.

All sensing columns are normalized to unit 2-norm; physical prefactors that
the normalization removes are recorded on the pair so nothing downstream
depends on absolute scale.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, DeconvolutionError, ResonanceError
from .scene import (
    KIND_FAR_FIELD,
    KIND_PARAXIAL,
    KIND_PLANAR_FOURIER,
    Grid,
    SamplingScheme,
    Scene,
    _freeze,
)

__all__ = [
    "SensingPair",
    "DataMatrix",
    "FoldyLaxSystem",
    "green_function",
    "farfield_pair",
    "paraxial_pair",
    "exact_green_pair",
    "foldy_lax_solve",
    "assemble_data",
    "extended_object_data",
    "indicator_transfer",
    "save_matrix",
    "load_matrix",
    "save_matrix_csv",
]

_DIRECTION_KINDS = (KIND_FAR_FIELD, KIND_PLANAR_FOURIER)

RESONANCE_COND_LIMIT = 1e12


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensingPair:
    """Grid-extended sensing matrices and their restriction to a support.

    ``phi_ext`` (sampling side) and ``psi_ext`` (incidence side) have unit
    2-norm columns.  ``support`` selects the object columns; ``scale`` keeps
    whatever physical prefactor or per-column norms were divided out.  For
    the paraxial construction the factors of the diagonal-Fourier-diagonal
    product are retained in ``d1``, ``a_factor``, ``d2``.
    """

    phi_ext: np.ndarray
    psi_ext: np.ndarray | None = None
    support: np.ndarray | None = None
    omega: float | None = None
    scale: object = None
    d1: np.ndarray | None = None
    a_factor: np.ndarray | None = None
    d2: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "phi_ext", _freeze(np.asarray(self.phi_ext, dtype=np.complex128)))
        if self.psi_ext is not None:
            object.__setattr__(self, "psi_ext", _freeze(np.asarray(self.psi_ext, dtype=np.complex128)))
        if self.support is not None:
            object.__setattr__(self, "support", _freeze(np.asarray(self.support, dtype=np.int64)))

    @property
    def n_sampling(self) -> int:
        return self.phi_ext.shape[0]

    @property
    def n_grid(self) -> int:
        return self.phi_ext.shape[1]

    @property
    def n_incident(self) -> int:
        return self.n_sampling if self.psi_ext is None else self.psi_ext.shape[0]

    @property
    def phi(self) -> np.ndarray:
        if self.support is None:
            raise ValueError("pair carries no support; use with_support()")
        return self.phi_ext[:, self.support]

    @property
    def psi(self) -> np.ndarray:
        if self.support is None:
            raise ValueError("pair carries no support; use with_support()")
        ext = self.phi_ext if self.psi_ext is None else self.psi_ext
        return ext[:, self.support]

    def with_support(self, support) -> "SensingPair":
        import dataclasses
        return dataclasses.replace(self, support=np.asarray(support, dtype=np.int64))

    def steering(self) -> np.ndarray:
        """Unit-norm steering columns over the whole grid (sampling side)."""
        return self.phi_ext


@dataclass(frozen=True)
class DataMatrix:
    """Measured data ``y``, optional perturbation and its spectral norm."""

    y: np.ndarray
    noise: np.ndarray | None = None
    epsilon_realized: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "y", _freeze(np.asarray(self.y, dtype=np.complex128)))
        if self.noise is not None:
            object.__setattr__(self, "noise", _freeze(np.asarray(self.noise, dtype=np.complex128)))

    @property
    def shape(self):
        return self.y.shape

    @property
    def clean(self) -> np.ndarray:
        """Data with the recorded perturbation removed."""
        return self.y if self.noise is None else self.y - self.noise


@dataclass(frozen=True)
class FoldyLaxSystem:
    """Discrete multiple-scattering solution at the object locations.

    ``g`` is the inter-scatterer kernel with zero diagonal (self energy
    removed), ``incident_fields`` the incident fields and ``total_fields``
    the solution of ``(I - omega^2 G X) U = U_inc``.
    """

    g: np.ndarray
    total_fields: np.ndarray
    incident_fields: np.ndarray
    omega: float
    residual: float = 0.0

    def __post_init__(self):
        for name in ("g", "total_fields", "incident_fields"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=np.complex128)))


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def green_function(sensors: np.ndarray, points: np.ndarray, omega: float) -> np.ndarray:
    """Free-space outgoing kernel exp(i w r) / (4 pi r) between point sets.

    Returns the (len(sensors), len(points)) matrix of kernel values.  Raises
    if any pair coincides (the kernel is singular there).
    """
    s = np.atleast_2d(np.asarray(sensors, dtype=float))
    p = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.linalg.norm(s[:, None, :] - p[None, :, :], axis=2)
    if np.any(d < 1e-12):
        raise ValueError("coincident sensor and grid point: kernel is singular")
    return np.exp(1j * omega * d) / (4.0 * np.pi * d)


# ---------------------------------------------------------------------------
# Pair constructions
# ---------------------------------------------------------------------------

def _plane_wave_matrix(directions: np.ndarray, points: np.ndarray, omega: float) -> np.ndarray:
    # rows are directions, columns grid points; unit columns by construction
    n = directions.shape[0]
    phase = directions @ points.T
    return np.exp(-1j * omega * phase) / np.sqrt(n)


def farfield_pair(grid: Grid, scene: Scene | None, scheme: SamplingScheme) -> SensingPair:
    """Plane-wave sensing pair for far-field sampling directions.

    Entry (k, j) of the sampling side is ``exp(-i w s_k . r_j) / sqrt(n)``.
    With incident directions absent the setup is a transceiver one and the
    incidence side reuses the sampling side.
    """
    if scheme.kind not in _DIRECTION_KINDS:
        raise ValueError(f"farfield_pair requires direction sampling, got kind {scheme.kind!r}")
    if scheme.points.ndim != 2 or scheme.points.shape[1] != grid.points.shape[1]:
        raise ValueError("direction/grid dimension mismatch")
    if scheme.omega <= 0:
        raise ValueError("wavenumber must be positive")
    phi = _plane_wave_matrix(scheme.points, grid.points, scheme.omega)
    psi = None
    if scheme.incident is not None:
        psi = _plane_wave_matrix(scheme.incident, grid.points, scheme.omega)
    support = None if scene is None else scene.support
    scale = scheme.omega ** 2 / (4.0 * np.pi)
    return SensingPair(phi_ext=phi, psi_ext=psi, support=support,
                       omega=scheme.omega, scale=scale)


def _paraxial_factors(xy: np.ndarray, grid: Grid, omega: float, z0: float):
    d1 = np.exp(1j * omega * np.sum(xy * xy, axis=1) / (2.0 * z0))
    gx = grid.points[:, 0]
    gy = grid.points[:, 1]
    d2 = np.exp(1j * omega * (gx * gx + gy * gy) / (2.0 * z0))
    n = xy.shape[0]
    a = np.exp(-1j * omega * (np.outer(xy[:, 0], gx) + np.outer(xy[:, 1], gy)) / z0) / np.sqrt(n)
    return d1, a, d2


def paraxial_pair(grid: Grid, scheme: SamplingScheme) -> SensingPair:
    """Quadratic-phase (paraxial) sensing pair for plane sensors.

    The sampling matrix factors exactly as D1 @ A @ D2 with unitary diagonal
    phase factors D1 (sensor side), D2 (grid side) and A a scaled Fourier
    factor.  When the aperture, spacing, wavelength and plane offset satisfy
    the Rayleigh matching condition A*l = lambda*z0, the factor A is the
    random partial Fourier matrix of the square points.
    """
    if scheme.kind != KIND_PARAXIAL:
        raise ValueError(f"paraxial_pair requires paraxial-sensors sampling, got {scheme.kind!r}")
    if scheme.z0 is None or scheme.z0 <= 0:
        raise ValueError("paraxial kernel is singular at z0 = 0")
    xy = scheme.points[:, :2]
    d1, a, d2 = _paraxial_factors(xy, grid, scheme.omega, scheme.z0)
    phi = (d1[:, None] * a) * d2[None, :]
    # transceivers: incident fields are point-source kernels, so the
    # incidence-side matrix is the conjugate of the sampling side
    if scheme.incident is not None:
        d1i, ai, d2i = _paraxial_factors(scheme.incident[:, :2], grid, scheme.omega, scheme.z0)
        psi = np.conj((d1i[:, None] * ai) * d2i[None, :])
    else:
        psi = np.conj(phi)
    scale = np.exp(1j * scheme.omega * scheme.z0) / (4.0 * np.pi * scheme.z0)
    return SensingPair(phi_ext=phi, psi_ext=psi, omega=scheme.omega, scale=scale,
                       d1=d1, a_factor=a, d2=d2)


def exact_green_pair(grid: Grid, scheme: SamplingScheme, scene: Scene | None = None) -> SensingPair:
    """Sensing pair from the exact free-space kernel, column normalized.

    Each column is the vector of kernel values from the sensors to one grid
    point, divided by its 2-norm; the norms are recorded in ``scale``.
    """
    if scheme.kind != KIND_PARAXIAL:
        raise ValueError("exact_green_pair expects point sensors (paraxial-sensors kind)")
    if grid.points.shape[1] != 3:
        raise ValueError("exact kernel requires 3-d positions")
    k = green_function(scheme.points, grid.points, scheme.omega)
    norms = np.linalg.norm(k, axis=0)
    phi = k / norms
    if scheme.incident is not None:
        ki = green_function(scheme.incident, grid.points, scheme.omega)
        psi = np.conj(ki / np.linalg.norm(ki, axis=0))
    else:
        psi = np.conj(phi)
    support = None if scene is None else scene.support
    return SensingPair(phi_ext=phi, psi_ext=psi, support=support,
                       omega=scheme.omega, scale=norms)


# ---------------------------------------------------------------------------
# Multiple scattering
# ---------------------------------------------------------------------------

def _incident_fields(positions: np.ndarray, scheme: SamplingScheme) -> np.ndarray:
    src = scheme.incident if scheme.incident is not None else scheme.points
    if scheme.kind in _DIRECTION_KINDS:
        # plane waves exp(i w r . d)
        return np.exp(1j * scheme.omega * positions @ src.T)
    if scheme.kind == KIND_PARAXIAL:
        # point sources at the sensor locations
        return green_function(src, positions, scheme.omega).T
    raise ValueError(f"no incident-field model for sampling kind {scheme.kind!r}")


def foldy_lax_solve(grid: Grid, scene: Scene, scheme: SamplingScheme,
                    omega: float | None = None) -> FoldyLaxSystem:
    """Solve the discrete multiple-scattering system at the object locations.

    Builds the inter-scatterer kernel G with the singular self terms removed
    and solves ``(I - omega^2 G X) U = U_inc`` column by column with one step
    of iterative refinement.  A condition estimate above 1e12 raises
    :class:`ResonanceError`.
    """
    omega = scheme.omega if omega is None else omega
    pos = grid.points[scene.support]
    s = scene.sparsity
    if s == 0:
        raise ValueError("empty scene")
    if s == 1:
        g = np.zeros((1, 1), dtype=np.complex128)
    else:
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.exp(1j * omega * d) / (4.0 * np.pi * d)
        np.fill_diagonal(g, 0.0)
    u_inc = _incident_fields(pos, scheme)
    m = np.eye(s, dtype=np.complex128) - omega ** 2 * g * scene.amplitudes[None, :]
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > RESONANCE_COND_LIMIT:
        raise ResonanceError(
            f"multiple-scattering system is near resonance (condition number {cond:.3e})")
    u = np.linalg.solve(m, u_inc)
    u += np.linalg.solve(m, u_inc - m @ u)   # refinement step
    res = np.linalg.norm(m @ u - u_inc) / max(np.linalg.norm(u_inc), 1e-300)
    return FoldyLaxSystem(g=g, total_fields=u, incident_fields=u_inc,
                          omega=omega, residual=float(res))


# ---------------------------------------------------------------------------
# Data assembly
# ---------------------------------------------------------------------------

def assemble_data(pair: SensingPair, scene: Scene, mode: str = "born",
                  fields: FoldyLaxSystem | None = None) -> DataMatrix:
    """Assemble the data matrix ``Y = Phi X Psi^*`` for a scene.

    In Born mode the incidence side is the sensing pair's; in foldy-lax mode
    the incidence columns are replaced by the conjugated total fields from a
    :class:`FoldyLaxSystem` (same ``1/sqrt(m)`` scaling, so the Born limit of
    weak objects is recovered continuously).
    """
    phi = pair.phi_ext[:, scene.support]
    x = scene.amplitudes
    if mode == "born":
        psi_ext = pair.phi_ext if pair.psi_ext is None else pair.psi_ext
        psi = psi_ext[:, scene.support]
        y = (phi * x[None, :]) @ psi.conj().T
    elif mode == "foldy-lax":
        if fields is None:
            raise ValueError("foldy-lax mode requires a FoldyLaxSystem (see foldy_lax_solve)")
        m = fields.total_fields.shape[1]
        # Psi_{l,j} = conj(u(r_j; d_l)) / sqrt(m)  =>  Psi^* = U / sqrt(m)
        y = (phi * x[None, :]) @ fields.total_fields / np.sqrt(m)
    else:
        raise ValueError(f"unknown assembly mode {mode!r}")
    return DataMatrix(y=y)


def indicator_transfer(k: np.ndarray) -> np.ndarray:
    """Transfer factor of the unit-cell indicator spline.

    For the characteristic function of [-1/2, 1/2]^2 the interpolation
    integral contributes ``prod_i 2 sin(k_i / 2) / k_i`` at in-plane spatial
    frequency k; the factor tends to 1 at k = 0.
    """
    k = np.asarray(k, dtype=float)
    half = 0.5 * k
    out = np.where(np.abs(half) < 1e-8, 1.0 - half * half / 6.0, np.sin(half) / np.where(half == 0, 1.0, half))
    return np.prod(out, axis=-1)


def extended_object_data(grid: Grid, scene: Scene, scheme: SamplingScheme,
                         spline: str = "indicator") -> DataMatrix:
    """Data matrix for a piecewise-constant extended object on the grid.

    Entries are synthesized with the unit-cell interpolation formula and then
    deconvolved by the spline transfer factor and the column normalization so
    that the result coincides with :func:`assemble_data` applied to the
    plane-wave pair on the same scene.
    """
    if spline != "indicator":
        raise ValueError("only the indicator spline is supported")
    if scheme.kind not in _DIRECTION_KINDS:
        raise ValueError("extended objects require direction sampling")
    dirs = scheme.points
    inc = scheme.incident if scheme.incident is not None else scheme.points
    n, m = dirs.shape[0], inc.shape[0]
    ell, omega = grid.spacing, scheme.omega
    # in-plane frequency (d_l - s_k) for every pair, shape (n, m, 2)
    w = inc[None, :, :2] - dirs[:, None, :2]
    transfer = indicator_transfer(ell * omega * w)
    bad = np.argwhere(np.abs(transfer) < 1e-12)
    if bad.size:
        k, l = (int(v) for v in bad[0])
        raise DeconvolutionError(
            f"spline transfer factor vanishes for direction pair ({k}, {l})", pair=(k, l))
    pos = grid.points[scene.support][:, :2]
    # raw data: ell^2 * transfer * sum_q xi_q exp(i w l w_kl . r_q)
    phase = np.einsum("nmc,qc->nmq", w, pos)
    tones = np.exp(1j * omega * phase) @ scene.amplitudes
    raw = ell ** 2 * transfer * tones
    normalized = raw / (ell ** 2 * transfer) / np.sqrt(n * m)
    return DataMatrix(y=normalized)


# ---------------------------------------------------------------------------
# Matrix container
# ---------------------------------------------------------------------------

_MAGIC = b"CMX1"


def save_matrix(path, m: np.ndarray) -> None:
    """Write a complex matrix as magic + uint64 rows/cols + complex128 row-major."""
    a = np.ascontiguousarray(np.atleast_2d(np.asarray(m, dtype=np.complex128)))
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", a.shape[0], a.shape[1]))
        fh.write(a.tobytes(order="C"))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a complex-matrix container")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = fh.read()
    expected = rows * cols * 16
    if len(data) != expected:
        raise ValueError(f"{path}: truncated payload ({len(data)} bytes, expected {expected})")
    return np.frombuffer(data, dtype=np.complex128).reshape(rows, cols).copy()


def save_matrix_csv(path, m: np.ndarray) -> None:
    """Debug export: one matrix row per line, entries as re,im pairs."""
    a = np.atleast_2d(np.asarray(m, dtype=np.complex128))
    with open(path, "w") as fh:
        for row in a:
            flat = np.column_stack([row.real, row.imag]).ravel()
            fh.write(",".join(repr(float(v)) for v in flat) + "\n")
