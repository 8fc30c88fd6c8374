"""Scenes, grids, sampling schemes and the measurement noise model.

A scene is a sparse set of point objects (scatterers, sources or spectral
lines) living on a finite search grid.  Sampling schemes describe where data
is collected: far-field directions, directions drawn through the unit-square
map, point sensors on a transverse plane, or integer sampling times.  All
randomness is routed through explicit seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .seeding import make_rng

__all__ = [
    "Grid",
    "Scene",
    "SamplingScheme",
    "NoiseSpec",
    "build_planar_grid",
    "draw_scene",
    "draw_directions",
    "direction_from_square",
    "apply_noise",
    "scene_to_json",
    "scene_from_json",
    "scheme_to_json",
    "scheme_from_json",
]

KIND_FAR_FIELD = "far-field-directions"
KIND_PLANAR_FOURIER = "planar-fourier-directions"
KIND_PARAXIAL = "paraxial-sensors"
KIND_TIME = "time-samples"

_DIRECTION_KINDS = (KIND_FAR_FIELD, KIND_PLANAR_FOURIER)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Finite search grid.

    For planar lattices the points are ``((p1 + o) * spacing,
    (p2 + o) * spacing, 0)`` with 1-based lattice coordinates ``p1, p2`` and
    the column ordering ``j = (p1 - 1) * side + p2`` (1-based ``j``).  The
    offset ``o`` is 0 for first-quadrant grids and centres the lattice at the
    origin otherwise.
    """

    spacing: float
    points: np.ndarray          # (N, 3) float64
    side: int | None = None     # sqrt(N) for planar lattices
    offset: float = 0.0         # lattice offset in units of spacing

    def __post_init__(self):
        object.__setattr__(self, "points", _freeze(np.atleast_2d(np.asarray(self.points, dtype=float))))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def extent(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounding box as (mins, maxs)."""
        return self.points.min(axis=0), self.points.max(axis=0)

    def index_of(self, p1: int, p2: int) -> int:
        """0-based column index of lattice coordinates (1-based p1, p2)."""
        if self.side is None:
            raise ValueError("index_of is only defined for planar lattices")
        if not (1 <= p1 <= self.side and 1 <= p2 <= self.side):
            raise ValueError(f"lattice coordinates ({p1}, {p2}) out of range")
        return (p1 - 1) * self.side + (p2 - 1)

    def lattice_coords(self, j: int) -> tuple[int, int]:
        """Inverse of :meth:`index_of` for a 0-based column index."""
        if self.side is None:
            raise ValueError("lattice_coords is only defined for planar lattices")
        if not (0 <= j < self.n_points):
            raise ValueError(f"index {j} out of range")
        return j // self.side + 1, j % self.side + 1


@dataclass(frozen=True)
class Scene:
    """Sparse object configuration: support indices plus complex amplitudes."""

    support: np.ndarray      # (s,) int64, strictly increasing grid indices
    amplitudes: np.ndarray   # (s,) complex128, nonzero

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=np.int64)
        amp = np.asarray(self.amplitudes, dtype=np.complex128)
        if sup.shape != amp.shape:
            raise ValueError("support and amplitudes must have matching shapes")
        if sup.size and np.any(np.diff(sup) <= 0):
            order = np.argsort(sup, kind="stable")
            sup, amp = sup[order], amp[order]
            if np.any(np.diff(sup) <= 0):
                raise ValueError("support indices must be distinct")
        if np.any(amp == 0):
            raise ValueError("amplitudes must be nonzero on the support")
        object.__setattr__(self, "support", _freeze(sup))
        object.__setattr__(self, "amplitudes", _freeze(amp))

    @property
    def sparsity(self) -> int:
        return self.support.size

    @property
    def amp_min(self) -> float:
        """Smallest amplitude magnitude.  Undefined for an empty scene."""
        if self.sparsity == 0:
            raise ValueError("empty scene has no amplitude range")
        return float(np.abs(self.amplitudes).min())

    @property
    def amp_max(self) -> float:
        if self.sparsity == 0:
            raise ValueError("empty scene has no amplitude range")
        return float(np.abs(self.amplitudes).max())

    @property
    def dynamic_range(self) -> float:
        return self.amp_max / self.amp_min

    def object_matrix(self, n_grid: int) -> np.ndarray:
        """Dense diagonal of the grid-extended object matrix (length N)."""
        x = np.zeros(n_grid, dtype=np.complex128)
        x[self.support] = self.amplitudes
        return x


@dataclass(frozen=True)
class SamplingScheme:
    """Where and how the data is sampled.

    ``points`` holds unit directions, sensor positions or integer sampling
    times depending on ``kind``.  For direction kinds drawn through the
    unit-square map the generating square points are retained in
    ``square_points`` (needed to reproduce the partial-Fourier form of the
    sensing matrix).  ``incident`` is None for transceiver setups where the
    incident side reuses the sampling side.
    """

    kind: str
    points: np.ndarray
    omega: float
    square_points: np.ndarray | None = None
    incident: np.ndarray | None = None
    incident_square: np.ndarray | None = None
    aperture: float | None = None
    z0: float | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", _freeze(np.asarray(self.points)))
        for name in ("square_points", "incident", "incident_square"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _freeze(np.asarray(v)))
        if self.kind in _DIRECTION_KINDS:
            norms = np.linalg.norm(self.points, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("sampling directions must have unit norm")

    @property
    def n_sampling(self) -> int:
        return self.points.shape[0]

    @property
    def n_incident(self) -> int:
        """Number of incident points; transceiver setups reuse the sampling side."""
        return self.n_sampling if self.incident is None else self.incident.shape[0]

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.omega


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement noise description.

    ``uniform-complex-relative`` adds ``sigma * (e1 + i e2) * Ymax`` to every
    entry with e1, e2 i.i.d. uniform on [-1, 1] and Ymax the largest entry
    magnitude of the clean data.  ``explicit-matrix`` adds a user-supplied
    perturbation.  ``epsilon`` may carry a declared spectral-norm budget.
    """

    sigma: float = 0.0
    model: str = "uniform-complex-relative"
    matrix: np.ndarray | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise level sigma must be nonnegative")
        if self.model not in ("uniform-complex-relative", "explicit-matrix"):
            raise ValueError(f"unknown noise model {self.model!r}")
        if self.model == "explicit-matrix" and self.matrix is None:
            raise ValueError("explicit-matrix model requires a matrix")


# ---------------------------------------------------------------------------
# Construction operations
# ---------------------------------------------------------------------------

def build_planar_grid(side: int, spacing: float, *, centered: bool = False) -> Grid:
    """Build a square planar lattice in the z=0 plane.

    Parameters
    ----------
    side : int
        Number of lattice points per axis; the grid has ``side**2`` points.
    spacing : float
        Lattice constant, strictly positive.
    centered : bool
        When True the lattice is shifted so it is centred at the origin
        (convenient for symmetric search domains); the index bijection is
        unchanged.
    """
    if side < 1:
        raise ValueError("side must be at least 1")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    offset = -(side + 1) / 2.0 if centered else 0.0
    p = np.arange(1, side + 1, dtype=float) + offset
    x, y = np.meshgrid(p, p, indexing="ij")     # x varies slowest: j = (p1-1)*side + p2
    pts = np.column_stack([
        (x * spacing).ravel(),
        (y * spacing).ravel(),
        np.zeros(side * side),
    ])
    return Grid(spacing=float(spacing), points=pts, side=side, offset=offset)


def draw_scene(grid: Grid, s: int, amp_range=(1.0, 2.0), seed=0,
               *, complex_phases: bool = False) -> Scene:
    """Draw ``s`` distinct object locations with random amplitudes.

    Locations are uniform without replacement over the grid; amplitude
    magnitudes are uniform in ``amp_range``.  Amplitudes are positive reals
    unless ``complex_phases`` is set, in which case uniform phases are
    attached.
    """
    lo, hi = float(amp_range[0]), float(amp_range[1])
    if not (0 < lo <= hi):
        raise ValueError("amplitude range must satisfy 0 < lo <= hi")
    if s < 0 or s > grid.n_points:
        raise ValueError(f"cannot place {s} objects on {grid.n_points} grid points")
    rng = make_rng(seed)
    support = np.sort(rng.choice(grid.n_points, size=s, replace=False))
    mags = rng.uniform(lo, hi, size=s)
    if complex_phases:
        amps = mags * np.exp(2j * np.pi * rng.uniform(size=s))
    else:
        amps = mags.astype(np.complex128)
    return Scene(support=support, amplitudes=amps)


def direction_from_square(a: np.ndarray) -> np.ndarray:
    """Map square points a in [-1,1]^2 to unit directions.

    The map is ``s = (a, sqrt(2 - |a|^2)) / sqrt(2)``, which sends the square
    onto the upper hemisphere and turns the planar-lattice sensing matrix
    into a random partial Fourier matrix at the matched frequency.
    """
    a = np.asarray(a, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[1] != 2 or np.any(np.abs(a) > 1 + 1e-12):
        raise ValueError("square points must lie in [-1, 1]^2")
    z = np.sqrt(np.maximum(2.0 - np.sum(a * a, axis=1), 0.0))
    out = np.column_stack([a, z]) / np.sqrt(2.0)
    return out[0] if single else out


def _draw_square_directions(rng, n):
    a = rng.uniform(-1.0, 1.0, size=(n, 2))
    return a, direction_from_square(a)


def draw_directions(n: int, kind: str, seed=0, *, omega: float,
                    m: int | None = None, aperture: float | None = None,
                    z0: float | None = None, n_tones: int | None = None,
                    sampler=None) -> SamplingScheme:
    """Draw a sampling scheme of the requested kind.

    Parameters
    ----------
    n : int
        Number of sampling points (directions, sensors or times).
    kind : str
        One of ``far-field-directions``, ``planar-fourier-directions``,
        ``paraxial-sensors``, ``time-samples``.
    omega : float
        Wavenumber (rad per length).  For time samples it is unused but kept
        for a uniform record.
    m : int, optional
        Number of independently drawn incident directions.  Omit for
        transceiver setups (incident side identical to the sampling side).
    aperture, z0 : float
        Sensor plane geometry, required for ``paraxial-sensors``; sensors are
        uniform in ``[-aperture/2, aperture/2]^2`` at height ``z0``.
    n_tones : int
        Alphabet size for ``time-samples``; times are i.i.d. uniform on
        ``{1, ..., n_tones}`` with replacement.
    sampler : callable, optional
        Custom direction density for the far-field kind, called as
        ``sampler(rng, size) -> (size, 3)`` unit vectors.  Defaults to the
        square-map measure.
    """
    if n < 1:
        raise ValueError("need at least one sampling point")
    rng = make_rng(seed)
    seed_rec = seed if isinstance(seed, (int, np.integer)) else None

    if kind == KIND_PLANAR_FOURIER:
        a, dirs = _draw_square_directions(rng, n)
        inc = inc_a = None
        if m is not None:
            inc_a, inc = _draw_square_directions(rng, m)
        return SamplingScheme(kind=kind, points=dirs, square_points=a,
                              incident=inc, incident_square=inc_a,
                              omega=omega, seed=seed_rec)

    if kind == KIND_FAR_FIELD:
        draw = sampler if sampler is not None else (lambda r, k: _draw_square_directions(r, k)[1])
        dirs = np.atleast_2d(draw(rng, n))
        inc = np.atleast_2d(draw(rng, m)) if m is not None else None
        return SamplingScheme(kind=kind, points=dirs, incident=inc,
                              omega=omega, seed=seed_rec)

    if kind == KIND_PARAXIAL:
        if aperture is None or z0 is None:
            raise ValueError("paraxial-sensors kind requires aperture and z0")
        if z0 <= 0:
            raise ValueError("sensor plane offset z0 must be positive")
        xy = rng.uniform(-aperture / 2.0, aperture / 2.0, size=(n, 2))
        pts = np.column_stack([xy, np.full(n, float(z0))])
        sq = 2.0 * xy / aperture
        inc = inc_sq = None
        if m is not None:
            xy_i = rng.uniform(-aperture / 2.0, aperture / 2.0, size=(m, 2))
            inc = np.column_stack([xy_i, np.full(m, float(z0))])
            inc_sq = 2.0 * xy_i / aperture
        return SamplingScheme(kind=kind, points=pts, square_points=sq,
                              incident=inc, incident_square=inc_sq,
                              omega=omega, aperture=float(aperture),
                              z0=float(z0), seed=seed_rec)

    if kind == KIND_TIME:
        if n_tones is None:
            raise ValueError("time-samples kind requires n_tones")
        t = rng.integers(1, n_tones + 1, size=n)
        return SamplingScheme(kind=kind, points=t, omega=omega, seed=seed_rec)

    raise ValueError(f"unknown sampling kind {kind!r}")


def sphere_sampler_from_inverse_cdf(cos_theta_table: np.ndarray,
                                    cdf_table: np.ndarray):
    """Build a far-field direction sampler from an inverse-CDF table.

    The polar angle is drawn by inverting the tabulated CDF of cos(theta)
    (both tables increasing); the azimuth is uniform.  Suitable for any
    smooth axially symmetric density on the sphere.
    """
    ct = np.asarray(cos_theta_table, dtype=float)
    cdf = np.asarray(cdf_table, dtype=float)
    if ct.shape != cdf.shape or ct.ndim != 1 or ct.size < 2:
        raise ValueError("tables must be matching 1-d arrays")

    def sampler(rng, size):
        u = rng.uniform(size=size)
        c = np.interp(u, cdf, ct)
        st = np.sqrt(np.maximum(1.0 - c * c, 0.0))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=size)
        return np.column_stack([st * np.cos(phi), st * np.sin(phi), c])

    return sampler


def apply_noise(data, spec: NoiseSpec, seed=0):
    """Perturb a data matrix according to ``spec``.

    Returns a new :class:`~sparsemusic.forward.DataMatrix` carrying the
    perturbation and its realized spectral norm.
    """
    from .forward import DataMatrix

    y = data.y if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.complex128)
    if spec.model == "explicit-matrix":
        e = np.asarray(spec.matrix, dtype=np.complex128)
        if e.shape != y.shape:
            raise ValueError("explicit noise matrix shape mismatch")
    elif spec.sigma == 0.0:
        return DataMatrix(y=y.copy(), noise=None, epsilon_realized=0.0)
    else:
        rng = make_rng(seed)
        y_max = float(np.abs(y).max()) if y.size else 0.0
        e1 = rng.uniform(-1.0, 1.0, size=y.shape)
        e2 = rng.uniform(-1.0, 1.0, size=y.shape)
        e = spec.sigma * (e1 + 1j * e2) * y_max
    eps = float(np.linalg.norm(e, 2)) if e.size else 0.0
    return DataMatrix(y=y + e, noise=e, epsilon_realized=eps)


# ---------------------------------------------------------------------------
# JSON serialization (format "scene/v1")
# ---------------------------------------------------------------------------

def _complex_pairs(z: np.ndarray):
    return [[float(v.real), float(v.imag)] for v in np.asarray(z).ravel()]


def scene_to_json(scene: Scene, grid: Grid | None = None) -> str:
    doc = {
        "format": "scene/v1",
        "support": [int(j) for j in scene.support],
        "amplitudes": _complex_pairs(scene.amplitudes),
    }
    if grid is not None:
        doc["grid"] = {
            "spacing": grid.spacing,
            "side": grid.side,
            "offset": grid.offset,
            "points": [[float(c) for c in p] for p in grid.points],
        }
    return json.dumps(doc, indent=2)


def scene_from_json(text: str) -> tuple[Scene, Grid | None]:
    doc = json.loads(text)
    if doc.get("format") != "scene/v1":
        raise ValueError("not a scene/v1 document")
    amps = np.array([complex(re, im) for re, im in doc["amplitudes"]])
    scene = Scene(support=np.array(doc["support"], dtype=np.int64), amplitudes=amps)
    grid = None
    if "grid" in doc:
        g = doc["grid"]
        grid = Grid(spacing=g["spacing"], points=np.array(g["points"], dtype=float),
                    side=g["side"], offset=g.get("offset", 0.0))
    return scene, grid


def scheme_to_json(scheme: SamplingScheme) -> str:
    def arr(a):
        return None if a is None else np.asarray(a).tolist()

    doc = {
        "format": "scheme/v1",
        "kind": scheme.kind,
        "points": arr(scheme.points),
        "square_points": arr(scheme.square_points),
        "incident": arr(scheme.incident),
        "incident_square": arr(scheme.incident_square),
        "omega": scheme.omega,
        "aperture": scheme.aperture,
        "z0": scheme.z0,
        "seed": None if scheme.seed is None else int(scheme.seed),
    }
    return json.dumps(doc, indent=2)


def scheme_from_json(text: str) -> SamplingScheme:
    doc = json.loads(text)
    if doc.get("format") != "scheme/v1":
        raise ValueError("not a scheme/v1 document")

    def arr(key, dtype=float):
        v = doc.get(key)
        return None if v is None else np.asarray(v, dtype=dtype)

    pts_dtype = np.int64 if doc["kind"] == KIND_TIME else float
    return SamplingScheme(
        kind=doc["kind"],
        points=np.asarray(doc["points"], dtype=pts_dtype),
        square_points=arr("square_points"),
        incident=arr("incident"),
        incident_square=arr("incident_square"),
        omega=doc["omega"],
        aperture=doc.get("aperture"),
        z0=doc.get("z0"),
        seed=doc.get("seed"),
    )
