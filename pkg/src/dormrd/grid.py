"""Periodic lattice, sampled fields, three-component states, and trajectories.

All spatial discretization lives here: the uniform periodic grid in one or
two dimensions, the central-stencil Laplacian and its exact Fourier symbol,
sup/inf norms, box membership, seeded initial-data generators, and the
time-indexed record that the solvers fill in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .csvio import write_csv

INITIAL_DATA_KINDS = ("constant", "gaussian-bump", "random-fourier", "box-random")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on [0, length)^dim with n nodes per axis."""

    dim: int
    n: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim!r}")
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"need an integer n >= 4 per axis, got {self.n!r}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length!r}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) if self.dim == 1 else (self.n, self.n)

    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) * self.dx
        return (x,) if self.dim == 1 else (x, x.copy())


def _axis_symbol(grid: Grid, half: bool) -> np.ndarray:
    freq = np.fft.rfftfreq(grid.n) if half else np.fft.fftfreq(grid.n)
    return -(2.0 - 2.0 * np.cos(2.0 * np.pi * freq)) / grid.dx**2


def laplacian_symbol(grid: Grid) -> np.ndarray:
    """Exact eigenvalues of the discrete periodic Laplacian, in numpy rfft layout."""
    if grid.dim == 1:
        return _axis_symbol(grid, half=True)
    return _axis_symbol(grid, half=False)[:, None] + _axis_symbol(grid, half=True)[None, :]


@dataclass(frozen=True, eq=False)
class Field:
    """One scalar sample per grid node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"field shape {values.shape} does not match grid shape {self.grid.shape}")
        object.__setattr__(self, "values", values)


def constant_field(grid: Grid, value: float) -> Field:
    return Field(grid, np.full(grid.shape, float(value)))


def sup_norm(f: Field) -> float:
    return float(np.abs(f.values).max())


def inf_value(f: Field) -> float:
    return float(f.values.min())


def laplacian(f: Field) -> Field:
    """Second-order central-stencil periodic Laplacian."""
    v = f.values
    dx2 = f.grid.dx**2
    out = np.zeros_like(v)
    for ax in range(v.ndim):
        out += (np.roll(v, -1, axis=ax) - 2.0 * v + np.roll(v, 1, axis=ax)) / dx2
    return Field(f.grid, out)


def gradient_sup(f: Field) -> float:
    """Largest central-difference first-derivative magnitude over all axes."""
    v = f.values
    two_dx = 2.0 * f.grid.dx
    worst = 0.0
    for ax in range(v.ndim):
        diff = (np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / two_dx
        worst = max(worst, float(np.abs(diff).max()))
    return worst


@dataclass(frozen=True, eq=False)
class State:
    """Prey, hunting-predator, and dormant-predator fields on one grid."""

    u: Field
    v: Field
    w: Field

    def __post_init__(self):
        if not (self.u.grid == self.v.grid == self.w.grid):
            raise ValueError("state components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @property
    def components(self) -> tuple[Field, Field, Field]:
        return (self.u, self.v, self.w)

    def sup(self) -> tuple[float, float, float]:
        return (sup_norm(self.u), sup_norm(self.v), sup_norm(self.w))

    def inf(self) -> tuple[float, float, float]:
        return (inf_value(self.u), inf_value(self.v), inf_value(self.w))


COMPONENT_NAMES = ("u", "v", "w")


def constant_state(grid: Grid, values) -> State:
    a, b, c = values
    return State(constant_field(grid, a), constant_field(grid, b), constant_field(grid, c))


def box_violation(state: State, lo, hi, tol: float = 0.0):
    """First out-of-box sample as (component index, flat node index, value), or None."""
    for ci, f in enumerate(state.components):
        flat = f.values.ravel()
        bad = (flat < lo[ci] - tol) | (flat > hi[ci] + tol)
        if bad.any():
            idx = int(np.argmax(bad))
            return ci, idx, float(flat[idx])
    return None


def box_membership(state: State, lo, hi, tol: float = 0.0) -> bool:
    """True when every node of every component lies in [lo, hi], up to tol."""
    return box_violation(state, lo, hi, tol) is None


def _as_triple(amplitude) -> tuple[float, float, float]:
    if np.isscalar(amplitude):
        return (float(amplitude),) * 3
    a, b, c = amplitude
    return (float(a), float(b), float(c))


def _bump_values(grid: Grid, amp: float, width: float | None) -> np.ndarray:
    # periodized Gaussian, normalized so the peak value is exactly amp
    sigma = width if width is not None else grid.length / 8.0
    if not sigma > 0:
        raise ValueError(f"bump width must be positive, got {sigma!r}")
    profiles = []
    for x in grid.coords():
        r = x - 0.5 * grid.length
        prof = sum(
            np.exp(-((r + k * grid.length) ** 2) / (2.0 * sigma * sigma)) for k in (-1.0, 0.0, 1.0)
        )
        profiles.append(prof)
    values = profiles[0] if grid.dim == 1 else np.multiply.outer(profiles[0], profiles[1])
    return amp * values / values.max()


def _fourier_values(grid: Grid, amp: float, rng: np.random.Generator) -> np.ndarray:
    tau = 2.0 * np.pi / grid.length
    f = np.zeros(grid.shape)
    if grid.dim == 1:
        (x,) = grid.coords()
        for k in range(1, 5):
            a, b = rng.normal(0.0, 0.25 / k, size=2)
            f += a * np.cos(tau * k * x) + b * np.sin(tau * k * x)
    else:
        x, y = grid.coords()
        for kx, ky in ((1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2)):
            a, b = rng.normal(0.0, 0.25 / (kx + ky), size=2)
            phase = tau * (kx * x[:, None] + ky * y[None, :])
            f += a * np.cos(phase) + b * np.sin(phase)
    return amp * np.clip(0.5 + f, 0.0, None)


def _smoothed_box_values(grid: Grid, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    raw = rng.uniform(lo, hi, size=grid.shape)
    t = 2.0 * grid.dx**2  # one short heat step removes the node-to-node noise
    multiplier = np.exp(t * laplacian_symbol(grid))
    if grid.dim == 1:
        smooth = np.fft.irfft(np.fft.rfft(raw) * multiplier, n=grid.n)
    else:
        smooth = np.fft.irfftn(np.fft.rfftn(raw) * multiplier, s=grid.shape, axes=(0, 1))
    # averaging cannot leave the sampling box; clip the fft round-off that can
    return np.clip(smooth, lo, hi)


def initial_data(kind, grid, amplitude=1.0, seed=0, width=None, box=None) -> State:
    """Generate seeded initial states.

    Kinds:

    ``constant``
        componentwise constant at ``amplitude``
    ``gaussian-bump``
        periodized Gaussian bump centered in the box with peak value
        ``amplitude`` (per component) and the given ``width`` (default L/8)
    ``random-fourier``
        nonnegative low-mode trigonometric sample around ``0.5 * amplitude``,
        clipped at zero
    ``box-random``
        independent uniform node values inside ``box`` (a lo/hi pair of
        component triples), smoothed by one short heat step

    ``amplitude`` is a scalar or one value per component.  All randomness
    comes from ``numpy.random.default_rng(seed)``.
    """
    amp = _as_triple(amplitude)
    rng = np.random.default_rng(seed)
    if kind == "constant":
        return constant_state(grid, amp)
    if kind == "gaussian-bump":
        return State(*(Field(grid, _bump_values(grid, a, width)) for a in amp))
    if kind == "random-fourier":
        return State(*(Field(grid, _fourier_values(grid, a, rng)) for a in amp))
    if kind == "box-random":
        if box is None:
            raise ValueError("box-random initial data needs box=(lo, hi)")
        lo, hi = box
        fields = []
        for ci in range(3):
            if not (hi[ci] >= lo[ci]):
                raise ValueError(f"empty box for component {COMPONENT_NAMES[ci]}: [{lo[ci]}, {hi[ci]}]")
            fields.append(Field(grid, _smoothed_box_values(grid, float(lo[ci]), float(hi[ci]), rng)))
        return State(*fields)
    raise ValueError(f"unknown initial-data kind {kind!r}; expected one of {INITIAL_DATA_KINDS}")


def field_to_csv(f: Field, path) -> None:
    """Write one row per node: flat index, per-axis integer coordinates, value."""
    if f.grid.dim == 1:
        header = ("index", "x", "value")
        rows = ((i, i * f.grid.dx, float(val)) for i, val in enumerate(f.values))
    else:
        header = ("index", "index2", "x", "y", "value")
        dx = f.grid.dx
        rows = (
            (i, j, i * dx, j * dx, float(f.values[i, j]))
            for i in range(f.grid.n)
            for j in range(f.grid.n)
        )
    write_csv(path, header, rows)


@dataclass
class Trajectory:
    """Scalar summaries at sampled times plus sparse full-state snapshots.

    ``sup``/``inf`` hold componentwise extrema, ``dist`` sup-distances to
    each target constant state (the prey-only state (1, 0, 0) is always
    target 0), ``in_region`` 0/1 flags when a box was supplied to the
    solver, and ``grad_w`` the largest first-derivative magnitude of the
    dormant field when tracking was requested.
    """

    grid: Grid
    times: np.ndarray
    sup: np.ndarray
    inf: np.ndarray
    targets: tuple[tuple[float, float, float], ...]
    dist: np.ndarray
    in_region: np.ndarray | None = None
    region_box: tuple[tuple[float, float, float], tuple[float, float, float]] | None = None
    grad_w: np.ndarray | None = None
    snapshots: dict[int, State] = field(default_factory=dict)
    snapshot_steps: dict[int, int] = field(default_factory=dict)
    first_exit: tuple[float, int, int, float] | None = None
    max_clamp: float = 0.0

    def index_of(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no sample at t={t!r}; nearest is t={self.times[idx]!r}")
        return idx

    def state_at(self, t: float) -> State:
        idx = self.index_of(t)
        if idx not in self.snapshots:
            raise KeyError(f"no snapshot stored at t={self.times[idx]!r}")
        return self.snapshots[idx]

    def final_state(self) -> State:
        return self.state_at(float(self.times[-1]))

    def to_csv(self, path) -> None:
        def rows():
            for i, t in enumerate(self.times):
                row = [float(t)]
                for ci in range(3):
                    row.append(float(self.sup[i, ci]))
                    row.append(float(self.inf[i, ci]))
                row.append(float(self.dist[i, 0]))
                row.append(None if self.in_region is None else int(self.in_region[i]))
                yield row

        write_csv(
            path,
            ("t", "sup_u", "inf_u", "sup_v", "inf_v", "sup_w", "inf_w", "dist_100", "in_R"),
            rows(),
        )
