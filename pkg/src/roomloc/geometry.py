"""Room shapes, boundary discretization and microphone/source sampling.

Rooms are immutable.  Every room exposes a closed parametric boundary
``t -> (x(t), y(t))``, t in [0, 2*pi), oriented counterclockwise, so that
the rotated tangent ``(y', -x')`` is the outward normal.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import pdist

TWO_PI = 2.0 * np.pi
ARC_TABLE_SEGMENTS = 8192
DENSE_BOUNDARY = 4096


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle ``[0, lx] x [0, ly]``."""

    lx: float
    ly: float

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("rectangle sides must be positive")

    @property
    def centroid(self):
        return np.array([0.5 * self.lx, 0.5 * self.ly])

    @property
    def perimeter(self):
        return 2.0 * (self.lx + self.ly)

    def curve(self, t):
        """Boundary point at parameter t; t is proportional to arc length."""
        s = np.mod(np.asarray(t, dtype=float), TWO_PI) / TWO_PI * self.perimeter
        lx, ly = self.lx, self.ly
        x = np.select(
            [s < lx, s < lx + ly, s < 2 * lx + ly],
            [s, np.full_like(s, lx), lx - (s - lx - ly)],
            np.zeros_like(s),
        )
        y = np.select(
            [s < lx, s < lx + ly, s < 2 * lx + ly],
            [np.zeros_like(s), s - lx, np.full_like(s, ly)],
            ly - (s - 2 * lx - ly),
        )
        return np.stack([x, y], axis=-1)

    def curve_derivative(self, t):
        s = np.mod(np.asarray(t, dtype=float), TWO_PI) / TWO_PI * self.perimeter
        speed = self.perimeter / TWO_PI
        lx, ly = self.lx, self.ly
        dx = np.select([s < lx, s < lx + ly, s < 2 * lx + ly], [1.0, 0.0, -1.0], 0.0)
        dy = np.select([s < lx, s < lx + ly, s < 2 * lx + ly], [0.0, 1.0, 0.0], -1.0)
        return speed * np.stack([dx, dy], axis=-1)

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        return (p[..., 0] > 0) & (p[..., 0] < self.lx) & (p[..., 1] > 0) & (p[..., 1] < self.ly)

    def distance_to_boundary(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return np.minimum(np.minimum(x, self.lx - x), np.minimum(y, self.ly - y))

    @property
    def bounding_box(self):
        return np.array([0.0, 0.0]), np.array([self.lx, self.ly])


@dataclass(frozen=True)
class StarShaped:
    """Closed trigonometric curve, star-convex about its area centroid.

    ``x(t) = sum_j x_cos[j] cos(j t) + x_sin[j] sin(j t)`` and likewise for y,
    with j counted from 0 (so ``x_sin[0]`` has no effect).
    """

    x_cos: tuple = (0.0,)
    x_sin: tuple = (0.0,)
    y_cos: tuple = (0.0,)
    y_sin: tuple = (0.0,)

    def __post_init__(self):
        for name in ("x_cos", "x_sin", "y_cos", "y_sin"):
            object.__setattr__(self, name, tuple(float(c) for c in getattr(self, name)))
        t = np.linspace(0.0, TWO_PI, DENSE_BOUNDARY, endpoint=False)
        d = self.curve(t) - self.centroid
        dd = self.curve_derivative(t)
        # star-convexity: polar angle about the centroid strictly increasing
        if np.any(d[:, 0] * dd[:, 1] - d[:, 1] * dd[:, 0] <= 0):
            raise ValueError("curve is not star-convex about its centroid (or is clockwise)")

    @staticmethod
    def _trig(coefs, t, deriv=0):
        j = np.arange(len(coefs))
        arg = np.multiply.outer(t, j)
        if deriv == 0:
            return np.cos(arg), np.sin(arg)
        return -j * np.sin(arg), j * np.cos(arg)

    def _eval(self, t, deriv):
        t = np.asarray(t, dtype=float)
        out = []
        for cos_c, sin_c in ((self.x_cos, self.x_sin), (self.y_cos, self.y_sin)):
            c_basis, _ = self._trig(cos_c, t, deriv)
            _, s_basis = self._trig(sin_c, t, deriv)
            out.append(c_basis @ np.asarray(cos_c) + s_basis @ np.asarray(sin_c))
        return np.stack(out, axis=-1)

    def curve(self, t):
        return self._eval(t, 0)

    def curve_derivative(self, t):
        return self._eval(t, 1)

    @cached_property
    def centroid(self):
        t = np.linspace(0.0, TWO_PI, DENSE_BOUNDARY, endpoint=False)
        p = self._eval(t, 0)
        dp = self._eval(t, 1)
        # Green's theorem on the trigonometric curve (spectrally exact)
        area = np.mean(p[:, 0] * dp[:, 1] - p[:, 1] * dp[:, 0]) * np.pi
        cx = np.mean(p[:, 0] ** 2 * dp[:, 1]) * np.pi / area
        cy = -np.mean(p[:, 1] ** 2 * dp[:, 0]) * np.pi / area
        return np.array([cx, cy])

    @cached_property
    def _angle_table(self):
        t = np.linspace(0.0, TWO_PI, DENSE_BOUNDARY + 1)
        d = self._eval(t, 0) - self.centroid
        phi = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
        return phi, t

    def _param_at_angle(self, phi):
        """Curve parameter whose point lies at polar angle ``phi`` about the centroid."""
        table_phi, table_t = self._angle_table
        phi = np.asarray(phi, dtype=float)
        phi_w = table_phi[0] + np.mod(phi - table_phi[0], TWO_PI)
        t = np.interp(phi_w, table_phi, table_t)
        c = self.centroid
        for _ in range(4):
            d = self._eval(t, 0) - c
            dd = self._eval(t, 1)
            ang = np.arctan2(d[..., 1], d[..., 0])
            err = np.mod(ang - phi_w + np.pi, TWO_PI) - np.pi
            rate = (d[..., 0] * dd[..., 1] - d[..., 1] * dd[..., 0]) / np.sum(d * d, axis=-1)
            t = t - err / rate
        return t

    def radial(self, phi):
        """Distance from the centroid to the boundary along polar angle ``phi``."""
        t = self._param_at_angle(phi)
        return np.linalg.norm(self._eval(t, 0) - self.centroid, axis=-1)

    def contains(self, p):
        d = np.asarray(p, dtype=float) - self.centroid
        rho = np.hypot(d[..., 0], d[..., 1])
        return rho < self.radial(np.arctan2(d[..., 1], d[..., 0]))

    @cached_property
    def _dense_tree(self):
        t = np.linspace(0.0, TWO_PI, 16 * DENSE_BOUNDARY, endpoint=False)
        return cKDTree(self._eval(t, 0))

    def distance_to_boundary(self, p):
        dist, _ = self._dense_tree.query(np.asarray(p, dtype=float))
        return dist

    @property
    def bounding_box(self):
        pts = self._dense_tree.data
        return pts.min(axis=0), pts.max(axis=0)


@dataclass(frozen=True)
class Disk:
    """Circular region of interest."""

    center: tuple
    diameter: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.diameter > 0:
            raise ValueError("disk diameter must be positive")

    @property
    def radius(self):
        return 0.5 * self.diameter

    @property
    def centroid(self):
        return np.array(self.center)

    def curve(self, t):
        t = np.asarray(t, dtype=float)
        return self.centroid + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def curve_derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self.radius * np.stack([-np.sin(t), np.cos(t)], axis=-1)

    def contains(self, p):
        d = np.asarray(p, dtype=float) - self.centroid
        return np.hypot(d[..., 0], d[..., 1]) < self.radius

    def distance_to_boundary(self, p):
        d = np.asarray(p, dtype=float) - self.centroid
        return np.abs(self.radius - np.hypot(d[..., 0], d[..., 1]))

    @property
    def bounding_box(self):
        c = self.centroid
        return c - self.radius, c + self.radius


def reference_room():
    """The star-shaped test room x = cos t, y = sin t + sin(2t)/3."""
    return StarShaped(x_cos=(0.0, 1.0), x_sin=(0.0,), y_cos=(0.0,), y_sin=(0.0, 1.0, 1.0 / 3.0))


def default_region(room=None):
    """Disk of diameter 1.4 centred at the room centroid."""
    room = reference_room() if room is None else room
    return Disk(center=tuple(room.centroid), diameter=1.4)


@dataclass(frozen=True)
class Boundary:
    """Discretized boundary: positions, unit outward normals and parameters."""

    points: np.ndarray
    normals: np.ndarray
    t: np.ndarray
    weights: np.ndarray  # arc length attached to each point

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray
    on_boundary: np.ndarray
    strategy: str

    def __len__(self):
        return len(self.points)


def point_in_room(room, p):
    """True where ``p`` lies strictly inside ``room`` (vectorized over leading axes)."""
    inside = room.contains(p)
    return bool(inside) if np.ndim(inside) == 0 else inside


def _normals_from_tangent(tangent):
    speed = np.linalg.norm(tangent, axis=-1)
    if np.any(speed < 1e-12):
        raise ValueError("degenerate tangent on the boundary")
    return np.stack([tangent[:, 1], -tangent[:, 0]], axis=-1) / speed[:, None], speed


def boundary_discretize(room, n, by_arclength=False):
    """``n`` boundary points, equispaced in the curve parameter.

    With ``by_arclength`` the points are equispaced in arc length instead.
    Rectangles are parametrized by arc length; each side gets a share of
    the points proportional to its length, placed at the midpoints of equal
    sub-segments, so no point falls on a corner.
    """
    n = int(n)
    if n < 8:
        raise ValueError("need at least 8 boundary points")
    if isinstance(room, Rectangle):
        return _rectangle_discretize(room, n)
    if by_arclength:
        t = _arclength_inverse(room, (np.arange(n) + 0.5) / n)
    else:
        t = TWO_PI * (np.arange(n) + 0.5) / n
    pts = room.curve(t)
    normals, speed = _normals_from_tangent(room.curve_derivative(t))
    if by_arclength:
        weights = np.full(n, _arc_table(room)[1][-1] / n)
    else:
        weights = speed * TWO_PI / n
    return Boundary(points=pts, normals=normals, t=t, weights=weights)


def _rectangle_discretize(room, n):
    sides = np.array([room.lx, room.ly, room.lx, room.ly])
    share = n * sides / sides.sum()
    counts = np.floor(share).astype(int)
    for i in np.argsort(-(share - counts), kind="stable")[: n - counts.sum()]:
        counts[i] += 1
    starts = np.concatenate([[0.0], np.cumsum(sides)[:-1]])
    s = np.concatenate([s0 + length * (np.arange(c) + 0.5) / c for s0, length, c in zip(starts, sides, counts)])
    weights = np.repeat(sides / counts, counts)
    t = TWO_PI * s / room.perimeter
    normals, _ = _normals_from_tangent(room.curve_derivative(t))
    return Boundary(points=room.curve(t), normals=normals, t=t, weights=weights)


_ARC_CACHE = {}


def _arc_table(room):
    key = room
    if key not in _ARC_CACHE:
        t = np.linspace(0.0, TWO_PI, ARC_TABLE_SEGMENTS + 1)
        pts = room.curve(t)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        _ARC_CACHE[key] = (t, np.concatenate([[0.0], np.cumsum(seg)]))
    return _ARC_CACHE[key]


def _arclength_inverse(room, u):
    t, cum = _arc_table(room)
    return np.interp(np.asarray(u) * cum[-1], cum, t)


def perimeter(room, n=DENSE_BOUNDARY):
    """Perimeter of the polygon through ``n`` equispaced-parameter boundary points."""
    pts = room.curve(TWO_PI * np.arange(n) / n)
    return float(np.sum(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)))


def sample_interior(room, n, rng, region=None, margin=0.0):
    """``n`` i.i.d. uniform points inside ``region`` (default: the room).

    Points closer than ``margin`` to the room boundary are rejected.
    Rejection sampling from the bounding box; aborts if fewer than one draw
    in a thousand is accepted.
    """
    target = room if region is None else region
    if n == 0:
        return SampleSet(points=np.zeros((0, 2)), on_boundary=np.zeros(0, dtype=bool), strategy="interior")
    lo, hi = target.bounding_box
    out = []
    drawn = accepted = 0
    while accepted < n:
        batch = max(64, 2 * (n - accepted))
        cand = lo + (hi - lo) * rng.random((batch, 2))
        ok = target.contains(cand)
        if region is not None:
            ok &= room.contains(cand)
        if margin > 0:
            ok &= room.distance_to_boundary(cand) >= margin
        drawn += batch
        out.append(cand[ok])
        accepted += int(ok.sum())
        if drawn >= 10000 and accepted < 1e-3 * drawn:
            raise RuntimeError("rejection sampler acceptance rate below 1e-3")
    pts = np.concatenate(out)[:n]
    return SampleSet(points=pts, on_boundary=np.zeros(n, dtype=bool), strategy="interior")


def sample_boundary(room, n, rng):
    """``n`` i.i.d. points uniform in arc length on the boundary of ``room``."""
    u = rng.random(n)
    if isinstance(room, Disk):
        t = TWO_PI * u
    elif isinstance(room, Rectangle):
        t = TWO_PI * u
    else:
        t = _arclength_inverse(room, u)
    return SampleSet(points=room.curve(t), on_boundary=np.ones(n, dtype=bool), strategy="boundary")


def sample_mixed(room, region, n, ratio, rng):
    """round(ratio*n) points inside ``region``, the rest on its border."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must lie in [0, 1]")
    n_in = int(np.floor(ratio * n + 0.5))
    inner = sample_interior(room, n_in, rng, region=region)
    border = sample_boundary(region, n - n_in, rng)
    return SampleSet(
        points=np.concatenate([inner.points, border.points]),
        on_boundary=np.concatenate([inner.on_boundary, border.on_boundary]),
        strategy="mixed",
    )


def sample_mics(room, region, n, strategy, rng, ratio=0.5, margin=0.0):
    """Dispatch on the sampling strategy name: interior | boundary | mixed."""
    if strategy == "interior":
        return sample_interior(room, n, rng, region=region, margin=margin)
    if strategy == "boundary":
        return sample_boundary(room if region is None else region, n, rng)
    if strategy == "mixed":
        if region is None:
            raise ValueError("mixed sampling needs a region of interest")
        return sample_mixed(room, region, n, ratio, rng)
    raise ValueError(f"unknown sampling strategy {strategy!r}")


@lru_cache(maxsize=32)
def room_diameter(room):
    """Largest distance between two boundary points."""
    if isinstance(room, Rectangle):
        return float(np.hypot(room.lx, room.ly))
    if isinstance(room, Disk):
        return float(room.diameter)
    pts = room.curve(TWO_PI * np.arange(DENSE_BOUNDARY) / DENSE_BOUNDARY)
    hull = pts[ConvexHull(pts).vertices]
    return float(pdist(hull).max())


@lru_cache(maxsize=32)
def max_radius(room):
    """Largest distance from the centroid to the boundary."""
    if isinstance(room, Disk):
        return room.radius
    pts = room.curve(TWO_PI * np.arange(DENSE_BOUNDARY) / DENSE_BOUNDARY)
    return float(np.max(np.linalg.norm(pts - room.centroid, axis=1)))


def grid_points(region, spacing, room=None, margin=0.0):
    """Square lattice of candidate source positions inside ``region``.

    The lattice is anchored at the region centroid.
    """
    lo, hi = region.bounding_box
    c = region.centroid
    ix = np.arange(np.floor((lo[0] - c[0]) / spacing), np.ceil((hi[0] - c[0]) / spacing) + 1)
    iy = np.arange(np.floor((lo[1] - c[1]) / spacing), np.ceil((hi[1] - c[1]) / spacing) + 1)
    gx, gy = np.meshgrid(c[0] + spacing * ix, c[1] + spacing * iy)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    keep = region.contains(pts)
    if room is not None:
        keep &= room.contains(pts)
        if margin > 0:
            keep[keep] &= room.distance_to_boundary(pts[keep]) >= margin
    return pts[keep]
