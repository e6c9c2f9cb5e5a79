"""Helmholtz fields in a 2D room: Green functions, field bases and dictionaries.

Conventions: wavenumber ``k`` is a spatial frequency (inverse length) and
the free-field Green function is ``G0(x, y) = (i/4) H0(k |x - y|)``.  Walls
are rigid (homogeneous Neumann condition).

Two independent routes to the room response are provided:

* :func:`mfs_forward`, the ground-truth simulator, fits exterior point
  charges (method of fundamental solutions) so that the total normal
  derivative vanishes on the wall;
* :class:`KnownRoomModel` builds dictionary columns as ``G0`` plus a
  Fourier-Bessel expansion of the reflected field fitted by least squares.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .geometry import (
    Rectangle,
    boundary_discretize,
    grid_points,
    max_radius,
    room_diameter,
)
from .specialfuncs import bessel_j_orders, bessel_y_orders, hankel1_01, hankel1_01_fast

logger = logging.getLogger(__name__)

RESIDUAL_FLAG = 1e-3
IMAGE_LOOKUP_POINTS = 16384
IMAGE_ORDER = 6  # multipole order at the image of a near-wall source
IMAGE_WINDOW = 10.0  # refinement half-width, in wall distances
IMAGE_TRIGGER = 1e-6  # certified residual above which near-wall sources get images
COLUMN_FLAG = 1e-2


def _pairwise(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = x[:, None, :] - y[None, :, :]
    return d, np.hypot(d[..., 0], d[..., 1])


def _check_separated(r):
    if np.any(r == 0.0):
        raise ValueError("coincident source and observation points (Green function singularity)")


# ---------------------------------------------------------------------------
# Elementary solutions
# ---------------------------------------------------------------------------


def g0(k, x, y):
    """Free-field Green function (i/4) H0(k|x - y|) for single points."""
    r = math.hypot(x[0] - y[0], x[1] - y[1])
    _check_separated(np.array([r]))
    h0, _ = hankel1_01(k * r)
    return complex(0.25j * h0)


def g0_matrix(k, points, sources):
    """``G0`` between observation ``points`` (rows) and ``sources`` (columns)."""
    _, r = _pairwise(points, sources)
    _check_separated(r)
    h0, _ = hankel1_01_fast(k * r)
    return 0.25j * h0


def g0_normal_derivative_matrix(k, points, normals, sources):
    """Normal derivative at ``points`` (along ``normals``) of ``G0(., source)``."""
    d, r = _pairwise(points, sources)
    _check_separated(r)
    _, h1 = hankel1_01_fast(k * r)
    cos_angle = np.einsum("ijk,ik->ij", d, np.atleast_2d(normals)) / r
    return -0.25j * k * h1 * cos_angle


def y0_atom(k, x, y):
    """Y0(k|x - y|): the real-part source atom used for unknown rooms."""
    r = math.hypot(x[0] - y[0], x[1] - y[1])
    _check_separated(np.array([r]))
    return float(bessel_y_orders(0, k * r)[0])


def y0_matrix(k, points, sources):
    _, r = _pairwise(points, sources)
    _check_separated(r)
    return hankel1_01_fast(k * r)[0].imag


def _polar(points, origin):
    d = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(origin, dtype=float)
    return np.hypot(d[:, 0], d[:, 1]), np.arctan2(d[:, 1], d[:, 0])


def fb_orders(order):
    return np.arange(-order, order + 1)


def _cylinder_matrix(k, points, order, origin, outgoing):
    r, theta = _polar(points, origin)
    f = bessel_j_orders(order, k * r)
    if outgoing:
        f = f + 1j * bessel_y_orders(order, k * r)
    ls = fb_orders(order)
    signs = np.where(ls < 0, (-1.0) ** np.abs(ls), 1.0)
    return (signs[:, None] * f[np.abs(ls)] * np.exp(1j * np.outer(ls, theta))).T


def _ladder_normal_derivative(wide, k, normals):
    # (d/dx - i d/dy) u_l = k u_{l-1}, (d/dx + i d/dy) u_l = -k u_{l+1}
    lower = wide[:, :-2]
    upper = wide[:, 2:]
    dx = 0.5 * k * (lower - upper)
    dy = 0.5j * k * (lower + upper)
    normals = np.atleast_2d(normals)
    return normals[:, 0:1] * dx + normals[:, 1:2] * dy


def fb_matrix(k, points, order, origin):
    """Fourier-Bessel functions J_l(kr) exp(i l theta), l = -order..order, as columns."""
    return _cylinder_matrix(k, points, order, origin, outgoing=False)


def multipole_matrix(k, points, order, origin):
    """Outgoing multipoles H_l(kr) exp(i l theta), l = -order..order (singular at ``origin``)."""
    return _cylinder_matrix(k, points, order, origin, outgoing=True)


def multipole_normal_derivative_matrix(k, points, normals, order, origin):
    wide = multipole_matrix(k, points, order + 1, origin)
    return _ladder_normal_derivative(wide, k, normals)


def fb_function(l, k, x, origin):
    """J_l(kr) exp(i l theta) about ``origin``; equals 1 (l = 0) or 0 at r = 0."""
    return complex(fb_matrix(k, [x], abs(l), origin)[0, l + abs(l)])


def fb_normal_derivative_matrix(k, points, normals, order, origin):
    """Normal derivatives of the Fourier-Bessel functions of orders -order..order.

    Uses the ladder identities
    (d/dx - i d/dy) u_l = k u_{l-1} and (d/dx + i d/dy) u_l = -k u_{l+1}
    for u_l = J_l(kr) exp(i l theta), which are regular at r = 0.
    """
    wide = fb_matrix(k, points, order + 1, origin)  # orders -(order+1)..order+1
    return _ladder_normal_derivative(wide, k, normals)


def fb_normal_derivative(l, k, point, normal, origin):
    return complex(fb_normal_derivative_matrix(k, [point], [normal], abs(l), origin)[0, l + abs(l)])


def plane_wave(k, theta, x):
    """exp(i k (x1 cos theta + x2 sin theta))."""
    return complex(np.exp(1j * k * (x[0] * np.cos(theta) + x[1] * np.sin(theta))))


def plane_wave_directions(n):
    return 2.0 * np.pi * np.arange(n) / n


def plane_wave_matrix(k, points, n, origin=(0.0, 0.0)):
    """``n`` plane waves with directions equispaced on the circle, phase-referenced at ``origin``."""
    d = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(origin, dtype=float)
    theta = plane_wave_directions(n)
    return np.exp(1j * k * (np.outer(d[:, 0], np.cos(theta)) + np.outer(d[:, 1], np.sin(theta))))


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceSet:
    positions: np.ndarray
    amplitudes: np.ndarray

    def __len__(self):
        return len(self.positions)


@dataclass
class Dictionary:
    """Measurement-by-atom matrix with per-column metadata.

    ``kind`` is one of ``"grid"`` (meta: positions), ``"fb"`` (meta: orders)
    or ``"pw"`` (meta: directions).
    """

    matrix: np.ndarray
    k: float
    kind: str
    meta: np.ndarray
    flags: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.meta):
            raise ValueError("dictionary matrix and metadata disagree")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("dictionary contains non-finite entries")

    @property
    def shape(self):
        return self.matrix.shape

    def normalized(self):
        norms = np.linalg.norm(self.matrix, axis=0)
        norms[norms == 0] = 1.0
        return Dictionary(self.matrix / norms, self.k, self.kind, self.meta, self.flags)


def coherence(matrix):
    """Largest |<a_i, a_j>| over distinct unit-normalized columns."""
    a = matrix / np.linalg.norm(matrix, axis=0)
    gram = np.abs(a.conj().T @ a)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


# ---------------------------------------------------------------------------
# Ground truth: method of fundamental solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MfsConfig:
    n_charges: int = 200
    n_collocation: int = 400
    charge_offset: float = 0.2
    svd_cutoff: float = 1e-12

    def __post_init__(self):
        if self.n_collocation < 2 * self.n_charges:
            raise ValueError("need n_collocation >= 2 * n_charges")
        if not self.charge_offset > 0:
            raise ValueError("charge_offset must be positive")

    @classmethod
    def default_for(cls, room, k):
        n = max(200, int(round(8 * k * room_diameter(room))))
        return cls(n_charges=n, n_collocation=2 * n)


class _TruncatedSolve:
    """Least-norm least-squares solves with a truncated SVD.

    The factors are applied one after the other; multiplying by an explicit
    pseudo-inverse instead loses about cond(a) * eps of the residual to
    cancellation among its huge entries.
    """

    def __init__(self, a, cutoff):
        u, s, vh = np.linalg.svd(a, full_matrices=False)
        keep = s > cutoff * s[0]
        self.singular_values = s
        self._uh = u[:, keep].conj().T
        self._s = s[keep]
        self._v = vh[keep].conj().T

    def __call__(self, b):
        y = self._uh @ b
        y = y / (self._s[:, None] if y.ndim == 2 else self._s)
        return self._v @ y


@lru_cache(maxsize=8)
def _wall_lookup(room):
    wall = boundary_discretize(room, IMAGE_LOOKUP_POINTS, by_arclength=True)
    return wall, cKDTree(wall.points)


def wall_images(room, points, max_dist):
    """Mirror images across the local wall tangent of the points nearer a wall than ``max_dist``.

    A point source at distance d from a rigid wall has boundary data with a
    peak of width ~d, which smooth bases (exterior charges at a fixed
    offset, Fourier-Bessel functions) cannot resolve once d is small.  Its
    mirror image with the same amplitude cancels that peak to first order.

    Returns ``(images, feet, distances, index)``: image positions, the
    index of the nearest dense wall point, the wall distances and the
    indices (into ``points``) of the mirrored points.  Images that would
    land inside the room (sharply concave walls) are skipped.
    """
    wall, tree = _wall_lookup(room)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    dist, idx = tree.query(pts)
    near = np.nonzero(dist < max_dist)[0]
    foot = wall.points[idx[near]]
    n = wall.normals[idx[near]]
    img = pts[near] + 2.0 * np.sum((foot - pts[near]) * n, axis=1)[:, None] * n
    keep = ~room.contains(img)
    near = near[keep]
    return img[keep], idx[near], dist[near], near


class MfsSolver:
    """Neumann room response at one wavenumber by exterior point charges.

    The charge layout and the truncated pseudo-inverse of the charge-to-wall
    normal-derivative map are computed once and reused for every source set.
    """

    def __init__(self, room, k, cfg=None):
        self.room = room
        self.k = float(k)
        self.cfg = MfsConfig.default_for(room, k) if cfg is None else cfg
        cfg = self.cfg
        bc = boundary_discretize(room, cfg.n_charges, by_arclength=True)
        self.charges = bc.points + cfg.charge_offset * bc.normals
        if np.any(room.contains(self.charges)):
            raise ValueError("an MFS charge point falls inside the room")
        self.colloc = boundary_discretize(room, cfg.n_collocation, by_arclength=True)
        a = g0_normal_derivative_matrix(k, self.colloc.points, self.colloc.normals, self.charges)
        self._solve = _TruncatedSolve(a, cfg.svd_cutoff)
        self.singular_values = self._solve.singular_values
        self._a = a
        # fresh check set, twice as dense, staggered from the collocation points
        self.check = boundary_discretize(room, 2 * cfg.n_collocation + 1, by_arclength=True)
        self._a_check = g0_normal_derivative_matrix(k, self.check.points, self.check.normals, self.charges)
        self._wall = _wall_lookup(room)[0]

    def images(self, sources):
        """Mirror images of the sources closer to a wall than the charge offset.

        Returns ``(images, feet, distances)``; see :func:`wall_images`.
        """
        pos, feet, dist, near = wall_images(self.room, sources.positions, self.cfg.charge_offset)
        amps = np.asarray(sources.amplitudes)[near]
        return SourceSet(pos, amps), feet, dist

    def _refinement(self, feet, dists, offset):
        """Dense wall points around each foot, spaced a quarter of the wall distance."""
        n_wall = len(self._wall)
        ds = self._wall.weights[0]
        idx = []
        for j, d in zip(feet, dists):
            stride = max(1, int(0.25 * d / ds))
            half = int(math.ceil(IMAGE_WINDOW * max(d, ds) / (stride * ds)))
            idx.append(j + stride * (np.arange(-half, half + 1) + offset))
        idx = np.mod(np.concatenate(idx), n_wall).astype(int)
        return self._wall.points[idx], self._wall.normals[idx]

    def _rhs(self, points, normals, sources, images):
        b = g0_normal_derivative_matrix(self.k, points, normals, sources.positions) @ sources.amplitudes
        extra = g0_normal_derivative_matrix(self.k, points, normals, images.positions) @ images.amplitudes
        return b, b + extra

    def _plain(self, sources):
        b = g0_normal_derivative_matrix(self.k, self.colloc.points, self.colloc.normals, sources.positions)
        b = b @ sources.amplitudes
        c = -self._solve(b)
        rel = np.linalg.norm(self._a @ c + b) / np.linalg.norm(b)
        b_check = g0_normal_derivative_matrix(self.k, self.check.points, self.check.normals, sources.positions)
        b_check = b_check @ sources.amplitudes
        rel_check = np.linalg.norm(self._a_check @ c + b_check) / np.linalg.norm(b_check)
        return c, rel, rel_check

    def _solution(self, sources):
        """Charge strengths, images, multipole coefficients and the two boundary residuals.

        Charges alone are tried first; near-wall sources whose certified
        residual exceeds ``IMAGE_TRIGGER`` get mirror images carrying
        multipoles, fitted on collocation rows refined around the wall foot.
        """
        images, feet, dists = self.images(sources)
        no_images = SourceSet(np.zeros((0, 2)), np.zeros(0, dtype=complex))
        c, rel, rel_check = self._plain(sources)
        if len(images) == 0 or rel_check <= IMAGE_TRIGGER:
            return c, no_images, np.zeros(0, dtype=complex), rel, rel_check

        def multipoles(points, normals):
            return np.hstack([multipole_normal_derivative_matrix(self.k, points, normals, IMAGE_ORDER, q)
                              for q in images.positions])

        n_base = len(self.colloc)
        rp, rn = self._refinement(feet, dists, 0.0)
        pts = np.vstack([self.colloc.points, rp])
        nrm = np.vstack([self.colloc.normals, rn])
        m_cols = multipoles(pts, nrm)
        b_src, b = self._rhs(pts, nrm, sources, images)
        # eliminate the charges with the stored factorization of the base rows,
        # c = -A^+ (b + M m), then fit the multipoles m on every row
        cc = -self._solve(np.column_stack([b[:n_base], m_cols[:n_base]]))
        a_all = np.vstack([self._a, g0_normal_derivative_matrix(self.k, rp, rn, self.charges)])
        r = a_all @ cc + np.column_stack([b, m_cols])
        scale = np.linalg.norm(r[:, 1:], axis=0)
        m, *_ = np.linalg.lstsq(r[:, 1:] / scale, -r[:, 0], rcond=self.cfg.svd_cutoff)
        m = m / scale
        c = cc[:, 0] + cc[:, 1:] @ m
        rel = np.linalg.norm(r[:, 0] + r[:, 1:] @ m) / np.linalg.norm(b_src)

        cp, cn = self._refinement(feet, dists, 0.5)
        pts = np.vstack([self.check.points, cp])
        nrm = np.vstack([self.check.normals, cn])
        b_src, b = self._rhs(pts, nrm, sources, images)
        a_check = np.vstack([self._a_check, g0_normal_derivative_matrix(self.k, cp, cn, self.charges)])
        rel_check = np.linalg.norm(a_check @ c + multipoles(pts, nrm) @ m + b) / np.linalg.norm(b_src)
        return c, images, m, rel, rel_check

    def charge_strengths(self, sources):
        c, _, _, rel, rel_check = self._solution(sources)
        return c, rel, rel_check

    def field(self, sources, points):
        c, images, multi, rel, rel_check = self._solution(sources)
        p = g0_matrix(self.k, points, sources.positions) @ sources.amplitudes
        p = p + g0_matrix(self.k, points, self.charges) @ c
        if len(images):
            p = p + g0_matrix(self.k, points, images.positions) @ images.amplitudes
            m = 2 * IMAGE_ORDER + 1
            for i, q in enumerate(images.positions):
                p = p + multipole_matrix(self.k, points, IMAGE_ORDER, q) @ multi[i * m : (i + 1) * m]
        return p, rel, rel_check


@lru_cache(maxsize=16)
def mfs_solver(room, k, cfg=None):
    return MfsSolver(room, k, cfg)


def mfs_forward(room, k, sources, eval_points, cfg=None):
    """Pressure at ``eval_points`` radiated by ``sources`` in the rigid-walled room.

    Returns ``(pressure, boundary_residual)`` where the residual is
    ``||dp/dn|| / ||dp_source/dn||`` measured on a fresh boundary set twice
    as dense as the collocation set.  Residuals above 1e-3 are logged; the
    field is still returned (near-eigenfrequency solves are legitimate).
    """
    solver = mfs_solver(room, float(k), cfg)
    pressure, rel, rel_check = solver.field(sources, eval_points)
    if rel_check > RESIDUAL_FLAG:
        logger.info("MFS residual %.2e at k=%.4f (flagged)", rel_check, k)
    if rel_check > 5 * rel and rel_check > 1e-10:
        logger.info("MFS residual grows off the collocation set: %.2e -> %.2e", rel, rel_check)
    return pressure, rel_check


# ---------------------------------------------------------------------------
# Known-room dictionary
# ---------------------------------------------------------------------------


def default_vekua_order(room, k, margin=15):
    return int(math.ceil(k * max_radius(room))) + margin


class KnownRoomModel:
    """Room Green functions for a fixed grid of candidate sources at one wavenumber.

    For each grid point z the reflected field is expanded on Fourier-Bessel
    functions about the room centroid; the coefficients solve, in the least
    squares sense, dG_h/dn = -dG0(z, .)/dn on boundary collocation points.
    One truncated SVD of the boundary matrix serves every grid point.  Grid
    points within ``image_range`` of a wall carry their mirror image in the
    explicit part, so the expansion only fits a smooth remainder.
    """

    def __init__(self, room, k, grid, order=None, n_colloc=None, cutoff=1e-12, image_range=0.08):
        self.room = room
        self.k = float(k)
        self.grid = np.asarray(grid, dtype=float)
        self.order = default_vekua_order(room, k) if order is None else int(order)
        self.origin = room.centroid
        n_fb = 2 * self.order + 1
        n_colloc = max(4 * n_fb, 256) if n_colloc is None else n_colloc
        bc = boundary_discretize(room, n_colloc, by_arclength=True)
        a = fb_normal_derivative_matrix(self.k, bc.points, bc.normals, self.order, self.origin)
        scale = np.linalg.norm(a, axis=0)
        solve = _TruncatedSolve(a / scale, cutoff)
        self.images, _, _, self.imaged = wall_images(room, self.grid, image_range)
        rhs = -g0_normal_derivative_matrix(self.k, bc.points, bc.normals, self.grid)
        if len(self.imaged):
            rhs[:, self.imaged] -= g0_normal_derivative_matrix(self.k, bc.points, bc.normals, self.images)
        self.coefs = solve(rhs) / scale[:, None]
        fit = a @ self.coefs - rhs
        self.residuals = np.linalg.norm(fit, axis=0) / np.linalg.norm(rhs, axis=0)
        self.flags = self.residuals > COLUMN_FLAG

    def columns(self, mics):
        """Green-function samples at ``mics`` for every grid point (mics x grid)."""
        direct = g0_matrix(self.k, mics, self.grid)
        if len(self.imaged):
            direct[:, self.imaged] += g0_matrix(self.k, mics, self.images)
        return direct + fb_matrix(self.k, mics, self.order, self.origin) @ self.coefs

    def dictionary(self, mics):
        return Dictionary(self.columns(mics), self.k, "grid", self.grid, self.flags)


@lru_cache(maxsize=64)
def _known_room_model_cached(room, k, grid_key, order):
    grid = np.frombuffer(grid_key, dtype=float).reshape(-1, 2)
    return KnownRoomModel(room, k, grid, order)


def known_room_model(room, k, grid, order=None):
    grid = np.ascontiguousarray(grid, dtype=float)
    return _known_room_model_cached(room, float(k), grid.tobytes(), order)


def known_room_dictionary(room, k, mics, grid, vekua_order=None):
    """Dictionary of in-room Green functions sampled at ``mics`` (one column per grid point)."""
    return known_room_model(room, k, grid, vekua_order).dictionary(mics)


# ---------------------------------------------------------------------------
# Unknown-room dictionaries
# ---------------------------------------------------------------------------


def build_unknown_dictionaries(k, mics, grid, origin, n_fb=None, n_pw=None, grid_spacing=None):
    """Source dictionary S (Y0 atoms) and homogeneous-field dictionary W.

    W holds ``n_fb`` Fourier-Bessel functions about ``origin`` (orders
    -L..L, ``n_fb = 2L + 1``) or ``n_pw`` plane waves.
    """
    mics = np.atleast_2d(np.asarray(mics, dtype=float))
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    _, r = _pairwise(mics, grid)
    min_gap = 0.0 if grid_spacing is None else 0.5 * grid_spacing
    if np.any(r <= min_gap) or np.any(r == 0.0):
        raise ValueError("a microphone sits on a candidate source grid point")
    s = Dictionary(hankel1_01_fast(k * r)[0].imag, k, "grid", grid)
    if (n_fb is None) == (n_pw is None):
        raise ValueError("give exactly one of n_fb or n_pw")
    if n_fb is not None:
        if n_fb < 1 or n_fb % 2 == 0:
            raise ValueError("n_fb must be odd (orders -L..L)")
        order = (n_fb - 1) // 2
        w = Dictionary(fb_matrix(k, mics, order, origin), k, "fb", fb_orders(order))
    else:
        w = Dictionary(plane_wave_matrix(k, mics, n_pw, origin), k, "pw", plane_wave_directions(n_pw))
    return s, w


# ---------------------------------------------------------------------------
# Eigenfrequencies
# ---------------------------------------------------------------------------


def rect_eigenfrequencies(lx, ly, k_max):
    """Neumann eigenfrequencies pi*sqrt((n/lx)^2 + (m/ly)^2) <= k_max, with multiplicity."""
    if not k_max > 0:
        raise ValueError("k_max must be positive")
    n_max = int(k_max * lx / np.pi) + 1
    m_max = int(k_max * ly / np.pi) + 1
    n, m = np.meshgrid(np.arange(n_max + 1), np.arange(m_max + 1), indexing="ij")
    k = np.pi * np.sqrt((n / lx) ** 2 + (m / ly) ** 2)
    k = k[(k > 0) & (k <= k_max)]
    return np.sort(k)


class _SubspaceAngle:
    """Smallest singular value of the wall normal-derivative block of an
    interior-orthonormalized Fourier-Bessel basis (zero at eigenfrequencies)."""

    def __init__(self, room, n_boundary, interior, order_margin):
        self.room = room
        self.bc = boundary_discretize(room, n_boundary, by_arclength=True)
        self.interior = interior
        self.order_margin = order_margin
        self.radius = max_radius(room)

    def __call__(self, k):
        order = int(math.ceil(k * self.radius)) + self.order_margin
        origin = self.room.centroid
        a_b = fb_normal_derivative_matrix(k, self.bc.points, self.bc.normals, order, origin) / k
        a_i = fb_matrix(k, self.interior, order, origin)
        u, s, _ = np.linalg.svd(np.vstack([a_b, a_i]), full_matrices=False)
        q_b = u[: len(a_b), s > 1e-12 * s[0]]
        return float(np.linalg.svd(q_b, compute_uv=False)[-1])


def estimate_eigenfrequencies(room, k_interval, step=0.01, vekua_order=None, prominence=0.1, tol=1e-8):
    """Neumann eigenfrequencies of ``room`` inside ``k_interval``.

    Sweeps the subspace-angle function with the given ``step``, keeps the
    interior local minima that dip below ``prominence`` times the larger
    neighbouring sweep value, and refines each by golden-section search.
    ``vekua_order`` is the order margin added to ceil(k * R_max).
    """
    kmin, kmax = map(float, k_interval)
    if not (0 < kmin <= kmax):
        raise ValueError("need 0 < kmin <= kmax")
    margin = 10 if vekua_order is None else int(vekua_order)
    return _estimate_cached(room, kmin, kmax, float(step), margin, float(prominence), float(tol))


@lru_cache(maxsize=32)
def _estimate_cached(room, kmin, kmax, step, margin, prominence, tol):
    n_steps = int(math.ceil((kmax - kmin) / step))
    if n_steps < 2:
        return np.array([])
    ks = np.linspace(kmin, kmax, n_steps + 1)
    perim = _approx_perimeter(room)
    n_boundary = max(200, int(6 * kmax * perim / (2 * np.pi)) * 2)
    interior = grid_points(room, np.sqrt(_approx_area(room) / 150.0), room=room)
    f = _SubspaceAngle(room, n_boundary, interior, margin)
    vals = np.array([f(k) for k in ks])
    found = []
    for i in range(1, len(ks) - 1):
        if not (vals[i] <= vals[i - 1] and vals[i] < vals[i + 1]):
            continue
        res = minimize_scalar(f, bracket=(ks[i - 1], ks[i], ks[i + 1]), method="golden", tol=tol)
        k_star = float(res.x)
        if not (ks[i - 1] <= k_star <= ks[i + 1]):
            k_star = float(ks[i])
        depth = f(k_star)
        if depth < prominence * max(vals[i - 1], vals[i + 1]) and kmin <= k_star <= kmax:
            found.append(k_star)
    found = np.unique(np.round(found, 10))
    return found


def _approx_perimeter(room):
    from .geometry import perimeter

    return perimeter(room)


def _approx_area(room):
    if isinstance(room, Rectangle):
        return room.lx * room.ly
    t = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
    p = room.curve(t)
    dp = room.curve_derivative(t)
    return float(np.mean(p[:, 0] * dp[:, 1] - p[:, 1] * dp[:, 0]) * np.pi)


def frequency_selection(strategy, eigs, count, interval, rng=None):
    """Wavenumbers for a known-room experiment.

    ``random``: i.i.d. uniform in ``interval``; ``modal``: the first
    ``count`` eigenfrequencies in ``interval``; ``midpoints``: means of
    successive eigenfrequencies in ``interval``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = interval
    if strategy == "random":
        if rng is None:
            raise ValueError("random strategy needs a generator")
        return lo + (hi - lo) * rng.random(count)
    eigs = np.sort(np.asarray(eigs, dtype=float))
    eigs = eigs[(eigs >= lo) & (eigs <= hi)]
    if strategy == "modal":
        if len(eigs) < count:
            raise ValueError(f"only {len(eigs)} eigenfrequencies in {interval}, need {count}")
        return eigs[:count].copy()
    if strategy == "midpoints":
        if len(eigs) < count + 1:
            raise ValueError(f"only {len(eigs)} eigenfrequencies in {interval}, need {count + 1}")
        return 0.5 * (eigs[:count] + eigs[1 : count + 1])
    raise ValueError(f"unknown frequency strategy {strategy!r}")
