"""Sparse recovery of source positions.

* :func:`projected_omp` -- greedy localization with a nuisance subspace W
  projected out before every correlation step;
* :func:`multifreq_omp` -- the same greedy scheme with correlations
  aggregated over several wavenumbers sharing one source grid;
* :func:`group_basis_pursuit` -- min ||alpha||_1 + ||beta||_2 subject to
  ||p - S alpha - W beta|| <= eps, solved through its small dual by a
  log-barrier interior-point method.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

PINV_CUTOFF = 1e-10
T_MAX = 1e13  # barrier parameter cap; beyond it the primal read-off is noise


class InfeasibleError(ValueError):
    """The residual bound is below the distance from p to the model space."""


def _orthonormal_basis(mat, cutoff=PINV_CUTOFF):
    if mat is None or mat.shape[1] == 0:
        return np.zeros((0 if mat is None else mat.shape[0], 0), dtype=complex), False
    # equilibrate columns so the rank decision does not depend on their scale
    norms = np.linalg.norm(mat, axis=0)
    mat = mat[:, norms > 0] / norms[norms > 0]
    if mat.shape[1] == 0:
        return np.zeros((mat.shape[0], 0), dtype=complex), True
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((mat.shape[0], 0), dtype=complex), True
    keep = s > cutoff * s[0]
    return u[:, keep], bool(np.sum(keep) < mat.shape[1])


class Projector:
    """p -> p - W W^+ p, with W^+ the rank-truncated pseudo-inverse."""

    def __init__(self, w, cutoff=PINV_CUTOFF):
        w = np.asarray(w)
        self.basis, self.rank_deficient = _orthonormal_basis(w, cutoff)
        self.n_rows = w.shape[0]

    @property
    def rank(self):
        return self.basis.shape[1]

    def __call__(self, p):
        q = self.basis
        if q.shape[1] == 0:
            return np.array(p, dtype=complex)
        return p - q @ (q.conj().T @ p)


def orth_projector(w, cutoff=PINV_CUTOFF):
    if hasattr(w, "matrix"):
        w = w.matrix
    return Projector(w, cutoff)


@dataclass
class LocalizationResult:
    indices: list
    positions: np.ndarray
    amplitudes: np.ndarray  # (n_freqs, n_selected)
    residual_history: list
    flags: list = field(default_factory=list)


def _as_matrix(d):
    return d.matrix if hasattr(d, "matrix") else np.asarray(d)


def _positions(dictionary, indices):
    meta = getattr(dictionary, "meta", None)
    if meta is None:
        return np.zeros((len(indices), 2))
    return np.asarray(meta)[indices].reshape(len(indices), -1)


def projected_omp(p, s, w, n_sources):
    """Greedy source localization with the homogeneous field projected out.

    Each step correlates the projected measurements with unit-normalized
    projected source atoms, appends the best atom to W and re-projects.
    Ties go to the lowest column index.
    """
    p = np.asarray(p, dtype=complex)
    if n_sources < 0:
        raise ValueError("n_sources must be nonnegative")
    n_w = 0 if w is None else _as_matrix(w).shape[1]
    if n_w + n_sources > len(p):
        logger.debug("more unknowns (%d) than measurements (%d)", n_w + n_sources, len(p))
    return multifreq_omp([p], [s], n_sources, [w])


def _joint_amplitudes(p, w_mat, sel):
    if sel.shape[1] == 0:
        return np.zeros(0, dtype=complex)
    full = np.column_stack([w_mat, sel])
    coef, *_ = np.linalg.lstsq(full, p, rcond=PINV_CUTOFF)
    return coef[w_mat.shape[1] :]


def multifreq_omp(p_list, d_list, n_sources, w_list=None):
    """Joint greedy localization over several wavenumbers sharing one grid.

    The score of grid point z is sum_f |<d_f(z), r_f>|^2 / (||d_f(z)||^2 ||p_f||^2)
    with atoms and residuals projected, per frequency, orthogonally to W_f
    and the atoms already selected.  Dividing by ||p_f|| gives every
    frequency the same weight, so frequencies close to a resonance (large
    fields) do not drown the others.
    """
    n_f = len(p_list)
    if len(d_list) != n_f:
        raise ValueError("one dictionary per measurement vector")
    mats = [_as_matrix(d) for d in d_list]
    n_grid = mats[0].shape[1]
    if any(m.shape[1] != n_grid for m in mats):
        raise ValueError("dictionaries must share the source grid")
    p_list = [np.asarray(p, dtype=complex) for p in p_list]
    w_mats = [None] * n_f if w_list is None else [None if w is None else _as_matrix(w) for w in w_list]

    flags = []
    bases = []
    for p, w in zip(p_list, w_mats):
        q, deficient = _orthonormal_basis(w if w is not None else np.zeros((len(p), 0)))
        if deficient:
            flags.append("W rank deficient")
        bases.append(q)

    def residuals():
        return [p - q @ (q.conj().T @ p) for p, q in zip(p_list, bases)]

    res = residuals()
    history = [float(np.sqrt(sum(np.linalg.norm(r) ** 2 for r in res)))]
    weights = [1.0 / max(np.linalg.norm(p) ** 2, 1e-300) for p in p_list]
    selected = []
    for _ in range(n_sources):
        score = np.zeros(n_grid)
        for m, q, r, wt in zip(mats, bases, res, weights):
            atoms = m - q @ (q.conj().T @ m)
            norms2 = np.sum(np.abs(atoms) ** 2, axis=0)
            corr2 = wt * np.abs(atoms.conj().T @ r) ** 2
            score += np.divide(corr2, norms2, out=np.zeros_like(corr2), where=norms2 > 1e-28 * max(norms2.max(), 1e-300))
        j = int(np.argmax(score))
        selected.append(j)
        new_bases = []
        for m, q in zip(mats, bases):
            # Gram-Schmidt with one reorthogonalization pass
            v = m[:, j].astype(complex)
            for _ in range(2):
                v = v - q @ (q.conj().T @ v)
            nv = np.linalg.norm(v)
            if nv > PINV_CUTOFF * np.linalg.norm(m[:, j]):
                q = np.column_stack([q, v / nv])
            else:
                flags.append(f"atom {j} nearly inside the projected-out span")
            new_bases.append(q)
        bases = new_bases
        res = residuals()
        total = float(np.sqrt(sum(np.linalg.norm(r) ** 2 for r in res)))
        if total > history[-1] * (1 + 1e-8) + 1e-12 * history[0]:
            raise RuntimeError(f"residual increased from {history[-1]:.3e} to {total:.3e}")
        history.append(total)
    amps = np.zeros((n_f, len(selected)), dtype=complex)
    for f, (p, m, w) in enumerate(zip(p_list, mats, w_mats)):
        w_mat = np.zeros((len(p), 0)) if w is None else w
        amps[f] = _joint_amplitudes(p, w_mat, m[:, selected])
    return LocalizationResult(
        indices=selected,
        positions=_positions(d_list[0], selected),
        amplitudes=amps,
        residual_history=history,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# Group basis pursuit
# ---------------------------------------------------------------------------


@dataclass
class BpSolution:
    alpha: np.ndarray
    beta: np.ndarray
    objective: float
    residual_norm: float
    duality_gap: float
    iterations: int


def _gauge(x, n_alpha):
    return float(np.sum(np.abs(x[:n_alpha])) + np.linalg.norm(x[n_alpha:]))


def _real_maps(mat):
    """Real matrices giving Re and Im of ``mat^H y`` from ``[Re y, Im y]``."""
    return (
        np.hstack([mat.real.T, mat.imag.T]),
        np.hstack([-mat.imag.T, mat.real.T]),
    )


class _DualBarrier:
    """Log-barrier for the dual of the group basis pursuit program.

    Dual: max Re<y, p> - eps * u over (y, u) with |<s_j, y>| <= 1 for every
    source atom, ||W^H y|| <= 1 and ||y|| <= u.  Each constraint is a
    second-order cone; on the central path the cone multipliers are the
    primal variables, which are strictly feasible by construction.
    """

    def __init__(self, s_mat, w_mat, p, eps):
        self.m = len(p)
        self.sr, self.si = _real_maps(s_mat)
        self.wr, self.wi = _real_maps(w_mat)
        self.has_w = w_mat.shape[1] > 0
        self.pr = np.concatenate([p.real, p.imag])
        self.eps = eps
        self.use_u = eps > 0

    def start(self):
        z = np.zeros(2 * self.m + (1 if self.use_u else 0))
        if self.use_u:
            z[-1] = 1.0
        return z

    def _parts(self, z):
        y = z[: 2 * self.m]
        cr, ci = self.sr @ y, self.si @ y
        f = 1.0 - cr * cr - ci * ci
        if self.has_w:
            vr, vi = self.wr @ y, self.wi @ y
            fw = 1.0 - np.sum(vr * vr + vi * vi)
        else:
            vr = vi = np.zeros(0)
            fw = 1.0
        g = z[-1] ** 2 - y @ y if self.use_u else 1.0
        return y, cr, ci, f, vr, vi, fw, g

    def value(self, z, t):
        y, _, _, f, _, _, fw, g = self._parts(z)
        if np.any(f <= 0) or fw <= 0 or g <= 0 or (self.use_u and z[-1] <= 0):
            return np.inf
        obj = -self.pr @ y + (self.eps * z[-1] if self.use_u else 0.0)
        return t * obj - np.sum(np.log(f)) - np.log(fw) - (np.log(g) if self.use_u else 0.0)

    def newton_step(self, z, t):
        y, cr, ci, f, vr, vi, fw, g = self._parts(z)
        n = len(z)
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        gs = self.sr * cr[:, None] + self.si * ci[:, None]
        grad[: 2 * self.m] = -t * self.pr + gs.T @ (2.0 / f)
        d = 2.0 / f
        hy = (self.sr.T * d) @ self.sr + (self.si.T * d) @ self.si + (gs.T * (4.0 / f**2)) @ gs
        if self.has_w:
            gw = self.wr.T @ vr + self.wi.T @ vi
            grad[: 2 * self.m] += 2.0 * gw / fw
            hy += 2.0 * (self.wr.T @ self.wr + self.wi.T @ self.wi) / fw + 4.0 * np.outer(gw, gw) / fw**2
        hess[: 2 * self.m, : 2 * self.m] = hy
        if self.use_u:
            u = z[-1]
            dg = np.concatenate([-2.0 * y, [2.0 * u]])
            grad[: 2 * self.m] += 2.0 * y / g
            grad[-1] = t * self.eps - 2.0 * u / g
            hess += np.outer(dg, dg) / g**2
            diag = np.full(n, 2.0 / g)
            diag[-1] = -2.0 / g
            hess += np.diag(diag)
        hess += 1e-14 * np.trace(hess) / n * np.eye(n)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        return step, grad

    def primal(self, z, t):
        """Primal point (alpha, beta) and dual objective attached to ``z``."""
        y, cr, ci, f, vr, vi, fw, _ = self._parts(z)
        alpha = 2.0 * (cr + 1j * ci) / (t * f)
        beta = 2.0 * (vr + 1j * vi) / (t * fw)
        dual = self.pr @ y - (self.eps * z[-1] if self.use_u else 0.0)
        return alpha, beta, float(dual)


def _pull_inside(a, p, x, eps, x_ls, r_ls):
    """Move ``x`` into the residual ball with the smallest correction.

    Centering is inexact, so the read-off primal point may sit slightly
    outside; fall back to a blend with the least-squares point.
    """
    r = p - a @ x
    rn = float(np.linalg.norm(r))
    if rn > eps:
        target = r * (eps * (1 - 1e-6) / rn)
        x = x + np.linalg.lstsq(a, r - target, rcond=None)[0]
        r = p - a @ x
        rn = float(np.linalg.norm(r))
    if rn > eps:
        d = r_ls - r
        qa = np.vdot(d, d).real
        qb = 2 * np.vdot(r, d).real
        qc = rn * rn - eps * eps
        disc = max(qb * qb - 4 * qa * qc, 0.0)
        step = (-qb - np.sqrt(disc)) / (2 * qa) if qa > 0 else 1.0
        step = min(max(step + 1e-9, 0.0), 1.0)
        x = (1 - step) * x + step * x_ls
        r = p - a @ x
        if np.linalg.norm(r) > eps * (1 + 1e-9):
            x, r = x_ls, r_ls
    return x, r


def group_basis_pursuit(p, s, w, eps, tol=1e-4, max_newton=1000):
    """Solve min ||alpha||_1 + ||beta||_2 s.t. ||p - S alpha - W beta|| <= eps.

    S and W are expected to have unit-norm columns.  The program is solved
    through its dual by a log-barrier (interior point) method.  The primal
    point is read off the central path and pulled inside the residual ball;
    ``duality_gap`` is the certified relative gap between primal and dual
    objectives.
    """
    s_mat = _as_matrix(s).astype(complex)
    w_mat = np.zeros((s_mat.shape[0], 0), dtype=complex) if w is None else _as_matrix(w).astype(complex)
    p = np.asarray(p, dtype=complex)
    n_alpha = s_mat.shape[1]
    a = np.column_stack([s_mat, w_mat])
    if eps < 0:
        raise ValueError("eps must be nonnegative")

    x_ls, *_ = np.linalg.lstsq(a, p, rcond=None)
    r_ls = p - a @ x_ls
    floor = float(np.linalg.norm(r_ls))
    if floor > eps * (1 + 1e-9):
        raise InfeasibleError(f"eps={eps:.3e} below the distance {floor:.3e} from p to the model space")

    p_norm = float(np.linalg.norm(p))
    if p_norm <= eps:
        zero = np.zeros(a.shape[1], dtype=complex)
        return BpSolution(zero[:n_alpha], zero[n_alpha:], 0.0, p_norm, 0.0, 0)

    # work with unit-norm data; the program is positively homogeneous
    barrier = _DualBarrier(s_mat, w_mat, p / p_norm, eps / p_norm)
    z = barrier.start()
    t = 1.0
    iters = 0
    best = None
    stalled = False
    while iters < max_newton and not stalled and t <= T_MAX:
        # centering by damped Newton; the decrement floor follows the
        # rounding level of the barrier value, which grows with t
        while iters < max_newton:
            step, grad = barrier.newton_step(z, t)
            dec = -grad @ step
            iters += 1
            if dec < 1e-10 * max(1.0, t * 1e-6):
                break
            val = barrier.value(z, t)
            h = 1.0
            while barrier.value(z + h * step, t) > val - 0.25 * h * dec:
                h *= 0.5
                if h < 1e-10:
                    stalled = True
                    break
            if stalled:
                break
            z = z + h * step
        alpha, beta, dual = barrier.primal(z, t)
        x, r = _pull_inside(a, p, np.concatenate([alpha, beta]) * p_norm, eps, x_ls, r_ls)
        obj = _gauge(x, n_alpha)
        gap = (obj - dual * p_norm) / max(obj, 1e-300)
        # reading the primal off the central path loses digits as t grows,
        # so keep the iterate with the best certified gap
        if best is None or gap < best[2]:
            best = (x, r, gap)
        if gap <= tol:
            break
        t *= 10.0

    x, r, gap = best
    if gap > tol:
        logger.warning("group basis pursuit stopped with relative duality gap %.2e", gap)
    return BpSolution(
        alpha=x[:n_alpha], beta=x[n_alpha:], objective=_gauge(x, n_alpha),
        residual_norm=float(np.linalg.norm(r)), duality_gap=float(gap), iterations=iters,
    )


# ---------------------------------------------------------------------------
# Post-processing
# ---------------------------------------------------------------------------


def extract_peaks(alpha, grid, threshold_frac=0.1, min_sep=0.4):
    """Grid points where |alpha| is a local maximum within ``min_sep`` and
    exceeds ``threshold_frac`` of the global maximum, strongest first."""
    if not 0 < threshold_frac < 1:
        raise ValueError("threshold_frac must lie in (0, 1)")
    mags = np.abs(np.asarray(alpha))
    grid = np.asarray(grid, dtype=float)
    top = mags.max() if mags.size else 0.0
    if top == 0:
        return np.zeros((0, 2))
    cand = np.nonzero(mags >= threshold_frac * top)[0]
    peaks = []
    for i in cand:
        near = np.nonzero(np.linalg.norm(grid - grid[i], axis=1) <= min_sep)[0]
        near = near[near != i]
        beats = (mags[i] > mags[near]) | ((mags[i] == mags[near]) & (i < near))
        if np.all(beats):
            peaks.append(i)
    peaks = sorted(peaks, key=lambda i: (-mags[i], i))
    return grid[peaks].reshape(-1, 2)


def match_sources(truth, estimates, eps_loc=0.2):
    """Greedy one-to-one matching, closest pairs first; returns the match count."""
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    estimates = np.asarray(estimates, dtype=float).reshape(-1, 2)
    if len(truth) == 0 or len(estimates) == 0:
        return 0
    dist = np.linalg.norm(truth[:, None, :] - estimates[None, :, :], axis=-1)
    order = np.argsort(dist, axis=None, kind="stable")
    used_t, used_e = set(), set()
    for flat in order:
        i, j = divmod(int(flat), dist.shape[1])
        if dist[i, j] > eps_loc:
            break
        if i in used_t or j in used_e:
            continue
        used_t.add(i)
        used_e.add(j)
    return len(used_t)


def success_metric(truth, estimates, eps_loc=0.2):
    """Fraction of true sources matched by a distinct estimate within ``eps_loc``."""
    truth = getattr(truth, "positions", truth)
    n = len(np.asarray(truth).reshape(-1, 2))
    if n == 0:
        return 1.0
    return match_sources(truth, estimates, eps_loc) / n
