"""Cylindrical Bessel functions of integer order and real argument.

J_l is evaluated for all orders 0..lmax at once by Miller's backward
recurrence, normalized with J_0 + 2 * sum_k J_2k = 1.  Y_0 and Y_1 come from
the ascending series (x <= 12) or the Hankel asymptotic expansion (x > 12);
higher orders of Y use the forward recurrence, which is stable for Y.

All functions accept scalars or arrays and broadcast like numpy ufuncs.
"""

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
MAX_ORDER = 200
SERIES_CROSSOVER = 12.0

_RESCALE_LIMIT = 1e200
_RESCALE_FACTOR = 1e-200
# below this argument two series terms of J_l are exact to double precision
_TINY_X = 1e-3


def _as_finite_array(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("Bessel argument must be finite")
    return x


def _check_order(lmax):
    if abs(lmax) > MAX_ORDER:
        raise ValueError(f"|order| > {MAX_ORDER} not supported (got {lmax})")


def _miller_start(lmax, xmax):
    m = max(lmax, xmax)
    n = int(math.ceil(m + 25.0 + 3.0 * math.sqrt(lmax + xmax)))
    return n + (n % 2)


def bessel_j_orders(lmax, x):
    """J_0(x) .. J_lmax(x) for x >= 0.

    Returns an array of shape ``(lmax + 1,) + np.shape(x)``.
    """
    lmax = int(lmax)
    if lmax < 0:
        raise ValueError("lmax must be nonnegative")
    _check_order(lmax)
    x = _as_finite_array(x)
    if np.any(x < 0):
        raise ValueError("bessel_j needs x >= 0")
    shape = x.shape
    xf = x.ravel()
    out = np.zeros((lmax + 1, xf.size))
    out[0, xf == 0.0] = 1.0

    tiny = (xf > 0.0) & (xf < _TINY_X)
    if np.any(tiny):
        half = 0.5 * xf[tiny]
        lead = np.ones_like(half)
        with np.errstate(under="ignore"):
            for l in range(lmax + 1):
                out[l, tiny] = lead * (1.0 - half * half / (l + 1))
                lead = lead * half / (l + 1)

    pos = xf >= _TINY_X
    if np.any(pos):
        xp = xf[pos]
        vals = np.zeros((lmax + 1, xp.size))
        n_start = _miller_start(lmax, float(xp.max()))
        two_over_x = 2.0 / xp
        f_next = np.zeros_like(xp)
        f_cur = np.full_like(xp, 1e-30)
        norm = np.zeros_like(xp)
        for n in range(n_start, 0, -1):
            # f_cur holds the unnormalized J_n; step down to J_{n-1}
            if n <= lmax:
                vals[n] = f_cur
            if n % 2 == 0:
                norm += 2.0 * f_cur
            f_prev = n * two_over_x * f_cur - f_next
            f_next, f_cur = f_cur, f_prev
            big = np.abs(f_cur) > _RESCALE_LIMIT
            if np.any(big):
                f_cur[big] *= _RESCALE_FACTOR
                f_next[big] *= _RESCALE_FACTOR
                norm[big] *= _RESCALE_FACTOR
                vals[:, big] *= _RESCALE_FACTOR
        vals[0] = f_cur
        norm += f_cur
        vals /= norm
        out[:, pos] = vals
    return out.reshape((lmax + 1,) + shape)


def bessel_j(l, x):
    """J_l(x) for integer ``l`` and x >= 0.

    Absolute accuracy is about 1e-13 for x <= 60.  Negative orders use
    J_{-l} = (-1)^l J_l.
    """
    l = int(l)
    _check_order(l)
    vals = bessel_j_orders(abs(l), x)[abs(l)]
    if l < 0 and l % 2:
        vals = -vals
    return vals if np.ndim(vals) else float(vals)


def _series_j01_y01(x):
    """J_0, J_1, Y_0, Y_1 from the ascending series (moderate x)."""
    q = 0.25 * x * x
    half = 0.5 * x
    # term_k = (-q)^k / (k!)^2 for J_0; J_1 term is half * (-q)^k / (k!(k+1)!)
    j0 = np.zeros_like(x)
    j1 = np.zeros_like(x)
    s0 = np.zeros_like(x)
    s1 = np.zeros_like(x)
    t0 = np.ones_like(x)
    t1 = half.copy()
    harmonic = 0.0
    for k in range(0, 80):
        h_next = harmonic + 1.0 / (k + 1)
        j0 += t0
        j1 += t1
        s0 += harmonic * t0
        # psi(k+1) + psi(k+2) = H_k + H_{k+1} - 2 gamma; the gamma part is
        # folded into the log factor below
        s1 += (harmonic + h_next) * t1
        if k > 2 and np.all(np.abs(t0) * (1.0 + h_next) < 1e-18 * np.maximum(1.0, np.abs(j0))):
            break
        t0 = -t0 * q / ((k + 1) * (k + 1))
        t1 = -t1 * q / ((k + 1) * (k + 2))
        harmonic = h_next
    log_term = np.log(half) + EULER_GAMMA
    y0 = (2.0 / np.pi) * (log_term * j0 - s0)
    y1 = (2.0 / np.pi) * log_term * j1 - 2.0 / (np.pi * x) - s1 / np.pi
    return j0, j1, y0, y1


def _asymptotic_pq(nu, x):
    mu = 4.0 * nu * nu
    inv8x = 1.0 / (8.0 * x)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    prev = np.full_like(x, np.inf)
    for k in range(1, 120):
        term = term * (mu - (2 * k - 1) ** 2) * inv8x / k
        mag = np.abs(term)
        # stop each element at its smallest term (asymptotic series)
        active &= (mag < prev) & (mag > 1e-17)
        if not np.any(active):
            break
        contrib = np.where(active, term, 0.0)
        if k % 2:
            q += contrib * (1.0 if (k // 2) % 2 == 0 else -1.0)
        else:
            p += contrib * (1.0 if (k // 2) % 2 == 0 else -1.0)
        prev = mag
    return p, q


def _asymptotic_y01(x):
    amp = np.sqrt(2.0 / (np.pi * x))
    p0, q0 = _asymptotic_pq(0.0, x)
    p1, q1 = _asymptotic_pq(1.0, x)
    chi0 = x - 0.25 * np.pi
    chi1 = x - 0.75 * np.pi
    y0 = amp * (p0 * np.sin(chi0) + q0 * np.cos(chi0))
    y1 = amp * (p1 * np.sin(chi1) + q1 * np.cos(chi1))
    return y0, y1


def _y01(x):
    y0 = np.empty_like(x)
    y1 = np.empty_like(x)
    small = x <= SERIES_CROSSOVER
    if np.any(small):
        _, _, y0[small], y1[small] = _series_j01_y01(x[small])
    if np.any(~small):
        y0[~small], y1[~small] = _asymptotic_y01(x[~small])
    return y0, y1


def bessel_y_orders(lmax, x):
    """Y_0(x) .. Y_lmax(x) for x > 0, shape ``(lmax + 1,) + np.shape(x)``."""
    lmax = int(lmax)
    if lmax < 0:
        raise ValueError("lmax must be nonnegative")
    _check_order(lmax)
    x = _as_finite_array(x)
    if np.any(x <= 0):
        raise ValueError("bessel_y needs x > 0 (logarithmic singularity at 0)")
    shape = x.shape
    xf = x.ravel()
    out = np.empty((lmax + 1, xf.size))
    with np.errstate(all="ignore"):
        y0, y1 = _y01(xf)
    out[0] = y0
    if lmax >= 1:
        out[1] = y1
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, lmax):
            out[n + 1] = (2.0 * n / xf) * out[n] - out[n - 1]
    # past overflow every Y_n (n >= 1) is hugely negative
    out[~np.isfinite(out)] = -np.inf
    return out.reshape((lmax + 1,) + shape)


def bessel_y(l, x):
    """Y_l(x) for integer ``l`` and x > 0 (Y_{-l} = (-1)^l Y_l)."""
    l = int(l)
    _check_order(l)
    vals = bessel_y_orders(abs(l), x)[abs(l)]
    if l < 0 and l % 2:
        vals = -vals
    return vals if np.ndim(vals) else float(vals)


def hankel1(l, x):
    """Hankel function of the first kind, J_l(x) + i Y_l(x), for x > 0."""
    x = _as_finite_array(x)
    if np.any(x <= 0):
        raise ValueError("hankel1 needs x > 0 (logarithmic singularity at 0)")
    val = np.asarray(bessel_j(l, x)) + 1j * np.asarray(bessel_y(l, x))
    return val if np.ndim(val) else complex(val)


def hankel1_01(x):
    """H_0 and H_1 of the first kind, evaluated together (x > 0)."""
    x = _as_finite_array(x)
    if np.any(x <= 0):
        raise ValueError("hankel1 needs x > 0 (logarithmic singularity at 0)")
    j = bessel_j_orders(1, x)
    y = bessel_y_orders(1, x)
    return j[0] + 1j * y[0], j[1] + 1j * y[1]


class HankelTable:
    """H_0 and H_1 by cubic Hermite interpolation on a uniform grid.

    Exact derivatives (H_0' = -H_1, H_1' = H_0 - H_1/x) make the interpolant
    accurate to about 1e-12 for x >= ``x_lo`` with the default step.  Below
    ``x_lo`` the direct evaluation is used.
    """

    def __init__(self, x_hi, step=2e-3, x_lo=1.0):
        self.x_lo = float(x_lo)
        self.step = float(step)
        n = int(math.ceil((x_hi - x_lo) / step)) + 2
        self.x_hi = self.x_lo + (n - 1) * self.step
        nodes = self.x_lo + self.step * np.arange(n)
        self.h0, self.h1 = hankel1_01(nodes)
        self.d0 = -self.h1
        self.d1 = self.h0 - self.h1 / nodes

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = (x - self.x_lo) / self.step
        i = np.minimum(u.astype(np.intp), len(self.h0) - 2)
        t = u - i
        t2 = t * t
        t3 = t2 * t
        a0 = 2 * t3 - 3 * t2 + 1
        b0 = (t3 - 2 * t2 + t) * self.step
        a1 = -2 * t3 + 3 * t2
        b1 = (t3 - t2) * self.step
        h0 = a0 * self.h0[i] + b0 * self.d0[i] + a1 * self.h0[i + 1] + b1 * self.d0[i + 1]
        h1 = a0 * self.h1[i] + b0 * self.d1[i] + a1 * self.h1[i + 1] + b1 * self.d1[i + 1]
        return h0, h1


_table = None


def hankel1_01_fast(x):
    """Same values as :func:`hankel1_01` (to ~1e-12), much faster on large arrays."""
    global _table
    x = _as_finite_array(x)
    if np.any(x <= 0):
        raise ValueError("hankel1 needs x > 0 (logarithmic singularity at 0)")
    table = _table
    xmax = float(x.max()) if x.size else 0.0
    if table is None or xmax > table.x_hi:
        table = HankelTable(max(64.0, 2.0 * xmax))
        _table = table
    h0 = np.empty(x.shape, dtype=complex)
    h1 = np.empty(x.shape, dtype=complex)
    near = x < table.x_lo
    far = ~near
    h0[far], h1[far] = table(x[far])
    if np.any(near):
        h0[near], h1[near] = hankel1_01(x[near])
    return h0, h1
