"""Monte-Carlo localization experiments.

An :class:`ExperimentConfig` describes one scenario: the room, where sources
and microphones are drawn, which wavenumbers are measured, which dictionary
and solver are used, and two sweep axes.  :func:`run_sweep` runs
``trials`` independent trials per cell of the sweep grid and averages the
success fraction.

Every random draw is derived from the master seed with a 64-bit mix of
(master, row, column, trial), so results do not depend on execution order
or on the number of worker processes.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .geometry import default_region, grid_points, reference_room, sample_interior, sample_mics
from .solvers import extract_peaks, group_basis_pursuit, multifreq_omp, success_metric
from .wavefields import (
    RESIDUAL_FLAG,
    SourceSet,
    build_unknown_dictionaries,
    default_vekua_order,
    estimate_eigenfrequencies,
    frequency_selection,
    known_room_dictionary,
    mfs_forward,
)

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
AXES = ("n_mics", "n_freqs", "n_fb", "n_sources", "k")
STRATEGIES = ("fixed", "random", "modal", "midpoints")


def splitmix64(x):
    """One round of the splitmix64 finalizer on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master, *parts):
    """Mix a master seed with integer coordinates into a 64-bit seed."""
    h = splitmix64(int(master) & MASK64)
    for part in parts:
        h = splitmix64(h ^ (int(part) & MASK64))
    return h


@dataclass(frozen=True)
class ExperimentConfig:
    """One localization scenario plus its two sweep axes.

    ``model`` is ``"known"`` (Green-function dictionary of the exact room,
    sources and mics anywhere in the room) or ``"unknown"`` (free-field Y0
    atoms plus a Fourier-Bessel or plane-wave model of the reflections,
    sources and mics in ``region``).
    """

    name: str = "experiment"
    room: object = field(default_factory=reference_room)
    region: object = field(default_factory=lambda: default_region(reference_room()))
    model: str = "unknown"
    n_sources: int = 2
    min_sep: float = 0.3
    margin: float = 0.0
    n_mics: int = 60
    sampling: str = "mixed"
    mix_ratio: float = 0.5
    snr_db: float = None
    strategy: str = "fixed"
    ks: tuple = (10.0,)
    n_freqs: int = 1
    band: tuple = (7.0, 14.0)
    eig_step: float = 0.005
    method: str = "omp"
    basis: str = "fb"
    n_fb: int = 21
    vekua_margin: int = 15
    grid_spacing: float = 0.05
    bp_eps_rel: float = 1e-6
    peak_threshold: float = 0.1
    peak_min_sep: float = 0.3
    eps_loc: float = 0.2
    x_axis: str = "n_mics"
    x_values: tuple = (60,)
    y_axis: str = "n_fb"
    y_values: tuple = (21,)
    trials: int = 20
    seed: int = 0

    def __post_init__(self):
        problems = []
        if self.model not in ("known", "unknown"):
            problems.append(f"model must be known or unknown, got {self.model!r}")
        if self.method not in ("omp", "bp"):
            problems.append(f"method must be omp or bp, got {self.method!r}")
        if self.basis not in ("fb", "pw"):
            problems.append(f"basis must be fb or pw, got {self.basis!r}")
        if self.sampling not in ("interior", "boundary", "mixed"):
            problems.append(f"unknown sampling {self.sampling!r}")
        if self.strategy not in STRATEGIES:
            problems.append(f"unknown frequency strategy {self.strategy!r}")
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if not self.eps_loc > 0:
            problems.append("eps_loc must be positive")
        if not 0 <= self.mix_ratio <= 1:
            problems.append("mix_ratio must lie in [0, 1]")
        if not 0 < self.peak_threshold < 1:
            problems.append("peak_threshold must lie in (0, 1)")
        for axis, values in ((self.x_axis, self.x_values), (self.y_axis, self.y_values)):
            if axis not in AXES:
                problems.append(f"unknown sweep axis {axis!r} (choose from {', '.join(AXES)})")
            if len(values) == 0:
                problems.append(f"axis {axis} has no values")
        if self.x_axis == self.y_axis:
            problems.append("the two sweep axes must differ")
        if self.model == "unknown" and self.region is None:
            problems.append("unknown-room scenarios need a region of interest")
        if self.model == "known" and self.method == "bp":
            problems.append("basis pursuit is only available for unknown rooms")
        if problems:
            raise ValueError("; ".join(problems))

    def cell(self, x, y):
        """Single-cell configuration with both sweep axes pinned."""
        return _pin(_pin(self, self.x_axis, x), self.y_axis, y)

    @property
    def shape(self):
        return len(self.y_values), len(self.x_values)


def _pin(cfg, axis, value):
    if axis == "k":
        return replace(cfg, ks=(float(value),), strategy="fixed")
    return replace(cfg, **{axis: int(value)})


@dataclass
class TrialRecord:
    cell: tuple
    trial: int
    seed: int
    ks: np.ndarray
    truth: SourceSet
    mics: np.ndarray
    estimates: np.ndarray
    success: float
    all_found: bool
    residuals: list
    forward_residual: float
    flagged: bool
    wall_time: float
    error: str = None


@dataclass
class SweepResult:
    """Mean success per cell; matrices have shape (len(y_values), len(x_values))."""

    x_axis: str
    x_values: tuple
    y_axis: str
    y_values: tuple
    success: np.ndarray
    all_found: np.ndarray
    counts: np.ndarray
    flagged: np.ndarray
    errors: np.ndarray
    chance: np.ndarray
    records: list = None

    def value(self, x, y):
        return float(self.success[list(self.y_values).index(y), list(self.x_values).index(x)])


# ---------------------------------------------------------------------------
# Single trial
# ---------------------------------------------------------------------------


def draw_sources(room, n, rng, region=None, min_sep=0.3, margin=0.0, max_tries=10000):
    """``n`` sources, pairwise at least ``min_sep`` apart, with unit-modulus random phases."""
    for _ in range(max_tries):
        pts = sample_interior(room, n, rng, region=region, margin=margin).points if n else np.zeros((0, 2))
        if n < 2:
            break
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        if d[np.triu_indices(n, 1)].min() >= min_sep:
            break
    else:
        raise ValueError(f"could not place {n} sources {min_sep} apart")
    amps = np.exp(2j * np.pi * rng.random(n))
    return SourceSet(pts, amps)


def scenario_grid(cfg):
    if cfg.model == "known":
        return grid_points(cfg.room, cfg.grid_spacing, room=cfg.room, margin=cfg.margin)
    return grid_points(cfg.region, cfg.grid_spacing, room=cfg.room, margin=cfg.margin)


def scenario_eigs(cfg):
    if cfg.model != "known" or cfg.strategy == "fixed":
        return None
    return estimate_eigenfrequencies(cfg.room, cfg.band, cfg.eig_step)


def trial_wavenumbers(cfg, eigs, rng):
    if cfg.strategy == "fixed":
        return np.asarray(cfg.ks, dtype=float)
    if eigs is None or len(eigs) == 0:
        raise ValueError(f"no eigenfrequencies in band {cfg.band}")
    return np.asarray(frequency_selection(cfg.strategy, eigs, cfg.n_freqs, (eigs[0], eigs[-1]), rng))


def add_noise(p, snr_db, rng):
    if snr_db is None:
        return p
    sigma = np.linalg.norm(p) / np.sqrt(len(p)) * 10 ** (-snr_db / 20)
    return p + sigma * (rng.standard_normal(len(p)) + 1j * rng.standard_normal(len(p))) / np.sqrt(2)


def localize(cfg, ks, mics, p_list, grid):
    """Run the configured solver; returns (estimates, residual history)."""
    n = cfg.n_sources
    if cfg.model == "known":
        dicts = [known_room_dictionary(cfg.room, k, mics, grid, _vekua_order(cfg, k)) for k in ks]
        out = multifreq_omp(p_list, dicts, n)
        return out.positions, out.residual_history
    origin = cfg.region.centroid
    pairs = [_unknown_dicts(cfg, k, mics, grid, origin) for k in ks]
    if cfg.method == "omp":
        out = multifreq_omp(p_list, [s for s, _ in pairs], n, [w for _, w in pairs])
        return out.positions, out.residual_history
    if len(ks) != 1:
        raise ValueError("basis pursuit runs on a single wavenumber")
    s, w = pairs[0]
    p = p_list[0]
    eps = cfg.bp_eps_rel * np.linalg.norm(p)
    if cfg.snr_db is not None:
        eps += np.linalg.norm(p) * 10 ** (-cfg.snr_db / 20)
    sol = group_basis_pursuit(p, s.normalized(), w.normalized(), eps)
    peaks = extract_peaks(sol.alpha, grid, cfg.peak_threshold, cfg.peak_min_sep)
    est = np.array(peaks[:n]).reshape(-1, 2)
    return est, [sol.residual_norm]


def _vekua_order(cfg, k):
    return default_vekua_order(cfg.room, k, cfg.vekua_margin)


def _unknown_dicts(cfg, k, mics, grid, origin):
    if cfg.basis == "fb":
        return build_unknown_dictionaries(k, mics, grid, origin, n_fb=cfg.n_fb)
    return build_unknown_dictionaries(k, mics, grid, origin, n_pw=cfg.n_fb)


def run_trial(cfg, trial_seed, eigs=None, freq_seed=None, cell=(), trial=0):
    """One draw of sources and mics, simulated and localized.

    ``freq_seed`` seeds the random-frequency stream separately, so that
    cells differing only in the number of frequencies share a prefix of the
    same draw.  It defaults to a value derived from ``trial_seed``.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(trial_seed)
    if freq_seed is None:
        freq_seed = derive_seed(trial_seed, 1)
    if eigs is None:
        eigs = scenario_eigs(cfg)
    ks = trial_wavenumbers(cfg, eigs, np.random.default_rng(freq_seed))
    region = cfg.region if cfg.model == "unknown" else None
    truth = draw_sources(cfg.room, cfg.n_sources, rng, region=region, min_sep=cfg.min_sep, margin=cfg.margin)
    if cfg.model == "known":
        mics = sample_interior(cfg.room, cfg.n_mics, rng, margin=cfg.margin).points
    else:
        mics = sample_mics(cfg.room, cfg.region, cfg.n_mics, cfg.sampling, rng, cfg.mix_ratio, cfg.margin).points
    grid = scenario_grid(cfg)

    if cfg.n_sources == 0:
        return TrialRecord(cell, trial, trial_seed, ks, truth, mics, np.zeros((0, 2)), 1.0, True, [], 0.0, False,
                           time.perf_counter() - t0)

    p_list = []
    fwd = 0.0
    for k in ks:
        p, res = mfs_forward(cfg.room, k, truth, mics)
        fwd = max(fwd, res)
        p_list.append(add_noise(p, cfg.snr_db, rng))
    est, history = localize(cfg, ks, mics, p_list, grid)
    score = success_metric(truth.positions, est, cfg.eps_loc)
    return TrialRecord(
        cell=cell, trial=trial, seed=trial_seed, ks=ks, truth=truth, mics=mics, estimates=np.asarray(est),
        success=score, all_found=bool(score == 1.0), residuals=list(history), forward_residual=fwd,
        flagged=bool(fwd > RESIDUAL_FLAG), wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _trial_block(args):
    """All cells of one trial index; runs in a worker process."""
    cfg, trial, eigs = args
    freq_seed = derive_seed(cfg.seed, 0xF4E0, trial)
    out = []
    for row, y in enumerate(cfg.y_values):
        for col, x in enumerate(cfg.x_values):
            cell_cfg = cfg.cell(x, y)
            seed = derive_seed(cfg.seed, row, col, trial)
            try:
                rec = run_trial(cell_cfg, seed, eigs, freq_seed, cell=(row, col), trial=trial)
            except (ValueError, np.linalg.LinAlgError, RuntimeError) as exc:
                logger.warning("trial %d, cell (%s=%s, %s=%s) failed: %s", trial, cfg.y_axis, y, cfg.x_axis, x, exc)
                rec = TrialRecord((row, col), trial, seed, np.zeros(0), None, None, np.zeros((0, 2)),
                                  float("nan"), False, [], float("nan"), False, 0.0, error=str(exc))
            out.append(rec)
    return out


def run_sweep(cfg, threads=1, keep_records=False):
    """Mean success per cell over ``cfg.trials`` seeded trials.

    Trials are executed trial-major (every cell of trial 0, then trial 1,
    ...) so that per-wavenumber solver caches are reused across cells.
    Failed trials are logged and counted in ``errors``; the sweep goes on.
    """
    eigs = scenario_eigs(cfg)
    jobs = [(cfg, t, eigs) for t in range(cfg.trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(_trial_block, jobs))
    else:
        blocks = []
        for job in jobs:
            blocks.append(_trial_block(job))
            logger.info("%s: trial %d/%d done", cfg.name, job[1] + 1, cfg.trials)
    records = [r for block in blocks for r in block]
    return aggregate(cfg, records, keep_records)


def aggregate(cfg, records, keep_records=False):
    ny, nx = cfg.shape
    by_cell = {}
    for rec in records:
        by_cell.setdefault(rec.cell, []).append(rec)
    success = np.full((ny, nx), np.nan)
    all_found = np.full((ny, nx), np.nan)
    chance = np.full((ny, nx), np.nan)
    counts = np.zeros((ny, nx), dtype=int)
    flagged = np.zeros((ny, nx), dtype=int)
    errors = np.zeros((ny, nx), dtype=int)
    for (row, col), recs in by_cell.items():
        recs = sorted(recs, key=lambda r: r.trial)
        ok = [r for r in recs if r.error is None]
        errors[row, col] = len(recs) - len(ok)
        counts[row, col] = len(ok)
        flagged[row, col] = sum(r.flagged for r in ok)
        if ok:
            success[row, col] = np.mean([r.success for r in ok])
            all_found[row, col] = np.mean([r.all_found for r in ok])
            chance[row, col] = chance_level(ok, cfg.eps_loc)
    return SweepResult(
        cfg.x_axis, tuple(cfg.x_values), cfg.y_axis, tuple(cfg.y_values), success, all_found, counts, flagged,
        errors, chance, records if keep_records else None,
    )


def chance_level(records, eps_loc=0.2):
    """Permuted-truth baseline: score trial i's estimates against trial i+1's sources."""
    if len(records) < 2:
        return float("nan")
    scores = []
    for a, b in zip(records, records[1:] + records[:1]):
        scores.append(success_metric(b.truth.positions, a.estimates, eps_loc))
    return float(np.mean(scores))


def reindex_by_difference(sweep):
    """Rebin an (n_mics, n_fb) sweep by (n_mics - n_fb, n_fb).

    The result has x axis ``n_mics-n_fb`` (sorted differences) and y axis
    ``n_fb``; bins that no cell maps to hold NaN with a zero count.
    """
    axes = {sweep.x_axis, sweep.y_axis}
    if axes != {"n_mics", "n_fb"}:
        raise ValueError(f"need axes n_mics and n_fb, got {sweep.x_axis} and {sweep.y_axis}")
    mics_on_x = sweep.x_axis == "n_mics"
    cells = []
    for row, y in enumerate(sweep.y_values):
        for col, x in enumerate(sweep.x_values):
            n_mics, n_fb = (x, y) if mics_on_x else (y, x)
            cells.append((n_mics - n_fb, n_fb, row, col))
    diffs = tuple(sorted({c[0] for c in cells}))
    fbs = tuple(sorted({c[1] for c in cells}))
    shape = (len(fbs), len(diffs))
    sums = {name: np.zeros(shape) for name in ("success", "all_found", "chance")}
    weights = np.zeros(shape)
    counts = np.zeros(shape, dtype=int)
    flagged = np.zeros(shape, dtype=int)
    errors = np.zeros(shape, dtype=int)
    for d, fb, row, col in cells:
        i, j = fbs.index(fb), diffs.index(d)
        n = sweep.counts[row, col]
        errors[i, j] += sweep.errors[row, col]
        if n == 0:
            continue
        for name in sums:
            val = getattr(sweep, name)[row, col]
            if np.isfinite(val):
                sums[name][i, j] += n * val
        weights[i, j] += n
        counts[i, j] += n
        flagged[i, j] += sweep.flagged[row, col]
    with np.errstate(invalid="ignore"):
        avg = {name: np.where(weights > 0, s / np.where(weights > 0, weights, 1), np.nan) for name, s in sums.items()}
    return SweepResult("n_mics-n_fb", diffs, "n_fb", fbs, avg["success"], avg["all_found"], counts, flagged,
                       errors, avg["chance"])


# ---------------------------------------------------------------------------
# Presets, one per published figure family
# ---------------------------------------------------------------------------


def _span(lo, hi, step):
    return tuple(range(lo, hi + 1, step))


def scenario_catalog():
    """Named preset scenarios, keyed by ``<family>`` or ``<family>-<variant>``."""
    room = reference_room()
    region = default_region(room)
    known = dict(room=room, region=None, model="known", n_sources=2, x_axis="n_mics", x_values=_span(2, 42, 2),
                 y_axis="n_freqs", y_values=_span(1, 31, 1), band=(7.0, 14.0))
    unknown = dict(room=room, region=region, model="unknown", n_sources=2, ks=(10.0,), sampling="mixed")
    mic_fb = dict(x_axis="n_mics", x_values=_span(10, 100, 5), y_axis="n_fb", y_values=_span(5, 61, 4))
    presets = [
        ExperimentConfig(name="cmpf-random", strategy="random", **known),
        ExperimentConfig(name="cmpf-modal", strategy="modal", **known),
        ExperimentConfig(name="cmpf-midpoints", strategy="midpoints", **known),
        ExperimentConfig(name="cmpspl-a", **{**unknown, "sampling": "interior"}, **mic_fb),
        ExperimentConfig(name="cmpspl-b", **{**unknown, "sampling": "boundary"}, **mic_fb),
        ExperimentConfig(name="cmpspl-c", **unknown, **mic_fb),
        ExperimentConfig(name="cmpnsource", n_fb=21, x_axis="n_mics", x_values=_span(10, 100, 5),
                         y_axis="n_sources", y_values=_span(1, 6, 1), **{**unknown, "n_sources": 1}),
        ExperimentConfig(name="cmpc", x_axis="n_mics", x_values=_span(10, 100, 2), y_axis="n_fb",
                         y_values=(11, 15, 21, 25, 31, 41), **unknown),
        ExperimentConfig(name="cmpmode-modal", **{**unknown, "ks": (9.98,)}, **mic_fb),
        ExperimentConfig(name="cmpmode-between", **{**unknown, "ks": (10.08,)}, **mic_fb),
        ExperimentConfig(name="cmpnfb", n_mics=60, x_axis="n_fb", x_values=_span(1, 59, 2), y_axis="k",
                         y_values=(5.0, 10.0, 15.0, 20.0), **unknown),
        ExperimentConfig(name="hyper-multi", **{**unknown, "ks": (10.0, 15.0, 20.0)}, x_axis="n_mics",
                         x_values=_span(20, 120, 5), y_axis="n_fb", y_values=_span(11, 61, 4)),
        ExperimentConfig(name="hyper-single", **{**unknown, "ks": (20.0,)}, x_axis="n_mics",
                         x_values=_span(20, 120, 5), y_axis="n_fb", y_values=_span(11, 61, 4)),
        ExperimentConfig(name="l1", method="bp", n_fb=21, x_axis="n_mics", x_values=(50,), y_axis="n_sources",
                         y_values=(4,), **{**unknown, "n_sources": 4, "n_mics": 50}),
    ]
    return {cfg.name: cfg for cfg in presets}


def family(name):
    """Figure family of a preset name (the part before the first dash)."""
    return name.split("-")[0]


def config_fields():
    return [f.name for f in fields(ExperimentConfig)]
