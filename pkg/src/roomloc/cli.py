"""Command-line front end.

Subcommands::

    roomloc sweep CONFIG [--seed N] [--threads N] [--trials N] [--out DIR]
    roomloc eigs CONFIG KMIN KMAX [--step H]
    roomloc locate MEASUREMENTS CONFIG [--solver omp|bp] [--n COUNT] [--out FILE]
    roomloc simulate CONFIG [--seed N] [--out FILE]
    roomloc presets
    roomloc preset NAME [--out FILE]

Exit codes: 0 success, 2 unreadable input (config or measurement file),
3 numerical failure during a sweep (the CSV is still written), 4 basis
pursuit infeasible.

Measurement files hold one or more blocks.  A block starts with a header
line ``k, n_mics`` followed by ``n_mics`` lines ``x, y, Re(p), Im(p)``.
Blank lines and ``#`` comments are ignored.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ConfigError, dumps, load
from .experiments import (
    add_noise,
    derive_seed,
    draw_sources,
    run_sweep,
    scenario_catalog,
    scenario_eigs,
    scenario_grid,
    trial_wavenumbers,
)
from .geometry import Rectangle, sample_interior, sample_mics
from .solvers import InfeasibleError, extract_peaks, group_basis_pursuit, multifreq_omp
from .wavefields import (
    build_unknown_dictionaries,
    default_vekua_order,
    estimate_eigenfrequencies,
    known_room_dictionary,
    mfs_forward,
    rect_eigenfrequencies,
)

logger = logging.getLogger("roomloc")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

SIMULATE_STREAM = 0x51A1
# unknown-room source atoms are Y_0(k|x - z|); a unit source contributes -Y_0 / 4
Y0_PER_SOURCE = 0.25


class InputError(Exception):
    pass


def _fail(code, message):
    print(f"roomloc: error: {message}", file=sys.stderr)
    return code


def _load_config(path):
    try:
        return load(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except ConfigError as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Output formats
# ---------------------------------------------------------------------------


def gray_levels(values):
    """Gray level round(255 * v), half up; NaN (no data) maps to black."""
    v = np.asarray(values, dtype=float)
    g = np.floor(255.0 * np.nan_to_num(v, nan=0.0) + 0.5)
    return np.clip(g, 0, 255).astype(int)


def format_pgm(matrix):
    """P2 text image; matrix row 0 (smallest y) becomes image row 1."""
    g = gray_levels(matrix)
    ny, nx = g.shape
    lines = ["P2", f"{nx} {ny}", "255"]
    lines += [" ".join(str(int(v)) for v in row) for row in g]
    return "\n".join(lines) + "\n"


def parse_pgm(text):
    tokens = [t for line in text.splitlines() for t in line.split("#", 1)[0].split()]
    if tokens[0] != "P2":
        raise ValueError("not a P2 image")
    nx, ny, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    vals = np.array([int(t) for t in tokens[4:]])
    if vals.size != nx * ny or np.any(vals > maxval):
        raise ValueError("pixel data does not match the header")
    return vals.reshape(ny, nx)


def _num(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


CSV_COLUMNS = ("success", "all_found", "trials", "flagged", "errors", "chance")


def format_csv(sweep):
    lines = [",".join((sweep.x_axis, sweep.y_axis) + CSV_COLUMNS)]
    for row, y in enumerate(sweep.y_values):
        for col, x in enumerate(sweep.x_values):
            vals = [sweep.success[row, col], sweep.all_found[row, col], sweep.counts[row, col],
                    sweep.flagged[row, col], sweep.errors[row, col], sweep.chance[row, col]]
            lines.append(",".join(_num(v) for v in [x, y] + vals))
    return "\n".join(lines) + "\n"


def summary_table(sweep):
    width = max(5, max(len(_num(x)) for x in sweep.x_values))
    head = f"{sweep.y_axis + ' / ' + sweep.x_axis:>16} " + " ".join(f"{_num(x):>{width}}" for x in sweep.x_values)
    rows = [head]
    for row, y in enumerate(sweep.y_values):
        cells = " ".join(f"{'-':>{width}}" if np.isnan(v) else f"{v:>{width}.2f}" for v in sweep.success[row])
        rows.append(f"{_num(y):>16} {cells}")
    return "\n".join(rows)


# ---------------------------------------------------------------------------
# Measurement files
# ---------------------------------------------------------------------------


def _fields(line, num, count):
    parts = [s.strip() for s in line.split(",")]
    if len(parts) != count:
        raise InputError(f"line {num}: expected {count} comma-separated values, got {len(parts)}")
    try:
        vals = [float(s) for s in parts]
    except ValueError:
        raise InputError(f"line {num}: not a number in {line!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"line {num}: non-finite value")
    return vals


def parse_measurements(text):
    """List of (k, mics (n, 2), p (n,)) blocks; raises InputError on any defect."""
    lines = [(i, raw.split("#", 1)[0].strip()) for i, raw in enumerate(text.splitlines(), start=1)]
    lines = [(i, s) for i, s in lines if s]
    blocks = []
    pos = 0
    while pos < len(lines):
        num, head = lines[pos]
        k, n = _fields(head, num, 2)
        if k <= 0 or n < 1 or n != int(n):
            raise InputError(f"line {num}: header needs k > 0 and a positive integer mic count")
        n = int(n)
        rows = lines[pos + 1 : pos + 1 + n]
        if len(rows) < n:
            raise InputError(f"block at line {num} announces {n} mics but the file ends after {len(rows)}")
        data = np.array([_fields(s, i, 4) for i, s in rows])
        blocks.append((k, data[:, :2], data[:, 2] + 1j * data[:, 3]))
        pos += 1 + n
    if not blocks:
        raise InputError("no measurement blocks")
    return blocks


def format_measurements(blocks):
    out = []
    for k, mics, p in blocks:
        out.append(f"{_num(float(k))}, {len(mics)}")
        for (x, y), v in zip(mics, p):
            out.append(f"{_num(x)}, {_num(y)}, {_num(v.real)}, {_num(v.imag)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_sweep(args):
    cfg = _load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if overrides:
        try:
            cfg = replace(cfg, **overrides)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    logger.info("sweep %s: %d x %d cells, %d trials", cfg.name, len(cfg.y_values), len(cfg.x_values), cfg.trials)
    sweep = run_sweep(cfg, threads=args.threads)
    csv_path = os.path.join(args.out, f"{cfg.name}.csv")
    pgm_path = os.path.join(args.out, f"{cfg.name}.pgm")
    with open(csv_path, "w", newline="") as fh:
        fh.write(format_csv(sweep))
    with open(pgm_path, "w") as fh:
        fh.write(format_pgm(sweep.success))
    print(summary_table(sweep))
    print(f"wrote {csv_path} and {pgm_path}")
    n_err = int(sweep.errors.sum())
    if n_err:
        return _fail(EXIT_NUMERICAL, f"{n_err} trial(s) failed numerically; see {csv_path}")
    return EXIT_OK


def cmd_eigs(args):
    cfg = _load_config(args.config)
    kmin, kmax = args.kmin, args.kmax
    if not (math.isfinite(kmin) and math.isfinite(kmax)) or kmin <= 0 or kmax < kmin:
        raise InputError(f"bad interval [{kmin}, {kmax}]: need 0 < KMIN <= KMAX")
    room = cfg.room
    if isinstance(room, Rectangle):
        eigs = rect_eigenfrequencies(room.lx, room.ly, kmax)
        eigs = np.unique(np.round(eigs[eigs >= kmin], 12))
    else:
        eigs = estimate_eigenfrequencies(room, (kmin, kmax), args.step or cfg.eig_step)
    for k in eigs:
        print(f"eig {k:.6f}")
    for a, b in zip(eigs[:-1], eigs[1:]):
        print(f"mid {0.5 * (a + b):.6f}")
    return EXIT_OK


def _grid_and_dicts(cfg, blocks):
    grid = scenario_grid(cfg)
    if cfg.model == "known":
        order = lambda k: default_vekua_order(cfg.room, k, cfg.vekua_margin)  # noqa: E731
        return grid, [(known_room_dictionary(cfg.room, k, mics, grid, order(k)), None) for k, mics, _ in blocks]
    origin = cfg.region.centroid
    pairs = []
    for k, mics, _ in blocks:
        kw = {"n_fb": cfg.n_fb} if cfg.basis == "fb" else {"n_pw": cfg.n_fb}
        pairs.append(build_unknown_dictionaries(k, mics, grid, origin, **kw))
    return grid, pairs


def cmd_locate(args):
    try:
        with open(args.measurements) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {args.measurements}: {exc.strerror}") from None
    blocks = parse_measurements(text)
    cfg = _load_config(args.config)
    n = cfg.n_sources if args.n is None else args.n
    if n < 1:
        raise InputError("--n must be at least 1")
    try:
        grid, pairs = _grid_and_dicts(cfg, blocks)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    p_list = [p for _, _, p in blocks]

    if args.solver == "omp":
        w_list = None if cfg.model == "known" else [w for _, w in pairs]
        out = multifreq_omp(p_list, [s for s, _ in pairs], n, w_list)
        mags = np.sqrt(np.mean(np.abs(out.amplitudes) ** 2, axis=0))
        if cfg.model == "unknown":
            mags = mags / Y0_PER_SOURCE
        for (x, y), a in zip(out.positions, mags):
            print(f"{x:.6f}, {y:.6f}, {a:.6e}")
        return EXIT_OK

    if cfg.model == "known" or len(blocks) != 1:
        raise InputError("basis pursuit needs the unknown-room model and a single measurement block")
    s, w = pairs[0]
    p = p_list[0]
    eps = cfg.bp_eps_rel * np.linalg.norm(p)
    if cfg.snr_db is not None:
        eps += np.linalg.norm(p) * 10 ** (-cfg.snr_db / 20)
    col_norms = np.linalg.norm(s.matrix, axis=0)
    col_norms[col_norms == 0] = 1.0
    sol = group_basis_pursuit(p, s.normalized(), w.normalized(), eps)
    amps = np.abs(sol.alpha) / col_norms / Y0_PER_SOURCE
    peaks = extract_peaks(sol.alpha, grid, cfg.peak_threshold, cfg.peak_min_sep)[:n]
    out_path = args.out or os.path.splitext(args.measurements)[0] + "_alpha.csv"
    with open(out_path, "w", newline="") as fh:
        fh.write("x,y,abs_alpha\n")
        for (x, y), a in zip(grid, amps):
            fh.write(f"{_num(x)},{_num(y)},{_num(a)}\n")
    for x, y in peaks:
        i = int(np.argmin(np.linalg.norm(grid - (x, y), axis=1)))
        print(f"{x:.6f}, {y:.6f}, {amps[i]:.6e}")
    logger.info("wrote %s", out_path)
    return EXIT_OK


def simulate(cfg, seed):
    """Draw one scenario from ``cfg`` and return (truth, measurement blocks)."""
    rng = np.random.default_rng(derive_seed(seed, SIMULATE_STREAM))
    ks = trial_wavenumbers(cfg, scenario_eigs(cfg), np.random.default_rng(derive_seed(seed, SIMULATE_STREAM, 1)))
    region = cfg.region if cfg.model == "unknown" else None
    truth = draw_sources(cfg.room, cfg.n_sources, rng, region=region, min_sep=cfg.min_sep, margin=cfg.margin)
    if cfg.model == "known":
        mics = sample_interior(cfg.room, cfg.n_mics, rng, margin=cfg.margin).points
    else:
        mics = sample_mics(cfg.room, cfg.region, cfg.n_mics, cfg.sampling, rng, cfg.mix_ratio, cfg.margin).points
    blocks = []
    for k in ks:
        p, _ = mfs_forward(cfg.room, k, truth, mics)
        blocks.append((float(k), mics, add_noise(p, cfg.snr_db, rng)))
    return truth, blocks


def cmd_simulate(args):
    cfg = _load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    truth, blocks = simulate(cfg, seed)
    out = args.out or f"{cfg.name}.meas"
    with open(out, "w", newline="") as fh:
        fh.write(format_measurements(blocks))
    truth_path = os.path.splitext(out)[0] + "_truth.csv"
    with open(truth_path, "w", newline="") as fh:
        fh.write("x,y,re,im\n")
        for (x, y), a in zip(truth.positions, truth.amplitudes):
            fh.write(f"{_num(x)},{_num(y)},{_num(a.real)},{_num(a.imag)}\n")
    for x, y in truth.positions:
        print(f"{x:.6f}, {y:.6f}")
    print(f"wrote {out} and {truth_path}")
    return EXIT_OK


def cmd_presets(args):
    for name, cfg in scenario_catalog().items():
        print(f"{name:16s} {cfg.model:8s} {cfg.y_axis} x {cfg.x_axis}")
    return EXIT_OK


def cmd_preset(args):
    catalog = scenario_catalog()
    if args.name not in catalog:
        raise InputError(f"unknown preset {args.name!r}; try 'roomloc presets'")
    text = dumps(catalog[args.name])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="roomloc", description="Sparse source localization in 2D rooms.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", parents=[common], help="run a parameter sweep, write CSV and PGM")
    p.add_argument("config")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trials", type=int, default=None, help="override the trial count")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eigs", parents=[common], help="list eigenfrequencies and midpoints")
    p.add_argument("config")
    p.add_argument("kmin", type=float)
    p.add_argument("kmax", type=float)
    p.add_argument("--step", type=float, default=None)
    p.set_defaults(func=cmd_eigs)

    p = sub.add_parser("locate", parents=[common], help="localize sources from a measurement file")
    p.add_argument("measurements")
    p.add_argument("config")
    p.add_argument("--solver", choices=("omp", "bp"), default="omp")
    p.add_argument("--n", type=int, default=None, help="number of sources")
    p.add_argument("--out", default=None, help="|alpha| grid CSV (bp only)")
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic measurement file")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("presets", parents=[common], help="list preset scenarios")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("preset", parents=[common], help="print a preset as a config file")
    p.add_argument("name")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        return _fail(EXIT_INPUT, str(exc))
    except InfeasibleError as exc:
        return _fail(EXIT_INFEASIBLE, str(exc))
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        return _fail(EXIT_NUMERICAL, str(exc))


if __name__ == "__main__":
    sys.exit(main())
