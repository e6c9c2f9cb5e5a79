"""Plain-text scenario files.

Format: ``[section]`` headers, ``key = value`` lines, ``#`` comments.  Lists
are comma separated, ``none`` marks an absent optional value.  Sections:

``[output]``       name
``[room]``         shape (star | rectangle), lx, ly, x_cos, x_sin, y_cos, y_sin
``[region]``       shape (disk | room), center, diameter
``[sources]``      count, min_sep, margin
``[mics]``         count, sampling, mix_ratio, snr_db
``[frequencies]``  strategy, k, count, band, eig_step
``[solver]``       model, method, basis, n_fb, vekua_margin, grid_spacing,
                   bp_eps_rel, peak_threshold, peak_min_sep, eps_loc
``[sweep]``        x_axis, x_values, y_axis, y_values, trials, seed

Only ``[room]`` is mandatory; anything else falls back to the defaults of
:class:`~roomloc.experiments.ExperimentConfig`.  Unknown sections or keys are
errors.  :func:`dumps` writes every key, so ``loads(dumps(cfg)) == cfg``.
"""

from dataclasses import fields

from .experiments import ExperimentConfig
from .geometry import Disk, Rectangle, StarShaped, default_region, reference_room


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


def _str(v):
    return v


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _opt_float(v):
    return None if v.lower() == "none" else float(v)


def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _numbers(v):
    out = []
    for x in v.split(","):
        x = x.strip()
        if not x:
            continue
        out.append(int(x) if x.lstrip("+-").isdigit() else float(x))
    return tuple(out)


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# (section, key) -> (config field, parser); room and region keys are handled apart
SCHEMA = {
    ("output", "name"): ("name", _str),
    ("sources", "count"): ("n_sources", _int),
    ("sources", "min_sep"): ("min_sep", _float),
    ("sources", "margin"): ("margin", _float),
    ("mics", "count"): ("n_mics", _int),
    ("mics", "sampling"): ("sampling", _str),
    ("mics", "mix_ratio"): ("mix_ratio", _float),
    ("mics", "snr_db"): ("snr_db", _opt_float),
    ("frequencies", "strategy"): ("strategy", _str),
    ("frequencies", "k"): ("ks", _floats),
    ("frequencies", "count"): ("n_freqs", _int),
    ("frequencies", "band"): ("band", _floats),
    ("frequencies", "eig_step"): ("eig_step", _float),
    ("solver", "model"): ("model", _str),
    ("solver", "method"): ("method", _str),
    ("solver", "basis"): ("basis", _str),
    ("solver", "n_fb"): ("n_fb", _int),
    ("solver", "vekua_margin"): ("vekua_margin", _int),
    ("solver", "grid_spacing"): ("grid_spacing", _float),
    ("solver", "bp_eps_rel"): ("bp_eps_rel", _float),
    ("solver", "peak_threshold"): ("peak_threshold", _float),
    ("solver", "peak_min_sep"): ("peak_min_sep", _float),
    ("solver", "eps_loc"): ("eps_loc", _float),
    ("sweep", "x_axis"): ("x_axis", _str),
    ("sweep", "x_values"): ("x_values", _numbers),
    ("sweep", "y_axis"): ("y_axis", _str),
    ("sweep", "y_values"): ("y_values", _numbers),
    ("sweep", "trials"): ("trials", _int),
    ("sweep", "seed"): ("seed", _int),
}
ROOM_KEYS = {"shape": _str, "lx": _float, "ly": _float, "x_cos": _floats, "x_sin": _floats,
             "y_cos": _floats, "y_sin": _floats}
REGION_KEYS = {"shape": _str, "center": _floats, "diameter": _float}
SECTIONS = ("output", "room", "region", "sources", "mics", "frequencies", "solver", "sweep")


def parse_ini(text):
    """``{section: {key: (value, line)}}`` plus the line of each section header."""
    data = {}
    header_lines = {}
    section = None
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", num)
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", num)
            if section in data:
                raise ConfigError(f"duplicate section [{section}]", num)
            data[section] = {}
            header_lines[section] = num
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", num)
        if section is None:
            raise ConfigError("key outside of any section", num)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key in data[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", num)
        data[section][key] = (value, num)
    return data, header_lines


def _convert(parser, value, line, what):
    try:
        return parser(value)
    except ValueError as exc:
        raise ConfigError(f"bad value {value!r} for {what}: {exc}", line) from None


def loads(text):
    """Parse a scenario file into an :class:`ExperimentConfig`."""
    data, header_lines = parse_ini(text)
    if "room" not in data:
        raise ConfigError("missing [room] section")

    room_vals = {}
    for key, (value, line) in data["room"].items():
        if key not in ROOM_KEYS:
            raise ConfigError(f"unknown key {key!r} in [room]", line)
        room_vals[key] = _convert(ROOM_KEYS[key], value, line, f"room.{key}")
    shape = room_vals.pop("shape", "star")
    try:
        if shape == "rectangle":
            extra = set(room_vals) - {"lx", "ly"}
            if extra or set(room_vals) != {"lx", "ly"}:
                raise ValueError("a rectangle takes exactly lx and ly")
            room = Rectangle(room_vals["lx"], room_vals["ly"])
        elif shape == "star":
            if set(room_vals) - {"x_cos", "x_sin", "y_cos", "y_sin"}:
                raise ValueError("a star-shaped room takes x_cos, x_sin, y_cos, y_sin")
            ref = reference_room()
            room = StarShaped(**{name: room_vals.get(name, getattr(ref, name))
                                 for name in ("x_cos", "x_sin", "y_cos", "y_sin")})
        else:
            raise ValueError(f"unknown room shape {shape!r}")
    except ValueError as exc:
        raise ConfigError(f"[room]: {exc}", header_lines["room"]) from None

    kwargs = {"room": room}
    for section, entries in data.items():
        if section in ("room", "region"):
            continue
        for key, (value, line) in entries.items():
            if (section, key) not in SCHEMA:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line)
            name, parser = SCHEMA[(section, key)]
            kwargs[name] = _convert(parser, value, line, f"{section}.{key}")

    model = kwargs.get("model", "unknown")
    region_vals = {}
    for key, (value, line) in data.get("region", {}).items():
        if key not in REGION_KEYS:
            raise ConfigError(f"unknown key {key!r} in [region]", line)
        region_vals[key] = _convert(REGION_KEYS[key], value, line, f"region.{key}")
    try:
        rshape = region_vals.pop("shape", "disk" if model == "unknown" else "room")
        if rshape == "room":
            if region_vals:
                raise ValueError("region shape 'room' takes no other keys")
            kwargs["region"] = None
        elif rshape == "disk":
            ref = default_region(room)
            center = region_vals.get("center", ref.center)
            if len(center) != 2:
                raise ValueError("center needs two coordinates")
            kwargs["region"] = Disk(center, region_vals.get("diameter", ref.diameter))
        else:
            raise ValueError(f"unknown region shape {rshape!r}")
    except ValueError as exc:
        raise ConfigError(f"[region]: {exc}", header_lines.get("region")) from None

    for name in ("band",):
        if name in kwargs and len(kwargs[name]) != 2:
            raise ConfigError("frequencies.band needs two values", data["frequencies"]["band"][1])
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def dumps(cfg):
    """Serialize every field of ``cfg``; the inverse of :func:`loads`."""
    lines = ["[output]", f"name = {cfg.name}", "", "[room]"]
    room = cfg.room
    if isinstance(room, Rectangle):
        lines += ["shape = rectangle", f"lx = {_fmt(float(room.lx))}", f"ly = {_fmt(float(room.ly))}"]
    elif isinstance(room, StarShaped):
        lines += ["shape = star"] + [f"{n} = {_fmt(getattr(room, n))}" for n in ("x_cos", "x_sin", "y_cos", "y_sin")]
    else:
        raise TypeError(f"cannot serialize room {room!r}")
    lines += ["", "[region]"]
    if cfg.region is None:
        lines.append("shape = room")
    else:
        lines += ["shape = disk", f"center = {_fmt(cfg.region.center)}",
                  f"diameter = {_fmt(float(cfg.region.diameter))}"]
    by_section = {}
    for (section, key), (name, _) in SCHEMA.items():
        if section != "output":
            by_section.setdefault(section, []).append((key, name))
    for section in SECTIONS:
        if section not in by_section:
            continue
        lines += ["", f"[{section}]"]
        for key, name in by_section[section]:
            lines.append(f"{key} = {_fmt(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def dump(cfg, path):
    with open(path, "w") as fh:
        fh.write(dumps(cfg))


def _check_schema_covers_config():
    covered = {name for name, _ in SCHEMA.values()} | {"room", "region"}
    missing = {f.name for f in fields(ExperimentConfig)} - covered
    assert not missing, missing


_check_schema_covers_config()
