"""Flat key = value run configuration.

One option per line, '#' starts a comment, values stay strings until a
typed getter pulls them out.  Every command writes its resolved
configuration next to its outputs so a run can be reproduced exactly.
"""

from .errors import ConfigInvalid


def parse_config(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigInvalid(f"config line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc


def write_config(cfg, path):
    with open(path, "w") as fh:
        for key in sorted(cfg):
            fh.write(f"{key} = {cfg[key]}\n")


def get_str(cfg, key, default=None, required=False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigInvalid(f"missing required config key {key!r}")
    return default


def get_int(cfg, key, default=None, required=False):
    raw = get_str(cfg, key, None, required)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigInvalid(f"config key {key!r}: expected integer, got {raw!r}") from exc


def get_float(cfg, key, default=None, required=False):
    raw = get_str(cfg, key, None, required)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigInvalid(f"config key {key!r}: expected number, got {raw!r}") from exc


def get_bool(cfg, key, default=None):
    raw = get_str(cfg, key, None)
    if raw is None:
        return default
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigInvalid(f"config key {key!r}: expected boolean, got {raw!r}")


def get_floats(cfg, key, default=None):
    raw = get_str(cfg, key, None)
    if raw is None:
        return default
    try:
        return [float(tok) for tok in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigInvalid(f"config key {key!r}: expected numbers, got {raw!r}") from exc


def get_ints(cfg, key, default=None):
    raw = get_str(cfg, key, None)
    if raw is None:
        return default
    try:
        return [int(tok) for tok in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigInvalid(f"config key {key!r}: expected integers, got {raw!r}") from exc
