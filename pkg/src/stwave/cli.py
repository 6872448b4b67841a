"""
Command-line experiment runner.

Usage::

    stwave --config experiments.ini --out results/ [--threads N] [--seed N] [--only NAME]

The configuration is an INI-style file with one ``[section]`` per
experiment and flat ``key = value`` entries; lists are comma separated.
Keys in ``[DEFAULT]`` apply to every section.  Example::

    [conv_p2]
    kind = convergence
    degree = 2
    n_space = 16, 32, 64, 128
    ht_over_hs = 5

Each experiment writes ``<out>/<section>.csv`` with a header row and 17
significant digits per float.  The exit code is 0 on success, 1 for a
malformed configuration and 2 when a solve failed (rows are still
written).
"""
import argparse
import configparser
import csv
import math
import os
import re
import sys
from pathlib import Path

from .exceptions import ConfigParseError, StWaveError
from .experiments import KINDS, ExperimentConfig, run_experiment

__all__ = ["main", "parse_config", "format_value", "write_csv", "THREADS_ENV"]

THREADS_ENV = "STWAVE_THREADS"

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")

# key -> (field, parser)
_LIST_INT = "list-int"
_LIST_FLOAT = "list-float"
_LIST_STR = "list-str"
_FIELDS = {
    "kind": ("kind", "str"),
    "problem": ("problem", "str"),
    "degree": ("degrees", _LIST_INT),
    "degrees": ("degrees", _LIST_INT),
    "degree_time": ("degree_time", "int"),
    "regularity_space": ("regularity_space", "int"),
    "regularity_time": ("regularity_time", "int"),
    "method": ("method", "str"),
    "delta": ("delta", "float"),
    "n_space": ("n_space", _LIST_INT),
    "n_time": ("n_time", _LIST_INT),
    "ht_over_hs": ("ht_over_hs", "float"),
    "ratios": ("ratios", _LIST_FLOAT),
    "deltas": ("deltas", _LIST_FLOAT),
    "c0_breakpoints": ("c0_breakpoints", _LIST_FLOAT),
    "variants": ("variants", _LIST_STR),
    "modes": ("modes", _LIST_INT),
    "n_samples": ("n_samples", "int"),
    "samples": ("samples", "int"),
    "seed": ("seed", "int"),
    "assembly": ("assembly", "str"),
    "solver": ("solver", "str"),
    "space_aspect": ("space_aspect", "int"),
}
_PROBLEM_ARGS = {"T": float, "k": int, "dim": int, "r_in": float, "r_out": float}


def _line_index(text):
    """``(section, key) -> line number`` and ``section -> header line``."""
    keys, headers = {}, {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            headers[section] = i
            continue
        m = _KEY.match(line)
        if m and section is not None:
            keys[(section, m.group(1).strip().lower())] = i
    return keys, headers


def _parse_value(raw, kind):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if not items:
        raise ValueError("empty list")
    conv = {_LIST_INT: int, _LIST_FLOAT: float, _LIST_STR: str}[kind]
    return tuple(conv(v) for v in items)


def parse_config(text, seed=None, threads=1):
    """Parse configuration text into experiment configs (in file order).

    Parameters
    ----------
    text : str
    seed : int, optional
        Used where a section sets no ``seed`` of its own.
    threads : int

    Raises
    ------
    ConfigParseError
        With the offending line, section and field.
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError("entry outside of any [section]", line=exc.lineno) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigParseError(exc.message.split(":")[-1].strip() or "duplicate entry",
                               section=exc.section, field=getattr(exc, "option", None),
                               line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigParseError(f"cannot parse {line.strip()!r}", line=lineno) from None
    key_lines, headers = _line_index(text)
    if not parser.sections():
        raise ConfigParseError("configuration defines no experiment section")

    configs = []
    for section in parser.sections():
        def where(key):
            return key_lines.get((section, key.lower()), key_lines.get(("DEFAULT", key.lower())))

        kwargs, problem_args = {"name": section}, {}
        for key, raw in parser.items(section):
            if key in _PROBLEM_ARGS:
                try:
                    problem_args[key] = _PROBLEM_ARGS[key](raw)
                except ValueError:
                    raise ConfigParseError(f"invalid value {raw!r}", section, key, where(key)) from None
                continue
            if key not in _FIELDS:
                raise ConfigParseError("unknown key", section, key, where(key))
            fname, kind = _FIELDS[key]
            try:
                kwargs[fname] = _parse_value(raw, kind)
            except ValueError as exc:
                msg = "empty list" if str(exc) == "empty list" else f"invalid value {raw!r}"
                raise ConfigParseError(msg, section, key, where(key)) from None
        if "kind" not in kwargs:
            raise ConfigParseError(f"missing 'kind' (one of {', '.join(KINDS)})", section, "kind",
                                   headers.get(section))
        if "seed" not in kwargs and seed is not None:
            kwargs["seed"] = int(seed)
        kwargs["problem_args"] = problem_args
        kwargs["threads"] = int(threads)
        try:
            configs.append(ExperimentConfig(**kwargs))
        except StWaveError as exc:
            field = _guess_field(str(exc))
            raise ConfigParseError(str(exc), section, field,
                                   where(field) if field else headers.get(section)) from None
    return configs


def _guess_field(message):
    for key in ("kind", "n_space", "n_time", "ratios", "deltas", "delta", "regularity"):
        if key in message:
            return {"regularity": "regularity_space"}.get(key, key)
    return None


def format_value(v):
    """CSV text of a value: floats with 17 significant digits, locale-free."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if v is None:
        return ""
    try:
        return format(float(v), ".17g") if hasattr(v, "dtype") and v.dtype.kind == "f" else str(v)
    except (TypeError, ValueError):
        return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r.get(c)) for c in columns])


def _default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def main(argv=None):
    ap = argparse.ArgumentParser(prog="stwave", description="Space-time spline wave experiments.")
    ap.add_argument("--config", required=True, type=Path, help="experiment configuration file")
    ap.add_argument("--out", required=True, type=Path, help="output directory for CSV files")
    ap.add_argument("--threads", type=int, default=None,
                    help=f"assembly threads (default: ${THREADS_ENV} or 1)")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized experiments")
    ap.add_argument("--only", action="append", default=None, help="run only these sections")
    args = ap.parse_args(argv)

    threads = args.threads if args.threads is not None else _default_threads()
    if threads < 1:
        ap.error("--threads must be >= 1")
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"stwave: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        configs = parse_config(text, seed=args.seed, threads=threads)
    except ConfigParseError as exc:
        print(f"stwave: {args.config}: {exc}", file=sys.stderr)
        return 1
    if args.only:
        configs = [c for c in configs if c.name in set(args.only)]

    args.out.mkdir(parents=True, exist_ok=True)
    status = 0
    for cfg in configs:
        result = run_experiment(cfg)
        path = args.out / f"{cfg.name}.csv"
        write_csv(path, result.columns, result.rows)
        print(f"{cfg.name}: {len(result.rows)} rows -> {path}")
        for msg in result.failures:
            print(f"stwave: solver failure in {cfg.name}: {msg}", file=sys.stderr)
            status = 2
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
