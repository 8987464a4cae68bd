"""Command line front end: ``python -m likelihood_lab --experiment NAME [...]``.

Exit codes: 0 success, 2 usage or configuration error, 3 at least one
result row (or the run itself) is invalid; partial output is still written.

Parameter precedence is command line > ``--config`` file > defaults.  The
seed falls back to ``LIKELIHOOD_LAB_SEED`` and then 0 when neither the
command line nor the config file sets it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import __version__
from .experiments import EXPERIMENTS, list_experiments

__all__ = ["main", "build_parser", "resolve_config", "read_output", "format_output", "UsageError"]

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 2, 3
SEED_ENV = "LIKELIHOOD_LAB_SEED"


class UsageError(ValueError):
    """Bad command line or configuration; the message names the offending field."""


# -- value parsing --------------------------------------------------------------

def _parse_scalar(text, kind, field):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes"):
                return True
            if low in ("0", "false", "no"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
            return value
        return text
    except ValueError:
        raise UsageError(f"{field}: cannot parse {text!r} as {kind.__name__}") from None


def _parse_value(text, default, field):
    if isinstance(default, tuple):
        kind = type(default[0]) if default else float
        parts = [s for s in text.split(",") if s.strip()]
        if not parts:
            raise UsageError(f"{field}: empty list")
        return tuple(_parse_scalar(s, kind, field) for s in parts)
    return _parse_scalar(text, type(default), field)


def _format_value(value):
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _read_config_file(path):
    entries = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"config: cannot read {path!r}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config: line {lineno} is not key=value: {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key] = value
    return entries


# -- command line -----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="likelihood-lab", description="Run a named likelihood experiment.")
    p.add_argument("--experiment", help="experiment name (see --list)")
    p.add_argument("--config", help="flat key=value file")
    p.add_argument("--seed", type=int, help=f"base seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    p.add_argument("--replications", help="replications per cell")
    p.add_argument("--n", help="comma-separated sample sizes")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="experiment-specific override; repeatable")
    p.add_argument("--list", action="store_true", help="list experiments and exit")
    return p


def resolve_config(args, environ=None):
    """Merge defaults, config file and command line into ``(experiment, params, seed, fmt, out)``."""
    environ = os.environ if environ is None else environ
    file_entries = _read_config_file(args.config) if args.config else {}
    name = args.experiment or file_entries.get("experiment")
    if not name:
        raise UsageError("experiment: no experiment given (use --experiment or --list)")
    if name not in EXPERIMENTS:
        raise UsageError(f"experiment: unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    exp = EXPERIMENTS[name]

    overrides = dict((k, v) for k, v in file_entries.items() if k not in ("experiment", "seed", "format", "out"))
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.n is not None:
        overrides["n"] = args.n
    for item in args.param:
        if "=" not in item:
            raise UsageError(f"param: expected KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        overrides[key] = value

    params = dict(exp.defaults)
    for key, text in overrides.items():
        target = key
        if key == "n" and exp.n_key not in (None, "n"):
            target = exp.n_key
        if target not in params:
            raise UsageError(f"{key}: not a parameter of experiment {name!r} "
                             f"(known: {', '.join(exp.defaults) or 'none'})")
        params[target] = _parse_value(text, exp.defaults[target], key)

    if args.seed is not None:
        seed = args.seed
    elif "seed" in file_entries:
        seed = _parse_scalar(file_entries["seed"], int, "seed")
    elif environ.get(SEED_ENV, "").strip():
        seed = _parse_scalar(environ[SEED_ENV], int, SEED_ENV)
    else:
        seed = 0
    if seed < 0:
        raise UsageError(f"seed: must be non-negative, got {seed}")
    fmt = args.format or file_entries.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise UsageError(f"format: must be csv or json, got {fmt!r}")
    out = args.out or file_entries.get("out")
    return exp, params, seed, fmt, out


# -- output -----------------------------------------------------------------------

def _cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if hasattr(value, "item"):
        return _cell(value.item())
    return str(value)


def _json_value(value):
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(float(value))
    if isinstance(value, tuple):
        return [_json_value(v) for v in value]
    return value


def format_output(header, columns, rows, fmt):
    """Serialise a run; identical inputs give identical text."""
    if fmt == "json":
        doc = {"header": {k: ({kk: _json_value(vv) for kk, vv in v.items()} if isinstance(v, dict)
                              else _json_value(v)) for k, v in header.items()},
               "columns": list(columns),
               "rows": [{c: _json_value(r[c]) for c in columns} for r in rows]}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    for key, value in header.items():
        if isinstance(value, dict):
            for k, v in value.items():
                buf.write(f"# {key}.{k}: {_format_value(v) if isinstance(v, tuple) else _cell(v)}\n")
        else:
            buf.write(f"# {key}: {_cell(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def _typed(text):
    if text in ("true", "false"):
        return text == "true"
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def read_output(path_or_text):
    """Parse a file written by this CLI into ``(header, rows)``.

    ``header`` holds ``config`` and ``summary`` as nested dicts; numeric
    cells come back as ``int`` or ``float`` (``nan`` included).
    """
    text = path_or_text
    if "\n" not in path_or_text and os.path.exists(path_or_text):
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        rows = [{k: (float(v) if isinstance(v, str) and v in ("nan", "inf", "-inf") else v) for k, v in r.items()}
                for r in doc["rows"]]
        return doc["header"], rows
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            if "." in key:
                group, sub = key.split(".", 1)
                header.setdefault(group, {})[sub] = _typed(value)
            else:
                header[key] = _typed(value)
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [{c: _typed(v) for c, v in zip(columns, rec)} for rec in reader]
    return header, rows


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def main(argv=None, environ=None):
    args = build_parser().parse_args(argv)
    if args.list:
        for name, description, anchor in list_experiments():
            print(f"{name}\t{anchor}\t{description}")
        return EXIT_OK
    try:
        exp, params, seed, fmt, out = resolve_config(args, environ)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    summary = {}
    rows = []
    error = None
    try:
        for row in exp.rows(params, seed, summary):
            rows.append(row)
    except ValueError as exc:
        if not rows:
            print(f"usage error: invalid configuration for {exp.name}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        error = f"{type(exc).__name__}: {exc}"
    except (RuntimeError, ArithmeticError) as exc:
        error = f"{type(exc).__name__}: {exc}"

    invalid = [r for r in rows if r.get("status") == "INVALID"]
    status = "INVALID" if error or invalid else "OK"
    header = {"artifact": f"likelihood_lab {__version__}", "experiment": exp.name, "anchor": exp.anchor,
              "seed": seed, "format": fmt, "config": dict(params), "summary": summary, "status": status}
    if error:
        header["error"] = error
    _write(format_output(header, exp.columns, rows, fmt), out)
    if status != "OK":
        reason = error or f"{len(invalid)} invalid row(s)"
        print(f"{exp.name}: INVALID result ({reason})", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
