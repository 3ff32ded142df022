"""CSV schemas, key=value reports and run manifests.

Schemas (all comma-separated, header required, floats written with
shortest round-trip precision):

    prices   t,price
    samples  value
    density  x,f,method
    tables   x,g

Manifests and reports are plain ``key=value`` text.  All writers go
through an atomic temp-file rename so a failed command never leaves a
partial artifact behind.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .density import CurveMethod, DensityCurve
from .errors import InputFormatError
from .simulate import PriceSeries

__all__ = [
    "write_atomic",
    "sha256_file",
    "format_key_values",
    "parse_key_values",
    "key_values_csv",
    "save_price_series",
    "load_price_series",
    "save_samples",
    "load_samples",
    "save_density_curve",
    "load_density_curve",
    "load_response_table",
    "RunManifest",
]


def _fmt(value: float) -> str:
    return repr(float(value))


def write_atomic(path: str, text: str) -> None:
    """Write text via a temp file in the target directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def format_key_values(items: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in items.items())


def key_values_csv(rows: list) -> str:
    """Render report dictionaries as CSV rows for batch sweeps.

    All rows must share the same keys; the header is the key list of the
    first row.
    """
    if not rows:
        raise InputFormatError("no report rows to render")
    header = list(rows[0].keys())
    for row in rows[1:]:
        if list(row.keys()) != header:
            raise InputFormatError("report rows have mismatched columns")
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(row[k]) for k in header))
    return "\n".join(lines) + "\n"


def parse_key_values(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputFormatError(f"line {lineno} is not key=value: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------------------
# CSV schemas
# ---------------------------------------------------------------------------

def _read_rows(path: str, expected_header: str):
    try:
        with open(path, "r", newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc}")
    if not lines:
        raise InputFormatError(f"{path} is empty")
    header = lines[0].strip()
    if header != expected_header:
        raise InputFormatError(
            f"{path}: expected header {expected_header!r}, found {header!r}")
    return lines[1:]


def save_price_series(series: PriceSeries, path: str) -> None:
    rows = ["t,price"]
    prices = series.prices
    if not np.all(np.isfinite(prices)):
        raise InputFormatError(
            "prices overflow the float range; this configuration can only "
            "be analyzed in memory via log returns")
    rows.extend(f"{_fmt(t)},{_fmt(p)}" for t, p in zip(series.times, prices))
    write_atomic(path, "\n".join(rows) + "\n")


def load_price_series(path: str) -> PriceSeries:
    times, prices = [], []
    for lineno, line in enumerate(_read_rows(path, "t,price"), 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise InputFormatError(f"{path}:{lineno}: expected 2 columns")
        try:
            times.append(float(parts[0]))
            prices.append(float(parts[1]))
        except ValueError:
            raise InputFormatError(f"{path}:{lineno}: non-numeric value")
    if len(times) < 2:
        raise InputFormatError(f"{path}: fewer than two price rows")
    return PriceSeries.from_prices(np.array(times), np.array(prices),
                                   meta={"source": path})


def save_samples(values, path: str) -> None:
    rows = ["value"]
    rows.extend(_fmt(v) for v in np.asarray(values, dtype=float))
    write_atomic(path, "\n".join(rows) + "\n")


def load_samples(path: str) -> np.ndarray:
    out = []
    for lineno, line in enumerate(_read_rows(path, "value"), 2):
        if not line.strip():
            continue
        try:
            out.append(float(line))
        except ValueError:
            raise InputFormatError(f"{path}:{lineno}: non-numeric value")
    if not out:
        raise InputFormatError(f"{path}: no sample rows")
    return np.array(out)


def save_density_curve(curve: DensityCurve, path: str) -> None:
    rows = ["x,f,method"]
    rows.extend(f"{_fmt(x)},{_fmt(f)},{curve.method.value}"
                for x, f in zip(curve.grid, curve.values))
    write_atomic(path, "\n".join(rows) + "\n")


def load_density_curve(path: str) -> DensityCurve:
    xs, fs, methods = [], [], set()
    for lineno, line in enumerate(_read_rows(path, "x,f,method"), 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise InputFormatError(f"{path}:{lineno}: expected 3 columns")
        try:
            xs.append(float(parts[0]))
            fs.append(float(parts[1]))
        except ValueError:
            raise InputFormatError(f"{path}:{lineno}: non-numeric value")
        methods.add(parts[2].strip())
    if not xs:
        raise InputFormatError(f"{path}: no curve rows")
    if len(methods) != 1:
        raise InputFormatError(f"{path}: mixed methods {sorted(methods)}")
    return DensityCurve(np.array(xs), np.array(fs),
                        CurveMethod(methods.pop()))


def load_response_table(path: str):
    """Load a tabulated response from an x,g CSV."""
    from .response import TabulatedResponse

    xs, gs = [], []
    for lineno, line in enumerate(_read_rows(path, "x,g"), 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise InputFormatError(f"{path}:{lineno}: expected 2 columns")
        try:
            xs.append(float(parts[0]))
            gs.append(float(parts[1]))
        except ValueError:
            raise InputFormatError(f"{path}:{lineno}: non-numeric value")
    from .errors import DomainError

    try:
        return TabulatedResponse(np.array(xs), np.array(gs))
    except DomainError as exc:
        raise InputFormatError(f"{path}: {exc}")


# ---------------------------------------------------------------------------
# run manifests
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    """Everything needed to reproduce a command run.

    ``params`` holds the fully resolved parameter set (flags over config
    over defaults).  Replaying a manifest re-executes the command with
    these values; all output artifacts are then byte-identical, wall-time
    fields aside.
    """

    command: str
    params: dict
    seed: int | None = None
    version: str = ""
    input_hashes: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""

    @staticmethod
    def now() -> str:
        return datetime.now(timezone.utc).isoformat()

    def to_text(self) -> str:
        items = {"command": self.command}
        if self.seed is not None:
            items["seed"] = self.seed
        items["version"] = self.version
        for key in sorted(self.params):
            items[f"param.{key}"] = self.params[key]
        for key in sorted(self.input_hashes):
            items[f"input.{key}"] = self.input_hashes[key]
        items["started"] = self.started
        items["finished"] = self.finished
        return format_key_values(items)

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        kv = parse_key_values(text)
        if "command" not in kv:
            raise InputFormatError("manifest lacks a command entry")
        params = {k[len("param."):]: v for k, v in kv.items()
                  if k.startswith("param.")}
        hashes = {k[len("input."):]: v for k, v in kv.items()
                  if k.startswith("input.")}
        seed = kv.get("seed")
        return cls(command=kv["command"], params=params,
                   seed=None if seed is None else int(seed),
                   version=kv.get("version", ""), input_hashes=hashes,
                   started=kv.get("started", ""),
                   finished=kv.get("finished", ""))

    def save(self, path: str) -> None:
        write_atomic(path, self.to_text())

    @classmethod
    def load(cls, path: str) -> "RunManifest":
        try:
            with open(path, "r") as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise InputFormatError(f"cannot read manifest {path}: {exc}")
