"""Run configuration, result records and CSV emission.

Config files are UTF-8 ``key = value`` lines (``#`` comments allowed);
unknown keys are rejected.  CSV output is comma separated with ``#``
metadata lines on top and floats printed with 12 significant digits, so
the same inputs always give byte-identical files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .hierarchy import ShiftSeries
from .numerics import RadialGrid, build_grid
from .pulses import PulseProfile, field_amplitude_from_intensity

__all__ = [
    "ConfigError",
    "RunConfig",
    "ResultRecord",
    "TABLE1_REFERENCE",
    "TABLE1_TAG",
    "SCHEMA_VERSION",
    "fmt",
    "quantize",
    "write_csv",
    "read_csv",
    "emit_record",
    "parse_record",
]

SCHEMA_VERSION = "1"
SIG_DIGITS = 12

# reference rows: N -> (E2 one cycle at peak, alpha, E2 full pulse)
TABLE1_TAG = "[reference: Table 1]"
TABLE1_REFERENCE = {
    5: (-1.067, 4.267, -0.430),
    10: (-1.126, 4.504, -0.430),
    15: (-1.138, 4.550, -0.430),
    20: (-1.142, 4.567, -0.430),
    30: (-1.144, 4.579, -0.430),
    50: (-1.146, 4.583, -0.430),
}
TABLE1_INFINITE = (-1.146, 4.585)

WINDOWS = ("one_cycle_at_peak", "full_pulse", "custom")
SYSTEMS = ("harmonic", "hydrogen")


class ConfigError(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{float(x):.{SIG_DIGITS}g}"


def quantize(a):
    """Round to the precision that is written out, so emit/parse is exact."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return quantize(a.real) + 1j * quantize(a.imag)
    out = np.array([float(fmt(v)) for v in a.ravel()], float).reshape(a.shape)
    return out if out.ndim else float(out)


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _parse_ints(s: str) -> tuple:
    try:
        return tuple(int(v) for v in s.replace(" ", "").split(",") if v)
    except ValueError as exc:
        raise ConfigError(f"not an integer list: {s!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    system: str = "hydrogen"
    omega: float = 0.056
    n_cycles: int = 5
    lam: float = 0.03
    intensity: float | None = None     # when set, overrides lam
    intensity_unit: str = "au"
    r_min: float = 1e-6
    r_max: float = 40.0
    dr: float = 0.1
    dt: float = 0.001
    window: str = "one_cycle_at_peak"
    window_t0: float | None = None
    window_T: float | None = None
    output_dir: str = "."
    store_stride: int = 100
    oracle_tdse: bool = False
    oracle_dyson: bool = False
    cycles: tuple = (5, 10, 15, 20, 30, 50)
    L_max: int = 4
    tdse_dt: float = 0.01
    workers: int = 1

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigError(f"system must be one of {SYSTEMS}")
        if self.window not in WINDOWS:
            raise ConfigError(f"window must be one of {WINDOWS}")
        if self.window == "custom" and (self.window_t0 is None or self.window_T is None):
            raise ConfigError("custom window needs window_t0 and window_T")
        for name in ("omega", "dr", "dt", "tdse_dt"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.r_max > self.r_min >= 0:
            raise ConfigError("need 0 <= r_min < r_max")
        if self.n_cycles < 1 or self.store_stride < 1 or self.workers < 1:
            raise ConfigError("n_cycles, store_stride and workers must be >= 1")
        if self.lam < 0 or (self.intensity is not None and self.intensity < 0):
            raise ConfigError("field amplitude must be non-negative")
        if any(n < 1 for n in self.cycles):
            raise ConfigError("cycle counts must be >= 1")

    @property
    def amplitude(self) -> float:
        if self.intensity is None:
            return self.lam
        return field_amplitude_from_intensity(self.intensity, self.intensity_unit)

    def pulse(self, n_cycles: int | None = None) -> PulseProfile:
        return PulseProfile.sin2(self.omega, n_cycles or self.n_cycles, self.amplitude)

    def grid(self) -> RadialGrid:
        return build_grid(self.r_min, self.r_max, self.dr)

    def window_kind(self) -> str:
        return {"one_cycle_at_peak": "cycle", "full_pulse": "pulse", "custom": "custom"}[self.window]

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    # -- text form -----------------------------------------------------
    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        types = {f.name: f for f in fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, val = (p.strip() for p in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in kw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            kw[key] = _convert(key, val)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(str(exc)) from exc
        return cls.from_text(text)

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float):
                v = fmt(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"


_INT_KEYS = {"n_cycles", "store_stride", "L_max", "workers"}
_FLOAT_KEYS = {"omega", "lam", "intensity", "r_min", "r_max", "dr", "dt",
               "window_t0", "window_T", "tdse_dt"}
_BOOL_KEYS = {"oracle_tdse", "oracle_dyson"}


def _convert(key: str, val: str):
    try:
        if key in _INT_KEYS:
            return int(val)
        if key in _FLOAT_KEYS:
            return float(val)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {val!r}") from exc
    if key in _BOOL_KEYS:
        return _parse_bool(val)
    if key == "cycles":
        return _parse_ints(val)
    return val


# -- CSV ------------------------------------------------------------------

def write_csv(path_or_buf, header: dict, columns: list[str], rows) -> str:
    """Write ``# key = value`` lines, a column line and formatted rows.

    Returns the text; writes it when a path is given.
    """
    buf = io.StringIO()
    buf.write(f"# schema = {SCHEMA_VERSION}\n")
    for k, v in header.items():
        buf.write(f"# {k} = {v}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            Path(path_or_buf).write_text(text, encoding="utf-8")
    return text


def _cell(v: str) -> float:
    try:
        return float(v)
    except ValueError:
        return float("nan")


def read_csv(text_or_path):
    """Inverse of write_csv: (header dict, column names, float array).

    Blank or text cells (status strings, missing references) read as nan.
    """
    text = str(text_or_path)
    if "\n" not in text:
        text = Path(text).read_text(encoding="utf-8")
    header, cols, data = {}, None, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            header[k.strip()] = v.strip()
        elif cols is None:
            cols = line.split(",")
        elif line:
            data.append([_cell(v) for v in line.split(",")])
    arr = np.array(data, float).reshape(-1, len(cols or []))
    return header, cols, arr


# -- result records ---------------------------------------------------------

@dataclass
class ResultRecord:
    """Config snapshot, E_2 series, dipole series and scalar summary.

    Numeric content is quantized on construction to the written precision,
    which makes parse(emit(record)) == record exact.  ``wall_time`` is only
    written when set, so default output stays deterministic.
    """

    config: RunConfig
    shift: ShiftSeries | None = None
    dipole_times: np.ndarray | None = None
    dipole: np.ndarray | None = None
    summary: dict = field(default_factory=dict)
    code_version: str = ""
    wall_time: float | None = None

    def __post_init__(self):
        if self.shift is not None:
            self.shift = ShiftSeries(quantize(self.shift.times), quantize(self.shift.values),
                                     self.shift.order)
        if (self.dipole is None) != (self.dipole_times is None):
            raise ValueError("dipole needs both times and values")
        if self.dipole is not None:
            self.dipole_times = quantize(self.dipole_times)
            self.dipole = quantize(self.dipole)
        self.summary = {k: (complex(quantize(v)) if isinstance(v, complex) else float(quantize(v)))
                        for k, v in self.summary.items()}
        if self.wall_time is not None:
            self.wall_time = float(quantize(self.wall_time))
        if not self.code_version:
            from . import __version__
            self.code_version = __version__

    def __eq__(self, other):
        if not isinstance(other, ResultRecord):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is b
            return np.array_equal(a, b)

        s1, s2 = self.shift, other.shift
        shift_eq = (s1 is None and s2 is None) or (
            s1 is not None and s2 is not None and s1.order == s2.order
            and same(s1.times, s2.times) and same(s1.values, s2.values))
        return (self.config == other.config and shift_eq
                and same(self.dipole_times, other.dipole_times) and same(self.dipole, other.dipole)
                and self.summary == other.summary and self.code_version == other.code_version
                and self.wall_time == other.wall_time)


def _summary_value(v) -> str:
    if isinstance(v, complex):
        return f"{fmt(v.real)}{'+' if v.imag >= 0 else '-'}{fmt(abs(v.imag))}j"
    return fmt(v)


def emit_record(record: ResultRecord) -> str:
    """Text form: config and summary as metadata, then the time series.

    Shift and dipole series are written as separate blocks headed by
    ``# block = shift`` and ``# block = dipole``.
    """
    buf = io.StringIO()
    buf.write(f"# schema = {SCHEMA_VERSION}\n# kind = result_record\n")
    buf.write(f"# code_version = {record.code_version}\n")
    if record.wall_time is not None:
        buf.write(f"# wall_time = {fmt(record.wall_time)}\n")
    for line in record.config.to_text().splitlines():
        buf.write(f"# config.{line}\n")
    for k, v in record.summary.items():
        buf.write(f"# summary.{k} = {_summary_value(v)}\n")
    if record.shift is not None:
        buf.write(f"# block = shift order={record.shift.order}\n")
        buf.write("t,Re_E2,Im_E2\n")
        for t, v in zip(record.shift.times, record.shift.values):
            buf.write(f"{fmt(t)},{fmt(v.real)},{fmt(v.imag)}\n")
    if record.dipole is not None:
        buf.write("# block = dipole\n")
        buf.write("t,d\n")
        for t, d in zip(record.dipole_times, record.dipole):
            buf.write(f"{fmt(t)},{fmt(d)}\n")
    return buf.getvalue()


def parse_record(text: str) -> ResultRecord:
    meta_cfg, summary = [], {}
    code_version, wall_time = "", None
    blocks: dict[str, list] = {}
    order = 2
    current = None
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            key, val = key.strip(), val.strip()
            if key.startswith("config."):
                meta_cfg.append(f"{key[7:]} = {val}")
            elif key.startswith("summary."):
                summary[key[8:]] = complex(val) if val.endswith("j") else float(val)
            elif key == "code_version":
                code_version = val
            elif key == "wall_time":
                wall_time = float(val)
            elif key == "block":
                current = val.split()[0]
                if current == "shift":
                    order = int(val.split("order=")[1])
                blocks[current] = []
            continue
        if current is None or not line or line[0].isalpha():
            continue
        blocks[current].append([float(v) for v in line.split(",")])
    config = RunConfig.from_text("\n".join(meta_cfg))
    shift = None
    if "shift" in blocks:
        a = np.array(blocks["shift"], float).reshape(-1, 3)
        shift = ShiftSeries(a[:, 0], a[:, 1] + 1j * a[:, 2], order)
    dt_ = d_ = None
    if "dipole" in blocks:
        a = np.array(blocks["dipole"], float).reshape(-1, 2)
        dt_, d_ = a[:, 0], a[:, 1]
    return ResultRecord(config, shift, dt_, d_, summary, code_version, wall_time)
