"""
Run configuration.

Run files use the dotenv KEY=VALUE syntax with dotted keys for the sections:

    experiment = energy-equality
    grid.N = 256
    model.gamma = 1.0
    model.nonlinearity = 0, 0, 1     # a1, a3, a5
    integrator.dt = 1e-3

Every key is declared once in SCHEMA; errors name the line of the offending binding.
Process-wide settings (output directory, worker count, log level) come from the
environment, seeded from a .env file when one is present.
"""
import io
import logging
import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

from dotenv import load_dotenv
from dotenv.parser import parse_stream

from dynamics import ModelParams
from errors import ConfigurationError, DampedWaveError
from nonlinearity import NonlinearitySpec
from spectral import (BOX, DOMAIN_KINDS, GridSpec, SpectralField, StatePair, constant_field,
                      energy_space_norm, mode_field, random_field)
from storage import read_coefficients

load_dotenv()

logger = logging.getLogger(__name__)

FORCING_KINDS = ("zero", "constant", "single-mode", "random", "file")
INITIAL_KINDS = ("zero", "single-mode", "random")


@dataclass(frozen=True)
class Settings:
    """Process settings read from the environment"""
    output_dir: Path
    workers: int
    log_level: str

    @classmethod
    def from_env(cls) -> "Settings":
        try:
            workers = int(os.getenv("DWSIM_WORKERS", "1"))
        except ValueError:
            raise ConfigurationError(f"DWSIM_WORKERS must be an integer, got {os.getenv('DWSIM_WORKERS')!r}")
        return cls(output_dir=Path(os.getenv("DWSIM_OUTPUT_DIR", "./runs")),
                   workers=max(1, workers),
                   log_level=os.getenv("LOG_LEVEL", "INFO").upper())


# ─── Value parsers ────────────────────────────────────────────

def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not a finite number")
    return value


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _list_of(parse: Callable[[str], Any]) -> Callable[[str], Tuple]:
    def parse_list(text: str) -> Tuple:
        items = [item.strip() for item in text.split(",") if item.strip()]
        return tuple(parse(item) for item in items)
    return parse_list


def _triple(text: str) -> Tuple[float, float, float]:
    values = _list_of(_float)(text)
    if len(values) != 3:
        raise ValueError("expected three coefficients a1, a3, a5")
    return values


@dataclass(frozen=True)
class Field:
    key: str
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    choices: Tuple = ()
    doc: str = ""


SCHEMA: Dict[str, Field] = {f.key: f for f in (
    Field("experiment", str, required=True, doc="preset name"),
    Field("grid.dim", _int, 1, choices=(1, 2, 3)),
    Field("grid.N", _int, 64, doc="points per axis"),
    Field("grid.kind", str, "torus", choices=DOMAIN_KINDS),
    Field("grid.dealias", _float, 2.0 / 3.0),
    Field("model.gamma", _float, required=True),
    Field("model.alpha", _float, 0.0),
    Field("model.theta", _float, 0.5),
    Field("model.nonlinearity", _triple, (0.0, 0.0, 1.0), doc="a1, a3, a5"),
    Field("model.forcing", str, "zero", choices=FORCING_KINDS),
    Field("model.forcing.k", _list_of(_int), (1,)),
    Field("model.forcing.amplitude", _float, 1.0),
    Field("model.forcing.seed", _int),
    Field("model.forcing.slope", _float, -2.0),
    Field("model.forcing.file", str, doc="coefficient dump holding g as its first u"),
    Field("initial.kind", str, "random", choices=INITIAL_KINDS),
    Field("initial.k", _list_of(_int), (1,)),
    Field("initial.amplitude", _float, 1.0),
    Field("initial.velocity_amplitude", _float, 0.0),
    Field("initial.slope", _float, -2.0),
    Field("initial.modes", _int, doc="highest |k|_inf of a random initial state"),
    Field("integrator.dt", _float, 1e-3),
    Field("integrator.T", _float, 1.0),
    Field("integrator.stride", _int, 10),
    Field("integrator.seed", _int),
    Field("ensemble.size", _int, 1),
    Field("ensemble.norms", _list_of(_float), ()),
    Field("experiment.windows", _list_of(_float), ()),
    Field("experiment.deltas", _list_of(_float), ()),
    Field("experiment.s", _list_of(_float), ()),
    Field("experiment.samples", _int, 20),
    Field("experiment.refine", _int, 2),
    Field("experiment.burn_in", _float, 20.0, doc="attractor sampling starts here"),
    Field("experiment.duration", _float, 10.0, doc="length of the attractor sampling run"),
    Field("output.dir", str),
    Field("output.dump_coefficients", _bool, False),
)}

TOLERANCE_PREFIX = "tolerance."


@dataclass
class RunConfig:
    """Validated run configuration; values by dotted key, with the line each key came from"""
    values: Dict[str, Any]
    lines: Dict[str, Optional[int]] = field(default_factory=dict)
    source: str = "<config>"

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def experiment(self) -> str:
        return self.values["experiment"]

    @property
    def tolerances(self) -> Dict[str, float]:
        return {k[len(TOLERANCE_PREFIX):]: v for k, v in self.values.items() if k.startswith(TOLERANCE_PREFIX)}

    def tolerance(self, name: str, default: float) -> float:
        return self.tolerances.get(name, default)

    def output_dir(self, settings: Optional[Settings] = None) -> Path:
        if self.values.get("output.dir"):
            return Path(self.values["output.dir"])
        return (settings or Settings.from_env()).output_dir

    @contextmanager
    def anchored(self, *keys: str):
        """Re-raise value problems as ConfigurationError pointing at the first key's line"""
        try:
            yield
        except ConfigurationError as exc:
            if exc.line is not None:
                raise
            line = next((self.lines[k] for k in keys if self.lines.get(k)), None)
            raise ConfigurationError(str(exc), line) from exc
        except (ValueError, DampedWaveError) as exc:
            line = next((self.lines[k] for k in keys if self.lines.get(k)), None)
            raise ConfigurationError(f"{', '.join(keys)}: {exc}", line) from exc

    def grid(self) -> GridSpec:
        with self.anchored("grid.N", "grid.dim", "grid.kind", "grid.dealias"):
            return GridSpec(self["grid.dim"], self["grid.N"], self["grid.kind"], self["grid.dealias"])

    def _wavevector(self, key: str, grid: GridSpec) -> Tuple[int, ...]:
        k = self[key]
        if len(k) == 1 and grid.dim > 1:
            k = k + ((1 if grid.kind == BOX else 0),) * (grid.dim - 1)
        if len(k) != grid.dim:
            raise ConfigurationError(f"{key} needs {grid.dim} components, got {len(k)}", self.lines.get(key))
        return k

    def forcing(self, grid: Optional[GridSpec] = None) -> SpectralField:
        grid = grid or self.grid()
        kind = self["model.forcing"]
        amplitude = self["model.forcing.amplitude"]
        with self.anchored("model.forcing", "model.forcing.k", "model.forcing.file"):
            if kind == "zero":
                return grid.zeros()
            if kind == "constant":
                return constant_field(grid, amplitude)
            if kind == "single-mode":
                return mode_field(grid, self._wavevector("model.forcing.k", grid), amplitude)
            if kind == "random":
                return random_field(grid, self["model.forcing.seed"], self["model.forcing.slope"], amplitude)
            return self._forcing_from_file(grid)

    def _forcing_from_file(self, grid: GridSpec) -> SpectralField:
        path = self.values.get("model.forcing.file")
        if not path:
            raise ConfigurationError("model.forcing = file needs model.forcing.file", self.lines.get("model.forcing"))
        file_grid, states = read_coefficients(path)
        if file_grid != grid:
            raise ConfigurationError(f"{path} holds a {file_grid.n}^{file_grid.dim} {file_grid.kind} field",
                                     self.lines.get("model.forcing.file"))
        return states[0].u

    def build_params(self, grid: Optional[GridSpec] = None) -> ModelParams:
        grid = grid or self.grid()
        with self.anchored("model.nonlinearity"):
            nonlinearity = NonlinearitySpec(*self["model.nonlinearity"])
        g = self.forcing(grid)
        with self.anchored("model.gamma", "model.alpha", "model.theta"):
            return ModelParams(gamma=self["model.gamma"], alpha=self["model.alpha"], g=g,
                               theta=self["model.theta"], nonlinearity=nonlinearity)

    def initial_state(self, index: int = 0, norm: Optional[float] = None,
                      grid: Optional[GridSpec] = None) -> StatePair:
        """Initial state number `index` of the run, rescaled to energy norm `norm` when given"""
        grid = grid or self.grid()
        kind = self["initial.kind"]
        amp, vamp = self["initial.amplitude"], self["initial.velocity_amplitude"]
        with self.anchored("initial.kind", "initial.k", "initial.modes"):
            if kind == "zero":
                xi = StatePair.zeros(grid)
            elif kind == "single-mode":
                k = self._wavevector("initial.k", grid)
                xi = StatePair(mode_field(grid, k, amp), mode_field(grid, k, vamp))
            else:
                seed = self["integrator.seed"] + 2 * index
                slope, kmax = self["initial.slope"], self.values.get("initial.modes")
                xi = StatePair(random_field(grid, seed, slope, amp, kmax),
                               random_field(grid, seed + 1, slope + 1.0, vamp, kmax))
        if norm is not None:
            current = energy_space_norm(xi)
            if current == 0.0:
                raise ConfigurationError("cannot rescale a zero initial state", self.lines.get("ensemble.norms"))
            xi = xi.scaled(norm / current)
        return xi

    def ensemble(self, grid: Optional[GridSpec] = None) -> Sequence[StatePair]:
        """One state per ensemble member; members cycle through ensemble.norms when set"""
        norms = self["ensemble.norms"]
        return [self.initial_state(i, norms[i % len(norms)] if norms else None, grid)
                for i in range(self["ensemble.size"])]

    def describe(self) -> Dict[str, Any]:
        return dict(self.values)


# ─── Parsing ──────────────────────────────────────────────────

def _bindings(text: str) -> Iterable[Tuple[Optional[str], Optional[str], int, bool]]:
    for binding in parse_stream(io.StringIO(text)):
        lead = binding.original.string[:len(binding.original.string) - len(binding.original.string.lstrip())]
        yield binding.key, binding.value, binding.original.line + lead.count("\n"), binding.error


def _coerce(spec: Field, raw: str, line: Optional[int]) -> Any:
    try:
        value = spec.parse(raw.strip())
    except ValueError as exc:
        raise ConfigurationError(f"{spec.key}: {exc}", line) from exc
    if spec.choices and value not in spec.choices:
        raise ConfigurationError(f"{spec.key} must be one of {', '.join(map(str, spec.choices))}, got {raw!r}",
                                 line)
    return value


def _apply(raw: Dict[str, str], lines: Dict[str, Optional[int]], key: str, value: str,
           line: Optional[int]) -> None:
    if key not in SCHEMA and not key.startswith(TOLERANCE_PREFIX):
        raise ConfigurationError(f"unknown key {key!r}", line)
    raw[key] = value
    lines[key] = line


def validate(raw: Mapping[str, str], lines: Mapping[str, Optional[int]], source: str = "<config>") -> RunConfig:
    values: Dict[str, Any] = {}
    for key, spec in SCHEMA.items():
        if key in raw:
            values[key] = _coerce(spec, raw[key], lines.get(key))
        elif spec.required:
            raise ConfigurationError(f"missing required key {key!r}")
        elif spec.default is not None:
            values[key] = spec.default
    for key in raw:
        if key.startswith(TOLERANCE_PREFIX):
            values[key] = _coerce(Field(key, _float), raw[key], lines.get(key))

    config = RunConfig(values, dict(lines), source)
    if values["model.forcing"] == "random" and "model.forcing.seed" not in values:
        raise ConfigurationError("random forcing needs model.forcing.seed", lines.get("model.forcing"))
    if values["initial.kind"] == "random" and "integrator.seed" not in values:
        raise ConfigurationError("random initial data needs integrator.seed", lines.get("initial.kind"))
    for key in ("integrator.dt", "integrator.T"):
        if values[key] <= 0:
            raise ConfigurationError(f"{key} must be positive", lines.get(key))
    for key in ("integrator.stride", "ensemble.size", "grid.N"):
        if values[key] < 1:
            raise ConfigurationError(f"{key} must be at least 1", lines.get(key))
    return config


def parse_config_text(text: str, overrides: Sequence[str] = (), source: str = "<config>") -> RunConfig:
    """Parse a run file's text, apply key=value overrides, validate against SCHEMA"""
    raw: Dict[str, str] = {}
    lines: Dict[str, Optional[int]] = {}
    for key, value, line, error in _bindings(text):
        if error:
            raise ConfigurationError("cannot parse line", line)
        if key is None:
            continue
        if value is None:
            raise ConfigurationError(f"{key!r} has no value", line)
        if key in raw:
            raise ConfigurationError(f"duplicate key {key!r} (first set on line {lines[key]})", line)
        _apply(raw, lines, key, value, line)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"override {item!r} is not key=value")
        _apply(raw, lines, key.strip(), value.strip(), None)
    return validate(raw, lines, source)


def load_config(path, overrides: Sequence[str] = ()) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    config = parse_config_text(text, overrides, str(path))
    logger.info(f"loaded {path} (experiment {config.experiment})")
    return config


def render_config(values: Mapping[str, Any]) -> str:
    """Text of a run file holding `values`; tuples become comma lists"""
    out = []
    for key, value in values.items():
        if isinstance(value, (tuple, list)):
            value = ", ".join(str(v) for v in value)
        out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"
