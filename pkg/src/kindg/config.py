"""Run configuration: plain-text `key = value` files with [section] headers.

Coefficient and initial-data functions are selected by name plus numeric
parameters (no expression parsing), e.g. ``const 1.0``, ``poly 1 0 100``,
``step 1.0 0 100``, ``riemann 2 1 0``.  Unknown sections, keys, or function
names are rejected.  parse_config(render_config(cfg)) round-trips exactly.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np


class ConfigError(ValueError):
    pass


_VALID_SECTIONS = {
    "run": {"scheme", "model", "boundary", "t_final", "dt_policy", "dt"},
    "mesh": {"x_left", "x_right", "n", "segments"},
    "material": {"sigma_s", "sigma_a", "source", "epsilon", "sigma_m"},
    "initial": {"rho", "g"},
    "inflow": {"f_left", "f_right", "penalty"},
    "output": {"path"},
}

_X_FUNCTIONS = {"const": 1, "poly": -1, "step": 3, "sin": 0, "riemann": 3, "zero": 0}
_G_FUNCTIONS = {"zero": 0, "const": 1, "neg_v_cos": 0}
_V_FUNCTIONS = {"const": 1, "zero": 0}


def _parse_spec(text: str, allowed: dict) -> tuple[str, tuple[float, ...]]:
    parts = text.split()
    if not parts:
        raise ConfigError("empty function spec")
    name, args = parts[0], parts[1:]
    if name not in allowed:
        raise ConfigError(f"unknown function {name!r}; allowed: {sorted(allowed)}")
    arity = allowed[name]
    if arity >= 0 and len(args) != arity:
        raise ConfigError(f"function {name!r} takes {arity} parameters, got {len(args)}")
    try:
        return name, tuple(float(a) for a in args)
    except ValueError as exc:
        raise ConfigError(f"bad numeric parameter in {text!r}") from exc


def make_x_function(spec: str):
    """Materialize a function of x from its spec string."""
    name, a = _parse_spec(spec, _X_FUNCTIONS)
    if name in ("zero",):
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if name == "const":
        return lambda x: np.full_like(np.asarray(x, dtype=float), a[0])
    if name == "poly":
        coeffs = a[::-1]  # numpy polyval wants highest degree first
        return lambda x: np.polyval(coeffs, np.asarray(x, dtype=float))
    if name == "step":
        x0, left, right = a
        return lambda x: np.where(np.asarray(x, dtype=float) <= x0, left, right)
    if name == "sin":
        return lambda x: np.sin(np.asarray(x, dtype=float))
    if name == "riemann":
        left, right, x0 = a
        return lambda x: np.where(np.asarray(x, dtype=float) <= x0, left, right)
    raise AssertionError(name)


def make_g_function(spec: str):
    """Materialize an initial-data function of (x, v) from its spec string."""
    name, a = _parse_spec(spec, _G_FUNCTIONS)
    if name == "zero":
        return lambda x, v: np.zeros_like(np.asarray(x, dtype=float))
    if name == "const":
        return lambda x, v: np.full_like(np.asarray(x, dtype=float), a[0])
    if name == "neg_v_cos":
        return lambda x, v: -v * np.cos(np.asarray(x, dtype=float))
    raise AssertionError(name)


def make_v_function(spec: str):
    """Materialize inflow data f(v, t) (time-independent) from its spec string."""
    name, a = _parse_spec(spec, _V_FUNCTIONS)
    val = a[0] if name == "const" else 0.0
    return lambda v, t=0.0: np.full_like(np.asarray(v, dtype=float), val)


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one solver run."""

    scheme: int = 1                       # IMEXk-DGk-S order, 1..3
    model: str = "slab16"                 # slab16 | telegraph
    boundary: str = "periodic"            # periodic | inflow
    t_final: float = 1.0
    dt_policy: str = "cfl"                # cfl | fixed
    dt: float | None = None
    x_left: float = 0.0
    x_right: float = 1.0
    n: int | None = 40
    segments: tuple[tuple[float, float, int], ...] | None = None
    sigma_s: str = "const 1"
    sigma_a: str = "const 0"
    source: str = "const 0"
    epsilon: float = 1.0
    sigma_m: float | None = None
    initial_rho: str = "zero"
    initial_g: str = "zero"
    f_left: str = "const 0"
    f_right: str = "const 0"
    penalty: float = 1.0
    output_path: str | None = None

    def __post_init__(self):
        if self.scheme not in (1, 2, 3):
            raise ConfigError("scheme must be 1, 2 or 3")
        if self.model not in ("slab16", "telegraph"):
            raise ConfigError("model must be slab16 or telegraph")
        if self.boundary not in ("periodic", "inflow"):
            raise ConfigError("boundary must be periodic or inflow")
        if self.dt_policy not in ("cfl", "fixed"):
            raise ConfigError("dt_policy must be cfl or fixed")
        if self.dt_policy == "fixed" and (self.dt is None or self.dt <= 0.0):
            raise ConfigError("fixed dt_policy needs a positive dt")
        if self.epsilon <= 0.0:
            raise ConfigError("epsilon must be positive")
        if self.t_final <= 0.0:
            raise ConfigError("t_final must be positive")
        if (self.n is None) == (self.segments is None):
            raise ConfigError("specify exactly one of mesh n or segments")
        for spec, allowed in ((self.sigma_s, _X_FUNCTIONS),
                              (self.sigma_a, _X_FUNCTIONS),
                              (self.source, _X_FUNCTIONS),
                              (self.initial_rho, _X_FUNCTIONS)):
            _parse_spec(spec, allowed)
        _parse_spec(self.initial_g, _G_FUNCTIONS)
        _parse_spec(self.f_left, _V_FUNCTIONS)
        _parse_spec(self.f_right, _V_FUNCTIONS)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _format_segments(segments) -> str:
    return " ; ".join(f"{a:.17g},{b:.17g},{n}" for a, b, n in segments)


def _parse_segments(text: str):
    out = []
    for part in text.split(";"):
        bits = [b.strip() for b in part.split(",")]
        if len(bits) != 3:
            raise ConfigError(f"bad segment {part!r}; want x0,x1,n")
        out.append((float(bits[0]), float(bits[1]), int(bits[2])))
    return tuple(out)


def render_config(cfg: RunConfig) -> str:
    """Serialize a RunConfig to the key = value text format."""
    out = io.StringIO()

    def sec(name, items):
        rows = [(k, v) for k, v in items if v is not None]
        if not rows:
            return
        out.write(f"[{name}]\n")
        for k, v in rows:
            if isinstance(v, float):
                v = f"{v:.17g}"
            out.write(f"{k} = {v}\n")
        out.write("\n")

    sec("run", [("scheme", cfg.scheme), ("model", cfg.model),
                ("boundary", cfg.boundary), ("t_final", cfg.t_final),
                ("dt_policy", cfg.dt_policy), ("dt", cfg.dt)])
    sec("mesh", [("x_left", cfg.x_left), ("x_right", cfg.x_right),
                 ("n", cfg.n),
                 ("segments",
                  _format_segments(cfg.segments) if cfg.segments else None)])
    sec("material", [("sigma_s", cfg.sigma_s), ("sigma_a", cfg.sigma_a),
                     ("source", cfg.source), ("epsilon", cfg.epsilon),
                     ("sigma_m", cfg.sigma_m)])
    sec("initial", [("rho", cfg.initial_rho), ("g", cfg.initial_g)])
    if cfg.boundary == "inflow":
        sec("inflow", [("f_left", cfg.f_left), ("f_right", cfg.f_right),
                       ("penalty", cfg.penalty)])
    if cfg.output_path is not None:
        sec("output", [("path", cfg.output_path)])
    return out.getvalue()


def parse_config(text: str) -> RunConfig:
    """Parse the key = value format; unknown sections or keys are rejected."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    kw = {}
    for section in parser.sections():
        if section not in _VALID_SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in _VALID_SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            kw[(section, key)] = value.strip()

    def take(section, key, conv=str, default=None):
        raw = kw.pop((section, key), None)
        if raw is None:
            return default
        try:
            return conv(raw)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"bad value for {key} in [{section}]: {raw!r}") from exc

    fields = dict(
        scheme=take("run", "scheme", int, 1),
        model=take("run", "model", str, "slab16"),
        boundary=take("run", "boundary", str, "periodic"),
        t_final=take("run", "t_final", float, 1.0),
        dt_policy=take("run", "dt_policy", str, "cfl"),
        dt=take("run", "dt", float),
        x_left=take("mesh", "x_left", float, 0.0),
        x_right=take("mesh", "x_right", float, 1.0),
        n=take("mesh", "n", int),
        segments=take("mesh", "segments", _parse_segments),
        sigma_s=take("material", "sigma_s", str, "const 1"),
        sigma_a=take("material", "sigma_a", str, "const 0"),
        source=take("material", "source", str, "const 0"),
        epsilon=take("material", "epsilon", float, 1.0),
        sigma_m=take("material", "sigma_m", float),
        initial_rho=take("initial", "rho", str, "zero"),
        initial_g=take("initial", "g", str, "zero"),
        f_left=take("inflow", "f_left", str, "const 0"),
        f_right=take("inflow", "f_right", str, "const 0"),
        penalty=take("inflow", "penalty", float, 1.0),
        output_path=take("output", "path", str),
    )
    if fields["n"] is None and fields["segments"] is None:
        fields["n"] = 40
    try:
        return RunConfig(**fields)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


TWO_PI = 2.0 * math.pi


def preset(name: str) -> RunConfig:
    """Named experiment configurations."""
    presets = {
        "example1": RunConfig(
            scheme=1, model="slab16", boundary="periodic",
            x_left=0.0, x_right=TWO_PI, n=40,
            sigma_s="const 1", sigma_a="const 0", epsilon=1e-6,
            initial_rho="sin", initial_g="neg_v_cos", t_final=1.0),
        "example2": RunConfig(
            scheme=1, model="slab16", boundary="inflow",
            x_left=0.0, x_right=11.0, n=None,
            segments=((0.0, 1.0, 20), (1.0, 11.0, 20)),
            sigma_s="step 1 0 100", sigma_a="step 1 1 0", epsilon=1.0,
            initial_rho="zero", initial_g="zero",
            f_left="const 5", f_right="const 0", t_final=1.5),
        "example3": RunConfig(
            scheme=1, model="slab16", boundary="inflow",
            x_left=0.0, x_right=1.0, n=40,
            sigma_s="poly 1 0 100", sigma_a="const 0", source="const 1",
            epsilon=1e-2, initial_rho="zero", initial_g="zero",
            f_left="const 0", f_right="const 0", t_final=0.4),
        "example4": RunConfig(
            scheme=1, model="slab16", boundary="inflow",
            x_left=0.0, x_right=1.0, n=40,
            sigma_s="const 1", sigma_a="const 0", epsilon=1e-8,
            initial_rho="zero", initial_g="zero",
            f_left="const 1", f_right="const 0", t_final=0.25),
        "example5": RunConfig(
            scheme=1, model="telegraph", boundary="periodic",
            x_left=-2.0, x_right=2.0, n=160,
            sigma_s="const 1", sigma_a="const 0", epsilon=1e-6,
            initial_rho="riemann 2 1 0", initial_g="zero", t_final=0.15),
        "example5_kinetic": RunConfig(
            scheme=1, model="telegraph", boundary="periodic",
            x_left=-1.0, x_right=1.0, n=80,
            sigma_s="const 1", sigma_a="const 0", epsilon=0.7,
            initial_rho="riemann 2 1 0", initial_g="zero", t_final=0.15),
        "zero": RunConfig(
            scheme=1, model="slab16", boundary="periodic",
            x_left=0.0, x_right=1.0, n=8,
            initial_rho="zero", initial_g="zero", t_final=0.1),
    }
    try:
        return presets[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {sorted(presets)}") from None


PRESET_NAMES = ("example1", "example2", "example3", "example4",
                "example5", "example5_kinetic", "zero")
