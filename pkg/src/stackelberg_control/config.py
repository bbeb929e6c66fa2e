"""
Problem configuration: flat `[section]` blocks of `key = value` lines.

    [geometry]
    T = 1.0
    ell = linear          # constant | linear | sinusoidal
    gamma = 0.2

    [regions]
    O = 0.3, 0.8

Unknown sections or keys, malformed values and out-of-range values are all
collected and reported together, each with the line it came from.
"""
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError
from .pde.coupling import FAMILIES
from .solvers.context import SolverOptions

ELL_FAMILIES = ("constant", "linear", "sinusoidal")
PROFILES = ("zero", "sine", "bump")
TARGET_PROFILES = ("constant", "sine", "ramp")
COMMANDS = ("check-weights", "simulate", "nash", "control", "observability")


def _key(name: str, kind: str, **extra) -> dict:
    return dict(key=name, kind=kind, **extra)


@dataclass(frozen=True)
class GeometryConfig:
    T: float = field(default=1.0, metadata=_key("T", "float", low=0.0))
    ell: str = field(default="linear", metadata=_key("ell", "choice", choices=ELL_FAMILIES))
    gamma: float = field(default=0.2, metadata=_key("gamma", "float"))
    drift_bound: Optional[float] = field(default=None, metadata=_key("drift_bound", "auto_float"))


@dataclass(frozen=True)
class CoefficientConfig:
    alpha: float = field(default=0.5, metadata=_key("alpha", "float", low=0.0))
    K: Optional[float] = field(default=None, metadata=_key("K", "auto_float", low=0.0, high=1.0, closed_high=True))


@dataclass(frozen=True)
class CouplingConfig:
    family: str = field(default="linear", metadata=_key("family", "choice", choices=FAMILIES))
    c11: float = field(default=0.0, metadata=_key("c11", "float"))
    c12: float = field(default=0.0, metadata=_key("c12", "float"))
    c21: float = field(default=0.0, metadata=_key("c21", "float"))
    c22: float = field(default=0.0, metadata=_key("c22", "float"))
    a11: float = field(default=0.5, metadata=_key("a11", "float"))
    a12: float = field(default=0.3, metadata=_key("a12", "float"))
    a21: float = field(default=0.5, metadata=_key("a21", "float"))
    a22: float = field(default=0.3, metadata=_key("a22", "float"))


@dataclass(frozen=True)
class RegionsConfig:
    O: Tuple[float, float] = field(default=(0.3, 0.8), metadata=_key("O", "interval"))
    O1: Tuple[float, float] = field(default=(0.2, 0.4), metadata=_key("O1", "interval"))
    O2: Tuple[float, float] = field(default=(0.6, 0.8), metadata=_key("O2", "interval"))
    Od: Tuple[float, float] = field(default=(0.45, 0.55), metadata=_key("Od", "interval"))


@dataclass(frozen=True)
class FollowerSection:
    alpha1: float = field(default=1.0, metadata=_key("alpha1", "float", low=0.0))
    alpha2: float = field(default=1.0, metadata=_key("alpha2", "float", low=0.0))
    mu1: float = field(default=10.0, metadata=_key("mu1", "float", low=0.0))
    mu2: float = field(default=10.0, metadata=_key("mu2", "float", low=0.0))
    target1_1: float = field(default=0.0, metadata=_key("target1_1", "float"))
    target1_2: float = field(default=0.0, metadata=_key("target1_2", "float"))
    target2_1: float = field(default=0.0, metadata=_key("target2_1", "float"))
    target2_2: float = field(default=0.0, metadata=_key("target2_2", "float"))
    target_profile: str = field(default="constant", metadata=_key("target_profile", "choice", choices=TARGET_PROFILES))


@dataclass(frozen=True)
class InitialConfig:
    profile: str = field(default="sine", metadata=_key("profile", "choice", choices=PROFILES))
    amplitude: float = field(default=0.05, metadata=_key("amplitude", "float", low=0.0, closed_low=True))


@dataclass(frozen=True)
class WeightsConfig:
    s: float = field(default=1e-3, metadata=_key("s", "float", low=0.0))
    s0: float = field(default=1e-3, metadata=_key("s0", "float", low=0.0))
    lam: Optional[float] = field(default=None, metadata=_key("lambda", "auto_float", low=0.0))
    alpha_prime: Optional[float] = field(default=None, metadata=_key("alpha_prime", "auto_float", low=0.0, high=1.0))
    beta_prime: Optional[float] = field(default=None, metadata=_key("beta_prime", "auto_float", low=0.0, high=1.0))
    delta_frac: float = field(default=0.01, metadata=_key("delta_frac", "float", low=0.0, high=0.1))
    obs_exponent: float = field(default=28.0, metadata=_key("obs_exponent", "float", low=0.0))
    weight_cap: float = field(default=1e12, metadata=_key("weight_cap", "float", low=1.0))
    n_quad: int = field(default=32, metadata=_key("n_quad", "int", low=15))


@dataclass(frozen=True)
class DiscretizationConfig:
    n_x: int = field(default=64, metadata=_key("n_x", "int", low=1))
    n_t: int = field(default=128, metadata=_key("n_t", "int", low=0))


@dataclass(frozen=True)
class SweepConfig:
    command: str = field(default="nash", metadata=_key("command", "choice", choices=COMMANDS))
    parameter: str = field(default="follower.mu1", metadata=_key("parameter", "str"))
    values: Tuple[float, ...] = field(default=(), metadata=_key("values", "floats"))


def _solver_metadata() -> Dict[str, dict]:
    kinds = {}
    for f in fields(SolverOptions):
        if f.type in (bool, "bool"):
            kinds[f.name] = _key(f.name, "bool")
        elif f.type in (int, "int"):
            kinds[f.name] = _key(f.name, "int")
        else:
            kinds[f.name] = _key(f.name, "float")
    return kinds


@dataclass(frozen=True)
class ProblemConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    coefficient: CoefficientConfig = field(default_factory=CoefficientConfig)
    coupling: CouplingConfig = field(default_factory=CouplingConfig)
    regions: RegionsConfig = field(default_factory=RegionsConfig)
    follower: FollowerSection = field(default_factory=FollowerSection)
    initial: InitialConfig = field(default_factory=InitialConfig)
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def with_value(self, dotted: str, value) -> "ProblemConfig":
        """Copy with one `section.key` replaced; the value is given as text or number"""
        section_name, _, key = dotted.partition(".")
        meta = _meta(section_name, key)
        if meta["kind"] == "int" and not isinstance(value, str) and float(value).is_integer():
            value = int(value)
        text = value if isinstance(value, str) else _emit_value(meta, value)
        lines = emit_config(self).splitlines()
        out, current, done = [], None, False
        for line in lines:
            stripped = line.strip()
            if stripped.startswith("["):
                current = stripped[1:-1]
            elif current == section_name and stripped.split("=", 1)[0].strip() == key:
                line = f"{key} = {text}"
                done = True
            out.append(line)
        if not done:
            raise ConfigError([f"unknown sweep parameter '{dotted}'"])
        return parse_config("\n".join(out) + "\n")


SECTIONS = {f.name: f.default_factory for f in fields(ProblemConfig)}


def _section_meta(section: str) -> Dict[str, Tuple[str, dict]]:
    """config key -> (attribute name, metadata) for one section"""
    if section == "solver":
        return {k: (k, m) for k, m in _solver_metadata().items()}
    return {f.metadata["key"]: (f.name, dict(f.metadata)) for f in fields(SECTIONS[section])}


def _meta(section: str, key: str) -> dict:
    if section not in SECTIONS or key not in _section_meta(section):
        raise ConfigError([f"unknown sweep parameter '{section}.{key}'"])
    return _section_meta(section)[key][1]


def _parse_float(text: str) -> float:
    value = float(text)
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"non-finite number '{text}'")
    return value


def _parse_value(meta: dict, text: str):
    kind = meta["kind"]
    if kind == "float":
        return _parse_float(text)
    if kind == "int":
        return int(text)
    if kind == "bool":
        lowered = text.lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise ValueError(f"expected true/false, got '{text}'")
    if kind == "auto_float":
        return None if text.lower() == "auto" else _parse_float(text)
    if kind == "interval":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected 'lo, hi', got '{text}'")
        return _parse_float(parts[0]), _parse_float(parts[1])
    if kind == "floats":
        return tuple(_parse_float(p.strip()) for p in text.split(",") if p.strip())
    if kind == "choice":
        if text not in meta["choices"]:
            raise ValueError(f"expected one of {', '.join(meta['choices'])}, got '{text}'")
        return text
    return text


def _check_range(meta: dict, value) -> Optional[str]:
    if value is None or meta["kind"] not in ("float", "int", "auto_float"):
        return None
    low, high = meta.get("low"), meta.get("high")
    if low is not None:
        if meta.get("closed_low") and value < low:
            return f"must be >= {low}"
        if not meta.get("closed_low") and value <= low:
            return f"must be > {low}"
    if high is not None:
        if meta.get("closed_high") and value > high:
            return f"must be <= {high}"
        if not meta.get("closed_high") and value >= high:
            return f"must be < {high}"
    return None


def _loc(line: Optional[int]) -> str:
    return f"line {line}: " if line is not None else ""


def parse_config(text: str) -> ProblemConfig:
    """
    Parse and validate a configuration document

    Raises:
        ConfigError: every problem found, each with its line locator
    """
    errors: List[str] = []
    values: Dict[str, Dict[str, object]] = {name: {} for name in SECTIONS}
    lines_of: Dict[Tuple[str, str], int] = {}
    section: Optional[str] = None
    in_unknown = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            in_unknown = section not in SECTIONS
            if in_unknown:
                errors.append(f"line {lineno}: unknown section [{section}]")
                section = None
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got '{line}'")
            continue
        key, _, value_text = (part.strip() for part in line.partition("="))
        if section is None:
            if not in_unknown:
                errors.append(f"line {lineno}: key '{key}' outside a known section")
            continue
        meta_map = _section_meta(section)
        if key not in meta_map:
            errors.append(f"line {lineno}: unknown key '{key}' in [{section}]")
            continue
        attr, meta = meta_map[key]
        if attr in values[section]:
            errors.append(f"line {lineno}: duplicate key '{key}' in [{section}]")
            continue
        try:
            value = _parse_value(meta, value_text)
        except ValueError:
            errors.append(f"line {lineno}: malformed value '{value_text}' for {section}.{key}")
            continue
        problem = _check_range(meta, value)
        if problem:
            errors.append(f"line {lineno}: {section}.{key} = {value_text} {problem}")
            continue
        values[section][attr] = value
        lines_of[(section, attr)] = lineno

    sections = {}
    for name, factory in SECTIONS.items():
        try:
            sections[name] = replace(factory(), **values[name])
        except Exception as e:
            errors.append(f"[{name}]: {e}")
            sections[name] = factory()
    cfg = ProblemConfig(**sections)
    errors.extend(_cross_checks(cfg, lines_of))
    if errors:
        raise ConfigError(errors)
    return cfg


def _cross_checks(cfg: ProblemConfig, lines_of: Dict[Tuple[str, str], int]) -> List[str]:
    errors = []

    def at(section, attr):
        return _loc(lines_of.get((section, attr)))

    if cfg.coefficient.alpha >= 1.0:
        errors.append(f"{at('coefficient', 'alpha')}coefficient.alpha = {cfg.coefficient.alpha}: "
                      f"strongly degenerate unsupported (need alpha < 1)")
    regions = cfg.regions
    for attr in ("O", "O1", "O2", "Od"):
        lo, hi = getattr(regions, attr)
        if not 0.0 < lo < hi < 1.0:
            errors.append(f"{at('regions', attr)}regions.{attr} = ({lo}, {hi}) must satisfy 0 < lo < hi < 1")
    if max(regions.Od[0], regions.O[0]) >= min(regions.Od[1], regions.O[1]):
        errors.append(f"{at('regions', 'Od')}observation region Od must intersect the leader region O "
                      f"(the hierarchy's hypothesis Od meets O)")
    w = cfg.weights
    if w.s < w.s0:
        errors.append(f"{at('weights', 's')}weights.s = {w.s} must be >= s0 = {w.s0}")
    a_p, b_p = w.alpha_prime, w.beta_prime
    if (a_p is None) != (b_p is None):
        errors.append(f"{at('weights', 'alpha_prime')}alpha_prime and beta_prime must be given together")
    elif a_p is not None and not a_p < b_p:
        errors.append(f"{at('weights', 'alpha_prime')}alpha_prime must be < beta_prime")
    if cfg.geometry.ell != "constant" and abs(cfg.geometry.gamma) >= 1.0:
        errors.append(f"{at('geometry', 'gamma')}|gamma| must be < 1 so that ell stays positive")
    if cfg.discretization.n_x < 2:
        errors.append(f"{at('discretization', 'n_x')}discretization.n_x must be at least 2")
    if cfg.discretization.n_t < 1:
        errors.append(f"{at('discretization', 'n_t')}discretization.n_t must be at least 1")
    s = cfg.solver
    if not 0.0 < s.omega <= 1.0:
        errors.append(f"{at('solver', 'omega')}solver.omega must lie in (0, 1]")
    for name in ("tol_nash", "tol_outer", "eps_pen", "tol_cg", "tol_newton"):
        if not getattr(s, name) > 0.0:
            errors.append(f"{at('solver', name)}solver.{name} must be positive")
    for name in ("max_outer", "max_outer_control", "max_cg", "max_inner", "n_directions", "n_samples"):
        if getattr(s, name) < 1:
            errors.append(f"{at('solver', name)}solver.{name} must be at least 1")
    if s.seed < 0:
        errors.append(f"{at('solver', 'seed')}solver.seed must be non-negative")
    sweep = cfg.sweep
    section_name, _, key = sweep.parameter.partition(".")
    if section_name not in SECTIONS or key not in _section_meta(section_name):
        errors.append(f"{at('sweep', 'parameter')}sweep.parameter '{sweep.parameter}' is not a known section.key")
    return errors


def _emit_value(meta: dict, value) -> str:
    kind = meta["kind"]
    if value is None:
        return "auto"
    if kind == "bool":
        return "true" if value else "false"
    if kind == "interval":
        return f"{format(float(value[0]), '.17g')}, {format(float(value[1]), '.17g')}"
    if kind == "floats":
        return ", ".join(format(float(v), ".17g") for v in value)
    if kind in ("float", "auto_float"):
        return format(float(value), ".17g")
    return str(value)


def emit_config(cfg: ProblemConfig) -> str:
    """Full document with every key; parse_config(emit_config(cfg)) == cfg"""
    out = []
    for name in SECTIONS:
        section = getattr(cfg, name)
        out.append(f"[{name}]")
        for key, (attr, meta) in _section_meta(name).items():
            out.append(f"{key} = {_emit_value(meta, getattr(section, attr))}")
        out.append("")
    return "\n".join(out)
