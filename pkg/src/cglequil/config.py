"""
Run configuration: a TOML file with the tables below, every key optional.

.. code-block:: toml

    [solution]
    kind = "bobnev"          # bobnev | solovev | grid
    R = 1.0
    n = 3
    B0 = 100.0
    P0 = 4500.0
    perturb_pressure = 0.0   # adds amplitude * x to P (sensitivity runs)

    [[transform]]            # applied in order
    op = "mhd_to_cgl"        # mhd_to_cgl | scaling | pressure_shift | dilation | isometry
    M = "oscillatory"        # oscillatory | constant | exponential | affine
    psi1 = 200.0
    psi2 = 60.0

    [verify]
    residual = true
    lattice = 10
    residual_tolerance = 1e-5
    flux_radii = [0.2, 0.5, 0.8]
    flux_rows = ["stress", "flux", "current"]
    cylindrical = false

    [solve_gs]
    case = "manufactured"    # manufactured | zero | solovev
    sizes = [33, 65, 129]

    [output]
    dir = "run"
    formats = ["json", "text", "csv"]

Command-line flags override file values.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

SOLUTION_KINDS = ("bobnev", "solovev", "grid")
TRANSFORM_OPS = ("mhd_to_cgl", "scaling", "pressure_shift", "dilation", "isometry")
M_KINDS = ("oscillatory", "constant", "exponential", "affine")
GS_CASES = ("manufactured", "zero", "solovev")
FORMATS = ("json", "text", "csv")


@dataclass(frozen=True)
class SolutionSpec:
    kind: str = "bobnev"
    R: float = 1.0
    n: int = 3
    B0: float = 100.0
    P0: float = 4500.0
    perturb_pressure: float = 0.0
    # Solov'ev parameters (P0 above is reused)
    beta: float = 1.0
    alpha: float = 0.5
    I0: float = 1.0
    c: float = 0.3
    k: float = 3.141592653589793
    # imported grid: CSV path plus linear profiles I = I0 + I1 psi, P = P0 + P1 psi
    path: Optional[str] = None
    I1: float = 0.0
    P1: float = 0.0


@dataclass(frozen=True)
class TransformSpec:
    op: str
    M: str = "oscillatory"
    psi1: float = 200.0
    psi2: float = 60.0
    value: float = 1.0
    a: float = 1.0
    b: float = 0.0
    P1: float = 0.0
    a4: float = 1.0
    a5: float = 1.0
    a6: float = 0.0
    translation: tuple = (0.0, 0.0, 0.0)
    angles: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class VerifySpec:
    residual: bool = True
    lattice: int = 10
    random_points: int = 0
    h: Optional[float] = None
    order: str = "central2"
    residual_tolerance: float = 1e-5
    stress: bool = False
    flux_radii: tuple = ()
    flux_rows: tuple = ("stress", "flux", "current")
    flux_n_theta: int = 64
    flux_n_phi: int = 128
    flux_rel_tol: float = 1e-8
    cylindrical: bool = False
    cylindrical_h: float = 1e-3


@dataclass(frozen=True)
class SolveGsSpec:
    case: str = "manufactured"
    r_range: tuple = (0.5, 1.5)
    z_range: tuple = (-0.5, 0.5)
    sizes: tuple = (33, 65, 129)
    omega: Optional[float] = None
    tolerance: float = 1e-12
    max_iterations: int = 20000
    order_tolerance: float = 0.2


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "run"
    formats: tuple = FORMATS
    samples: int = 16
    slice_n: int = 101


@dataclass(frozen=True)
class RunConfig:
    solution: SolutionSpec = field(default_factory=SolutionSpec)
    transforms: tuple = ()
    verify: VerifySpec = field(default_factory=VerifySpec)
    solve_gs: SolveGsSpec = field(default_factory=SolveGsSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    tolerance_scale: float = 1.0
    threads: int = 1
    seed: int = 0
    source_text: str = ""

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()


def _build(cls, table: dict, where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = set(table) - set(known)
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {', '.join(sorted(unknown))}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in table.items()}
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def _validate(cfg: RunConfig) -> None:
    s = cfg.solution
    if s.kind not in SOLUTION_KINDS:
        raise ConfigError(f"solution.kind must be one of {SOLUTION_KINDS}")
    if s.kind == "bobnev" and not (s.R > 0 and int(s.n) == s.n and s.n >= 1):
        raise ConfigError("bobnev needs R > 0 and integer n >= 1")
    if s.kind == "grid":
        if not s.path:
            raise ConfigError("solution.kind = 'grid' needs solution.path")
        if not Path(s.path).is_file():
            raise ConfigError(f"grid file not found: {s.path}")
    for i, t in enumerate(cfg.transforms):
        if t.op not in TRANSFORM_OPS:
            raise ConfigError(f"transform[{i}].op must be one of {TRANSFORM_OPS}")
        if t.op == "mhd_to_cgl" and t.M not in M_KINDS:
            raise ConfigError(f"transform[{i}].M must be one of {M_KINDS}")
        if t.op == "dilation" and t.a5 == 0:
            raise ConfigError(f"transform[{i}].a5 must be nonzero")
        if len(t.translation) != 3 or len(t.angles) != 3:
            raise ConfigError(f"transform[{i}]: translation and angles need three entries")
    v = cfg.verify
    if v.lattice < 0 or v.random_points < 0:
        raise ConfigError("verify.lattice and verify.random_points must be >= 0")
    if not v.residual_tolerance > 0:
        raise ConfigError("verify.residual_tolerance must be positive")
    if any(r <= 0 for r in v.flux_radii):
        raise ConfigError("verify.flux_radii must be positive")
    if v.order not in ("central2", "central4"):
        raise ConfigError("verify.order must be central2 or central4")
    g = cfg.solve_gs
    if g.case not in GS_CASES:
        raise ConfigError(f"solve_gs.case must be one of {GS_CASES}")
    if any(n < 3 for n in g.sizes) or not g.sizes:
        raise ConfigError("solve_gs.sizes must be >= 3")
    if g.omega is not None and not 0 < g.omega < 2:
        raise ConfigError("solve_gs.omega must lie in (0, 2)")
    if g.r_range[0] <= 0:
        raise ConfigError("solve_gs.r_range must exclude the axis (r > 0)")
    bad = set(cfg.output.formats) - set(FORMATS)
    if bad:
        raise ConfigError(f"unknown output formats: {sorted(bad)}")
    if not cfg.tolerance_scale > 0:
        raise ConfigError("tolerance scale must be positive")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    unknown = set(raw) - {"solution", "transform", "verify", "solve_gs", "output", "run"}
    if unknown:
        raise ConfigError(f"unknown tables: {', '.join(sorted(unknown))}")
    chain = raw.get("transform", [])
    if isinstance(chain, dict):
        chain = [chain]
    run = raw.get("run", {})
    cfg = RunConfig(
        solution=_build(SolutionSpec, raw.get("solution", {}), "solution"),
        transforms=tuple(_build(TransformSpec, t, f"transform.{i}") for i, t in enumerate(chain)),
        verify=_build(VerifySpec, raw.get("verify", {}), "verify"),
        solve_gs=_build(SolveGsSpec, raw.get("solve_gs", {}), "solve_gs"),
        output=_build(OutputSpec, raw.get("output", {}), "output"),
        tolerance_scale=float(run.get("tolerance_scale", 1.0)),
        threads=int(run.get("threads", 1)),
        seed=int(run.get("seed", 0)),
        source_text=text,
    )
    _validate(cfg)
    return cfg


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return parse_config("")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(p.read_text())


def with_overrides(cfg: RunConfig, **overrides: Any) -> RunConfig:
    """Apply non-None command-line overrides and re-validate."""
    kw = {}
    if overrides.get("output") is not None:
        kw["output"] = replace(cfg.output, dir=str(overrides["output"]))
    for key in ("tolerance_scale", "threads", "seed"):
        if overrides.get(key) is not None:
            kw[key] = overrides[key]
    out = replace(cfg, **kw)
    _validate(out)
    return out
