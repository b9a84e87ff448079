# Configuration and environment loading utilities

import hashlib
import json
import logging
import os
import re
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from sympy import primerange

from app.core.errors import ConfigError

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)


class Settings(BaseModel):
    registry: str = Field(default_factory=lambda: os.getenv("WORKBENCH_REGISTRY", "runs.jsonl"))
    log_level: str = Field(default_factory=lambda: os.getenv("WORKBENCH_LOG_LEVEL", "INFO"))
    exhaustive_budget: int = Field(default_factory=lambda: int(os.getenv("WORKBENCH_EXHAUSTIVE_BUDGET", "64")))
    workers: int = Field(default_factory=lambda: int(os.getenv("WORKBENCH_WORKERS", "1")))


def get_settings() -> Settings:
    if not hasattr(get_settings, "settings"):
        get_settings.settings = Settings()
    return get_settings.settings


# ================================
# RUN CONFIG
# ================================

class Command(str, Enum):
    SEARCH = "search"
    COUNT = "count"
    THRESHOLD = "threshold"
    ANALYZE = "analyze"
    COVER = "cover"
    WALK = "walk"
    EXPORT_CNF = "export-cnf"


class ReportFormat(str, Enum):
    CSV = "csv"
    JSONL = "jsonl"
    PRETTY = "pretty"


class RunConfig(BaseModel):
    """One validated command invocation; unknown keys are rejected"""
    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    command: Command
    ground: str = Field("int:1..12", description="int:LO..HI, fp:P or qgrid:MAXNUM/MAXDEN")
    template: str = Field("quad", description="builtin name or shipped library name")
    template_file: Optional[str] = None
    k: Optional[int] = Field(None, ge=1, description="term count parameter for quad_ap")
    colors: int = Field(2, ge=1, le=64)
    method: str = Field("sat", description="exhaustive, sat or sat_external")
    coloring: str = Field("random", description="random, mono, residue or file:PATH")
    seed: int = 0
    limit: Optional[int] = Field(None, ge=1)
    distinct: bool = False

    width: int = Field(2, ge=1, description="syndetic width bound f")
    thick_generators: int = Field(0, ge=0, description="generator set size for the thick test family, 0 = whole ambient")
    thick_progression: int = Field(0, ge=0, description="geometric progression length added to the family")

    N: int = Field(6, description="walk length")
    s: Optional[int] = None
    r: int = Field(1, ge=1)
    alpha_floor: str = "1/1000"
    restarts: int = Field(0, ge=0)
    walk: str = Field("general", description="general or two-class")

    max_n: Optional[int] = None
    min_n: Optional[int] = None
    primes: Optional[str] = Field(None, description="A..B or a comma list")
    bisect: bool = True

    report: Optional[str] = None
    format: ReportFormat = ReportFormat.PRETTY
    trace_out: Optional[str] = None
    cnf_out: Optional[str] = None
    model_file: Optional[str] = None
    solver_cmd: Optional[str] = None
    registry: Optional[str] = None
    expect: Optional[str] = Field(None, description="avoiding or forced")
    workers: int = Field(default_factory=lambda: get_settings().workers, ge=1)
    max_decisions: Optional[int] = Field(None, ge=1)

    @field_validator("method")
    @classmethod
    def check_method(cls, v: str) -> str:
        v = v.lower().replace("-", "_")
        if v not in ("exhaustive", "sat", "sat_external"):
            raise ValueError(f"unknown method '{v}'")
        return v

    @field_validator("ground")
    @classmethod
    def check_ground(cls, v: str) -> str:
        if not re.match(r"^(int:-?\d+\.\.-?\d+|fp:\d+|qgrid:\d+/\d+)$", v.strip()):
            raise ValueError(f"unrecognised ground spec '{v}'")
        return v.strip()

    @field_validator("alpha_floor")
    @classmethod
    def check_alpha(cls, v: str) -> str:
        try:
            value = Fraction(v)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"'{v}' is not a rational number")
        if value <= 0:
            raise ValueError("alpha_floor must be positive")
        return str(value)

    @field_validator("expect")
    @classmethod
    def check_expect(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and v.lower() not in ("avoiding", "forced"):
            raise ValueError("expect must be 'avoiding' or 'forced'")
        return v.lower() if v else v

    @field_validator("walk")
    @classmethod
    def check_walk(cls, v: str) -> str:
        if v not in ("general", "two-class"):
            raise ValueError("walk must be 'general' or 'two-class'")
        return v

    @model_validator(mode="after")
    def check_template_params(self) -> "RunConfig":
        if self.template.lower() == "quad_ap" and self.k is None and not self.template_file:
            raise ValueError("template quad_ap needs k")
        if self.k is not None and self.template.lower() != "quad_ap":
            raise ValueError("k only applies to template quad_ap")
        if self.primes is not None:
            parse_primes(self.primes)
        return self

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.alpha_floor)


def parse_primes(spec: str) -> List[int]:
    """`A..B` for every prime in [A, B], or `p1,p2,...`"""
    spec = spec.strip()
    if m := re.fullmatch(r"(\d+)\.\.(\d+)", spec):
        return list(primerange(int(m.group(1)), int(m.group(2)) + 1))
    try:
        return [int(p) for p in spec.split(",") if p.strip()]
    except ValueError:
        raise ValueError(f"bad prime list '{spec}'")


def _read_config_file(path: str) -> Dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}")
    try:
        data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as e:
        raise ConfigError("config", f"cannot parse {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a mapping")
    return data


def parse_config(file: Optional[str] = None, flags: Optional[Dict[str, Any]] = None) -> RunConfig:
    """File values first, explicit (non-None) flags override them"""
    values: Dict[str, Any] = _read_config_file(file) if file else {}
    values.update({key: value for key, value in (flags or {}).items() if value is not None})
    try:
        return RunConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        field_path = ".".join(str(part) for part in error["loc"]) or "config"
        raise ConfigError(field_path, error["msg"])


def serialize_config(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_digest(config: RunConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()
