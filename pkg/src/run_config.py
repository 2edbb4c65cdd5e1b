"""
Run configuration and report schemas.

Configs are JSON documents with a required ``schema_version``. Parse errors
carry the JSON line; schema errors carry the dotted field path.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing_extensions import Literal

from .catalog import catalog_entry
from .errors import ConfigError, ParameterError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
KNOWN_CHECKS = ("conservation", "constraint", "commutation", "identities", "chasles", "completeness", "return_map")

DEFAULT_TOLERANCES: Dict[str, float] = {
    "conservation": 1e-6,
    "constraint": 1e-10,
    "commutation": 1e-9,
    "identities": 1e-10,
    "chasles": 1e-6,
    "return_map": 1e-6,
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelBlock(_Strict):
    key: str
    parameters: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("key")
    @classmethod
    def _known(cls, value: str) -> str:
        try:
            catalog_entry(value)
        except ParameterError as e:
            raise ValueError(str(e)) from None
        return value


class ExplicitState(_Strict):
    x: List[float]
    p: List[float]


class StatesBlock(_Strict):
    count: int = Field(default=2, ge=0)
    explicit: List[ExplicitState] = Field(default_factory=list)


class IntegrationBlock(_Strict):
    dt: float = Field(gt=0)
    t_end: float = Field(gt=0)
    sample_every: int = Field(default=1, ge=1)
    newton_tol: float = Field(default=1e-12, gt=0)


class ExtraIntegral(_Strict):
    """A declared function tracked by the conservation check (coordinate or momentum component)."""

    name: str
    kind: Literal["position", "momentum"]
    index: int = Field(ge=0)


class VerificationBlock(_Strict):
    checks: Optional[List[str]] = None
    tolerances: Dict[str, float] = Field(default_factory=dict)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    sample_points: int = Field(default=20, ge=1)
    extra_integrals: List[ExtraIntegral] = Field(default_factory=list)

    @field_validator("checks")
    @classmethod
    def _known_checks(cls, value: Optional[List[str]]) -> Optional[List[str]]:
        if value is not None:
            unknown = [c for c in value if c not in KNOWN_CHECKS]
            if unknown:
                raise ValueError(f"unknown checks {unknown}; known: {list(KNOWN_CHECKS)}")
        return value

    @field_validator("tolerances")
    @classmethod
    def _positive(cls, value: Dict[str, float]) -> Dict[str, float]:
        for name, tol in value.items():
            if not tol > 0:
                raise ValueError(f"tolerance {name!r} must be > 0")
        return value

    def tolerance(self, check: str) -> float:
        return self.tolerances.get(check, DEFAULT_TOLERANCES.get(check, 1e-9))


class OutputBlock(_Strict):
    directory: str = "runs"
    write_trajectories: bool = True


class RunConfig(_Strict):
    schema_version: Literal[1]
    name: str = "run"
    model: ModelBlock
    states: StatesBlock = Field(default_factory=StatesBlock)
    integration: Optional[IntegrationBlock] = None
    verification: VerificationBlock = Field(default_factory=VerificationBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    @model_validator(mode="after")
    def _checks_need_integration(self) -> "RunConfig":
        needs = {"conservation", "constraint", "chasles"}
        checks = set(self.verification.checks or [])
        if checks & needs and self.integration is None:
            raise ValueError(f"checks {sorted(checks & needs)} need an integration block")
        return self

    def resolved_checks(self) -> List[str]:
        """Explicit checks, or the catalog defaults (trajectory checks only with an integration block)."""
        if self.verification.checks is not None:
            return list(self.verification.checks)
        defaults = list(catalog_entry(self.model.key).checks)
        if self.integration is None:
            defaults = [c for c in defaults if c not in ("conservation", "constraint", "chasles")]
        return defaults


class Verdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    check: str
    label: str
    measured: float
    threshold: float
    passed: bool

    @model_validator(mode="after")
    def _consistent(self) -> "Verdict":
        if self.passed != (self.measured <= self.threshold):
            raise ValueError("verdict pass must match measured <= threshold")
        return self

    @classmethod
    def of(cls, check: str, label: str, measured: float, threshold: float) -> "Verdict":
        return cls(check=check, label=label, measured=float(measured), threshold=float(threshold),
                   passed=bool(measured <= threshold))


class ReportBundle(BaseModel):
    """Deterministic report: verdicts, environment stamp (no timestamps) and the config echo."""

    model_config = ConfigDict(frozen=True)

    name: str
    version: str
    seed: int
    model: str
    verdicts: List[Verdict]
    artifacts: Dict[str, str] = Field(default_factory=dict)
    config: Dict[str, Any]
    errors: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(v.passed for v in self.verdicts)

    @property
    def failures(self) -> List[Verdict]:
        return [v for v in self.verdicts if not v.passed]


def _field_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """
    Raises:
        ConfigError: malformed JSON (with line) or schema violation (with field path)
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", line=e.lineno) from e
    if isinstance(raw, dict) and raw.get("schema_version") not in (None, SCHEMA_VERSION):
        raise ConfigError(f"{source}: unsupported schema_version {raw.get('schema_version')!r}",
                          field="schema_version")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        path = _field_path(first)
        raise ConfigError(f"{source}: {path}: {first['msg']}", field=path) from e


def load_config(path: Union[str, Path]) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    logger.debug("loaded config %s", p)
    return parse_config(text, str(p))
