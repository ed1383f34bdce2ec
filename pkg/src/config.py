"""
Configuration loading.

Resolution order for the config file:
- explicit path (CLI --config)
- DONATION_PROTOCOL_CONFIG environment variable (.env honoured)
- the shipped config/production.json
"""
import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, model_validator

from .errors import ConfigError
from .schemas import AccountingUnit, Money, Thresholds, UnitKind

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "DONATION_PROTOCOL_CONFIG"
WORKDIR_ENV_VAR = "DONATION_PROTOCOL_WORKDIR"

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
PRODUCTION_CONFIG = CONFIG_DIR / "production.json"
HARNESS_CONFIG = CONFIG_DIR / "harness.json"

DEFAULT_VIRTUAL_ID = "VIRTUAL"


class Mode(str, Enum):
    PRODUCTION = "production"
    HARNESS = "harness"


class UnitSpec(BaseModel):
    """
    One entry of the receiving-unit registry.
    """
    id: str = Field(..., min_length=1)
    kind: UnitKind
    threshold_pence: Optional[Money] = Field(
        None, description="Required for Local units and the canonical Head Office unit"
    )


class Config(BaseModel):
    mode: Mode = Mode.PRODUCTION
    year: int = 2002
    head_office_id: str = "HO"
    recordable_pence: Money = 20000
    national_pence: Money = 500000
    units: List[UnitSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_registry(self) -> "Config":
        ids = [u.id for u in self.units]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValueError(f"duplicate unit ids: {dupes}")

        virtual = [u for u in self.units if u.kind == UnitKind.VIRTUAL]
        if len(virtual) > 1:
            raise ValueError("exactly one Virtual unit is allowed per ledger")
        if not virtual:
            self.units.append(UnitSpec(id=DEFAULT_VIRTUAL_ID, kind=UnitKind.VIRTUAL,
                                       threshold_pence=self.national_pence))
        elif virtual[0].threshold_pence not in (None, self.national_pence):
            raise ValueError("the Virtual unit must carry the national threshold")

        head_office = [u for u in self.units if u.kind == UnitKind.HEAD_OFFICE]
        if head_office:
            canonical = next((u for u in head_office if u.id == self.head_office_id), None)
            if canonical is None:
                raise ValueError(
                    f"HeadOffice units present but no canonical unit '{self.head_office_id}'"
                )
            if canonical.threshold_pence is None:
                raise ValueError(f"canonical Head Office unit '{self.head_office_id}' needs a threshold")

        for u in self.units:
            if u.kind == UnitKind.LOCAL and u.threshold_pence is None:
                raise ValueError(f"Local unit '{u.id}' needs a threshold")

        thresholds = [u.threshold for u in self.canonical_units() if u.kind != UnitKind.VIRTUAL]
        if thresholds:
            low = min(thresholds)
            if not self.recordable_pence < low < self.national_pence:
                raise ValueError(
                    f"thresholds must satisfy recordable < unit < national, got "
                    f"{self.recordable_pence} / {low} / {self.national_pence}"
                )
            if self.mode == Mode.HARNESS and len(set(thresholds)) != 1:
                raise ValueError("harness mode requires all unit thresholds to be equal")
        return self

    def canonical_units(self) -> List[AccountingUnit]:
        """Canonical units: the Head Office unit, every Local unit and the Virtual unit."""
        out = []
        for u in self.units:
            if u.kind == UnitKind.HEAD_OFFICE and u.id != self.head_office_id:
                continue
            threshold = self.national_pence if u.kind == UnitKind.VIRTUAL else u.threshold_pence
            out.append(AccountingUnit(id=u.id, kind=u.kind, threshold=threshold))
        return out

    @property
    def virtual_unit_id(self) -> str:
        return next(u.id for u in self.units if u.kind == UnitKind.VIRTUAL)

    def thresholds(self) -> Thresholds:
        return Thresholds(
            recordable=self.recordable_pence,
            unit_threshold={u.id: u.threshold for u in self.canonical_units()
                            if u.kind != UnitKind.VIRTUAL},
            national=self.national_pence,
        )

    def with_unit_thresholds(self, threshold_pence: int,
                             national_pence: Optional[int] = None) -> "Config":
        """Copy with every receiving unit set to one threshold (harness perturbations)."""
        data = self.model_dump(mode="json")
        for u in data["units"]:
            if u["kind"] != UnitKind.VIRTUAL.value:
                u["threshold_pence"] = threshold_pence
            else:
                u["threshold_pence"] = None
        if national_pence is not None:
            data["national_pence"] = national_pence
        return parse_config(data)


def parse_config(data: dict) -> Config:
    try:
        return Config.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def resolve_config_path(path: Union[str, Path, None] = None) -> Path:
    load_dotenv()
    if path:
        return Path(path)
    env_path = os.getenv(CONFIG_ENV_VAR)
    if env_path:
        logger.debug("[CONFIG] Using %s=%s", CONFIG_ENV_VAR, env_path)
        return Path(env_path)
    return PRODUCTION_CONFIG


def load_config(path: Union[str, Path, None] = None) -> Config:
    config_path = resolve_config_path(path)
    try:
        data = json.loads(config_path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {config_path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{config_path}: malformed JSON ({e})") from e
    config = parse_config(data)
    logger.info("[CONFIG] Loaded %s config from %s (%d units)",
                config.mode.value, config_path, len(config.units))
    return config


def harness_config() -> Config:
    return load_config(HARNESS_CONFIG)


def resolve_workdir(path: Union[str, Path, None] = None) -> Path:
    load_dotenv()
    return Path(path or os.getenv(WORKDIR_ENV_VAR) or "reports")
