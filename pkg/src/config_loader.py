"""
Configuration management for sle-lab
Handles loading and validation of numerical settings from YAML files and environment variables
"""

import os
import sys
from pathlib import Path
from typing import Dict, Any, Optional
from dataclasses import dataclass, asdict

import yaml
from dotenv import load_dotenv
from loguru import logger

from errors import ConfigurationError

OUT_DIR_ENV_VAR = "SLE_LAB_OUT_DIR"


@dataclass(frozen=True)
class EngineSettings:
    """Loewner engine tolerances"""
    rk_tol: float = 1e-10
    tol_gap: float = 1e-8
    tol_swallow: float = 1e-8
    tol_geom: float = 1e-7
    eps_tip: float = 1e-6
    max_substeps: int = 4096


@dataclass(frozen=True)
class DriverSettings:
    """Driving-process discretization settings"""
    max_halvings: int = 40
    drift_fraction: float = 0.1
    noise_fraction: float = 0.1
    eps_abs: float = 1e-5
    t_cap: float = 50.0
    censored_fraction: float = 1e-3
    bridge_correction: bool = True
    block_size: int = 10000


@dataclass(frozen=True)
class HypergeometricSettings:
    """Euler IVP solver and series settings"""
    half_nodes: int = 1024
    u_min: float = 1e-5
    method: str = "DOP853"
    rtol: float = 1e-13
    atol: float = 1e-14
    series_max_terms: int = 200000
    series_tol: float = 1e-16
    degenerate_tol: float = 1e-9


@dataclass(frozen=True)
class VerifySettings:
    """Finite-difference verification settings"""
    fd_step: float = 1e-2
    residual_bound: float = 1e-4
    roundoff_floor: float = 1e-11
    min_order: float = 1.9


@dataclass(frozen=True)
class MonteCarloSettings:
    """Monte Carlo defaults"""
    n: int = 100000
    dt: float = 1e-3
    workers: int = 1
    progress: bool = True
    variance_warning_fraction: float = 0.8


@dataclass(frozen=True)
class OutputSettings:
    """Result output settings"""
    out_dir: str = "results"
    manifest_name: str = "manifest.json"


@dataclass(frozen=True)
class LoggingSettings:
    """Logging configuration settings"""
    level: str = "INFO"
    console_format: str = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>"
    file_format: str = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"
    log_file: str = "logs/sle_lab.log"
    retention: str = "1 week"
    rotation: str = "10 MB"


class SLEConfig:
    """Main configuration class for sle-lab runs"""

    def __init__(self, config_path: Optional[str] = None):
        load_dotenv()
        self.config_path = config_path or self._find_config_file()
        self.config_data = self._load_config()

        self.engine = self._load_engine_settings()
        self.drivers = self._load_driver_settings()
        self.hypergeometric = self._load_hypergeometric_settings()
        self.verify = self._load_verify_settings()
        self.montecarlo = self._load_montecarlo_settings()
        self.output = self._load_output_settings()
        self.logging = self._load_logging_settings()

        self._validate_config()

    def _find_config_file(self) -> str:
        """Find configuration file in standard locations"""
        possible_paths = [
            Path(__file__).parent.parent / "config" / "config.yaml",
            Path.cwd() / "config" / "config.yaml",
            Path.cwd() / "config.yaml",
        ]

        for path in possible_paths:
            if path.exists():
                return str(path)

        logger.warning("No configuration file found, using defaults")
        return ""

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from YAML file"""
        if not self.config_path or not Path(self.config_path).exists():
            logger.debug("Using default configuration")
            return {}

        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                config = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Failed to load configuration from {self.config_path}: {e}")
            raise ConfigurationError(f"Unreadable configuration file {self.config_path}") from e
        logger.debug(f"Loaded configuration from {self.config_path}")
        return config

    def _section(self, name: str) -> Dict[str, Any]:
        section = self.config_data.get(name) or {}
        if not isinstance(section, dict):
            raise ConfigurationError(f"Section '{name}' must be a mapping")
        return section

    def _load_engine_settings(self) -> EngineSettings:
        """Load Loewner engine tolerances from config"""
        cfg = self._section('engine')
        defaults = EngineSettings()
        return EngineSettings(
            rk_tol=float(cfg.get('rk_tol', defaults.rk_tol)),
            tol_gap=float(cfg.get('tol_gap', defaults.tol_gap)),
            tol_swallow=float(cfg.get('tol_swallow', defaults.tol_swallow)),
            tol_geom=float(cfg.get('tol_geom', defaults.tol_geom)),
            eps_tip=float(cfg.get('eps_tip', defaults.eps_tip)),
            max_substeps=int(cfg.get('max_substeps', defaults.max_substeps)),
        )

    def _load_driver_settings(self) -> DriverSettings:
        """Load driving-process settings from config"""
        cfg = self._section('drivers')
        defaults = DriverSettings()
        return DriverSettings(
            max_halvings=int(cfg.get('max_halvings', defaults.max_halvings)),
            drift_fraction=float(cfg.get('drift_fraction', defaults.drift_fraction)),
            noise_fraction=float(cfg.get('noise_fraction', defaults.noise_fraction)),
            eps_abs=float(cfg.get('eps_abs', defaults.eps_abs)),
            t_cap=float(cfg.get('t_cap', defaults.t_cap)),
            censored_fraction=float(cfg.get('censored_fraction', defaults.censored_fraction)),
            bridge_correction=bool(cfg.get('bridge_correction', defaults.bridge_correction)),
            block_size=int(cfg.get('block_size', defaults.block_size)),
        )

    def _load_hypergeometric_settings(self) -> HypergeometricSettings:
        """Load IVP and series settings from config"""
        cfg = self._section('hypergeometric')
        defaults = HypergeometricSettings()
        return HypergeometricSettings(
            half_nodes=int(cfg.get('half_nodes', defaults.half_nodes)),
            u_min=float(cfg.get('u_min', defaults.u_min)),
            method=str(cfg.get('method', defaults.method)),
            rtol=float(cfg.get('rtol', defaults.rtol)),
            atol=float(cfg.get('atol', defaults.atol)),
            series_max_terms=int(cfg.get('series_max_terms', defaults.series_max_terms)),
            series_tol=float(cfg.get('series_tol', defaults.series_tol)),
            degenerate_tol=float(cfg.get('degenerate_tol', defaults.degenerate_tol)),
        )

    def _load_verify_settings(self) -> VerifySettings:
        """Load verification settings from config"""
        cfg = self._section('verify')
        defaults = VerifySettings()
        return VerifySettings(
            fd_step=float(cfg.get('fd_step', defaults.fd_step)),
            residual_bound=float(cfg.get('residual_bound', defaults.residual_bound)),
            roundoff_floor=float(cfg.get('roundoff_floor', defaults.roundoff_floor)),
            min_order=float(cfg.get('min_order', defaults.min_order)),
        )

    def _load_montecarlo_settings(self) -> MonteCarloSettings:
        """Load Monte Carlo defaults from config"""
        cfg = self._section('montecarlo')
        defaults = MonteCarloSettings()
        return MonteCarloSettings(
            n=int(cfg.get('n', defaults.n)),
            dt=float(cfg.get('dt', defaults.dt)),
            workers=int(cfg.get('workers', defaults.workers)),
            progress=bool(cfg.get('progress', defaults.progress)),
            variance_warning_fraction=float(
                cfg.get('variance_warning_fraction', defaults.variance_warning_fraction)),
        )

    def _load_output_settings(self) -> OutputSettings:
        """Load output settings; the environment overrides the default directory"""
        cfg = self._section('output')
        defaults = OutputSettings()
        out_dir = self._get_env_var(OUT_DIR_ENV_VAR) or cfg.get('out_dir', defaults.out_dir)
        return OutputSettings(
            out_dir=str(out_dir),
            manifest_name=str(cfg.get('manifest_name', defaults.manifest_name)),
        )

    def _load_logging_settings(self) -> LoggingSettings:
        """Load logging settings from config"""
        cfg = self._section('logging')
        defaults = LoggingSettings()
        return LoggingSettings(
            level=str(cfg.get('level', defaults.level)).upper(),
            console_format=cfg.get('console_format', defaults.console_format),
            file_format=cfg.get('file_format', defaults.file_format),
            log_file=cfg.get('log_file', defaults.log_file),
            retention=cfg.get('retention', defaults.retention),
            rotation=cfg.get('rotation', defaults.rotation),
        )

    def _get_env_var(self, var_name: str) -> Optional[str]:
        """Get an optional environment variable"""
        value = os.getenv(var_name)
        if value:
            logger.debug(f"Environment override {var_name}={value}")
        return value or None

    def _validate_config(self) -> None:
        """Validate configuration settings"""
        errors = []

        for name in ('rk_tol', 'tol_gap', 'tol_swallow', 'tol_geom', 'eps_tip'):
            if getattr(self.engine, name) <= 0:
                errors.append(f"engine.{name} must be positive")
        if self.engine.max_substeps < 1:
            errors.append("engine.max_substeps must be at least 1")

        if self.drivers.max_halvings < 0:
            errors.append("drivers.max_halvings must be non-negative")
        if not 0 < self.drivers.drift_fraction < 1:
            errors.append("drivers.drift_fraction must be in (0, 1)")
        if not 0 < self.drivers.noise_fraction <= 1:
            errors.append("drivers.noise_fraction must be in (0, 1]")
        if not 0 < self.drivers.eps_abs < 0.5:
            errors.append("drivers.eps_abs must be in (0, 0.5)")
        if self.drivers.t_cap <= 0:
            errors.append("drivers.t_cap must be positive")
        if not 0 <= self.drivers.censored_fraction < 1:
            errors.append("drivers.censored_fraction must be in [0, 1)")
        if self.drivers.block_size < 1:
            errors.append("drivers.block_size must be at least 1")

        if self.hypergeometric.half_nodes < 8:
            errors.append("hypergeometric.half_nodes must be at least 8")
        if not 0 < self.hypergeometric.u_min < 0.25:
            errors.append("hypergeometric.u_min must be in (0, 0.25)")
        if self.hypergeometric.method not in ("RK45", "DOP853"):
            errors.append("hypergeometric.method must be RK45 or DOP853")
        if not 0 < self.hypergeometric.rtol < 1e-6 or self.hypergeometric.atol <= 0:
            errors.append("hypergeometric.rtol must be in (0, 1e-6) and atol positive")

        if self.verify.fd_step <= 0:
            errors.append("verify.fd_step must be positive")

        if self.montecarlo.n < 1:
            errors.append("montecarlo.n must be at least 1")
        if self.montecarlo.dt <= 0:
            errors.append("montecarlo.dt must be positive")
        if self.montecarlo.workers < 1:
            errors.append("montecarlo.workers must be at least 1")

        if self.logging.level not in ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"logging.level '{self.logging.level}' is not a loguru level")

        if errors:
            error_msg = "Configuration validation failed:\n" + "\n".join(f"  - {error}" for error in errors)
            logger.error(error_msg)
            raise ConfigurationError(error_msg)

        logger.debug("Configuration validation passed")

    def setup_logging(self, level: Optional[str] = None) -> None:
        """Setup logging based on configuration"""
        logger.remove()

        logger.add(
            sys.stdout,
            format=self.logging.console_format,
            level=level or self.logging.level
        )

        log_path = Path(self.logging.log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        logger.add(
            log_path,
            format=self.logging.file_format,
            level="DEBUG",
            rotation=self.logging.rotation,
            retention=self.logging.retention
        )

        logger.debug(f"Logging configured - Level: {level or self.logging.level}")

    def snapshot(self) -> Dict[str, Any]:
        """Plain-dict view of every numerical section, for run manifests"""
        return {
            'engine': asdict(self.engine),
            'drivers': asdict(self.drivers),
            'hypergeometric': asdict(self.hypergeometric),
            'verify': asdict(self.verify),
            'montecarlo': asdict(self.montecarlo),
        }

    def __str__(self) -> str:
        """String representation of configuration"""
        return f"""sle-lab Configuration:
  Engine: rk_tol={self.engine.rk_tol}, eps_tip={self.engine.eps_tip}
  Drivers: eps_abs={self.drivers.eps_abs}, t_cap={self.drivers.t_cap}
  Hypergeometric: half_nodes={self.hypergeometric.half_nodes}, u_min={self.hypergeometric.u_min}
  Monte Carlo: n={self.montecarlo.n}, dt={self.montecarlo.dt}, workers={self.montecarlo.workers}
  Output: {self.output.out_dir}
  Logging: level={self.logging.level}
  Config file: {self.config_path or 'None (using defaults)'}"""
