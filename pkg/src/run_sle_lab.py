#!/usr/bin/env python3
"""
CLI Interface for sle-lab
Samples radial SLE curves and two-sided pairs, tabulates partition functions,
runs residual checks and compares Monte Carlo conformal-radius moments with
their exact values. Every command writes its outputs plus a run manifest.
"""

import json
import math
import re
import sys
import argparse
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional

import yaml
import pandas as pd
from loguru import logger
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from config_loader import SLEConfig
from drivers import RngSpec, SleParams
from errors import (EXIT_OK, DomainError, NumericalError, SLEError, exit_code_for)
from partition import (CRWeighted, PartitionFn, Spiral, critical_alpha, cr_moment_exact,
                       cr_moment_sided_exact, kappa4_closed_form, partition_table)
from results_io import TOOL_VERSION, RunManifest, write_csv, write_json
from samplers import (estimate_cr_moment_split, martingale_check, sample_two_sided_pair,
                      trace_partition_sle, trace_radial_sle)
from semiclassical import ChordalU, Umu
from verify import (GeneratorSpec, bpz_battery, bracket_battery, interior_points, summarize,
                    zero_kappa_battery)

SCHEMA_VERSION = 1
COMMANDS = ('trace', 'pair', 'partition', 'check', 'crmoment')

_ANGLE_PATTERN = re.compile(r'^\s*([-+]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d*\.?\d+))?\s*$')


def parse_angle(text: str) -> float:
    """Float or a multiple of pi such as 'pi', '-pi/2', '2pi/3', '1.5*pi'"""
    try:
        return float(text)
    except ValueError:
        pass
    match = _ANGLE_PATTERN.match(text.lower())
    if not match:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r}")
    factor, divisor = match.groups()
    if factor in ('', '+'):
        factor = '1'
    elif factor == '-':
        factor = '-1'
    value = float(factor) * math.pi
    return value / float(divisor) if divisor else value


class RunConfig(BaseModel):
    """Serializable parameters of one CLI run"""
    schema_version: int = SCHEMA_VERSION
    command: Literal['trace', 'pair', 'partition', 'check', 'crmoment']
    kappa: float = 2.0
    mu: float = 0.0
    rho: float = 0.0
    alpha: Optional[float] = None
    theta1: float = 0.0
    theta2: Optional[float] = None
    theta: float = math.pi
    T: float = 1.0
    dt: float = 1e-3
    n_points: int = 200
    total_cap: float = 1.0
    eps_step: float = 0.01
    n_sub: int = 1
    grid: int = 256
    closed_form: bool = False
    checks: List[Literal['bpz', 'bracket', 'zero_kappa']] = Field(
        default_factory=lambda: ['bpz', 'bracket', 'zero_kappa'])
    check_points: int = 20
    n: int = 100000
    sided: bool = False
    t_fixed: Optional[float] = None
    seed: int = 0
    out_dir: Optional[str] = None

    @field_validator('schema_version')
    @classmethod
    def _known_schema(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"schema_version {value} is not supported (expected {SCHEMA_VERSION})")
        return value

    @field_validator('dt', 'eps_step')
    @classmethod
    def _positive_step(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("step sizes must be positive")
        return value

    @field_validator('T', 'total_cap')
    @classmethod
    def _non_negative_time(cls, value: float) -> float:
        if not (value >= 0 and math.isfinite(value)):
            raise ValueError("times and capacities must be finite and non-negative")
        return value

    @field_validator('n_points')
    @classmethod
    def _enough_points(cls, value: int) -> int:
        if value < 2:
            raise ValueError("n_points must be at least 2")
        return value

    @field_validator('seed')
    @classmethod
    def _non_negative_seed(cls, value: int) -> int:
        if value < 0:
            raise ValueError("seed must be non-negative")
        return value

    @model_validator(mode='after')
    def _check_domains(self) -> "RunConfig":
        kappa = self.kappa
        if self.command == 'trace' and not 0 <= kappa < 8:
            raise ValueError(f"kappa must lie in [0, 8) for trace (got {kappa:g})")
        if self.command == 'pair' and not 0 <= kappa <= 4:
            raise ValueError(f"kappa must lie in [0, 4] for pair (got {kappa:g})")
        if self.command in ('partition', 'check', 'crmoment') and not 0 < kappa < 8:
            raise ValueError(f"kappa must lie in (0, 8) for {self.command} (got {kappa:g})")
        if self.rho <= -2:
            raise ValueError(f"rho must exceed -2 (got {self.rho:g})")
        if self.alpha is not None and self.alpha >= critical_alpha(kappa):
            raise ValueError(f"alpha must be below 1 - kappa/8 = {critical_alpha(kappa):g} "
                             f"(got {self.alpha:g})")
        if self.command == 'crmoment':
            if self.alpha is None:
                raise ValueError("crmoment needs alpha")
            if not 0 < self.theta < 2 * math.pi:
                raise ValueError("theta must lie in (0, 2pi)")
            if self.n < 2:
                raise ValueError("n must be at least 2")
        if self.command == 'pair' and self.theta2 is None:
            raise ValueError("pair needs theta2")
        if self.command == 'trace' and self.alpha is not None and self.theta2 is None:
            raise ValueError("trace with alpha needs theta2")
        if self.command == 'partition' and self.grid < 2:
            raise ValueError("grid must be at least 2")
        return self

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        text = Path(path).read_text(encoding='utf-8')
        data = json.loads(text) if path.endswith('.json') else yaml.safe_load(text)
        return cls.build(**(data or {}))

    @classmethod
    def build(cls, **values: Any) -> "RunConfig":
        try:
            return cls(**values)
        except ValidationError as e:
            messages = "; ".join(error['msg'].removeprefix("Value error, ") for error in e.errors())
            raise DomainError(f"Invalid run configuration: {messages}") from None


def setup_cli_logging(verbose: bool = False):
    """Setup logging for CLI usage"""
    logger.remove()

    level = "DEBUG" if verbose else "INFO"
    logger.add(
        sys.stdout,
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>",
        level=level
    )


class Runner:
    """Executes one RunConfig and records everything it writes"""

    def __init__(self, cfg: RunConfig, settings: SLEConfig, workers: int = 1):
        self.cfg = cfg
        self.settings = settings
        self.workers = workers
        self.out_dir = Path(cfg.out_dir or settings.output.out_dir)
        self.manifest = RunManifest(command=cfg.command, config=cfg.model_dump(mode='json'),
                                    settings=settings.snapshot())

    @property
    def rng(self) -> RngSpec:
        return RngSpec(self.cfg.seed)

    def _provenance(self) -> Dict[str, Any]:
        return {'version': TOOL_VERSION, 'seed': self.cfg.seed, 'dt': self.cfg.dt,
                'eps_abs': self.settings.drivers.eps_abs}

    def emit_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = write_csv(self.out_dir / name, frame)
        self.manifest.add_output(path)
        return path

    def emit_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = write_json(self.out_dir / name, payload)
        self.manifest.add_output(path)
        return path

    def run(self) -> int:
        handler: Callable[[], int] = getattr(self, f"cmd_{self.cfg.command}")
        logger.info(f"Running {self.cfg.command} -> {self.out_dir}")
        status = EXIT_OK
        try:
            self.emit_json('run_config.json', self.cfg.model_dump(mode='json'))
            status = handler()
            return status
        except BaseException as e:
            status = exit_code_for(e)
            raise
        finally:
            self.manifest.exit_status = status
            self.manifest.finalize(self.out_dir, self.settings.output.manifest_name)

    def _partition(self) -> PartitionFn:
        cfg = self.cfg
        if cfg.alpha is not None:
            return CRWeighted.build(cfg.kappa, cfg.alpha, self.settings.hypergeometric)
        return Spiral(cfg.kappa, cfg.mu)

    def cmd_trace(self) -> int:
        cfg = self.cfg
        engine, drivers = self.settings.engine, self.settings.drivers
        if cfg.alpha is not None:
            pf = self._partition()
            trace = trace_partition_sle(pf, cfg.theta1, cfg.theta2, cfg.T, cfg.dt, cfg.n_points,
                                        self.rng, drivers, engine)
        else:
            trace = trace_radial_sle(SleParams(cfg.kappa, cfg.mu, cfg.rho), cfg.theta1, cfg.theta2,
                                     cfg.T, cfg.dt, cfg.n_points, self.rng, drivers, engine)
        self.emit_csv('trace.csv', trace.to_frame())
        logger.info(f"Trace with {len(trace)} points, tip {trace.tip:.6f}")
        return EXIT_OK

    def cmd_pair(self) -> int:
        cfg = self.cfg
        trace1, trace2, state = sample_two_sided_pair(
            cfg.kappa, cfg.mu, cfg.theta1, cfg.theta2, cfg.total_cap, cfg.eps_step, self.rng,
            n_sub=cfg.n_sub, n_points=cfg.n_points,
            settings=self.settings.drivers, engine=self.settings.engine)
        self.emit_csv('pair_curve1.csv', trace1.to_frame())
        self.emit_csv('pair_curve2.csv', trace2.to_frame())
        self.emit_json('pair_state.json', {**state.to_dict(), **self._provenance()})
        logger.info(f"Pair grown to capacity {cfg.total_cap:g} per curve; "
                    f"final tip images ({state.theta1_t:.6f}, {state.theta2_t:.6f})")
        return EXIT_OK

    def cmd_partition(self) -> int:
        cfg = self.cfg
        pf = self._partition()
        table = partition_table(pf, cfg.grid)
        if cfg.closed_form:
            if not (isinstance(pf, CRWeighted) and cfg.kappa == 4):
                raise DomainError("--closed-form is available for the CR-weighted family at kappa = 4")
            table['closed_form'] = kappa4_closed_form(cfg.alpha, table['theta'].to_numpy())
        self.emit_csv('partition.csv', table)
        logger.info(f"Tabulated {pf.label} on {len(table)} angles")
        return EXIT_OK

    def cmd_check(self) -> int:
        cfg = self.cfg
        verify = self.settings.verify
        points = interior_points(cfg.check_points, seed=cfg.seed)
        pf = self._partition()
        sections: Dict[str, Any] = {}

        if 'bpz' in cfg.checks:
            reports = bpz_battery(pf, points, verify)
            sections['bpz'] = {'label': pf.label, 'expected_F': pf.expected_F(),
                               'summary': summarize(reports, verify.residual_bound, verify.min_order),
                               'reports': [r.to_dict() for r in reports]}
        if 'bracket' in cfg.checks:
            spec = GeneratorSpec.from_partition(pf)
            spec.validate(points)
            reports = bracket_battery(spec, points[:5], verify)
            sections['bracket'] = {'label': spec.label,
                                   'summary': summarize(reports, verify.residual_bound, verify.min_order),
                                   'reports': [r.to_dict() for r in reports]}
        if 'zero_kappa' in cfg.checks:
            variants = [Umu(cfg.mu), ChordalU()]
            reports = zero_kappa_battery(variants, points)
            sections['zero_kappa'] = {'constants': {v.label: v.constant for v in variants},
                                      'summary': summarize(reports, 1e-9, verify.min_order),
                                      'reports': [r.to_dict() for r in reports]}

        self.emit_json('check_report.json', {'checks': sections, 'version': TOOL_VERSION})
        failed = [name for name, section in sections.items() if not section['summary']['all_pass']]
        for name, section in sections.items():
            summary = section['summary']
            logger.info(f"{name}: {summary['count']} residuals, max {summary['max_abs_residual']:.3e}")
        if failed:
            raise NumericalError("Residual checks failed", {'checks': ','.join(failed)})
        return EXIT_OK

    def cmd_crmoment(self) -> int:
        cfg = self.cfg
        mc = self.settings.montecarlo
        u = math.sin(0.25 * cfg.theta) ** 2
        split = estimate_cr_moment_split(cfg.kappa, cfg.alpha, cfg.theta, cfg.n, cfg.dt, self.rng,
                                         self.settings.drivers, workers=self.workers,
                                         progress=mc.progress and sys.stderr.isatty(),
                                         warning_fraction=mc.variance_warning_fraction)
        exact = cr_moment_exact(cfg.kappa, cfg.alpha, u, self.settings.hypergeometric)
        estimate = split.total
        z_score = (estimate.mean - exact) / estimate.stderr if estimate.stderr > 0 else 0.0
        payload: Dict[str, Any] = {
            'kappa': cfg.kappa, 'alpha': cfg.alpha, 'theta': cfg.theta, 'u': u,
            'estimate': estimate.to_dict(), 'exact': exact, 'z_score': z_score,
            'version': TOOL_VERSION,
        }
        if cfg.sided:
            left_exact, right_exact = cr_moment_sided_exact(cfg.kappa, cfg.alpha, u,
                                                            self.settings.hypergeometric)
            payload['sided'] = {'convention': 'left means theta_T = 2pi',
                                'left': split.left.to_dict(), 'left_exact': left_exact,
                                'right': split.right.to_dict(), 'right_exact': right_exact}
        if cfg.t_fixed is not None:
            check = martingale_check(cfg.kappa, cfg.alpha, cfg.theta, cfg.t_fixed, cfg.n,
                                     RngSpec(cfg.seed, stream=1), cfg.dt, self.settings.drivers,
                                     self.settings.hypergeometric, workers=self.workers)
            payload['martingale'] = {'t': cfg.t_fixed, 'estimate': check.to_dict(), 'exact': exact}
        self.emit_json('crmoment.json', payload)
        logger.info(f"E[CR^-alpha]: MC {estimate.mean:.6f} +/- {estimate.stderr:.6f}, "
                    f"exact {exact:.6f} (z={z_score:+.2f})")
        return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--kappa', type=float, default=2.0, help='SLE parameter kappa (default: 2)')
    parser.add_argument('--seed', type=int, default=0, help='Random seed (default: 0)')
    parser.add_argument('--out-dir', help='Output directory (default: config or $SLE_LAB_OUT_DIR)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="sle-lab: locally commuting 2-radial SLE toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Straight radius: kappa = 0 with force point opposite the start
  python run_sle_lab.py trace --kappa 0 --rho 2 --theta1 0 --theta2 pi --T 1

  # Two-sided radial SLE_2 with spiral rate 1
  python run_sle_lab.py pair --kappa 2 --mu 1 --theta1 0 --theta2 pi --total-cap 1 --eps-step 0.01

  # Z_alpha table at kappa = 4 with the closed form alongside
  python run_sle_lab.py partition --kappa 4 --alpha 0.125 --grid 256 --closed-form

  # BPZ residuals of the CR-weighted partition function
  python run_sle_lab.py check --bpz --kappa 3 --alpha 0.4

  # Monte Carlo vs exact conformal-radius moment
  python run_sle_lab.py crmoment --kappa 3 --alpha 0.5 --theta pi --n 100000 --seed 7

  # Re-run a persisted configuration
  python run_sle_lab.py --config results/run_config.json
        """
    )

    parser.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')
    parser.add_argument('--config', help='Run a persisted RunConfig (JSON or YAML) instead of a subcommand')
    parser.add_argument('--settings', help='Numerical settings file (default: config/config.yaml)')
    parser.add_argument('--workers', type=int, help='Worker processes for Monte Carlo (default: config)')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    trace_parser = subparsers.add_parser('trace', help='Sample a single radial SLE trace')
    _add_common(trace_parser)
    trace_parser.add_argument('--mu', type=float, default=0.0, help='Spiraling rate (default: 0)')
    trace_parser.add_argument('--rho', type=float, default=0.0, help='Force-point weight (default: 0)')
    trace_parser.add_argument('--alpha', type=float, help='Use the CR-weighted marginal driver with this alpha')
    trace_parser.add_argument('--theta1', type=parse_angle, default=0.0, help='Start angle (default: 0)')
    trace_parser.add_argument('--theta2', type=parse_angle, help='Force point angle')
    trace_parser.add_argument('--T', type=float, default=1.0, help='Capacity time (default: 1)')
    trace_parser.add_argument('--dt', type=float, default=1e-3, help='Driver time step (default: 1e-3)')
    trace_parser.add_argument('--n-points', type=int, default=200, help='Trace points (default: 200)')

    pair_parser = subparsers.add_parser('pair', help='Sample a two-sided radial SLE pair with spiral')
    _add_common(pair_parser)
    pair_parser.add_argument('--mu', type=float, default=0.0, help='Spiraling rate (default: 0)')
    pair_parser.add_argument('--theta1', type=parse_angle, default=0.0, help='First start angle (default: 0)')
    pair_parser.add_argument('--theta2', type=parse_angle, required=True, help='Second start angle')
    pair_parser.add_argument('--total-cap', type=float, default=1.0, help='Capacity per curve (default: 1)')
    pair_parser.add_argument('--eps-step', type=float, default=0.01, help='Capacity per growth round (default: 0.01)')
    pair_parser.add_argument('--n-sub', type=int, default=1, help='Driver steps per growth round (default: 1)')
    pair_parser.add_argument('--n-points', type=int, default=200, help='Points per trace (default: 200)')

    partition_parser = subparsers.add_parser('partition', help='Tabulate a partition function')
    _add_common(partition_parser)
    family = partition_parser.add_mutually_exclusive_group()
    family.add_argument('--mu', type=float, default=0.0, help='Spiral family with this rate (default)')
    family.add_argument('--alpha', type=float, help='CR-weighted family with this alpha')
    partition_parser.add_argument('--grid', type=int, default=256, help='Angles 2 pi k / grid (default: 256)')
    partition_parser.add_argument('--closed-form', action='store_true', help='Add the kappa = 4 closed form column')

    check_parser = subparsers.add_parser('check', help='Residual checks (BPZ, commutation, kappa = 0)')
    _add_common(check_parser)
    check_parser.add_argument('--mu', type=float, default=0.0, help='Spiral family with this rate (default)')
    check_parser.add_argument('--alpha', type=float, help='CR-weighted family with this alpha')
    check_parser.add_argument('--bpz', action='store_true', help='Radial BPZ residuals')
    check_parser.add_argument('--bracket', action='store_true', help='Commutation bracket residuals')
    check_parser.add_argument('--zero-kappa', action='store_true', help='kappa = 0 system residuals')
    check_parser.add_argument('--points', type=int, default=20, help='Sample points (default: 20)')

    moment_parser = subparsers.add_parser('crmoment', help='Monte Carlo vs exact E[CR^-alpha]')
    _add_common(moment_parser)
    moment_parser.add_argument('--alpha', type=float, required=True, help='Moment exponent')
    moment_parser.add_argument('--theta', type=parse_angle, default=math.pi, help='Initial gap (default: pi)')
    moment_parser.add_argument('--n', type=int, default=100000, help='Paths (default: 100000)')
    moment_parser.add_argument('--dt', type=float, default=1e-3, help='Gap step (default: 1e-3)')
    moment_parser.add_argument('--sided', action='store_true', help='Also report the two sided moments')
    moment_parser.add_argument('--t-fixed', type=float, help='Also run the stopped martingale check at this time')

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {key: value for key, value in vars(args).items()
              if value is not None and key not in ('verbose', 'config', 'settings', 'workers')}
    if 'points' in values:
        values['check_points'] = values.pop('points')
    if args.command == 'check':
        selected = [name for name in ('bpz', 'bracket', 'zero_kappa') if values.pop(name, False)]
        if selected:
            values['checks'] = selected
    return RunConfig.build(**values)


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_cli_logging(args.verbose)

    if not args.command and not args.config:
        parser.print_help()
        return 1

    try:
        cfg = RunConfig.load(args.config) if args.config else config_from_args(args)
        settings = SLEConfig(args.settings)
        settings.setup_logging("DEBUG" if args.verbose else None)
        workers = args.workers or settings.montecarlo.workers
        return Runner(cfg, settings, workers).run()

    except KeyboardInterrupt as e:
        logger.warning("Operation cancelled by user")
        return exit_code_for(e)
    except SLEError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        if args.verbose:
            import traceback
            traceback.print_exc()
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
