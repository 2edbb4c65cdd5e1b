"""
Run orchestrator.

Builds the configured model, integrates every initial state concurrently
(worker threads), evaluates the requested checks and writes the artifacts:
per-state trajectory CSVs, a deterministic ``report.json`` and a separate
``run_stamp.json`` holding the wall-clock timestamp.
"""

import asyncio
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .catalog import EllipsoidParams, build_model, catalog_entry, chasles_tangency
from .entropy_lab import sol_return_map
from .errors import GeodesicLabError
from .geometry_core import CotangentState, FirstIntegral, GeodesicModel, project_to_phase_space, sample_states
from .integrator import StepConfig, TrajectoryRecord, integrate
from .poisson_verify import FunctionFamily, commutation_residual, ddim_dind
from .run_config import ReportBundle, RunConfig, Verdict
from .utils import atomic_write_text_async, dumps_deterministic, resolve_output_dir

logger = logging.getLogger(__name__)


def _extra_integral(name: str, kind: str, index: int) -> FirstIntegral:
    if kind == "position":
        return FirstIntegral(name, lambda x, p: x[index], degree=1)
    return FirstIntegral(name, lambda x, p: p[index], degree=1)


def initial_states(model: GeodesicModel, config: RunConfig, rng: np.random.Generator) -> List[CotangentState]:
    states = []
    for entry in config.states.explicit:
        if len(entry.x) != model.dim or len(entry.p) != model.dim:
            raise GeodesicLabError(f"explicit state needs {model.dim} coordinates", {"field": "states.explicit"})
        states.append(project_to_phase_space(model, entry.x, entry.p))
    states.extend(sample_states(model, config.states.count, rng))
    return states


class RunOrchestrator:
    """One config, one model; trajectories run in parallel, checks sequentially."""

    def __init__(self, config: RunConfig, output_dir: Optional[Path] = None):
        self.config = config
        self.output_dir = Path(output_dir) if output_dir is not None else resolve_output_dir(config.output.directory)
        self.rng = np.random.default_rng(config.verification.seed)
        self.model: Optional[GeodesicModel] = None
        self.records: List[TrajectoryRecord] = []

    async def _integrate_all(self, states: List[CotangentState], extras: Tuple[FirstIntegral, ...]) -> List[TrajectoryRecord]:
        block = self.config.integration
        cfg = StepConfig(dt=block.dt, newton_tol=block.newton_tol)
        jobs = [
            asyncio.to_thread(integrate, self.model, s, cfg, block.t_end, block.sample_every, extras)
            for s in states
        ]
        return list(await asyncio.gather(*jobs))

    # -- checks ---------------------------------------------------------------

    def _conservation(self, tol: float) -> List[Verdict]:
        names = ["H"] + [n for n in self.records[0].integral_names if n != "H"]
        return [
            Verdict.of("conservation", f"conservation:{name}",
                       max(r.drift()[name] for r in self.records), tol)
            for name in names
        ]

    def _constraint(self, tol: float) -> List[Verdict]:
        if not self.model.embedded:
            return []
        return [Verdict.of("constraint", "constraint", max(r.max_constraint_residual() for r in self.records), tol)]

    def _sample(self) -> List[CotangentState]:
        return sample_states(self.model, self.config.verification.sample_points, self.rng)

    def _commutation(self, tol: float) -> List[Verdict]:
        label = catalog_entry(self.model.key).commuting_set
        members = self.model.commuting_set(label) if label else list(self.model.integrals)
        if len(members) < 2:
            return []
        family = FunctionFamily(members, FunctionFamily.from_model(self.model).structure, name=label or self.model.key)
        residual = commutation_residual(family, self._sample())
        return [Verdict.of("commutation", f"commutation:{family.name}", float(residual.max()), tol)]

    def _identities(self, tol: float) -> List[Verdict]:
        states = self._sample()
        return [
            Verdict.of("identities", f"identity:{name}", max(fn(s) for s in states), tol)
            for name, fn in sorted(self.model.identities.items())
        ]

    def _chasles(self, tol: float) -> List[Verdict]:
        if self.model.key != "ellipsoid":
            return []
        params = EllipsoidParams(tuple(self.model.parameters["a"]))
        worst = 0.0
        for record in self.records:
            roots = np.array([chasles_tangency(x, p, params) for x, p in zip(record.positions, record.momenta)])
            if roots.size:
                spread = np.std(roots, axis=0) / np.maximum(np.abs(np.mean(roots, axis=0)), 1e-300)
                worst = max(worst, float(np.max(spread)))
        return [Verdict.of("chasles", "chasles:tangency_spread", worst, tol)]

    def _completeness(self, tol: float) -> List[Verdict]:
        family = FunctionFamily.from_model(self.model)
        report = ddim_dind(family, self._sample())
        mismatch = abs(report.ddim + report.dind - report.phase_dim - report.poisson_corank)
        return [Verdict.of("completeness", f"completeness:ddim={report.ddim},dind={report.dind}", mismatch, 0.5)]

    def _return_map(self, tol: float) -> List[Verdict]:
        data = self.model.companions.get("sol")
        if data is None:
            return []
        error = float(np.max(np.abs(sol_return_map(self.model) - data.B)))
        return [Verdict.of("return_map", "return_map", error, tol)]

    def _check(self, name: str) -> Callable[[float], List[Verdict]]:
        return {
            "conservation": self._conservation,
            "constraint": self._constraint,
            "commutation": self._commutation,
            "identities": self._identities,
            "chasles": self._chasles,
            "completeness": self._completeness,
            "return_map": self._return_map,
        }[name]

    # -- pipeline -------------------------------------------------------------

    async def run(self) -> ReportBundle:
        config = self.config
        verification = config.verification
        verdicts: List[Verdict] = []
        errors: List[Dict[str, object]] = []
        artifacts: Dict[str, str] = {}
        try:
            self.model = build_model(config.model.key, config.model.parameters)
            logger.info("running %s on %s", config.name, self.model.name)
            states = initial_states(self.model, config, self.rng)
            extras = tuple(_extra_integral(e.name, e.kind, e.index) for e in verification.extra_integrals)
            if config.integration is not None and states:
                self.records = await self._integrate_all(states, extras)
            checks = config.resolved_checks()
            if not self.records:
                checks = [c for c in checks if c not in ("conservation", "constraint", "chasles")]
            for check in checks:
                logger.info("check %s", check)
                verdicts.extend(self._check(check)(verification.tolerance(check)))
        except GeodesicLabError as e:
            logger.error("%s: %s", type(e).__name__, e)
            errors.append(e.to_dict())

        if config.output.write_trajectories:
            for k, record in enumerate(self.records):
                path = self.output_dir / f"{config.name}_trajectory_{k}.csv"
                await atomic_write_text_async(path, record.to_csv())
                artifacts[f"trajectory_{k}"] = path.name

        bundle = ReportBundle(
            name=config.name,
            version=__version__,
            seed=verification.seed,
            model=config.model.key,
            verdicts=verdicts,
            artifacts=artifacts,
            config=config.model_dump(mode="json"),
            errors=errors,
        )
        await atomic_write_text_async(self.output_dir / f"{config.name}_report.json",
                                      dumps_deterministic(bundle.model_dump(mode="json")))
        stamp = {"name": config.name, "timestamp": datetime.now(timezone.utc).isoformat(), "version": __version__}
        await atomic_write_text_async(self.output_dir / f"{config.name}_run_stamp.json", dumps_deterministic(stamp))
        return bundle


async def run_config(config: RunConfig, output_dir: Optional[Path] = None) -> ReportBundle:
    return await RunOrchestrator(config, output_dir).run()


def exit_status(bundle: ReportBundle) -> int:
    """0 all verdicts pass, 1 a verdict failed, 2 the model or run could not be set up."""
    if bundle.errors:
        return 2
    return 0 if bundle.passed else 1
