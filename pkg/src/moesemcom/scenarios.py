"""The eight attack scenarios and their metric rows.

Each scenario fixes what the sender asks for and which adversaries are
live. The gate turns the request into an expert selection, the composed
pipeline is evaluated over the SNR grid next to a plain normal-codec
baseline, and every measurement lands in one MetricRow. Covert scenarios
also report the analytic detection-free probability, which depends on the
symbol width, not the channel, so those rows sit at a single reference
SNR.

Scenario map:
    a  anti-tampering request   vs source perturbation
    b  anti-tampering request   vs channel perturbation
    c  covertness sweep         vs warden sampling (reference SNR only)
    d  confidentiality request  vs eavesdropper
    e  robust + covert          vs source perturbation + warden
    f  robust + covert          vs channel perturbation + warden
    g  covert + confidential    vs warden + eavesdropper
    h  robust + confidential    vs channel perturbation + eavesdropper
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .attacks import AttackSpec, evaluate_under_attack, train_eavesdropper
from .config import SimConfig
from .covert import dfp_for_dim
from .data import DatasetSplit
from .errors import ConfigError
from .experts.pipeline import CodecPipeline, compose_pipeline
from .experts.registry import NORMAL, PRIVATE, ExpertRegistry
from .gating import GateModel, SecurityRequirement
from .metrics import MetricRow
from .prng import Stream

DFP_SNR_DB = 12.0
_EAVES_INDEX_BASE = 10_000  # eval message counters, clear of training's


@dataclass(frozen=True)
class ScenarioBinding:
    scenario_id: str
    robustness: bool = False
    confidentiality: bool = False
    covert_levels: tuple = ()
    attack_surface: Optional[str] = None  # "source" | "channel" | None
    warden: bool = False
    eavesdropper: bool = False
    snr_grid: Optional[tuple] = None      # None = config grid

    def requirements(self) -> list:
        levels = self.covert_levels if self.covert_levels else (0,)
        return [SecurityRequirement(robustness=self.robustness,
                                    covertness=level > 0,
                                    covert_level=level,
                                    confidentiality=self.confidentiality)
                for level in levels]


SCENARIOS = {
    "a": ScenarioBinding("a", robustness=True, attack_surface="source"),
    "b": ScenarioBinding("b", robustness=True, attack_surface="channel"),
    "c": ScenarioBinding("c", covert_levels=(1, 2, 3), warden=True,
                         snr_grid=(DFP_SNR_DB,)),
    "d": ScenarioBinding("d", confidentiality=True, eavesdropper=True),
    "e": ScenarioBinding("e", robustness=True, covert_levels=(2,),
                         attack_surface="source", warden=True),
    "f": ScenarioBinding("f", robustness=True, covert_levels=(2,),
                         attack_surface="channel", warden=True),
    "g": ScenarioBinding("g", confidentiality=True, covert_levels=(2,),
                         warden=True, eavesdropper=True),
    "h": ScenarioBinding("h", robustness=True, confidentiality=True,
                         attack_surface="channel", eavesdropper=True),
}


def _attack_spec(binding: ScenarioBinding, cfg: SimConfig) -> Optional[AttackSpec]:
    if binding.attack_surface is None:
        return None
    a = cfg.attacks
    eps, steps = ((a["source_epsilon"], a["source_steps"])
                  if binding.attack_surface == "source"
                  else (a["channel_epsilon"], a["channel_steps"]))
    seed = Stream.from_root(cfg.seed, "scenario", binding.scenario_id,
                            "attack").seed
    return AttackSpec(surface=binding.attack_surface, epsilon=eps,
                      steps=steps, seed=seed)


def _expert_label(kinds: tuple, rho: Optional[float]) -> str:
    return "moe" if rho is None else f"moe:rho={rho:g}"


def _eaves_for(pipeline: CodecPipeline, ds: DatasetSplit, cfg: SimConfig,
               scenario_id: str, tag: str):
    """Keyless receiver clone fit on this pipeline's pre-noise traffic."""
    idx = np.arange(len(ds.x_train)) if pipeline.private else None
    traffic = pipeline.encode(ds.x_train, idx)
    seed = Stream.from_root(cfg.seed, "scenario", scenario_id, "eaves", tag).seed
    return train_eavesdropper(traffic, ds.y_train, ds.k, seed,
                              epochs=cfg.training["epochs_eaves"],
                              batch_size=cfg.training["batch_size"],
                              lr=cfg.training["lr"])


def run_scenario(scenario_id: str, cfg: SimConfig, ds: DatasetSplit,
                 registry: ExpertRegistry, gate: GateModel) -> list:
    """All metric rows for one scenario. Missing experts surface before
    any evaluation starts."""
    try:
        binding = SCENARIOS[scenario_id]
    except KeyError:
        raise ConfigError(f"unknown scenario id: {scenario_id}") from None

    x = ds.x_test[:cfg.eval_samples]
    y = ds.y_test[:cfg.eval_samples]
    snr_grid = binding.snr_grid if binding.snr_grid is not None \
        else tuple(cfg.snr_grid)
    spec = _attack_spec(binding, cfg)
    budget = cfg.covert_budget()

    # compose every pipeline up front
    baseline = compose_pipeline(registry, [NORMAL])
    arms = [("normal", baseline, None)]
    for psr in binding.requirements():
        decision = gate.decide(psr, ds.x_test[0])
        pipe = compose_pipeline(registry, decision.kinds, rho=decision.rho)
        arms.append((_expert_label(decision.kinds, decision.rho), pipe,
                     decision))

    rows = []
    for label, pipe, decision in arms:
        eaves = _eaves_for(pipe, ds, cfg, scenario_id, label) \
            if binding.eavesdropper else None
        indices = (np.arange(len(x)) + _EAVES_INDEX_BASE
                   if pipe.private else None)
        for snr in snr_grid:
            noise = Stream.from_root(cfg.seed, "scenario", scenario_id,
                                     label, f"{snr:g}", "noise")
            res = evaluate_under_attack(pipe, x, y, snr, spec=spec,
                                        noise_stream=noise, indices=indices,
                                        eaves=eaves)
            rows.append(MetricRow(scenario_id, label, snr, "accuracy",
                                  res["accuracy"], cfg.seed))
            if eaves is not None:
                rows.append(MetricRow(scenario_id, label, snr,
                                      "eavesdropper_accuracy",
                                      res["eaves_accuracy"], cfg.seed))
        if binding.warden:
            rows.append(MetricRow(scenario_id, label, DFP_SNR_DB, "dfp",
                                  dfp_for_dim(pipe.symbol_dim, budget),
                                  cfg.seed))
            if decision is not None and decision.rho is not None:
                exp = registry.get("covert", decision.rho)
                rows.append(MetricRow(scenario_id, label, DFP_SNR_DB, "mse",
                                      exp.manifest["recon_mse_test"],
                                      cfg.seed))
    return rows
