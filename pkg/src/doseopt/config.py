"""Run-configuration files for the batch simulator.

Configs are YAML with nested sections.  Parsing is strict: unknown keys are
rejected with their full path, and every default is defined here so a
round-trip through ``to_dict``/``load`` is the identity.

Required fields: the scenario selection and ``replication.master_seed``.
Everything else defaults to the bundled benchmark designs.

Example::

    scenario:
      suite: seamless          # phase1 | seamless | custom
      names: [sc1, sc3]
    design:
      model: pk                # pk | dose_only
      phase1: {target_tox_prob: 0.2}
      phase2: {cohort_size: 10}
      utility: {eff_tox: 0.6, no_eff_no_tox: 0.4}
    mcmc: {iterations: 2000, burnin: 1000, thin: 2}
    replication:
      n_reps: 200
      master_seed: 20240601
      parallelism: 8
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .phase1 import Phase1Config
from .phase2 import Phase2Config, UtilityWeights
from .pkpd import DoseGrid
from .posterior import ComparatorPriorSpec, McmcSettings, PriorSpec
from .scenarios import get_scenario
from .simulate import MODEL_DOSE_ONLY, MODEL_PK, PkGen, Scenario, TrialDesign


class ConfigError(ValueError):
    """A configuration file is structurally or semantically invalid."""


@dataclass
class RunConfig:
    scenarios: list[Scenario]
    design: TrialDesign
    n_reps: int
    master_seed: int
    parallelism: int
    raw: dict = field(compare=False, default_factory=dict)

    def to_dict(self) -> dict:
        return self.raw

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()).hexdigest()


def _require_mapping(node, path: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(node).__name__}")
    return node


def _check_keys(node: dict, allowed, path: str) -> None:
    unknown = sorted(set(node) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")


def _build(cls, node: dict | None, path: str, **extra):
    """Instantiate a dataclass from a config mapping, rejecting unknown keys."""
    node = dict(node or {})
    names = {f.name for f in dataclasses.fields(cls)} - set(extra)
    _check_keys(node, names, path)
    try:
        return cls(**node, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _scenario_from_custom(node: dict, path: str) -> Scenario:
    _check_keys(node, {"label", "dose_amounts", "true_tox", "true_eff",
                       "pk_gen", "sample_times", "control_tox", "control_eff"},
                path)
    for key in ("label", "dose_amounts", "true_tox", "true_eff"):
        if key not in node:
            raise ConfigError(f"{path}.{key}: required for a custom scenario")
    pk_gen = _build(PkGen, node.get("pk_gen"), f"{path}.pk_gen")
    try:
        return Scenario(
            label=str(node["label"]),
            grid=DoseGrid(tuple(node["dose_amounts"])),
            true_tox=tuple(node["true_tox"]),
            true_eff=tuple(node["true_eff"]),
            pk_gen=pk_gen,
            sample_times=tuple(node.get("sample_times",
                                        (1.0, 3.0, 5.0, 7.0, 12.0, 24.0))),
            control_tox=node.get("control_tox"),
            control_eff=node.get("control_eff"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(doc: dict) -> RunConfig:
    doc = _require_mapping(doc, "config")
    _check_keys(doc, {"scenario", "design", "mcmc", "replication"}, "config")

    sc_node = _require_mapping(doc.get("scenario"), "scenario") \
        if "scenario" in doc else None
    if sc_node is None:
        raise ConfigError("scenario: section is required")
    _check_keys(sc_node, {"suite", "name", "names", "custom"}, "scenario")
    suite = sc_node.get("suite")
    if suite is None:
        raise ConfigError("scenario.suite: required (phase1 | seamless | custom)")

    if suite == "custom":
        if "custom" not in sc_node:
            raise ConfigError("scenario.custom: required when suite is custom")
        scenarios = [_scenario_from_custom(_require_mapping(sc_node["custom"],
                                                            "scenario.custom"),
                                           "scenario.custom")]
    else:
        names = sc_node.get("names")
        if names is None:
            name = sc_node.get("name")
            if name is None:
                raise ConfigError("scenario.name (or names): required")
            names = [name]
        if not isinstance(names, list) or not names:
            raise ConfigError("scenario.names: expected a non-empty list")
        try:
            scenarios = [get_scenario(suite, str(n)) for n in names]
        except KeyError as exc:
            raise ConfigError(f"scenario: {exc.args[0]}") from exc

    design_node = _require_mapping(doc.get("design", {}), "design")
    _check_keys(design_node, {"model", "phase1", "phase2", "utility",
                              "prior", "comparator_prior"}, "design")
    model = design_node.get("model", MODEL_PK)
    if model not in (MODEL_PK, MODEL_DOSE_ONLY):
        raise ConfigError(f"design.model: expected '{MODEL_PK}' or "
                          f"'{MODEL_DOSE_ONLY}', got {model!r}")
    weights = _build(UtilityWeights, design_node.get("utility"), "design.utility")
    phase1 = _build(Phase1Config, design_node.get("phase1"), "design.phase1")
    phase2 = None
    if "phase2" in design_node and design_node["phase2"] is not None:
        phase2 = _build(Phase2Config, design_node.get("phase2"), "design.phase2",
                        weights=weights)
    prior = _build(PriorSpec, design_node.get("prior"), "design.prior")
    comparator_prior = _build(ComparatorPriorSpec,
                              design_node.get("comparator_prior"),
                              "design.comparator_prior")
    mcmc = _build(McmcSettings, doc.get("mcmc"), "mcmc")
    design = TrialDesign(phase1=phase1, prior=prior, mcmc=mcmc, phase2=phase2,
                         weights=weights, model=model,
                         comparator_prior=comparator_prior)

    rep_node = _require_mapping(doc.get("replication"), "replication") \
        if "replication" in doc else None
    if rep_node is None:
        raise ConfigError("replication: section is required")
    _check_keys(rep_node, {"n_reps", "master_seed", "parallelism"}, "replication")
    if "master_seed" not in rep_node:
        raise ConfigError("replication.master_seed: required")
    master_seed = rep_node["master_seed"]
    if not isinstance(master_seed, int) or master_seed < 0:
        raise ConfigError("replication.master_seed: expected a nonnegative integer")
    n_reps = rep_node.get("n_reps", 1000)
    parallelism = rep_node.get("parallelism", 1)
    if not isinstance(n_reps, int) or n_reps < 1:
        raise ConfigError("replication.n_reps: expected a positive integer")
    if not isinstance(parallelism, int) or parallelism < 1:
        raise ConfigError("replication.parallelism: expected a positive integer")

    return RunConfig(scenarios=scenarios, design=design, n_reps=n_reps,
                     master_seed=master_seed, parallelism=parallelism, raw=doc)


def load_config(path: str) -> RunConfig:
    """Parse a YAML config file; errors carry the file position or key path."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if doc is None:
        raise ConfigError(f"{path}: empty config")
    try:
        return parse_config(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(cfg: RunConfig) -> str:
    """Serialize back to YAML; load(dump(cfg)) parses to an equal config."""
    return yaml.safe_dump(cfg.raw, sort_keys=True)
