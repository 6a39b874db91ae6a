"""
Experiment configuration: one flat set of keys shared by the CLI (YAML file
plus flag overrides) and the Mage pipeline variables.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence

import yaml

from gibbs_tda.utils.errors import ParameterError
from gibbs_tda.utils.mcmc import McmcConfig
from gibbs_tda.utils.point_clouds import SHAPES, SamplerSpec

DEFAULT_OUTPUT_DIR = os.getenv("GIBBS_TDA_OUTPUT_DIR", "output")


@dataclass(frozen=True)
class ExperimentConfig:
    shape: str = "circles"
    n: int = 1200
    sampler_params: Dict[str, object] = field(default_factory=lambda: {"circles": [[3.0, 600], [2.0, 400], [0.5, 200]]})
    eta: float = 0.1
    resolution: Optional[int] = None
    padding: Optional[float] = None
    kde_cutoff: Optional[float] = None
    degrees: List[int] = field(default_factory=lambda: [0, 1])
    K: int = 3
    underlying_dim: Optional[int] = None
    delta_star_grid: Optional[List[float]] = None
    fit_starts: int = 5
    mcmc_variants: List[List[int]] = field(default_factory=lambda: [[500, 20, 50]])
    burn_in: Optional[int] = 10
    burn_in_steps: int = 100
    burn_in_chains: int = 5
    p: float = 2.0
    alpha: float = 0.05
    j_max: int = 10
    seed: int = 0
    threads: int = 1
    output_dir: str = DEFAULT_OUTPUT_DIR

    def validate(self) -> None:
        if self.shape not in SHAPES:
            raise ParameterError("shape", f"unknown shape '{self.shape}', expected one of {SHAPES}")
        if not self.eta > 0:
            raise ParameterError("eta", f"bandwidth must be > 0, got {self.eta}")
        if not self.degrees:
            raise ParameterError("degrees", "at least one homology degree is required")
        dim = self.ambient_dim()
        bad = [k for k in self.degrees if not 0 <= int(k) <= dim]
        if bad:
            raise ParameterError("degrees", f"degrees {bad} outside 0..{dim}")
        if self.K < 1:
            raise ParameterError("K", f"K must be >= 1, got {self.K}")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha", f"alpha must lie in (0, 1), got {self.alpha}")
        if self.threads < 1:
            raise ParameterError("threads", f"threads must be >= 1, got {self.threads}")
        if not self.mcmc_variants:
            raise ParameterError("mcmc_variants", "at least one (n_b, n_r, n_R) variant is required")
        for variant in self.mcmc_variants:
            if len(variant) != 3:
                raise ParameterError("mcmc_variants", f"expected (n_b, n_r, n_R), got {variant}")
        for config in self.mcmc_configs(self.burn_in or 0):
            config.validate()
        self.sampler_spec().validate()

    def ambient_dim(self) -> int:
        return 2 if self.shape == "circles" else 3

    def sampler_spec(self) -> SamplerSpec:
        params = dict(self.sampler_params)
        if "circles" in params:
            params["circles"] = [tuple(c) for c in params["circles"]]
        return SamplerSpec(shape=self.shape, n=int(self.n), seed=int(self.seed), params=params)

    def mcmc_configs(self, burn_in: int) -> List[McmcConfig]:
        return [
            McmcConfig(burn_in=int(burn_in), n_b=int(nb), n_r=int(nr), n_R=int(nR), seed=int(self.seed) + i, workers=self.threads)
            for i, (nb, nr, nR) in enumerate(self.mcmc_variants)
        ]

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form, ignoring where outputs go and how many threads run."""
        data = self.to_dict()
        data.pop("output_dir")
        data.pop("threads")
        canonical = json.dumps(data, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Apply the non-None overrides."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ParameterError(sorted(unknown)[0], "unknown configuration key")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "ExperimentConfig":
        base = preset(data["preset"]) if "preset" in data else cls()
        return base.with_overrides(**{k: v for k, v in data.items() if k != "preset"})


PRESETS: Dict[str, Dict[str, object]] = {
    "sphere": {
        "shape": "sphere",
        "n": 1000,
        "sampler_params": {"radius": 1.0},
        "eta": 0.1,
        "degrees": [0, 1],
        "burn_in": 50,
        "mcmc_variants": [[500, 10, 100], [500, 20, 50], [500, 40, 25], [500, 100, 10]],
    },
    "torus": {
        "shape": "torus",
        "n": 1000,
        "sampler_params": {"tube_radius": 1.8, "center_distance": 2.0},
        "eta": 0.2,
        "degrees": [0, 1],
        "burn_in": 10,
        "mcmc_variants": [[500, 10, 100], [500, 20, 50], [500, 40, 25], [500, 100, 10]],
    },
    "circles": {
        "shape": "circles",
        "n": 1200,
        "sampler_params": {"circles": [[3.0, 600], [2.0, 400], [0.5, 200]]},
        "eta": 0.1,
        "degrees": [0, 1],
        "burn_in": 10,
        "mcmc_variants": [[500, 20, 50], [500, 40, 25], [500, 100, 10]],
    },
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ParameterError("preset", f"unknown preset '{name}', expected one of {sorted(PRESETS)}")
    return ExperimentConfig().with_overrides(**PRESETS[name])


def load_config(path: str, overrides: Optional[Dict[str, object]] = None) -> ExperimentConfig:
    """Flat YAML file (optionally naming a `preset`) overlaid with `overrides`."""
    with open(path) as handle:
        data = yaml.safe_load(handle) or {}
    if not isinstance(data, dict):
        raise ParameterError("config", f"{path} must hold a flat mapping")
    config = ExperimentConfig.from_dict(data)
    return config.with_overrides(**(overrides or {}))


def parse_variants(values: Sequence[str]) -> List[List[int]]:
    """`500,20,50` strings → [[500, 20, 50]]."""
    variants = []
    for value in values:
        parts = [int(v) for v in str(value).split(",") if v.strip()]
        if len(parts) != 3:
            raise ParameterError("mcmc_variants", f"expected n_b,n_r,n_R, got '{value}'")
        variants.append(parts)
    return variants


def from_variables(variables: Dict[str, object]) -> ExperimentConfig:
    """Experiment config from Mage pipeline variables; unrelated runtime kwargs are ignored."""
    known = {f.name for f in fields(ExperimentConfig)}
    picked = {k: v for k, v in variables.items() if k in known}
    if variables.get("preset"):
        picked["preset"] = variables["preset"]
    return ExperimentConfig.from_dict(picked)
