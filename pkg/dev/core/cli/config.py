"""Experiment configuration: one JSON file per experiment, flags on top."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from rest_framework import serializers

from core.conf import bench_setting
from core.errors import BenchError, SchemaError
from modules.gateway.serializers import ModelEndpointSerializer
from modules.runner.experiment import ElicitationSource, ExperimentMode
from modules.runner.sensitivity import Grouping, Pairing
from modules.stats.comparisons import FdrFamily
from modules.strategies.cues import ClauseListRenderer, ParaphraseRenderer
from modules.strategies.specs import BASELINE_ID, PRESET_IDS, get_strategy

CLAUSE_RENDERER = "clauses"


class AnalysisSerializer(serializers.Serializer):
    groupings = serializers.ListField(
        child=serializers.ChoiceField(choices=Grouping.values), default=[Grouping.BIAS.value, Grouping.MODEL.value]
    )
    baseline = serializers.CharField(default=BASELINE_ID)
    alpha = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)
    fdr_family = serializers.ChoiceField(choices=FdrFamily.values, default=FdrFamily.TABLE.value)
    pairing = serializers.ChoiceField(choices=Pairing.values, default=Pairing.RUN_INDEX.value)
    bootstrap_resamples = serializers.IntegerField(min_value=1, required=False)


class RunConfigSerializer(serializers.Serializer):
    dataset = serializers.CharField()
    endpoints = ModelEndpointSerializer(many=True)
    strategies = serializers.ListField(child=serializers.CharField(), default=list(PRESET_IDS))
    runs_per_condition = serializers.IntegerField(min_value=1, required=False)
    mode = serializers.ChoiceField(choices=ExperimentMode.values, default=ExperimentMode.CLOSED.value)
    elicitation_source = serializers.ChoiceField(
        choices=ElicitationSource.values, default=ElicitationSource.BIASED.value
    )
    cue_renderer = serializers.CharField(default=CLAUSE_RENDERER)
    seed = serializers.IntegerField()
    cache_dir = serializers.CharField(required=False)
    output_dir = serializers.CharField()
    workers = serializers.IntegerField(min_value=1, required=False)
    replay_only = serializers.BooleanField(default=False)
    analysis = AnalysisSerializer(required=False)

    def validate_endpoints(self, value):
        if not value:
            raise serializers.ValidationError("At least one endpoint is required.")
        ids = [endpoint["model_id"] for endpoint in value]
        if len(ids) != len(set(ids)):
            raise serializers.ValidationError("Endpoint model ids must be unique.")
        return value

    def validate_strategies(self, value):
        for strategy_id in value:
            try:
                get_strategy(strategy_id)
            except BenchError as exc:
                raise serializers.ValidationError(exc.message) from exc
        return value


@dataclass(frozen=True)
class RunConfig:
    path: Path
    dataset: Path
    endpoints: list
    strategies: list
    runs_per_condition: int
    mode: ExperimentMode
    elicitation_source: ElicitationSource
    cue_renderer: str
    seed: int
    cache_dir: Path
    output_dir: Path
    workers: int
    replay_only: bool
    analysis: dict = field(default_factory=dict)

    def renderer(self):
        if self.cue_renderer == CLAUSE_RENDERER:
            return ClauseListRenderer()
        return ParaphraseRenderer.from_file(self.cue_renderer)

    def effective(self):
        """The configuration as run; endpoints name key variables, never keys."""
        return {
            "config": str(self.path),
            "dataset": str(self.dataset),
            "endpoints": [endpoint.to_dict() for endpoint in self.endpoints],
            "strategies": [strategy.id for strategy in self.strategies],
            "runs_per_condition": self.runs_per_condition,
            "mode": str(self.mode),
            "elicitation_source": str(self.elicitation_source),
            "cue_renderer": self.cue_renderer,
            "seed": self.seed,
            "cache_dir": str(self.cache_dir),
            "output_dir": str(self.output_dir),
            "workers": self.workers,
            "replay_only": self.replay_only,
            "analysis": self.analysis,
        }


def _resolve(base, value):
    path = Path(value).expanduser()
    return path if path.is_absolute() else (base / path).resolve()


def load_run_config(path, **overrides):
    """Validate a config file; ``overrides`` whose value is not None win over the file."""
    path = Path(path).resolve()
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read config {path}: {exc}", path=str(path)) from exc
    if not isinstance(data, dict):
        raise SchemaError("config must be a JSON object", path=str(path))
    data.update({key: value for key, value in overrides.items() if value is not None})

    serializer = RunConfigSerializer(data=data)
    if not serializer.is_valid():
        raise SchemaError(f"invalid config {path}", path=str(path), errors=serializer.errors)
    values = serializer.validated_data
    base = path.parent

    endpoints = []
    for item in values["endpoints"]:
        if item.get("stub_script"):
            item = {**item, "stub_script": str(_resolve(base, item["stub_script"]))}
        endpoints.append(ModelEndpointSerializer().create(item))

    dataset = _resolve(base, values["dataset"])
    missing = [str(p) for p in [dataset] + [Path(e.stub_script) for e in endpoints if e.stub_script] if not p.exists()]
    renderer = values["cue_renderer"]
    if renderer != CLAUSE_RENDERER:
        renderer = str(_resolve(base, renderer))
        if not Path(renderer).exists():
            missing.append(renderer)
    if missing:
        raise SchemaError("config references missing files", path=str(path), missing=missing)

    analysis_serializer = AnalysisSerializer(data=data.get("analysis") or {})
    analysis_serializer.is_valid()
    analysis = dict(analysis_serializer.validated_data)
    return RunConfig(
        path=path,
        dataset=dataset,
        endpoints=endpoints,
        strategies=[get_strategy(strategy_id) for strategy_id in values["strategies"]],
        runs_per_condition=values.get("runs_per_condition") or bench_setting("RUNS_PER_CONDITION"),
        mode=ExperimentMode(values["mode"]),
        elicitation_source=ElicitationSource(values["elicitation_source"]),
        cue_renderer=renderer,
        seed=values["seed"],
        cache_dir=_resolve(base, values.get("cache_dir") or bench_setting("CACHE_DIR")),
        output_dir=_resolve(base, values["output_dir"]),
        workers=values.get("workers") or bench_setting("MAX_IN_FLIGHT"),
        replay_only=values["replay_only"],
        analysis=analysis,
    )
