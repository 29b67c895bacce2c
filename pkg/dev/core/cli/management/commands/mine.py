import json
from dataclasses import replace
from pathlib import Path

from core.cli.base import BenchCommand
from core.errors import ContractError, SchemaError
from modules.gateway.client import Gateway
from modules.gateway.serializers import ModelEndpointSerializer
from modules.miner.alignment import load_references
from modules.miner.corpus import FileScoreSource, HttpScoreSource, load_corpus
from modules.miner.judge_prompts import load_judge_prompts
from modules.miner.pipeline import mine
from modules.miner.review import load_review
from modules.report.builders import render_prevalence_table
from modules.report.export import ExportFormat, artifact_path, export_table


def load_judge(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read judge endpoint {path}: {exc}", path=str(path)) from exc
    serializer = ModelEndpointSerializer(data=data)
    if not serializer.is_valid():
        raise SchemaError(f"invalid judge endpoint {path}", path=str(path), errors=serializer.errors)
    endpoint = serializer.save()
    if endpoint.stub_script and not Path(endpoint.stub_script).is_absolute():
        endpoint = replace(endpoint, stub_script=str((Path(path).resolve().parent / endpoint.stub_script).resolve()))
    return endpoint


def _validations(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read validation file {path}: {exc}", path=str(path)) from exc
    if not isinstance(data, dict) or not all(isinstance(value, bool) for value in data.values()):
        raise SchemaError("validation file must map prompt ids to true or false", path=str(path))
    return data


class Command(BenchCommand):
    help = "Mines a prompt corpus for explicit bias cues and reports their prevalence"

    def add_arguments(self, parser):
        parser.add_argument("--corpus", required=True)
        scores = parser.add_mutually_exclusive_group(required=True)
        scores.add_argument("--scores", help="CSV or JSON score file")
        scores.add_argument("--score-url", help="HTTP scoring endpoint")
        parser.add_argument("--judge", required=True, help="JSON file describing the judge endpoint")
        parser.add_argument("--review")
        parser.add_argument("--references")
        parser.add_argument("--validations")
        parser.add_argument("--judge-prompts")
        parser.add_argument("--threshold", type=float)
        parser.add_argument("--top-k", type=int)
        parser.add_argument("--cache-dir")
        parser.add_argument("--replay-only", action="store_true")
        parser.add_argument("--output-dir", required=True)

    def run(self, *args, **options):
        if options["validations"] and not options["references"]:
            raise ContractError("--validations needs --references")
        source = FileScoreSource(options["scores"]) if options["scores"] else HttpScoreSource(options["score_url"])
        outcome = mine(
            load_corpus(options["corpus"]),
            source,
            Gateway(cache_dir=options["cache_dir"], replay_only=options["replay_only"]),
            load_judge(options["judge"]),
            review=load_review(options["review"]) if options["review"] else None,
            references=load_references(options["references"]) if options["references"] else None,
            validations=_validations(options["validations"]) if options["validations"] else None,
            threshold=options["threshold"],
            k=options["top_k"],
            judge_prompts=load_judge_prompts(options["judge_prompts"]),
        )

        out_dir = Path(options["output_dir"])
        written = [self.write_json(out_dir / "mining.json", outcome.to_dict())]
        if outcome.report is not None:
            table = render_prevalence_table(outcome.report)
            for fmt in ExportFormat:
                written.append(export_table(table, artifact_path(out_dir, "prevalence", "bias", fmt), fmt))
        self.emit({"written": [str(path) for path in written], "stages": outcome.stages.to_dict()})
