from pathlib import Path

from core.cli.base import BenchCommand
from core.cli.config import load_run_config
from core.errors import ContractError
from modules.dilemmas.dataset import load_dataset
from modules.dilemmas.trials import read_archive
from modules.report.builders import render_open_ended_table
from modules.report.export import ExportFormat, artifact_path, export_table, load_table
from modules.runner.openended import (
    DEFAULT_PER_BIAS,
    DEFAULT_TREATMENT,
    load_labels,
    select_open_ended_pairs,
    summarize_open_ended,
)
from modules.runner.sensitivity import compute_sensitivity
from modules.strategies.specs import BASELINE_ID

from .run import ARCHIVE_NAME


def with_config(options):
    """Fill seed, resamples and paths a flag left unset from the run config."""
    resolved = dict(options)
    if options.get("config"):
        config = load_run_config(options["config"])
        defaults = {
            "seed": config.seed,
            "resamples": config.analysis.get("bootstrap_resamples"),
            "archive": config.output_dir / ARCHIVE_NAME,
            "dataset": config.dataset,
            "output_dir": config.output_dir,
        }
        for key, value in defaults.items():
            if key in resolved and resolved[key] is None:
                resolved[key] = value
    required = ("seed", "archive", "dataset", "labels", "output_dir")
    missing = [key for key in required if key in resolved and resolved[key] is None]
    if missing:
        raise ContractError(f"missing {', '.join(missing)}; pass --config or the flags", missing=missing)
    return resolved


class Command(BenchCommand):
    help = "Open-ended subset selection, human-label reports and table conversion"

    def add_arguments(self, parser):
        actions = parser.add_subparsers(dest="action", required=True)

        select = actions.add_parser("select", help="Pick pairs for the open-ended follow-up")
        select.add_argument("--config", help="Take seed, archive and dataset from a run config")
        select.add_argument("--archive")
        select.add_argument("--dataset")
        select.add_argument("--seed", type=int)
        select.add_argument("--per-bias", type=int, default=DEFAULT_PER_BIAS)
        select.add_argument("--models", nargs="+")
        select.add_argument("--baseline", default=BASELINE_ID)
        select.add_argument("--treatment", default=DEFAULT_TREATMENT)
        select.add_argument("--output")

        labels = actions.add_parser("open-ended", help="Agreement and sensitivity from a human label file")
        labels.add_argument("--config", help="Take seed, bootstrap resamples and output dir from a run config")
        labels.add_argument("--labels", required=True)
        labels.add_argument("--seed", type=int)
        labels.add_argument("--resamples", type=int)
        labels.add_argument("--baseline", default=BASELINE_ID)
        labels.add_argument("--treatment", default=DEFAULT_TREATMENT)
        labels.add_argument("--output-dir")

        convert = actions.add_parser("convert", help="Re-export a JSON table")
        convert.add_argument("--table", required=True)
        convert.add_argument("--format", choices=ExportFormat.values, default=ExportFormat.CSV.value)
        convert.add_argument("--output")

    def run(self, *args, **options):
        handler = {"select": self._select, "open-ended": self._open_ended, "convert": self._convert}
        return handler[options["action"]](options)

    def _select(self, options):
        options = with_config(options)
        records = list(read_archive(options["archive"]))
        pairs_by_id = {pair.pair_id: pair for pair in load_dataset(options["dataset"])}
        selected = select_open_ended_pairs(
            compute_sensitivity(records),
            pairs_by_id,
            seed=options["seed"],
            baseline=options["baseline"],
            treatment=options["treatment"],
            models=options["models"],
            per_bias=options["per_bias"],
        )
        payload = {"seed": options["seed"], "per_bias": options["per_bias"], "pair_ids": selected}
        if options["output"]:
            self.write_json(options["output"], payload)
        self.emit(payload)

    def _open_ended(self, options):
        options = with_config(options)
        summaries, reductions = summarize_open_ended(
            load_labels(options["labels"]),
            seed=options["seed"],
            baseline=options["baseline"],
            treatment=options["treatment"],
            resamples=options["resamples"],
        )
        if not summaries:
            raise ContractError("label file holds no labels", path=options["labels"])
        table = render_open_ended_table(summaries, reductions)
        out_dir = Path(options["output_dir"])
        written = [export_table(table, artifact_path(out_dir, "open_ended", "model", fmt), fmt) for fmt in ExportFormat]
        self.emit({"written": [str(path) for path in written]})

    def _convert(self, options):
        source = Path(options["table"])
        fmt = ExportFormat(options["format"])
        target = Path(options["output"]) if options["output"] else source.with_suffix(f".{fmt}")
        self.emit({"written": str(export_table(load_table(source), target, fmt))})
