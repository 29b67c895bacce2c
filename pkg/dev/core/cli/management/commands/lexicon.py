from pathlib import Path

from core.cli.base import BenchCommand
from modules.dilemmas.dataset import load_dataset
from modules.dilemmas.trials import read_archive
from modules.lexicon.analysis import DEFAULT_STRATEGY, TOP_K, analyze_features, documents_from_trials
from modules.lexicon.codebook import load_codebook
from modules.report.builders import render_lexicon_table
from modules.report.export import ExportFormat, artifact_path, export_table
from modules.runner.sensitivity import compute_sensitivity


class Command(BenchCommand):
    help = "Codes responses with a lexicon codebook and estimates per-bias feature rate ratios"

    def add_arguments(self, parser):
        parser.add_argument("--archive", required=True)
        parser.add_argument("--dataset", required=True)
        parser.add_argument("--codebook", required=True)
        parser.add_argument("--output-dir", required=True)
        parser.add_argument("--strategy", default=DEFAULT_STRATEGY)
        parser.add_argument("--cov-type", choices=("HC0", "HC1"), default="HC0")
        parser.add_argument("--alpha", type=float)
        parser.add_argument("--top-k", type=int, default=TOP_K)

    def run(self, *args, **options):
        records = list(read_archive(options["archive"]))
        pairs_by_id = {pair.pair_id: pair for pair in load_dataset(options["dataset"])}
        sensitive, non_sensitive = documents_from_trials(
            records, compute_sensitivity(records), pairs_by_id, options["strategy"]
        )
        analysis = analyze_features(
            sensitive, non_sensitive, load_codebook(options["codebook"]), options["alpha"], options["cov_type"]
        )
        analysis.metadata["strategy_id"] = options["strategy"]

        out_dir = Path(options["output_dir"])
        table = render_lexicon_table(analysis, top_k=options["top_k"])
        written = [export_table(table, artifact_path(out_dir, "lexicon", "bias", fmt), fmt) for fmt in ExportFormat]
        written.append(self.write_json(out_dir / "lexicon_effects.json", analysis.to_dict()))
        self.emit({"written": [str(path) for path in written], "top_features": analysis.top_features(options["top_k"])})
