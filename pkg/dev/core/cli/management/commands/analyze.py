from pathlib import Path

from core.cli.base import BenchCommand
from core.cli.config import load_run_config
from core.errors import ContractError
from modules.dilemmas.dataset import load_dataset
from modules.dilemmas.trials import read_archive
from modules.horn.tiers import with_tiers
from modules.report.artifacts import write_sensitivity_report
from modules.report.export import ExportFormat
from modules.runner.sensitivity import Grouping, Pairing
from modules.stats.comparisons import FdrFamily
from modules.strategies.specs import BASELINE_ID

from .run import ARCHIVE_NAME

OPTIONS = ("archive", "dataset", "output_dir", "groupings", "baseline", "alpha", "fdr_family", "pairing", "formats")


def load_pairs(dataset, groupings, depth_limit=None):
    """Pairs keyed by id; tiers are assigned on the fly when a tier grouping needs them."""
    if dataset is None:
        if any(grouping in (Grouping.BIAS, Grouping.TIER) for grouping in groupings):
            raise ContractError("bias and tier groupings need --dataset")
        return None
    pairs = load_dataset(dataset)
    if Grouping.TIER in groupings and any(pair.tier is None for pair in pairs):
        pairs = with_tiers(pairs, depth_limit)
    return {pair.pair_id: pair for pair in pairs}


class Command(BenchCommand):
    help = "Computes sensitivity, runs strategy-versus-baseline tests and exports the tables"

    def add_arguments(self, parser):
        parser.add_argument("--config", help="Take archive, dataset and analysis options from a run config")
        parser.add_argument("--archive")
        parser.add_argument("--dataset")
        parser.add_argument("--output-dir")
        parser.add_argument("--groupings", nargs="+", choices=Grouping.values)
        parser.add_argument("--baseline")
        parser.add_argument("--alpha", type=float)
        parser.add_argument("--fdr-family", choices=FdrFamily.values)
        parser.add_argument("--pairing", choices=Pairing.values)
        parser.add_argument("--format", nargs="+", choices=ExportFormat.values, dest="formats")

    def run(self, *args, **options):
        settings = {}
        if options["config"]:
            config = load_run_config(options["config"])
            settings = {
                **config.analysis,
                "archive": config.output_dir / ARCHIVE_NAME,
                "dataset": config.dataset,
                "output_dir": config.output_dir,
            }
        settings.update({key: value for key, value in options.items() if value is not None and key in OPTIONS})
        missing = [key for key in ("archive", "output_dir") if not settings.get(key)]
        if missing:
            raise ContractError(f"missing {', '.join(missing)}; pass --config or the flags", missing=missing)

        groupings = [Grouping(g) for g in settings.get("groupings") or (Grouping.BIAS, Grouping.MODEL)]
        written = write_sensitivity_report(
            list(read_archive(settings["archive"])),
            Path(settings["output_dir"]),
            pairs_by_id=load_pairs(settings.get("dataset"), groupings),
            groupings=groupings,
            baseline=settings.get("baseline") or BASELINE_ID,
            family=FdrFamily(settings.get("fdr_family") or FdrFamily.TABLE),
            alpha=settings.get("alpha"),
            pairing=Pairing(settings.get("pairing") or Pairing.RUN_INDEX),
            formats=[ExportFormat(f) for f in settings.get("formats") or ExportFormat.values],
        )
        self.emit({"written": [str(path) for path in written]})

