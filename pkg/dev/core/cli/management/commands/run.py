import logging

from core.cli.base import BenchCommand
from core.cli.config import load_run_config
from core.errors import ReplayError
from modules.dilemmas.dataset import load_dataset
from modules.dilemmas.trials import TrialArchive
from modules.gateway.client import Gateway
from modules.runner.experiment import run_experiment

logger = logging.getLogger(__name__)

ARCHIVE_NAME = "trials.ndjson"


class Command(BenchCommand):
    help = "Runs an experiment described by a JSON config, resuming from its archive"

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True)
        parser.add_argument("--replay-only", action="store_true", default=None)
        parser.add_argument("--runs", type=int, dest="runs_per_condition")
        parser.add_argument("--output-dir")
        parser.add_argument("--cache-dir")
        parser.add_argument("--workers", type=int)
        parser.add_argument("--seed", type=int)

    def run(self, *args, **options):
        config = load_run_config(
            options["config"],
            replay_only=options["replay_only"],
            runs_per_condition=options["runs_per_condition"],
            output_dir=options["output_dir"],
            cache_dir=options["cache_dir"],
            workers=options["workers"],
            seed=options["seed"],
        )
        config.output_dir.mkdir(parents=True, exist_ok=True)
        self.write_json(config.output_dir / "effective_config.json", config.effective())

        report = run_experiment(
            Gateway(cache_dir=config.cache_dir, replay_only=config.replay_only),
            TrialArchive(config.output_dir / ARCHIVE_NAME),
            load_dataset(config.dataset),
            config.strategies,
            config.endpoints,
            runs_per_condition=config.runs_per_condition,
            mode=config.mode,
            elicitation_source=config.elicitation_source,
            cue_renderer=config.renderer(),
            workers=config.workers,
        )
        self.write_json(config.output_dir / "run_report.json", report.to_dict())
        if not report.complete:
            logger.warning("Run left %s incomplete", config.output_dir / ARCHIVE_NAME)
        if report.failed_trials:
            logger.warning("%d trials failed; run again to retry them", report.failed_trials)
        if report.replay_misses:
            raise ReplayError(
                f"{report.replay_misses} calls have no cached response", replay_misses=report.replay_misses
            )
        self.emit(report.to_dict())
