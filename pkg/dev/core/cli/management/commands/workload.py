from core.cli.base import BenchCommand
from core.cli.config import load_run_config
from modules.dilemmas.dataset import load_dataset
from modules.runner.experiment import ElicitationSource, ExperimentMode
from modules.runner.workload import plan_workload


class Command(BenchCommand):
    help = "Counts the calls and estimated prompt tokens a run config will need"

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True)
        parser.add_argument("--runs", type=int, dest="runs_per_condition")

    def run(self, *args, **options):
        config = load_run_config(options["config"], runs_per_condition=options["runs_per_condition"])
        workload = plan_workload(
            len(config.endpoints),
            config.strategies,
            load_dataset(config.dataset),
            config.runs_per_condition,
            open_ended=config.mode == ExperimentMode.OPEN_ENDED,
            elicitations_per_run=2 if config.elicitation_source == ElicitationSource.PER_CONDITION else 1,
            cue_renderer=config.renderer(),
        )
        self.emit(workload.to_dict())
