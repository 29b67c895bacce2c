from core.cli.base import BenchCommand
from modules.strategies.specs import export_presets, get_strategy


class Command(BenchCommand):
    help = "Exports the preset strategy registry or describes one composed strategy"

    def add_arguments(self, parser):
        actions = parser.add_subparsers(dest="action", required=True)
        export = actions.add_parser("export")
        export.add_argument("--output")
        describe = actions.add_parser("describe")
        describe.add_argument("strategy_id")

    def run(self, *args, **options):
        if options["action"] == "describe":
            self.emit(get_strategy(options["strategy_id"]).to_dict())
            return
        presets = export_presets()
        if options["output"]:
            self.write_json(options["output"], presets)
        self.emit(presets)
