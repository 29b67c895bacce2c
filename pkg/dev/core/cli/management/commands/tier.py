from collections import Counter

from core.cli.base import BenchCommand
from modules.dilemmas.dataset import dump_dataset, load_dataset
from modules.horn.tiers import inference_steps, quartile_boundaries, with_tiers


class Command(BenchCommand):
    help = "Assigns quartile complexity tiers from inference-step counts"

    def add_arguments(self, parser):
        parser.add_argument("--dataset", required=True)
        parser.add_argument("--output", help="Write the dataset with tiers to this path")
        parser.add_argument("--depth-limit", type=int, default=None)

    def run(self, *args, **options):
        pairs = load_dataset(options["dataset"])
        steps = [inference_steps(pair, options["depth_limit"]) for pair in pairs]
        tiered = with_tiers(pairs, options["depth_limit"])
        if options["output"]:
            dump_dataset(tiered, options["output"])
        counts = Counter(str(pair.tier) for pair in tiered)
        self.emit(
            {
                "boundaries": list(quartile_boundaries(steps)),
                "tiers": {pair.pair_id: str(pair.tier) for pair in tiered},
                "counts": dict(sorted(counts.items())),
            }
        )
