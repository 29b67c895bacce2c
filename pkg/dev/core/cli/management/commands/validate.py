from core.cli.base import BenchCommand
from core.errors import DataError
from modules.dilemmas.dataset import load_dataset, validate_pair
from modules.horn.verification import verify_pair


class Command(BenchCommand):
    help = "Validates a dilemma dataset and verifies every pair against its Horn-clause programs"

    def add_arguments(self, parser):
        parser.add_argument("--dataset", required=True)
        parser.add_argument("--depth-limit", type=int, default=None)

    def run(self, *args, **options):
        pairs = load_dataset(options["dataset"], strict=False)
        problems = []
        for pair in pairs:
            violations = validate_pair(pair)
            if violations:
                problems.append({"pair_id": pair.pair_id, "violations": [v.to_dict() for v in violations]})
                continue
            verification = verify_pair(pair, depth_limit=options["depth_limit"])
            if not verification.consistent:
                problems.append({"pair_id": pair.pair_id, "diagnostics": list(verification.diagnostics)})

        if problems:
            raise DataError(f"{len(problems)} of {len(pairs)} pairs are inconsistent", problems=problems)
        self.stdout.write(self.style.SUCCESS(f"{len(pairs)} pairs consistent"))
