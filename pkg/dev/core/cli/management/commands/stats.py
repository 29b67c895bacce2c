from core.cli.base import BenchCommand
from core.errors import OracleMismatchError
from modules.stats.selftest import run_selftest


class Command(BenchCommand):
    help = "Statistics utilities; 'selftest' checks the engine against independent oracles"

    def add_arguments(self, parser):
        actions = parser.add_subparsers(dest="action", required=True)
        selftest = actions.add_parser("selftest")
        selftest.add_argument("--seed", type=int, default=0)
        selftest.add_argument("--mann-whitney-cases", type=int, default=500)
        selftest.add_argument("--bh-cases", type=int, default=1000)
        selftest.add_argument("--glm-cases", type=int, default=200)
        selftest.add_argument("--kappa-cases", type=int, default=100)

    def run(self, *args, **options):
        checks = run_selftest(
            seed=options["seed"],
            mann_whitney_cases=options["mann_whitney_cases"],
            bh_cases=options["bh_cases"],
            glm_cases=options["glm_cases"],
            kappa_cases=options["kappa_cases"],
        )
        failed = [check.to_dict() for check in checks if not check.passed]
        if failed:
            raise OracleMismatchError(f"{len(failed)} oracle checks failed", failed=failed)
        self.emit({"checks": [check.to_dict() for check in checks]})
        self.stdout.write(self.style.SUCCESS(f"{len(checks)} oracle checks passed"))
