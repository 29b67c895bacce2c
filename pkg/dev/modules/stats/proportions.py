from dataclasses import dataclass

from scipy.stats import norm
from statsmodels.stats.proportion import proportion_confint

from core.errors import DomainError


@dataclass(frozen=True)
class ProportionEstimate:
    successes: int
    trials: int
    point: float
    lower: float
    upper: float
    confidence: float = 0.95

    @property
    def center(self):
        """Wilson-centred estimate, always inside [lower, upper]."""
        z = norm.ppf(0.5 + self.confidence / 2)
        return (self.point + z**2 / (2 * self.trials)) / (1 + z**2 / self.trials)

    def to_dict(self):
        return {
            "successes": self.successes,
            "trials": self.trials,
            "point": self.point,
            "lower": self.lower,
            "upper": self.upper,
            "confidence": self.confidence,
        }


def wilson_ci(successes, trials, confidence=0.95):
    if int(trials) != trials or int(successes) != successes:
        raise DomainError("counts must be integers", successes=successes, trials=trials)
    if trials <= 0 or not 0 <= successes <= trials:
        raise DomainError("need trials > 0 and 0 <= successes <= trials", successes=successes, trials=trials)
    if not 0 < confidence < 1:
        raise DomainError("confidence must lie in (0, 1)", confidence=confidence)

    lower, upper = proportion_confint(successes, trials, alpha=1 - confidence, method="wilson")
    return ProportionEstimate(
        successes=int(successes),
        trials=int(trials),
        point=successes / trials,
        lower=max(0.0, float(lower)),
        upper=min(1.0, float(upper)),
        confidence=confidence,
    )
