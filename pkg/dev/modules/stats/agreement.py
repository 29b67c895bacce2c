from dataclasses import dataclass

import numpy as np
from sklearn.metrics import cohen_kappa_score

from core.errors import DomainError


@dataclass(frozen=True)
class Agreement:
    n: int
    matches: int
    percent_agreement: float
    kappa: float | None

    def to_dict(self):
        return {
            "n": self.n,
            "matches": self.matches,
            "percent_agreement": self.percent_agreement,
            "kappa": self.kappa,
        }


def agreement(labels_a, labels_b):
    """Percent agreement and Cohen's kappa; kappa is None when chance agreement is 1."""
    a = np.asarray(list(labels_a))
    b = np.asarray(list(labels_b))
    if a.size == 0 or a.size != b.size:
        raise DomainError("label vectors must be non-empty and of equal length", n_a=int(a.size), n_b=int(b.size))

    matches = int(np.sum(a == b))
    labels = np.union1d(a, b)
    expected = sum(np.mean(a == label) * np.mean(b == label) for label in labels)
    kappa = None if np.isclose(expected, 1.0) else float(cohen_kappa_score(a, b))
    return Agreement(int(a.size), matches, matches / a.size, kappa)
