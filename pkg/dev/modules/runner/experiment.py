"""Fan the factorial design out to the gateway and archive every outcome.

One work unit is (endpoint, strategy, pair, run). A unit performs the
elicitation call when the strategy is two-step, then one decision call per
condition. Units run on a thread pool with a bounded submission window;
records are appended by the calling thread in unit order. Records whose call
failed are retried when the run is resumed.
"""

import logging
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from django.db import models

from core.conf import bench_setting
from core.errors import ExtractionError, ReplayError, RequestError, TransportError
from modules.dilemmas.domain import Condition, Decision
from modules.dilemmas.trials import ElicitationRecord, TrialRecord, split_records
from modules.strategies.cues import axiom_cues
from modules.strategies.prompts import build_elicitation_prompt, compose_prompt, parse_best_practices
from modules.strategies.specs import AxiomMode

from .decisions import parse_decision

logger = logging.getLogger(__name__)

OPEN_ENDED_REASON = "open-ended: awaiting human label"
GATEWAY_FAILURES = (TransportError, RequestError, ReplayError)
# Units submitted ahead of the one being archived, per worker.
WINDOW_PER_WORKER = 2


class ExperimentMode(models.TextChoices):
    CLOSED = "closed", "Closed (Option A / Option B)"
    OPEN_ENDED = "open_ended", "Open-ended"


class ElicitationSource(models.TextChoices):
    BIASED = "biased", "Elicit once from the biased variant"
    UNBIASED = "unbiased", "Elicit once from the unbiased variant"
    PER_CONDITION = "per_condition", "Elicit separately for each variant"


@dataclass(frozen=True)
class WorkUnit:
    endpoint: object
    strategy: object
    pair: object
    run_index: int


@dataclass
class CompletenessReport:
    expected_trials: int = 0
    expected_elicitations: int = 0
    archived_trials: int = 0
    archived_elicitations: int = 0
    resumed_trials: int = 0
    failed_trials: int = 0
    invalid_trials: int = 0
    failed_elicitations: int = 0
    network_calls: int = 0
    replay_misses: int = 0
    invalid_reasons: dict = field(default_factory=dict)

    @property
    def complete(self):
        return (self.archived_trials, self.archived_elicitations) == (self.expected_trials, self.expected_elicitations)

    def to_dict(self):
        return {
            "complete": self.complete,
            "expected_trials": self.expected_trials,
            "archived_trials": self.archived_trials,
            "resumed_trials": self.resumed_trials,
            "failed_trials": self.failed_trials,
            "invalid_trials": self.invalid_trials,
            "invalid_reasons": self.invalid_reasons,
            "expected_elicitations": self.expected_elicitations,
            "archived_elicitations": self.archived_elicitations,
            "failed_elicitations": self.failed_elicitations,
            "network_calls": self.network_calls,
            "replay_misses": self.replay_misses,
        }


def _elicitation_sources(source):
    if source == ElicitationSource.PER_CONDITION:
        return (Condition.BIASED, Condition.UNBIASED)
    return (Condition(str(source)),)


class ExperimentRunner:
    def __init__(
        self,
        gateway,
        archive,
        runs_per_condition=None,
        mode=ExperimentMode.CLOSED,
        elicitation_source=ElicitationSource.BIASED,
        cue_renderer=None,
        workers=None,
    ):
        self.gateway = gateway
        self.archive = archive
        self.runs = runs_per_condition or bench_setting("RUNS_PER_CONDITION")
        self.mode = ExperimentMode(mode)
        self.elicitation_source = ElicitationSource(elicitation_source)
        self.cue_renderer = cue_renderer
        self.workers = workers or bench_setting("MAX_IN_FLIGHT")
        self.replay_misses = 0
        self._miss_lock = threading.Lock()

    @property
    def open_ended(self):
        return self.mode == ExperimentMode.OPEN_ENDED

    def units(self, pairs, strategies, endpoints):
        for endpoint in endpoints:
            for strategy in strategies:
                for pair in pairs:
                    for run_index in range(self.runs):
                        yield WorkUnit(endpoint, strategy, pair, run_index)

    def _unit_done(self, unit):
        base = (unit.endpoint.model_id, unit.strategy.id, unit.pair.pair_id)
        if not all(self.archive.has_trial((*base, str(condition), unit.run_index)) for condition in Condition):
            return False
        if not unit.strategy.is_two_step:
            return True
        sources = _elicitation_sources(self.elicitation_source)
        return all(self.archive.has_elicitation((*base, str(source), unit.run_index)) for source in sources)

    def _gateway_failed(self, exc):
        if isinstance(exc, ReplayError):
            with self._miss_lock:
                self.replay_misses += 1

    def _elicit(self, unit, source):
        bundle = build_elicitation_prompt(unit.pair.dilemma(source))
        base = {
            "model_id": unit.endpoint.model_id,
            "strategy_id": unit.strategy.id,
            "pair_id": unit.pair.pair_id,
            "run_index": unit.run_index,
            "source_condition": source,
        }
        try:
            exchange = self.gateway.complete(unit.endpoint, bundle, unit.run_index)
        except GATEWAY_FAILURES as exc:
            self._gateway_failed(exc)
            logger.warning(
                "Elicitation failed for %s/%s run %d: %s", unit.pair.pair_id, unit.strategy.id, unit.run_index, exc
            )
            return ElicitationRecord(raw_text="", error=exc.message, **base)

        record = {
            "raw_text": exchange.text,
            "prompt_tokens": exchange.prompt_tokens,
            "completion_tokens": exchange.completion_tokens,
            "timestamp": exchange.created_at,
            "backend": exchange.origin,
        }
        try:
            return ElicitationRecord(cues=parse_best_practices(exchange.text), **base, **record)
        except ExtractionError as exc:
            return ElicitationRecord(error=exc.message, **base, **record)

    def _cues(self, unit):
        """Cues per condition plus the elicitation records produced for them."""
        strategy = unit.strategy
        if strategy.axiom_mode == AxiomMode.PROBEAX:
            cues = axiom_cues(unit.pair, self.cue_renderer)
            return {condition: (cues, None) for condition in Condition}, []
        if not strategy.is_two_step:
            return {condition: (None, None) for condition in Condition}, []

        sources = _elicitation_sources(self.elicitation_source)
        records = [self._elicit(unit, source) for source in sources]
        by_source = dict(zip(sources, records, strict=True))
        cues = {}
        for condition in Condition:
            record = by_source.get(condition, records[0])
            cues[condition] = (record.cues, None if record.succeeded else record)
        return cues, records

    def _decide(self, unit, condition, cues, failed_elicitation):
        dilemma = unit.pair.dilemma(condition)
        base = {
            "model_id": unit.endpoint.model_id,
            "strategy_id": unit.strategy.id,
            "pair_id": unit.pair.pair_id,
            "condition": condition,
            "run_index": unit.run_index,
            "elicited_cues": cues,
        }
        if failed_elicitation is not None:
            # Only a failed call is an error; an answer without best practices is a final invalid trial.
            error = failed_elicitation.error if failed_elicitation.retryable else None
            return TrialRecord(raw_text="", decision=Decision.invalid("elicitation failed"), error=error, **base)

        bundle = compose_prompt(unit.strategy, dilemma, cues=cues, open_ended=self.open_ended)
        try:
            exchange = self.gateway.complete(unit.endpoint, bundle, unit.run_index)
        except GATEWAY_FAILURES as exc:
            self._gateway_failed(exc)
            logger.warning(
                "Decision call failed for %s %s run %d: %s", unit.pair.pair_id, condition, unit.run_index, exc
            )
            return TrialRecord(raw_text="", decision=Decision.invalid("gateway error"), error=exc.message, **base)

        decision = Decision.invalid(OPEN_ENDED_REASON) if self.open_ended else parse_decision(exchange.text)
        return TrialRecord(
            raw_text=exchange.text,
            decision=decision,
            prompt_tokens=exchange.prompt_tokens,
            completion_tokens=exchange.completion_tokens,
            timestamp=exchange.created_at,
            backend=exchange.origin,
            **base,
        )

    def execute(self, unit):
        """All records for one unit, skipping any already archived."""
        if self._unit_done(unit):
            return []
        cues, elicitations = self._cues(unit)
        records = [record for record in elicitations if not self.archive.has_elicitation(record.key)]
        for condition in Condition:
            key = (unit.endpoint.model_id, unit.strategy.id, unit.pair.pair_id, str(condition), unit.run_index)
            if not self.archive.has_trial(key):
                records.append(self._decide(unit, condition, *cues[condition]))
        return records

    def _archive(self, records):
        for record in records:
            self.archive.append(record)

    def run(self, pairs, strategies, endpoints):
        pairs, strategies, endpoints = list(pairs), list(strategies), list(endpoints)
        resumed = self.report(pairs, strategies, endpoints).archived_trials
        logger.info(
            "Running %d models x %d strategies x %d pairs x %d runs (%s mode)",
            len(endpoints),
            len(strategies),
            len(pairs),
            self.runs,
            self.mode,
        )
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            pending = deque()
            for unit in self.units(pairs, strategies, endpoints):
                pending.append(executor.submit(self.execute, unit))
                if len(pending) >= self.workers * WINDOW_PER_WORKER:
                    self._archive(pending.popleft().result())
            while pending:
                self._archive(pending.popleft().result())
        report = self.report(pairs, strategies, endpoints)
        report.resumed_trials = resumed
        logger.info("Run finished: %s", report.to_dict())
        return report

    def report(self, pairs, strategies, endpoints):
        model_ids = {endpoint.model_id for endpoint in endpoints}
        strategy_ids = {strategy.id for strategy in strategies}
        pair_ids = {pair.pair_id for pair in pairs}
        n_two_step = sum(strategy.is_two_step for strategy in strategies)
        n_sources = len(_elicitation_sources(self.elicitation_source))

        trials, elicitations = split_records(self.archive.read() if self.archive.path.exists() else [])

        def planned(record):
            return record.model_id in model_ids and record.strategy_id in strategy_ids and record.pair_id in pair_ids

        trials = [t for t in trials if planned(t) and t.run_index < self.runs]
        elicitations = [e for e in elicitations if planned(e) and e.run_index < self.runs]
        reasons = {}
        for trial in trials:
            if not trial.decision.is_valid and trial.error is None:
                reasons[trial.decision.reason] = reasons.get(trial.decision.reason, 0) + 1

        return CompletenessReport(
            expected_trials=len(endpoints) * len(strategies) * len(pairs) * len(Condition) * self.runs,
            expected_elicitations=len(endpoints) * n_two_step * len(pairs) * self.runs * n_sources,
            archived_trials=len(trials),
            archived_elicitations=len(elicitations),
            failed_trials=sum(t.error is not None for t in trials),
            invalid_trials=sum(not t.decision.is_valid for t in trials),
            failed_elicitations=sum(not e.succeeded for e in elicitations),
            network_calls=getattr(self.gateway, "network_calls", 0),
            replay_misses=self.replay_misses,
            invalid_reasons=dict(sorted(reasons.items())),
        )


def run_experiment(gateway, archive, pairs, strategies, endpoints, **options):
    return ExperimentRunner(gateway, archive, **options).run(pairs, strategies, endpoints)
