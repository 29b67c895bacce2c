"""Exception hierarchy shared by every biasbench app.

Each error carries a stable ``code`` and a ``details`` mapping so management
commands can print a machine-readable record on stderr.
"""


class BenchError(Exception):
    code = "bench_error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def as_dict(self):
        return {"error": self.code, "message": self.message, "details": self.details}


class SchemaError(BenchError):
    code = "schema_error"


class DuplicatePairError(BenchError):
    code = "duplicate_pair"


class VocabularyError(BenchError):
    code = "vocabulary_error"


class DuplicateTrialError(BenchError):
    code = "duplicate_trial"


class HornSyntaxError(BenchError):
    code = "syntax_error"

    def __init__(self, message, line, column, expected):
        super().__init__(message, line=line, column=column, expected=expected)
        self.line = line
        self.column = column
        self.expected = expected


class NonTerminationError(BenchError):
    code = "nontermination"


class InstantiationError(BenchError):
    code = "instantiation_error"


class DomainError(BenchError):
    code = "domain_error"


class ContractError(BenchError):
    code = "contract_error"


class ExtractionError(BenchError):
    code = "extraction_error"


class TransportError(BenchError):
    code = "transport_error"


class RequestError(BenchError):
    code = "request_error"


class ReplayError(BenchError):
    code = "replay_error"


class CoverageError(BenchError):
    code = "coverage_error"


class FitError(BenchError):
    code = "fit_error"


class RenderingError(BenchError):
    code = "rendering_error"


class DataError(BenchError):
    code = "data_error"


class OracleMismatchError(BenchError):
    code = "oracle_mismatch"
