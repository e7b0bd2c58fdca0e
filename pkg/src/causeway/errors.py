"""Exception hierarchy.

Every error carries the name of the stage that raised it (``module`` class
attribute) so the CLI can emit module-tagged diagnostics, and an ``exit_code``
grouping: 2 for configuration problems, 3 for data/model problems, 4 for
remote-endpoint problems.
"""


class CausewayError(Exception):
    module = "causeway"
    exit_code = 1


class ConfigError(CausewayError):
    module = "config"
    exit_code = 2


class DataError(CausewayError):
    exit_code = 3


class RemoteError(CausewayError):
    module = "explain"
    exit_code = 4


# --- ingest ---------------------------------------------------------------

class IngestError(DataError):
    module = "ingest"


class EmptyInput(IngestError):
    pass


class MissingTimestampColumn(IngestError):
    pass


class NonMonotonicTimestamps(IngestError):
    pass


class AllMissingChannel(IngestError):
    pass


class AllChannelsDropped(IngestError):
    pass


# --- anomaly --------------------------------------------------------------

class AnomalyError(DataError):
    module = "anomaly"


class UnknownChannel(AnomalyError):
    pass


class ZeroVarianceTarget(AnomalyError):
    pass


# --- granger --------------------------------------------------------------

class GrangerError(DataError):
    module = "granger"


class TooShort(GrangerError):
    pass


class SingularDesign(GrangerError):
    pass


class ConstantSeries(GrangerError):
    pass


class InvalidDegreesOfFreedom(GrangerError):
    pass


class WindowTooShort(GrangerError):
    pass


class NoEligibleChannels(GrangerError):
    pass


# --- causal graph / explain -----------------------------------------------

class GraphError(DataError):
    module = "graph"


class UnknownTarget(GraphError):
    pass


class ExplainError(DataError):
    module = "explain"


class EmptyCauseList(ExplainError):
    pass


class RemoteUnavailable(RemoteError):
    pass


class MalformedResponse(RemoteError):
    pass


# --- synth / metrics --------------------------------------------------------

class InvalidSpec(DataError):
    module = "synth"


class MetricsError(DataError):
    module = "metrics"


class DuplicateAnnotationTime(MetricsError):
    pass


class EmptyTruth(MetricsError):
    pass
