import logging

import pytest

from TrajCert.application.models.errors import ConfigError
from TrajCert.infrastructure.observability import langfuse_observability
from TrajCert.infrastructure.observability.factory import create_observability
from TrajCert.infrastructure.observability.langfuse_observability import LangfuseObservability
from TrajCert.infrastructure.observability.logging_observability import LoggingObservability
from TrajCert.orchestration.coordinators.suite_coordinator import run_suite

CREDENTIALS = {"LANGFUSE_PUBLIC_KEY": "pk", "LANGFUSE_SECRET_KEY": "sk", "LANGFUSE_HOST": "http://localhost"}


class RecordingTrace:
    def __init__(self, name, calls):
        self.id = f"trace-{name}"
        self.calls = calls

    def event(self, **kwargs):
        self.calls.append(("event", kwargs))

    def score(self, **kwargs):
        self.calls.append(("score", kwargs))

    def update(self, **kwargs):
        self.calls.append(("update", kwargs))


class RecordingClient:
    instances = []

    def __init__(self, **kwargs):
        self.kwargs = kwargs
        self.calls = []
        RecordingClient.instances.append(self)

    def trace(self, name, session_id=None, metadata=None):
        self.calls.append(("trace", {"name": name, "metadata": metadata}))
        return RecordingTrace(name, self.calls)

    def flush(self):
        self.calls.append(("flush", {}))


@pytest.fixture
def recording_langfuse(monkeypatch):
    RecordingClient.instances = []
    monkeypatch.setattr(langfuse_observability, "Langfuse", RecordingClient)
    return RecordingClient


def test_factory_selects_backend():
    assert isinstance(create_observability({"type": "logging"}), LoggingObservability)
    assert isinstance(create_observability({"type": "langfuse"}), LangfuseObservability)
    assert create_observability({"type": "langfuse", "enabled": False}) is None
    with pytest.raises(ConfigError):
        create_observability({"type": "statsd"})


def test_langfuse_without_credentials_warns_and_skips(recording_langfuse):
    observability = LangfuseObservability(environ={})
    with pytest.warns(UserWarning, match="credentials not found"):
        trace = observability.start_trace("suite")
    assert trace is None
    observability.log_event("cell", {"final_cert": 1.0}, {"trace": trace})
    observability.end_trace(trace)
    assert recording_langfuse.instances == []


def test_langfuse_records_trace_events_and_scores(recording_langfuse):
    observability = LangfuseObservability(environ=CREDENTIALS)
    trace = observability.start_trace("suite", {"metadata": {"workers": 2}})
    observability.log_event("cell", {"cell": "base/0", "final_cert": 0.5}, {"trace": trace})
    observability.end_trace(trace, "success", {"failures": 0})

    client = recording_langfuse.instances[0]
    assert client.kwargs == {"public_key": "pk", "secret_key": "sk", "host": "http://localhost"}
    kinds = [kind for kind, _ in client.calls]
    assert kinds == ["trace", "event", "score", "update", "flush"]
    assert client.calls[0][1]["metadata"] == {"project_name": "tcert", "workers": 2}
    assert client.calls[2][1] == {"name": "final_cert", "value": 0.5, "comment": "base/0"}
    assert client.calls[3][1] == {"output": {"status": "success", "failures": 0}}
    assert observability.active_traces == {}


def test_suite_traces_every_cell(recording_langfuse, smoke_condition):
    observability = LangfuseObservability(environ=CREDENTIALS)
    condition = smoke_condition.model_copy(update={"T": 5, "seeds": (0, 1)})
    suite = run_suite([condition], observability=observability)
    assert suite.ok
    client = recording_langfuse.instances[0]
    assert sum(kind == "score" for kind, _ in client.calls) == 2
    assert client.calls[-1][0] == "flush"


def test_logging_backend_writes_structured_lines(caplog):
    observability = LoggingObservability()
    with caplog.at_level(logging.INFO):
        trace = observability.start_trace("suite")
        observability.log_event("cell", {"final_cert": 0.25, "cell": "base/0"}, {"trace": trace})
        observability.end_trace(trace, "success")
    text = caplog.text
    assert f"trace_start trace={trace}" in text
    assert "event=cell" in text and "final_cert=0.25" in text
    assert "status=success" in text
    assert observability.active_traces == {}
