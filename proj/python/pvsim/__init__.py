"""Trace-driven simulator of secure-container memory backends and domain gates.

Thin wrapper over the native module: functions returning structured data
deserialize the core's JSON so callers get plain dicts.
"""

import json as _json

from ._core import (
    SimError,
    TraceError,
    __version__,
    builtin_profiles,
    generate_trace,
    reclamation_ops,
    report_schema,
    syscall_latency_table,
    waste_at_granularity,
)
from ._core import (
    compare_json as _compare_json,
)
from ._core import (
    fault_breakdown_json as _fault_breakdown_json,
)
from ._core import (
    overhead_stats_json as _overhead_stats_json,
)
from ._core import (
    replay_json as _replay_json,
)

__all__ = [
    "SimError",
    "TraceError",
    "__version__",
    "builtin_profiles",
    "compare",
    "fault_breakdown",
    "generate_trace",
    "overhead_stats",
    "reclamation_ops",
    "replay",
    "report_schema",
    "syscall_latency_table",
    "waste_at_granularity",
]


def replay(trace, **kwargs):
    """Replay a JSONL trace on one backend; returns the report dict."""
    return _json.loads(_replay_json(trace, **kwargs))


def compare(trace, **kwargs):
    """Replay a trace on several backends plus the flat reference model."""
    return _json.loads(_compare_json(trace, **kwargs))


def fault_breakdown(profile="paracell"):
    """Cost structure of one fresh anonymous user fault under a profile."""
    return _json.loads(_fault_breakdown_json(profile))


def overhead_stats(samples, threshold=0.01):
    """Aggregate relative-overhead stats over (t, in_use, host) samples."""
    return _json.loads(_overhead_stats_json(samples, threshold))
