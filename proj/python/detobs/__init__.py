"""Python bindings for the distributed event-triggered DNN observer."""

import json

from ._detobs import (  # noqa: F401
    ConfigError,
    DivergenceError,
    GainCertificate,
    ModelError,
    ProtocolError,
    SimConfig,
    SimulationTrace,
    compare_runs,
    is_connected,
    laplacian,
    lmi_matrix,
    load_config,
    min_eig_symmetric,
    reference_config,
    reference_disturbance,
    parse_config,
    read_trace_csv,
    rmse,
    synthesize_gain,
    trace_csv_header,
    trigger_constants,
    vanderpol_drift,
    verify_gain,
    write_trace_csv,
    zeno_lower_bound,
)
from ._detobs import run as _run


def run(config):
    """Run one simulation; returns a dict with 'trace', 'report', 'event_times'
    and the raw 'trace_object' usable with write_trace_csv / rmse."""
    out = _run(config)
    return {
        "trace": out["trace"],
        "report": json.loads(out["report_json"]),
        "report_json": out["report_json"],
        "event_times": out["event_times"],
        "trace_object": out["_trace"],
    }
