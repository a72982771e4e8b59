//! Configuration documents and CSV trace files. This is the only layer that
//! sees ordinary frequencies in Hz.

mod config;
mod trace_file;

pub use config::{
    CavitySection, ConfigDocument, DetectionSection, FitSection, GridSection, ModeSection, OracleSection,
    RingdownSection, SweepSection, apply_override, config_windows, parse_config, parse_config_with_overrides,
};
pub use trace_file::{
    read_raw_traces, read_ringdown, read_trace, read_trace_str, trace_to_string, write_trace, write_trajectory,
};
