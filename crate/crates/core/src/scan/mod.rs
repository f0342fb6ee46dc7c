//! Pulse sequences, the coarse-to-fine traversal of the rotation orbit and
//! the three measurement protocols built from them.

mod hierarchical;
mod protocol;
mod pulse;

pub use hierarchical::{
    hierarchical_scan, hierarchical_scan_detailed, ScanConfig, ScanPoint, ScanResult, ScanStage,
};
pub use protocol::{
    protocol_1, protocol_2, protocol_3, protocol_sequence, run_protocol, ProtocolConfig,
    ProtocolId, ProtocolRun, ReadoutRecord,
};
pub use pulse::{pump, run_sequence, Preparation, PulseOp, ReadoutKind, SequenceEnv, Stage};
