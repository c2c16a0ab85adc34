use thiserror::Error;

/// Errors raised by the PHY, channel and receiver stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("channel index {0} outside 0..280")]
    ChannelOutOfRange(usize),
    #[error("payload length {0} outside 8..=16 bytes")]
    InvalidPayloadLength(usize),
    #[error("hop sequence id {0} does not fit in 9 bits")]
    InvalidHopSequenceId(u16),
    #[error("group {0} outside 1..=8")]
    InvalidGroup(u8),
    #[error("expected {expected} input bits, got {got}")]
    WrongInputLength { expected: usize, got: usize },
    #[error("data codeword input must end with six zero bits")]
    BadTermination,
    #[error("packet placed at sample {start} with {len} samples overflows a trace of {trace_len}")]
    PlacementOverflow {
        start: usize,
        len: usize,
        trace_len: usize,
    },
    #[error("antenna sequences differ in length")]
    RaggedAntennas,
    #[error("trace contains non-finite samples")]
    NonFiniteSample,
    #[error("antenna count mismatch: expected {expected}, got {got}")]
    AntennaMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
