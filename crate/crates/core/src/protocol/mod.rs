//! The silence-suppressing wire format and its host-side reconstruction.

mod stream;
mod wire;

pub use stream::{
    duty_cycle, stream_decode, stream_encode, GapPolicy, Reconstruction, SeqGap, StreamEncoder,
    DEFAULT_MTU,
};
pub use wire::{
    read_stream, write_stream, Diagnostic, Packet, ParsedStream, StreamHeader, CRC_FLAG,
    FORMAT_VERSION, MAGIC, PACKET_FIXED_LEN, STREAM_HEADER_LEN,
};
