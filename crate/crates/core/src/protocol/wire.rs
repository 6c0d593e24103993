//! Byte layout of the `.tbs` stream file and of individual packets.
//!
//! ```text
//! stream header  sample_rate u32 | block_size u16 | codec u8 | version u8
//! packet         "TB" | seq u16 | codec u8 | silence_blocks u32
//!                | snapshot (0, 3 or 6 bytes) | payload_len u16 | payload
//!                | crc16 (only when the header's CRC flag is set)
//! ```
//! All integers are little-endian. The version byte carries the format
//! version in its low seven bits and the CRC flag in bit 7.

use crc::{Crc, CRC_16_IBM_3740};

use crate::audio::check_block_size;
use crate::codecs::{CodecId, CodecState};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 2] = *b"TB";
pub const FORMAT_VERSION: u8 = 1;
pub const CRC_FLAG: u8 = 0x80;
pub const STREAM_HEADER_LEN: usize = 8;
/// Packet bytes before the codec snapshot and after it, excluding payload.
pub const PACKET_FIXED_LEN: usize = 2 + 2 + 1 + 4 + 2;

const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub sample_rate: u32,
    pub block_size: u16,
    pub codec: CodecId,
    pub version: u8,
    pub crc: bool,
}

impl StreamHeader {
    pub fn new(sample_rate: u32, block_size: usize, codec: CodecId) -> Result<Self> {
        check_block_size(block_size)?;
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(Self {
            sample_rate,
            block_size: block_size as u16,
            codec,
            version: FORMAT_VERSION,
            crc: false,
        })
    }

    pub fn with_crc(mut self, crc: bool) -> Self {
        self.crc = crc;
        self
    }

    pub fn block_size(&self) -> usize {
        usize::from(self.block_size)
    }

    /// Encoded bytes of one full block with this header's codec.
    pub fn block_bytes(&self) -> usize {
        self.codec.encoded_len(self.block_size())
    }

    pub fn block_secs(&self) -> f64 {
        self.block_size() as f64 / f64::from(self.sample_rate)
    }

    pub fn to_bytes(&self) -> [u8; STREAM_HEADER_LEN] {
        let mut out = [0u8; STREAM_HEADER_LEN];
        out[..4].copy_from_slice(&self.sample_rate.to_le_bytes());
        out[4..6].copy_from_slice(&self.block_size.to_le_bytes());
        out[6] = self.codec.as_byte();
        out[7] = (self.version & 0x7f) | if self.crc { CRC_FLAG } else { 0 };
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < STREAM_HEADER_LEN {
            return Err(Error::Protocol(format!(
                "stream header needs {STREAM_HEADER_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        let sample_rate = u32::from_le_bytes(bytes[..4].try_into().unwrap());
        let block_size = u16::from_le_bytes([bytes[4], bytes[5]]);
        let version = bytes[7] & 0x7f;
        if version != FORMAT_VERSION {
            return Err(Error::Protocol(format!("unsupported stream version {version}")));
        }
        let codec = CodecId::from_byte(bytes[6])
            .map_err(|e| Error::Protocol(format!("bad stream header: {}", e.to_string().trim_start_matches("codecs: "))))?;
        let header = StreamHeader::new(sample_rate, usize::from(block_size), codec)
            .map_err(|e| Error::Protocol(format!("bad stream header: {e}")))?;
        Ok(header.with_crc(bytes[7] & CRC_FLAG != 0))
    }
}

/// One wire packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub seq: u16,
    pub codec: CodecId,
    /// Silent blocks skipped since the previous packet.
    pub silence_blocks: u32,
    /// Codec state before the first payload sample.
    pub state_snapshot: Vec<u8>,
    pub payload: Vec<u8>,
}

impl Packet {
    pub fn header_len(codec: CodecId) -> usize {
        PACKET_FIXED_LEN + codec.snapshot_len()
    }

    pub fn wire_len(&self) -> usize {
        Self::header_len(self.codec) + self.payload.len()
    }

    pub fn payload_len(&self) -> u16 {
        self.payload.len() as u16
    }

    /// Voiced blocks carried, given the stream's bytes per encoded block.
    pub fn voiced_blocks(&self, block_bytes: usize) -> usize {
        self.payload.len() / block_bytes
    }

    pub fn write_to(&self, out: &mut Vec<u8>, crc: bool) {
        let start = out.len();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.push(self.codec.as_byte());
        out.extend_from_slice(&self.silence_blocks.to_le_bytes());
        out.extend_from_slice(&self.state_snapshot);
        out.extend_from_slice(&self.payload_len().to_le_bytes());
        out.extend_from_slice(&self.payload);
        if crc {
            let sum = CRC16.checksum(&out[start..]);
            out.extend_from_slice(&sum.to_le_bytes());
        }
    }

    pub fn to_bytes(&self, crc: bool) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len() + 2);
        self.write_to(&mut out, crc);
        out
    }
}

/// A packet that could not be parsed and was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub offset: usize,
    pub seq: Option<u16>,
    pub detail: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.seq {
            Some(seq) => write!(f, "packet seq {seq} at byte {}: {}", self.offset, self.detail),
            None => write!(f, "packet at byte {}: {}", self.offset, self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedStream {
    pub header: StreamHeader,
    pub packets: Vec<Packet>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn write_stream(header: &StreamHeader, packets: &[Packet]) -> Vec<u8> {
    let mut out = header.to_bytes().to_vec();
    for p in packets {
        p.write_to(&mut out, header.crc);
    }
    out
}

fn parse_packet(header: &StreamHeader, bytes: &[u8]) -> std::result::Result<(Packet, usize), (Option<u16>, String)> {
    let codec = header.codec;
    let head = Packet::header_len(codec);
    if bytes.len() < PACKET_FIXED_LEN {
        return Err((None, format!("truncated header ({} bytes left)", bytes.len())));
    }
    if bytes[..2] != MAGIC {
        return Err((None, "bad magic".into()));
    }
    let seq = u16::from_le_bytes([bytes[2], bytes[3]]);
    let fail = |detail: String| (Some(seq), detail);
    if bytes[4] != codec.as_byte() {
        return Err(fail(format!("codec byte {} does not match stream codec {codec}", bytes[4])));
    }
    if bytes.len() < head {
        return Err(fail("truncated header".into()));
    }
    let silence_blocks = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    let snapshot = &bytes[9..9 + codec.snapshot_len()];
    CodecState::from_snapshot(codec, snapshot).map_err(|e| fail(e.to_string()))?;
    let len_at = 9 + codec.snapshot_len();
    let payload_len = usize::from(u16::from_le_bytes([bytes[len_at], bytes[len_at + 1]]));
    if payload_len % header.block_bytes() != 0 {
        return Err(fail(format!(
            "payload length {payload_len} is not a multiple of the {}-byte block",
            header.block_bytes()
        )));
    }
    let crc_len = if header.crc { 2 } else { 0 };
    let total = head + payload_len + crc_len;
    if bytes.len() < total {
        return Err(fail(format!(
            "payload length {payload_len} exceeds the {} bytes remaining",
            bytes.len() - head
        )));
    }
    if header.crc {
        let expected = CRC16.checksum(&bytes[..head + payload_len]);
        let found = u16::from_le_bytes([bytes[head + payload_len], bytes[head + payload_len + 1]]);
        if expected != found {
            return Err(fail("crc mismatch".into()));
        }
    }
    let packet = Packet {
        seq,
        codec,
        silence_blocks,
        state_snapshot: snapshot.to_vec(),
        payload: bytes[head..head + payload_len].to_vec(),
    };
    Ok((packet, total))
}

/// Parses a stream file. Damaged packets are skipped with a diagnostic and
/// parsing resumes at the next magic.
pub fn read_stream(bytes: &[u8]) -> Result<ParsedStream> {
    let header = StreamHeader::from_bytes(bytes)?;
    let mut packets = Vec::new();
    let mut diagnostics = Vec::new();
    let mut pos = STREAM_HEADER_LEN;
    while pos < bytes.len() {
        match parse_packet(&header, &bytes[pos..]) {
            Ok((packet, used)) => {
                packets.push(packet);
                pos += used;
            }
            Err((seq, detail)) => {
                log::warn!("dropping packet at byte {pos}: {detail}");
                diagnostics.push(Diagnostic {
                    offset: pos,
                    seq,
                    detail,
                });
                pos += 1;
                match bytes[pos..].windows(2).position(|w| w == MAGIC) {
                    Some(skip) => pos += skip,
                    None => break,
                }
            }
        }
    }
    Ok(ParsedStream {
        header,
        packets,
        diagnostics,
    })
}
