use log::warn;

use super::wire::{Packet, StreamHeader};
use crate::audio::{AudioBlock, GateDecision};
use crate::codecs::{self, CodecState};
use crate::error::{Error, Result};

/// Typical BLE payload after link and ATT headers.
pub const DEFAULT_MTU: usize = 244;

/// Packetizes gated blocks.
///
/// Silent blocks only bump a counter. Voiced blocks are compressed into the
/// open packet, which is flushed when the next block would overflow the MTU or
/// when silence resumes. The counter rides in front of the next packet.
#[derive(Debug)]
pub struct StreamEncoder {
    header: StreamHeader,
    mtu: usize,
    state: CodecState,
    seq: u16,
    silent_run: u32,
    open: Option<Packet>,
}

impl StreamEncoder {
    pub fn new(header: StreamHeader, mtu: usize) -> Result<Self> {
        let needed = Packet::header_len(header.codec) + header.block_bytes();
        if mtu < needed {
            return Err(Error::Config(format!(
                "mtu {mtu} cannot hold one {} block ({needed} bytes with header)",
                header.codec
            )));
        }
        Ok(Self {
            header,
            mtu,
            state: CodecState::new(header.codec),
            seq: 0,
            silent_run: 0,
            open: None,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Blocks that fit in one packet.
    pub fn blocks_per_packet(&self) -> usize {
        (self.mtu - Packet::header_len(self.header.codec)) / self.header.block_bytes()
    }

    fn next_seq(&mut self) -> u16 {
        let seq = self.seq;
        self.seq = self.seq.wrapping_add(1);
        seq
    }

    fn open_packet(&mut self) -> Packet {
        let silence_blocks = std::mem::take(&mut self.silent_run);
        Packet {
            seq: self.next_seq(),
            codec: self.header.codec,
            silence_blocks,
            state_snapshot: self.state.snapshot(),
            payload: Vec::new(),
        }
    }

    pub fn push(&mut self, block: &AudioBlock, decision: GateDecision) -> Result<Option<Packet>> {
        if block.block_size() != self.header.block_size() {
            return Err(Error::Config(format!(
                "block {} has {} samples, stream expects {}",
                block.index,
                block.block_size(),
                self.header.block_size()
            )));
        }
        match decision {
            GateDecision::Silent => {
                let flushed = self.open.take();
                self.silent_run = self.silent_run.checked_add(1).ok_or_else(|| {
                    Error::Protocol("silence counter overflow".into())
                })?;
                Ok(flushed)
            }
            GateDecision::Voiced => {
                let mut flushed = None;
                if let Some(p) = &self.open {
                    if p.wire_len() + self.header.block_bytes() > self.mtu {
                        flushed = self.open.take();
                    }
                }
                if self.open.is_none() {
                    let p = self.open_packet();
                    self.open = Some(p);
                }
                let bytes = codecs::encode(&mut self.state, &block.samples)?;
                self.open.as_mut().unwrap().payload.extend_from_slice(&bytes);
                Ok(flushed)
            }
        }
    }

    /// Flushes the open packet and any trailing silence as a terminal empty
    /// packet.
    pub fn finish(mut self) -> Vec<Packet> {
        let mut out: Vec<Packet> = self.open.take().into_iter().collect();
        if self.silent_run > 0 {
            let p = self.open_packet();
            out.push(p);
        }
        out
    }
}

pub fn stream_encode(
    header: StreamHeader,
    blocks: &[AudioBlock],
    decisions: &[GateDecision],
    mtu: usize,
) -> Result<Vec<Packet>> {
    if blocks.len() != decisions.len() {
        return Err(Error::Config(format!(
            "{} blocks but {} gate decisions",
            blocks.len(),
            decisions.len()
        )));
    }
    let mut encoder = StreamEncoder::new(header, mtu)?;
    let mut packets = Vec::new();
    for (block, &decision) in blocks.iter().zip(decisions) {
        packets.extend(encoder.push(block, decision)?);
    }
    packets.extend(encoder.finish());
    Ok(packets)
}

/// What the decoder substitutes for packets lost in transit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapPolicy {
    /// Skip the loss; the output is shorter by the lost packets' content.
    #[default]
    Omit,
    /// Insert this many silent blocks per missing packet.
    SilentBlocks(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqGap {
    pub expected: u16,
    pub found: u16,
    pub missing: u16,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reconstruction {
    pub samples: Vec<i16>,
    pub voiced_blocks: u64,
    pub silent_blocks: u64,
    pub gaps: Vec<SeqGap>,
}

impl Reconstruction {
    pub fn total_blocks(&self) -> u64 {
        self.voiced_blocks + self.silent_blocks
    }
}

/// Rebuilds the time-domain signal: each packet contributes its silent run as
/// zeros followed by its decoded payload.
pub fn stream_decode(header: &StreamHeader, packets: &[Packet], gap: GapPolicy) -> Result<Reconstruction> {
    let block = header.block_size();
    let mut out = Reconstruction::default();
    // streams number packets from 0, so a lost first packet is a gap too
    let mut expected: Option<u16> = Some(0);
    for p in packets {
        if p.codec != header.codec {
            return Err(Error::Protocol(format!(
                "packet seq {} uses {} in a {} stream",
                p.seq, p.codec, header.codec
            )));
        }
        if let Some(exp) = expected {
            if p.seq != exp {
                let missing = p.seq.wrapping_sub(exp);
                let names: Vec<String> = (0..missing.min(8)).map(|k| exp.wrapping_add(k).to_string()).collect();
                warn!("sequence gap: missing seq {}{}", names.join(", "), if missing > 8 { ", ..." } else { "" });
                out.gaps.push(SeqGap {
                    expected: exp,
                    found: p.seq,
                    missing,
                });
                if let GapPolicy::SilentBlocks(n) = gap {
                    let blocks = u64::from(n) * u64::from(missing);
                    out.samples.resize(out.samples.len() + blocks as usize * block, 0);
                    out.silent_blocks += blocks;
                }
            }
        }
        expected = Some(p.seq.wrapping_add(1));

        out.samples
            .resize(out.samples.len() + p.silence_blocks as usize * block, 0);
        out.silent_blocks += u64::from(p.silence_blocks);

        if p.payload.len() % header.block_bytes() != 0 {
            return Err(Error::Protocol(format!(
                "packet seq {} payload of {} bytes is not whole blocks",
                p.seq,
                p.payload.len()
            )));
        }
        let mut state = CodecState::from_snapshot(header.codec, &p.state_snapshot)?;
        let decoded = codecs::decode(&mut state, &p.payload)?;
        out.voiced_blocks += (decoded.len() / block) as u64;
        out.samples.extend(decoded);
    }
    Ok(out)
}

/// Fraction of blocks that were transmitted.
pub fn duty_cycle(header: &StreamHeader, packets: &[Packet]) -> f64 {
    let (voiced, silent) = packets.iter().fold((0u64, 0u64), |(v, s), p| {
        (
            v + p.voiced_blocks(header.block_bytes()) as u64,
            s + u64::from(p.silence_blocks),
        )
    });
    if voiced + silent == 0 {
        0.0
    } else {
        voiced as f64 / (voiced + silent) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::frame_signal;
    use crate::codecs::CodecId;
    use GateDecision::{Silent as S, Voiced as V};

    fn blocks(n: usize, block: usize) -> Vec<AudioBlock> {
        let pcm: Vec<i16> = (0..n * block).map(|i| ((i * 37 % 2001) as i16) - 1000).collect();
        frame_signal(&pcm, block, 16_000).unwrap()
    }

    fn header(codec: CodecId) -> StreamHeader {
        StreamHeader::new(16_000, 256, codec).unwrap()
    }

    #[test]
    fn all_silent_gives_terminal_packet() {
        let h = header(CodecId::Adpcm);
        let packets = stream_encode(h, &blocks(10, 256), &[S; 10], DEFAULT_MTU).unwrap();
        assert_eq!(packets.len(), 1);
        assert_eq!(packets[0].silence_blocks, 10);
        assert_eq!(packets[0].payload_len(), 0);
        assert_eq!(duty_cycle(&h, &packets), 0.0);
        let rec = stream_decode(&h, &packets, GapPolicy::Omit).unwrap();
        assert_eq!(rec.samples, vec![0; 2560]);
    }

    #[test]
    fn traced_example() {
        let h = header(CodecId::Adpcm);
        let decisions = [S, S, S, V, V, S];
        let packets = stream_encode(h, &blocks(6, 256), &decisions, 1024).unwrap();
        assert_eq!(packets.len(), 2);
        assert_eq!(packets[0].silence_blocks, 3);
        assert_eq!(packets[0].payload.len(), 256);
        assert_eq!(packets[1].silence_blocks, 1);
        assert!(packets[1].payload.is_empty());
        assert_eq!(packets.iter().map(|p| p.seq).collect::<Vec<_>>(), vec![0, 1]);
        assert!((duty_cycle(&h, &packets) - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn default_mtu_splits_adpcm_blocks() {
        let h = header(CodecId::Adpcm);
        let enc = StreamEncoder::new(h, DEFAULT_MTU).unwrap();
        assert_eq!(enc.blocks_per_packet(), 1);
        let packets = stream_encode(h, &blocks(5, 256), &[V; 5], DEFAULT_MTU).unwrap();
        assert_eq!(packets.len(), 5);
        assert!(packets.iter().all(|p| p.wire_len() <= DEFAULT_MTU && p.silence_blocks == 0));
    }

    #[test]
    fn raw_blocks_do_not_fit_a_ble_mtu() {
        // 11-byte header + 512-byte block > 244
        let err = StreamEncoder::new(header(CodecId::Raw), DEFAULT_MTU).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn raw_all_voiced_packing() {
        let h = header(CodecId::Raw);
        let mtu = 1100;
        let per = (mtu - Packet::header_len(CodecId::Raw)) / 512;
        assert_eq!(per, 2);
        let packets = stream_encode(h, &blocks(7, 256), &[V; 7], mtu).unwrap();
        let sizes: Vec<usize> = packets.iter().map(|p| p.payload.len() / 512).collect();
        assert_eq!(sizes, vec![2, 2, 2, 1]);
        assert!(packets.iter().all(|p| p.silence_blocks == 0));
        assert_eq!(duty_cycle(&h, &packets), 1.0);
    }

    #[test]
    fn dropped_middle_packet() {
        let h = header(CodecId::Raw);
        let decisions = [V, S, V, V, S, V];
        let bs = blocks(6, 256);
        let packets = stream_encode(h, &bs, &decisions, 2048).unwrap();
        assert_eq!(packets.len(), 3);
        let full = stream_decode(&h, &packets, GapPolicy::Omit).unwrap();
        assert_eq!(full.samples.len(), 6 * 256);

        let lost = [packets[0].clone(), packets[2].clone()];
        let rec = stream_decode(&h, &lost, GapPolicy::Omit).unwrap();
        let contribution = (packets[1].silence_blocks as usize + packets[1].payload.len() / 512) * 256;
        assert_eq!(rec.samples.len(), full.samples.len() - contribution);
        assert_eq!(rec.gaps, vec![SeqGap { expected: 1, found: 2, missing: 1 }]);

        let padded = stream_decode(&h, &lost, GapPolicy::SilentBlocks(2)).unwrap();
        assert_eq!(padded.samples.len(), rec.samples.len() + 512);
    }

    #[test]
    fn packets_decode_independently() {
        let h = header(CodecId::Cfdm);
        let decisions = [V, V, S, V, S, S, V, V, V];
        let bs = blocks(decisions.len(), 256);
        let packets = stream_encode(h, &bs, &decisions, 60).unwrap();
        let full = stream_decode(&h, &packets, GapPolicy::Omit).unwrap();
        let mut offset = 0usize;
        for p in &packets {
            offset += p.silence_blocks as usize * 256;
            let alone = stream_decode(&h, std::slice::from_ref(p), GapPolicy::Omit).unwrap();
            let voiced = &alone.samples[p.silence_blocks as usize * 256..];
            assert_eq!(voiced, &full.samples[offset..offset + voiced.len()]);
            offset += voiced.len();
        }
    }

    #[test]
    fn rejects_mismatched_block() {
        let h = header(CodecId::Dm);
        let mut enc = StreamEncoder::new(h, DEFAULT_MTU).unwrap();
        let small = AudioBlock::new(0, vec![0; 128], 16_000);
        assert!(enc.push(&small, V).is_err());
    }
}
