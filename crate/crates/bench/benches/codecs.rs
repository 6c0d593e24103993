use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use tinybird_bench::{chirp, SAMPLE_RATE};
use tinybird_core::audio::{frame_signal, gate_stream, GateState};
use tinybird_core::codecs::{decode, encode, CodecId, CodecState};
use tinybird_core::protocol::{stream_encode, StreamHeader};

fn codecs(c: &mut Criterion) {
    // one second of audio
    let pcm = chirp(SAMPLE_RATE as usize);
    let mut g = c.benchmark_group("codec");
    g.throughput(Throughput::Elements(pcm.len() as u64));
    for codec in CodecId::ALL {
        g.bench_with_input(BenchmarkId::new("encode", codec), &pcm, |b, pcm| {
            b.iter(|| encode(&mut CodecState::new(codec), black_box(pcm)).unwrap())
        });
        let bytes = encode(&mut CodecState::new(codec), &pcm).unwrap();
        g.bench_with_input(BenchmarkId::new("decode", codec), &bytes, |b, bytes| {
            b.iter(|| decode(&mut CodecState::new(codec), black_box(bytes)).unwrap())
        });
    }
    g.finish();
}

fn packetize(c: &mut Criterion) {
    let pcm = chirp(SAMPLE_RATE as usize * 4);
    let blocks = frame_signal(&pcm, 256, SAMPLE_RATE).unwrap();
    let decisions = gate_stream(&blocks, GateState::fixed(), 1000.0);
    let header = StreamHeader::new(SAMPLE_RATE, 256, CodecId::Adpcm).unwrap();
    c.bench_function("stream_encode adpcm 4 s", |b| {
        b.iter(|| stream_encode(header, black_box(&blocks), &decisions, 244).unwrap())
    });
}

criterion_group!(benches, codecs, packetize);
criterion_main!(benches);
