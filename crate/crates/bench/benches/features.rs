use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex;
use std::hint::black_box;
use tinybird_bench::{chirp, SAMPLE_RATE};
use tinybird_core::dsp::{spectrogram, Fft, MfccExtractor};

fn fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft");
    for n in [64usize, 256, 1024] {
        let fft = Fft::<f32>::new(n).unwrap();
        let input: Vec<Complex<f32>> = (0..n).map(|i| Complex::new((i as f32 * 0.37).sin(), 0.0)).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &input, |b, input| {
            b.iter(|| {
                let mut buf = input.clone();
                fft.process(black_box(&mut buf));
                buf
            })
        });
    }
    g.finish();
}

fn mfcc(c: &mut Criterion) {
    let ex = MfccExtractor::standard(256, SAMPLE_RATE).unwrap();
    let block = chirp(256);
    c.bench_function("mfcc block 256", |b| b.iter(|| ex.compute(black_box(&block)).unwrap()));

    let pcm = chirp(SAMPLE_RATE as usize);
    c.bench_function("spectrogram 1 s hop 128", |b| {
        b.iter(|| spectrogram(black_box(&pcm), SAMPLE_RATE, 256, 128).unwrap())
    });
}

criterion_group!(benches, fft, mfcc);
criterion_main!(benches);
