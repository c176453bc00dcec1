use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use opmon_core::dsp::{cma_equalize, receive, remove_dc, resample_to_2sps};
use opmon_core::features::{build_dataset, compute_histogram, split_dataset, Partition};
use opmon_core::mtlnet::{init_network, train, MfiLoss, Targets};
use opmon_core::sigsim::simulate_frame;
use opmon_core::{DatasetSpec, EqualizerConfig, LossWeights, ModulationFormat, MtlTopology, SimConfig, TrainConfig};

fn frame() -> opmon_core::WaveformFrame {
    let cfg = SimConfig { osnr_db: 38.0, seed: 5, ..SimConfig::default() };
    simulate_frame(ModulationFormat::Pam4, &cfg).unwrap()
}

fn signal_chain(c: &mut Criterion) {
    let f = frame();
    let eq = EqualizerConfig::default();
    let cfg = SimConfig { osnr_db: 38.0, ..SimConfig::default() };
    c.bench_function("simulate_frame_pam4", |b| {
        b.iter(|| simulate_frame(ModulationFormat::Pam4, black_box(&cfg)).unwrap())
    });
    c.bench_function("resample_5_to_2", |b| b.iter(|| resample_to_2sps(black_box(&f)).unwrap()));
    let resampled = resample_to_2sps(&remove_dc(&f)).unwrap();
    c.bench_function("cma_11_taps_3_passes", |b| {
        b.iter(|| cma_equalize(black_box(&resampled), &eq).unwrap())
    });
    c.bench_function("receive_chain", |b| b.iter(|| receive(black_box(&f), &eq).unwrap()));
    let amps = receive(&f, &eq).unwrap().amplitudes;
    c.bench_function("histogram_100_bins", |b| b.iter(|| compute_histogram(black_box(&amps), 100)));
}

fn network(c: &mut Criterion) {
    let top = MtlTopology::with_shared(100, 60);
    let net = init_network(&top, 1).unwrap();
    let x = vec![0.01; 100];
    let t = Targets { onehot: [0.0, 1.0, 0.0], osnr_norm: 0.5 };
    let w = LossWeights::default();
    c.bench_function("forward_224_neurons", |b| b.iter(|| net.forward(black_box(&x)).unwrap()));
    c.bench_function("gradient_one_example", |b| {
        b.iter(|| net.gradients(&[(black_box(x.as_slice()), t)], &w, MfiLoss::SquaredError).unwrap())
    });

    let spec = DatasetSpec { frames_per_point: 2, ..DatasetSpec::default() };
    let sim = SimConfig { n_symbols: 1024, ..SimConfig::default() };
    let ds = split_dataset(&build_dataset(&spec, &sim, &EqualizerConfig::default()).unwrap(), 0);
    assert!(!ds.subset(Partition::Train).is_empty());
    let cfg = TrainConfig { max_epochs: 10, ..TrainConfig::default() };
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("ten_epochs_84_examples", |b| {
        b.iter_batched(|| net.clone(), |n| train(n, &ds, &cfg, w).unwrap(), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(benches, signal_chain, network);
criterion_main!(benches);
