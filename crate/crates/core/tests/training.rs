use opmon_core::features::{build_dataset, split_dataset};
use opmon_core::mtlnet::{batch_loss, init_network, mtl_loss, train, Branch, MfiLoss, Outputs, Targets};
use opmon_core::{
    Dataset, DatasetSpec, EqualizerConfig, LossWeights, MtlNetwork, MtlTopology, Partition, SimConfig, Task,
    TrainConfig,
};
use proptest::prelude::*;

fn small_dataset() -> Dataset {
    let spec = DatasetSpec {
        osnr_grid: vec![32.0, 36.0, 40.0, 44.0],
        frames_per_point: 4,
        bin_count: 16,
        ..DatasetSpec::default()
    };
    let sim = SimConfig { n_symbols: 512, ..SimConfig::default() };
    split_dataset(&build_dataset(&spec, &sim, &EqualizerConfig::default()).unwrap(), 3)
}

fn params(net: &MtlNetwork) -> Vec<f64> {
    net.layers.iter().flat_map(|l| l.params()).copied().collect()
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let ds = small_dataset();
    let net = init_network(&MtlTopology::for_bins(16), 1).unwrap();
    let cfg = TrainConfig { learning_rate: 0.0, max_epochs: 1, ..TrainConfig::default() };
    let out = train(net.clone(), &ds, &cfg, LossWeights::default()).unwrap();
    assert_eq!(params(&out.net), params(&net));
    assert_eq!(out.history.len(), 1);
}

#[test]
fn same_seed_gives_identical_parameters() {
    let ds = small_dataset();
    let cfg = TrainConfig { max_epochs: 30, seed: 9, ..TrainConfig::default() };
    let run = || {
        let net = init_network(&MtlTopology::for_bins(16), 4).unwrap();
        train(net, &ds, &cfg, LossWeights::default()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(params(&a.net), params(&b.net));
    assert_eq!(a.history, b.history);
}

#[test]
fn returned_snapshot_has_the_lowest_validation_loss() {
    let ds = small_dataset();
    let net = init_network(&MtlTopology::for_bins(16), 2).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        max_epochs: 120,
        early_stop_patience: 10,
        ..TrainConfig::default()
    };
    let w = LossWeights::default();
    let out = train(net, &ds, &cfg, w).unwrap();
    let best = &out.history[out.best_epoch - 1];
    assert!(out.history.iter().all(|r| best.val_loss <= r.val_loss));
    let val = ds.subset(Partition::Val);
    let snapshot_loss = batch_loss(&out.net, &val, &w, MfiLoss::SquaredError).unwrap();
    assert_eq!(snapshot_loss, best.val_loss);
    assert!(out.history.len() <= out.best_epoch + cfg.early_stop_patience);
}

#[test]
fn default_training_lowers_the_training_loss() {
    let spec = DatasetSpec::default();
    let ds = split_dataset(
        &build_dataset(&spec, &SimConfig::default(), &EqualizerConfig::default()).unwrap(),
        spec.seed,
    );
    let net = init_network(&MtlTopology::with_shared(100, 60), 0).unwrap();
    let w = LossWeights::default();
    let out = train(net, &ds, &TrainConfig::default(), w).unwrap();
    let train_set = ds.subset(Partition::Train);
    let final_loss = batch_loss(&out.net, &train_set, &w, MfiLoss::SquaredError).unwrap();
    assert!(final_loss < out.initial_train_loss, "{final_loss} vs {}", out.initial_train_loss);
    assert!(out.history.last().unwrap().train_loss < out.history[0].train_loss);
}

fn topology(input: usize, shared: usize, mfi: usize, osnr: usize, layout: u8) -> MtlTopology {
    let mut branches = vec![Branch::new(Task::Mfi, vec![mfi]), Branch::new(Task::Osnr, vec![osnr])];
    match layout {
        0 => branches.truncate(1),
        1 => {
            branches.remove(0);
        }
        _ => {}
    }
    MtlTopology { input_size: input, shared_sizes: vec![shared], branches }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradients_match_central_differences(
        input in 2usize..8,
        shared in 2usize..10,
        mfi in 1usize..8,
        osnr in 1usize..8,
        layout in 0u8..4,
        seed in any::<u64>(),
        xs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 8), 1..4),
        class in 0usize..3,
        osnr_norm in 0.0f64..1.0,
        w_osnr in 0.5f64..8.0,
    ) {
        let top = topology(input, shared, mfi, osnr, layout);
        let net = init_network(&top, seed).unwrap();
        let w = LossWeights { w_mfi: 1.0, w_osnr };
        let mut onehot = [0.0; 3];
        onehot[class] = 1.0;
        let t = Targets { onehot, osnr_norm };
        let batch: Vec<(&[f64], Targets)> = xs.iter().map(|x| (&x[..input], t)).collect();
        let loss = |m: &MtlNetwork| {
            batch.iter().map(|(x, t)| mtl_loss(&m.outputs(x).unwrap(), t, &w)).sum::<f64>() / batch.len() as f64
        };
        let grads = net.gradients(&batch, &w, MfiLoss::SquaredError).unwrap();
        let h = 1e-5;
        for (p, &a) in grads.iter().enumerate() {
            let shifted = |d: f64| {
                let mut m = net.clone();
                *m.layers.iter_mut().flat_map(|l| l.params_mut()).nth(p).unwrap() += d;
                loss(&m)
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            prop_assert!(rel < 1e-5, "component {p}: analytic {a} numeric {numeric}");
        }
    }

    #[test]
    fn loss_is_homogeneous_in_the_weights(
        probs in prop::collection::vec(0.0f64..1.0, 3),
        est in -1.0f64..2.0,
        class in 0usize..3,
        target in 0.0f64..1.0,
        w_mfi in 0.1f64..5.0,
        w_osnr in 0.1f64..5.0,
        c in prop::sample::select(vec![0.25, 0.5, 2.0, 4.0]),
    ) {
        let out = Outputs { mfi_probs: Some([probs[0], probs[1], probs[2]]), osnr_norm: Some(est) };
        let mut onehot = [0.0; 3];
        onehot[class] = 1.0;
        let t = Targets { onehot, osnr_norm: target };
        let base = mtl_loss(&out, &t, &LossWeights { w_mfi, w_osnr });
        let scaled = mtl_loss(&out, &t, &LossWeights { w_mfi: c * w_mfi, w_osnr: c * w_osnr });
        prop_assert_eq!(scaled, c * base);
    }
}
