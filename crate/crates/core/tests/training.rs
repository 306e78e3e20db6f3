mod common;

use hyperqst::exact_diag::{sample_measurements, solve, DatasetMeta, GroundStateVector, Measurement, MeasurementDataset, SupportCount};
use hyperqst::lattice::{build_chain, LatticeKind};
use hyperqst::training::{train, ModelConfig, TrainingConfig};

fn chain_data(l: usize, supports: &[f64], per: usize, seed: u64) -> (MeasurementDataset, Vec<GroundStateVector>) {
    let geom = build_chain(l).unwrap();
    let mut records = Vec::new();
    let mut refs = Vec::new();
    for (k, &g) in supports.iter().enumerate() {
        let psi = solve(&geom, 1.0, g).unwrap();
        for s in sample_measurements(&psi, per, seed + k as u64).unwrap() {
            records.push(Measurement { spins: s, g });
        }
        refs.push(psi);
    }
    let meta = DatasetMeta {
        kind: LatticeKind::Chain,
        side_length: l,
        num_sites: l,
        j_coupling: 1.0,
        seed,
        supports: supports.iter().map(|&g| SupportCount { g, count: per }).collect(),
    };
    (MeasurementDataset { meta, records }, refs)
}

fn small_config(epochs: usize, seed: u64) -> TrainingConfig {
    TrainingConfig {
        epochs,
        batch_size: 200,
        cd_k: 10,
        seed,
        ..TrainingConfig::fidelity_susceptibility()
    }
}

const SMALL: ModelConfig = ModelConfig {
    n_hidden: 16,
    hyper_width: 16,
};

#[test]
fn training_learns_small_chain() {
    let (data, refs) = chain_data(4, &[0.5, 1.0, 1.5], 4000, 11);
    let out = train(SMALL, &small_config(15, 3), &data, &refs, |_, _| Ok(())).unwrap();
    let first = &out.metrics[0];
    let last = out.metrics.last().unwrap();
    assert!(last.kl_exact.unwrap() < first.kl_exact.unwrap());
    assert!(last.kl_exact.unwrap() < 0.02, "kl {:?}", last.kl_exact);
    for &(g, o) in &last.overlaps {
        assert!(o > 0.99, "overlap {o} at g = {g}");
    }
    assert!(out.model.params.first_non_finite().is_none());
    assert!(out.metrics.windows(2).all(|w| w[0].lr > w[1].lr));
}

#[test]
fn training_is_deterministic() {
    let (data, refs) = chain_data(3, &[0.5, 1.5], 500, 2);
    let a = train(SMALL, &small_config(2, 8), &data, &refs, |_, _| Ok(())).unwrap();
    let b = train(SMALL, &small_config(2, 8), &data, &refs, |_, _| Ok(())).unwrap();
    assert_eq!(a.model.params, b.model.params);
    let c = train(SMALL, &small_config(2, 9), &data, &refs, |_, _| Ok(())).unwrap();
    assert_ne!(a.model.params, c.model.params);
}

#[test]
fn observer_sees_every_epoch_and_can_abort() {
    let (data, refs) = chain_data(3, &[1.0], 300, 5);
    let mut seen = Vec::new();
    train(SMALL, &small_config(3, 1), &data, &refs, |m, _| {
        seen.push(m.epoch);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, vec![1, 2, 3]);
    let err = train(SMALL, &small_config(3, 1), &data, &refs, |m, _| {
        if m.epoch == 2 {
            Err(hyperqst::Error::Numerical("stop".into()))
        } else {
            Ok(())
        }
    });
    assert!(err.is_err());
}

#[test]
fn mismatched_reference_rejected() {
    let (data, _) = chain_data(3, &[1.0], 100, 1);
    let wrong = solve(&build_chain(4).unwrap(), 1.0, 1.0).unwrap();
    assert!(matches!(
        train(SMALL, &small_config(1, 1), &data, &[wrong], |_, _| Ok(())),
        Err(hyperqst::Error::Data(_))
    ));
    let mut bad = data.clone();
    bad.records.clear();
    assert!(train(SMALL, &small_config(1, 1), &bad, &[], |_, _| Ok(())).is_err());
}

#[test]
fn invalid_hyperparameters_rejected() {
    let (data, _) = chain_data(3, &[1.0], 100, 1);
    let mut cfg = small_config(1, 1);
    cfg.cd_k = 0;
    assert!(matches!(train(SMALL, &cfg, &data, &[], |_, _| Ok(())), Err(hyperqst::Error::Config(_))));
    let mut cfg = small_config(1, 1);
    cfg.lr_start = f64::NAN;
    assert!(train(SMALL, &cfg, &data, &[], |_, _| Ok(())).is_err());
}
