use roomlay_core::harness::*;
use roomlay_core::implicit::{CodeRegressor, ImplicitModel, RegressionLoss};
use roomlay_core::roomgen::{generate_rooms, Dataset, DatasetParams, SizeRange};
use roomlay_core::Error;

fn tiny() -> TrainConfig {
    TrainConfig {
        resolution: 16,
        code_dim: 8,
        n_planes: 8,
        n_primitives: 2,
        encoder_channels: vec![4, 8],
        generator_hidden: vec![16, 16],
        coord_samples: 64,
        batch_size: 4,
        learning_rate: 1e-3,
        epochs: 2,
        image_width: 32,
        image_height: 16,
        ..TrainConfig::default()
    }
}

fn data(n: usize, seed: u64) -> Prepared {
    let rooms = generate_rooms(DatasetParams {
        anchors: n,
        augment_factor: 0,
        seed,
        size: SizeRange::default(),
    })
    .unwrap();
    Prepared::new(&Dataset::from_rooms(&rooms), 16).unwrap()
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let config = TrainConfig {
        epochs: 0,
        ..tiny()
    };
    let (model, log) = train_ie(&data(4, 0), &config).unwrap();
    let init = ImplicitModel::new(config.model_config(), config.seed).unwrap();
    assert!(log.epochs.is_empty());
    assert_eq!(
        ie_checkpoint(&model, &config),
        ie_checkpoint(&init, &config)
    );
}

#[test]
fn training_is_reproducible_and_decreases_objective() {
    let d = data(8, 1);
    let config = TrainConfig {
        epochs: 6,
        ..tiny()
    };
    let (m1, log1) = train_ie(&d, &config).unwrap();
    let (m2, log2) = train_ie(&d, &config).unwrap();
    assert_eq!(log1.to_json(), log2.to_json());
    assert_eq!(
        ie_checkpoint(&m1, &config).encode(DType::F64),
        ie_checkpoint(&m2, &config).encode(DType::F64)
    );
    let first = log1.epochs.first().unwrap().objective;
    let last = log1.epochs.last().unwrap().objective;
    assert!(last <= first, "{first} -> {last}");
    for e in &log1.epochs {
        let parts = e.occupancy.unwrap() + e.grouping.unwrap() + e.combining.unwrap();
        assert!((parts - e.objective).abs() <= 1e-9 * e.objective.max(1.0));
    }
    let r1 = eval_ie(&m1, &d, &config.hash()).unwrap().to_json();
    let r2 = eval_ie(&m2, &d, &config.hash()).unwrap().to_json();
    assert_eq!(r1, r2);
}

#[test]
fn different_seeds_give_different_runs() {
    let d = data(4, 2);
    let (_, a) = train_ie(&d, &tiny()).unwrap();
    let (_, b) = train_ie(&d, &TrainConfig { seed: 1, ..tiny() }).unwrap();
    assert_ne!(a.to_json(), b.to_json());
}

#[test]
fn report_means_and_ordering() {
    let d = data(6, 3);
    let config = tiny();
    let (model, _) = train_ie(&d, &config).unwrap();
    let report = eval_ie(&model, &d, &config.hash()).unwrap();
    let mean = report.samples.iter().map(|s| s.iou_ie).sum::<f64>() / report.samples.len() as f64;
    assert_eq!(report.mean_iou_ie, mean);
    assert!(report.samples.windows(2).all(|w| w[0].id < w[1].id));
    assert_eq!(report.manifest_hash, d.manifest_hash);
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
    assert_eq!(
        keys,
        [
            "config_hash",
            "manifest_hash",
            "mean_iou_ie",
            "mean_iou_le",
            "samples"
        ]
    );
    assert!(json["samples"][0]["iou_le"].is_null());
}

#[test]
fn checkpoint_reload_reproduces_the_report() {
    let d = data(5, 4);
    let config = tiny();
    let (model, _) = train_ie(&d, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ie.rlie");
    ie_checkpoint(&model, &config)
        .save(&path, DType::F64)
        .unwrap();
    let (loaded, loaded_config) = load_ie(&Checkpoint::load(&path).unwrap()).unwrap();
    assert_eq!(loaded_config, config);
    assert_eq!(
        eval_ie(&model, &d, &config.hash()).unwrap().to_json(),
        eval_ie(&loaded, &d, &config.hash()).unwrap().to_json()
    );
}

#[test]
fn ground_truth_bypass_scores_one() {
    for g in &data(5, 5).grids {
        assert_eq!(field_iou(&g.as_f64(), g).unwrap(), 1.0);
    }
}

#[test]
fn zero_planes_score_room_coverage() {
    let d = data(4, 6);
    let config = tiny();
    let mut model = ImplicitModel::new(config.model_config(), 0).unwrap();
    for layer in &model.generator.layers {
        for id in [layer.w, layer.b] {
            model.store.get_mut(id).value.data_mut().fill(0.0);
        }
    }
    let report = eval_ie(&model, &d, "").unwrap();
    for s in &report.samples {
        let g = &d.grids[d.ids.iter().position(|id| *id == s.id).unwrap()];
        assert_eq!(s.iou_ie, g.occupied() as f64 / 256.0);
    }
}

#[test]
fn exact_codes_make_le_equal_ie() {
    let d = data(4, 7);
    let config = tiny();
    let (model, _) = train_ie(&d, &config).unwrap();
    let grids: Vec<_> = d.grids.iter().collect();
    let codes = model.encode(&grids).unwrap();
    let via_codes = code_ious(&model, &codes, &d.grids).unwrap();
    let report = eval_ie(&model, &d, "").unwrap();
    for (id, iou) in d.ids.iter().zip(via_codes) {
        assert_eq!(
            report.samples.iter().find(|s| &s.id == id).unwrap().iou_ie,
            iou
        );
    }
}

#[test]
fn regressor_training_and_constant_predictions() {
    let d = data(6, 8);
    let config = tiny();
    let (ie, _) = train_ie(&d, &config).unwrap();
    let inputs = d.regressor_inputs(&config).unwrap();
    let (reg, log) = train_sr(&d, &inputs, &ie, &config, false).unwrap();
    let (cached, cached_log) = train_sr(&d, &inputs, &ie, &config, true).unwrap();
    // caching codes only trades memory for speed
    assert_eq!(log, cached_log);
    assert_eq!(
        sr_checkpoint(&reg, &config),
        sr_checkpoint(&cached, &config)
    );
    let report = eval_le(&reg, &ie, &d, &inputs, &config.hash()).unwrap();
    let le: Vec<f64> = report.samples.iter().map(|s| s.iou_le.unwrap()).collect();
    assert_eq!(
        report.mean_iou_le.unwrap(),
        le.iter().sum::<f64>() / le.len() as f64
    );

    let mut zero = CodeRegressor::new(config.regressor_config(), 0).unwrap();
    for id in zero.store.ids().collect::<Vec<_>>() {
        zero.store.get_mut(id).value.data_mut().fill(0.0);
    }
    let images: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let codes = zero.predict(&images).unwrap();
    assert!(codes.iter().all(|c| c == &codes[0]));
    let field = &ie.reconstruct(&codes[..1]).unwrap()[0];
    let report = eval_le(&zero, &ie, &d, &inputs, "").unwrap();
    for s in &report.samples {
        let g = &d.grids[d.ids.iter().position(|id| *id == s.id).unwrap()];
        assert_eq!(s.iou_le.unwrap(), field_iou(field, g).unwrap());
    }
}

#[test]
fn regression_loss_is_part_of_the_config() {
    let l1 = TrainConfig {
        regression_loss: RegressionLoss::L1,
        ..tiny()
    };
    assert_ne!(l1.hash(), tiny().hash());
    assert!(l1.to_json().contains("\"regression_loss\""));
    let d = data(4, 9);
    let (ie, _) = train_ie(&d, &tiny()).unwrap();
    let inputs = d.regressor_inputs(&l1).unwrap();
    let (reg, log) = train_sr(&d, &inputs, &ie, &l1, true).unwrap();
    assert_eq!(log.config_hash, l1.hash());
    let (_, back) = load_sr(&sr_checkpoint(&reg, &l1)).unwrap();
    assert_eq!(back.regression_loss, RegressionLoss::L1);
}

#[test]
fn incompatible_code_dimension_is_rejected() {
    let d = data(3, 10);
    let config = tiny();
    let ie = ImplicitModel::new(config.model_config(), 0).unwrap();
    let other = TrainConfig {
        code_dim: 4,
        ..tiny()
    };
    let reg = CodeRegressor::new(other.regressor_config(), 0).unwrap();
    let inputs = d.regressor_inputs(&config).unwrap();
    assert!(eval_le(&reg, &ie, &d, &inputs, "").is_err());
    assert!(train_sr(&d, &inputs, &ie, &other, true).is_err());
}

#[test]
fn missing_boundary_maps_are_reported() {
    let d = data(3, 11);
    let dir = tempfile::tempdir().unwrap();
    match d.load_regressor_inputs(&tiny(), dir.path()) {
        Err(Error::MissingBoundaryMap(id)) => assert_eq!(id, d.ids[0]),
        other => panic!("expected a missing-map error, got {other:?}"),
    }
}

#[test]
fn non_finite_parameters_abort_with_location() {
    let d = data(4, 12);
    let config = tiny();
    let mut model = ImplicitModel::new(config.model_config(), 0).unwrap();
    model.store.get_mut(model.wg).value.data_mut().fill(1e308);
    match train_ie_from(&d, &config, model, |_, _| {}) {
        Err(Error::Diverged {
            epoch: 0,
            batch: 0,
            term,
            ..
        }) => assert_eq!(term, "objective"),
        other => panic!("expected divergence, got {:?}", other.map(|_| ())),
    }
}
