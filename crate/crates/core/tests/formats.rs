mod common;

use common::arb_star_room;
use proptest::prelude::*;
use roomlay_core::diffnet::{ParamStore, Tensor};
use roomlay_core::harness::{Checkpoint, DType, EvalReport, SampleReport};
use roomlay_core::layout::io::{
    grid_from_pgm, grid_to_pgm, layout_from_json, layout_to_json, read_grid, write_grid,
};
use roomlay_core::panorama::{decode_boundary_map, encode_boundary_map, render_boundaries};
use roomlay_core::roomgen::{build_dataset, Dataset, DatasetParams, Manifest, SizeRange};
use roomlay_core::{rasterize, FitPolicy};
use sha2::{Digest, Sha256};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_json_round_trip(room in arb_star_room(10)) {
        let back = layout_from_json(&layout_to_json(&room)).unwrap();
        prop_assert_eq!(back.corners.len(), room.corners.len());
        for (a, b) in room.corners.iter().zip(&back.corners) {
            prop_assert!(a.dist(*b) <= 1e-9);
        }
        prop_assert_eq!(back.id, room.id);
        prop_assert!((back.ceiling_height - room.ceiling_height).abs() <= 1e-9);
        prop_assert!((back.camera.height - room.camera.height).abs() <= 1e-9);
    }

    #[test]
    fn grid_pgm_round_trip(room in arb_star_room(10), r in 8usize..40) {
        let grid = rasterize(&room, r, FitPolicy::default()).unwrap();
        let bytes = grid_to_pgm(&grid);
        let back = grid_from_pgm(&bytes).unwrap();
        prop_assert_eq!(back.values(), grid.values());
        prop_assert_eq!(grid_to_pgm(&back), bytes);
    }

    #[test]
    fn boundary_map_round_trip(room in arb_star_room(8)) {
        let map = render_boundaries(&room, 64, 32, 1.5).unwrap();
        let bytes = encode_boundary_map(&map);
        let back = decode_boundary_map(&bytes).unwrap();
        for (a, b) in map.data.iter().zip(&back.data) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        prop_assert_eq!(encode_boundary_map(&back), bytes);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(
        arrays in prop::collection::vec(
            (1usize..4, 1usize..5).prop_flat_map(|(a, b)| prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), a * b).prop_map(move |d| (a, b, d))),
            1..5,
        ),
        config in ".*",
    ) {
        let mut store = ParamStore::new();
        for (k, (a, b, d)) in arrays.into_iter().enumerate() {
            store.add(format!("p{k}"), Tensor::new(&[a, b], d).unwrap()).unwrap();
        }
        let ckpt = Checkpoint::from_store(&store, config);
        let back = Checkpoint::decode(&ckpt.encode(DType::F64)).unwrap();
        prop_assert_eq!(&back.config, &ckpt.config);
        for ((n0, t0), (n1, t1)) in ckpt.arrays.iter().zip(&back.arrays) {
            prop_assert_eq!(n0, n1);
            prop_assert_eq!(t0.shape(), t1.shape());
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(t0), bits(t1));
        }
    }

    #[test]
    fn eval_report_json_round_trip(ious in prop::collection::vec((0.0..=1.0f64, proptest::option::of(0.0..=1.0f64)), 1..6)) {
        let samples: Vec<_> = ious
            .iter()
            .enumerate()
            .map(|(k, &(ie, le))| SampleReport { id: format!("s{k}"), iou_ie: ie, iou_le: le })
            .collect();
        let report = EvalReport {
            mean_iou_ie: ious.iter().map(|s| s.0).sum::<f64>() / ious.len() as f64,
            mean_iou_le: None,
            samples,
            config_hash: "ab".repeat(32),
            manifest_hash: "cd".repeat(32),
        };
        let back: EvalReport = serde_json::from_str(&report.to_json()).unwrap();
        prop_assert_eq!(back, report);
    }
}

#[test]
fn thousand_room_dataset_round_trips_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let params = DatasetParams {
        anchors: 250,
        augment_factor: 3,
        seed: 99,
        size: SizeRange::default(),
    };
    let manifest = build_dataset(params, dir.path()).unwrap();
    assert_eq!(manifest.layouts.len(), 1000);
    let manifest_bytes = std::fs::read(dir.path().join("manifest.json")).unwrap();
    assert_eq!(
        Manifest::from_json_bytes(&manifest_bytes)
            .unwrap()
            .to_json_bytes(),
        manifest_bytes
    );

    let dataset = Dataset::load(dir.path()).unwrap();
    let digest = |pgms: &[Vec<u8>]| {
        let mut h = Sha256::new();
        pgms.iter().for_each(|b| h.update(b));
        h.finalize()
    };
    let first: Vec<Vec<u8>> = dataset
        .layouts
        .iter()
        .map(|l| grid_to_pgm(&rasterize(l, 32, FitPolicy::default()).unwrap()))
        .collect();
    let grids_dir = dir.path().join("grids");
    std::fs::create_dir(&grids_dir).unwrap();
    for (l, bytes) in dataset.layouts.iter().zip(&first) {
        write_grid(
            &grids_dir.join(format!("{}.pgm", l.id)),
            &grid_from_pgm(bytes).unwrap(),
        )
        .unwrap();
    }
    let second: Vec<Vec<u8>> = dataset
        .layouts
        .iter()
        .map(|l| grid_to_pgm(&read_grid(&grids_dir.join(format!("{}.pgm", l.id))).unwrap()))
        .collect();
    assert_eq!(digest(&first), digest(&second));
}
