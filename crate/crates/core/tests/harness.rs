mod common;

use std::fs;
use std::path::Path;

use altlearn::harness::{
    generate_phantom_dataset, read_dataset, read_image, rmse, run_experiment, write_dataset, write_image,
    ExperimentConfig, PhantomConfig, METHOD_PRETRAINED, METHOD_PROPOSED, METHOD_RETRAINED,
};
use altlearn::kspace::{Encoder, GridShape, ImageStack};
use altlearn::Error;
use common::{naive_rmse, random_item};
use proptest::prelude::*;

#[test]
fn phantoms_are_reproducible_and_prefix_stable() {
    let grid = GridShape::new(20, 16, 2, 3).unwrap();
    let cfg = PhantomConfig::new(grid);
    let a = generate_phantom_dataset(&cfg, 5, 3).unwrap();
    let b = generate_phantom_dataset(&cfg, 3, 3).unwrap();
    let c = generate_phantom_dataset(&cfg, 3, 4).unwrap();
    assert_eq!(&a[..3], &b[..]);
    assert_ne!(b, c);
}

#[test]
fn phantoms_are_normalized() {
    let grid = GridShape::new(24, 24, 2, 4).unwrap();
    for item in generate_phantom_dataset(&PhantomConfig::new(grid), 4, 8).unwrap() {
        assert!(item.coils.normalization_error() < 1e-12);
        let m = Encoder::new(&item.coils).forward(&item.image, None).unwrap();
        assert!((m.max_abs() - 1.0).abs() < 1e-12);
        assert!(item.image.data().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn rmse_matches_explicit_loops() {
    let refs: Vec<ImageStack> = (0..4).map(|s| random_item(s, 6, 5, 2, 1).image).collect();
    let recons: Vec<ImageStack> = (10..14).map(|s| random_item(s, 6, 5, 2, 1).image).collect();
    let fast = rmse(&refs, &recons).unwrap();
    assert!((fast - naive_rmse(&refs, &recons)).abs() < 1e-12);
    assert_eq!(rmse(&refs, &refs).unwrap(), 0.0);
    assert!(matches!(rmse(&[], &[]), Err(Error::EmptyDataset)));
    assert!(rmse(&refs, &recons[..2]).is_err());
}

#[test]
fn datasets_and_images_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridShape::new(12, 10, 2, 2).unwrap();
    let items = generate_phantom_dataset(&PhantomConfig::new(grid), 3, 1).unwrap();
    write_dataset(&items, dir.path().join("d")).unwrap();
    assert_eq!(read_dataset(dir.path().join("d")).unwrap(), items);

    let path = dir.path().join("x.img");
    write_image(&items[0].image, &path).unwrap();
    // image files carry no coil count
    let back = read_image(&path).unwrap();
    assert!(back.shape().same_image_grid(&grid));
    assert_eq!(back.data(), items[0].image.data());
    fs::write(&path, b"junk").unwrap();
    assert!(read_image(&path).is_err());
}

#[test]
fn config_errors_name_the_line() {
    let err = ExperimentConfig::parse("ny = 16\n\nvn_layers = many\n", Path::new("c.cfg")).unwrap_err();
    match err {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
    assert!(ExperimentConfig::parse("af_list = 0.5\n", Path::new("c.cfg")).is_err());
    assert!(ExperimentConfig::parse("init_sp = maybe\n", Path::new("c.cfg")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn config_text_round_trips(
        ny in 40usize..72,
        nz in 40usize..72,
        seed in any::<u64>(),
        lr in 1e-5f64..1e-1,
        monotone in any::<bool>(),
        radius in prop::option::of(1.0f64..30.0),
    ) {
        let mut c = ExperimentConfig::desk();
        c.grid = GridShape::new(ny, nz, 1, 4).unwrap();
        c.seed = seed;
        c.alternating.adam.lr0 = lr;
        c.alternating.monotone = monotone;
        c.alternating.bass.monotone = monotone;
        c.alternating.bass.constraints.max_radius = radius;
        let back = ExperimentConfig::parse(&c.to_text(), Path::new("round")).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn experiment_writes_three_rows_per_acceleration() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "ny = 16\nnz = 16\nnc = 2\ntrain_items = 4\ntest_items = 2\ncal_half_y = 1\ncal_half_z = 1\n\
         vn_layers = 1\nvn_filters = 2\nvn_kernel = 3\npretrain_epochs = 2\nretrain_epochs = 2\n\
         adam_epochs = 1\nbass_k_init = 4\nbass_max_iters = 6\nmax_cycles = 2\naf_list = 3, 5, 8\nout = {}\n",
        dir.path().display()
    );
    let config = ExperimentConfig::parse(&text, Path::new("t.cfg")).unwrap();
    let rows = run_experiment(&config).unwrap();
    assert_eq!(rows.len(), 9);
    for (chunk, af) in rows.chunks(3).zip([3.0, 5.0, 8.0]) {
        let methods: Vec<&str> = chunk.iter().map(|r| r.method).collect();
        assert_eq!(methods, [METHOD_PRETRAINED, METHOD_RETRAINED, METHOD_PROPOSED]);
        assert!(chunk.iter().all(|r| r.af == af && r.rmse.is_finite() && r.rmse >= 0.0));
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 10);
    assert_eq!(summary.lines().next(), Some("af,method,rmse"));
    for f in ["config.txt", "pretrained.vnp", "af5/vdpd.sp", "af5/proposed.sp", "af5/trace.csv", "af8/retrained.vnp"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let saved = ExperimentConfig::read(dir.path().join("config.txt")).unwrap();
    assert_eq!(saved, config);
}
