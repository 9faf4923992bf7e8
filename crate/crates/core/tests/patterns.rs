use std::path::Path;

use altlearn::kspace::{GridShape, KPoint};
use altlearn::patterns::{
    budget_for_acceleration, generate_poisson_disc, generate_uniform, generate_variable_density, generate_vd_pd,
    parse_sp, sp_to_string, CalibrationFrames, CalibrationSpec, DensityProfile, FamilyShape, PatternFamily,
};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn grid(ny: usize, nz: usize, nt: usize) -> GridShape {
    GridShape::new(ny, nz, nt, 1).unwrap()
}

#[test]
fn uniform_selection_frequencies_pass_chi_square() {
    let g = grid(12, 12, 1);
    let cal = CalibrationSpec::new(1, 1, CalibrationFrames::All);
    let m = 40;
    let draws = 2000;
    let mut counts = vec![0.0; g.cells()];
    let mut free = 0;
    for seed in 0..draws {
        let sp = generate_uniform(&g, m, &cal, seed).unwrap();
        for p in sp.points().filter(|&p| !sp.is_calibration(p)) {
            counts[p.ky * 12 + p.kz] += 1.0;
        }
        free = sp.cells() - sp.calibration_len();
    }
    let expected = draws as f64 * (m - 9) as f64 / free as f64;
    let cal_cells: Vec<usize> = cal.points(&g).unwrap().iter().map(|p| p.ky * 12 + p.kz).collect();
    let stat: f64 = counts
        .iter()
        .enumerate()
        .filter(|(i, _)| !cal_cells.contains(i))
        .map(|(_, &c)| (c - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new((free - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-square {stat:.1} on {} dof, p = {p:.2e}", free - 1);
}

#[test]
fn variable_density_favors_the_center() {
    let g = grid(32, 32, 1);
    let cal = CalibrationSpec::new(2, 2, CalibrationFrames::All);
    let profile = DensityProfile::polynomial(&g, 3.0);
    // (hits, cells) inside r < 8 and beyond r >= 12
    let mut inner = (0.0, 0.0);
    let mut outer = (0.0, 0.0);
    for seed in 0..10 {
        let sp = generate_variable_density(&g, 200, &profile, &cal, seed).unwrap();
        for p in sp.lex_cells().filter(|&p| !sp.is_calibration(p)) {
            let r = ((p.ky as f64 - 16.0).powi(2) + (p.kz as f64 - 16.0).powi(2)).sqrt();
            let hit = if sp.contains(p) { 1.0 } else { 0.0 };
            if r < 8.0 {
                inner.0 += hit;
                inner.1 += 1.0;
            } else if r >= 12.0 {
                outer.0 += hit;
                outer.1 += 1.0;
            }
        }
    }
    let (din, dout) = (inner.0 / inner.1, outer.0 / outer.1);
    assert!(din > 2.0 * dout, "inner density {din}, outer {dout}");
}

#[test]
fn zero_distance_reductions() {
    let g = grid(16, 16, 2);
    let cal = CalibrationSpec::default();
    let m = 250;
    for seed in 0..5 {
        let pd = generate_poisson_disc(&g, m, 0.0, &cal, seed).unwrap();
        assert_eq!(pd.pattern, generate_uniform(&g, m, &cal, seed).unwrap());
        let profile = DensityProfile::polynomial(&g, 2.0);
        let vdpd = generate_vd_pd(&g, m, &profile, 0.0, &cal, seed).unwrap();
        assert_eq!(vdpd.pattern, generate_variable_density(&g, m, &profile, &cal, seed).unwrap());
    }
}

#[test]
fn generators_are_deterministic_and_seed_sensitive() {
    let g = grid(24, 24, 2);
    let cal = CalibrationSpec::default();
    let m = budget_for_acceleration(&g, 4.0).unwrap();
    let shape = FamilyShape::default();
    for family in PatternFamily::ALL {
        let a = family.generate(&g, m, &cal, &shape, 17).unwrap();
        let b = family.generate(&g, m, &cal, &shape, 17).unwrap();
        let c = family.generate(&g, m, &cal, &shape, 18).unwrap();
        assert_eq!(a, b, "{}", family.name());
        assert_ne!(a, c, "{}", family.name());
    }
}

#[test]
fn infeasible_budget_is_rejected() {
    let g = grid(8, 8, 1);
    let cal = CalibrationSpec::default();
    assert!(generate_uniform(&g, 10, &cal, 0).is_err());
    assert!(generate_uniform(&g, 65, &cal, 0).is_err());
    assert!(budget_for_acceleration(&g, 0.5).is_err());
}

fn family_strategy() -> impl Strategy<Value = PatternFamily> {
    prop::sample::select(PatternFamily::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_family_gives_exact_budget_with_calibration(
        family in family_strategy(),
        ny in 8usize..24,
        nz in 8usize..24,
        nt in 1usize..3,
        af in 1.0f64..6.0,
        seed in any::<u64>(),
    ) {
        let g = grid(ny, nz, nt);
        let cal = CalibrationSpec::new(1, 1, CalibrationFrames::All);
        let m = budget_for_acceleration(&g, af).unwrap();
        prop_assume!(m >= 9 * nt);
        let sp = family.generate(&g, m, &cal, &FamilyShape::default(), seed).unwrap();
        prop_assert_eq!(sp.len(), m);
        for p in cal.points(&g).unwrap() {
            prop_assert!(sp.is_calibration(p));
        }
        sp.check_invariants().unwrap();
    }

    #[test]
    fn poisson_distance_holds_within_each_frame(seed in any::<u64>(), d in 1.0f64..4.0, nt in 1usize..3) {
        let g = grid(20, 20, nt);
        let cal = CalibrationSpec::new(2, 2, CalibrationFrames::All);
        let out = generate_poisson_disc(&g, 60 * nt, d, &cal, seed).unwrap();
        let pts: Vec<KPoint> = out.pattern.points().filter(|&p| !out.pattern.is_calibration(p)).collect();
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                if a.t == b.t {
                    let dist = ((a.ky as f64 - b.ky as f64).powi(2) + (a.kz as f64 - b.kz as f64).powi(2)).sqrt();
                    prop_assert!(dist >= out.min_dist - 1e-12, "{a} {b} at {dist} < {}", out.min_dist);
                }
            }
        }
    }

    #[test]
    fn text_format_round_trips(seed in any::<u64>(), ny in 4usize..16, nz in 4usize..16, nt in 1usize..3) {
        let g = grid(ny, nz, nt);
        let cal = CalibrationSpec::new(1, 1, CalibrationFrames::FirstOnly);
        let m = (ny * nz * nt) / 3;
        prop_assume!(m >= 9);
        let sp = generate_uniform(&g, m, &cal, seed).unwrap();
        let text = sp_to_string(&sp);
        let back = parse_sp(&text, Path::new("prop")).unwrap();
        prop_assert_eq!(&back, &sp);
        prop_assert_eq!(sp_to_string(&back), text);
    }
}
