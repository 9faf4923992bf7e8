mod common;

use altlearn::kspace::{fft2_ortho, ifft2_ortho, Encoder, KSpaceData, SamplingPattern};
use common::{dft_adjoint, dft_encode, random_complex, random_item, random_pattern};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_dev(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn encoder_matches_direct_dft(seed in 0u64..10_000, ny in 2usize..7, nz in 2usize..7, nt in 1usize..3, nc in 1usize..3) {
        let item = random_item(seed, ny, nz, nt, nc);
        let sp = random_pattern(seed ^ 0x55, ny, nz, nt, 0.5);
        let mut enc = Encoder::new(&item.coils);
        let fast = enc.forward(&item.image, Some(&sp)).unwrap();
        let slow = dft_encode(item.image.data(), &item.coils, Some(&sp));
        prop_assert!(max_dev(fast.data(), &slow) < 1e-12);

        let back = enc.adjoint(&fast, Some(&sp)).unwrap();
        let slow_back = dft_adjoint(&slow, &item.coils, Some(&sp));
        prop_assert!(max_dev(back.data(), &slow_back) < 1e-12);
    }

    #[test]
    fn adjoint_identity(seed in 0u64..10_000, ny in 2usize..9, nz in 2usize..9, nt in 1usize..3) {
        let item = random_item(seed, ny, nz, nt, 3);
        let sp = random_pattern(seed + 1, ny, nz, nt, 0.3);
        let shape = item.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let m = KSpaceData::from_vec(shape, (0..shape.kspace_len()).map(|_| random_complex(&mut rng)).collect()).unwrap();
        let mut enc = Encoder::new(&item.coils);
        let lhs = enc.forward(&item.image, Some(&sp)).unwrap().dot(&m);
        let rhs = item.image.dot(&enc.adjoint(&m, Some(&sp)).unwrap());
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
    }

    #[test]
    fn centered_fft_round_trip(seed in 0u64..10_000, ny in 1usize..9, nz in 1usize..9) {
        let item = random_item(seed, ny, nz, 1, 2);
        let shape = item.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = KSpaceData::from_vec(shape, (0..shape.kspace_len()).map(|_| random_complex(&mut rng)).collect()).unwrap();
        let there = fft2_ortho(&v);
        prop_assert!((there.norm_sqr() - v.norm_sqr()).abs() < 1e-10 * v.norm_sqr());
        prop_assert!(max_dev(ifft2_ortho(&there).data(), v.data()) < 1e-12);
    }
}

#[test]
fn constant_image_lands_on_the_center_bin() {
    let item = random_item(3, 6, 8, 1, 1);
    let shape = item.shape();
    let ones = KSpaceData::from_vec(shape, vec![Complex64::new(1.0, 0.0); shape.kspace_len()]).unwrap();
    let f = fft2_ortho(&ones);
    for ky in 0..6 {
        for kz in 0..8 {
            let expect = if (ky, kz) == (3, 4) { (48f64).sqrt() } else { 0.0 };
            assert!((f.get(ky, kz, 0, 0).norm() - expect).abs() < 1e-12, "bin ({ky}, {kz})");
        }
    }
}

#[test]
fn empty_pattern_gives_zero_data() {
    let item = random_item(9, 4, 4, 2, 2);
    let sp = SamplingPattern::from_points(4, 4, 2, [], []).unwrap();
    let mut enc = Encoder::new(&item.coils);
    let m = enc.forward(&item.image, Some(&sp)).unwrap();
    assert_eq!(m.norm_sqr(), 0.0);
}
