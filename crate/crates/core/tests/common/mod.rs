//! Independent reference implementations used as test oracles.
//!
//! Everything here is written from the defining formulas with plain loops:
//! a direct DFT instead of the FFT, direct correlation sums, and a
//! straight-line network forward pass.

#![allow(dead_code)]

use std::f64::consts::PI;

use altlearn::kspace::{CoilMap, DataItem, GridShape, ImageStack, KPoint, SamplingPattern};
use altlearn::varnet::VnParams;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_item(seed: u64, ny: usize, nz: usize, nt: usize, nc: usize) -> DataItem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = GridShape::new(ny, nz, nt, nc).unwrap();
    let img = (0..g.cells()).map(|_| random_complex(&mut rng)).collect();
    let coils = (0..g.frame_len() * nc).map(|_| random_complex(&mut rng)).collect();
    DataItem::new(
        ImageStack::from_vec(g, img).unwrap(),
        CoilMap::new(g, coils).unwrap(),
    )
    .unwrap()
}

/// Each cell sampled independently with probability `p`.
pub fn random_pattern(seed: u64, ny: usize, nz: usize, nt: usize, p: f64) -> SamplingPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new();
    for ky in 0..ny {
        for kz in 0..nz {
            for t in 0..nt {
                if rng.gen_bool(p) {
                    pts.push(KPoint::new(ky, kz, t));
                }
            }
        }
    }
    SamplingPattern::from_points(ny, nz, nt, pts, []).unwrap()
}

fn sampled(sp: Option<&SamplingPattern>, ky: usize, kz: usize, t: usize) -> bool {
    sp.map_or(true, |sp| sp.contains(KPoint::new(ky, kz, t)))
}

/// `[S] F C x` by direct summation, DC at `(ny/2, nz/2)`, layout
/// `[coil][t][ky][kz]`.
pub fn dft_encode(x: &[Complex64], coils: &CoilMap, sp: Option<&SamplingPattern>) -> Vec<Complex64> {
    let g = coils.shape();
    let (ny, nz, nt, nc) = (g.ny, g.nz, g.nt, g.nc);
    let scale = 1.0 / ((ny * nz) as f64).sqrt();
    let mut out = vec![Complex64::default(); nc * nt * ny * nz];
    for c in 0..nc {
        let sens = coils.coil(c);
        for t in 0..nt {
            for ky in 0..ny {
                for kz in 0..nz {
                    if !sampled(sp, ky, kz, t) {
                        continue;
                    }
                    let fy = ky as f64 - (ny / 2) as f64;
                    let fz = kz as f64 - (nz / 2) as f64;
                    let mut acc = Complex64::default();
                    for y in 0..ny {
                        for z in 0..nz {
                            let arg = -2.0 * PI * (fy * y as f64 / ny as f64 + fz * z as f64 / nz as f64);
                            acc += sens[y * nz + z] * x[t * ny * nz + y * nz + z] * Complex64::from_polar(1.0, arg);
                        }
                    }
                    out[((c * nt + t) * ny + ky) * nz + kz] = acc * scale;
                }
            }
        }
    }
    out
}

/// `C* F^-1 [S] m` by direct summation.
pub fn dft_adjoint(m: &[Complex64], coils: &CoilMap, sp: Option<&SamplingPattern>) -> Vec<Complex64> {
    let g = coils.shape();
    let (ny, nz, nt, nc) = (g.ny, g.nz, g.nt, g.nc);
    let scale = 1.0 / ((ny * nz) as f64).sqrt();
    let mut out = vec![Complex64::default(); nt * ny * nz];
    for c in 0..nc {
        let sens = coils.coil(c);
        for t in 0..nt {
            for y in 0..ny {
                for z in 0..nz {
                    let mut acc = Complex64::default();
                    for ky in 0..ny {
                        for kz in 0..nz {
                            if !sampled(sp, ky, kz, t) {
                                continue;
                            }
                            let fy = ky as f64 - (ny / 2) as f64;
                            let fz = kz as f64 - (nz / 2) as f64;
                            let arg = 2.0 * PI * (fy * y as f64 / ny as f64 + fz * z as f64 / nz as f64);
                            acc += m[((c * nt + t) * ny + ky) * nz + kz] * Complex64::from_polar(1.0, arg);
                        }
                    }
                    out[t * ny * nz + y * nz + z] += sens[y * nz + z].conj() * acc * scale;
                }
            }
        }
    }
    out
}

/// Real plane `p` of an image: `p < nt` real part of frame `p`, otherwise
/// imaginary part of frame `p - nt`; zero outside the grid.
fn plane_value(x: &[Complex64], ny: usize, nz: usize, nt: usize, p: usize, y: isize, z: isize) -> f64 {
    if y < 0 || z < 0 || y >= ny as isize || z >= nz as isize {
        return 0.0;
    }
    let v = x[(p % nt) * ny * nz + y as usize * nz + z as usize];
    if p < nt {
        v.re
    } else {
        v.im
    }
}

/// Straight-line forward pass; also returns every pre-activation value.
pub fn naive_forward(
    params: &VnParams,
    mbar: &[Complex64],
    sp: &SamplingPattern,
    coils: &CoilMap,
) -> (Vec<Complex64>, Vec<f64>) {
    let cfg = *params.config();
    let g = coils.shape();
    let (ny, nz, nt) = (g.ny, g.nz, g.nt);
    let k = cfg.kernel_size as isize;
    let h = k / 2;
    let kk = (k * k) as usize;
    let x1 = dft_adjoint(mbar, coils, Some(sp));
    let mut x = x1.clone();
    let mut pre = Vec::new();
    for j in 0..cfg.layers {
        // data term
        let ex = dft_encode(&x, coils, Some(sp));
        let resid: Vec<Complex64> = ex.iter().zip(mbar).map(|(a, b)| a - b).collect();
        let grad = dft_adjoint(&resid, coils, Some(sp));
        // regularizer
        let mut reg = vec![Complex64::default(); x.len()];
        for f in 0..cfg.filters {
            let w = params.kernel(j, f);
            let wb = params.kernel_b(j, f);
            let mut act = vec![0.0; ny * nz];
            for y in 0..ny as isize {
                for z in 0..nz as isize {
                    let mut u = 0.0;
                    for p in 0..2 * nt {
                        for a in 0..k {
                            for b in 0..k {
                                u += w[p * kk + (a * k + b) as usize]
                                    * plane_value(&x, ny, nz, nt, p, y + a - h, z + b - h);
                            }
                        }
                    }
                    pre.push(u);
                    act[y as usize * nz + z as usize] = u.max(0.0);
                }
            }
            for p in 0..2 * nt {
                for y in 0..ny as isize {
                    for z in 0..nz as isize {
                        let mut r = 0.0;
                        for a in 0..k {
                            for b in 0..k {
                                let (yy, zz) = (y + a - h, z + b - h);
                                if yy >= 0 && zz >= 0 && yy < ny as isize && zz < nz as isize {
                                    r += wb[p * kk + (a * k + b) as usize] * act[yy as usize * nz + zz as usize];
                                }
                            }
                        }
                        let idx = (p % nt) * ny * nz + y as usize * nz + z as usize;
                        if p < nt {
                            reg[idx].re += r;
                        } else {
                            reg[idx].im += r;
                        }
                    }
                }
            }
        }
        let alpha = params.alpha(j);
        for i in 0..x.len() {
            x[i] = x[i] - alpha * grad[i] - reg[i];
        }
    }
    (x, pre)
}

/// `sqrt( sum_i sum_cells |x - x_hat|^2 / (Nt * Ni) )` by explicit loops.
pub fn naive_rmse(refs: &[ImageStack], recons: &[ImageStack]) -> f64 {
    let mut total = 0.0;
    for (a, b) in refs.iter().zip(recons) {
        for (u, v) in a.data().iter().zip(b.data()) {
            let d = u - v;
            total += d.re * d.re + d.im * d.im;
        }
    }
    (total / (refs[0].shape().nt as f64 * refs.len() as f64)).sqrt()
}
