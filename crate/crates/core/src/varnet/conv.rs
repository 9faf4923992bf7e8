//! Single-channel 2D correlation with zero padding ("same" output size) and
//! the two derivative kernels needed for backpropagation.
//!
//! Forward: `out[y][z] += sum_{a,b} w[a][b] * inp[y + a - h][z + b - h]`,
//! `h = k / 2`, out-of-range input reads as zero.

/// Valid output range `[lo, hi)` along one axis for tap offset `d`.
#[inline]
fn span(n: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d).clamp(0, n as isize) as usize;
    (lo, hi.max(lo))
}

/// `out += w ⋆ inp`.
pub fn correlate_add(out: &mut [f64], inp: &[f64], w: &[f64], ny: usize, nz: usize, k: usize) {
    let h = (k / 2) as isize;
    for a in 0..k {
        let dy = a as isize - h;
        let (y0, y1) = span(ny, dy);
        for b in 0..k {
            let wv = w[a * k + b];
            if wv == 0.0 {
                continue;
            }
            let dz = b as isize - h;
            let (z0, z1) = span(nz, dz);
            if z0 >= z1 {
                continue;
            }
            for y in y0..y1 {
                let src_row = ((y as isize + dy) as usize) * nz;
                let s0 = (z0 as isize + dz) as usize;
                let src = &inp[src_row + s0..src_row + s0 + (z1 - z0)];
                let dst = &mut out[y * nz + z0..y * nz + z1];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += wv * s;
                }
            }
        }
    }
}

/// Adjoint of [`correlate_add`] with respect to its input:
/// `grad_in[y + a - h][z + b - h] += w[a][b] * g[y][z]`.
pub fn correlate_adjoint_add(
    grad_in: &mut [f64],
    g: &[f64],
    w: &[f64],
    ny: usize,
    nz: usize,
    k: usize,
) {
    let h = (k / 2) as isize;
    for a in 0..k {
        let dy = a as isize - h;
        let (y0, y1) = span(ny, dy);
        for b in 0..k {
            let wv = w[a * k + b];
            if wv == 0.0 {
                continue;
            }
            let dz = b as isize - h;
            let (z0, z1) = span(nz, dz);
            if z0 >= z1 {
                continue;
            }
            for y in y0..y1 {
                let dst_row = ((y as isize + dy) as usize) * nz;
                let d0 = (z0 as isize + dz) as usize;
                let dst = &mut grad_in[dst_row + d0..dst_row + d0 + (z1 - z0)];
                let src = &g[y * nz + z0..y * nz + z1];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += wv * s;
                }
            }
        }
    }
}

/// Gradient with respect to the kernel:
/// `grad_w[a][b] += sum_{y,z} g[y][z] * inp[y + a - h][z + b - h]`.
pub fn correlate_weight_grad(
    grad_w: &mut [f64],
    g: &[f64],
    inp: &[f64],
    ny: usize,
    nz: usize,
    k: usize,
) {
    let h = (k / 2) as isize;
    for a in 0..k {
        let dy = a as isize - h;
        let (y0, y1) = span(ny, dy);
        for b in 0..k {
            let dz = b as isize - h;
            let (z0, z1) = span(nz, dz);
            if z0 >= z1 {
                continue;
            }
            let mut acc = 0.0;
            for y in y0..y1 {
                let src_row = ((y as isize + dy) as usize) * nz;
                let s0 = (z0 as isize + dz) as usize;
                let src = &inp[src_row + s0..src_row + s0 + (z1 - z0)];
                let gr = &g[y * nz + z0..y * nz + z1];
                acc += gr.iter().zip(src).map(|(x, y)| x * y).sum::<f64>();
            }
            grad_w[a * k + b] += acc;
        }
    }
}
