//! Forward and reverse passes of the unrolled network
//!
//! ```text
//! x_1     = E*_Omega mbar
//! x_{j+1} = x_j - alpha_j E*_Omega (E_Omega x_j - mbar)
//!               - sum_f Kb_{j,f} ⋆ relu(K_{j,f} ⋆ x_j)
//! ```
//!
//! Images enter the convolutions as `2 * Nt` real planes (real parts of all
//! frames, then imaginary parts). `K_{j,f}` maps all planes to one feature
//! map, `Kb_{j,f}` maps that feature map back to all planes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kspace::{CoilMap, DataItem, Encoder, ImageStack, KSpaceData, SamplingPattern};

use super::conv::{correlate_add, correlate_adjoint_add, correlate_weight_grad};
use super::params::{Gradients, VnParams};

/// Per-layer values kept for the reverse pass.
struct Tape {
    x: Vec<Complex64>,
    pre_activation: Vec<f64>,
    data_residual: Vec<Complex64>,
}

struct Geometry {
    ny: usize,
    nz: usize,
    nt: usize,
    k: usize,
    filters: usize,
}

impl Geometry {
    fn plane(&self) -> usize {
        self.ny * self.nz
    }
}

fn to_planes(x: &[Complex64], g: &Geometry, planes: &mut [f64]) {
    let n = x.len();
    for (i, v) in x.iter().enumerate() {
        planes[i] = v.re;
        planes[n + i] = v.im;
    }
    debug_assert_eq!(planes.len(), 2 * g.nt * g.plane());
}

fn check_inputs(params: &VnParams, coils: &CoilMap, sp: &SamplingPattern) -> Result<Geometry> {
    let s = coils.shape();
    let c = params.config();
    if c.frames != s.nt {
        return Err(Error::shape(format!(
            "network built for {} frames, data has {}",
            c.frames, s.nt
        )));
    }
    if !sp.matches(&s) {
        return Err(Error::shape(format!(
            "sampling grid {:?} does not match data grid {}x{}x{}",
            sp.grid(),
            s.ny,
            s.nz,
            s.nt
        )));
    }
    Ok(Geometry {
        ny: s.ny,
        nz: s.nz,
        nt: s.nt,
        k: c.kernel_size,
        filters: c.filters,
    })
}

/// Regularizer branch `r = sum_f Kb_f ⋆ relu(K_f ⋆ x)`; returns `(u, r)`.
fn regularizer(
    params: &VnParams,
    layer: usize,
    g: &Geometry,
    planes: &[f64],
    u: &mut [f64],
    r: &mut [f64],
) {
    let plane = g.plane();
    let (k, kk) = (g.k, g.k * g.k);
    let n_planes = 2 * g.nt;
    u.iter_mut().for_each(|v| *v = 0.0);
    r.iter_mut().for_each(|v| *v = 0.0);
    let mut act = vec![0.0; plane];
    for f in 0..g.filters {
        let uf = &mut u[f * plane..(f + 1) * plane];
        let w = params.kernel(layer, f);
        for p in 0..n_planes {
            correlate_add(
                uf,
                &planes[p * plane..(p + 1) * plane],
                &w[p * kk..(p + 1) * kk],
                g.ny,
                g.nz,
                k,
            );
        }
        for (a, &v) in act.iter_mut().zip(uf.iter()) {
            *a = v.max(0.0);
        }
        let wb = params.kernel_b(layer, f);
        for p in 0..n_planes {
            correlate_add(
                &mut r[p * plane..(p + 1) * plane],
                &act,
                &wb[p * kk..(p + 1) * kk],
                g.ny,
                g.nz,
                k,
            );
        }
    }
}

fn run_forward(
    params: &VnParams,
    x1: Vec<Complex64>,
    sp: &SamplingPattern,
    enc: &mut Encoder<'_>,
    g: &Geometry,
    mut tape: Option<&mut Vec<Tape>>,
) -> Result<Vec<Complex64>> {
    let cells = x1.len();
    let plane = g.plane();
    let mut planes = vec![0.0; 2 * cells];
    let mut u = vec![0.0; g.filters * plane];
    let mut r = vec![0.0; 2 * cells];
    let mut ax = vec![Complex64::default(); cells];
    let mut x = x1.clone();
    for j in 0..params.config().layers {
        to_planes(&x, g, &mut planes);
        regularizer(params, j, g, &planes, &mut u, &mut r);
        enc.normal_into(&x, sp, &mut ax)?;
        let alpha = params.alpha(j);
        let mut next = Vec::with_capacity(cells);
        let mut residual = Vec::with_capacity(cells);
        for i in 0..cells {
            let d = ax[i] - x1[i];
            residual.push(d);
            next.push(x[i] - alpha * d - Complex64::new(r[i], r[cells + i]));
        }
        if next.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::non_finite(format!("output of layer {}", j + 1)));
        }
        if let Some(t) = tape.as_deref_mut() {
            t.push(Tape {
                x,
                pre_activation: u.clone(),
                data_residual: residual,
            });
        }
        x = next;
    }
    Ok(x)
}

/// `R_theta(mbar, Omega)`: runs every layer starting from the zero-filled
/// image `E*_Omega mbar`.
pub fn vn_forward(
    params: &VnParams,
    mbar: &KSpaceData,
    sp: &SamplingPattern,
    coils: &CoilMap,
) -> Result<ImageStack> {
    let g = check_inputs(params, coils, sp)?;
    if mbar.shape() != coils.shape() {
        return Err(Error::shape("k-space and coil map grids differ"));
    }
    let mut enc = Encoder::new(coils);
    let x1 = enc.adjoint(mbar, Some(sp))?.into_vec();
    let out = run_forward(params, x1, sp, &mut enc, &g, None)?;
    Ok(ImageStack::from_raw(coils.shape(), out))
}

/// Reconstruction from synthetic data `mbar = E_Omega x_ref`.
///
/// Uses `E*_Omega E_Omega x_ref` directly for the first iterate.
pub fn reconstruct(params: &VnParams, item: &DataItem, sp: &SamplingPattern) -> Result<ImageStack> {
    let g = check_inputs(params, &item.coils, sp)?;
    let mut enc = Encoder::new(&item.coils);
    let mut x1 = vec![Complex64::default(); item.image.data().len()];
    enc.normal_into(item.image.data(), sp, &mut x1)?;
    let out = run_forward(params, x1, sp, &mut enc, &g, None)?;
    Ok(ImageStack::from_raw(item.coils.shape(), out))
}

/// `||x_ref - x_hat||_2^2`.
pub fn loss(x_ref: &ImageStack, x_hat: &ImageStack) -> Result<f64> {
    x_ref.distance_sqr(x_hat)
}

/// Loss and its exact gradient with respect to every parameter, for the
/// synthetic measurement `mbar = E_Omega x_ref`.
///
/// The ReLU derivative at exactly zero is taken as zero.
pub fn vn_backward(
    params: &VnParams,
    x_ref: &ImageStack,
    sp: &SamplingPattern,
    coils: &CoilMap,
) -> Result<(f64, Gradients)> {
    let g = check_inputs(params, coils, sp)?;
    if !x_ref.shape().same_image_grid(&coils.shape()) {
        return Err(Error::shape("reference image and coil grids differ"));
    }
    let cfg = *params.config();
    let cells = x_ref.data().len();
    let plane = g.plane();
    let (k, kk) = (g.k, g.k * g.k);
    let n_planes = 2 * g.nt;

    let mut enc = Encoder::new(coils);
    let mut x1 = vec![Complex64::default(); cells];
    enc.normal_into(x_ref.data(), sp, &mut x1)?;
    let mut tape = Vec::with_capacity(cfg.layers);
    let out = run_forward(params, x1, sp, &mut enc, &g, Some(&mut tape))?;

    let mut value = 0.0;
    let mut grad_x: Vec<Complex64> = out
        .iter()
        .zip(x_ref.data())
        .map(|(a, b)| {
            let d = a - b;
            value += d.norm_sqr();
            d * 2.0
        })
        .collect();

    let mut grads = Gradients::zeros(cfg);
    let mut upstream = vec![0.0; 2 * cells];
    let mut grad_planes = vec![0.0; 2 * cells];
    let mut planes = vec![0.0; 2 * cells];
    let mut act = vec![0.0; plane];
    let mut grad_act = vec![0.0; plane];
    let mut a_g = vec![Complex64::default(); cells];

    for j in (0..cfg.layers).rev() {
        let t = &tape[j];
        let alpha = params.alpha(j);

        // step size: x_{j+1} contains -alpha * d_j
        let dalpha: f64 = grad_x
            .iter()
            .zip(&t.data_residual)
            .map(|(gx, d)| gx.re * d.re + gx.im * d.im)
            .sum();
        grads.set_alpha(j, -dalpha);

        // regularizer branch enters with a minus sign
        for i in 0..cells {
            upstream[i] = -grad_x[i].re;
            upstream[cells + i] = -grad_x[i].im;
        }
        to_planes(&t.x, &g, &mut planes);
        grad_planes.iter_mut().for_each(|v| *v = 0.0);
        for f in 0..g.filters {
            let u = &t.pre_activation[f * plane..(f + 1) * plane];
            for (a, &v) in act.iter_mut().zip(u) {
                *a = v.max(0.0);
            }
            let wb = params.kernel_b(j, f);
            grad_act.iter_mut().for_each(|v| *v = 0.0);
            for p in 0..n_planes {
                let gp = &upstream[p * plane..(p + 1) * plane];
                correlate_weight_grad(
                    &mut grads.kernel_b_mut(j, f)[p * kk..(p + 1) * kk],
                    gp,
                    &act,
                    g.ny,
                    g.nz,
                    k,
                );
                correlate_adjoint_add(&mut grad_act, gp, &wb[p * kk..(p + 1) * kk], g.ny, g.nz, k);
            }
            for (ga, &v) in grad_act.iter_mut().zip(u) {
                if v <= 0.0 {
                    *ga = 0.0;
                }
            }
            let w = params.kernel(j, f);
            for p in 0..n_planes {
                correlate_weight_grad(
                    &mut grads.kernel_mut(j, f)[p * kk..(p + 1) * kk],
                    &grad_act,
                    &planes[p * plane..(p + 1) * plane],
                    g.ny,
                    g.nz,
                    k,
                );
                correlate_adjoint_add(
                    &mut grad_planes[p * plane..(p + 1) * plane],
                    &grad_act,
                    &w[p * kk..(p + 1) * kk],
                    g.ny,
                    g.nz,
                    k,
                );
            }
        }

        // data term: d(x) = A x - x_1 with A = E*_Omega E_Omega self-adjoint
        enc.normal_into(&grad_x, sp, &mut a_g)?;
        for i in 0..cells {
            grad_x[i] = grad_x[i] - alpha * a_g[i]
                + Complex64::new(grad_planes[i], grad_planes[cells + i]);
        }
    }

    if !grads.is_finite() || !value.is_finite() {
        return Err(Error::non_finite("network gradients"));
    }
    Ok((value, grads))
}

/// Mean per-image loss `(1/N_i) sum_i ||x_i - R_theta(E_Omega x_i, Omega)||^2`.
pub fn cost_over_dataset(params: &VnParams, sp: &SamplingPattern, dataset: &[DataItem]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for item in dataset {
        let x_hat = reconstruct(params, item, sp)?;
        total += loss(&item.image, &x_hat)?;
    }
    Ok(total / dataset.len() as f64)
}

/// Mean loss and mean gradient over a batch, reduced in index order.
pub fn batch_gradient(
    params: &VnParams,
    sp: &SamplingPattern,
    batch: &[&DataItem],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    let mut acc = Gradients::zeros(*params.config());
    for item in batch {
        let (l, g) = vn_backward(params, &item.image, sp, &item.coils)?;
        total += l;
        acc.add_assign(&g);
    }
    let inv = 1.0 / batch.len() as f64;
    acc.scale(inv);
    Ok((total * inv, acc))
}
