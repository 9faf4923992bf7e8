//! Smooth synthetic phantoms with matching coil sensitivities.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kspace::{CoilMap, DataItem, Encoder, GridShape, ImageStack};
use crate::seed::derive_seed;

/// Edge width of the ellipses, in normalized radius units.
const EDGE: f64 = 0.06;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhantomConfig {
    pub grid: GridShape,
    pub min_ellipses: usize,
    pub max_ellipses: usize,
    /// Largest per-frame exponential decay rate of a region.
    pub max_decay: f64,
}

impl PhantomConfig {
    pub fn new(grid: GridShape) -> Self {
        Self {
            grid,
            min_ellipses: 4,
            max_ellipses: 10,
            max_decay: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_ellipses == 0 || self.min_ellipses > self.max_ellipses {
            return Err(Error::invalid(format!(
                "ellipse count range {}..={} is empty",
                self.min_ellipses, self.max_ellipses
            )));
        }
        if !(self.max_decay >= 0.0 && self.max_decay.is_finite()) {
            return Err(Error::invalid("decay rate must be finite and >= 0"));
        }
        Ok(())
    }
}

struct Ellipse {
    cy: f64,
    cz: f64,
    ay: f64,
    az: f64,
    cos: f64,
    sin: f64,
    contrast: Complex64,
    decay: f64,
}

impl Ellipse {
    fn random(rng: &mut ChaCha8Rng, max_decay: f64, background: bool) -> Self {
        let (cy, cz, ay, az) = if background {
            (
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(0.7..0.85),
                rng.gen_range(0.6..0.8),
            )
        } else {
            (
                rng.gen_range(-0.45..0.45),
                rng.gen_range(-0.45..0.45),
                rng.gen_range(0.08..0.35),
                rng.gen_range(0.08..0.35),
            )
        };
        let angle = rng.gen_range(0.0..PI);
        let magnitude = if background {
            rng.gen_range(0.3..0.5)
        } else {
            rng.gen_range(-0.4..0.6)
        };
        let phase = rng.gen_range(-0.3..0.3);
        Self {
            cy,
            cz,
            ay,
            az,
            cos: angle.cos(),
            sin: angle.sin(),
            contrast: Complex64::from_polar(magnitude, phase),
            decay: rng.gen_range(0.0..=max_decay),
        }
    }

    /// Smooth indicator in `[0, 1]`.
    fn weight(&self, u: f64, v: f64) -> f64 {
        let (du, dv) = (u - self.cy, v - self.cz);
        let p = (du * self.cos + dv * self.sin) / self.ay;
        let q = (-du * self.sin + dv * self.cos) / self.az;
        let r = (p * p + q * q).sqrt();
        0.5 * (1.0 - ((r - 1.0) / EDGE).tanh())
    }
}

fn axis(i: usize, n: usize) -> f64 {
    (i as f64 - (n / 2) as f64) / (n as f64 / 2.0)
}

fn phantom_image(config: &PhantomConfig, rng: &mut ChaCha8Rng) -> ImageStack {
    let g = config.grid;
    let count = rng.gen_range(config.min_ellipses..=config.max_ellipses);
    let ellipses: Vec<Ellipse> = (0..count)
        .map(|i| Ellipse::random(rng, config.max_decay, i == 0))
        .collect();
    // slowly varying background phase
    let (p0, py, pz) = (
        rng.gen_range(-PI..PI),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
    );
    let mut data = vec![Complex64::default(); g.cells()];
    for t in 0..g.nt {
        for y in 0..g.ny {
            let u = axis(y, g.ny);
            for z in 0..g.nz {
                let v = axis(z, g.nz);
                let mut value = Complex64::default();
                for e in &ellipses {
                    value += e.contrast * (e.weight(u, v) * (-e.decay * t as f64).exp());
                }
                let phase = Complex64::from_polar(1.0, p0 + py * u + pz * v);
                data[t * g.frame_len() + y * g.nz + z] = value * phase;
            }
        }
    }
    ImageStack::from_vec(g, data).expect("phantom values are finite")
}

/// Shifted Gaussian profiles around the field of view with a linear phase
/// each, normalized to unit root-sum-of-squares per pixel.
fn coil_profiles(grid: &GridShape, rng: &mut ChaCha8Rng) -> Result<CoilMap> {
    let nc = grid.nc;
    let mut data = vec![Complex64::default(); nc * grid.frame_len()];
    let offset = rng.gen_range(0.0..2.0 * PI);
    for s in 0..nc {
        let angle = offset + 2.0 * PI * s as f64 / nc as f64 + rng.gen_range(-0.2..0.2);
        let (cy, cz) = (1.1 * angle.cos(), 1.1 * angle.sin());
        let width = rng.gen_range(0.8..1.2);
        let (ky, kz) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let phase0 = rng.gen_range(-PI..PI);
        for y in 0..grid.ny {
            let u = axis(y, grid.ny);
            for z in 0..grid.nz {
                let v = axis(z, grid.nz);
                let d2 = (u - cy).powi(2) + (v - cz).powi(2);
                let mag = (-d2 / (2.0 * width * width)).exp();
                data[s * grid.frame_len() + y * grid.nz + z] =
                    Complex64::from_polar(mag, phase0 + ky * u + kz * v);
            }
        }
    }
    CoilMap::new(*grid, data)
}

/// Scales the image so that `max |F C x| = 1`.
pub fn normalize_item(item: &DataItem) -> Result<DataItem> {
    let m = Encoder::new(&item.coils).forward(&item.image, None)?;
    let peak = m.max_abs();
    if !(peak > 0.0) {
        return Err(Error::invalid("cannot normalize an all-zero item"));
    }
    DataItem::new(item.image.scaled(1.0 / peak), item.coils.clone())
}

/// `count` phantoms, item `i` drawn from its own seed stream so that a
/// dataset is a prefix of any larger one with the same seed.
pub fn generate_phantom_dataset(
    config: &PhantomConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<DataItem>> {
    config.validate()?;
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, i as u64));
            let image = phantom_image(config, &mut rng);
            let coils = coil_profiles(&config.grid, &mut rng)?;
            normalize_item(&DataItem::new(image, coils)?)
        })
        .collect()
}
