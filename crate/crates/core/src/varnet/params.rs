use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Architecture of the unrolled network.
///
/// Each of the `filters` kernels per layer spans `kernel_size x kernel_size`
/// pixels and all `frames` time frames of both the real and imaginary
/// channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VnConfig {
    pub layers: usize,
    pub filters: usize,
    pub kernel_size: usize,
    pub frames: usize,
}

impl VnConfig {
    pub fn new(layers: usize, filters: usize, kernel_size: usize, frames: usize) -> Result<Self> {
        let c = Self {
            layers,
            filters,
            kernel_size,
            frames,
        };
        c.validate()?;
        Ok(c)
    }

    /// Small network that trains in seconds on a laptop.
    pub fn desk(frames: usize) -> Self {
        Self {
            layers: 3,
            filters: 4,
            kernel_size: 5,
            frames,
        }
    }

    /// Ten layers of 24 filters of size 11.
    pub fn paper(frames: usize) -> Self {
        Self {
            layers: 10,
            filters: 24,
            kernel_size: 11,
            frames,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.filters == 0 || self.frames == 0 {
            return Err(Error::invalid(format!("degenerate network config {self:?}")));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::invalid(format!(
                "kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }

    /// Input planes seen by one kernel: real and imaginary part of each frame.
    pub fn planes(&self) -> usize {
        2 * self.frames
    }

    pub fn kernel_len(&self) -> usize {
        self.planes() * self.kernel_size * self.kernel_size
    }

    pub fn layer_len(&self) -> usize {
        2 * self.filters * self.kernel_len() + 1
    }

    pub fn param_count(&self) -> usize {
        self.layers * self.layer_len()
    }

    fn kernel_offset(&self, layer: usize, filter: usize) -> usize {
        layer * self.layer_len() + filter * self.kernel_len()
    }

    fn kernel_b_offset(&self, layer: usize, filter: usize) -> usize {
        layer * self.layer_len() + (self.filters + filter) * self.kernel_len()
    }

    fn alpha_offset(&self, layer: usize) -> usize {
        (layer + 1) * self.layer_len() - 1
    }
}

macro_rules! param_layout {
    ($ty:ident) => {
        impl $ty {
            pub fn zeros(config: VnConfig) -> Self {
                Self {
                    config,
                    values: vec![0.0; config.param_count()],
                }
            }

            pub fn config(&self) -> &VnConfig {
                &self.config
            }

            /// Flat storage, layer-major: `K_{j,1..Nf}`, `Kb_{j,1..Nf}`, `alpha_j`.
            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [f64] {
                &mut self.values
            }

            /// Kernel `K_{j,f}`, laid out `[channel][t][a][b]`.
            pub fn kernel(&self, layer: usize, filter: usize) -> &[f64] {
                let o = self.config.kernel_offset(layer, filter);
                &self.values[o..o + self.config.kernel_len()]
            }

            pub fn kernel_mut(&mut self, layer: usize, filter: usize) -> &mut [f64] {
                let o = self.config.kernel_offset(layer, filter);
                let n = self.config.kernel_len();
                &mut self.values[o..o + n]
            }

            /// Kernel `Kb_{j,f}`, same layout as [`Self::kernel`].
            pub fn kernel_b(&self, layer: usize, filter: usize) -> &[f64] {
                let o = self.config.kernel_b_offset(layer, filter);
                &self.values[o..o + self.config.kernel_len()]
            }

            pub fn kernel_b_mut(&mut self, layer: usize, filter: usize) -> &mut [f64] {
                let o = self.config.kernel_b_offset(layer, filter);
                let n = self.config.kernel_len();
                &mut self.values[o..o + n]
            }

            pub fn alpha(&self, layer: usize) -> f64 {
                self.values[self.config.alpha_offset(layer)]
            }

            pub fn set_alpha(&mut self, layer: usize, value: f64) {
                let o = self.config.alpha_offset(layer);
                self.values[o] = value;
            }

            pub fn is_finite(&self) -> bool {
                self.values.iter().all(|v| v.is_finite())
            }
        }
    };
}

/// Learned parameters: per layer, two kernel banks and a step size.
#[derive(Clone, Debug, PartialEq)]
pub struct VnParams {
    config: VnConfig,
    values: Vec<f64>,
}

/// `dF/dtheta`, laid out exactly like [`VnParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    config: VnConfig,
    values: Vec<f64>,
}

param_layout!(VnParams);
param_layout!(Gradients);

/// Initial step size of every layer.
pub const ALPHA_INIT: f64 = 0.1;

impl VnParams {
    pub fn from_values(config: VnConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if values.len() != config.param_count() {
            return Err(Error::shape(format!(
                "{config:?} needs {} parameters, got {}",
                config.param_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("network parameters"));
        }
        Ok(Self { config, values })
    }

    /// Kernels uniform in `[-s, s)` with `s = 1 / sqrt(k * k * Nt * Nf)`,
    /// every `alpha_j = 0.1`.
    pub fn init(config: VnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = config.kernel_size;
        let s = 1.0 / ((k * k * config.frames * config.filters) as f64).sqrt();
        let mut p = Self::zeros(config);
        p.values.iter_mut().for_each(|v| *v = rng.gen_range(-s..s));
        for j in 0..config.layers {
            p.set_alpha(j, ALPHA_INIT);
        }
        Ok(p)
    }
}

impl Gradients {
    pub(crate) fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}
