//! Domain types for multi-coil Cartesian MRI and the encoding operator.
//!
//! Memory layouts (row-major, last index fastest):
//!
//! * [`ImageStack`]: `(t, y, z)`
//! * [`CoilMap`]: `(coil, y, z)`
//! * [`KSpaceData`]: `(coil, t, ky, kz)`
//! * [`SamplingPattern`] masks: `(t, ky, kz)`, i.e. one k-space frame per `t`.

mod encode;
pub mod fft;
mod sampling;

pub use encode::{adjoint_encode, apply_sampling, forward_encode, Encoder};
pub use fft::{fft2_ortho_frames, ifft2_ortho_frames, Fft2};
pub use sampling::{KPoint, SamplingPattern};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for the per-pixel coil normalization invariant.
pub const COIL_NORM_TOL: f64 = 1e-9;

/// Grid dimensions: `ny x nz` spatial, `nt` frames, `nc` receive coils.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub ny: usize,
    pub nz: usize,
    pub nt: usize,
    pub nc: usize,
}

impl GridShape {
    pub fn new(ny: usize, nz: usize, nt: usize, nc: usize) -> Result<Self> {
        if ny == 0 || nz == 0 || nt == 0 || nc == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {ny}x{nz}x{nt} with {nc} coils"
            )));
        }
        Ok(Self { ny, nz, nt, nc })
    }

    /// Number of k-space cells `N = ny * nz * nt`.
    pub fn cells(&self) -> usize {
        self.ny * self.nz * self.nt
    }

    pub fn frame_len(&self) -> usize {
        self.ny * self.nz
    }

    pub fn kspace_len(&self) -> usize {
        self.cells() * self.nc
    }

    /// Same spatial/temporal grid, ignoring the coil count.
    pub fn same_image_grid(&self, other: &GridShape) -> bool {
        self.ny == other.ny && self.nz == other.nz && self.nt == other.nt
    }
}

fn all_finite(data: &[Complex64]) -> bool {
    data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// A complex image volume `x` of `ny x nz x nt` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageStack {
    shape: GridShape,
    data: Vec<Complex64>,
}

impl ImageStack {
    pub fn zeros(shape: GridShape) -> Self {
        Self {
            shape,
            data: vec![Complex64::default(); shape.cells()],
        }
    }

    pub fn from_vec(shape: GridShape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.cells() {
            return Err(Error::shape(format!(
                "image needs {} values, got {}",
                shape.cells(),
                data.len()
            )));
        }
        if !all_finite(&data) {
            return Err(Error::non_finite("image data"));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, y: usize, z: usize, t: usize) -> Complex64 {
        let s = self.shape;
        self.data[(t * s.ny + y) * s.nz + z]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Squared Euclidean distance to another image of the same grid.
    pub fn distance_sqr(&self, other: &ImageStack) -> Result<f64> {
        if !self.shape.same_image_grid(&other.shape) {
            return Err(Error::shape("images live on different grids"));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum())
    }

    /// Inner product `sum conj(self) * other`.
    pub fn dot(&self, other: &ImageStack) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|c| c * factor).collect(),
        }
    }

    pub(crate) fn from_raw(shape: GridShape, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), shape.cells());
        Self { shape, data }
    }
}

/// Complex coil sensitivities, renormalized so `sum_s |c_s(y,z)|^2 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilMap {
    shape: GridShape,
    data: Vec<Complex64>,
}

impl CoilMap {
    /// Builds a coil map, renormalizing every pixel across coils.
    ///
    /// Pixels already normalized to within `1e-12` are kept bit for bit, so
    /// saved maps load back unchanged. Fails if a pixel has zero total
    /// sensitivity.
    pub fn new(shape: GridShape, mut data: Vec<Complex64>) -> Result<Self> {
        let plane = shape.frame_len();
        if data.len() != plane * shape.nc {
            return Err(Error::shape(format!(
                "coil map needs {} values, got {}",
                plane * shape.nc,
                data.len()
            )));
        }
        if !all_finite(&data) {
            return Err(Error::non_finite("coil map"));
        }
        for p in 0..plane {
            let energy: f64 = (0..shape.nc).map(|s| data[s * plane + p].norm_sqr()).sum();
            if energy <= 0.0 {
                return Err(Error::invalid(format!(
                    "pixel {p} has zero total coil sensitivity"
                )));
            }
            if (energy - 1.0).abs() <= 1e-12 {
                continue;
            }
            let inv = 1.0 / energy.sqrt();
            for s in 0..shape.nc {
                data[s * plane + p] *= inv;
            }
        }
        Ok(Self { shape, data })
    }

    /// Single coil with unit sensitivity everywhere.
    pub fn identity(shape: GridShape) -> Self {
        let shape = GridShape { nc: 1, ..shape };
        Self {
            shape,
            data: vec![Complex64::new(1.0, 0.0); shape.frame_len()],
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn coil(&self, s: usize) -> &[Complex64] {
        let plane = self.shape.frame_len();
        &self.data[s * plane..(s + 1) * plane]
    }

    /// Largest deviation of `sum_s |c_s|^2` from one over all pixels.
    pub fn normalization_error(&self) -> f64 {
        let plane = self.shape.frame_len();
        (0..plane)
            .map(|p| {
                let e: f64 = (0..self.shape.nc)
                    .map(|s| self.data[s * plane + p].norm_sqr())
                    .sum();
                (e - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Multi-coil k-space, `(coil, t, ky, kz)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceData {
    shape: GridShape,
    data: Vec<Complex64>,
}

impl KSpaceData {
    pub fn zeros(shape: GridShape) -> Self {
        Self {
            shape,
            data: vec![Complex64::default(); shape.kspace_len()],
        }
    }

    pub fn from_vec(shape: GridShape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.kspace_len() {
            return Err(Error::shape(format!(
                "k-space needs {} values, got {}",
                shape.kspace_len(),
                data.len()
            )));
        }
        if !all_finite(&data) {
            return Err(Error::non_finite("k-space data"));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, ky: usize, kz: usize, t: usize, coil: usize) -> Complex64 {
        let s = self.shape;
        self.data[((coil * s.nt + t) * s.ny + ky) * s.nz + kz]
    }

    pub fn dot(&self, other: &KSpaceData) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest coil-wise complex magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub(crate) fn from_raw(shape: GridShape, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), shape.kspace_len());
        Self { shape, data }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}

/// One training/test example: a reference image and its coil sensitivities.
#[derive(Clone, Debug, PartialEq)]
pub struct DataItem {
    pub image: ImageStack,
    pub coils: CoilMap,
}

impl DataItem {
    pub fn new(image: ImageStack, coils: CoilMap) -> Result<Self> {
        if !image.shape().same_image_grid(&coils.shape()) {
            return Err(Error::shape("image and coil map grids differ"));
        }
        Ok(Self { image, coils })
    }

    pub fn shape(&self) -> GridShape {
        self.coils.shape()
    }
}

/// Forward-fft every `(t, coil)` slice of a k-space-shaped array.
pub fn fft2_ortho(v: &KSpaceData) -> KSpaceData {
    let mut out = v.clone();
    let s = v.shape;
    fft2_ortho_frames(&mut out.data, s.ny, s.nz).expect("k-space buffers hold whole frames");
    out
}

/// Inverse of [`fft2_ortho`].
pub fn ifft2_ortho(v: &KSpaceData) -> KSpaceData {
    let mut out = v.clone();
    let s = v.shape;
    ifft2_ortho_frames(&mut out.data, s.ny, s.nz).expect("k-space buffers hold whole frames");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_zero_dims() {
        assert!(GridShape::new(0, 4, 1, 1).is_err());
        assert!(GridShape::new(4, 4, 1, 0).is_err());
        let g = GridShape::new(128, 64, 10, 16).unwrap();
        assert_eq!(g.cells(), 81920);
    }

    #[test]
    fn coil_map_is_renormalized() {
        let g = GridShape::new(2, 2, 1, 2).unwrap();
        let data = vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(4.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -0.5),
        ];
        let c = CoilMap::new(g, data).unwrap();
        assert!(c.normalization_error() < COIL_NORM_TOL);
        assert!((c.coil(0)[0].re - 0.6).abs() < 1e-15);
    }

    #[test]
    fn coil_map_rejects_dead_pixels() {
        let g = GridShape::new(1, 2, 1, 1).unwrap();
        let data = vec![Complex64::new(1.0, 0.0), Complex64::default()];
        assert!(CoilMap::new(g, data).is_err());
    }

    #[test]
    fn image_rejects_nan() {
        let g = GridShape::new(1, 1, 1, 1).unwrap();
        assert!(matches!(
            ImageStack::from_vec(g, vec![Complex64::new(f64::NAN, 0.0)]),
            Err(Error::NonFinite { .. })
        ));
    }
}
