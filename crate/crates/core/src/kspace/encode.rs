use num_complex::Complex64;

use crate::error::{Error, Result};

use super::fft::Fft2;
use super::{CoilMap, ImageStack, KSpaceData, SamplingPattern};

/// The encoding operator `E = F C` for one coil map, with cached FFT plans.
///
/// `E_Omega` is `E` followed by masking with a [`SamplingPattern`].
pub struct Encoder<'a> {
    coils: &'a CoilMap,
    fft: Fft2,
    frame: Vec<Complex64>,
}

impl<'a> Encoder<'a> {
    pub fn new(coils: &'a CoilMap) -> Self {
        let s = coils.shape();
        Self {
            coils,
            fft: Fft2::new(s.ny, s.nz),
            frame: vec![Complex64::default(); s.frame_len()],
        }
    }

    pub fn coils(&self) -> &CoilMap {
        self.coils
    }

    fn check_image(&self, x: &[Complex64]) -> Result<()> {
        let s = self.coils.shape();
        if x.len() != s.cells() {
            return Err(Error::shape(format!(
                "image has {} cells, coil grid expects {}",
                x.len(),
                s.cells()
            )));
        }
        Ok(())
    }

    fn check_pattern(&self, sp: &SamplingPattern) -> Result<()> {
        if !sp.matches(&self.coils.shape()) {
            return Err(Error::shape(format!(
                "sampling grid {:?} does not match coil grid",
                sp.grid()
            )));
        }
        Ok(())
    }

    /// `m = F C x`, optionally masked to `Omega`.
    pub fn forward_into(
        &mut self,
        x: &[Complex64],
        sp: Option<&SamplingPattern>,
        out: &mut [Complex64],
    ) -> Result<()> {
        self.check_image(x)?;
        if let Some(sp) = sp {
            self.check_pattern(sp)?;
        }
        let s = self.coils.shape();
        let plane = s.frame_len();
        for c in 0..s.nc {
            let sens = self.coils.coil(c);
            for t in 0..s.nt {
                let img = &x[t * plane..(t + 1) * plane];
                let dst = &mut out[(c * s.nt + t) * plane..(c * s.nt + t + 1) * plane];
                for ((d, &xi), &ci) in dst.iter_mut().zip(img).zip(sens) {
                    *d = xi * ci;
                }
                self.fft.forward(dst);
                if let Some(sp) = sp {
                    let mask = &sp.mask()[t * plane..(t + 1) * plane];
                    for (d, &m) in dst.iter_mut().zip(mask) {
                        if !m {
                            *d = Complex64::default();
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `x = sum_s conj(c_s) F^-1 mask(m)_s`; `sp = None` means no masking.
    pub fn adjoint_into(
        &mut self,
        m: &[Complex64],
        sp: Option<&SamplingPattern>,
        out: &mut [Complex64],
    ) -> Result<()> {
        let s = self.coils.shape();
        if m.len() != s.kspace_len() {
            return Err(Error::shape(format!(
                "k-space has {} values, expected {}",
                m.len(),
                s.kspace_len()
            )));
        }
        self.check_image(out)?;
        if let Some(sp) = sp {
            self.check_pattern(sp)?;
        }
        let plane = s.frame_len();
        out.iter_mut().for_each(|v| *v = Complex64::default());
        for c in 0..s.nc {
            let sens = self.coils.coil(c);
            for t in 0..s.nt {
                let src = &m[(c * s.nt + t) * plane..(c * s.nt + t + 1) * plane];
                match sp {
                    Some(sp) => {
                        let mask = &sp.mask()[t * plane..(t + 1) * plane];
                        for ((f, &v), &keep) in self.frame.iter_mut().zip(src).zip(mask) {
                            *f = if keep { v } else { Complex64::default() };
                        }
                    }
                    None => self.frame.copy_from_slice(src),
                }
                self.fft.inverse(&mut self.frame);
                let dst = &mut out[t * plane..(t + 1) * plane];
                for ((d, &f), &ci) in dst.iter_mut().zip(&self.frame).zip(sens) {
                    *d += ci.conj() * f;
                }
            }
        }
        Ok(())
    }

    /// `out = E*_Omega E_Omega x`, computed one coil frame at a time.
    pub fn normal_into(
        &mut self,
        x: &[Complex64],
        sp: &SamplingPattern,
        out: &mut [Complex64],
    ) -> Result<()> {
        self.check_image(x)?;
        self.check_image(out)?;
        self.check_pattern(sp)?;
        let s = self.coils.shape();
        let plane = s.frame_len();
        out.iter_mut().for_each(|v| *v = Complex64::default());
        for c in 0..s.nc {
            let sens = self.coils.coil(c);
            for t in 0..s.nt {
                let img = &x[t * plane..(t + 1) * plane];
                for ((f, &xi), &ci) in self.frame.iter_mut().zip(img).zip(sens) {
                    *f = xi * ci;
                }
                self.fft.forward(&mut self.frame);
                let mask = &sp.mask()[t * plane..(t + 1) * plane];
                for (f, &keep) in self.frame.iter_mut().zip(mask) {
                    if !keep {
                        *f = Complex64::default();
                    }
                }
                self.fft.inverse(&mut self.frame);
                let dst = &mut out[t * plane..(t + 1) * plane];
                for ((d, &f), &ci) in dst.iter_mut().zip(&self.frame).zip(sens) {
                    *d += ci.conj() * f;
                }
            }
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &ImageStack, sp: Option<&SamplingPattern>) -> Result<KSpaceData> {
        let shape = self.coils.shape();
        if !x.shape().same_image_grid(&shape) {
            return Err(Error::shape("image grid does not match coil grid"));
        }
        let mut out = vec![Complex64::default(); shape.kspace_len()];
        self.forward_into(x.data(), sp, &mut out)?;
        Ok(KSpaceData::from_raw(shape, out))
    }

    pub fn adjoint(&mut self, m: &KSpaceData, sp: Option<&SamplingPattern>) -> Result<ImageStack> {
        let shape = self.coils.shape();
        if m.shape() != shape {
            return Err(Error::shape("k-space grid does not match coil grid"));
        }
        let mut out = vec![Complex64::default(); shape.cells()];
        self.adjoint_into(m.data(), sp, &mut out)?;
        Ok(ImageStack::from_raw(shape, out))
    }
}

/// `m = E x`: coil weighting followed by a unitary 2D DFT of every frame.
pub fn forward_encode(x: &ImageStack, c: &CoilMap) -> Result<KSpaceData> {
    Encoder::new(c).forward(x, None)
}

/// Zero-fills `m` outside `Omega` (all coils). Idempotent.
pub fn apply_sampling(m: &KSpaceData, sp: &SamplingPattern) -> Result<KSpaceData> {
    let s = m.shape();
    if !sp.matches(&s) {
        return Err(Error::shape(format!(
            "sampling grid {:?} does not match k-space grid",
            sp.grid()
        )));
    }
    let mut out = m.clone();
    let cells = s.cells();
    for coil in out.data_mut().chunks_exact_mut(cells) {
        for (v, &keep) in coil.iter_mut().zip(sp.mask()) {
            if !keep {
                *v = Complex64::default();
            }
        }
    }
    Ok(out)
}

/// `E*_Omega mbar`: masks, inverse transforms and coil-combines.
pub fn adjoint_encode(
    mbar: &KSpaceData,
    c: &CoilMap,
    sp: &SamplingPattern,
) -> Result<ImageStack> {
    Encoder::new(c).adjoint(mbar, Some(sp))
}
