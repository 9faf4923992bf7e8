//! Unitary, centered 2D DFT applied frame by frame.
//!
//! The forward transform is `fftshift(fft2(v)) / sqrt(ny * nz)`, so the DC
//! bin of every frame lands at `(ny / 2, nz / 2)`. The inverse undoes both the
//! shift and the scaling. Both directions preserve the Euclidean norm.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Reusable plans and scratch space for one `ny x nz` frame size.
pub struct Fft2 {
    ny: usize,
    nz: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    column: Vec<Complex64>,
    frame: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(ny: usize, nz: usize) -> Self {
        let (row_fwd, row_inv, col_fwd, col_inv) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (
                p.plan_fft_forward(nz),
                p.plan_fft_inverse(nz),
                p.plan_fft_forward(ny),
                p.plan_fft_inverse(ny),
            )
        });
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            ny,
            nz,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            column: vec![Complex64::default(); ny],
            frame: vec![Complex64::default(); ny * nz],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn frame_len(&self) -> usize {
        self.ny * self.nz
    }

    /// Forward transform of a single frame, in place.
    pub fn forward(&mut self, frame: &mut [Complex64]) {
        debug_assert_eq!(frame.len(), self.frame_len());
        let (ny, nz) = (self.ny, self.nz);
        self.transform(frame, true);
        let scale = 1.0 / ((ny * nz) as f64).sqrt();
        for y in 0..ny {
            let sy = (y + ny / 2) % ny;
            for z in 0..nz {
                let sz = (z + nz / 2) % nz;
                self.frame[sy * nz + sz] = frame[y * nz + z] * scale;
            }
        }
        frame.copy_from_slice(&self.frame);
    }

    /// Inverse transform of a single (centered) frame, in place.
    pub fn inverse(&mut self, frame: &mut [Complex64]) {
        debug_assert_eq!(frame.len(), self.frame_len());
        let (ny, nz) = (self.ny, self.nz);
        let scale = 1.0 / ((ny * nz) as f64).sqrt();
        for y in 0..ny {
            let sy = (y + ny / 2) % ny;
            for z in 0..nz {
                let sz = (z + nz / 2) % nz;
                self.frame[y * nz + z] = frame[sy * nz + sz] * scale;
            }
        }
        frame.copy_from_slice(&self.frame);
        self.transform(frame, false);
    }

    fn transform(&mut self, frame: &mut [Complex64], forward: bool) {
        let (ny, nz) = (self.ny, self.nz);
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        for r in frame.chunks_exact_mut(nz) {
            row.process_with_scratch(r, &mut self.scratch);
        }
        for z in 0..nz {
            for y in 0..ny {
                self.column[y] = frame[y * nz + z];
            }
            col.process_with_scratch(&mut self.column, &mut self.scratch);
            for y in 0..ny {
                frame[y * nz + z] = self.column[y];
            }
        }
    }
}

fn check_frames(data: &[Complex64], ny: usize, nz: usize) -> Result<()> {
    if ny == 0 || nz == 0 || data.len() % (ny * nz) != 0 {
        return Err(Error::shape(format!(
            "buffer of length {} is not a whole number of {ny}x{nz} frames",
            data.len()
        )));
    }
    Ok(())
}

/// Forward unitary 2D DFT of every `ny x nz` frame in `data`.
pub fn fft2_ortho_frames(data: &mut [Complex64], ny: usize, nz: usize) -> Result<()> {
    check_frames(data, ny, nz)?;
    let mut fft = Fft2::new(ny, nz);
    for frame in data.chunks_exact_mut(ny * nz) {
        fft.forward(frame);
    }
    Ok(())
}

/// Inverse of [`fft2_ortho_frames`].
pub fn ifft2_ortho_frames(data: &mut [Complex64], ny: usize, nz: usize) -> Result<()> {
    check_frames(data, ny, nz)?;
    let mut fft = Fft2::new(ny, nz);
    for frame in data.chunks_exact_mut(ny * nz) {
        fft.inverse(frame);
    }
    Ok(())
}
