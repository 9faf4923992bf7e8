//! Synthetic data, evaluation, configuration files and the experiment runner.

mod config;
mod experiment;
mod files;
mod phantom;

pub use config::{ExperimentConfig, InitialPattern};
pub use experiment::{
    baseline_pattern, evaluate_rmse, experiment_datasets, initial_pattern, learn_for, pretrain_for,
    retrain_for, run_experiment, summary_csv, SummaryRow, METHOD_PRETRAINED, METHOD_PROPOSED,
    METHOD_RETRAINED,
};
pub use files::{
    coils_from_bytes, coils_to_bytes, image_files, image_from_bytes, image_to_bytes, mask_pgm,
    read_dataset, read_image, write_dataset, write_image, write_mask_pgm,
};
pub use phantom::{generate_phantom_dataset, normalize_item, PhantomConfig};

use crate::error::{Error, Result};
use crate::kspace::{ImageStack, KSpaceData};

/// Divides by the largest coil-wise magnitude so the result peaks at 1.
pub fn normalize_kspace(m: &KSpaceData) -> Result<KSpaceData> {
    let peak = m.max_abs();
    if !(peak > 0.0) {
        return Err(Error::invalid("cannot normalize all-zero k-space"));
    }
    KSpaceData::from_vec(m.shape(), m.data().iter().map(|v| v / peak).collect())
}

/// `sqrt( (1 / (Nt * Ni)) * sum_i ||x_i - x_hat_i||^2 )`, `Ni` the number of
/// image pairs.
pub fn rmse(refs: &[ImageStack], recons: &[ImageStack]) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if refs.len() != recons.len() {
        return Err(Error::shape(format!(
            "{} reference images but {} reconstructions",
            refs.len(),
            recons.len()
        )));
    }
    let mut total = 0.0;
    for (a, b) in refs.iter().zip(recons) {
        total += a.distance_sqr(b)?;
    }
    let nt = refs[0].shape().nt as f64;
    Ok((total / (nt * refs.len() as f64)).sqrt())
}
