//! End-to-end comparison of fixed and learned sampling patterns.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::alternating::{alternate, pretrain, retrain_fixed_sp, PretrainPatterns, TrainState};
use crate::error::Result;
use crate::kspace::{DataItem, SamplingPattern};
use crate::patterns::{budget_for_acceleration, empty_with_calibration, read_sp_for, write_sp, PatternFamily};
use crate::seed::derive_seed;
use crate::varnet::{reconstruct, write_params, VnParams};

use super::config::{ExperimentConfig, InitialPattern};
use super::files::write_mask_pgm;
use super::phantom::{generate_phantom_dataset, PhantomConfig};
use super::rmse;

const STREAM_TRAIN: u64 = 10;
const STREAM_TEST: u64 = 11;
const STREAM_PRETRAIN: u64 = 12;
const STREAM_BASELINE_SP: u64 = 13;
const STREAM_RETRAIN: u64 = 14;
const STREAM_INIT_SP: u64 = 15;
const STREAM_ALTERNATE: u64 = 16;

pub const METHOD_PRETRAINED: &str = "pretrained_vdpd";
pub const METHOD_RETRAINED: &str = "retrained_vdpd";
pub const METHOD_PROPOSED: &str = "proposed";

/// Training and test phantoms of a configuration.
pub fn experiment_datasets(config: &ExperimentConfig) -> Result<(Vec<DataItem>, Vec<DataItem>)> {
    let phantom = PhantomConfig::new(config.grid);
    let train = generate_phantom_dataset(
        &phantom,
        config.train_items,
        derive_seed(config.data_seed, STREAM_TRAIN, 0),
    )?;
    let test = generate_phantom_dataset(
        &phantom,
        config.test_items,
        derive_seed(config.data_seed, STREAM_TEST, 0),
    )?;
    Ok((train, test))
}

/// RMSE over `items` of the reconstructions with `(params, sp)`.
pub fn evaluate_rmse(params: &VnParams, sp: &SamplingPattern, items: &[DataItem]) -> Result<f64> {
    let refs: Vec<_> = items.iter().map(|i| i.image.clone()).collect();
    let recons = items
        .iter()
        .map(|i| reconstruct(params, i, sp))
        .collect::<Result<Vec<_>>>()?;
    rmse(&refs, &recons)
}

pub fn pretrain_for(config: &ExperimentConfig, train: &[DataItem]) -> Result<VnParams> {
    let patterns = PretrainPatterns {
        families: config.pretrain_families.clone(),
        accelerations: config.pretrain_af.clone(),
        calibration: config.calibration,
        shape: config.family_shape,
    };
    pretrain(
        &config.vn,
        &config.pretrain,
        train,
        &patterns,
        derive_seed(config.seed, STREAM_PRETRAIN, 0),
    )
}

/// The fixed VD+PD baseline pattern for one acceleration.
pub fn baseline_pattern(config: &ExperimentConfig, af: f64) -> Result<SamplingPattern> {
    let m = budget_for_acceleration(&config.grid, af)?;
    PatternFamily::VdPd.generate(
        &config.grid,
        m,
        &config.calibration,
        &config.family_shape,
        derive_seed(config.seed, STREAM_BASELINE_SP, af.to_bits()),
    )
}

pub fn retrain_for(
    config: &ExperimentConfig,
    pretrained: &VnParams,
    sp: &SamplingPattern,
    train: &[DataItem],
    af: f64,
) -> Result<VnParams> {
    let seed = derive_seed(config.seed, STREAM_RETRAIN, af.to_bits());
    Ok(retrain_fixed_sp(&config.retrain, pretrained, sp, train, seed)?.params)
}

/// Starting pattern of the alternating search at acceleration `af`.
pub fn initial_pattern(config: &ExperimentConfig, af: f64) -> Result<SamplingPattern> {
    let m = budget_for_acceleration(&config.grid, af)?;
    let seed = derive_seed(config.seed, STREAM_INIT_SP, af.to_bits());
    match &config.init_sp {
        InitialPattern::Empty => empty_with_calibration(&config.grid, &config.calibration),
        InitialPattern::Poisson => PatternFamily::PoissonDisc.generate(
            &config.grid,
            m,
            &config.calibration,
            &config.family_shape,
            seed,
        ),
        InitialPattern::VdPd => {
            PatternFamily::VdPd.generate(&config.grid, m, &config.calibration, &config.family_shape, seed)
        }
        InitialPattern::File(path) => read_sp_for(path, &config.grid),
    }
}

/// Alternating learning at one acceleration starting from `params`.
///
/// With `checkpoint_dir` set, writes `cycle_NNNN.sp` and `cycle_NNNN.vnp`
/// after every cycle.
pub fn learn_for(
    config: &ExperimentConfig,
    params: &VnParams,
    train: &[DataItem],
    af: f64,
    checkpoint_dir: Option<&Path>,
) -> Result<crate::alternating::AlternatingOutcome> {
    let m = budget_for_acceleration(&config.grid, af)?;
    let sp0 = initial_pattern(config, af)?;
    if let Some(dir) = checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    alternate(
        &config.alternating,
        TrainState::new(sp0, params.clone()),
        train,
        m,
        derive_seed(config.seed, STREAM_ALTERNATE, af.to_bits()),
        |state| {
            if let Some(dir) = checkpoint_dir {
                write_sp(&state.sp, dir.join(format!("cycle_{:04}.sp", state.cycle)))?;
                write_params(&state.params, dir.join(format!("cycle_{:04}.vnp", state.cycle)))?;
            }
            Ok(())
        },
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub af: f64,
    pub method: &'static str,
    pub rmse: f64,
}

/// `af,method,rmse`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("af,method,rmse\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.af, r.method, r.rmse).unwrap();
    }
    out
}

/// Runs pre-training, both baselines and the proposed method for every
/// acceleration and writes all artifacts below `config.out_dir`.
///
/// `summary.csv` is rewritten after every acceleration, so an aborted run
/// keeps the rows it finished.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    config.validate()?;
    let out = &config.out_dir;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.txt"), config.to_text())?;
    let (train, test) = experiment_datasets(config)?;
    let pretrained = pretrain_for(config, &train)?;
    write_params(&pretrained, out.join("pretrained.vnp"))?;

    let mut rows = Vec::new();
    for &af in &config.af_list {
        let tag = format!("af{af}");
        let dir = out.join(&tag);
        fs::create_dir_all(&dir)?;

        let vdpd = baseline_pattern(config, af)?;
        write_sp(&vdpd, dir.join("vdpd.sp"))?;
        write_mask_pgm(&vdpd, dir.join("vdpd.pgm"))?;
        rows.push(SummaryRow {
            af,
            method: METHOD_PRETRAINED,
            rmse: evaluate_rmse(&pretrained, &vdpd, &test)?,
        });

        let retrained = retrain_for(config, &pretrained, &vdpd, &train, af)?;
        write_params(&retrained, dir.join("retrained.vnp"))?;
        rows.push(SummaryRow {
            af,
            method: METHOD_RETRAINED,
            rmse: evaluate_rmse(&retrained, &vdpd, &test)?,
        });

        let learned = learn_for(config, &pretrained, &train, af, Some(&dir.join("checkpoints")))?;
        learned.write_trace(dir.join("trace.csv"))?;
        write_sp(&learned.state.sp, dir.join("proposed.sp"))?;
        write_mask_pgm(&learned.state.sp, dir.join("proposed.pgm"))?;
        write_params(&learned.state.params, dir.join("proposed.vnp"))?;
        rows.push(SummaryRow {
            af,
            method: METHOD_PROPOSED,
            rmse: evaluate_rmse(&learned.state.params, &learned.state.sp, &test)?,
        });
        fs::write(out.join("summary.csv"), summary_csv(&rows))?;
    }
    Ok(rows)
}
