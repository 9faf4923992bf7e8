//! Alternating learning of the sampling pattern and the network.
//!
//! Every cycle first searches the pattern with the network fixed, then
//! trains the network on the new pattern. In monotone mode both phases only
//! keep results that do not increase the training cost.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bass::{bass_run, BassConfig};
use crate::error::{Error, Result};
use crate::kspace::{DataItem, GridShape, SamplingPattern};
use crate::optim::{guarded_train, guarded_train_from, train_epochs, train_with_patterns, AdamConfig, Guarded};
use crate::patterns::{budget_for_acceleration, CalibrationSpec, FamilyShape, PatternFamily};
use crate::seed::derive_seed;
use crate::varnet::{VnConfig, VnParams};

const STREAM_BASS: u64 = 1;
const STREAM_ADAM: u64 = 2;
const STREAM_PRETRAIN_SP: u64 = 3;

/// Relative decrease below which a cycle counts as a stall.
pub const STALL_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlternatingConfig {
    pub bass: BassConfig,
    pub adam: AdamConfig,
    pub stall_cycles: usize,
    pub max_cycles: usize,
    /// Overrides `bass.monotone`; also switches the training guard.
    pub monotone: bool,
}

impl AlternatingConfig {
    pub fn paper() -> Self {
        Self {
            bass: BassConfig::paper(),
            adam: AdamConfig::paper(),
            stall_cycles: 5,
            max_cycles: 1000,
            monotone: true,
        }
    }

    pub fn desk() -> Self {
        Self {
            bass: BassConfig::desk(),
            adam: AdamConfig::desk(),
            stall_cycles: 5,
            max_cycles: 40,
            monotone: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bass.validate()?;
        self.adam.validate()?;
        if self.stall_cycles == 0 || self.max_cycles == 0 {
            return Err(Error::invalid("stall_cycles and max_cycles must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Bass,
    Adam,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Bass => "bass",
            Phase::Adam => "adam",
        }
    }
}

/// Cost after a phase finished.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostRecord {
    pub cycle: usize,
    pub phase: Phase,
    pub cost: f64,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    /// Completed cycles.
    pub cycle: usize,
    pub sp: SamplingPattern,
    pub params: VnParams,
    pub cost_history: Vec<CostRecord>,
    pub stall_count: usize,
}

impl TrainState {
    pub fn new(sp: SamplingPattern, params: VnParams) -> Self {
        Self {
            cycle: 0,
            sp,
            params,
            cost_history: Vec::new(),
            stall_count: 0,
        }
    }

    /// Cost at the end of each completed cycle.
    pub fn cycle_costs(&self) -> Vec<f64> {
        self.cost_history
            .iter()
            .filter(|r| r.phase == Phase::Adam)
            .map(|r| r.cost)
            .collect()
    }
}

/// One row per search iteration and one per training run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub cycle: usize,
    pub phase: Phase,
    pub accepted: bool,
    /// Cost of the state kept after this step.
    pub cost: f64,
    /// `N / |Omega|` of the kept pattern.
    pub af: f64,
    pub m_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Stalled,
    MaxCycles,
}

#[derive(Clone, Debug)]
pub struct AlternatingOutcome {
    pub state: TrainState,
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
}

impl AlternatingOutcome {
    pub fn trace_csv(&self) -> String {
        trace_csv(&self.trace)
    }

    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.trace_csv())?;
        Ok(())
    }

    /// Smallest cost anywhere along the trace.
    pub fn trace_min(&self) -> f64 {
        self.trace.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min)
    }

    pub fn final_cost(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.cost)
    }
}

/// `cycle,phase,accepted,cost,af,m_points`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("cycle,phase,accepted,cost,af,m_points\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.cycle,
            r.phase.name(),
            r.accepted as u8,
            r.cost,
            r.af,
            r.m_points
        )
        .unwrap();
    }
    out
}

/// Runs cycles until the cost stalls for `stall_cycles` cycles or
/// `max_cycles` cycles have run. `observer` sees the state after every cycle.
pub fn alternate<F>(
    config: &AlternatingConfig,
    state0: TrainState,
    dataset: &[DataItem],
    budget: usize,
    seed: u64,
    mut observer: F,
) -> Result<AlternatingOutcome>
where
    F: FnMut(&TrainState) -> Result<()>,
{
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let bass_config = BassConfig {
        monotone: config.monotone,
        ..config.bass
    };
    let cells = state0.sp.cells() as f64;
    let mut state = state0;
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;

    let stop = loop {
        let cycle = state.cycle + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_BASS, cycle as u64));
        let search = bass_run(&bass_config, &state.sp, &state.params, dataset, budget, &mut rng)?;
        for s in &search.steps {
            trace.push(TraceRow {
                cycle,
                phase: Phase::Bass,
                accepted: s.accepted,
                cost: s.cost,
                af: cells / s.points as f64,
                m_points: s.points,
            });
        }
        state.sp = search.sp;
        state.cost_history.push(CostRecord {
            cycle,
            phase: Phase::Bass,
            cost: search.cost,
        });

        let adam_seed = derive_seed(seed, STREAM_ADAM, cycle as u64);
        let trained = if config.monotone {
            guarded_train_from(&config.adam, &state.params, search.cost, &state.sp, dataset, adam_seed)?
        } else {
            match train_epochs(&config.adam, &state.params, &state.sp, dataset, adam_seed) {
                Ok((params, cost)) => Guarded {
                    params,
                    cost,
                    accepted: true,
                },
                Err(Error::NonFinite { .. }) => Guarded {
                    params: state.params.clone(),
                    cost: search.cost,
                    accepted: false,
                },
                Err(e) => return Err(e),
            }
        };
        state.params = trained.params;
        trace.push(TraceRow {
            cycle,
            phase: Phase::Adam,
            accepted: trained.accepted,
            cost: trained.cost,
            af: cells / state.sp.len() as f64,
            m_points: state.sp.len(),
        });
        state.cost_history.push(CostRecord {
            cycle,
            phase: Phase::Adam,
            cost: trained.cost,
        });
        state.cycle = cycle;

        if trained.cost < best * (1.0 - STALL_TOLERANCE) {
            best = trained.cost;
            state.stall_count = 0;
        } else {
            state.stall_count += 1;
        }
        observer(&state)?;
        if state.stall_count >= config.stall_cycles {
            break StopReason::Stalled;
        }
        if state.cycle >= config.max_cycles {
            break StopReason::MaxCycles;
        }
    };

    Ok(AlternatingOutcome { state, trace, stop })
}

/// Which random patterns pre-training draws from.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainPatterns {
    pub families: Vec<PatternFamily>,
    pub accelerations: Vec<f64>,
    pub calibration: CalibrationSpec,
    pub shape: FamilyShape,
}

/// Trains freshly initialized parameters with a new random pattern for every
/// batch: family and acceleration drawn uniformly from the lists.
pub fn pretrain(
    vn_config: &VnConfig,
    adam_config: &AdamConfig,
    dataset: &[DataItem],
    patterns: &PretrainPatterns,
    seed: u64,
) -> Result<VnParams> {
    if patterns.families.is_empty() || patterns.accelerations.is_empty() {
        return Err(Error::invalid("pre-training needs at least one family and acceleration"));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let grid: GridShape = dataset[0].shape();
    let budgets = patterns
        .accelerations
        .iter()
        .map(|&af| budget_for_acceleration(&grid, af))
        .collect::<Result<Vec<_>>>()?;
    let init = VnParams::init(*vn_config, seed)?;
    train_with_patterns(adam_config, &init, dataset, seed, |batch| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_PRETRAIN_SP, batch as u64));
        let family = patterns.families[rng.gen_range(0..patterns.families.len())];
        let m = budgets[rng.gen_range(0..budgets.len())];
        let sp = family.generate(&grid, m, &patterns.calibration, &patterns.shape, rng.gen())?;
        Ok(Cow::Owned(sp))
    })
}

/// Retrains on one fixed pattern starting from `params_init`; keeps the
/// initial parameters if training does not lower the cost.
pub fn retrain_fixed_sp(
    adam_config: &AdamConfig,
    params_init: &VnParams,
    sp: &SamplingPattern,
    dataset: &[DataItem],
    seed: u64,
) -> Result<Guarded> {
    guarded_train(adam_config, params_init, sp, dataset, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_csv_layout() {
        let rows = [
            TraceRow {
                cycle: 1,
                phase: Phase::Bass,
                accepted: true,
                cost: 0.5,
                af: 4.0,
                m_points: 16,
            },
            TraceRow {
                cycle: 1,
                phase: Phase::Adam,
                accepted: false,
                cost: 0.25,
                af: 4.0,
                m_points: 16,
            },
        ];
        assert_eq!(
            trace_csv(&rows),
            "cycle,phase,accepted,cost,af,m_points\n1,bass,1,0.5,4,16\n1,adam,0,0.25,4,16\n"
        );
    }

    #[test]
    fn config_validation() {
        assert!(AlternatingConfig::desk().validate().is_ok());
        let bad = AlternatingConfig {
            stall_cycles: 0,
            ..AlternatingConfig::desk()
        };
        assert!(bad.validate().is_err());
    }
}
