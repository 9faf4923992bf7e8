//! Sampling-pattern search by biased bit changes.
//!
//! Each iteration swaps up to `K` sampled points for `K` unsampled ones. New
//! points are drawn preferentially where the reconstruction error in k-space
//! is large (the epsilon-map); points are dropped where the error is large
//! relative to the data energy (the r-map). A candidate that does not lower
//! the training cost is rejected and `K` shrinks.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kspace::{DataItem, Encoder, KPoint, SamplingPattern};
use crate::varnet::{loss, reconstruct, VnParams};

/// Geometric limits on which cells may be added.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PositionalConstraints {
    /// Largest distance in cells from the k-space center, per frame.
    pub max_radius: Option<f64>,
}

impl PositionalConstraints {
    pub fn allows(&self, p: KPoint, ny: usize, nz: usize) -> bool {
        match self.max_radius {
            None => true,
            Some(r) => {
                let dy = p.ky as f64 - (ny / 2) as f64;
                let dz = p.kz as f64 - (nz / 2) as f64;
                (dy * dy + dz * dz).sqrt() <= r
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BassConfig {
    pub k_init: usize,
    pub alpha: f64,
    pub max_iters: usize,
    pub rho_add: f64,
    pub rho_remove: f64,
    pub delta: f64,
    pub monotone: bool,
    pub stop_at_k1: bool,
    pub constraints: PositionalConstraints,
}

impl BassConfig {
    /// `K_init = 1024`, `alpha = 0.5`, pools of a quarter, run until `K = 1`.
    pub fn paper() -> Self {
        Self {
            k_init: 1024,
            alpha: 0.5,
            max_iters: 100_000,
            rho_add: 0.25,
            rho_remove: 0.25,
            delta: 1e-12,
            monotone: true,
            stop_at_k1: true,
            constraints: PositionalConstraints::default(),
        }
    }

    pub fn desk() -> Self {
        Self {
            k_init: 64,
            max_iters: 200,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rho_ok = |r: f64| r > 0.0 && r <= 1.0;
        let ok = self.k_init >= 1
            && self.alpha > 0.0
            && self.alpha < 1.0
            && self.max_iters >= 1
            && rho_ok(self.rho_add)
            && rho_ok(self.rho_remove)
            && self.delta > 0.0
            && self.delta.is_finite()
            && self.constraints.max_radius.map_or(true, |r| r >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid BASS config {self:?}")))
        }
    }

    /// `floor((K - 1) * alpha) + 1`.
    pub fn shrink(&self, k: usize) -> usize {
        (((k - 1) as f64) * self.alpha).floor() as usize + 1
    }
}

/// Per-cell importance for adding (`eps`) and removing (`r`) points, indexed
/// like [`SamplingPattern::mask`].
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMaps {
    pub eps: Vec<f64>,
    pub r: Vec<f64>,
}

/// `sum_s |[FC x_i]_{k,s}|^2` for every item, computed once per run.
struct DataEnergy {
    per_item: Vec<Vec<f64>>,
}

fn coil_energy(kspace: &[Complex], cells: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for coil in kspace.chunks(cells) {
        for (o, v) in out.iter_mut().zip(coil) {
            *o += v.norm_sqr();
        }
    }
}

type Complex = num_complex::Complex64;

impl DataEnergy {
    fn new(dataset: &[DataItem]) -> Result<Self> {
        let mut per_item = Vec::with_capacity(dataset.len());
        for item in dataset {
            let m = Encoder::new(&item.coils).forward(&item.image, None)?;
            let cells = item.image.data().len();
            let mut e = vec![0.0; cells];
            coil_energy(m.data(), cells, &mut e);
            per_item.push(e);
        }
        Ok(Self { per_item })
    }
}

/// Cost `F(Omega)` and the maps at `Omega`, from one reconstruction per item.
fn evaluate(
    params: &VnParams,
    sp: &SamplingPattern,
    dataset: &[DataItem],
    energy: &DataEnergy,
    delta: f64,
) -> Result<(f64, ErrorMaps)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cells = sp.cells();
    let mut eps = vec![0.0; cells];
    let mut r = vec![0.0; cells];
    let mut err_energy = vec![0.0; cells];
    let mut total = 0.0;
    for (item, m_energy) in dataset.iter().zip(&energy.per_item) {
        let x_hat = reconstruct(params, item, sp)?;
        total += loss(&item.image, &x_hat)?;
        let diff: Vec<Complex> = item
            .image
            .data()
            .iter()
            .zip(x_hat.data())
            .map(|(a, b)| a - b)
            .collect();
        let mut enc = Encoder::new(&item.coils);
        let mut e = vec![Complex::default(); item.coils.shape().kspace_len()];
        enc.forward_into(&diff, None, &mut e)?;
        coil_energy(&e, cells, &mut err_energy);
        for k in 0..cells {
            eps[k] += err_energy[k];
            r[k] += (err_energy[k] + delta) / (m_energy[k] + delta);
        }
    }
    let n_items = dataset.len() as f64;
    let n_coils = dataset[0].coils.shape().nc as f64;
    eps.iter_mut().for_each(|v| *v /= n_items * n_coils);
    r.iter_mut().for_each(|v| *v /= n_items);
    Ok((total / n_items, ErrorMaps { eps, r }))
}

/// Epsilon- and r-maps of the reconstructions at `sp`.
pub fn compute_error_maps(
    params: &VnParams,
    sp: &SamplingPattern,
    dataset: &[DataItem],
    delta: f64,
) -> Result<ErrorMaps> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let energy = DataEnergy::new(dataset)?;
    Ok(evaluate(params, sp, dataset, &energy, delta)?.1)
}

/// Uniform pool of `ceil(rho * n)` candidates (at least `min(k, n)`), then
/// the `k` with the largest importance, best first, lexicographic on ties.
fn biased_pick<R: Rng + ?Sized>(
    sp: &SamplingPattern,
    candidates: Vec<KPoint>,
    k: usize,
    rho: f64,
    importance: &[f64],
    rng: &mut R,
) -> Vec<KPoint> {
    let n = candidates.len();
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let pool_len = ((rho * n as f64).ceil() as usize).max(k.min(n)).min(n);
    let mut pool: Vec<(f64, KPoint)> = sample(rng, n, pool_len)
        .into_iter()
        .map(|i| {
            let p = candidates[i];
            (importance[sp.index_of(p).expect("candidate on grid")], p)
        })
        .collect();
    pool.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    pool.truncate(k);
    pool.into_iter().map(|(_, p)| p).collect()
}

/// Up to `k` unsampled cells, biased towards large `eps`.
pub fn select_add<R: Rng + ?Sized>(
    sp: &SamplingPattern,
    k: usize,
    rho_add: f64,
    eps_map: &[f64],
    pc: &PositionalConstraints,
    rng: &mut R,
) -> Vec<KPoint> {
    let (ny, nz, _) = sp.grid();
    let candidates = sp
        .lex_cells()
        .filter(|&p| !sp.contains(p) && pc.allows(p, ny, nz))
        .collect();
    biased_pick(sp, candidates, k, rho_add, eps_map, rng)
}

/// Up to `k` sampled, non-calibration cells, biased towards large `r`.
pub fn select_remove<R: Rng + ?Sized>(
    sp: &SamplingPattern,
    k: usize,
    rho_remove: f64,
    r_map: &[f64],
    rng: &mut R,
) -> Vec<KPoint> {
    let candidates = sp
        .points()
        .filter(|&p| !sp.is_calibration(p))
        .collect();
    biased_pick(sp, candidates, k, rho_remove, r_map, rng)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BassStep {
    pub iter: usize,
    /// `K` in force when the candidate was formed.
    pub k: usize,
    pub accepted: bool,
    /// Cost of the pattern kept after this iteration.
    pub cost: f64,
    pub candidate_cost: f64,
    pub points: usize,
}

#[derive(Clone, Debug)]
pub struct BassOutcome {
    pub sp: SamplingPattern,
    pub cost: f64,
    /// Cost of the starting pattern.
    pub initial_cost: f64,
    pub final_k: usize,
    pub steps: Vec<BassStep>,
}

impl BassOutcome {
    /// Costs of the accepted patterns in order.
    pub fn accepted_costs(&self) -> Vec<f64> {
        self.steps
            .iter()
            .filter(|s| s.accepted)
            .map(|s| s.candidate_cost)
            .collect()
    }

    /// CSV with header `iter,K,accepted,cost`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,K,accepted,cost\n");
        for s in &self.steps {
            writeln!(out, "{},{},{},{}", s.iter, s.k, s.accepted as u8, s.cost).unwrap();
        }
        out
    }

    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.trace_csv())?;
        Ok(())
    }
}

/// Runs the search with the network fixed, steering `|Omega|` to `budget`.
///
/// While `|Omega| != budget` candidates are accepted unconditionally and only
/// add (or only remove) points. Afterwards adds and removes are balanced.
pub fn bass_run<R: Rng + ?Sized>(
    config: &BassConfig,
    sp_init: &SamplingPattern,
    params: &VnParams,
    dataset: &[DataItem],
    budget: usize,
    rng: &mut R,
) -> Result<BassOutcome> {
    config.validate()?;
    sp_init.check_invariants()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !sp_init.matches(&dataset[0].shape()) {
        return Err(Error::shape("initial pattern grid does not match the data"));
    }
    if budget < sp_init.calibration_len() || budget > sp_init.cells() {
        return Err(Error::invalid(format!(
            "budget {budget} outside [{}, {}]",
            sp_init.calibration_len(),
            sp_init.cells()
        )));
    }
    let energy = DataEnergy::new(dataset)?;
    let mut sp = sp_init.clone();
    let (mut cost, mut maps) = evaluate(params, &sp, dataset, &energy, config.delta)?;
    let initial_cost = cost;
    let mut k = config.k_init;
    let mut steps = Vec::new();

    for iter in 1..=config.max_iters {
        let size = sp.len();
        let growing = size != budget;
        let (mut add, mut remove) = match size.cmp(&budget) {
            Ordering::Less => (
                select_add(&sp, k.min(budget - size), config.rho_add, &maps.eps, &config.constraints, rng),
                Vec::new(),
            ),
            Ordering::Greater => (
                Vec::new(),
                select_remove(&sp, k.min(size - budget), config.rho_remove, &maps.r, rng),
            ),
            Ordering::Equal => {
                let add = select_add(&sp, k, config.rho_add, &maps.eps, &config.constraints, rng);
                let remove = select_remove(&sp, k, config.rho_remove, &maps.r, rng);
                (add, remove)
            }
        };
        if growing {
            if add.is_empty() && remove.is_empty() {
                return Err(Error::invalid(format!(
                    "budget {budget} unreachable: no admissible cells left at {size} points"
                )));
            }
        } else {
            let n = add.len().min(remove.len());
            add.truncate(n);
            remove.truncate(n);
            if n == 0 {
                break;
            }
        }
        let candidate = sp.with_changes(&remove, &add)?;
        let (cand_cost, cand_maps) = evaluate(params, &candidate, dataset, &energy, config.delta)?;
        let accepted = growing || !config.monotone || cand_cost <= cost;
        let k_used = k;
        if accepted {
            sp = candidate;
            cost = cand_cost;
            maps = cand_maps;
        }
        steps.push(BassStep {
            iter,
            k: k_used,
            accepted,
            cost,
            candidate_cost: cand_cost,
            points: sp.len(),
        });
        if !accepted {
            if k == 1 && config.stop_at_k1 {
                break;
            }
            k = config.shrink(k);
        }
    }

    Ok(BassOutcome {
        sp,
        cost,
        initial_cost,
        final_k: k,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspace::{CoilMap, GridShape, ImageStack};
    use crate::varnet::VnConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shrink_sequence() {
        let c = BassConfig::paper();
        let mut k = 1024;
        let mut seen = vec![k];
        while k > 1 {
            k = c.shrink(k);
            seen.push(k);
        }
        assert_eq!(seen, [1024, 512, 256, 128, 64, 32, 16, 8, 4, 2, 1]);
        assert_eq!(c.shrink(1), 1);
        let c = BassConfig { alpha: 0.3, ..c };
        assert_eq!(c.shrink(11), 4);
    }

    fn pattern_4x4(points: &[(usize, usize)], cal: &[(usize, usize)]) -> SamplingPattern {
        SamplingPattern::from_points(
            4,
            4,
            1,
            points.iter().map(|&(y, z)| KPoint::new(y, z, 0)),
            cal.iter().map(|&(y, z)| KPoint::new(y, z, 0)),
        )
        .unwrap()
    }

    #[test]
    fn full_pool_picks_global_maximum_with_lexicographic_ties() {
        let sp = pattern_4x4(&[(0, 0)], &[(2, 2)]);
        let mut eps = vec![0.0; 16];
        eps[5] = 3.0; // (1, 1)
        eps[9] = 3.0; // (2, 1)
        eps[0] = 10.0; // sampled, not eligible
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pick = select_add(&sp, 1, 1.0, &eps, &PositionalConstraints::default(), &mut rng);
        assert_eq!(pick, [KPoint::new(1, 1, 0)]);
    }

    #[test]
    fn remove_never_touches_calibration() {
        let sp = pattern_4x4(&[(0, 0), (3, 3)], &[(2, 2), (1, 2)]);
        let mut r = vec![0.0; 16];
        r[10] = 100.0; // calibration (2, 2)
        r[15] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_remove(&sp, 1, 1.0, &r, &mut rng), [KPoint::new(3, 3, 0)]);
        let all = select_remove(&sp, 10, 1.0, &r, &mut rng);
        assert_eq!(all.len(), 2);
        let cal_only = pattern_4x4(&[], &[(2, 2)]);
        assert!(select_remove(&cal_only, 3, 1.0, &r, &mut rng).is_empty());
    }

    #[test]
    fn add_from_full_pattern_is_empty() {
        let sp = SamplingPattern::full(4, 4, 1, []).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let eps = vec![1.0; 16];
        assert!(select_add(&sp, 4, 0.5, &eps, &PositionalConstraints::default(), &mut rng).is_empty());
    }

    #[test]
    fn radius_limit_filters_additions() {
        let sp = pattern_4x4(&[], &[]);
        let pc = PositionalConstraints {
            max_radius: Some(1.0),
        };
        let eps = vec![1.0; 16];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pick = select_add(&sp, 16, 1.0, &eps, &pc, &mut rng);
        assert_eq!(pick.len(), 5);
        assert!(pick.iter().all(|p| pc.allows(*p, 4, 4)));
    }

    fn one_item() -> Vec<DataItem> {
        let g = GridShape::new(1, 3, 1, 1).unwrap();
        let image = ImageStack::from_vec(
            g,
            vec![Complex::new(1.0, 0.0), Complex::new(0.0, 2.0), Complex::new(-1.0, 1.0)],
        )
        .unwrap();
        vec![DataItem::new(image, CoilMap::identity(g)).unwrap()]
    }

    #[test]
    fn perfect_reconstruction_maps() {
        let data = one_item();
        let sp = SamplingPattern::full(1, 3, 1, []).unwrap();
        let params = VnParams::zeros(VnConfig::new(1, 1, 1, 1).unwrap());
        let maps = compute_error_maps(&params, &sp, &data, 1e-12).unwrap();
        assert!(maps.eps.iter().all(|&v| v < 1e-28));
        assert!(maps.r.iter().all(|&v| v <= 1.0 + 1e-12));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let sp = SamplingPattern::full(1, 3, 1, []).unwrap();
        let params = VnParams::zeros(VnConfig::new(1, 1, 1, 1).unwrap());
        assert!(matches!(
            compute_error_maps(&params, &sp, &[], 1e-12),
            Err(Error::EmptyDataset)
        ));
    }
}
