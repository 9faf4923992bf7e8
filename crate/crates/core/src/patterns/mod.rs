//! Baseline sampling-pattern generators.
//!
//! Every generator returns exactly `M` points, always includes the
//! calibration region, and is a deterministic function of its arguments and
//! seed. Poisson-disc style generators relax their minimum distance by a
//! factor of `0.9` whenever a full pass over the remaining candidates fails to
//! reach `M`, and report the final distance they settled on.

mod io;

pub use io::{parse_sp, read_sp, read_sp_for, sp_to_string, write_sp};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kspace::{GridShape, KPoint, SamplingPattern};

/// Shrink factor applied to the minimum distance on exhaustion.
pub const RELAXATION: f64 = 0.9;

/// Which frames carry the calibration block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CalibrationFrames {
    #[default]
    All,
    FirstOnly,
}

/// Fully sampled central block of `(2 hw_y + 1) x (2 hw_z + 1)` cells around
/// the DC bin `(ny / 2, nz / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CalibrationSpec {
    pub half_width_y: usize,
    pub half_width_z: usize,
    pub frames: CalibrationFrames,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            half_width_y: 4,
            half_width_z: 4,
            frames: CalibrationFrames::All,
        }
    }
}

impl CalibrationSpec {
    pub fn new(half_width_y: usize, half_width_z: usize, frames: CalibrationFrames) -> Self {
        Self {
            half_width_y,
            half_width_z,
            frames,
        }
    }

    pub fn points(&self, grid: &GridShape) -> Result<Vec<KPoint>> {
        let (cy, cz) = (grid.ny / 2, grid.nz / 2);
        if self.half_width_y > cy
            || cy + self.half_width_y >= grid.ny
            || self.half_width_z > cz
            || cz + self.half_width_z >= grid.nz
        {
            return Err(Error::invalid(format!(
                "calibration half-widths ({}, {}) exceed {}x{} grid",
                self.half_width_y, self.half_width_z, grid.ny, grid.nz
            )));
        }
        let frames = match self.frames {
            CalibrationFrames::All => grid.nt,
            CalibrationFrames::FirstOnly => 1,
        };
        let mut pts = Vec::new();
        for ky in cy - self.half_width_y..=cy + self.half_width_y {
            for kz in cz - self.half_width_z..=cz + self.half_width_z {
                for t in 0..frames {
                    pts.push(KPoint::new(ky, kz, t));
                }
            }
        }
        Ok(pts)
    }
}

/// Sampling density over the `(ky, kz)` plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensityKind {
    Uniform,
    /// `(1 + r)^-exponent`, with `r` the radius normalized by the half-extent
    /// of each axis (so `r = 1` on the inscribed ellipse).
    PolynomialDecay,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityProfile {
    pub kind: DensityKind,
    pub exponent: f64,
    pub center: (usize, usize),
}

impl DensityProfile {
    pub fn uniform(grid: &GridShape) -> Self {
        Self {
            kind: DensityKind::Uniform,
            exponent: 0.0,
            center: (grid.ny / 2, grid.nz / 2),
        }
    }

    pub fn polynomial(grid: &GridShape, exponent: f64) -> Self {
        Self {
            kind: DensityKind::PolynomialDecay,
            exponent,
            center: (grid.ny / 2, grid.nz / 2),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.exponent >= 0.0 && self.exponent.is_finite()) {
            return Err(Error::invalid(format!(
                "density exponent must be finite and >= 0, got {}",
                self.exponent
            )));
        }
        Ok(())
    }

    /// Unnormalized, strictly positive weight of a grid cell.
    pub fn weight(&self, grid: &GridShape, ky: usize, kz: usize) -> f64 {
        match self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::PolynomialDecay => {
                let dy = (ky as f64 - self.center.0 as f64) / (grid.ny as f64 / 2.0);
                let dz = (kz as f64 - self.center.1 as f64) / (grid.nz as f64 / 2.0);
                (1.0 + (dy * dy + dz * dz).sqrt()).powf(-self.exponent)
            }
        }
    }

    /// Weights scaled so their sum over the non-calibration cells equals
    /// `M - |calibration|`. Returned in `(t, ky, kz)` layout, zero on the
    /// calibration region.
    pub fn expected_density(
        &self,
        grid: &GridShape,
        m: usize,
        cal: &CalibrationSpec,
    ) -> Result<Vec<f64>> {
        self.validate()?;
        let base = empty_with_calibration(grid, cal)?;
        check_budget(&base, m)?;
        let mut w: Vec<f64> = (0..base.cells())
            .map(|i| {
                if base.calibration_mask()[i] {
                    0.0
                } else {
                    let p = base.point_at(i);
                    self.weight(grid, p.ky, p.kz)
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        let target = (m - base.calibration_len()) as f64;
        if total > 0.0 {
            w.iter_mut().for_each(|v| *v *= target / total);
        }
        Ok(w)
    }
}

/// A Poisson-disc style pattern plus the distance it finally used.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonOutcome {
    pub pattern: SamplingPattern,
    /// Final (possibly relaxed) minimum distance; for VD+PD this is the
    /// distance at the k-space center.
    pub min_dist: f64,
    pub relaxations: usize,
}

/// Only the calibration block.
pub fn empty_with_calibration(grid: &GridShape, cal: &CalibrationSpec) -> Result<SamplingPattern> {
    SamplingPattern::with_calibration(grid.ny, grid.nz, grid.nt, cal.points(grid)?)
}

fn check_budget(base: &SamplingPattern, m: usize) -> Result<()> {
    if m < base.calibration_len() || m > base.cells() {
        return Err(Error::invalid(format!(
            "budget M = {m} outside [{}, {}]",
            base.calibration_len(),
            base.cells()
        )));
    }
    Ok(())
}

/// Non-calibration cells in lexicographic order.
fn free_cells(base: &SamplingPattern) -> Vec<KPoint> {
    base.lex_cells().filter(|&p| !base.contains(p)).collect()
}

fn fill(base: SamplingPattern, order: impl IntoIterator<Item = KPoint>, m: usize) -> SamplingPattern {
    let mut sp = base;
    for p in order {
        if sp.len() == m {
            break;
        }
        sp.insert(p).expect("candidates lie on the grid");
    }
    sp
}

/// Free cells in a uniformly random order.
fn uniform_order(base: &SamplingPattern, rng: &mut ChaCha8Rng) -> Vec<KPoint> {
    let mut cells = free_cells(base);
    cells.shuffle(rng);
    cells
}

/// Free cells ordered by Efraimidis–Spirakis keys `ln(u) / w`, which makes
/// every prefix an exact weighted sample without replacement.
fn weighted_order(
    base: &SamplingPattern,
    grid: &GridShape,
    profile: &DensityProfile,
    rng: &mut ChaCha8Rng,
) -> Vec<KPoint> {
    let mut keyed: Vec<(f64, KPoint)> = free_cells(base)
        .into_iter()
        .map(|p| {
            let u: f64 = rng.gen();
            ((1.0 - u).ln() / profile.weight(grid, p.ky, p.kz), p)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, p)| p).collect()
}

/// Calibration plus `M - |calibration|` cells drawn uniformly without
/// replacement.
pub fn generate_uniform(
    grid: &GridShape,
    m: usize,
    cal: &CalibrationSpec,
    seed: u64,
) -> Result<SamplingPattern> {
    let base = empty_with_calibration(grid, cal)?;
    check_budget(&base, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = uniform_order(&base, &mut rng);
    Ok(fill(base, order, m))
}

/// Exact-`M` weighted sampling without replacement from `profile`.
pub fn generate_variable_density(
    grid: &GridShape,
    m: usize,
    profile: &DensityProfile,
    cal: &CalibrationSpec,
    seed: u64,
) -> Result<SamplingPattern> {
    profile.validate()?;
    let base = empty_with_calibration(grid, cal)?;
    check_budget(&base, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = weighted_order(&base, grid, profile, &mut rng);
    Ok(fill(base, order, m))
}

/// Dart throwing over `order`: a candidate is accepted when its `(ky, kz)`
/// distance to every accepted non-calibration point of the same frame is at
/// least `scale * radius(candidate)`. Exhaustion shrinks `scale`.
fn dart_throw(
    base: SamplingPattern,
    order: Vec<KPoint>,
    m: usize,
    radius: impl Fn(KPoint) -> f64,
) -> (SamplingPattern, f64, usize) {
    let (ny, nz, _) = base.grid();
    let mut accepted = vec![false; base.cells()];
    let mut sp = base;
    let mut scale = 1.0;
    let mut relaxations = 0;
    let mut pending = order;
    while sp.len() < m {
        let mut rejected = Vec::new();
        for p in pending {
            if sp.len() == m {
                break;
            }
            let d = scale * radius(p);
            if far_enough(&accepted, ny, nz, p, d) {
                accepted[sp.index_of(p).expect("on grid")] = true;
                sp.insert(p).expect("on grid");
            } else {
                rejected.push(p);
            }
        }
        if sp.len() < m {
            scale *= RELAXATION;
            relaxations += 1;
        }
        pending = rejected;
    }
    (sp, scale, relaxations)
}

fn far_enough(accepted: &[bool], ny: usize, nz: usize, p: KPoint, d: f64) -> bool {
    if d <= 1.0 {
        // distinct grid points are at least one cell apart
        return true;
    }
    let reach = d.ceil() as isize;
    let d2 = d * d;
    let frame = &accepted[p.t * ny * nz..(p.t + 1) * ny * nz];
    for dy in -reach..=reach {
        let y = p.ky as isize + dy;
        if y < 0 || y >= ny as isize {
            continue;
        }
        for dz in -reach..=reach {
            let z = p.kz as isize + dz;
            if z < 0 || z >= nz as isize {
                continue;
            }
            if ((dy * dy + dz * dz) as f64) < d2 && frame[y as usize * nz + z as usize] {
                return false;
            }
        }
    }
    true
}

/// Poisson-disc dart throwing on the discrete grid, candidates in uniform
/// random order.
pub fn generate_poisson_disc(
    grid: &GridShape,
    m: usize,
    min_dist: f64,
    cal: &CalibrationSpec,
    seed: u64,
) -> Result<PoissonOutcome> {
    if !(min_dist >= 0.0 && min_dist.is_finite()) {
        return Err(Error::invalid(format!("min_dist must be >= 0, got {min_dist}")));
    }
    let base = empty_with_calibration(grid, cal)?;
    check_budget(&base, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = uniform_order(&base, &mut rng);
    let (pattern, scale, relaxations) = dart_throw(base, order, m, |_| min_dist);
    Ok(PoissonOutcome {
        pattern,
        min_dist: min_dist * scale,
        relaxations,
    })
}

/// Default radius scale for VD+PD: a quarter of the shorter grid side. Slower
/// growth lets the edge cells, which have fewer neighbours, end up denser
/// than the ring inside them.
pub fn default_radius_scale(grid: &GridShape) -> f64 {
    grid.ny.min(grid.nz) as f64 / 4.0
}

/// Local minimum distance of the VD+PD generator at `(ky, kz)`.
pub fn vdpd_radius(grid: &GridShape, min_dist_at_center: f64, ky: usize, kz: usize) -> f64 {
    let dy = ky as f64 - (grid.ny / 2) as f64;
    let dz = kz as f64 - (grid.nz / 2) as f64;
    min_dist_at_center * (1.0 + (dy * dy + dz * dz).sqrt() / default_radius_scale(grid))
}

/// Combined variable-density / Poisson-disc pattern: candidates are proposed
/// in weighted-random order from `profile` and accepted with a minimum
/// distance that grows linearly with distance from the k-space center.
pub fn generate_vd_pd(
    grid: &GridShape,
    m: usize,
    profile: &DensityProfile,
    min_dist_at_center: f64,
    cal: &CalibrationSpec,
    seed: u64,
) -> Result<PoissonOutcome> {
    profile.validate()?;
    if !(min_dist_at_center >= 0.0 && min_dist_at_center.is_finite()) {
        return Err(Error::invalid(format!(
            "min_dist_at_center must be >= 0, got {min_dist_at_center}"
        )));
    }
    let base = empty_with_calibration(grid, cal)?;
    check_budget(&base, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = weighted_order(&base, grid, profile, &mut rng);
    let (pattern, scale, relaxations) = dart_throw(base, order, m, |p| {
        vdpd_radius(grid, min_dist_at_center, p.ky, p.kz)
    });
    Ok(PoissonOutcome {
        pattern,
        min_dist: min_dist_at_center * scale,
        relaxations,
    })
}

/// `M = round(N / AF)`.
pub fn budget_for_acceleration(grid: &GridShape, af: f64) -> Result<usize> {
    if !(af >= 1.0 && af.is_finite()) {
        return Err(Error::invalid(format!("acceleration must be >= 1, got {af}")));
    }
    Ok((grid.cells() as f64 / af).round() as usize)
}

/// The four families of baseline patterns, used for pre-training and as
/// initial patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PatternFamily {
    Uniform,
    VariableDensity,
    PoissonDisc,
    VdPd,
}

impl PatternFamily {
    pub const ALL: [PatternFamily; 4] = [
        PatternFamily::Uniform,
        PatternFamily::VariableDensity,
        PatternFamily::PoissonDisc,
        PatternFamily::VdPd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PatternFamily::Uniform => "uniform",
            PatternFamily::VariableDensity => "vd",
            PatternFamily::PoissonDisc => "poisson",
            PatternFamily::VdPd => "vdpd",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown pattern family `{name}`")))
    }

    /// Pattern of this family with `m` points, using `shape` for the free
    /// parameters.
    pub fn generate(
        &self,
        grid: &GridShape,
        m: usize,
        cal: &CalibrationSpec,
        shape: &FamilyShape,
        seed: u64,
    ) -> Result<SamplingPattern> {
        // mean spacing between samples in each frame
        let spacing = (grid.ny as f64 * grid.nz as f64 * grid.nt as f64 / m.max(1) as f64).sqrt();
        match self {
            PatternFamily::Uniform => generate_uniform(grid, m, cal, seed),
            PatternFamily::VariableDensity => generate_variable_density(
                grid,
                m,
                &DensityProfile::polynomial(grid, shape.density_exponent),
                cal,
                seed,
            ),
            PatternFamily::PoissonDisc => {
                generate_poisson_disc(grid, m, shape.poisson_spacing * spacing, cal, seed)
                    .map(|o| o.pattern)
            }
            PatternFamily::VdPd => generate_vd_pd(
                grid,
                m,
                &DensityProfile::polynomial(grid, shape.density_exponent),
                shape.vdpd_center_spacing * spacing,
                cal,
                seed,
            )
            .map(|o| o.pattern),
        }
    }
}

/// Free parameters of the pattern families. Distances are fractions of the
/// mean sample spacing `sqrt(N / M)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FamilyShape {
    pub density_exponent: f64,
    pub poisson_spacing: f64,
    pub vdpd_center_spacing: f64,
}

impl Default for FamilyShape {
    fn default() -> Self {
        Self {
            density_exponent: 3.0,
            poisson_spacing: 0.7,
            vdpd_center_spacing: 0.4,
        }
    }
}
