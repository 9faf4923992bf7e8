//! Experiment configuration as flat `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; missing keys keep the desk-scale defaults. Unknown or repeated
//! keys are errors. [`ExperimentConfig::to_text`] writes every key, and
//! parsing that text gives back the same configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::alternating::AlternatingConfig;
use crate::bass::PositionalConstraints;
use crate::error::{Error, Result};
use crate::kspace::GridShape;
use crate::optim::AdamConfig;
use crate::patterns::{budget_for_acceleration, CalibrationFrames, CalibrationSpec, FamilyShape, PatternFamily};
use crate::varnet::VnConfig;

/// Starting pattern of the alternating search.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialPattern {
    /// Calibration block only; the search grows it to the budget.
    Empty,
    Poisson,
    VdPd,
    File(PathBuf),
}

impl InitialPattern {
    pub fn to_text(&self) -> String {
        match self {
            InitialPattern::Empty => "empty".into(),
            InitialPattern::Poisson => "poisson".into(),
            InitialPattern::VdPd => "vdpd".into(),
            InitialPattern::File(p) => format!("file:{}", p.display()),
        }
    }
}

impl FromStr for InitialPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empty" => Ok(InitialPattern::Empty),
            "poisson" => Ok(InitialPattern::Poisson),
            "vdpd" => Ok(InitialPattern::VdPd),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(InitialPattern::File(PathBuf::from(p))),
                _ => Err(Error::invalid(format!(
                    "initial pattern must be empty, poisson, vdpd or file:PATH, got `{s}`"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridShape,
    pub train_items: usize,
    pub test_items: usize,
    pub data_seed: u64,
    pub seed: u64,
    pub af_list: Vec<f64>,
    pub calibration: CalibrationSpec,
    pub vn: VnConfig,
    pub pretrain: AdamConfig,
    pub pretrain_families: Vec<PatternFamily>,
    pub pretrain_af: Vec<f64>,
    pub retrain: AdamConfig,
    pub alternating: AlternatingConfig,
    pub family_shape: FamilyShape,
    pub init_sp: InitialPattern,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// 48x48 single-frame images, 4 coils, 40 training and 10 test items.
    pub fn desk() -> Self {
        let grid = GridShape::new(48, 48, 1, 4).expect("valid grid");
        Self {
            grid,
            train_items: 40,
            test_items: 10,
            data_seed: 1,
            seed: 7,
            af_list: vec![4.0, 8.0],
            calibration: CalibrationSpec::default(),
            vn: VnConfig::desk(grid.nt),
            pretrain: AdamConfig::desk_pretrain(),
            pretrain_families: PatternFamily::ALL.to_vec(),
            pretrain_af: vec![4.0, 8.0, 12.0],
            retrain: AdamConfig::desk_pretrain(),
            alternating: AlternatingConfig::desk(),
            family_shape: FamilyShape::default(),
            init_sp: InitialPattern::Empty,
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.vn.validate()?;
        if self.vn.frames != self.grid.nt {
            return Err(Error::invalid(format!(
                "network spans {} frames, grid has {}",
                self.vn.frames, self.grid.nt
            )));
        }
        if self.train_items == 0 || self.test_items == 0 {
            return Err(Error::invalid("train_items and test_items must be positive"));
        }
        self.pretrain.validate()?;
        self.retrain.validate()?;
        self.alternating.validate()?;
        if self.af_list.is_empty() || self.pretrain_af.is_empty() || self.pretrain_families.is_empty() {
            return Err(Error::invalid("af_list, pretrain_af and pretrain_families must be non-empty"));
        }
        let cal = self.calibration.points(&self.grid)?.len();
        for &af in self.af_list.iter().chain(&self.pretrain_af) {
            let m = budget_for_acceleration(&self.grid, af)?;
            if m < cal {
                return Err(Error::invalid(format!(
                    "AF {af} leaves M = {m} points, fewer than the {cal} calibration points"
                )));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut c = Self::desk();
        let mut seen = HashSet::new();
        let mut frames_set = false;
        let mut vn_frames_set = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            if !seen.insert(key.to_string()) {
                return Err(err(format!("key `{key}` given twice")));
            }
            c.set(key, value).map_err(|e| err(e.to_string()))?;
            frames_set |= key == "nt";
            vn_frames_set |= key == "vn_frames";
        }
        if frames_set && !vn_frames_set {
            c.vn.frames = c.grid.nt;
        }
        c.grid = GridShape::new(c.grid.ny, c.grid.nz, c.grid.nt, c.grid.nc)?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?, path)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let a = &mut self.alternating;
        match key {
            "ny" => self.grid.ny = num(v)?,
            "nz" => self.grid.nz = num(v)?,
            "nt" => self.grid.nt = num(v)?,
            "nc" => self.grid.nc = num(v)?,
            "train_items" => self.train_items = num(v)?,
            "test_items" => self.test_items = num(v)?,
            "data_seed" => self.data_seed = num(v)?,
            "seed" => self.seed = num(v)?,
            "af_list" => self.af_list = list(v)?,
            "cal_half_y" => self.calibration.half_width_y = num(v)?,
            "cal_half_z" => self.calibration.half_width_z = num(v)?,
            "cal_frames" => {
                self.calibration.frames = match v {
                    "all" => CalibrationFrames::All,
                    "first" => CalibrationFrames::FirstOnly,
                    _ => return Err(Error::invalid(format!("cal_frames must be all or first, got `{v}`"))),
                }
            }
            "vn_layers" => self.vn.layers = num(v)?,
            "vn_filters" => self.vn.filters = num(v)?,
            "vn_kernel" => self.vn.kernel_size = num(v)?,
            "vn_frames" => self.vn.frames = num(v)?,
            "pretrain_families" => {
                self.pretrain_families = split(v)
                    .map(PatternFamily::from_name)
                    .collect::<Result<_>>()?
            }
            "pretrain_af" => self.pretrain_af = list(v)?,
            "density_exponent" => self.family_shape.density_exponent = num(v)?,
            "poisson_spacing" => self.family_shape.poisson_spacing = num(v)?,
            "vdpd_center_spacing" => self.family_shape.vdpd_center_spacing = num(v)?,
            "bass_k_init" => a.bass.k_init = num(v)?,
            "bass_alpha" => a.bass.alpha = num(v)?,
            "bass_max_iters" => a.bass.max_iters = num(v)?,
            "bass_rho_add" => a.bass.rho_add = num(v)?,
            "bass_rho_remove" => a.bass.rho_remove = num(v)?,
            "bass_delta" => a.bass.delta = num(v)?,
            "bass_stop_at_k1" => a.bass.stop_at_k1 = flag(v)?,
            "bass_max_radius" => {
                a.bass.constraints = PositionalConstraints {
                    max_radius: if v == "none" { None } else { Some(num(v)?) },
                }
            }
            "stall_cycles" => a.stall_cycles = num(v)?,
            "max_cycles" => a.max_cycles = num(v)?,
            "monotone" => {
                a.monotone = flag(v)?;
                a.bass.monotone = a.monotone;
            }
            "init_sp" => self.init_sp = v.parse()?,
            "out" => self.out_dir = PathBuf::from(v),
            _ => {
                for (prefix, adam) in [
                    ("pretrain_", &mut self.pretrain),
                    ("retrain_", &mut self.retrain),
                    ("adam_", &mut a.adam),
                ] {
                    if let Some(field) = key.strip_prefix(prefix) {
                        if set_adam(adam, field, v)? {
                            return Ok(());
                        }
                    }
                }
                return Err(Error::invalid(format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let a = &self.alternating;
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("ny", g.ny.to_string());
        kv("nz", g.nz.to_string());
        kv("nt", g.nt.to_string());
        kv("nc", g.nc.to_string());
        kv("train_items", self.train_items.to_string());
        kv("test_items", self.test_items.to_string());
        kv("data_seed", self.data_seed.to_string());
        kv("seed", self.seed.to_string());
        kv("af_list", join(&self.af_list));
        kv("cal_half_y", self.calibration.half_width_y.to_string());
        kv("cal_half_z", self.calibration.half_width_z.to_string());
        kv(
            "cal_frames",
            match self.calibration.frames {
                CalibrationFrames::All => "all".into(),
                CalibrationFrames::FirstOnly => "first".into(),
            },
        );
        kv("vn_layers", self.vn.layers.to_string());
        kv("vn_filters", self.vn.filters.to_string());
        kv("vn_kernel", self.vn.kernel_size.to_string());
        kv("vn_frames", self.vn.frames.to_string());
        kv(
            "pretrain_families",
            self.pretrain_families.iter().map(|f| f.name()).collect::<Vec<_>>().join(", "),
        );
        kv("pretrain_af", join(&self.pretrain_af));
        kv("density_exponent", self.family_shape.density_exponent.to_string());
        kv("poisson_spacing", self.family_shape.poisson_spacing.to_string());
        kv("vdpd_center_spacing", self.family_shape.vdpd_center_spacing.to_string());
        for (prefix, adam) in [
            ("pretrain_", &self.pretrain),
            ("retrain_", &self.retrain),
            ("adam_", &a.adam),
        ] {
            kv(&format!("{prefix}epochs"), adam.epochs.to_string());
            kv(&format!("{prefix}lr"), adam.lr0.to_string());
            kv(&format!("{prefix}drop_factor"), adam.drop_factor.to_string());
            kv(&format!("{prefix}drop_every"), adam.drop_every_epochs.to_string());
            kv(&format!("{prefix}batch"), adam.batch_size.to_string());
            kv(&format!("{prefix}beta1"), adam.beta1.to_string());
            kv(&format!("{prefix}beta2"), adam.beta2.to_string());
            kv(&format!("{prefix}eps"), adam.eps.to_string());
        }
        kv("bass_k_init", a.bass.k_init.to_string());
        kv("bass_alpha", a.bass.alpha.to_string());
        kv("bass_max_iters", a.bass.max_iters.to_string());
        kv("bass_rho_add", a.bass.rho_add.to_string());
        kv("bass_rho_remove", a.bass.rho_remove.to_string());
        kv("bass_delta", a.bass.delta.to_string());
        kv("bass_stop_at_k1", a.bass.stop_at_k1.to_string());
        kv(
            "bass_max_radius",
            a.bass.constraints.max_radius.map_or("none".into(), |r| r.to_string()),
        );
        kv("stall_cycles", a.stall_cycles.to_string());
        kv("max_cycles", a.max_cycles.to_string());
        kv("monotone", a.monotone.to_string());
        kv("init_sp", self.init_sp.to_text());
        kv("out", self.out_dir.display().to_string());
        s
    }
}

fn set_adam(adam: &mut AdamConfig, field: &str, v: &str) -> Result<bool> {
    match field {
        "epochs" => adam.epochs = num(v)?,
        "lr" => adam.lr0 = num(v)?,
        "drop_factor" => adam.drop_factor = num(v)?,
        "drop_every" => adam.drop_every_epochs = num(v)?,
        "batch" => adam.batch_size = num(v)?,
        "beta1" => adam.beta1 = num(v)?,
        "beta2" => adam.beta2 = num(v)?,
        "eps" => adam.eps = num(v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn num<T: FromStr>(v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("cannot parse `{v}` as a {}", std::any::type_name::<T>())))
}

fn flag(v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("expected true or false, got `{v}`"))),
    }
}

fn split(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn list(v: &str) -> Result<Vec<f64>> {
    split(v).map(num).collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> &'static Path {
        Path::new("test.cfg")
    }

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::desk();
        let text = c.to_text();
        assert_eq!(ExperimentConfig::parse(&text, origin()).unwrap(), c);
        assert_eq!(ExperimentConfig::parse("", origin()).unwrap(), c);
    }

    #[test]
    fn overrides_and_comments() {
        let text = "# small\nny = 32\nnz = 16\nnt = 3\ncal_half_y = 2\ncal_half_z = 2\naf_list = 4, 6\nadam_lr = 0.01\nmonotone = false\ninit_sp = file:a/b.sp\n";
        let c = ExperimentConfig::parse(text, origin()).unwrap();
        assert_eq!((c.grid.ny, c.grid.nz, c.grid.nt), (32, 16, 3));
        assert_eq!(c.vn.frames, 3);
        assert_eq!(c.af_list, [4.0, 6.0]);
        assert_eq!(c.alternating.adam.lr0, 0.01);
        assert!(!c.alternating.monotone && !c.alternating.bass.monotone);
        assert_eq!(c.init_sp, InitialPattern::File("a/b.sp".into()));
        assert_eq!(ExperimentConfig::parse(&c.to_text(), origin()).unwrap(), c);
    }

    #[test]
    fn errors_name_the_line() {
        for (text, line) in [
            ("ny = 8\nbogus = 1\n", 2),
            ("ny = 8\nny = 9\n", 2),
            ("\n\nny 8\n", 3),
            ("vn_kernel = 4\n", 1),
            ("adam_lr = fast\n", 1),
        ] {
            match ExperimentConfig::parse(text, origin()) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                Err(Error::InvalidArgument(_)) if text.starts_with("vn_kernel") => {}
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn infeasible_acceleration_is_rejected() {
        assert!(ExperimentConfig::parse("ny = 8\nnz = 8\naf_list = 4\n", origin()).is_err());
    }
}
