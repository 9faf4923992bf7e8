use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use altlearn::harness::{
    self, evaluate_rmse, experiment_datasets, read_dataset, read_image, run_experiment, summary_csv,
    write_dataset, write_mask_pgm, ExperimentConfig, InitialPattern,
};
use altlearn::kspace::DataItem;
use altlearn::patterns::{budget_for_acceleration, empty_with_calibration, read_sp_for, write_sp, PatternFamily};
use altlearn::seed::derive_seed;
use altlearn::varnet::{read_params, write_params};

#[derive(Parser)]
#[command(name = "altlearn", version, about = "Learn MRI sampling patterns together with a reconstruction network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config file (`key = value` lines); desk defaults if absent
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the experiment seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct DataSource {
    /// Directory written by `gen-data`; phantoms are generated from the
    /// config when absent
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Uniform,
    Vd,
    Poisson,
    Vdpd,
    Empty,
}

#[derive(Subcommand)]
enum Command {
    /// Write training and test phantoms to OUT/train and OUT/test
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one baseline sampling pattern (and a PGM preview next to it)
    GenSp {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        af: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-train a network on random patterns of every family
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataSource,
        #[arg(long)]
        out: PathBuf,
    },
    /// Alternate pattern search and training at one acceleration
    Learn {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataSource,
        #[arg(long)]
        af: f64,
        /// Starting network; pre-trained on the spot when absent
        #[arg(long)]
        params: Option<PathBuf>,
        /// empty, poisson, vdpd or file:PATH
        #[arg(long)]
        init_sp: Option<String>,
        #[arg(long, overrides_with = "no_monotone")]
        monotone: bool,
        #[arg(long, overrides_with = "monotone")]
        no_monotone: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrain a network on one fixed pattern
    Retrain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataSource,
        #[arg(long)]
        params: PathBuf,
        /// Pattern to train on; the VD+PD baseline at --af when absent
        #[arg(long)]
        sp: Option<PathBuf>,
        #[arg(long)]
        af: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// RMSE between two image directories, or of a network and pattern on
    /// the test set
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataSource,
        #[arg(long = "ref", requires = "recon")]
        reference: Option<PathBuf>,
        #[arg(long, requires = "reference")]
        recon: Option<PathBuf>,
        #[arg(long, conflicts_with = "reference", requires = "sp")]
        params: Option<PathBuf>,
        #[arg(long, conflicts_with = "reference", requires = "params")]
        sp: Option<PathBuf>,
    },
    /// Full comparison: baselines and learned patterns for every acceleration
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Replaces the config's acceleration list
        #[arg(long, value_delimiter = ',')]
        af: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::read(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig::desk(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn check_af(config: &ExperimentConfig, af: f64) -> Result<usize> {
    let m = budget_for_acceleration(&config.grid, af)?;
    let cal = config.calibration.points(&config.grid)?.len();
    if m < cal {
        bail!("AF {af} leaves {m} points, fewer than the {cal} calibration points");
    }
    Ok(m)
}

fn datasets(config: &ExperimentConfig, source: &DataSource) -> Result<(Vec<DataItem>, Vec<DataItem>)> {
    match &source.data {
        Some(dir) => {
            let train = read_dataset(dir.join("train"))
                .with_context(|| format!("reading {}", dir.join("train").display()))?;
            let test = read_dataset(dir.join("test"))
                .with_context(|| format!("reading {}", dir.join("test").display()))?;
            if train[0].shape() != config.grid {
                bail!("data in {} does not match the config grid", dir.display());
            }
            Ok((train, test))
        }
        None => Ok(experiment_datasets(config)?),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common, out } => {
            let mut config = load_config(&common)?;
            if let Some(seed) = common.seed {
                config.data_seed = seed;
            }
            config.validate()?;
            let (train, test) = experiment_datasets(&config)?;
            write_dataset(&train, out.join("train"))?;
            write_dataset(&test, out.join("test"))?;
            println!("wrote {} training and {} test items to {}", train.len(), test.len(), out.display());
        }
        Command::GenSp { common, kind, af, out } => {
            let config = load_config(&common)?;
            let m = check_af(&config, af)?;
            let g = &config.grid;
            let seed = derive_seed(config.seed, 0, af.to_bits());
            let sp = match kind {
                Kind::Empty => empty_with_calibration(g, &config.calibration)?,
                Kind::Uniform => PatternFamily::Uniform.generate(g, m, &config.calibration, &config.family_shape, seed)?,
                Kind::Vd => PatternFamily::VariableDensity.generate(g, m, &config.calibration, &config.family_shape, seed)?,
                Kind::Poisson => PatternFamily::PoissonDisc.generate(g, m, &config.calibration, &config.family_shape, seed)?,
                Kind::Vdpd => PatternFamily::VdPd.generate(g, m, &config.calibration, &config.family_shape, seed)?,
            };
            ensure_parent(&out)?;
            write_sp(&sp, &out)?;
            write_mask_pgm(&sp, out.with_extension("pgm"))?;
            println!("wrote {} points to {}", sp.len(), out.display());
        }
        Command::Pretrain { common, data, out } => {
            let config = load_config(&common)?;
            let (train, _) = datasets(&config, &data)?;
            let params = harness::pretrain_for(&config, &train)?;
            ensure_parent(&out)?;
            write_params(&params, &out)?;
            println!("wrote pre-trained parameters to {}", out.display());
        }
        Command::Learn {
            common,
            data,
            af,
            params,
            init_sp,
            monotone,
            no_monotone,
            out,
        } => {
            let mut config = load_config(&common)?;
            if let Some(init) = init_sp {
                config.init_sp = init.parse::<InitialPattern>()?;
            }
            if monotone || no_monotone {
                config.alternating.monotone = monotone;
                config.alternating.bass.monotone = monotone;
            }
            check_af(&config, af)?;
            if let InitialPattern::File(path) = &config.init_sp {
                read_sp_for(path, &config.grid)?;
            }
            let start = params.as_ref().map(read_params).transpose()?;
            let (train, test) = datasets(&config, &data)?;
            let start = match start {
                Some(p) => p,
                None => harness::pretrain_for(&config, &train)?,
            };
            fs::create_dir_all(&out)?;
            let outcome = harness::learn_for(&config, &start, &train, af, Some(&out.join("checkpoints")))?;
            outcome.write_trace(out.join("trace.csv"))?;
            write_sp(&outcome.state.sp, out.join("learned.sp"))?;
            write_mask_pgm(&outcome.state.sp, out.join("learned.pgm"))?;
            write_params(&outcome.state.params, out.join("learned.vnp"))?;
            let rmse = evaluate_rmse(&outcome.state.params, &outcome.state.sp, &test)?;
            println!(
                "{} cycles ({:?}), training cost {}, test RMSE {rmse}",
                outcome.state.cycle,
                outcome.stop,
                outcome.final_cost()
            );
        }
        Command::Retrain {
            common,
            data,
            params,
            sp,
            af,
            out,
        } => {
            let config = load_config(&common)?;
            let start = read_params(&params)?;
            let (pattern, tag) = match (sp, af) {
                (Some(path), _) => (read_sp_for(&path, &config.grid)?, 0.0),
                (None, Some(af)) => {
                    check_af(&config, af)?;
                    (harness::baseline_pattern(&config, af)?, af)
                }
                (None, None) => bail!("retrain needs --sp or --af"),
            };
            let (train, test) = datasets(&config, &data)?;
            let trained = harness::retrain_for(&config, &start, &pattern, &train, tag)?;
            ensure_parent(&out)?;
            write_params(&trained, &out)?;
            println!("test RMSE {}", evaluate_rmse(&trained, &pattern, &test)?);
        }
        Command::Eval {
            common,
            data,
            reference,
            recon,
            params,
            sp,
        } => {
            let value = match (reference, recon, params, sp) {
                (Some(r), Some(x), _, _) => {
                    let refs = harness::image_files(&r)?;
                    let recons = harness::image_files(&x)?;
                    let load = |files: Vec<PathBuf>| -> Result<Vec<_>> {
                        files.iter().map(|f| Ok(read_image(f)?)).collect()
                    };
                    harness::rmse(&load(refs)?, &load(recons)?)?
                }
                (_, _, Some(p), Some(s)) => {
                    let config = load_config(&common)?;
                    let params = read_params(&p)?;
                    let pattern = read_sp_for(&s, &config.grid)?;
                    let (_, test) = datasets(&config, &data)?;
                    evaluate_rmse(&params, &pattern, &test)?
                }
                _ => bail!("eval needs --ref and --recon, or --params and --sp"),
            };
            println!("{value}");
        }
        Command::Experiment { common, af, out } => {
            let mut config = load_config(&common)?;
            if !af.is_empty() {
                config.af_list = af;
            }
            if let Some(out) = out {
                config.out_dir = out;
            }
            config.validate()?;
            let rows = run_experiment(&config)?;
            print!("{}", summary_csv(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
