//! Command-line front end: `sample`, `train`, `optimize` and `verify`.
//! Exit codes are 0 on success, 2 for configuration or data errors and 3
//! for numerical failures. Errors are reported on stderr as one
//! `error kind=<kind> exit=<code> message="<text>"` line.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::qoi::{mc_moments, read_dataset, write_dataset, Dataset, QoiModel};
use crate::rdo::{pareto_sweep, ParetoCase, RdoResult, RdoSetup};
use crate::regression::r_squared;
use crate::surrogate::PddSurrogate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pdd-rdo",
    version,
    about = "Limited-data robust design optimization with PDD surrogates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `surrogate.seed` (input sampling).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `io.out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a Latin hypercube sample of the inputs at `rdo.d0`.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Also evaluate the configured analytic model and write a dataset.
        #[arg(long)]
        evaluate: bool,
    },
    /// Fit the initial surrogate and serialize it together with its samples.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training CSV (`x1..xN,Q`); overrides `io.data`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the optimization for every configured weight pair.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Surrogate written by `train`; overrides `io.surrogate`.
        #[arg(long)]
        surrogate: Option<PathBuf>,
    },
    /// Compare surrogate moments with Monte Carlo on the analytic model.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        surrogate: Option<PathBuf>,
        /// Design vector, comma separated; overrides `verify.design`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        design: Option<Vec<f64>>,
        /// Monte Carlo sample size; overrides `verify.samples`.
        #[arg(long)]
        samples: Option<usize>,
        /// Monte Carlo seed; overrides `verify.seed`.
        #[arg(long)]
        mc_seed: Option<u64>,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("{}", error_line(&e));
            code
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NUMERICAL
    }
}

pub fn error_line(e: &Error) -> String {
    format!(
        "error kind={} exit={} message={:?}",
        e.kind(),
        exit_code(e),
        e.to_string()
    )
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Sample { common, evaluate } => {
            let (cfg, dir) = prepare(&common)?;
            cmd_sample(&cfg, evaluate, &dir, out)
        }
        Command::Train { common, data } => {
            let (mut cfg, dir) = prepare(&common)?;
            if data.is_some() {
                cfg.io.data = data;
            }
            cmd_train(&cfg, &dir, out)
        }
        Command::Optimize { common, surrogate } => {
            let (mut cfg, dir) = prepare(&common)?;
            if surrogate.is_some() {
                cfg.io.surrogate = surrogate;
            }
            cmd_optimize(&cfg, &dir, out)
        }
        Command::Verify {
            common,
            surrogate,
            design,
            samples,
            mc_seed,
        } => {
            let (mut cfg, _) = prepare(&common)?;
            if surrogate.is_some() {
                cfg.io.surrogate = surrogate;
            }
            if design.is_some() {
                cfg.verify.design = design;
            }
            if let Some(m) = samples {
                cfg.verify.samples = m;
            }
            if let Some(s) = mc_seed {
                cfg.verify.seed = s;
            }
            cfg.validate()?;
            cmd_verify(&cfg, out)
        }
    }
}

fn prepare(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.surrogate.seed = s;
    }
    cfg.validate()?;
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.io.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, dir))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// LHS inputs at `d0`, evaluated by the analytic model when `evaluate`.
fn training_inputs(cfg: &RunConfig) -> Result<nalgebra::DMatrix<f64>> {
    let law = cfg
        .design_space()?
        .law_at(&cfg.input_law()?, &cfg.rdo.d0, &cfg.problem.nominal_means)?;
    Ok(law.sample_lhs(cfg.surrogate.samples, cfg.surrogate.seed))
}

fn evaluate_inputs(model: &dyn QoiModel, x: nalgebra::DMatrix<f64>) -> Result<Dataset> {
    let q = (0..x.nrows())
        .map(|r| {
            let row: Vec<f64> = x.row(r).iter().copied().collect();
            model.evaluate(&row)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(x, q)
}

pub fn cmd_sample(cfg: &RunConfig, evaluate: bool, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let x = training_inputs(cfg)?;
    let n = x.ncols();
    if evaluate {
        let model = cfg
            .model()
            .ok_or_else(|| Error::InvalidConfig("--evaluate needs an analytic problem.model".into()))?;
        let data = evaluate_inputs(&model, x)?;
        write_dataset(create(dir, "dataset.csv")?, &data)?;
        writeln!(
            out,
            "wrote {} samples to {}",
            data.len(),
            dir.join("dataset.csv").display()
        )
        .map_err(io_err)?;
        return Ok(());
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(dir, "samples.csv")?);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record((1..=n).map(|i| format!("x{i}"))).map_err(csv_err)?;
    for r in 0..x.nrows() {
        w.write_record(x.row(r).iter().map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    w.flush()?;
    writeln!(
        out,
        "wrote {} samples to {}",
        x.nrows(),
        dir.join("samples.csv").display()
    )
    .map_err(io_err)?;
    Ok(())
}

/// Training data from `io.data`, or sampled and evaluated on the analytic
/// model.
fn training_data(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.io.data {
        Some(path) => {
            let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            read_dataset(std::io::BufReader::new(f), cfg.problem.inputs.len())
        }
        None => {
            let model = cfg
                .model()
                .ok_or_else(|| Error::InvalidConfig("problem.model = \"dataset\" needs io.data or --data".into()))?;
            evaluate_inputs(&model, training_inputs(cfg)?)
        }
    }
}

fn fit_setup(cfg: &RunConfig) -> Result<RdoSetup> {
    RdoSetup::from_dataset(
        &training_data(cfg)?,
        &cfg.input_law()?,
        &cfg.problem.nominal_means,
        cfg.design_space()?,
        &cfg.rdo.d0,
        &cfg.surrogate,
        &cfg.regression,
    )
}

/// Setup from `io.surrogate` when given, otherwise trained from scratch.
fn load_or_fit(cfg: &RunConfig) -> Result<RdoSetup> {
    let Some(path) = &cfg.io.surrogate else {
        return fit_setup(cfg);
    };
    let (s, train) = PddSurrogate::load(path)?;
    let train = train.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "{} has no training block; retrain with `train`",
            path.display()
        ))
    })?;
    RdoSetup::from_surrogate(
        s,
        train,
        &cfg.regression,
        &cfg.problem.nominal_means,
        cfg.design_space()?,
        &cfg.rdo.d0,
    )
}

pub fn cmd_train(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let setup = fit_setup(cfg)?;
    let s = setup.surrogate();
    let train = setup.trainer().training();
    let pred = s.predict_many(train.z())?;
    let r2 = match r_squared(pred.as_slice(), train.h().as_slice()) {
        Ok(v) => v.to_string(),
        Err(Error::DegenerateActuals) => "undefined".to_string(),
        Err(e) => return Err(e),
    };
    let path = dir.join("surrogate.txt");
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    s.save(&path, Some(train))?;
    let m = setup.initial_moments();
    writeln!(
        out,
        "method={} samples={} basis={} mean={} sd={} r2_train={} surrogate={}",
        s.method().as_str(),
        train.len(),
        s.basis().len(),
        m.mean,
        m.sd(),
        r2,
        path.display()
    )
    .map_err(io_err)?;
    Ok(())
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn write_trajectory<W: Write>(w: W, res: &RdoResult) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let n = res.d_star.len();
    let header: Vec<String> = ["iteration".to_string()]
        .into_iter()
        .chain((1..=n).map(|k| format!("d{k}")))
        .chain(["objective", "mean", "sd"].map(String::from))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for p in &res.trajectory {
        let row: Vec<String> = [p.iteration.to_string()]
            .into_iter()
            .chain(p.d.iter().map(|&v| num(v)))
            .chain([num(p.objective), num(p.mean), num(p.sd)])
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per successful case.
pub fn write_pareto<W: Write>(w: W, cases: &[ParetoCase], n: usize) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let header: Vec<String> = ["w1", "w2"]
        .map(String::from)
        .into_iter()
        .chain((1..=n).map(|k| format!("d{k}*")))
        .chain(["mean", "sd"].map(String::from))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for c in cases {
        if let Ok(r) = &c.result {
            let row: Vec<String> = [num(c.w1), num(c.w2)]
                .into_iter()
                .chain(r.d_star.iter().map(|&v| num(v)))
                .chain([num(r.mean), num(r.sd)])
                .collect();
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn trajectory_file_name(w1: f64, w2: f64) -> String {
    format!("trajectory_{w1}_{w2}.csv")
}

pub fn cmd_optimize(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let setup = load_or_fit(cfg)?;
    let cases = pareto_sweep(&setup, &cfg.weights(), &cfg.rdo.nm);
    let mut first_err = None;
    for c in &cases {
        match &c.result {
            Ok(r) => {
                let name = trajectory_file_name(c.w1, c.w2);
                write_trajectory(create(dir, &name)?, r)?;
                writeln!(
                    out,
                    "w=({}, {}) d*={:?} objective={} mean={} sd={} iterations={} evaluations={} converged={}",
                    c.w1,
                    c.w2,
                    r.d_star,
                    r.objective,
                    r.mean,
                    r.sd,
                    r.trajectory.len() - 1,
                    r.evaluations,
                    r.converged
                )
                .map_err(io_err)?;
            }
            Err(e) => {
                eprintln!("case w=({}, {}) failed: {}", c.w1, c.w2, error_line(e));
                first_err.get_or_insert_with(|| e.clone());
            }
        }
    }
    write_pareto(create(dir, "pareto.csv")?, &cases, setup.space().dim())?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn z_score(estimate: f64, reference: f64, se: f64) -> f64 {
    let diff = estimate - reference;
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

pub fn cmd_verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let model = cfg
        .model()
        .ok_or_else(|| Error::InvalidConfig("verify needs an analytic problem.model".into()))?;
    let space = cfg.design_space()?;
    let d = cfg.verify.design.clone().unwrap_or_else(|| cfg.rdo.d0.clone());
    space.check(&d)?;
    let setup = load_or_fit(cfg)?;
    let est = setup.evaluate(&d)?;
    let law = space.law_at(&cfg.input_law()?, &d, &cfg.problem.nominal_means)?;
    let mc = mc_moments(&model, &law, cfg.verify.samples, cfg.verify.seed)?;
    writeln!(out, "design={d:?} mc_samples={}", mc.samples).map_err(io_err)?;
    writeln!(out, "quantity,surrogate,monte_carlo,standard_error,z").map_err(io_err)?;
    for (name, s, m, se) in [
        ("mean", est.mean, mc.mean, mc.se_mean),
        ("sd", est.sd(), mc.sd(), mc.se_sd()),
    ] {
        writeln!(out, "{name},{s},{m},{se},{}", z_score(s, m, se)).map_err(io_err)?;
    }
    Ok(())
}
