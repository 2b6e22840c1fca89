//! Command-line pipeline: distribution → coefficients → chain → evolution → metrics → CSV.

pub mod config;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use krylov_ensemble::chain::{build_chain, Frame, KrylovChain};
use krylov_ensemble::io;
use krylov_ensemble::metrics::{self, correlator, krylov_complexity, qsl_times};
use krylov_ensemble::oracle::{build_restricted, evolve_full, explicit_lanczos, project};
use krylov_ensemble::propagate::{
    evolve_eig, evolve_laguerre_chain, evolve_spectral, EvolutionResult, StateVector, TimeGrid,
};
use krylov_ensemble::recursion::{
    assemble, closed_form_coefficients, hankel_coefficients, stieltjes_coefficients, ChainCoefficients,
};
use krylov_ensemble::spectra::{CouplingModel, SpectralDistribution, Spin};

use config::{Family, FrameArg, MethodArg, Mode, Route, RunConfig, Units};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Tolerance(_) => EXIT_TOLERANCE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "error: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance failure: {m}"),
        }
    }
}

impl From<krylov_ensemble::Error> for CliError {
    fn from(e: krylov_ensemble::Error) -> Self {
        use krylov_ensemble::Error::*;
        match e {
            Conditioning { .. } | NoConvergence { .. } | Accuracy(_) => CliError::Tolerance(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "krylov-ensemble", version, about = "Krylov-chain dynamics of inhomogeneous spin ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Chain coefficients as `n,alpha,beta`.
    Coefficients {
        #[command(flatten)]
        common: CommonArgs,
        /// Run every applicable route and report the largest pairwise deviation.
        #[arg(long)]
        cross_check: bool,
        /// Allowed relative deviation for --cross-check.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Evolve the initial state and write amplitudes and all metrics.
    Evolve {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Bond-commutator light cone `r,t,C`.
    Correlator {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Mandelstam-Tamm times `i,j,F_target,tau`.
    Qsl {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full single-excitation space versus the chain for a sampled or supplied ensemble.
    OracleCompare {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of spins to sample (overrides `samples`).
        #[arg(long = "N", alias = "n")]
        n: Option<usize>,
        /// Allowed amplitude and coefficient deviation.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Also compare sampled b_1..b_6 with the closed form at this relative tolerance.
        #[arg(long)]
        closed_form_tol: Option<f64>,
    },
    /// Run `evolve` (or `coefficients`) over a parameter range, one subdirectory per value.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// `name=start:end:step`, e.g. `q=-1:1:0.1`.
        #[arg(long)]
        sweep: String,
        #[arg(long, value_enum, default_value_t = SweepCommand::Evolve)]
        run: SweepCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepCommand {
    Evolve,
    Coefficients,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(long)]
    pub mean: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    /// `omega,g` CSV for --family discrete.
    #[arg(long)]
    pub ensemble: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub spins: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega_c: Option<f64>,
    #[arg(long)]
    pub g_eff: Option<f64>,
    /// Chain dimension.
    #[arg(long = "M", alias = "m")]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub frame: Option<FrameArg>,
    #[arg(long, value_enum)]
    pub route: Option<Route>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub initial: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, value_enum)]
    pub units: Option<Units>,
    #[arg(long)]
    pub r_max: Option<usize>,
    /// Comma-separated fidelity targets.
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<f64>>,
}

impl CommonArgs {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
                RunConfig::parse(&text).map_err(CliError::Validation)?
            }
            None => RunConfig::default(),
        };
        let d = &mut c.distribution;
        set(&mut d.family, self.family);
        set(&mut d.mean, self.mean);
        set(&mut d.sigma, self.sigma);
        set_opt(&mut d.q, self.q);
        set_opt(&mut d.ensemble, self.ensemble.clone());
        set_opt(&mut d.samples, self.samples);
        set(&mut d.spins, self.spins);
        let ch = &mut c.chain;
        set(&mut ch.mode, self.mode);
        set_opt(&mut ch.omega_c, self.omega_c);
        set(&mut ch.g_eff, self.g_eff);
        set(&mut ch.m, self.m);
        set(&mut ch.frame, self.frame);
        set(&mut ch.route, self.route);
        set(&mut ch.method, self.method);
        set(&mut c.time.t_max, self.t_max);
        set(&mut c.time.points, self.points);
        let r = &mut c.run;
        set_opt(&mut r.initial, self.initial);
        set_opt(&mut r.seed, self.seed);
        set(&mut r.outputs, self.out.clone());
        set(&mut r.units, self.units);
        set_opt(&mut r.r_max, self.r_max);
        set(&mut r.targets, self.targets.clone());
        Ok(c)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Coefficients { common, cross_check, tol } => {
            cmd_coefficients(&common.resolve()?, *cross_check, *tol)
        }
        Command::Evolve { common } => cmd_evolve(&common.resolve()?, Outputs::all()),
        Command::Correlator { common } => cmd_evolve(&common.resolve()?, Outputs::correlator_only()),
        Command::Qsl { common } => cmd_qsl(&common.resolve()?),
        Command::OracleCompare { common, n, tol, closed_form_tol } => {
            cmd_oracle_compare(&common.resolve()?, *n, *tol, *closed_form_tol)
        }
        Command::Sweep { common, sweep, run } => cmd_sweep(&common.resolve()?, sweep, *run),
    }
}

/// The distribution as configured, before any sampling.
fn family_distribution(c: &RunConfig) -> CliResult<SpectralDistribution> {
    let d = &c.distribution;
    let need_q = || d.q.ok_or_else(|| CliError::Validation(format!("family {:?} needs --q", d.family)));
    Ok(match d.family {
        Family::Gaussian => SpectralDistribution::gaussian(d.mean, d.sigma)?,
        Family::Qgauss => SpectralDistribution::q_gaussian(d.mean, d.sigma, need_q()?)?,
        Family::Tsallis => SpectralDistribution::tsallis(d.mean, d.sigma, need_q()?)?,
        Family::Uniform => SpectralDistribution::uniform(d.mean, d.sigma)?,
        Family::Discrete => {
            let path = d
                .ensemble
                .as_ref()
                .ok_or_else(|| CliError::Validation("family discrete needs --ensemble <omega,g csv>".into()))?;
            let file = File::open(path).map_err(|e| CliError::Validation(format!("{path}: {e}")))?;
            SpectralDistribution::discrete(io::read_ensemble(file)?)?
        }
        Family::Homogeneous => {
            if d.spins == 0 {
                return Err(CliError::Validation("homogeneous family needs spins >= 1".into()));
            }
            let g = c.chain.g_eff / (d.spins as f64).sqrt();
            SpectralDistribution::discrete(vec![Spin { omega: d.mean, g }; d.spins])?
        }
    })
}

struct Prepared {
    /// The configured family (continuous or explicit).
    family: SpectralDistribution,
    /// The measure the coefficients describe: `family`, or a sample drawn from it.
    measure: SpectralDistribution,
    coeffs: ChainCoefficients,
    chain: KrylovChain,
    /// Frequency unit of the scaled outputs.
    scale: f64,
    sampled: bool,
}

fn sampled_measure(c: &RunConfig, family: &SpectralDistribution) -> CliResult<Option<SpectralDistribution>> {
    let Some(n) = c.distribution.samples else { return Ok(None) };
    if family.is_discrete() {
        return Err(CliError::Validation("samples apply only to continuous families".into()));
    }
    let seed = c
        .run
        .seed
        .ok_or_else(|| CliError::Validation("sampling needs an explicit --seed".into()))?;
    Ok(Some(family.sample_discrete(n, seed, &CouplingModel::UniformG { g_eff: c.chain.g_eff })?))
}

fn route_for(c: &RunConfig, measure: &SpectralDistribution) -> Route {
    match c.chain.route {
        Route::Auto => match measure {
            SpectralDistribution::Discrete { .. } => Route::Stieltjes,
            SpectralDistribution::TsallisQGaussian { .. } => Route::Hankel,
            _ => Route::ClosedForm,
        },
        r => r,
    }
}

fn ensemble_coefficients(route: Route, measure: &SpectralDistribution, m: usize) -> CliResult<ChainCoefficients> {
    let mismatch = |valid: &str| {
        CliError::Validation(format!(
            "route {route:?} does not apply to the {} family; valid routes: {valid}",
            measure.family_name()
        ))
    };
    match route {
        Route::ClosedForm => match measure {
            SpectralDistribution::Discrete { .. } => Err(mismatch("stieltjes, hankel")),
            SpectralDistribution::TsallisQGaussian { .. } => Err(mismatch("hankel")),
            _ => Ok(closed_form_coefficients(measure, m.max(2))?.truncated(m)),
        },
        Route::Hankel => {
            let k = 2 * m.max(2) - 1;
            Ok(hankel_coefficients(&measure.moments(k)?, m.max(2))?.truncated(m))
        }
        Route::Stieltjes => match measure {
            SpectralDistribution::Discrete { .. } => Ok(stieltjes_coefficients(measure, m)?),
            SpectralDistribution::TsallisQGaussian { .. } => Err(mismatch("hankel (or set samples for stieltjes)")),
            _ => Err(mismatch("closed-form, hankel (or set samples for stieltjes)")),
        },
        Route::Auto => unreachable!("resolved by route_for"),
    }
}

fn prepare(c: &RunConfig) -> CliResult<Prepared> {
    if c.chain.m < 2 {
        return Err(CliError::Validation(format!("chain dimension must be >= 2, got {}", c.chain.m)));
    }
    let family = family_distribution(c)?;
    let sample = sampled_measure(c, &family)?;
    let sampled = sample.is_some();
    let measure = sample.unwrap_or_else(|| family.clone());
    let route = route_for(c, &measure);
    let coeffs = match c.chain.mode {
        Mode::EnsembleOnly => ensemble_coefficients(route, &measure, c.chain.m)?,
        Mode::CavityCoupled => {
            let ens = ensemble_coefficients(route, &measure, c.chain.m - 1)?;
            let g_eff = measure.collective_coupling().unwrap_or(c.chain.g_eff);
            let omega_c = c.chain.omega_c.unwrap_or_else(|| measure.center());
            assemble(&ens, omega_c, g_eff)?
        }
    };
    let frame = match c.chain.frame {
        FrameArg::Lab => Frame::Lab,
        FrameArg::Rotating => Frame::Rotating,
    };
    let chain = build_chain(&coeffs, c.chain.m, frame)?;
    let sigma = measure.sigma();
    let scale = if sigma > 0.0 {
        sigma
    } else if coeffs.g_eff > 0.0 {
        coeffs.g_eff
    } else {
        1.0
    };
    Ok(Prepared { family, measure, coeffs, chain, scale, sampled })
}

impl Prepared {
    fn to_output_time(&self, units: Units, t: f64) -> f64 {
        match units {
            Units::Scaled => t * self.scale,
            Units::Absolute => t,
        }
    }

    fn time_grid(&self, c: &RunConfig) -> CliResult<TimeGrid> {
        if !(c.time.t_max > 0.0) || c.time.points < 2 {
            return Err(CliError::Validation("time window needs t_max > 0 and points >= 2".into()));
        }
        let t_max = match c.run.units {
            Units::Scaled => c.time.t_max / self.scale,
            Units::Absolute => c.time.t_max,
        };
        Ok(TimeGrid::linspace(0.0, t_max, c.time.points)?)
    }
}

fn header(c: &RunConfig, p: &Prepared, extra: &[String]) -> Vec<String> {
    let mut h = vec![format!(
        "krylov-ensemble {} config={} provenance={}",
        env!("CARGO_PKG_VERSION"),
        c.hash(),
        p.coeffs.provenance
    )];
    h.push(format!(
        "family={} mode={} frame={} M={} units={} scale={}",
        p.family.family_name(),
        p.coeffs.mode,
        p.chain.frame(),
        p.chain.dim(),
        match c.run.units {
            Units::Scaled => "scaled",
            Units::Absolute => "absolute",
        },
        p.scale
    ));
    if let Some(req) = p.chain.clipped_from() {
        h.push(format!("chain clipped from M={req} to {} at a vanishing coupling", p.chain.dim()));
    }
    h.extend_from_slice(extra);
    h
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_config(dir: &Path, c: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), c.canonical())?;
    Ok(())
}

fn scaled_coefficients(coeffs: &ChainCoefficients, units: Units, scale: f64) -> ChainCoefficients {
    let s = match units {
        Units::Scaled => scale,
        Units::Absolute => 1.0,
    };
    let mut out = coeffs.clone();
    out.alphas.iter_mut().for_each(|a| *a /= s);
    out.betas.iter_mut().for_each(|b| *b /= s);
    out.center /= s;
    out.g_eff /= s;
    out
}

fn cmd_coefficients(c: &RunConfig, cross_check: bool, tol: f64) -> CliResult<()> {
    let p = prepare(c)?;
    let dir = PathBuf::from(&c.run.outputs);
    write_config(&dir, c)?;
    if p.sampled {
        let spins = match &p.measure {
            SpectralDistribution::Discrete { spins } => spins.clone(),
            _ => unreachable!(),
        };
        io::write_ensemble(create(&dir, "ensemble.csv")?, &spins, &header(c, &p, &[]))?;
    }
    let mut extra = Vec::new();
    if cross_check {
        let dev = cross_check_routes(c, &p)?;
        let line = format!("cross-check routes {}: max relative deviation {:.3e}", dev.0.join(", "), dev.1);
        println!("{line}");
        extra.push(line);
        if dev.1 > tol {
            write_coefficients_file(c, &p, &dir, &extra)?;
            return Err(CliError::Tolerance(format!("route deviation {:.3e} exceeds {tol:e}", dev.1)));
        }
    }
    write_coefficients_file(c, &p, &dir, &extra)
}

fn write_coefficients_file(c: &RunConfig, p: &Prepared, dir: &Path, extra: &[String]) -> CliResult<()> {
    let out = scaled_coefficients(&p.coeffs.truncated(p.chain.dim()), c.run.units, p.scale);
    io::write_coefficients(create(dir, "coefficients.csv")?, &out, &header(c, p, extra))?;
    Ok(())
}

/// Every applicable exact route on the configured measure; returns their names and the largest
/// pairwise relative deviation of the ensemble coefficients.
fn cross_check_routes(c: &RunConfig, p: &Prepared) -> CliResult<(Vec<String>, f64)> {
    let m = match c.chain.mode {
        Mode::EnsembleOnly => p.chain.dim(),
        Mode::CavityCoupled => p.chain.dim() - 1,
    };
    let candidates: &[Route] = match &p.measure {
        SpectralDistribution::Discrete { .. } => &[Route::Stieltjes, Route::Hankel],
        SpectralDistribution::TsallisQGaussian { .. } => &[Route::Hankel],
        _ => &[Route::ClosedForm, Route::Hankel],
    };
    let mut runs = Vec::new();
    for &r in candidates {
        runs.push((format!("{r:?}").to_lowercase(), ensemble_coefficients(r, &p.measure, m)?));
    }
    let mut worst: f64 = 0.0;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let scale = p.measure.sigma().max(f64::MIN_POSITIVE);
            worst = worst.max(runs[i].1.max_relative_deviation(&runs[j].1, 1e-12 * scale));
        }
    }
    Ok((runs.into_iter().map(|r| r.0).collect(), worst))
}

#[derive(Clone, Copy)]
struct Outputs {
    amplitudes: bool,
    complexity: bool,
    correlator: bool,
    qsl: bool,
}

impl Outputs {
    fn all() -> Self {
        Outputs { amplitudes: true, complexity: true, correlator: true, qsl: true }
    }

    fn correlator_only() -> Self {
        Outputs { amplitudes: false, complexity: false, correlator: true, qsl: false }
    }
}

fn evolve_prepared(c: &RunConfig, p: &Prepared, times: &TimeGrid) -> CliResult<EvolutionResult> {
    let psi = StateVector::basis(p.chain.dim(), c.initial_site())?;
    Ok(match c.chain.method {
        MethodArg::Eig => evolve_eig(&p.chain, &psi, times)?,
        MethodArg::Laguerre => evolve_laguerre_chain(p.chain.coefficients(), &psi, times)?,
        MethodArg::Spectral => {
            evolve_spectral(p.chain.coefficients(), &p.measure, &psi, times, p.chain.frame())?
        }
    })
}

fn qsl_entries(c: &RunConfig, p: &Prepared) -> CliResult<metrics::QslReport> {
    let pairs: Vec<(usize, usize)> = (0..p.chain.dim()).map(|j| (c.initial_site(), j)).collect();
    Ok(qsl_times(p.chain.coefficients(), &c.run.targets, &pairs)?)
}

fn cmd_evolve(c: &RunConfig, outputs: Outputs) -> CliResult<()> {
    let p = prepare(c)?;
    let times = p.time_grid(c)?;
    let dir = PathBuf::from(&c.run.outputs);
    write_config(&dir, c)?;
    let units = c.run.units;
    let t_end = *times.as_slice().last().expect("grid is not empty");
    let mut extra = Vec::new();
    let t_reflect = p.chain.t_reflect();
    if t_end > 0.8 * t_reflect {
        let line = format!(
            "warning: time window {} exceeds 0.8 t_reflect = {}; boundary reflections may enter",
            p.to_output_time(units, t_end),
            p.to_output_time(units, 0.8 * t_reflect)
        );
        eprintln!("{line}");
        extra.push(line);
    }
    let head = header(c, &p, &extra);
    let out_times: Vec<f64> = times.as_slice().iter().map(|&t| p.to_output_time(units, t)).collect();

    if outputs.amplitudes || outputs.complexity {
        let mut res = evolve_prepared(c, &p, &times)?;
        let mut head = head.clone();
        head.push(format!("method={} norm_drift={:e}", res.method, res.norm_drift));
        let k = krylov_complexity(&res);
        if outputs.complexity {
            io::write_complexity(create(&dir, "complexity.csv")?, &out_times, &k, &head)?;
        }
        if outputs.amplitudes {
            res.times = out_times.clone();
            io::write_amplitudes(create(&dir, "amplitudes.csv")?, &res, &head)?;
        }
    }
    if outputs.correlator {
        let dim = p.chain.dim();
        let r_max = c.run.r_max.unwrap_or(40.min(dim.saturating_sub(2)));
        let mut grid = correlator(&p.chain, r_max, &times)?;
        grid.times = out_times.clone();
        io::write_correlator(create(&dir, "correlator.csv")?, &grid, &head)?;
    }
    if outputs.qsl {
        write_qsl(c, &p, &dir, &head)?;
    }
    Ok(())
}

fn write_qsl(c: &RunConfig, p: &Prepared, dir: &Path, head: &[String]) -> CliResult<()> {
    let mut rep = qsl_entries(c, p)?;
    let t = |v: f64| p.to_output_time(c.run.units, v);
    rep.entries.iter_mut().for_each(|e| e.tau = t(e.tau));
    let mut head = head.to_vec();
    head.push(format!(
        "tau_0={} tau_L={} g_ens={} sigma={}",
        t(rep.tau_0),
        t(rep.tau_l),
        rep.g_ens,
        rep.sigma
    ));
    io::write_qsl(create(dir, "qsl.csv")?, &rep.entries, &head)?;
    Ok(())
}

fn cmd_qsl(c: &RunConfig) -> CliResult<()> {
    let p = prepare(c)?;
    let dir = PathBuf::from(&c.run.outputs);
    write_config(&dir, c)?;
    let rep = qsl_entries(c, &p)?;
    let t = |v: f64| p.to_output_time(c.run.units, v);
    println!("tau_0 = {}  tau_L = {}", t(rep.tau_0), t(rep.tau_l));
    write_qsl(c, &p, &dir, &header(c, &p, &[]))
}

fn cmd_oracle_compare(c: &RunConfig, n: Option<usize>, tol: f64, closed_form_tol: Option<f64>) -> CliResult<()> {
    let mut c = c.clone();
    if n.is_some() {
        c.distribution.samples = n;
    }
    let family = family_distribution(&c)?;
    let ens = match sampled_measure(&c, &family)? {
        Some(s) => s,
        None if family.is_discrete() => family.clone(),
        None => return Err(CliError::Validation("oracle-compare needs --N (spins to sample) and --seed".into())),
    };
    let omega_c = c.chain.omega_c.unwrap_or_else(|| ens.center());
    let h = build_restricted(&ens, omega_c)?;
    if h.spins.len() > krylov_ensemble::oracle::MAX_ORACLE_SPINS {
        return Err(krylov_ensemble::Error::SizeGuard(format!(
            "oracle is limited to {} spins, got {}",
            krylov_ensemble::oracle::MAX_ORACLE_SPINS,
            h.spins.len()
        ))
        .into());
    }
    let m = c.chain.m;
    let lanczos = explicit_lanczos(&h, &h.photon_state(), m)?;
    let chain_coeffs = assemble(&stieltjes_coefficients(&ens, m - 1)?, omega_c, h.g_eff())?;
    let coef_dev = lanczos.coeffs.max_relative_deviation(&chain_coeffs, 1e-12 * ens.sigma().max(h.g_eff()));
    // A chain cut below the full Krylov dimension is a different Hamiltonian; evolve the whole
    // chain and compare its first M sites with the projection on the M Lanczos vectors.
    let full_dim = h.dim();
    let chain = if m < full_dim {
        let whole = assemble(&stieltjes_coefficients(&ens, full_dim - 1)?, omega_c, h.g_eff())?;
        build_chain(&whole, full_dim, Frame::Lab)?
    } else {
        build_chain(&chain_coeffs, m, Frame::Lab)?
    };
    let dim = chain.dim().min(lanczos.basis.ncols());
    // The oracle chain is always cavity-coupled and starts on the photon unless told otherwise.
    let start = c.run.initial.unwrap_or(0);
    if start >= dim {
        return Err(CliError::Validation(format!("initial site {start} outside a {dim}-site chain")));
    }
    let scale = if ens.sigma() > 0.0 { ens.sigma() } else { h.g_eff() };
    let t_max = match c.run.units {
        Units::Scaled => c.time.t_max / scale,
        Units::Absolute => c.time.t_max,
    };
    let times = TimeGrid::linspace(0.0, t_max, c.time.points.max(2))?;
    let start_full = StateVector::new(lanczos.basis.column(start).iter().copied().collect())?;
    let full = project(&evolve_full(&h, &start_full, &times)?, &lanczos.basis)?;
    let reduced = evolve_eig(&chain, &StateVector::basis(chain.dim(), start)?, &times)?;
    let amp_dev = full.max_deviation(&reduced, dim);
    println!("oracle-compare N={} M={dim}", h.spins.len());
    println!("max amplitude deviation (full space vs chain): {amp_dev:.3e}");
    println!("max coefficient deviation (explicit Lanczos vs stieltjes): {coef_dev:.3e}");
    let mut failures = Vec::new();
    if amp_dev > tol || coef_dev > tol {
        failures.push(format!("deviation above {tol:e}"));
    }
    if let Some(ctol) = closed_form_tol {
        let exact = closed_form_coefficients(&family, 7).map_err(|_| {
            CliError::Validation(format!("no closed form for the {} family", family.family_name()))
        })?;
        let sampled = stieltjes_coefficients(&ens, 7)?;
        let dev = (0..6)
            .map(|i| (sampled.betas[i] / exact.betas[i] - 1.0).abs())
            .fold(0.0, f64::max);
        println!("max relative deviation of sampled b_1..b_6 from the closed form: {dev:.3e}");
        if dev > ctol {
            failures.push(format!("sampled coefficients deviate by {dev:.3e} > {ctol}"));
        }
    }
    if failures.is_empty() {
        println!("pass");
        Ok(())
    } else {
        Err(CliError::Tolerance(failures.join("; ")))
    }
}

/// Values of a `name=start:end:step` range, computed from the index to avoid drift.
pub fn parse_sweep(spec: &str) -> CliResult<(String, Vec<f64>)> {
    let bad = || CliError::Validation(format!("sweep '{spec}' is not name=start:end:step"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let parts: Vec<f64> = range
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let [start, end, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || end < start {
        return Err(bad());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    let values = (0..count).map(|i| ((start + step * i as f64) * 1e12).round() / 1e12).collect();
    Ok((name.trim().to_string(), values))
}

fn apply_sweep_value(c: &mut RunConfig, name: &str, v: f64) -> CliResult<()> {
    let as_count = |v: f64| -> CliResult<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(CliError::Validation(format!("{name} needs integer values, got {v}")))
        }
    };
    match name {
        "q" => c.distribution.q = Some(v),
        "sigma" => c.distribution.sigma = v,
        "mean" => c.distribution.mean = v,
        "g_eff" => c.chain.g_eff = v,
        "omega_c" => c.chain.omega_c = Some(v),
        "M" | "m" => c.chain.m = as_count(v)?,
        "seed" => c.run.seed = Some(as_count(v)? as u64),
        "samples" => c.distribution.samples = Some(as_count(v)?),
        _ => {
            return Err(CliError::Validation(format!(
                "cannot sweep '{name}'; use q, sigma, mean, g_eff, omega_c, M, seed or samples"
            )))
        }
    }
    Ok(())
}

fn cmd_sweep(c: &RunConfig, spec: &str, run: SweepCommand) -> CliResult<()> {
    let (name, values) = parse_sweep(spec)?;
    let base = PathBuf::from(&c.run.outputs);
    let results: Vec<(String, CliResult<()>)> = values
        .par_iter()
        .map(|&v| {
            let label = format!("{name}={v}");
            let mut rc = c.clone();
            rc.run.outputs = base.join(&label).to_string_lossy().into_owned();
            let r = apply_sweep_value(&mut rc, &name, v).and_then(|_| match run {
                SweepCommand::Evolve => cmd_evolve(&rc, Outputs::all()),
                SweepCommand::Coefficients => cmd_coefficients(&rc, false, 0.0),
            });
            (label, r)
        })
        .collect();
    let mut worst = None;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (label, r) in &results {
        match r {
            Ok(()) => writeln!(out, "{label}: ok")?,
            Err(e) => {
                writeln!(out, "{label}: {e}")?;
                if worst.as_ref().is_none_or(|w: &CliError| e.exit_code() > w.exit_code()) {
                    worst = Some(match e {
                        CliError::Validation(m) => CliError::Validation(format!("{label}: {m}")),
                        CliError::Tolerance(m) => CliError::Tolerance(format!("{label}: {m}")),
                    });
                }
            }
        }
    }
    match worst {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_ranges() {
        let (n, v) = parse_sweep("q=-1:1:0.1").unwrap();
        assert_eq!(n, "q");
        assert_eq!(v.len(), 21);
        assert_eq!(v[7], -0.3);
        assert_eq!(*v.last().unwrap(), 1.0);
        assert!(parse_sweep("q=1:0:0.1").is_err());
        assert!(parse_sweep("q=0:1").is_err());
    }

    #[test]
    fn flags_override_config() {
        let args = CommonArgs { sigma: Some(2.5), m: Some(16), ..Default::default() };
        let c = args.resolve().unwrap();
        assert_eq!(c.distribution.sigma, 2.5);
        assert_eq!(c.chain.m, 16);
        assert_eq!(c.time.points, 400);
    }

    #[test]
    fn error_codes() {
        let e: CliError = krylov_ensemble::Error::Accuracy("x".into()).into();
        assert_eq!(e.exit_code(), EXIT_TOLERANCE);
        let e: CliError = krylov_ensemble::Error::ChainExhausted { requested: 3, available: 2 }.into();
        assert_eq!(e.exit_code(), EXIT_VALIDATION);
    }
}
