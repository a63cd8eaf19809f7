//! Command bodies: resolve parameters (flags > config file > defaults),
//! run the requested computation, print the human summary, and write data
//! files with replayable manifests next to them.

use std::path::{Path, PathBuf};

use transfer_asymptotics::{
    classification_dat_name, derive_trial_seed, gnuplot_script, oracle_class_error,
    predict_class_error, predict_class_error_scalar, q_tail, regime, regression_dat_name,
    render_dat, run_classification_sweep, run_classification_trial, run_regression_sweep,
    run_regression_trial, transfer_benefit, universality_report, w0_class_error,
    write_csv, write_dat, ClassCovariances, ClassificationEnsemble, ClassificationInstanceSpec,
    ClassificationSweepBase, EntryDistribution, JointSpectralDensity, RegressionEnsemble,
    RegressionInstanceSpec, RegressionSweepBase, SpectralDensity, SweepKind, SweepTable,
    SweepVariable, TrialReport,
};

use crate::config::{parse_atoms, render_manifest, ConfigError, FileConfig};
use crate::{
    CliError, CliResult, FigureId, PredictClassArgs, PredictRegArgs, ReproduceArgs,
    SimulateClassArgs, SimulateRegArgs, SpectrumPreset, SweepArgs, SweepMode,
};

pub struct Context {
    pub file: FileConfig,
    pub out_dir: PathBuf,
    pub command_line: String,
}

/// Default grid per swept variable, matching the figure protocols.
const KAPPA_GRID: [f64; 6] = [1.25, 1.5, 2.0, 3.0, 4.0, 5.0];
const RHO_GRID: [f64; 7] = [0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
const SIGMA_GRID: [f64; 3] = [0.01, 0.15, 2.0];

// ---------------------------------------------------------------------------
// parameter resolution
// ---------------------------------------------------------------------------

/// Resolves one value at a time and records everything it resolved, so the
/// manifest always reflects the exact configuration that ran.
struct Resolver<'a> {
    file: &'a FileConfig,
    manifest: Vec<(String, String)>,
}

impl<'a> Resolver<'a> {
    fn new(file: &'a FileConfig) -> Self {
        Resolver {
            file,
            manifest: Vec::new(),
        }
    }

    fn record(&mut self, key: &str, value: String) {
        self.manifest.push((key.to_string(), value));
    }

    fn f64(&mut self, flag: Option<f64>, key: &str, default: Option<f64>) -> CliResult<f64> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.f64(key)? {
                Some(v) => v,
                None => default.ok_or_else(|| missing(key))?,
            },
        };
        self.record(key, format!("{v}"));
        Ok(v)
    }

    fn usize(&mut self, flag: Option<usize>, key: &str, default: Option<usize>) -> CliResult<usize> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.usize(key)? {
                Some(v) => v,
                None => default.ok_or_else(|| missing(key))?,
            },
        };
        self.record(key, format!("{v}"));
        Ok(v)
    }

    fn u64(&mut self, flag: Option<u64>, key: &str, default: u64) -> CliResult<u64> {
        let v = match flag {
            Some(v) => v,
            None => self.file.u64(key)?.unwrap_or(default),
        };
        self.record(key, format!("{v}"));
        Ok(v)
    }

    fn flag_or_key(&mut self, flag: bool, key: &str, default: bool) -> CliResult<bool> {
        let v = if flag {
            true
        } else {
            self.file.bool(key)?.unwrap_or(default)
        };
        self.record(key, format!("{v}"));
        Ok(v)
    }

    /// Regression spectrum: `--atoms` literal > `--spectrum` preset > file
    /// density keys > the given preset default.
    fn density(
        &mut self,
        atoms: Option<&str>,
        preset: Option<SpectrumPreset>,
        default: SpectrumPreset,
    ) -> CliResult<SpectralDensity> {
        let density = if let Some(literal) = atoms {
            parse_atoms(literal)?
        } else if let Some(p) = preset {
            preset_density(p)
        } else if let Some(d) = self.file.regression_density()? {
            d
        } else {
            preset_density(default)
        };
        let (key, value) = density_literal(&density);
        self.record(key, value);
        Ok(density)
    }

    fn dists(&mut self, flag: Option<&str>, default: &str) -> CliResult<Vec<EntryDistribution>> {
        let spec = match flag {
            Some(s) => s.to_string(),
            None => self
                .file
                .raw("run.distributions")
                .unwrap_or(default)
                .to_string(),
        };
        let dists = parse_dists(&spec)?;
        self.record(
            "run.distributions",
            dists.iter().map(|d| dist_name(*d)).collect::<Vec<_>>().join(","),
        );
        Ok(dists)
    }

    fn grid(&mut self, flag: Option<&str>, default: &[f64]) -> CliResult<Vec<f64>> {
        let grid = match flag.or_else(|| self.file.raw("sweep.grid")) {
            Some(spec) => parse_grid(spec)?,
            None => default.to_vec(),
        };
        self.record(
            "sweep.grid",
            grid.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        Ok(grid)
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!(
        "missing required value `{key}` (pass the flag or set it in the config file)"
    ))
}

fn preset_density(p: SpectrumPreset) -> SpectralDensity {
    match p {
        SpectrumPreset::Single => SpectralDensity::single_atom(1.0).expect("valid preset"),
        SpectrumPreset::Bilevel => {
            SpectralDensity::atoms(vec![(1.0, 0.3), (5.0, 0.7)]).expect("valid preset")
        }
        SpectrumPreset::Uniform => SpectralDensity::uniform(1.0, 5.0).expect("valid preset"),
    }
}

fn density_literal(density: &SpectralDensity) -> (&'static str, String) {
    match density {
        SpectralDensity::Uniform { lower, upper, .. } => {
            ("regression.uniform", format!("[{lower}, {upper}]"))
        }
        SpectralDensity::Atoms(pairs) | SpectralDensity::Quadrature(pairs) => (
            "regression.atoms",
            format!(
                "[{}]",
                pairs
                    .iter()
                    .map(|(l, w)| format!("[{l}, {w}]"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        ),
    }
}

pub(crate) fn parse_dists(spec: &str) -> Result<Vec<EntryDistribution>, ConfigError> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(EntryDistribution::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let d = match part.trim().to_ascii_lowercase().as_str() {
            "gauss" | "gaussian" => EntryDistribution::StandardGaussian,
            "ber" | "bernoulli" => EntryDistribution::CenteredBernoulli,
            "chi" | "chi2" | "chisquare" => EntryDistribution::CenteredChiSquare,
            other => {
                return Err(ConfigError(format!(
                    "unknown distribution `{other}` (expected gauss, ber, chi, or all)"
                )))
            }
        };
        if out.contains(&d) {
            return Err(ConfigError(format!("distribution `{}` listed twice", dist_name(d))));
        }
        out.push(d);
    }
    if out.is_empty() {
        return Err(ConfigError("empty distribution list".into()));
    }
    Ok(out)
}

fn dist_name(d: EntryDistribution) -> &'static str {
    match d {
        EntryDistribution::StandardGaussian => "gauss",
        EntryDistribution::CenteredBernoulli => "ber",
        EntryDistribution::CenteredChiSquare => "chi",
    }
}

/// Grid syntax: comma list `1.25,2,4` or inclusive linear range
/// `start:stop:count`.
pub(crate) fn parse_grid(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |why: &str| ConfigError(format!("grid `{spec}`: {why}"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:count"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad("bad start"))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad("bad stop"))?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad("bad count"))?;
        if count == 0 {
            return Err(bad("count must be at least 1"));
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        let step = (stop - start) / (count - 1) as f64;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    let values: Result<Vec<f64>, _> = spec
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad("bad number")))
        .collect();
    let values = values?;
    if values.is_empty() {
        return Err(bad("empty"));
    }
    Ok(values)
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

pub fn predict_reg(args: &PredictRegArgs, ctx: &Context) -> CliResult<()> {
    let mut r = Resolver::new(&ctx.file);
    let kappa = r.f64(args.kappa, "regression.kappa", None)?;
    let sigma = r.f64(args.sigma, "regression.sigma", None)?;
    let ea = r.f64(args.ea, "regression.ea", None)?;
    let density = r.density(args.atoms.as_deref(), args.spectrum, SpectrumPreset::Single)?;

    let ens = RegressionEnsemble::new(kappa, sigma * sigma, ea, density)?;
    let pred = ens.predict()?;
    let benefit = transfer_benefit(sigma, ea)?;

    let mut record = String::new();
    record.push_str(&format!("theta = {}\n", pred.theta));
    record.push_str(&format!("t = {}\n", pred.t));
    record.push_str(&format!("e_p = {}\n", pred.e_p));
    record.push_str(&format!("lower_bound = {}\n", pred.lower_bound));
    record.push_str(&format!("transfer_helps = {}\n", benefit.helps));
    record.push_str(&format!("best_error = {}\n", benefit.best_error));
    match benefit.argmin_kappa {
        Some(k) => record.push_str(&format!("argmin_kappa = {k}\n")),
        None => record.push_str("argmin_kappa = none\n"),
    }
    print!("{record}");
    emit_record(args.record.as_deref(), &record, &r.manifest, ctx)
}

pub fn predict_class(args: &PredictClassArgs, ctx: &Context) -> CliResult<()> {
    let mut r = Resolver::new(&ctx.file);
    let general_flags = args.n.is_some() || args.d.is_some() || args.sigma2.is_some();
    let scalar_flags = args.kappa.is_some() || args.rho.is_some();
    if general_flags && scalar_flags {
        return Err(CliError::Config(
            "choose one route: scalar (--kappa, --rho, --ea) or general (--n, --d, --sigma2)"
                .into(),
        ));
    }
    let general = general_flags
        || (!scalar_flags && ctx.file.raw("classification.n").is_some());

    let mut record = String::new();
    if general {
        if args.ea.is_some() && args.t_eta.is_some() {
            return Err(CliError::Config(
                "--ea and --t-eta both pin the warm start; pass only one".into(),
            ));
        }
        let n = r.usize(args.n, "classification.n", None)?;
        let d = r.usize(args.d, "classification.d", None)?;
        let sigma2 = r.f64(args.sigma2, "classification.sigma2", None)?;
        let rr = r.f64(args.r, "classification.r", Some(0.9))?;
        let t_star = r.f64(args.t_star, "classification.t_star", Some(1.0))?;
        let ens = if args.ea.is_some() || ctx.file.raw("classification.ea").is_some() {
            let ea = r.f64(args.ea, "classification.ea", None)?;
            let spectra = JointSpectralDensity::isotropic(sigma2, d)?;
            ClassificationEnsemble::from_error_target(n, d, rr, t_star, ea, spectra)?
        } else {
            let t_eta = r.f64(args.t_eta, "classification.t_eta", Some(1.0))?;
            ClassificationEnsemble::isotropic(n, d, rr, t_star, t_eta, sigma2)?
        };
        let pred = predict_class_error(&ens)?;
        let rho = n as f64 * (1.0 - rr) / sigma2;
        record.push_str(&format!("theta = {}\n", pred.theta));
        record.push_str(&format!("alpha = {}\n", pred.alpha));
        record.push_str(&format!("gamma = {}\n", pred.gamma));
        record.push_str(&format!("tau2 = {}\n", pred.tau2));
        record.push_str(&format!("error = {}\n", pred.error));
        record.push_str(&format!("ea = {}\n", w0_class_error(&ens)?));
        record.push_str(&format!(
            "oracle_error = {}\n",
            oracle_class_error(ens.spectra(), rr)?
        ));
        record.push_str(&format!("rho = {rho}\n"));
        record.push_str(&format!("regime = {}\n", regime(rho)?));
    } else {
        let kappa = r.f64(args.kappa, "classification.kappa", None)?;
        let rho = r.f64(args.rho, "classification.rho", None)?;
        let ea = r.f64(args.ea, "classification.ea", None)?;
        let pred = predict_class_error_scalar(kappa, rho, ea)?;
        record.push_str(&format!("theta = {}\n", pred.theta));
        record.push_str(&format!("alpha = {}\n", pred.alpha));
        record.push_str(&format!("gamma = {}\n", pred.gamma));
        record.push_str(&format!("tau2 = {}\n", pred.tau2));
        record.push_str(&format!("error = {}\n", pred.error));
        record.push_str(&format!(
            "oracle_error = {}\n",
            q_tail((kappa * rho / 2.0).sqrt())
        ));
        record.push_str(&format!("regime = {}\n", regime(rho)?));
    }
    print!("{record}");
    emit_record(args.record.as_deref(), &record, &r.manifest, ctx)
}

/// Writes the printed record (and a manifest beside it) when `--record` was
/// given.
fn emit_record(
    path: Option<&Path>,
    record: &str,
    manifest: &[(String, String)],
    ctx: &Context,
) -> CliResult<()> {
    if let Some(path) = path {
        let full = ctx.out_dir.join(path);
        ensure_out_dir(&full)?;
        std::fs::write(&full, record)?;
        let manifest_path = full.with_extension("manifest");
        std::fs::write(&manifest_path, render_manifest(&ctx.command_line, manifest))?;
        eprintln!("wrote {} and {}", full.display(), manifest_path.display());
    }
    Ok(())
}

fn ensure_out_dir(file: &Path) -> CliResult<()> {
    if let Some(dir) = file.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn summarize_trials(reports: &[TrialReport], theory: f64, metric_name: &str) -> String {
    let m = reports.len() as f64;
    let mean = reports.iter().map(|t| t.metric).sum::<f64>() / m;
    let stderr = if reports.len() >= 2 {
        let var = reports
            .iter()
            .map(|t| (t.metric - mean).powi(2))
            .sum::<f64>()
            / (m - 1.0);
        (var / m).sqrt()
    } else {
        0.0
    };
    let gap_se = if stderr > 0.0 {
        format!(" ({:.2} stderr)", (mean - theory).abs() / stderr)
    } else {
        String::new()
    };
    format!(
        "mean {metric_name} = {mean} +/- {stderr} over {} trials\ntheory {metric_name} = {theory}, gap = {}{gap_se}\n",
        reports.len(),
        (mean - theory).abs(),
    )
}

fn write_trials_csv(path: &Path, reports: &[TrialReport]) -> CliResult<()> {
    let mut out = String::from("trial,seed,dist,metric,init_metric,alpha,feasibility,solve_seconds\n");
    for (i, t) in reports.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{},{},{}\n",
            t.seed,
            dist_name(t.distribution),
            t.metric,
            t.init_metric,
            t.alpha.map_or(String::from(""), |a| format!("{a}")),
            t.feasibility,
            t.solve_seconds
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn simulate_reg(args: &SimulateRegArgs, ctx: &Context) -> CliResult<()> {
    let mut r = Resolver::new(&ctx.file);
    let n = r.usize(args.n, "regression.n", Some(500))?;
    let d = r.usize(args.d, "regression.d", Some(1000))?;
    let sigma = r.f64(args.sigma, "regression.sigma", Some(0.15))?;
    let ea = r.f64(args.ea, "regression.ea", Some(1.0))?;
    let density = r.density(args.atoms.as_deref(), args.spectrum, SpectrumPreset::Bilevel)?;
    let entry_noise = r.flag_or_key(args.entry_noise, "regression.entry_noise", false)?;
    let trials = r.usize(args.trials, "run.trials", Some(20))?;
    let seed = r.u64(args.seed, "run.seed", 0)?;
    let dist = match &args.dist {
        Some(s) => {
            let list = parse_dists(s)?;
            if list.len() != 1 {
                return Err(CliError::Config("--dist takes a single distribution".into()));
            }
            list[0]
        }
        None => EntryDistribution::StandardGaussian,
    };
    r.record("run.distributions", dist_name(dist).to_string());
    if n == 0 || n >= d {
        return Err(CliError::Config(format!(
            "need 0 < n < d for interpolation, got n = {n}, d = {d}"
        )));
    }
    r.record("sweep.mode", "reg".into());

    use rayon::prelude::*;
    let specs: Vec<RegressionInstanceSpec> = (0..trials)
        .map(|i| RegressionInstanceSpec {
            n,
            d,
            density: density.clone(),
            sigma,
            e_a: ea,
            entry: dist,
            entry_noise,
            seed: derive_trial_seed(seed, i as u64, dist.tag()),
        })
        .collect();
    let reports: Result<Vec<TrialReport>, _> =
        specs.par_iter().map(run_regression_trial).collect();
    let reports = reports?;

    let kappa = d as f64 / n as f64;
    let pred = RegressionEnsemble::new(kappa, sigma * sigma, ea, density)?.predict()?;
    for (i, t) in reports.iter().enumerate() {
        println!(
            "trial {i}: e_gen = {} (w0 = {}, feasibility = {:.2e}, {:.3}s)",
            t.metric, t.init_metric, t.feasibility, t.solve_seconds
        );
    }
    print!("{}", summarize_trials(&reports, pred.e_p, "e_gen"));
    println!("lower_bound = {}", pred.lower_bound);

    let name = args.out.clone().unwrap_or_else(|| "simulate_reg.csv".into());
    let path = ctx.out_dir.join(name);
    ensure_out_dir(&path)?;
    write_trials_csv(&path, &reports)?;
    let manifest_path = path.with_extension("manifest");
    std::fs::write(&manifest_path, render_manifest(&ctx.command_line, &r.manifest))?;
    println!("wrote {} and {}", path.display(), manifest_path.display());
    Ok(())
}

pub fn simulate_class(args: &SimulateClassArgs, ctx: &Context) -> CliResult<()> {
    let mut r = Resolver::new(&ctx.file);
    let n = r.usize(args.n, "classification.n", Some(500))?;
    let d = r.usize(args.d, "classification.d", Some(1000))?;
    let sigma2 = r.f64(args.sigma2, "classification.sigma2", Some(50.0))?;
    let rr = r.f64(args.r, "classification.r", Some(0.9))?;
    let t_star = r.f64(args.t_star, "classification.t_star", Some(1.0))?;
    let t_eta = r.f64(args.t_eta, "classification.t_eta", Some(1.0))?;
    let trials = r.usize(args.trials, "run.trials", Some(20))?;
    let seed = r.u64(args.seed, "run.seed", 0)?;
    let dist = match &args.dist {
        Some(s) => {
            let list = parse_dists(s)?;
            if list.len() != 1 {
                return Err(CliError::Config("--dist takes a single distribution".into()));
            }
            list[0]
        }
        None => EntryDistribution::StandardGaussian,
    };
    r.record("run.distributions", dist_name(dist).to_string());
    r.record("sweep.mode", "class".into());

    use rayon::prelude::*;
    let specs: Vec<ClassificationInstanceSpec> = (0..trials)
        .map(|i| ClassificationInstanceSpec {
            n,
            d,
            r: rr,
            t_star,
            t_eta,
            covariances: ClassCovariances::Isotropic(sigma2),
            entry: dist,
            seed: derive_trial_seed(seed, i as u64, dist.tag()),
        })
        .collect();
    let reports: Result<Vec<TrialReport>, _> =
        specs.par_iter().map(run_classification_trial).collect();
    let reports = reports?;

    let ens = ClassificationEnsemble::isotropic(n, d, rr, t_star, t_eta, sigma2)?;
    let pred = predict_class_error(&ens)?;
    for (i, t) in reports.iter().enumerate() {
        println!(
            "trial {i}: error = {} (w0 = {}, alpha = {}, {:.3}s)",
            t.metric,
            t.init_metric,
            t.alpha.unwrap_or(f64::NAN),
            t.solve_seconds
        );
    }
    print!("{}", summarize_trials(&reports, pred.error, "error"));
    println!("ea_theory = {}", w0_class_error(&ens)?);
    println!("oracle_error = {}", oracle_class_error(ens.spectra(), rr)?);

    let name = args.out.clone().unwrap_or_else(|| "simulate_class.csv".into());
    let path = ctx.out_dir.join(name);
    ensure_out_dir(&path)?;
    write_trials_csv(&path, &reports)?;
    let manifest_path = path.with_extension("manifest");
    std::fs::write(&manifest_path, render_manifest(&ctx.command_line, &r.manifest))?;
    println!("wrote {} and {}", path.display(), manifest_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep / universality
// ---------------------------------------------------------------------------

fn parse_var(name: &str) -> Result<SweepVariable, ConfigError> {
    match name.trim().to_ascii_lowercase().as_str() {
        "kappa" => Ok(SweepVariable::Kappa),
        "rho" => Ok(SweepVariable::Rho),
        "sigma" => Ok(SweepVariable::Sigma),
        other => Err(ConfigError(format!(
            "unknown sweep variable `{other}` (expected kappa, rho, or sigma)"
        ))),
    }
}

pub fn sweep(args: &SweepArgs, ctx: &Context, universality: bool) -> CliResult<()> {
    let mut r = Resolver::new(&ctx.file);
    let mode = match args.mode {
        Some(m) => m,
        None => match ctx.file.raw("sweep.mode") {
            Some("reg") => SweepMode::Reg,
            Some("class") => SweepMode::Class,
            Some(other) => {
                return Err(CliError::Config(format!(
                    "sweep.mode must be `reg` or `class`, got `{other}`"
                )))
            }
            None => return Err(missing("sweep.mode")),
        },
    };
    r.record(
        "sweep.mode",
        match mode {
            SweepMode::Reg => "reg".into(),
            SweepMode::Class => "class".into(),
        },
    );
    let var = match args.var.as_deref().or_else(|| ctx.file.raw("sweep.var")) {
        Some(name) => parse_var(name)?,
        None => SweepVariable::Kappa,
    };
    r.record("sweep.var", format!("{var}"));
    let default_grid: &[f64] = match var {
        SweepVariable::Kappa => &KAPPA_GRID,
        SweepVariable::Rho => &RHO_GRID,
        SweepVariable::Sigma => &SIGMA_GRID,
    };
    let grid = r.grid(args.grid.as_deref(), default_grid)?;
    let trials = r.usize(args.trials, "run.trials", Some(20))?;
    let seed = r.u64(args.seed, "run.seed", 0)?;
    let dists = r.dists(
        args.dists.as_deref(),
        if universality { "all" } else { "gauss" },
    )?;
    if universality && dists.len() < 2 {
        return Err(CliError::Config(
            "universality needs at least two entry distributions".into(),
        ));
    }

    let (table, default_name) = match mode {
        SweepMode::Reg => {
            let d = r.usize(args.d, "regression.d", Some(1000))?;
            let kappa = r.f64(args.kappa, "regression.kappa", Some(2.0))?;
            let sigma = r.f64(args.sigma, "regression.sigma", Some(0.15))?;
            let ea = r.f64(args.ea, "regression.ea", Some(1.0))?;
            let density =
                r.density(args.atoms.as_deref(), args.spectrum, SpectrumPreset::Bilevel)?;
            let entry_noise = r.flag_or_key(args.entry_noise, "regression.entry_noise", false)?;
            let base = RegressionSweepBase {
                d,
                kappa,
                sigma,
                e_a: ea,
                density: density.clone(),
                entry_noise,
            };
            let name = match var {
                SweepVariable::Sigma => "reg_sigma_sweep.dat".to_string(),
                _ => regression_dat_name(sigma, &density),
            };
            (
                run_regression_sweep(&base, var, &grid, trials, &dists, seed)?,
                name,
            )
        }
        SweepMode::Class => {
            let d = r.usize(args.d, "classification.d", Some(1000))?;
            let kappa = r.f64(args.kappa, "classification.kappa", Some(2.0))?;
            let rho = r.f64(args.rho, "classification.rho", Some(1.0))?;
            let rr = r.f64(args.r, "classification.r", Some(0.9))?;
            let t_star = r.f64(args.t_star, "classification.t_star", Some(1.0))?;
            let t_eta = r.f64(args.t_eta, "classification.t_eta", Some(1.0))?;
            let base = ClassificationSweepBase {
                d,
                kappa,
                rho,
                r: rr,
                t_star,
                t_eta,
            };
            let name = match var {
                SweepVariable::Rho => classification_dat_name(SweepVariable::Rho, kappa, t_eta),
                _ => classification_dat_name(SweepVariable::Kappa, rho, t_eta),
            };
            (
                run_classification_sweep(&base, var, &grid, trials, &dists, seed)?,
                name,
            )
        }
    };

    let name = args
        .out
        .clone()
        .or_else(|| ctx.file.raw("sweep.out").map(String::from))
        .unwrap_or(default_name);
    r.record("sweep.out", name.clone());

    print!("{}", render_dat(&table));
    write_sweep_outputs(&table, &name, &r.manifest, ctx)?;

    if universality {
        let report = universality_report(&table)?;
        print!("{report}");
    }
    Ok(())
}

/// Writes the `.dat`, `.csv`, and `.manifest` files for one sweep table and
/// prints where they went; failed points are surfaced on the console.
fn write_sweep_outputs(
    table: &SweepTable,
    dat_name: &str,
    manifest: &[(String, String)],
    ctx: &Context,
) -> CliResult<Vec<(String, SweepKind, usize)>> {
    let dat_path = ctx.out_dir.join(dat_name);
    ensure_out_dir(&dat_path)?;
    write_dat(table, &dat_path)?;
    let csv_path = dat_path.with_extension("csv");
    write_csv(table, &csv_path)?;

    let mut manifest_text = render_manifest(&ctx.command_line, manifest);
    let failed: Vec<String> = table
        .rows
        .iter()
        .filter(|row| row.failures > 0)
        .map(|row| {
            format!(
                "# failures at {} = {}: {} of {} trials ({})",
                table.variable,
                row.x,
                row.failures,
                table.trials * table.distributions.len(),
                row.failure_reason.as_deref().unwrap_or("unknown")
            )
        })
        .collect();
    if !failed.is_empty() {
        manifest_text.push_str(&failed.join("\n"));
        manifest_text.push('\n');
        for line in &failed {
            eprintln!("{}", line.trim_start_matches("# "));
        }
    }
    let manifest_path = dat_path.with_extension("manifest");
    std::fs::write(&manifest_path, manifest_text)?;

    println!(
        "wrote {}, {}, {}",
        dat_path.display(),
        csv_path.display(),
        manifest_path.display()
    );
    Ok(vec![(
        dat_name.to_string(),
        table.kind,
        table.distributions.len(),
    )])
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

pub fn reproduce(args: &ReproduceArgs, ctx: &Context) -> CliResult<()> {
    let mut files = Vec::new();
    match args.figure {
        FigureId::Fig1 | FigureId::Fig2 => {
            let density = if matches!(args.figure, FigureId::Fig1) {
                preset_density(SpectrumPreset::Bilevel)
            } else {
                preset_density(SpectrumPreset::Uniform)
            };
            for (i, &sigma) in SIGMA_GRID.iter().enumerate() {
                let base = RegressionSweepBase {
                    d: args.dim,
                    kappa: 2.0,
                    sigma,
                    e_a: 1.0,
                    density: density.clone(),
                    entry_noise: false,
                };
                let seed = args.seed + i as u64;
                let table = run_regression_sweep(
                    &base,
                    SweepVariable::Kappa,
                    &KAPPA_GRID,
                    args.trials,
                    &EntryDistribution::ALL,
                    seed,
                )?;
                let name = regression_dat_name(sigma, &density);
                println!("# {name}");
                print!("{}", render_dat(&table));
                let manifest = sweep_manifest_reg(&base, seed, args.trials, &KAPPA_GRID, &name);
                files.extend(write_sweep_outputs(&table, &name, &manifest, ctx)?);
                print!("{}", universality_report(&table)?);
            }
        }
        FigureId::Fig3 => {
            let runs: [(SweepVariable, f64, f64, &[f64]); 3] = [
                (SweepVariable::Kappa, 1.0, 1.0, &KAPPA_GRID),
                (SweepVariable::Kappa, 2.0, 0.5, &KAPPA_GRID),
                (SweepVariable::Rho, 2.0, 1.0, &RHO_GRID),
            ];
            for (i, &(var, fixed, t_eta, grid)) in runs.iter().enumerate() {
                let base = ClassificationSweepBase {
                    d: args.dim,
                    kappa: if var == SweepVariable::Rho { fixed } else { 2.0 },
                    rho: if var == SweepVariable::Kappa { fixed } else { 1.0 },
                    r: 0.9,
                    t_star: 1.0,
                    t_eta,
                };
                let seed = args.seed + i as u64;
                let table = run_classification_sweep(
                    &base,
                    var,
                    grid,
                    args.trials,
                    &EntryDistribution::ALL,
                    seed,
                )?;
                let name = classification_dat_name(var, fixed, t_eta);
                println!("# {name}");
                print!("{}", render_dat(&table));
                let manifest = sweep_manifest_class(&base, var, seed, args.trials, grid, &name);
                files.extend(write_sweep_outputs(&table, &name, &manifest, ctx)?);
                print!("{}", universality_report(&table)?);
            }
        }
    }

    if args.gnuplot {
        let script_name = match args.figure {
            FigureId::Fig1 => "fig1.gp",
            FigureId::Fig2 => "fig2.gp",
            FigureId::Fig3 => "fig3.gp",
        };
        let path = ctx.out_dir.join(script_name);
        std::fs::write(&path, gnuplot_script(&files))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Manifest entries for a reproduced regression sweep: a config that replays
/// the identical run through `transferlab sweep`.
fn sweep_manifest_reg(
    base: &RegressionSweepBase,
    seed: u64,
    trials: usize,
    grid: &[f64],
    out: &str,
) -> Vec<(String, String)> {
    let (dk, dv) = density_literal(&base.density);
    vec![
        ("sweep.mode".into(), "reg".into()),
        ("sweep.var".into(), "kappa".into()),
        ("sweep.grid".into(), join_grid(grid)),
        ("sweep.out".into(), out.into()),
        ("run.seed".into(), format!("{seed}")),
        ("run.trials".into(), format!("{trials}")),
        ("run.distributions".into(), "gauss,ber,chi".into()),
        ("regression.d".into(), format!("{}", base.d)),
        ("regression.kappa".into(), format!("{}", base.kappa)),
        ("regression.sigma".into(), format!("{}", base.sigma)),
        ("regression.ea".into(), format!("{}", base.e_a)),
        ("regression.entry_noise".into(), format!("{}", base.entry_noise)),
        (dk.into(), dv),
    ]
}

/// Manifest entries for a reproduced classification sweep.
fn sweep_manifest_class(
    base: &ClassificationSweepBase,
    var: SweepVariable,
    seed: u64,
    trials: usize,
    grid: &[f64],
    out: &str,
) -> Vec<(String, String)> {
    vec![
        ("sweep.mode".into(), "class".into()),
        ("sweep.var".into(), format!("{var}")),
        ("sweep.grid".into(), join_grid(grid)),
        ("sweep.out".into(), out.into()),
        ("run.seed".into(), format!("{seed}")),
        ("run.trials".into(), format!("{trials}")),
        ("run.distributions".into(), "gauss,ber,chi".into()),
        ("classification.d".into(), format!("{}", base.d)),
        ("classification.kappa".into(), format!("{}", base.kappa)),
        ("classification.rho".into(), format!("{}", base.rho)),
        ("classification.r".into(), format!("{}", base.r)),
        ("classification.t_star".into(), format!("{}", base.t_star)),
        ("classification.t_eta".into(), format!("{}", base.t_eta)),
    ]
}

fn join_grid(grid: &[f64]) -> String {
    grid.iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax_supports_ranges_and_lists() {
        assert_eq!(parse_grid("1.25,2,4").unwrap(), vec![1.25, 2.0, 4.0]);
        let g = parse_grid("1.25:5:8").unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g[0], 1.25);
        assert_eq!(g[7], 5.0);
        assert_eq!(parse_grid("3:7:1").unwrap(), vec![3.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn distribution_lists_parse_and_reject_duplicates() {
        assert_eq!(parse_dists("all").unwrap().len(), 3);
        assert_eq!(
            parse_dists("Gauss, chi").unwrap(),
            vec![
                EntryDistribution::StandardGaussian,
                EntryDistribution::CenteredChiSquare
            ]
        );
        assert!(parse_dists("gauss,gauss").is_err());
        assert!(parse_dists("cauchy").is_err());
    }
}
