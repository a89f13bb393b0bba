//! Command implementations: each one loads the scenario, runs the pipeline
//! and writes CSV/JSON artifacts plus a run report with the parameter echo,
//! warnings and a file manifest.

use crate::config::{ScenarioConfig, TimeGridSpec};
use lambda_dyn::dynamics::{Dynamics, TimeGrid};
use lambda_dyn::reservoir::{self, ReservoirConstants};
use lambda_dyn::resonance::{perturbative_energies, Sector};
use lambda_dyn::validate;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration (exit 2).
    Config(String),
    /// Numerical failure (exit 3).
    Numeric(String),
    /// Validation criteria failed (exit 1).
    Validation,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Validation => write!(f, "validation failed"),
        }
    }
}

fn core_err(e: lambda_dyn::Error) -> CliError {
    match e {
        lambda_dyn::Error::Domain(m) => CliError::Config(m),
        lambda_dyn::Error::Numeric(m) | lambda_dyn::Error::Inconsistency(m) => {
            CliError::Numeric(m)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// 17 significant digits, reproducible across platforms.
fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    rows: usize,
}

#[derive(Serialize)]
pub struct RunReport {
    command: String,
    parameters: ScenarioConfig,
    regime_ok: bool,
    timings_ms: Vec<(String, f64)>,
    warnings: Vec<String>,
    outputs: Vec<FileEntry>,
}

impl RunReport {
    fn new(command: &str, cfg: &ScenarioConfig) -> Self {
        Self {
            command: command.to_string(),
            parameters: cfg.clone(),
            regime_ok: cfg.system_params().regime_ok(),
            timings_ms: Vec::new(),
            warnings: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn add_file(&mut self, path: &Path, rows: usize) {
        self.outputs.push(FileEntry {
            path: path.display().to_string(),
            rows,
        });
    }

    fn finish(&mut self, out_dir: &Path) -> Result<(), CliError> {
        if !self.regime_ok {
            self.warnings.push(
                "parameters outside the operating regime σ < λ² < Δ; \
                 resonance expansions may be inaccurate"
                    .to_string(),
            );
        }
        for w in &self.warnings {
            eprintln!("warning: {w}");
        }
        let path = out_dir.join("run_report.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Numeric(format!("report serialization: {e}")))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

fn write_file(report: &mut RunReport, path: &PathBuf, content: &str, rows: usize) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    report.add_file(path, rows);
    Ok(())
}

fn build_dynamics(cfg: &ScenarioConfig) -> Result<Dynamics, CliError> {
    let params = cfg.system_params();
    let ff = cfg.form_factor().map_err(CliError::Config)?;
    Dynamics::new(params, ff).map_err(core_err)
}

fn resolve_grid(cfg: &ScenarioConfig, dynamics: &Dynamics) -> TimeGrid {
    match &cfg.run.time_grid {
        TimeGridSpec::Auto => dynamics.default_grid(),
        TimeGridSpec::Geometric {
            t_min,
            t_max,
            points,
        } => TimeGrid::Geometric {
            t_min: *t_min,
            t_max: *t_max,
            points: *points,
        },
        TimeGridSpec::Linear {
            t_min,
            t_max,
            points,
        } => TimeGrid::Linear {
            t_min: *t_min,
            t_max: *t_max,
            points: *points,
        },
        TimeGridSpec::Explicit { times } => TimeGrid::Explicit(times.clone()),
    }
}

/// `resonances`: the nine-resonance table plus the numeric-vs-perturbative
/// comparison.
pub fn cmd_resonances(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<(), CliError> {
    let mut report = RunReport::new("resonances", cfg);
    let start = Instant::now();
    let dynamics = build_dynamics(cfg)?;
    report
        .timings_ms
        .push(("setup".into(), start.elapsed().as_secs_f64() * 1e3));

    let start = Instant::now();
    let set = dynamics.resonances();
    let mut csv = String::from("sector,index,re_eps,im_eps\n");
    for d in &set.data {
        writeln!(
            csv,
            "{},{},{},{}",
            d.sector.label(),
            d.index,
            fmt17(d.energy.re),
            fmt17(d.energy.im)
        )
        .unwrap();
    }
    let path = out_dir.join("resonances.csv");
    write_file(&mut report, &path, &csv, set.data.len())?;

    // comparison table against the leading-order formulas
    let pert = perturbative_energies(dynamics.params(), dynamics.constants());
    let mut cmp = String::from("sector,index,re_num,im_num,re_pert,im_pert,abs_err,rel_err\n");
    for d in &set.data {
        let target = match d.sector {
            Sector::Zero => pert.sector0[d.index - 1],
            Sector::Plus => pert.sector_plus[d.index - 1],
            Sector::Minus => pert.sector_minus[d.index - 1],
        };
        let abs = (d.energy - target).norm();
        let rel = if d.energy.norm() > 0.0 {
            abs / d.energy.norm()
        } else {
            abs
        };
        writeln!(
            cmp,
            "{},{},{},{},{},{},{},{}",
            d.sector.label(),
            d.index,
            fmt17(d.energy.re),
            fmt17(d.energy.im),
            fmt17(target.re),
            fmt17(target.im),
            fmt17(abs),
            fmt17(rel)
        )
        .unwrap();
    }
    let path = out_dir.join("resonances_compare.csv");
    write_file(&mut report, &path, &cmp, set.data.len())?;

    if format == OutputFormat::Json {
        #[derive(Serialize)]
        struct JsonDatum {
            sector: i8,
            index: usize,
            energy: [f64; 2],
            right: Vec<[f64; 2]>,
            left: Vec<[f64; 2]>,
        }
        let data: Vec<JsonDatum> = set
            .data
            .iter()
            .map(|d| JsonDatum {
                sector: d.sector.label(),
                index: d.index,
                energy: [d.energy.re, d.energy.im],
                right: d.right.iter().map(|z| [z.re, z.im]).collect(),
                left: d.left.iter().map(|z| [z.re, z.im]).collect(),
            })
            .collect();
        let path = out_dir.join("resonances.json");
        let text = serde_json::to_string_pretty(&data)
            .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
        write_file(&mut report, &path, &text, data.len())?;
    }
    report
        .timings_ms
        .push(("emit".into(), start.elapsed().as_secs_f64() * 1e3));
    report.finish(out_dir)
}

/// `evolve`: trajectory CSV with the fixed column schema, optionally the
/// contribution of a single resonance term.
pub fn cmd_evolve(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    format: OutputFormat,
    term: Option<(i8, usize)>,
) -> Result<(), CliError> {
    let mut report = RunReport::new("evolve", cfg);
    let start = Instant::now();
    let dynamics = build_dynamics(cfg)?;
    let rho0 = cfg.initial_state().map_err(CliError::Config)?;
    let grid = resolve_grid(cfg, &dynamics);
    report
        .timings_ms
        .push(("setup".into(), start.elapsed().as_secs_f64() * 1e3));

    let start = Instant::now();
    if let Some((sector_label, index)) = term {
        let sector = match sector_label {
            0 => Sector::Zero,
            1 => Sector::Plus,
            -1 => Sector::Minus,
            other => {
                return Err(CliError::Config(format!(
                    "--term sector must be -1, 0 or 1, got {other}"
                )))
            }
        };
        let times = grid.times().map_err(core_err)?;
        let mut csv = String::from("t");
        for i in 1..=3 {
            for j in 1..=3 {
                write!(csv, ",c{i}{j}_re,c{i}{j}_im").unwrap();
            }
        }
        csv.push('\n');
        for &t in &times {
            let m = dynamics
                .mode_contribution(&rho0, sector, index, t)
                .map_err(core_err)?;
            write!(csv, "{}", fmt17(t)).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    write!(csv, ",{},{}", fmt17(m.data[i][j].re), fmt17(m.data[i][j].im))
                        .unwrap();
                }
            }
            csv.push('\n');
        }
        let path = out_dir.join(format!("term_{sector_label}_{index}.csv"));
        write_file(&mut report, &path, &csv, times.len())?;
        report
            .timings_ms
            .push(("evolve".into(), start.elapsed().as_secs_f64() * 1e3));
        return report.finish(out_dir);
    }

    let traj = dynamics.trajectory(&rho0, &grid).map_err(core_err)?;
    report.warnings.extend(traj.warnings.iter().cloned());
    let mut csv = String::from(
        "t,rho11_re,rho12_re,rho12_im,rho13_re,rho13_im,rho22_re,rho23_re,rho23_im,rho33_re,\
         dist_gibbs,dist_qstat,dist_final,p_donor,min_eig\n",
    );
    for (k, &t) in traj.times.iter().enumerate() {
        let s = &traj.states[k];
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt17(t),
            fmt17(s.entry(0, 0).re),
            fmt17(s.entry(0, 1).re),
            fmt17(s.entry(0, 1).im),
            fmt17(s.entry(0, 2).re),
            fmt17(s.entry(0, 2).im),
            fmt17(s.entry(1, 1).re),
            fmt17(s.entry(1, 2).re),
            fmt17(s.entry(1, 2).im),
            fmt17(s.entry(2, 2).re),
            fmt17(traj.dist_gibbs[k]),
            fmt17(traj.dist_qstat[k]),
            fmt17(traj.dist_final[k]),
            fmt17(traj.p_donor[k]),
            fmt17(traj.min_eig[k])
        )
        .unwrap();
    }
    let path = out_dir.join("trajectory.csv");
    write_file(&mut report, &path, &csv, traj.times.len())?;

    if format == OutputFormat::Json {
        #[derive(Serialize)]
        struct JsonTrajectory<'a> {
            times: &'a [f64],
            states: &'a [lambda_dyn::system::DensityMatrix],
            dist_gibbs: &'a [f64],
            dist_qstat: &'a [f64],
            dist_final: &'a [f64],
            p_donor: &'a [f64],
            min_eig: &'a [f64],
            trace_dev: &'a [f64],
            herm_dev: &'a [f64],
        }
        let text = serde_json::to_string_pretty(&JsonTrajectory {
            times: &traj.times,
            states: &traj.states,
            dist_gibbs: &traj.dist_gibbs,
            dist_qstat: &traj.dist_qstat,
            dist_final: &traj.dist_final,
            p_donor: &traj.p_donor,
            min_eig: &traj.min_eig,
            trace_dev: &traj.trace_dev,
            herm_dev: &traj.herm_dev,
        })
        .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
        let path = out_dir.join("trajectory.json");
        write_file(&mut report, &path, &text, traj.times.len())?;
    }
    report
        .timings_ms
        .push(("evolve".into(), start.elapsed().as_secs_f64() * 1e3));
    report.finish(out_dir)
}

/// `reservoir`: spectral density table, correlation table (with closed-form
/// columns where the family admits them) and the constants record.
pub fn cmd_reservoir(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    _format: OutputFormat,
) -> Result<(), CliError> {
    let mut report = RunReport::new("reservoir", cfg);
    let params = cfg.system_params();
    let ff = cfg.form_factor().map_err(CliError::Config)?;
    let start = Instant::now();
    let constants =
        ReservoirConstants::compute(&ff, params.beta, params.gap()).map_err(core_err)?;
    report
        .timings_ms
        .push(("constants".into(), start.elapsed().as_secs_f64() * 1e3));

    let start = Instant::now();
    // J(ω) table with the quadrature cross-check column
    let mut csv = String::from("omega,j_value,j_quadrature\n");
    let n_omega = 101;
    for k in 0..n_omega {
        let omega = 5.0 * ff.kappa0 * k as f64 / (n_omega - 1) as f64;
        let j = reservoir::spectral_density(&ff, omega).map_err(core_err)?;
        let jq = reservoir::spectral_density_sphere_quadrature(&ff, omega).map_err(core_err)?;
        writeln!(csv, "{},{},{}", fmt17(omega), fmt17(j), fmt17(jq)).unwrap();
    }
    let path = out_dir.join("spectral_density.csv");
    write_file(&mut report, &path, &csv, n_omega)?;

    // C(t) table; closed-form columns for the p = -1/2, m = 1 family
    let family_closed = ff.n == 0 && ff.m == reservoir::CutoffExponent::Exponential;
    let mut csv = String::from(if family_closed {
        "t,c_quadrature,t1_closed,t2_closed,closed_estimate\n"
    } else {
        "t,c_quadrature\n"
    });
    let n_t = 81;
    for k in 0..n_t {
        let t = 10.0 / ff.kappa0 * k as f64 / (n_t - 1) as f64;
        let c = reservoir::correlation(&ff, params.beta, t).map_err(core_err)?;
        if family_closed {
            let (t1, t2) = reservoir::correlation_closed(&ff, params.beta, t).map_err(core_err)?;
            let est =
                reservoir::correlation_closed_estimate(&ff, params.beta, t).map_err(core_err)?;
            writeln!(
                csv,
                "{},{},{},{},{}",
                fmt17(t),
                fmt17(c),
                fmt17(t1),
                fmt17(t2),
                fmt17(est)
            )
            .unwrap();
        } else {
            writeln!(csv, "{},{}", fmt17(t), fmt17(c)).unwrap();
        }
    }
    let path = out_dir.join("correlation.csv");
    write_file(&mut report, &path, &csv, n_t)?;

    // constants record
    let tau_c = if family_closed {
        Some(reservoir::correlation_time(&ff, params.beta).map_err(core_err)?)
    } else {
        None
    };
    #[derive(Serialize)]
    struct ConstantsRecord {
        #[serde(flatten)]
        constants: ReservoirConstants,
        tau_c: Option<f64>,
    }
    let text = serde_json::to_string_pretty(&ConstantsRecord { constants, tau_c })
        .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
    let path = out_dir.join("constants.json");
    write_file(&mut report, &path, &text, 1)?;
    report
        .timings_ms
        .push(("tables".into(), start.elapsed().as_secs_f64() * 1e3));
    report.finish(out_dir)
}

/// `validate`: run the full criteria suite, print the table, exit 0 iff all
/// criteria pass (skipped criteria are reported but do not fail the run).
pub fn cmd_validate(cfg: &ScenarioConfig, out_dir: &Path) -> Result<(), CliError> {
    let mut report = RunReport::new("validate", cfg);
    let params = cfg.system_params();
    let ff = cfg.form_factor().map_err(CliError::Config)?;
    let start = Instant::now();
    let results = validate::run_all(&params, &ff).map_err(core_err)?;
    report
        .timings_ms
        .push(("suite".into(), start.elapsed().as_secs_f64() * 1e3));

    println!("{:<6} {:>3}  {:<45} details", "status", "id", "criterion");
    for c in &results {
        let detail = match &c.outcome {
            lambda_dyn::validate::Outcome::Skipped(reason) => format!("skipped: {reason}"),
            _ => c.details.clone(),
        };
        println!("{:<6} {:>3}  {:<45} {}", c.status_str(), c.id, c.name, detail);
        if c.is_failure() {
            report
                .warnings
                .push(format!("criterion {} failed: {}", c.id, c.details));
        }
    }

    #[derive(Serialize)]
    struct JsonCriterion {
        id: usize,
        name: String,
        status: String,
        details: String,
        runtime_ms: f64,
    }
    let rows: Vec<JsonCriterion> = results
        .iter()
        .map(|c| JsonCriterion {
            id: c.id,
            name: c.name.to_string(),
            status: c.status_str().to_string(),
            details: match &c.outcome {
                lambda_dyn::validate::Outcome::Skipped(reason) => reason.clone(),
                _ => c.details.clone(),
            },
            runtime_ms: c.runtime_ms,
        })
        .collect();
    let text = serde_json::to_string_pretty(&rows)
        .map_err(|e| CliError::Numeric(format!("serialization: {e}")))?;
    let path = out_dir.join("validation.json");
    write_file(&mut report, &path, &text, rows.len())?;
    report.finish(out_dir)?;

    if results.iter().any(|c| c.is_failure()) {
        return Err(CliError::Validation);
    }
    Ok(())
}
