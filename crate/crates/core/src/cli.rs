//! The `holderclt` command line: configuration loading, execution of one
//! subcommand, and emission of CSV/JSON outputs with a manifest.
//!
//! Exit codes: 0 success, 1 an audited inequality is violated, 2 bad input,
//! 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::clt::{
    clt_verdict, kramer_clt_audit, rectangle_clt_audit, tightness_audit, CltExperiment, CltReport, KramerConfig,
    NormSpec, RectangleAuditConfig, TightnessConfig,
};
use crate::error::{Error, Result};
use crate::fields::{covariance_distance, rosenthal_audit, simulate, PathEnsemble};
use crate::geometry::{
    arnold_imkeller_audit, classify_with, fit_ball_exponent_with, triangle_check, ChainingGeometry, MetricMeasureSpace,
};
use crate::grand_lebesgue::{gpsi_norm, MomentFunction};
use crate::holder::{grr_audit_with, power_distance, GrrOptions, HolderPlan, ModulusSpec, SobolevPlan};
use crate::io::{self, Config, Csv, InputFile, Manifest, Outputs};
use crate::numeric::lin_grid;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "HOLDERCLT_OUT";
pub const REPORT_SCHEMA: &str = "holderclt-report v1";

#[derive(Debug, Parser)]
#[command(name = "holderclt", version, about = "Hölder-space CLT diagnostics and inequality audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; defaults to the configuration's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to $HOLDERCLT_OUT, then ./holderclt-out/<subcommand>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Progress messages on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate an ensemble of the configured field.
    Simulate {
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Hölder, fractional Sobolev and Gψ norms of every replica in a field file.
    Norms {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Classify the measure on the grid (or a space file) and fit its ball exponent.
    Measure {
        #[arg(long)]
        space: Option<PathBuf>,
        /// Also write the space in the text format.
        #[arg(long)]
        emit_space: bool,
    },
    /// Run one inequality audit.
    Audit {
        #[command(subcommand)]
        kind: AuditKind,
    },
    /// Run the norm-distribution CLT diagnostic.
    Clt {
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum AuditKind {
    /// Garsia–Rodemich–Rumsey bound on simulated paths.
    Grr(AuditArgs),
    /// Arnold–Imkeller chaining bound on simulated paths.
    ArnoldImkeller(AuditArgs),
    /// Rosenthal moment bound for normalised sums.
    Rosenthal(AuditArgs),
    /// Tightness bound for partial sums in `H(d_(ψ)^{1-θ/p})`.
    Tightness(AuditArgs),
    /// Rectangle-modulus bound for partial sums.
    Rectangle(AuditArgs),
    /// Orlicz-norm bound under the Kramer condition.
    Kramer(AuditArgs),
}

impl AuditKind {
    fn name(&self) -> &'static str {
        match self {
            AuditKind::Grr(_) => "grr",
            AuditKind::ArnoldImkeller(_) => "arnold-imkeller",
            AuditKind::Rosenthal(_) => "rosenthal",
            AuditKind::Tightness(_) => "tightness",
            AuditKind::Rectangle(_) => "rectangle",
            AuditKind::Kramer(_) => "kramer",
        }
    }

    fn args(&self) -> &AuditArgs {
        match self {
            AuditKind::Grr(a)
            | AuditKind::ArnoldImkeller(a)
            | AuditKind::Rosenthal(a)
            | AuditKind::Tightness(a)
            | AuditKind::Rectangle(a)
            | AuditKind::Kramer(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct AuditArgs {
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
}

/// Result of executing a subcommand, before anything is written.
struct Run {
    outputs: Outputs,
    violations: usize,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("holderclt: error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            }
        }
    }
}

fn subcommand_name(cmd: &Command) -> String {
    match cmd {
        Command::Simulate { .. } => "simulate".into(),
        Command::Norms { .. } => "norms".into(),
        Command::Measure { .. } => "measure".into(),
        Command::Audit { kind } => format!("audit-{}", kind.name()),
        Command::Clt { .. } => "clt".into(),
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let mut config = match &cli.config {
        Some(p) => io::load_config(p)?,
        None => Config::empty(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    apply_overrides(&mut config, &cli.command);
    let name = subcommand_name(&cli.command);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("holderclt-out").join(&name));

    let threads = cli.threads.unwrap_or(0);
    if cli.threads == Some(0) {
        return Err(Error::InvalidInput("--threads must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let mut inputs = Vec::new();
    let run = pool.install(|| dispatch(&cli.command, &config, &mut inputs))?;

    let config_text = config.to_toml()?;
    let mut outputs = run.outputs;
    let mut names = outputs.names();
    names.push("manifest.json".into());
    let manifest = Manifest {
        format: io::MANIFEST_FORMAT.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        subcommand: name.clone(),
        seed: config.seed,
        config_sha256: io::sha256_hex(config_text.as_bytes()),
        config: config_text,
        inputs,
        outputs: names,
    };
    outputs.add_json("manifest.json", &manifest)?;
    outputs.commit(&out_dir)?;
    if cli.verbose > 0 {
        eprintln!("holderclt: {name}: wrote {} files to {}", manifest.outputs.len(), out_dir.display());
    }
    if run.violations > 0 {
        eprintln!("holderclt: {name}: {} violation(s)", run.violations);
        return Ok(EXIT_VIOLATION);
    }
    Ok(EXIT_OK)
}

/// Folds subcommand flags into the configuration so the manifest records them.
fn apply_overrides(c: &mut Config, cmd: &Command) {
    match cmd {
        Command::Simulate { replicas } => {
            if let Some(r) = replicas {
                c.simulate.replicas = *r;
            }
        }
        Command::Norms { beta, alpha, p, .. } => {
            if let Some(b) = beta {
                c.norms.holder_beta = *b;
            }
            if !alpha.is_empty() {
                c.norms.alpha = alpha.clone();
            }
            if let Some(p) = p {
                c.norms.p = *p;
            }
        }
        Command::Measure { .. } => {}
        Command::Audit { kind } => {
            let a = kind.args();
            let rosenthal = matches!(kind, AuditKind::Rosenthal(_));
            if !a.alpha.is_empty() {
                c.audit.alpha = a.alpha.clone();
            }
            if let Some(p) = a.p {
                if rosenthal {
                    c.audit.rosenthal_p = vec![p];
                } else {
                    c.audit.p = p;
                }
            }
            if let Some(n) = a.paths {
                c.audit.paths = n;
            }
            if let Some(r) = a.replicas {
                if rosenthal {
                    c.audit.rosenthal_replicas = r;
                } else {
                    c.audit.replicas = r;
                }
            }
            if !a.n.is_empty() {
                if rosenthal {
                    c.audit.rosenthal_n = a.n.clone();
                } else {
                    c.audit.n = a.n.clone();
                }
            }
        }
        Command::Clt { replicas, n } => {
            if let Some(r) = replicas {
                c.clt.replicas = *r;
            }
            if !n.is_empty() {
                c.clt.n = n.clone();
            }
        }
    }
}

fn dispatch(cmd: &Command, c: &Config, inputs: &mut Vec<InputFile>) -> Result<Run> {
    match cmd {
        Command::Simulate { .. } => run_simulate(c),
        Command::Norms { field, .. } => {
            let text = read_input(field, inputs)?;
            run_norms(c, &io::read_field(&text)?)
        }
        Command::Measure { space, emit_space } => {
            let space = match space {
                Some(p) => io::read_space(&read_input(p, inputs)?)?,
                None => grid_space(c)?,
            };
            run_measure(c, &space, *emit_space)
        }
        Command::Audit { kind } => match kind {
            AuditKind::Grr(_) => run_grr(c),
            AuditKind::ArnoldImkeller(_) => run_arnold_imkeller(c),
            AuditKind::Rosenthal(_) => run_rosenthal(c),
            AuditKind::Tightness(_) => run_tightness(c),
            AuditKind::Rectangle(_) => run_rectangle(c),
            AuditKind::Kramer(_) => run_kramer(c),
        },
        Command::Clt { .. } => run_clt(c),
    }
}

fn read_input(path: &Path, inputs: &mut Vec<InputFile>) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    inputs.push(InputFile { path: path.display().to_string(), sha256: io::sha256_hex(text.as_bytes()) });
    Ok(text)
}

fn num(x: f64) -> String {
    x.to_string()
}

fn report<T: Serialize>(subcommand: &str, c: &Config, data: &T) -> serde_json::Value {
    json!({ "schema": REPORT_SCHEMA, "subcommand": subcommand, "seed": c.seed, "data": data })
}

fn alpha_for(alpha: &[f64], dim: usize) -> Vec<f64> {
    if alpha.is_empty() {
        vec![0.4; dim]
    } else if alpha.len() == 1 {
        vec![alpha[0]; dim]
    } else {
        alpha.to_vec()
    }
}

fn run_simulate(c: &Config) -> Result<Run> {
    let grid = c.grid()?;
    let model = c.model()?;
    let ens = simulate(&model, &grid, c.simulate.replicas, c.seed)?;
    let mut csv = Csv::new(&["replica", "sup_abs", "mean", "min", "max"]);
    for (r, p) in ens.paths().enumerate() {
        let (lo, hi) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        csv.row(&[r.to_string(), num(lo.abs().max(hi.abs())), num(mean), num(lo), num(hi)]);
    }
    let mut outputs = Outputs::new();
    outputs.add("field.txt", io::write_field(&ens));
    outputs.add("paths.csv", csv.into_string());
    outputs.add_json(
        "report.json",
        &report(
            "simulate",
            c,
            &json!({ "shape": grid.shape(), "replicas": ens.replicas(), "gaussian": model.is_gaussian() }),
        ),
    )?;
    Ok(Run { outputs, violations: 0 })
}

#[derive(Serialize)]
struct NormRow {
    replica: usize,
    holder_norm: f64,
    sup_abs: f64,
    ratio_sup: f64,
    separable: bool,
    sobolev_norm: f64,
    gpsi_norm: f64,
    gpsi_argmax: f64,
}

fn run_norms(c: &Config, ens: &PathEnsemble) -> Result<Run> {
    let grid = ens.grid().clone();
    let n = &c.norms;
    let alpha = alpha_for(&n.alpha, grid.dim());
    let holder = HolderPlan::new(&grid, power_distance(&grid, n.holder_beta))?;
    let sobolev = SobolevPlan::new(&grid, &alpha, n.p)?;
    let psi = n.psi.build()?;
    let rows: Vec<NormRow> = (0..ens.replicas())
        .into_par_iter()
        .map(|r| {
            let v = ens.path(r);
            let h = holder.evaluate_values(v);
            let g = gpsi_norm(&MomentFunction::from_sample(v.to_vec())?, &psi)?;
            Ok(NormRow {
                replica: r,
                holder_norm: h.norm,
                sup_abs: h.sup_abs,
                ratio_sup: h.ratio_sup,
                separable: h.separable,
                sobolev_norm: sobolev.norm(v),
                gpsi_norm: g.value,
                gpsi_argmax: g.argmax,
            })
        })
        .collect::<Result<_>>()?;
    let mut csv = Csv::new(&[
        "replica",
        "holder_norm",
        "sup_abs",
        "ratio_sup",
        "separable",
        "sobolev_norm",
        "gpsi_norm",
        "gpsi_argmax",
    ]);
    for r in &rows {
        csv.row(&[
            r.replica.to_string(),
            num(r.holder_norm),
            num(r.sup_abs),
            num(r.ratio_sup),
            r.separable.to_string(),
            num(r.sobolev_norm),
            num(r.gpsi_norm),
            num(r.gpsi_argmax),
        ]);
    }
    let mut outputs = Outputs::new();
    outputs.add("norms.csv", csv.into_string());
    outputs.add_json("report.json", &report("norms", c, &json!({ "alpha": alpha, "rows": rows })))?;
    Ok(Run { outputs, violations: 0 })
}

fn grid_space(c: &Config) -> Result<MetricMeasureSpace> {
    let grid = c.grid()?;
    let space = MetricMeasureSpace::uniform_grid(&grid);
    match c.measure.distance.as_str() {
        "euclidean" => Ok(space),
        "natural" => space.with_distance(covariance_distance(&c.model()?, &grid)?),
        d => Err(Error::Parse(format!("unknown distance '{d}'"))),
    }
}

fn run_measure(c: &Config, space: &MetricMeasureSpace, emit_space: bool) -> Result<Run> {
    let phi = c.young()?;
    let geo = ChainingGeometry::new(space);
    let fit = fit_ball_exponent_with(&geo)?;
    let class = classify_with(&geo, &phi, c.measure.v)?;
    let tri = triangle_check(space.distances(), 200, 100_000, c.seed);
    let mut csv = Csv::new(&[
        "points",
        "diameter",
        "theta",
        "c_theta",
        "weakly_majorizing",
        "minorizing",
        "majorizing",
        "sup_tau",
        "sup_w",
        "v",
        "triangle_violations",
    ]);
    csv.row(&[
        space.len().to_string(),
        num(space.diameter()),
        num(fit.theta),
        num(fit.c_theta),
        class.weakly_majorizing.to_string(),
        class.minorizing.to_string(),
        class.majorizing.to_string(),
        num(class.sup_tau),
        num(class.sup_w),
        num(class.v),
        tri.violations.to_string(),
    ]);
    let mut balls = Csv::new(&["radius", "median_mass_squared"]);
    for &(r, m) in &fit.samples {
        balls.row(&[num(r), num(m)]);
    }
    let mut outputs = Outputs::new();
    outputs.add("measure.csv", csv.into_string());
    outputs.add("ball_profile.csv", balls.into_string());
    if emit_space {
        outputs.add("space.txt", io::write_space(space));
    }
    outputs.add_json(
        "report.json",
        &report("measure", c, &json!({ "ball_exponent": fit, "classification": class, "triangle": tri })),
    )?;
    Ok(Run { outputs, violations: 0 })
}

fn audit_paths(c: &Config) -> Result<PathEnsemble> {
    simulate(&c.model()?, &c.grid()?, c.audit.paths, c.seed)
}

fn run_grr(c: &Config) -> Result<Run> {
    let ens = audit_paths(c)?;
    let alpha = alpha_for(&c.audit.alpha, ens.grid().dim());
    let plan = SobolevPlan::new(ens.grid(), &alpha, c.audit.p)?;
    let opts = GrrOptions { seed: c.seed, ..GrrOptions::default() };
    let rows = (0..ens.replicas())
        .into_par_iter()
        .map(|r| grr_audit_with(&plan, &ens.field(r), &alpha, &opts))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = Csv::new(&["path", "coefficient", "sobolev_norm", "pairs_checked", "violations", "worst_ratio"]);
    for (i, r) in rows.iter().enumerate() {
        csv.row(&[
            i.to_string(),
            num(r.coefficient),
            num(r.sobolev_norm),
            r.pairs_checked.to_string(),
            r.violations.to_string(),
            num(r.worst_ratio),
        ]);
    }
    let violations = rows.iter().map(|r| r.violations).sum();
    finish_audit(
        "grr",
        c,
        csv,
        json!({ "alpha": alpha, "p": c.audit.p, "violations": violations, "rows": rows }),
        violations,
    )
}

fn run_arnold_imkeller(c: &Config) -> Result<Run> {
    let ens = audit_paths(c)?;
    let phi = c.young()?;
    let geo = ChainingGeometry::new(&grid_space(c)?);
    let rows = (0..ens.replicas())
        .into_par_iter()
        .map(|r| arnold_imkeller_audit(&ens.field(r), &geo, &phi))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = Csv::new(&["path", "v", "pairs", "violations", "worst_ratio"]);
    for (i, r) in rows.iter().enumerate() {
        csv.row(&[i.to_string(), num(r.v), r.pairs.to_string(), r.violations.to_string(), num(r.worst_ratio)]);
    }
    let violations = rows.iter().map(|r| r.violations).sum();
    finish_audit("arnold-imkeller", c, csv, json!({ "violations": violations, "rows": rows }), violations)
}

fn run_rosenthal(c: &Config) -> Result<Run> {
    let a = &c.audit;
    let law = io::parse_innovation(&a.rosenthal_law, None)?;
    let mut rows = Vec::new();
    for (i, &n) in a.rosenthal_n.iter().enumerate() {
        for (j, &p) in a.rosenthal_p.iter().enumerate() {
            let seed = c.seed.wrapping_add((i * a.rosenthal_p.len() + j) as u64);
            rows.push(rosenthal_audit(law, n, p, a.rosenthal_replicas, seed, a.rosenthal_constant)?);
        }
    }
    let mut csv =
        Csv::new(&["n", "p", "replicas", "empirical", "standard_error", "zeta_norm", "factor", "bound", "violation"]);
    for r in &rows {
        csv.row(&[
            r.n.to_string(),
            num(r.p),
            r.replicas.to_string(),
            num(r.empirical),
            num(r.standard_error),
            num(r.zeta_norm),
            num(r.factor),
            num(r.bound),
            r.violation.to_string(),
        ]);
    }
    let violations = rows.iter().filter(|r| r.violation).count();
    finish_audit("rosenthal", c, csv, json!({ "violations": violations, "rows": rows }), violations)
}

fn run_tightness(c: &Config) -> Result<Run> {
    let a = &c.audit;
    let cfg = TightnessConfig {
        model: c.model()?,
        grid: c.grid()?,
        n_schedule: a.n.clone(),
        replicas: a.replicas,
        seed: c.seed,
        p_grid: a.p_grid.clone(),
        theta: a.theta,
        c_theta: a.c_theta,
        psi: a.psi.build()?,
        c_r: a.rosenthal_constant,
    };
    let rep = tightness_audit(&cfg)?;
    let mut csv = Csv::new(&[
        "n",
        "p",
        "statistic",
        "standard_error",
        "bound",
        "ratio",
        "mean_z",
        "z_standard_error",
        "violation",
    ]);
    for r in &rep.rows {
        csv.row(&[
            r.n.to_string(),
            num(r.p),
            num(r.statistic),
            num(r.standard_error),
            num(r.bound),
            num(r.ratio),
            num(r.mean_z),
            num(r.z_standard_error),
            r.violation.to_string(),
        ]);
    }
    let violations = rep.violations;
    finish_audit("tightness", c, csv, serde_json::to_value(&rep).map_err(json_err)?, violations)
}

fn omega0(c: &Config) -> Result<Option<ModulusSpec>> {
    let a = &c.audit;
    let e = a.omega0_exponent;
    Ok(match a.omega0.as_str() {
        "none" => None,
        "power" => Some(ModulusSpec::product_power(e)),
        "log" => {
            let lo = a.p_grid.iter().copied().fold(f64::INFINITY, f64::min);
            let a_prime = lo / (1.0 + 1e-3);
            Some(ModulusSpec::rectangle(move |d: &[f64]| {
                let p: f64 = d.iter().product();
                p.powf(e - 1.0 / a_prime) * (std::f64::consts::E + 1.0 / p).ln()
            }))
        }
        o => return Err(Error::Parse(format!("unknown omega0 '{o}'"))),
    })
}

fn run_rectangle(c: &Config) -> Result<Run> {
    let a = &c.audit;
    let grid = c.grid()?;
    let cfg = RectangleAuditConfig {
        model: c.model()?,
        alpha: alpha_for(&a.alpha, grid.dim()),
        grid,
        n_schedule: a.n.clone(),
        replicas: a.replicas,
        seed: c.seed,
        p_grid: a.p_grid.clone(),
        gamma: a.psi.build()?,
        c_r: a.rosenthal_constant,
        min_cells: a.min_cells,
        omega0: omega0(c)?,
        run_clt: a.run_clt,
    };
    let rep = rectangle_clt_audit(&cfg)?;
    let mut csv = Csv::new(&["n", "delta", "lhs", "standard_error", "rhs", "violation"]);
    for r in &rep.rows {
        let delta: Vec<String> = r.delta.iter().map(|d| num(*d)).collect();
        csv.row(&[
            r.n.to_string(),
            delta.join(" "),
            num(r.lhs),
            num(r.standard_error),
            num(r.rhs),
            r.violation.to_string(),
        ]);
    }
    let violations = rep.violations;
    finish_audit("rectangle", c, csv, serde_json::to_value(&rep).map_err(json_err)?, violations)
}

fn run_kramer(c: &Config) -> Result<Run> {
    let a = &c.audit;
    let model = c.model()?;
    let grid = c.grid()?;
    let rho = if a.rho_exponent > 0.0 {
        let e = a.rho_exponent;
        Some(covariance_distance(&model, &grid)?.map(move |d| d.powf(e)))
    } else {
        None
    };
    let cfg = KramerConfig {
        model,
        grid,
        n_schedule: a.n.clone(),
        replicas: a.replicas,
        seed: c.seed,
        lambda_grid: lin_grid(0.0, a.lambda_max, a.lambda_points.max(2)),
        rho,
    };
    let rep = kramer_clt_audit(&cfg)?;
    let mut csv = Csv::new(&["n", "orlicz_norm", "standard_error", "bound", "violation"]);
    for r in &rep.rows {
        csv.row(&[r.n.to_string(), num(r.orlicz_norm), num(r.standard_error), num(1.0), r.violation.to_string()]);
    }
    let violations = rep.violations;
    finish_audit("kramer", c, csv, serde_json::to_value(&rep).map_err(json_err)?, violations)
}

fn json_err(e: serde_json::Error) -> Error {
    Error::NonFinite(e.to_string())
}

fn finish_audit(name: &str, c: &Config, csv: Csv, data: serde_json::Value, violations: usize) -> Result<Run> {
    let mut outputs = Outputs::new();
    outputs.add("audit.csv", csv.into_string());
    outputs.add_json("report.json", &report(&format!("audit-{name}"), c, &data))?;
    Ok(Run { outputs, violations })
}

fn run_clt(c: &Config) -> Result<Run> {
    let cc = &c.clt;
    let model = c.model()?;
    let grid = c.grid()?;
    let norm = match cc.norm.as_str() {
        "holder" => {
            let e = cc.rho_exponent;
            NormSpec::Holder { rho: covariance_distance(&model, &grid)?.map(move |d| d.powf(e)) }
        }
        "rectangle" => {
            NormSpec::Rectangle { omega: ModulusSpec::product_power(cc.omega_exponent), min_cells: cc.min_cells }
        }
        n => return Err(Error::Parse(format!("unknown norm '{n}'"))),
    };
    let exp = CltExperiment {
        model,
        grid,
        n_schedule: cc.n.clone(),
        replicas: cc.replicas,
        norm,
        seed: c.seed,
        precondition_p: (cc.precondition_p > 0.0).then_some(cc.precondition_p),
    };
    let rep = clt_verdict(&exp)?;
    let mut outputs = Outputs::new();
    outputs.add("clt.csv", clt_csv(&rep));
    let mut ecdf = Csv::new(&["n", "rank", "norm"]);
    for row in &rep.rows {
        for (k, v) in row.ecdf.iter().enumerate() {
            ecdf.row(&[row.n.to_string(), k.to_string(), num(*v)]);
        }
    }
    for (k, v) in rep.limit_ecdf.iter().enumerate() {
        ecdf.row(&["limit".into(), k.to_string(), num(*v)]);
    }
    outputs.add("ecdf.csv", ecdf.into_string());
    outputs.add_json("report.json", &report("clt", c, &rep))?;
    Ok(Run { outputs, violations: 0 })
}

fn clt_csv(rep: &CltReport) -> String {
    let mut csv = Csv::new(&["n", "ks_distance", "critical_value", "mean_norm"]);
    for r in &rep.rows {
        csv.row(&[r.n.to_string(), num(r.ks_distance), num(r.critical_value), num(r.mean_norm)]);
    }
    csv.into_string()
}
