//! Experiment configuration, text formats for fields and spaces, and the
//! output writer with its manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{Covariance, FieldModel, Innovation, PathEnsemble};
use crate::geometry::{DistanceMatrix, MetricMeasureSpace};
use crate::grand_lebesgue::PsiFunction;
use crate::holder::Grid;
use crate::orlicz::YoungFunction;

pub const CONFIG_VERSION: u32 = 1;
pub const FIELD_HEADER: &str = "# holderclt-field v1";
pub const SPACE_HEADER: &str = "# holderclt-space v1";
pub const MANIFEST_FORMAT: &str = "holderclt-manifest v1";

/// Top-level experiment configuration (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub norms: NormsConfig,
    #[serde(default)]
    pub clt: CltConfig,
    #[serde(default)]
    pub audit: AuditConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `gaussian` or `series`.
    pub kind: String,
    /// `brownian`, `fbm`, `sheet`, `ou` or `zero`.
    #[serde(default)]
    pub covariance: Option<String>,
    #[serde(default)]
    pub hurst: Option<f64>,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub decay: Option<f64>,
    #[serde(default)]
    pub terms: Option<usize>,
    /// `rademacher`, `uniform`, `gaussian` or `pareto`.
    #[serde(default)]
    pub innovation: Option<String>,
    #[serde(default)]
    pub tail_index: Option<f64>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub replicas: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { replicas: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureConfig {
    /// `euclidean` or `natural` (the covariance distance `d₂`).
    pub distance: String,
    /// Young function: `power`, `exp-quadratic` or `exponential`.
    pub young: String,
    pub young_p: f64,
    pub v: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self { distance: "euclidean".into(), young: "power".into(), young_p: 4.0, v: 1.0 }
    }
}

/// `ψ` selection: `sqrt`, `power` (`p^exponent`) or `degenerate` (`ψ_(r)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsiConfig {
    pub kind: String,
    pub a: f64,
    /// Upper end; `0` or absent means `+∞`.
    pub b: f64,
    pub exponent: f64,
    pub r: f64,
}

impl Default for PsiConfig {
    fn default() -> Self {
        Self { kind: "sqrt".into(), a: 1.0, b: 0.0, exponent: 0.5, r: 2.0 }
    }
}

impl PsiConfig {
    pub fn build(&self) -> Result<PsiFunction> {
        let b = if self.b > 0.0 { self.b } else { f64::INFINITY };
        match self.kind.as_str() {
            "sqrt" => PsiFunction::sqrt(self.a, b),
            "power" => PsiFunction::power(self.a, b, self.exponent),
            "degenerate" => PsiFunction::degenerate(self.r),
            k => Err(Error::Parse(format!("unknown psi kind '{k}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsConfig {
    /// Hölder distance `|x − y|^beta`.
    pub holder_beta: f64,
    pub alpha: Vec<f64>,
    pub p: f64,
    pub psi: PsiConfig,
}

impl Default for NormsConfig {
    fn default() -> Self {
        Self { holder_beta: 0.5, alpha: vec![], p: 8.0, psi: PsiConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltConfig {
    pub n: Vec<usize>,
    pub replicas: usize,
    /// `holder` (with `ρ = d₂^rho_exponent`) or `rectangle` (with
    /// `ω(δ) = Π δᵢ^omega_exponent`).
    pub norm: String,
    pub rho_exponent: f64,
    /// Moment order of the `d_p^{1−θ/p} << ρ` precondition; `0` skips it.
    pub precondition_p: f64,
    pub omega_exponent: f64,
    pub min_cells: usize,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            n: vec![1, 4, 16, 64],
            replicas: 1000,
            norm: "holder".into(),
            rho_exponent: 0.4,
            precondition_p: 8.0,
            omega_exponent: 0.3,
            min_cells: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub paths: usize,
    pub alpha: Vec<f64>,
    pub p: f64,
    pub n: Vec<usize>,
    pub replicas: usize,
    pub p_grid: Vec<f64>,
    pub theta: f64,
    pub c_theta: f64,
    pub psi: PsiConfig,
    pub rosenthal_constant: f64,
    pub rosenthal_n: Vec<usize>,
    pub rosenthal_p: Vec<f64>,
    pub rosenthal_replicas: usize,
    pub rosenthal_law: String,
    pub lambda_max: f64,
    pub lambda_points: usize,
    /// Target distance `d₂^rho_exponent` for the final CLT run of the Kramer audit; `0` skips it.
    pub rho_exponent: f64,
    pub min_cells: usize,
    /// Target modulus of the rectangle audit: `none`, `power` (`(Πδ)^omega0_exponent`)
    /// or `log` (`(Πδ)^{omega0_exponent − 1/A'} log(e + 1/Πδ)`, `A'` the lower end of the `p` grid).
    pub omega0: String,
    pub omega0_exponent: f64,
    /// Run the rectangle-norm CLT diagnostic when `ω₀` passes the divergence check.
    pub run_clt: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            paths: 100,
            alpha: vec![],
            p: 8.0,
            n: vec![1, 4, 16, 64],
            replicas: 500,
            p_grid: vec![4.0, 8.0],
            theta: 2.0,
            c_theta: 1.0,
            psi: PsiConfig { a: 3.0, ..PsiConfig::default() },
            rosenthal_constant: crate::grand_lebesgue::ROSENTHAL_CONSTANT,
            rosenthal_n: vec![16, 256],
            rosenthal_p: vec![4.0, 8.0],
            rosenthal_replicas: 100_000,
            rosenthal_law: "rademacher".into(),
            lambda_max: 4.0,
            lambda_points: 41,
            rho_exponent: 0.0,
            min_cells: 4,
            omega0: "none".into(),
            omega0_exponent: 0.4,
            run_clt: false,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Parse(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// An empty configuration: every section at its default, no grid and no model.
    pub fn empty() -> Self {
        Config {
            version: CONFIG_VERSION,
            seed: 0,
            grid: None,
            model: None,
            simulate: SimulateConfig::default(),
            measure: MeasureConfig::default(),
            norms: NormsConfig::default(),
            clt: CltConfig::default(),
            audit: AuditConfig::default(),
        }
    }

    /// Canonical TOML text of this configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self.grid.as_ref().ok_or_else(|| Error::InvalidInput("configuration has no [grid] section".into()))?;
        Grid::new(g.shape.clone())
    }

    pub fn model(&self) -> Result<FieldModel> {
        let m =
            self.model.as_ref().ok_or_else(|| Error::InvalidInput("configuration has no [model] section".into()))?;
        let model = match m.kind.as_str() {
            "gaussian" => {
                let cov = match m.covariance.as_deref().unwrap_or("brownian") {
                    "brownian" => Covariance::Brownian,
                    "fbm" => Covariance::FractionalBrownian { hurst: m.hurst.unwrap_or(0.5) },
                    "sheet" => Covariance::BrownianSheet,
                    "ou" => Covariance::OrnsteinUhlenbeck { rate: m.rate.unwrap_or(1.0) },
                    "zero" => Covariance::Zero,
                    c => return Err(Error::Parse(format!("unknown covariance '{c}'"))),
                };
                FieldModel::gaussian(cov)
            }
            "series" => {
                let law = parse_innovation(m.innovation.as_deref().unwrap_or("rademacher"), m.tail_index)?;
                FieldModel::series(m.decay.unwrap_or(1.5), m.terms.unwrap_or(64), law)?
            }
            k => return Err(Error::Parse(format!("unknown model kind '{k}'"))),
        };
        Ok(model.with_scale(m.scale))
    }

    pub fn young(&self) -> Result<YoungFunction> {
        match self.measure.young.as_str() {
            "power" => YoungFunction::power(self.measure.young_p),
            "exp-quadratic" => Ok(YoungFunction::exp_quadratic()),
            "exponential" => Ok(YoungFunction::exponential()),
            y => Err(Error::Parse(format!("unknown Young function '{y}'"))),
        }
    }
}

pub fn parse_innovation(name: &str, tail_index: Option<f64>) -> Result<Innovation> {
    Ok(match name {
        "rademacher" => Innovation::Rademacher,
        "uniform" => Innovation::Uniform,
        "gaussian" => Innovation::Gaussian,
        "pareto" => Innovation::SymmetricPareto { tail_index: tail_index.unwrap_or(3.0) },
        l => return Err(Error::Parse(format!("unknown innovation law '{l}'"))),
    })
}

/// Reads a TOML config, or the config embedded in an emitted manifest.
pub fn load_config(path: &Path) -> Result<Config> {
    let raw = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if raw.trim_start().starts_with('{') {
        let m: Manifest = serde_json::from_str(&raw).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Parse(format!("unknown manifest format '{}'", m.format)));
        }
        return Config::parse(&m.config);
    }
    Config::parse(&raw)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Run record written next to every output. `config` holds the effective
/// configuration (flags folded in), so `--config manifest.json` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub tool_version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: String,
    /// Data files read by the run, with their hashes.
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Collects output files in memory and writes them into a fresh directory.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::NonFinite(e.to_string()))?;
        s.push('\n');
        self.add(name, s);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    /// Writes into a staging directory next to `dir` and renames it into place.
    pub fn commit(&self, dir: &Path) -> Result<()> {
        let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let name = dir.file_name().ok_or_else(|| Error::Io(format!("bad output directory {}", dir.display())))?;
        let staging: PathBuf = parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        for (n, bytes) in &self.files {
            fs::write(staging.join(n), bytes)?;
        }
        if dir.exists() {
            // an existing directory is updated file by file
            for (n, _) in &self.files {
                fs::rename(staging.join(n), dir.join(n))?;
            }
            fs::remove_dir_all(&staging)?;
        } else {
            fs::rename(&staging, dir)?;
        }
        Ok(())
    }
}

/// CSV with a header row; numbers use Rust's shortest round-trip formatting.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Writes an ensemble (or a single field with one replica) in the text format.
pub fn write_field(ens: &PathEnsemble) -> String {
    let mut s = String::new();
    let shape: Vec<String> = ens.grid().shape().iter().map(|n| n.to_string()).collect();
    let _ = writeln!(s, "{FIELD_HEADER}");
    let _ = writeln!(s, "shape {}", shape.join(" "));
    let _ = writeln!(s, "replicas {}", ens.replicas());
    for p in ens.paths() {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

/// Parses the field text format.
pub fn read_field(text: &str) -> Result<PathEnsemble> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(FIELD_HEADER) {
        return Err(Error::Parse(format!("missing '{FIELD_HEADER}' header")));
    }
    let shape_line = lines.next().ok_or_else(|| Error::Parse("missing shape line".into()))?;
    let shape: Vec<usize> = keyed(shape_line, "shape")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad shape entry '{t}'"))))
        .collect::<Result<_>>()?;
    let grid = Grid::new(shape)?;
    let reps_line = lines.next().ok_or_else(|| Error::Parse("missing replicas line".into()))?;
    let replicas: usize =
        keyed(reps_line, "replicas")?.trim().parse().map_err(|_| Error::Parse("bad replica count".into()))?;
    let mut values = Vec::with_capacity(grid.len() * replicas);
    for (r, line) in lines.enumerate() {
        let row: Vec<f64> = parse_floats(line)?;
        if row.len() != grid.len() {
            return Err(Error::Parse(format!("replica {r} has {} values, expected {}", row.len(), grid.len())));
        }
        values.extend(row);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse("field values must be finite".into()));
    }
    PathEnsemble::new(grid, replicas, 0, values, f64::INFINITY).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes a metric-measure space: one line per point (`coords… weight`),
/// then the distance matrix row by row.
pub fn write_space(space: &MetricMeasureSpace) -> String {
    let mut s = String::new();
    let dim = space.coords().first().map(|c| c.len()).unwrap_or(0);
    let _ = writeln!(s, "{SPACE_HEADER}");
    let _ = writeln!(s, "points {} dim {}", space.len(), dim);
    for (c, w) in space.coords().iter().zip(space.weights()) {
        let mut row: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        row.push(w.to_string());
        let _ = writeln!(s, "{}", row.join(" "));
    }
    let _ = writeln!(s, "distances");
    for i in 0..space.len() {
        let row: Vec<String> = space.distances().row(i).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn read_space(text: &str) -> Result<MetricMeasureSpace> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(SPACE_HEADER) {
        return Err(Error::Parse(format!("missing '{SPACE_HEADER}' header")));
    }
    let head: Vec<&str> =
        lines.next().ok_or_else(|| Error::Parse("missing size line".into()))?.split_whitespace().collect();
    if head.len() != 4 || head[0] != "points" || head[2] != "dim" {
        return Err(Error::Parse("expected 'points N dim D'".into()));
    }
    let n: usize = head[1].parse().map_err(|_| Error::Parse("bad point count".into()))?;
    let dim: usize = head[3].parse().map_err(|_| Error::Parse("bad dimension".into()))?;
    let mut coords = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let row = parse_floats(lines.next().ok_or_else(|| Error::Parse("truncated point list".into()))?)?;
        if row.len() != dim + 1 {
            return Err(Error::Parse(format!("point rows need {} numbers", dim + 1)));
        }
        weights.push(row[dim]);
        coords.push(row[..dim].to_vec());
    }
    if lines.next().map(str::trim) != Some("distances") {
        return Err(Error::Parse("missing 'distances' section".into()));
    }
    let mut d = Vec::with_capacity(n * n);
    for _ in 0..n {
        let row = parse_floats(lines.next().ok_or_else(|| Error::Parse("truncated distance matrix".into()))?)?;
        if row.len() != n {
            return Err(Error::Parse(format!("distance rows need {n} numbers")));
        }
        d.extend(row);
    }
    let dist = DistanceMatrix::new(n, d).map_err(|e| Error::Parse(e.to_string()))?;
    MetricMeasureSpace::new(coords, dist, weights).map_err(|e| Error::Parse(e.to_string()))
}

fn keyed<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.trim().strip_prefix(key).ok_or_else(|| Error::Parse(format!("expected '{key}' line")))
}

fn parse_floats(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{t}'")))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::simulate;

    const BROWNIAN: &str = r#"
version = 1
seed = 3
[grid]
shape = [17]
[model]
kind = "gaussian"
covariance = "brownian"
"#;

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let c = Config::parse(BROWNIAN).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.model().unwrap(), FieldModel::gaussian(Covariance::Brownian));
        assert_eq!(Config::parse(&c.to_toml().unwrap()).unwrap(), c);
        assert!(Config::empty().grid().is_err());
        assert!(Config::parse(&BROWNIAN.replace("seed = 3", "seed = 3\ncolour = 1")).is_err());
        assert!(Config::parse(&BROWNIAN.replace("version = 1", "version = 2")).is_err());
        assert!(Config::parse(&BROWNIAN.replace("brownian", "wiener")).unwrap().model().is_err());
    }

    #[test]
    fn field_and_space_round_trip() {
        let g = Grid::line(9).unwrap();
        let e = simulate(&FieldModel::gaussian(Covariance::Brownian), &g, 3, 1).unwrap();
        let back = read_field(&write_field(&e)).unwrap();
        assert_eq!(back.values(), e.values());
        let s = MetricMeasureSpace::uniform_grid(&Grid::square(3).unwrap());
        assert_eq!(read_space(&write_space(&s)).unwrap(), s);
        assert!(read_field("shape 3\n").is_err());
    }

    #[test]
    fn hashes_are_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
