//! Seeded simulation of centred random fields on grids, natural distances,
//! the Rosenthal factor and the natural `θ_α` and `φ` functions.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;
use crate::grand_lebesgue::{gpsi_norm, rosenthal_multiplier, MomentFunction, PsiFunction};
use crate::holder::{grr_coefficient, Grid, GridField, SobolevPlan};
use crate::numeric::{gaussian_abs_moment, lp_norm_with_se, mean_and_se, replica_rng};
use crate::orlicz::{orlicz_norm, ConvexSymbol, EmpiricalSample, YoungFunction};

/// Stream families; every random quantity in the crate draws from its own.
pub mod streams {
    pub const FIELD: u64 = 1;
    pub const LIMIT: u64 = 2;
    pub const ROSENTHAL: u64 = 3;
}

/// Covariance functions for Gaussian models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Covariance {
    /// `min(s, t)` on `[0,1]`.
    Brownian,
    /// Lévy fractional Brownian field `½(|x|^{2H} + |y|^{2H} − |x−y|^{2H})`.
    FractionalBrownian {
        hurst: f64,
    },
    /// `Π min(xᵢ, yᵢ)`.
    BrownianSheet,
    /// `exp(−rate |x − y|)`.
    OrnsteinUhlenbeck {
        rate: f64,
    },
    Zero,
}

impl Covariance {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        match *self {
            Covariance::Brownian => x[0].min(y[0]),
            Covariance::FractionalBrownian { hurst } => {
                let h2 = 2.0 * hurst;
                let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                0.5 * (norm(x).powf(h2) + norm(y).powf(h2) - norm(&diff).powf(h2))
            }
            Covariance::BrownianSheet => x.iter().zip(y).map(|(a, b)| a.min(*b)).product(),
            Covariance::OrnsteinUhlenbeck { rate } => {
                let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                (-rate * norm(&diff)).exp()
            }
            Covariance::Zero => 0.0,
        }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        match *self {
            Covariance::Brownian if grid.dim() != 1 => {
                Err(Error::InvalidInput("Brownian motion lives on [0,1]".into()))
            }
            Covariance::FractionalBrownian { hurst } if !(hurst > 0.0 && hurst < 1.0) => {
                Err(Error::InvalidInput(format!("Hurst index {hurst} not in (0, 1)")))
            }
            Covariance::OrnsteinUhlenbeck { rate } if !(rate > 0.0) => {
                Err(Error::InvalidInput(format!("OU rate {rate} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// Law of the i.i.d. innovations of a series model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    Uniform,
    Gaussian,
    /// `±U^{−1/α}`: finite moments exactly for `p < α`.
    SymmetricPareto {
        tail_index: f64,
    },
}

impl Innovation {
    pub fn draw<R: RngCore>(&self, rng: &mut R) -> f64 {
        match *self {
            Innovation::Rademacher => {
                if rng.next_u32() & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Innovation::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            Innovation::Gaussian => rng.sample(StandardNormal),
            Innovation::SymmetricPareto { tail_index } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                let s = if rng.next_u32() & 1 == 0 { 1.0 } else { -1.0 };
                s * u.powf(-1.0 / tail_index)
            }
        }
    }

    /// Moments of order `p` are finite exactly for `p` below this.
    pub fn moment_limit(&self) -> f64 {
        match *self {
            Innovation::SymmetricPareto { tail_index } => tail_index,
            _ => f64::INFINITY,
        }
    }

    /// `|η|_p`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        match *self {
            Innovation::Rademacher => 1.0,
            Innovation::Uniform => 3f64.sqrt() * (p + 1.0).powf(-1.0 / p),
            Innovation::Gaussian => gaussian_abs_moment(p),
            Innovation::SymmetricPareto { tail_index } => {
                if p < tail_index {
                    (tail_index / (tail_index - p)).powf(1.0 / p)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn variance(&self) -> f64 {
        self.abs_moment(2.0).powi(2)
    }

    pub fn has_exponential_moments(&self) -> bool {
        !matches!(self, Innovation::SymmetricPareto { .. })
    }
}

/// A centred random field on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    Gaussian {
        covariance: Covariance,
        scale: f64,
    },
    /// `scale · Σ_{k ≤ K} a_k η_k √2 sin(kπx)` on `[0,1]`.
    Series {
        coefficients: Vec<f64>,
        innovation: Innovation,
        scale: f64,
    },
}

impl FieldModel {
    pub fn gaussian(covariance: Covariance) -> Self {
        FieldModel::Gaussian { covariance, scale: 1.0 }
    }

    /// Coefficients `a_k = k^{−s}`, `k = 1..=terms`.
    pub fn series(decay: f64, terms: usize, innovation: Innovation) -> Result<Self> {
        if !(decay > 0.5) || terms == 0 {
            return Err(Error::InvalidInput("series needs decay > 1/2 and at least one term".into()));
        }
        Ok(FieldModel::Series {
            coefficients: (1..=terms).map(|k| (k as f64).powf(-decay)).collect(),
            innovation,
            scale: 1.0,
        })
    }

    pub fn with_scale(self, c: f64) -> Self {
        match self {
            FieldModel::Gaussian { covariance, scale } => FieldModel::Gaussian { covariance, scale: scale * c },
            FieldModel::Series { coefficients, innovation, scale } => {
                FieldModel::Series { coefficients, innovation, scale: scale * c }
            }
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, FieldModel::Gaussian { .. })
            || matches!(self, FieldModel::Series { innovation: Innovation::Gaussian, .. })
    }

    pub fn moment_limit(&self) -> f64 {
        match self {
            FieldModel::Gaussian { .. } => f64::INFINITY,
            FieldModel::Series { innovation, .. } => innovation.moment_limit(),
        }
    }

    pub fn has_exponential_moments(&self) -> bool {
        match self {
            FieldModel::Gaussian { .. } => true,
            FieldModel::Series { innovation, .. } => innovation.has_exponential_moments(),
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            FieldModel::Gaussian { covariance, scale } => {
                if !scale.is_finite() {
                    return Err(Error::InvalidInput("scale must be finite".into()));
                }
                covariance.check(grid)
            }
            FieldModel::Series { coefficients, scale, .. } => {
                if grid.dim() != 1 {
                    return Err(Error::InvalidInput("series models are defined on [0,1]".into()));
                }
                if coefficients.is_empty() || coefficients.iter().chain([scale]).any(|c| !c.is_finite()) {
                    return Err(Error::InvalidInput("series coefficients must be finite".into()));
                }
                Ok(())
            }
        }
    }

    fn basis(k: usize, x: f64) -> f64 {
        std::f64::consts::SQRT_2 * (k as f64 * std::f64::consts::PI * x).sin()
    }

    /// `R(x, y) = E ξ(x) ξ(y)`.
    pub fn covariance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            FieldModel::Gaussian { covariance, scale } => Ok(scale * scale * covariance.eval(x, y)),
            FieldModel::Series { coefficients, innovation, scale } => {
                let var = innovation.variance();
                if !var.is_finite() {
                    return Err(Error::MomentRange { p: 2.0 });
                }
                let s: f64 = coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * a * Self::basis(i + 1, x[0]) * Self::basis(i + 1, y[0]))
                    .sum();
                Ok(scale * scale * var * s)
            }
        }
    }

    /// The Gaussian model with the same covariance (series models keep their
    /// basis and switch to Gaussian coefficients).
    pub fn gaussian_counterpart(&self) -> Result<FieldModel> {
        match self {
            FieldModel::Gaussian { .. } => Ok(self.clone()),
            FieldModel::Series { coefficients, innovation, scale } => {
                let sd = innovation.abs_moment(2.0);
                if !sd.is_finite() {
                    return Err(Error::MomentRange { p: 2.0 });
                }
                Ok(FieldModel::Series {
                    coefficients: coefficients.clone(),
                    innovation: Innovation::Gaussian,
                    scale: scale * sd,
                })
            }
        }
    }
}

/// Replica-major sample paths on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    grid: Grid,
    replicas: usize,
    seed: u64,
    values: Vec<f64>,
    moment_limit: f64,
}

impl PathEnsemble {
    pub fn new(grid: Grid, replicas: usize, seed: u64, values: Vec<f64>, moment_limit: f64) -> Result<Self> {
        if values.len() != grid.len() * replicas {
            return Err(Error::InvalidInput(format!("expected {} values", grid.len() * replicas)));
        }
        Ok(Self { grid, replicas, seed, values, moment_limit })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn moment_limit(&self) -> f64 {
        self.moment_limit
    }

    pub fn path(&self, r: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn field(&self, r: usize) -> GridField {
        GridField::new(self.grid.clone(), self.path(r).to_vec()).expect("ensemble values are finite")
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.grid.len())
    }

    /// Values of replica `r` at a single grid point, across replicas.
    pub fn at_point(&self, i: usize) -> Vec<f64> {
        self.paths().map(|p| p[i]).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }
}

/// A model prepared on a grid: Cholesky factor or basis matrix.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    grid: Grid,
    kind: SamplerKind,
    moment_limit: f64,
    /// Diagonal jitter that was needed for the factorisation.
    pub jitter: f64,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    /// Rows of the lower Cholesky factor over the points with positive variance.
    Gaussian { active: Vec<usize>, chol: Vec<f64> },
    /// `basis[k * n + i] = scale · a_k e_k(x_i)`.
    Series { basis: Vec<f64>, terms: usize, innovation: Innovation },
}

impl FieldSampler {
    pub fn new(model: &FieldModel, grid: &Grid) -> Result<Self> {
        model.validate(grid)?;
        let n = grid.len();
        let pts = grid.points();
        match model {
            FieldModel::Series { coefficients, innovation, scale } => {
                let terms = coefficients.len();
                let mut basis = vec![0.0; terms * n];
                for (k, a) in coefficients.iter().enumerate() {
                    for i in 0..n {
                        basis[k * n + i] = scale * a * FieldModel::basis(k + 1, pts[i][0]);
                    }
                }
                Ok(Self {
                    grid: grid.clone(),
                    kind: SamplerKind::Series { basis, terms, innovation: *innovation },
                    moment_limit: innovation.moment_limit(),
                    jitter: 0.0,
                })
            }
            FieldModel::Gaussian { .. } => {
                let active: Vec<usize> =
                    (0..n).filter(|&i| model.covariance(&pts[i], &pts[i]).map(|v| v > 0.0).unwrap_or(false)).collect();
                let m = active.len();
                let cov = DMatrix::from_fn(m, m, |a, b| model.covariance(&pts[active[a]], &pts[active[b]]).unwrap());
                let (chol, jitter) = cholesky_with_jitter(cov)?;
                Ok(Self {
                    grid: grid.clone(),
                    kind: SamplerKind::Gaussian { active, chol },
                    moment_limit: f64::INFINITY,
                    jitter,
                })
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn innovation_len(&self) -> usize {
        match &self.kind {
            SamplerKind::Gaussian { active, .. } => active.len(),
            SamplerKind::Series { terms, .. } => *terms,
        }
    }

    fn draw_innovations(&self, seed: u64, domain: u64, replica: u64, out: &mut [f64]) {
        let mut rng = replica_rng(seed, domain, replica);
        match &self.kind {
            SamplerKind::Gaussian { .. } => out.iter_mut().for_each(|z| *z = rng.sample(StandardNormal)),
            SamplerKind::Series { innovation, .. } => out.iter_mut().for_each(|z| *z = innovation.draw(&mut rng)),
        }
    }

    fn apply(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.kind {
            SamplerKind::Gaussian { active, chol } => {
                let m = active.len();
                for (r, &i) in active.iter().enumerate() {
                    let row = &chol[r * m..r * m + r + 1];
                    out[i] = row.iter().zip(z).map(|(l, z)| l * z).sum();
                }
            }
            SamplerKind::Series { basis, terms, .. } => {
                let n = out.len();
                for k in 0..*terms {
                    let zk = z[k];
                    if zk == 0.0 {
                        continue;
                    }
                    for (o, b) in out.iter_mut().zip(&basis[k * n..(k + 1) * n]) {
                        *o += zk * b;
                    }
                }
            }
        }
    }

    /// Replica `r` uses innovation stream `r` of `domain`.
    pub fn sample(&self, replicas: usize, seed: u64, domain: u64) -> PathEnsemble {
        self.sample_sums(1, replicas, seed, domain)
    }

    /// Replica `j` is `n^{−1/2} Σ_{i < n}` of the paths with innovation
    /// streams `jn + i`, summed in innovation space.
    pub fn sample_sums(&self, n: usize, replicas: usize, seed: u64, domain: u64) -> PathEnsemble {
        let len = self.grid.len();
        let k = self.innovation_len();
        let mut values = vec![0.0; len * replicas];
        let norm = 1.0 / (n as f64).sqrt();
        values.par_chunks_mut(len).enumerate().for_each(|(j, out)| {
            let mut acc = vec![0.0; k];
            let mut z = vec![0.0; k];
            for i in 0..n {
                self.draw_innovations(seed, domain, (j * n + i) as u64, &mut z);
                acc.iter_mut().zip(&z).for_each(|(a, b)| *a += b);
            }
            if n > 1 {
                acc.iter_mut().for_each(|a| *a *= norm);
            }
            self.apply(&acc, out);
        });
        PathEnsemble { grid: self.grid.clone(), replicas, seed, values, moment_limit: self.moment_limit }
    }
}

/// Lower Cholesky factor (row-major) with diagonal jitter escalating from
/// `1e-12·trace` to `1e-8·trace` when the plain factorisation fails.
pub fn cholesky_with_jitter(cov: DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
    let m = cov.nrows();
    if m == 0 {
        return Ok((vec![], 0.0));
    }
    let trace = cov.trace();
    let mut jitters = vec![0.0];
    jitters.extend((0..=4).map(|k| trace * 1e-12 * 10f64.powi(k)));
    for eps in jitters {
        let mut c = cov.clone();
        for i in 0..m {
            c[(i, i)] += eps;
        }
        if let Some(ch) = c.cholesky() {
            let l = ch.l();
            let mut rows = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..=i {
                    rows[i * m + j] = l[(i, j)];
                }
            }
            return Ok((rows, eps));
        }
    }
    Err(Error::NotPsd)
}

/// Draws `replicas` independent paths of `model` on `grid`.
pub fn simulate(model: &FieldModel, grid: &Grid, replicas: usize, seed: u64) -> Result<PathEnsemble> {
    Ok(FieldSampler::new(model, grid)?.sample(replicas, seed, streams::FIELD))
}

/// `replicas` draws of `S_n = n^{−1/2} Σ ξᵢ`, equal (up to rounding) to
/// summing disjoint blocks of `simulate(model, grid, n·replicas, seed)`.
pub fn simulate_partial_sums(
    model: &FieldModel,
    grid: &Grid,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    Ok(FieldSampler::new(model, grid)?.sample_sums(n, replicas, seed, streams::FIELD))
}

/// Empirical distance matrix with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedDistance {
    pub distance: DistanceMatrix,
    pub standard_error: DistanceMatrix,
}

fn increments(ens: &PathEnsemble, i: usize, j: usize) -> Vec<f64> {
    ens.paths().map(|p| p[i] - p[j]).collect()
}

/// `d_p(x₁, x₂) = |ξ(x₁) − ξ(x₂)|_p` estimated from replicas.
pub fn natural_distance_p(ens: &PathEnsemble, p: f64) -> Result<EstimatedDistance> {
    if !(p >= 1.0) || p >= ens.moment_limit() {
        return Err(Error::MomentRange { p });
    }
    let n = ens.grid().len();
    let rows: Vec<Vec<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if j <= i { (0.0, 0.0) } else { lp_norm_with_se(&increments(ens, i, j), p) }).collect())
        .collect();
    let get = |i: usize, j: usize, k: usize| {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if k == 0 {
            rows[a][b].0
        } else {
            rows[a][b].1
        }
    };
    Ok(EstimatedDistance {
        distance: DistanceMatrix::from_fn(n, |i, j| get(i, j, 0)),
        standard_error: DistanceMatrix::from_fn(n, |i, j| get(i, j, 1)),
    })
}

/// `d₂(x₁, x₂)` from the covariance.
pub fn covariance_distance(model: &FieldModel, grid: &Grid) -> Result<DistanceMatrix> {
    model.validate(grid)?;
    let pts = grid.points();
    let diag: Vec<f64> = pts.iter().map(|x| model.covariance(x, x)).collect::<Result<_>>()?;
    let n = grid.len();
    let cross: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if j > i {
                model.covariance(&pts[i], &pts[j]).unwrap_or(f64::NAN)
            } else {
                0.0
            }
        })
        .collect();
    if cross.iter().any(|v| v.is_nan()) {
        return Err(Error::MomentRange { p: 2.0 });
    }
    // squared distances at rounding level (e.g. two points where the field vanishes) are zero
    let floor = 1e-13 * diag.iter().copied().fold(0.0, f64::max);
    Ok(DistanceMatrix::from_fn(n, |i, j| {
        let d2 = diag[i] - 2.0 * cross[i * n + j] + diag[j];
        if d2 <= floor {
            0.0
        } else {
            d2.sqrt()
        }
    }))
}

/// Closed-form `d_p = γ_p d₂` for Gaussian models.
pub fn gaussian_distance_p(model: &FieldModel, grid: &Grid, p: f64) -> Result<DistanceMatrix> {
    if !model.is_gaussian() {
        return Err(Error::InvalidInput("closed-form d_p needs a Gaussian model".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::MomentRange { p });
    }
    let g = gaussian_abs_moment(p);
    Ok(covariance_distance(model, grid)?.map(|v| g * v))
}

/// `d_(ψ)(x₁, x₂) = ‖ξ(x₁) − ξ(x₂)‖_{Gψ}`: closed form for Gaussian models
/// (by homogeneity, `d₂` times the norm of a standard normal).
pub fn natural_distance_psi_gaussian(model: &FieldModel, grid: &Grid, psi: &PsiFunction) -> Result<DistanceMatrix> {
    if !model.is_gaussian() {
        return Err(Error::InvalidInput("closed-form d_(psi) needs a Gaussian model".into()));
    }
    let c = gpsi_norm(&MomentFunction::gaussian(1.0), psi)?.value;
    Ok(covariance_distance(model, grid)?.map(|v| c * v))
}

/// `d_(ψ)` from replicas, applying `gpsi_norm` to each increment.
pub fn natural_distance_psi(ens: &PathEnsemble, psi: &PsiFunction) -> Result<DistanceMatrix> {
    let n = ens.grid().len();
    let limit = ens.moment_limit();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j <= i {
                        return Ok(0.0);
                    }
                    let m = MomentFunction::from_sample(increments(ens, i, j))?.with_support(1.0, limit);
                    Ok(gpsi_norm(&m, psi)?.value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DistanceMatrix::from_fn(n, |i, j| if i < j { rows[i][j] } else { rows[j][i] }))
}

/// `d_Φ(x₁, x₂) = ‖ξ(x₁) − ξ(x₂)‖_Φ`, the Luxemburg norm of each empirical increment.
pub fn natural_distance_phi(ens: &PathEnsemble, phi: &YoungFunction) -> Result<DistanceMatrix> {
    let n = ens.grid().len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let inc = increments(ens, i, j);
                    if inc.iter().all(|v| *v == 0.0) {
                        return Ok(0.0);
                    }
                    orlicz_norm(&EmpiricalSample::uniform(inc)?, phi)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(DistanceMatrix::from_fn(n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => rows[i][j - i - 1],
        std::cmp::Ordering::Greater => rows[j][i - j - 1],
        std::cmp::Ordering::Equal => 0.0,
    }))
}

/// `C_R p / (e ln p)` for `p ≥ 2`.
pub fn rosenthal_factor(p: f64, c_r: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::Domain(format!("Rosenthal factor needs p >= 2, got {p}")));
    }
    if !(c_r > 0.0) {
        return Err(Error::InvalidInput("Rosenthal constant must be positive".into()));
    }
    Ok(rosenthal_multiplier(p, c_r))
}

/// One row of the Rosenthal audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RosenthalRow {
    pub n: usize,
    pub p: f64,
    pub replicas: usize,
    pub empirical: f64,
    pub standard_error: f64,
    pub zeta_norm: f64,
    pub factor: f64,
    pub bound: f64,
    pub violation: bool,
}

/// Checks `|n^{−1/2} Σ ζᵢ|_p ≤ C_R p/(e ln p) |ζ₁|_p` by Monte Carlo; a
/// violation needs the estimate to exceed the bound by three standard errors.
pub fn rosenthal_audit(
    law: Innovation,
    n: usize,
    p: f64,
    replicas: usize,
    seed: u64,
    c_r: f64,
) -> Result<RosenthalRow> {
    let factor = rosenthal_factor(p, c_r)?;
    if n == 0 || replicas < 2 {
        return Err(Error::InvalidInput("need n >= 1 and at least two replicas".into()));
    }
    if p >= law.moment_limit() {
        return Err(Error::MomentRange { p });
    }
    let sums: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, streams::ROSENTHAL, r as u64);
            let s = match law {
                Innovation::Rademacher => {
                    // sum of n signs = 2·(number of set bits) − n
                    let mut ones = 0u32;
                    let mut left = n;
                    while left > 0 {
                        let take = left.min(64);
                        let w = rng.next_u64();
                        let w = if take == 64 { w } else { w & ((1u64 << take) - 1) };
                        ones += w.count_ones();
                        left -= take;
                    }
                    2.0 * ones as f64 - n as f64
                }
                _ => (0..n).map(|_| law.draw(&mut rng)).sum(),
            };
            s / (n as f64).sqrt()
        })
        .collect();
    let (empirical, se) = lp_norm_with_se(&sums, p);
    let zeta_norm = law.abs_moment(p);
    let bound = factor * zeta_norm;
    Ok(RosenthalRow {
        n,
        p,
        replicas,
        empirical,
        standard_error: se,
        zeta_norm,
        factor,
        bound,
        violation: empirical - 3.0 * se > bound,
    })
}

/// Estimate with a batched standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
}

/// `θ_α(p) = Q_{α,d}(p) (∬ E|G_α[ξ](x, y)|^p ν(dx, dy))^{1/p}` with the
/// expectation replaced by the replica average.
pub fn theta_alpha(ens: &PathEnsemble, alpha: &[f64], p: f64) -> Result<Estimate> {
    let plan = SobolevPlan::new(ens.grid(), alpha, p)?;
    theta_alpha_with(&plan, ens, alpha, p)
}

pub fn theta_alpha_with(plan: &SobolevPlan, ens: &PathEnsemble, alpha: &[f64], p: f64) -> Result<Estimate> {
    if p >= ens.moment_limit() {
        return Err(Error::MomentRange { p });
    }
    let per: Vec<f64> = (0..ens.replicas()).into_par_iter().map(|r| plan.norm_pow(ens.path(r))).collect();
    let (m, se) = mean_and_se(&per);
    if !(m > 0.0) {
        return Err(Error::Degenerate("rectangle increments vanish identically".into()));
    }
    let q = grr_coefficient(alpha, p);
    let value = q * m.powf(1.0 / p);
    Ok(Estimate { value, standard_error: value * se / (p * m) })
}

/// `φ₀(λ) = log max_x max_± mean_r exp(±λ ξ_r(x))` on a grid `0 = λ₀ < λ₁ < …`,
/// returned as an even symbol with a quadratic head.
pub fn natural_phi(ens: &PathEnsemble, lambda_grid: &[f64]) -> Result<ConvexSymbol> {
    if lambda_grid.first() != Some(&0.0) || !lambda_grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("lambda grid must increase from 0".into()));
    }
    let n = ens.grid().len();
    let r = ens.replicas() as f64;
    let vmax = ens.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cols: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| ens.at_point(i)).collect();
    let mut y = Vec::with_capacity(lambda_grid.len());
    for &lam in lambda_grid {
        if lam * vmax > 700.0 {
            return Err(Error::MgfOverflow { lambda: lam });
        }
        let best = cols
            .par_iter()
            .map(|c| {
                let plus = c.iter().map(|v| (lam * v).exp()).sum::<f64>() / r;
                let minus = c.iter().map(|v| (-lam * v).exp()).sum::<f64>() / r;
                plus.max(minus).ln()
            })
            .reduce(|| 0.0, f64::max);
        y.push(best.max(0.0));
    }
    y[0] = 0.0;
    ConvexSymbol::even_with_quadratic_head(lambda_grid.to_vec(), y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_is_deterministic_and_prefix_stable() {
        let g = Grid::line(33).unwrap();
        let m = FieldModel::gaussian(Covariance::Brownian);
        let a = simulate(&m, &g, 50, 7).unwrap();
        let b = simulate(&m, &g, 50, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &g, 20, 7).unwrap();
        assert_eq!(&a.values()[..20 * 33], c.values());
        assert_eq!(a.path(0)[0], 0.0);
    }

    #[test]
    fn partial_sums_match_block_sums() {
        let g = Grid::line(17).unwrap();
        for m in
            [FieldModel::gaussian(Covariance::Brownian), FieldModel::series(1.5, 16, Innovation::Rademacher).unwrap()]
        {
            let base = simulate(&m, &g, 12, 3).unwrap();
            let s = simulate_partial_sums(&m, &g, 4, 3, 3).unwrap();
            for j in 0..3 {
                for i in 0..17 {
                    let direct: f64 = (0..4).map(|t| base.path(4 * j + t)[i]).sum::<f64>() / 2.0;
                    assert!((direct - s.path(j)[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn jitter_rescues_rank_deficient_covariance() {
        let v = DMatrix::from_fn(3, 3, |_, _| 1.0);
        let (_, eps) = cholesky_with_jitter(v).unwrap();
        assert!(eps > 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(cholesky_with_jitter(bad), Err(Error::NotPsd));
    }

    #[test]
    fn rosenthal_factor_examples() {
        assert!((rosenthal_factor(std::f64::consts::E, 1.53573).unwrap() - 1.53573).abs() < 1e-12);
        assert!(matches!(rosenthal_factor(1.5, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn series_covariance_matches_closed_form() {
        let m = FieldModel::series(1.0, 3, Innovation::Uniform).unwrap();
        let (x, y) = (0.3f64, 0.7f64);
        let want: f64 = (1..=3)
            .map(|k| {
                let k = k as f64;
                2.0 / (k * k) * (k * std::f64::consts::PI * x).sin() * (k * std::f64::consts::PI * y).sin()
            })
            .sum();
        assert!((m.covariance(&[x], &[y]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn zero_field_is_degenerate_for_theta_and_flat_for_phi() {
        let g = Grid::square(9).unwrap();
        let z = simulate(&FieldModel::gaussian(Covariance::Zero), &g, 10, 1).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(matches!(theta_alpha(&z, &[0.4, 0.4], 4.0), Err(Error::Degenerate(_))));
        let phi = natural_phi(&z, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(phi.eval(0.7), 0.0);
    }

    #[test]
    fn heavy_tails_limit_moments() {
        let g = Grid::line(9).unwrap();
        let m = FieldModel::series(1.5, 4, Innovation::SymmetricPareto { tail_index: 3.0 }).unwrap();
        let e = simulate(&m, &g, 100, 1).unwrap();
        assert!(matches!(natural_distance_p(&e, 4.0), Err(Error::MomentRange { .. })));
        assert!(natural_distance_p(&e, 2.0).is_ok());
        assert!(!m.has_exponential_moments());
    }

    #[test]
    fn v_functional_of_orlicz_distance_is_at_most_one() {
        use crate::geometry::{v_functional, Increments, MetricMeasureSpace};
        let g = Grid::line(33).unwrap();
        let e = simulate(&FieldModel::gaussian(Covariance::Brownian), &g, 200, 11).unwrap();
        for phi in [YoungFunction::power(4.0).unwrap(), YoungFunction::exp_quadratic()] {
            let d = natural_distance_phi(&e, &phi).unwrap();
            let space = MetricMeasureSpace::uniform_grid(&g).with_distance(d).unwrap();
            let v = v_functional(Increments::Replicas { values: e.values(), replicas: e.replicas() }, &phi, &space)
                .unwrap();
            assert!(v > 0.5 && v <= 1.0 + 1e-9, "V = {v}");
        }
    }
}
