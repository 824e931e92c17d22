//! Partial-sum fields, the limiting Gaussian field, norm-distribution
//! diagnostics for the CLT and the moment/Orlicz audits along the `n`
//! schedule.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{
    covariance_distance, natural_distance_p, natural_distance_psi, natural_distance_psi_gaussian, natural_phi, streams,
    theta_alpha_with, FieldModel, FieldSampler, PathEnsemble,
};
use crate::geometry::{
    embedding_check, fit_ball_exponent, ChainingGeometry, DistanceMatrix, EmbeddingDiagnostic, MetricMeasureSpace,
};
use crate::grand_lebesgue::{fundamental_value, rosenthal_multiplier, PsiFunction, ROSENTHAL_CONSTANT};
use crate::holder::{
    dyadic_lattice, rectangle_holder_norm_from, Grid, HolderPlan, ModulusSpec, RectangleModuli, SobolevPlan,
};
use crate::numeric::{gaussian_abs_moment, lp_norm_with_se, mean_and_se, DecayRule, SE_BATCHES};
use crate::orlicz::{
    c_phi_with, delta2_constant, orlicz_norm, phi_bar_symbol, young_from_symbol, ConvexSymbol, Delta2Grid,
    EmpiricalSample, YoungFunction, PHI_BAR_N_MAX,
};

/// `S_n`: each output replica is `n^{−1/2}` times the sum of `n` consecutive,
/// disjoint input replicas.
pub fn partial_sum_field(ens: &PathEnsemble, n: usize, out_replicas: usize) -> Result<PathEnsemble> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    let needed = n * out_replicas;
    if needed > ens.replicas() {
        return Err(Error::InsufficientReplicas { needed, available: ens.replicas() });
    }
    let len = ens.grid().len();
    let norm = 1.0 / (n as f64).sqrt();
    let mut values = vec![0.0; len * out_replicas];
    values.par_chunks_mut(len).enumerate().for_each(|(j, out)| {
        for i in 0..n {
            out.iter_mut().zip(ens.path(j * n + i)).for_each(|(o, v)| *o += v);
        }
        if n > 1 {
            out.iter_mut().for_each(|o| *o *= norm);
        }
    });
    PathEnsemble::new(ens.grid().clone(), out_replicas, ens.seed(), values, ens.moment_limit())
}

/// Gaussian field with the covariance of `model` (series models keep their
/// basis and draw Gaussian coefficients).
pub fn limit_field(model: &FieldModel, grid: &Grid, replicas: usize, seed: u64) -> Result<PathEnsemble> {
    let g = model.gaussian_counterpart()?;
    let stream = if matches!(model, FieldModel::Gaussian { .. }) { streams::FIELD } else { streams::LIMIT };
    Ok(FieldSampler::new(&g, grid)?.sample(replicas, seed, stream))
}

/// Two-sample Kolmogorov–Smirnov distance `sup_t |F₁(t) − F₂(t)|`.
pub fn ecdf_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("ECDF distance needs two nonempty samples".into()));
    }
    let sort = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(|x, y| x.total_cmp(y));
        s
    };
    let (a, b) = (sort(a), sort(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical_value(n1: usize, n2: usize, alpha: f64) -> f64 {
    let c = (-(0.5 * alpha).ln() / 2.0).sqrt();
    c * ((n1 + n2) as f64 / (n1 as f64 * n2 as f64)).sqrt()
}

/// Norm used for the CLT diagnostic.
#[derive(Clone)]
pub enum NormSpec {
    /// `H°(ρ)` with `ρ` a distance matrix on the grid points.
    Holder { rho: DistanceMatrix },
    /// `H_r°(ω)` evaluated over the dyadic lattice down to `min_cells` cells.
    Rectangle { omega: ModulusSpec, min_cells: usize },
}

/// A CLT experiment on a grid.
#[derive(Clone)]
pub struct CltExperiment {
    pub model: FieldModel,
    pub grid: Grid,
    pub n_schedule: Vec<usize>,
    pub replicas: usize,
    pub norm: NormSpec,
    pub seed: u64,
    /// Moment order `p` for the `d_p^{1−θ/p} << ρ` precondition; `None` skips it.
    pub precondition_p: Option<f64>,
}

impl CltExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.n_schedule.is_empty() || !self.n_schedule.windows(2).all(|w| w[1] > w[0]) || self.n_schedule[0] == 0 {
            return Err(Error::InvalidInput("n schedule must be positive and strictly increasing".into()));
        }
        if self.replicas < 100 {
            return Err(Error::InvalidInput("at least 100 replicas per n are required".into()));
        }
        if let NormSpec::Holder { rho } = &self.norm {
            if rho.len() != self.grid.len() {
                return Err(Error::InvalidInput("rho does not match the grid".into()));
            }
        }
        self.model.validate(&self.grid)
    }
}

/// One `n` of the CLT report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltRow {
    pub n: usize,
    pub ks_distance: f64,
    pub critical_value: f64,
    pub mean_norm: f64,
    /// Sorted norm sample, i.e. the ECDF support.
    pub ecdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub rows: Vec<CltRow>,
    pub limit_ecdf: Vec<f64>,
    /// Fraction of paths of `ξ` with finite norm and vanishing small-scale ratio.
    pub membership_xi: f64,
    pub membership_limit: f64,
    /// Dyadic levels available to the small-scale decay rule; fewer than
    /// `halvings + 1` levels make membership undecidable on this grid.
    pub profile_levels: usize,
    /// KS distances never increase, except within the 99% noise floor.
    pub decreasing: bool,
    pub noise_floor: f64,
    pub final_distance: f64,
    pub ball_exponent: Option<f64>,
    pub embedding: Option<EmbeddingDiagnostic>,
}

enum Evaluator {
    Holder(HolderPlan),
    Rectangle { omega: ModulusSpec, min_cells: usize },
}

impl Evaluator {
    fn levels(&self, grid: &Grid) -> usize {
        match self {
            Evaluator::Holder(plan) => plan.levels(),
            Evaluator::Rectangle { min_cells, .. } => {
                dyadic_lattice(grid, *min_cells).iter().map(|k| *k.iter().min().unwrap()).max().unwrap_or(0) + 1
            }
        }
    }

    fn new(norm: &NormSpec, grid: &Grid) -> Result<Self> {
        Ok(match norm {
            NormSpec::Holder { rho } => Evaluator::Holder(HolderPlan::new(grid, |a, b| rho.get(a, b))?),
            NormSpec::Rectangle { omega, min_cells } => {
                Evaluator::Rectangle { omega: omega.clone(), min_cells: *min_cells }
            }
        })
    }

    /// `(norm, member of the separable part)` for every path.
    fn norms(&self, ens: &PathEnsemble) -> Result<Vec<(f64, bool)>> {
        (0..ens.replicas())
            .into_par_iter()
            .map(|r| match self {
                Evaluator::Holder(plan) => {
                    let h = plan.evaluate_values(ens.path(r));
                    Ok((h.norm, h.norm.is_finite() && h.separable))
                }
                Evaluator::Rectangle { omega, min_cells } => {
                    let f = ens.field(r);
                    let h = rectangle_holder_norm_from(&RectangleModuli::new(&f), f.sup_abs(), omega, *min_cells)?;
                    Ok((h.norm, h.norm.is_finite() && h.separable))
                }
            })
            .collect()
    }
}

/// Norm-distribution CLT diagnostic: membership fractions, KS distance between
/// the norms of `S_n` and of the limiting field along the schedule, and a
/// noise-floored monotone-trend flag.
pub fn clt_verdict(exp: &CltExperiment) -> Result<CltReport> {
    exp.validate()?;
    let (mut ball_exponent, mut embedding) = (None, None);
    if let (Some(p), NormSpec::Holder { rho }) = (exp.precondition_p, &exp.norm) {
        let d2 = covariance_distance(&exp.model, &exp.grid)?;
        let space =
            MetricMeasureSpace::new(exp.grid.points(), d2.clone(), vec![1.0 / exp.grid.len() as f64; exp.grid.len()])?;
        let theta = fit_ball_exponent(&space)?.theta;
        if !(p > theta.max(2.0)) {
            return Err(Error::InvalidInput(format!(
                "precondition order p = {p} must exceed max(theta, 2) = {}",
                theta.max(2.0)
            )));
        }
        let diag = embedding_check(&d2.map(|v| v.powf(1.0 - theta / p)), rho, None, DecayRule::default())?;
        if !diag.verdict {
            return Err(Error::EmbeddingFailed(format!("d_p^(1-theta/p) << rho fails (theta = {theta:.4}, p = {p})")));
        }
        ball_exponent = Some(theta);
        embedding = Some(diag);
    }
    let eval = Evaluator::new(&exp.norm, &exp.grid)?;
    let sampler = FieldSampler::new(&exp.model, &exp.grid)?;
    let xi = sampler.sample(exp.replicas, exp.seed, streams::FIELD);
    let limit = limit_field(&exp.model, &exp.grid, exp.replicas, exp.seed ^ 0x5eed_1117)?;
    let member = |v: &[(f64, bool)]| v.iter().filter(|x| x.1).count() as f64 / v.len() as f64;
    let xi_norms = eval.norms(&xi)?;
    let limit_norms = eval.norms(&limit)?;
    let limit_vals: Vec<f64> = limit_norms.iter().map(|x| x.0).collect();
    let floor = ks_critical_value(exp.replicas, exp.replicas, 0.01);
    let mut rows = Vec::new();
    for (k, &n) in exp.n_schedule.iter().enumerate() {
        let vals: Vec<f64> = if n == 1 {
            xi_norms.iter().map(|x| x.0).collect()
        } else {
            // each n draws from its own seed so the rows are independent
            let s = sampler.sample_sums(n, exp.replicas, exp.seed.wrapping_add(k as u64 + 1), streams::FIELD);
            eval.norms(&s)?.into_iter().map(|x| x.0).collect()
        };
        let ks = ecdf_distance(&vals, &limit_vals)?;
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        rows.push(CltRow { n, ks_distance: ks, critical_value: floor, mean_norm: mean_and_se(&vals).0, ecdf: sorted });
    }
    let decreasing = rows.windows(2).all(|w| w[1].ks_distance <= w[0].ks_distance.max(floor));
    let final_distance = rows.last().map(|r| r.ks_distance).unwrap_or(f64::NAN);
    let mut limit_ecdf = limit_vals;
    limit_ecdf.sort_by(|a, b| a.total_cmp(b));
    Ok(CltReport {
        rows,
        limit_ecdf,
        membership_xi: member(&xi_norms),
        membership_limit: member(&limit_norms),
        profile_levels: eval.levels(&exp.grid),
        decreasing,
        noise_floor: floor,
        final_distance,
        ball_exponent,
        embedding,
    })
}

/// Ensemble of `S_n` for the schedule index `k`; `n = 1` is `ξ` itself.
fn partial_sums_for(sampler: &FieldSampler, n: usize, replicas: usize, seed: u64) -> PathEnsemble {
    sampler.sample_sums(n, replicas, seed.wrapping_add(n as u64), streams::FIELD)
}

/// Inputs of [`tightness_audit`].
#[derive(Clone)]
pub struct TightnessConfig {
    pub model: FieldModel,
    pub grid: Grid,
    pub n_schedule: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub p_grid: Vec<f64>,
    pub theta: f64,
    pub c_theta: f64,
    pub psi: PsiFunction,
    pub c_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessRow {
    pub n: usize,
    pub p: f64,
    pub statistic: f64,
    pub standard_error: f64,
    pub bound: f64,
    /// `statistic / bound`.
    pub ratio: f64,
    /// Replica mean of the smallest per-path `Z` in the pathwise bound
    /// `|S_n(x₁) − S_n(x₂)| ≤ 12·(4C(θ)Z)^{1/p}·d_p^{1−θ/p}(x₁, x₂)/(1 − θ/p)`.
    pub mean_z: f64,
    pub z_standard_error: f64,
    /// Either the norm exceeds its bound or `E Z` exceeds one, beyond three standard errors.
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub rows: Vec<TightnessRow>,
    pub violations: usize,
    pub worst_ratio: f64,
    pub regime: &'static str,
    pub distance: &'static str,
}

/// `12·4^{1/p}·C(θ)^{1/p}·ψ_{θ,R}(p)` with `ψ_{θ,R} = ψ·C_R p/(e ln p)/(1 − θ/p)`.
pub fn tightness_bound(p: f64, theta: f64, c_theta: f64, psi: &PsiFunction, c_r: f64) -> f64 {
    12.0 * 4f64.powf(1.0 / p) * c_theta.powf(1.0 / p) * psi.eval(p) * rosenthal_multiplier(p, c_r) / (1.0 - theta / p)
}

/// For each `n` and `p`: the empirical `L_p` norm of
/// `sup |S_n(x₁) − S_n(x₂)| / d_(ψ)^{1−θ/p}(x₁, x₂)` against the explicit bound.
pub fn tightness_audit(cfg: &TightnessConfig) -> Result<TightnessReport> {
    let (a, b) = cfg.psi.support();
    if !(a > cfg.theta) {
        return Err(Error::SupportBelowTheta { a, theta: cfg.theta });
    }
    let lo = a.max(2.0);
    if let Some(&p) = cfg.p_grid.iter().find(|&&p| !(p > lo && p < b)) {
        return Err(Error::InvalidInput(format!("p = {p} outside ({lo}, {b})")));
    }
    if cfg.n_schedule.is_empty() || cfg.replicas < 2 {
        return Err(Error::InvalidInput("need a schedule and at least two replicas".into()));
    }
    let sampler = FieldSampler::new(&cfg.model, &cfg.grid)?;
    let (dpsi, source) = if cfg.model.is_gaussian() {
        (natural_distance_psi_gaussian(&cfg.model, &cfg.grid, &cfg.psi)?, "closed-form")
    } else {
        let xi = sampler.sample(cfg.replicas, cfg.seed ^ 0xd15_7a4c, streams::FIELD);
        (natural_distance_psi(&xi, &cfg.psi)?, "empirical")
    };
    let n = cfg.grid.len();
    let pairs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, dpsi.get(i, j)))
        .filter(|t| t.2 > 0.0)
        .collect();
    // Gaussian partial sums share the covariance of ξ, so d_p = γ_p·d₂ exactly
    let d2 = if cfg.model.is_gaussian() { Some(covariance_distance(&cfg.model, &cfg.grid)?) } else { None };
    let dp_for = |p: f64, s: &PathEnsemble| -> Result<DistanceMatrix> {
        match &d2 {
            Some(d) => {
                let g = gaussian_abs_moment(p);
                Ok(DistanceMatrix::from_fn(n, |i, j| g * d.get(i, j)))
            }
            None => Ok(natural_distance_p(s, p)?.distance),
        }
    };
    let mut rows = Vec::new();
    for &ns in &cfg.n_schedule {
        let s = partial_sums_for(&sampler, ns, cfg.replicas, cfg.seed);
        for &p in &cfg.p_grid {
            let beta = 1.0 - cfg.theta / p;
            let w: Vec<f64> = pairs.iter().map(|t| t.2.powf(-beta)).collect();
            let stats: Vec<f64> = (0..cfg.replicas)
                .into_par_iter()
                .map(|r| {
                    let v = s.path(r);
                    pairs.iter().zip(&w).map(|(&(i, j, _), &wk)| (v[i] - v[j]).abs() * wk).fold(0.0, f64::max)
                })
                .collect();
            let (stat, se) = lp_norm_with_se(&stats, p);
            let bound = tightness_bound(p, cfg.theta, cfg.c_theta, &cfg.psi, cfg.c_r);
            let (mean_z, z_se) = pathwise_z(&s, &pairs, &dp_for(p, &s)?, p, cfg)?;
            rows.push(TightnessRow {
                n: ns,
                p,
                statistic: stat,
                standard_error: se,
                bound,
                ratio: stat / bound,
                mean_z,
                z_standard_error: z_se,
                violation: stat - 3.0 * se > bound || mean_z - 3.0 * z_se > 1.0,
            });
        }
    }
    Ok(TightnessReport {
        violations: rows.iter().filter(|r| r.violation).count(),
        worst_ratio: rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
        rows,
        regime: "explicit constant",
        distance: source,
    })
}

fn pathwise_z(
    s: &PathEnsemble,
    pairs: &[(usize, usize, f64)],
    dp: &DistanceMatrix,
    p: f64,
    cfg: &TightnessConfig,
) -> Result<(f64, f64)> {
    let beta = 1.0 - cfg.theta / p;
    let scale = beta / (12.0 * (4.0 * cfg.c_theta).powf(1.0 / p));
    let w: Vec<(usize, usize, f64)> = pairs
        .iter()
        .filter_map(|&(i, j, _)| {
            let d = dp.get(i, j);
            (d > 0.0).then(|| (i, j, scale / d.powf(beta)))
        })
        .collect();
    let z: Vec<f64> = (0..s.replicas())
        .into_par_iter()
        .map(|r| {
            let v = s.path(r);
            w.iter().map(|&(i, j, wk)| (v[i] - v[j]).abs() * wk).fold(0.0, f64::max).powf(p)
        })
        .collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pathwise constant".into()));
    }
    Ok(mean_and_se(&z))
}

/// Inputs of [`rectangle_clt_audit`]; the moment weight is `ν(p) = θ_α(p)·γ(p)`.
#[derive(Clone)]
pub struct RectangleAuditConfig {
    pub model: FieldModel,
    pub grid: Grid,
    pub n_schedule: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub alpha: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub gamma: PsiFunction,
    pub c_r: f64,
    pub min_cells: usize,
    /// Target modulus `ω₀` for the divergence check and the CLT run.
    pub omega0: Option<ModulusSpec>,
    /// Run the CLT diagnostic in `H_r°(ω₀)` when the divergence check passes.
    pub run_clt: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectangleRow {
    pub n: usize,
    pub delta: Vec<f64>,
    pub lhs: f64,
    pub standard_error: f64,
    pub rhs: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceCheck {
    /// `(2^{-k}, min ratio over lattice points with every δᵢ ≤ 2^{-k})`.
    pub profile: Vec<(f64, f64)>,
    pub diverges: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectangleAuditReport {
    /// `(p, θ_α(p), standard error)`.
    pub theta_alpha: Vec<(f64, f64, f64)>,
    pub rows: Vec<RectangleRow>,
    pub violations: usize,
    pub divergence: Option<DivergenceCheck>,
    pub clt: Option<CltReport>,
}

fn gamma_r(gamma: &PsiFunction, p_grid: &[f64], c_r: f64) -> Result<PsiFunction> {
    let (a, b) = gamma.support();
    let lo = p_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = p_grid.iter().copied().fold(0.0, f64::max);
    if !(lo > a && hi < b && lo < hi) {
        return Err(Error::GammaNotPsi);
    }
    let g = gamma.clone();
    PsiFunction::new(lo / (1.0 + 1e-3), hi / (1.0 - 1e-3), move |p| g.eval(p) / rosenthal_multiplier(p.max(2.0), c_r))
}

/// Checks `‖Ω(S_n, δ⃗)‖_{Gν} ≤ δ^α φ(Gγ_R, 1/δ)` over the dyadic lattice, with
/// `θ_α` estimated from `ξ`; optionally the `ω₀` divergence check and the CLT
/// diagnostic in the rectangle norm.
pub fn rectangle_clt_audit(cfg: &RectangleAuditConfig) -> Result<RectangleAuditReport> {
    let d = cfg.grid.dim();
    if cfg.alpha.len() != d || cfg.p_grid.is_empty() {
        return Err(Error::InvalidInput("alpha needs one entry per axis and the p grid must be nonempty".into()));
    }
    let gr = gamma_r(&cfg.gamma, &cfg.p_grid, cfg.c_r)?;
    let sampler = FieldSampler::new(&cfg.model, &cfg.grid)?;
    let xi = sampler.sample(cfg.replicas, cfg.seed ^ 0x7e7a, streams::FIELD);
    let mut theta = Vec::new();
    for &p in &cfg.p_grid {
        let plan = SobolevPlan::new(&cfg.grid, &cfg.alpha, p)?;
        match theta_alpha_with(&plan, &xi, &cfg.alpha, p) {
            Ok(e) => theta.push((p, e.value, e.standard_error)),
            Err(Error::Degenerate(_)) => theta.push((p, 0.0, 0.0)),
            Err(e) => return Err(e),
        }
    }
    let lattice: Vec<Vec<f64>> = dyadic_lattice(&cfg.grid, cfg.min_cells)
        .into_iter()
        .map(|ks| ks.iter().map(|&k| 2f64.powi(-(k as i32))).collect())
        .collect();
    let rhs: Vec<f64> = lattice
        .iter()
        .map(|delta| {
            let prod: f64 = delta.iter().product();
            let da: f64 = delta.iter().zip(&cfg.alpha).map(|(x, a)| x.powf(*a)).product();
            Ok(da * fundamental_value(&gr, 1.0 / prod)?)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &n in &cfg.n_schedule {
        let s = partial_sums_for(&sampler, n, cfg.replicas, cfg.seed);
        let moduli: Vec<RectangleModuli> =
            (0..cfg.replicas).into_par_iter().map(|r| RectangleModuli::new(&s.field(r))).collect();
        for (delta, &rh) in lattice.iter().zip(&rhs) {
            let om: Vec<f64> = moduli.iter().map(|m| m.omega(delta)).collect();
            let (mut lhs, mut se) = (0.0f64, 0.0f64);
            for &(p, th, _) in &theta {
                let nu = th * cfg.gamma.eval(p);
                let (m, e) = lp_norm_with_se(&om, p);
                if m == 0.0 {
                    continue;
                }
                let v = if nu > 0.0 { m / nu } else { f64::INFINITY };
                if v > lhs {
                    lhs = v;
                    se = e / nu;
                }
            }
            rows.push(RectangleRow {
                n,
                delta: delta.clone(),
                lhs,
                standard_error: se,
                rhs: rh,
                violation: lhs - 3.0 * se > rh,
            });
        }
    }
    let divergence = match &cfg.omega0 {
        Some(w0) => Some(divergence_check(w0, &cfg.alpha, &gr, 40)?),
        None => None,
    };
    let clt = match (&cfg.omega0, &divergence) {
        (Some(w0), Some(dv)) if cfg.run_clt && dv.diverges => Some(clt_verdict(&CltExperiment {
            model: cfg.model.clone(),
            grid: cfg.grid.clone(),
            n_schedule: cfg.n_schedule.clone(),
            replicas: cfg.replicas,
            norm: NormSpec::Rectangle { omega: w0.clone(), min_cells: cfg.min_cells },
            seed: cfg.seed,
            precondition_p: None,
        })?),
        _ => None,
    };
    Ok(RectangleAuditReport {
        theta_alpha: theta,
        violations: rows.iter().filter(|r| r.violation).count(),
        rows,
        divergence,
        clt,
    })
}

/// Ratio `ω₀(δ⃗) / (δ^α φ(Gγ_R, 1/δ))` on the lattice `δᵢ = 2^{-kᵢ}`,
/// `kᵢ ≤ levels`. The profile takes, for each `k`, the minimum over points
/// with every `kᵢ ≥ k`; it diverges when it strictly increases over the finer
/// half of the levels and grows by more than 1.5 there.
pub fn divergence_check(
    omega0: &ModulusSpec,
    alpha: &[f64],
    gamma_r: &PsiFunction,
    levels: usize,
) -> Result<DivergenceCheck> {
    let d = alpha.len();
    let size = (levels + 1).pow(d as u32);
    let ratio: Vec<f64> = (0..size)
        .into_par_iter()
        .map(|flat| {
            let mut ks = vec![0usize; d];
            let mut r = flat;
            for k in ks.iter_mut().rev() {
                *k = r % (levels + 1);
                r /= levels + 1;
            }
            let delta: Vec<f64> = ks.iter().map(|&k| 2f64.powi(-(k as i32))).collect();
            let prod: f64 = delta.iter().product();
            let da: f64 = delta.iter().zip(alpha).map(|(x, a)| x.powf(*a)).product();
            let w = omega0
                .eval_rect(&delta)
                .ok_or_else(|| Error::InvalidInput("omega0 must be a rectangle modulus".into()))?;
            Ok(w / (da * fundamental_value(gamma_r, 1.0 / prod)?))
        })
        .collect::<Result<_>>()?;
    let mut profile = vec![f64::INFINITY; levels + 1];
    for (flat, &r) in ratio.iter().enumerate() {
        let mut rem = flat;
        let mut kmin = usize::MAX;
        for _ in 0..d {
            kmin = kmin.min(rem % (levels + 1));
            rem /= levels + 1;
        }
        for p in profile.iter_mut().take(kmin + 1) {
            *p = p.min(r);
        }
    }
    let half = &profile[levels / 2..];
    let diverges = half.windows(2).all(|w| w[1] > w[0]) && half[half.len() - 1] > 1.5 * half[0];
    Ok(DivergenceCheck {
        profile: profile.iter().enumerate().map(|(k, &v)| (2f64.powi(-(k as i32)), v)).collect(),
        diverges,
    })
}

/// Inputs of [`kramer_clt_audit`].
#[derive(Clone)]
pub struct KramerConfig {
    pub model: FieldModel,
    pub grid: Grid,
    pub n_schedule: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    /// `0 = λ₀ < λ₁ < …` for the empirical natural function.
    pub lambda_grid: Vec<f64>,
    /// Target distance for the final CLT diagnostic (needs `τ << ρ`).
    pub rho: Option<DistanceMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KramerRow {
    pub n: usize,
    pub orlicz_norm: f64,
    pub standard_error: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KramerReport {
    pub k_phi_bar: f64,
    pub c_phi_bar: f64,
    pub sup_tau: f64,
    pub rows: Vec<KramerRow>,
    pub violations: usize,
    /// Which displayed constant is audited.
    pub constant: &'static str,
    pub embedding: Option<EmbeddingDiagnostic>,
    pub clt: Option<CltReport>,
}

/// Orlicz norm of a sample with a standard error from contiguous batches.
pub fn orlicz_norm_with_se(values: &[f64], phi: &YoungFunction) -> Result<(f64, f64)> {
    let full = orlicz_norm(&EmpiricalSample::uniform(values.to_vec())?, phi)?;
    if values.len() < 2 * SE_BATCHES {
        return Ok((full, 0.0));
    }
    let size = values.len() / SE_BATCHES;
    let batch: Vec<f64> = (0..SE_BATCHES)
        .map(|k| {
            let end = if k == SE_BATCHES - 1 { values.len() } else { (k + 1) * size };
            orlicz_norm(&EmpiricalSample::uniform(values[k * size..end].to_vec())?, phi)
        })
        .collect::<Result<_>>()?;
    let (_, se) = mean_and_se(&batch);
    Ok((full, se))
}

/// Builds `φ`, `φ̄` and `Φ̄`, the `τ` distance under `Φ̄` with the uniform
/// measure, and checks `‖C(Φ̄) sup |S_n(x₁) − S_n(x₂)|/τ(x₁, x₂)‖_{L(Φ̄)} ≤ 1`
/// for every `n` with three standard errors of slack.
pub fn kramer_clt_audit(cfg: &KramerConfig) -> Result<KramerReport> {
    if !cfg.model.has_exponential_moments() {
        let lambda = cfg.lambda_grid.iter().copied().find(|&l| l > 0.0).unwrap_or(0.0);
        return Err(Error::KramerViolation { lambda });
    }
    if cfg.n_schedule.is_empty() || cfg.replicas < 2 {
        return Err(Error::InvalidInput("need a schedule and at least two replicas".into()));
    }
    let sampler = FieldSampler::new(&cfg.model, &cfg.grid)?;
    let pts = cfg.grid.points();
    let phi_bar_young = if cfg.model.is_gaussian() {
        let s2 =
            pts.iter().map(|x| cfg.model.covariance(x, x)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        if !(s2 > 0.0) {
            return Err(Error::Degenerate("field variance vanishes".into()));
        }
        // the quadratic symbol is its own φ̄
        young_from_symbol(&ConvexSymbol::quadratic(s2))?
    } else {
        let xi = sampler.sample(cfg.replicas, cfg.seed ^ 0x4b7a, streams::FIELD);
        let phi = natural_phi(&xi, &cfg.lambda_grid).map_err(|e| match e {
            Error::MgfOverflow { lambda } => Error::KramerViolation { lambda },
            e => e,
        })?;
        let lmax = *cfg.lambda_grid.last().unwrap();
        let grid: Vec<f64> = cfg.lambda_grid.iter().copied().filter(|&l| l < lmax).collect();
        young_from_symbol(&phi_bar_symbol(&phi, &grid, PHI_BAR_N_MAX)?)?
    };
    let d2 = delta2_constant(&phi_bar_young, &Delta2Grid::default());
    let c = c_phi_with(&phi_bar_young, &d2)?;
    let ensembles: Vec<PathEnsemble> =
        cfg.n_schedule.iter().map(|&n| partial_sums_for(&sampler, n, cfg.replicas, cfg.seed)).collect();
    let n = cfg.grid.len();
    let dist = if cfg.model.is_gaussian() {
        let z = orlicz_norm(&EmpiricalSample::standard_normal_quadrature(0.01, 12.0), &phi_bar_young)?;
        covariance_distance(&cfg.model, &cfg.grid)?.map(|v| z * v)
    } else {
        // the largest increment norm along the schedule majorises every S_n
        let vals: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if j <= i {
                    return Ok(0.0);
                }
                let mut best = 0.0f64;
                for e in &ensembles {
                    let inc: Vec<f64> = e.paths().map(|p| p[i] - p[j]).collect();
                    best = best.max(orlicz_norm(&EmpiricalSample::uniform(inc)?, &phi_bar_young)?);
                }
                Ok(best)
            })
            .collect::<Result<_>>()?;
        DistanceMatrix::from_fn(n, |i, j| vals[i * n + j])
    };
    let space = MetricMeasureSpace::new(pts, dist, vec![1.0 / n as f64; n])?;
    let geo = ChainingGeometry::new(&space);
    let tau = geo.tau_matrix(&phi_bar_young);
    let sup_tau = tau.max();
    if !sup_tau.is_finite() {
        let w = geo.zero_mass_witnesses();
        let (center, radius) = w.first().map(|w| (w.center, w.radius)).unwrap_or((0, 0.0));
        return Err(Error::ZeroMass { center, radius });
    }
    let pairs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, tau.get(i, j)))
        .filter(|t| t.2 > 0.0)
        .collect();
    let mut rows = Vec::new();
    for (&ns, e) in cfg.n_schedule.iter().zip(&ensembles) {
        let stats: Vec<f64> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let v = e.path(r);
                c * pairs.iter().map(|&(i, j, t)| (v[i] - v[j]).abs() / t).fold(0.0, f64::max)
            })
            .collect();
        let (norm, se) = orlicz_norm_with_se(&stats, &phi_bar_young)?;
        rows.push(KramerRow { n: ns, orlicz_norm: norm, standard_error: se, violation: norm - 3.0 * se > 1.0 });
    }
    let (embedding, clt) = match &cfg.rho {
        Some(rho) => {
            let diag = embedding_check(&tau, rho, None, DecayRule::default())?;
            let clt = if diag.verdict {
                Some(clt_verdict(&CltExperiment {
                    model: cfg.model.clone(),
                    grid: cfg.grid.clone(),
                    n_schedule: cfg.n_schedule.clone(),
                    replicas: cfg.replicas.max(100),
                    norm: NormSpec::Holder { rho: rho.clone() },
                    seed: cfg.seed,
                    precondition_p: None,
                })?)
            } else {
                None
            };
            (Some(diag), clt)
        }
        None => (None, None),
    };
    Ok(KramerReport {
        k_phi_bar: d2.k,
        c_phi_bar: c,
        sup_tau,
        violations: rows.iter().filter(|r| r.violation).count(),
        rows,
        constant: "C(Phi-bar), uniform in n",
        embedding,
        clt,
    })
}

/// Default Rosenthal constant for symmetric laws.
pub const DEFAULT_C_R: f64 = ROSENTHAL_CONSTANT;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{simulate, Covariance, Innovation};

    #[test]
    fn ecdf_distance_examples() {
        assert_eq!(ecdf_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ecdf_distance(&[0.0, 1.0], &[5.0, 6.0]).unwrap(), 1.0);
        assert!((ecdf_distance(&[0.0, 1.0], &[0.5, 1.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!(ecdf_distance(&[], &[1.0]).is_err());
        assert!((ks_critical_value(2000, 2000, 0.01) - 0.0515).abs() < 2e-4);
    }

    #[test]
    fn partial_sums_need_enough_replicas() {
        let g = Grid::line(9).unwrap();
        let e = simulate(&FieldModel::gaussian(Covariance::Brownian), &g, 10, 1).unwrap();
        assert_eq!(partial_sum_field(&e, 1, 10).unwrap(), e);
        assert_eq!(partial_sum_field(&e, 4, 3), Err(Error::InsufficientReplicas { needed: 12, available: 10 }));
        let s = partial_sum_field(&e, 2, 5).unwrap();
        assert!((s.path(1)[4] - (e.path(2)[4] + e.path(3)[4]) / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn limit_field_of_gaussian_model_is_the_model() {
        let g = Grid::line(17).unwrap();
        let m = FieldModel::gaussian(Covariance::Brownian);
        assert_eq!(limit_field(&m, &g, 5, 9).unwrap(), simulate(&m, &g, 5, 9).unwrap());
    }

    #[test]
    fn heavy_tails_fail_kramer() {
        let cfg = KramerConfig {
            model: FieldModel::series(1.5, 8, Innovation::SymmetricPareto { tail_index: 3.0 }).unwrap(),
            grid: Grid::line(9).unwrap(),
            n_schedule: vec![1],
            replicas: 10,
            seed: 0,
            lambda_grid: vec![0.0, 0.5],
            rho: None,
        };
        assert!(matches!(kramer_clt_audit(&cfg), Err(Error::KramerViolation { .. })));
    }

    #[test]
    fn zero_field_tightness_ratios_vanish() {
        let cfg = TightnessConfig {
            model: FieldModel::gaussian(Covariance::Zero),
            grid: Grid::line(9).unwrap(),
            n_schedule: vec![1, 4],
            replicas: 20,
            seed: 1,
            p_grid: vec![4.0],
            theta: 2.0,
            c_theta: 1.0,
            psi: PsiFunction::sqrt(3.0, f64::INFINITY).unwrap(),
            c_r: DEFAULT_C_R,
        };
        let r = tightness_audit(&cfg).unwrap();
        assert!(r.rows.iter().all(|row| row.statistic == 0.0 && !row.violation));
        let bad = TightnessConfig { theta: 3.5, ..cfg };
        assert!(matches!(tightness_audit(&bad), Err(Error::SupportBelowTheta { .. })));
    }

    #[test]
    fn log_factor_forces_divergence() {
        let alpha = vec![0.4, 0.4];
        let gamma = PsiFunction::sqrt(2.5, f64::INFINITY).unwrap();
        let gr = gamma_r(&gamma, &[3.0, 4.0, 6.0, 8.0], DEFAULT_C_R).unwrap();
        let a_prime = gr.support().0;
        let w0 = ModulusSpec::rectangle(move |d: &[f64]| {
            let p: f64 = d.iter().product();
            p.powf(0.4 - 1.0 / a_prime) * (std::f64::consts::E + 1.0 / p).ln()
        });
        assert!(divergence_check(&w0, &alpha, &gr, 40).unwrap().diverges);
        let same = ModulusSpec::rectangle(|d: &[f64]| d.iter().product::<f64>().powf(0.4));
        assert!(!divergence_check(&same, &alpha, &gr, 40).unwrap().diverges);
    }
}
