//! Finite metric-measure spaces and the chaining functionals built on their
//! ball measures.
//!
//! Ball measures `r ↦ m(B(r, x))` are right-continuous step functions on a
//! finite space, so the integrals defining `w` and `τ` are evaluated exactly
//! as finite sums over the sorted distances from each centre.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::holder::{Grid, GridField};
use crate::numeric::{log_grid, DecayRule};
use crate::orlicz::YoungFunction;

/// Dense symmetric distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidInput(format!("distance matrix needs {} entries", n * n)));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidInput("distance matrix diagonal must vanish".into()));
            }
            for j in 0..i {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !(a >= 0.0) || !(b >= 0.0) || (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::InvalidInput(format!(
                        "distance matrix not symmetric/nonnegative at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn from_fn<F: Fn(usize, usize) -> f64 + Sync>(n: usize, f: F) -> Self {
        let mut values = vec![0.0; n * n];
        values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                if i != j {
                    *v = if i < j { f(i, j) } else { f(j, i) };
                }
            }
        });
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, &v| m.max(v))
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> Self {
        Self { n: self.n, values: self.values.par_iter().map(|&v| if v == 0.0 { 0.0 } else { f(v) }).collect() }
    }
}

/// Result of a triangle-inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleCheck {
    pub triples: usize,
    pub violations: usize,
    pub worst_excess: f64,
}

/// Checks `d(a, c) ≤ d(a, b) + d(b, c)`: every triple when `n ≤ full_limit`,
/// otherwise `samples` random triples. Infinite entries are skipped.
pub fn triangle_check(d: &DistanceMatrix, full_limit: usize, samples: usize, seed: u64) -> TriangleCheck {
    let n = d.len();
    let test = |a: usize, b: usize, c: usize| -> Option<f64> {
        let (ac, ab, bc) = (d.get(a, c), d.get(a, b), d.get(b, c));
        if !ac.is_finite() || !ab.is_finite() || !bc.is_finite() {
            return None;
        }
        Some(ac - (ab + bc) - 1e-12 * (1.0 + ac))
    };
    let fold = |acc: (usize, usize, f64), e: Option<f64>| match e {
        None => acc,
        Some(e) => (acc.0 + 1, acc.1 + (e > 0.0) as usize, acc.2.max(e)),
    };
    let (triples, violations, worst) = if n <= full_limit {
        (0..n)
            .into_par_iter()
            .map(|a| {
                let mut acc = (0usize, 0usize, f64::NEG_INFINITY);
                for b in 0..n {
                    for c in 0..n {
                        acc = fold(acc, test(a, b, c));
                    }
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0, 0, f64::NEG_INFINITY), |x, y| (x.0 + y.0, x.1 + y.1, x.2.max(y.2)))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = (0usize, 0usize, f64::NEG_INFINITY);
        for _ in 0..samples {
            let (a, b, c) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
            acc = fold(acc, test(a, b, c));
        }
        acc
    };
    TriangleCheck { triples, violations, worst_excess: worst.max(0.0) }
}

/// A finite set of points in `[0,1]^d` with a distance matrix and a
/// probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMeasureSpace {
    coords: Vec<Vec<f64>>,
    dist: DistanceMatrix,
    weights: Vec<f64>,
}

impl MetricMeasureSpace {
    pub fn new(coords: Vec<Vec<f64>>, dist: DistanceMatrix, weights: Vec<f64>) -> Result<Self> {
        let n = coords.len();
        if n == 0 || dist.len() != n || weights.len() != n {
            return Err(Error::InvalidInput("points, distances and weights must agree in size".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { coords, dist, weights })
    }

    /// Grid points with Euclidean distance and uniform weights.
    pub fn uniform_grid(grid: &Grid) -> Self {
        let n = grid.len();
        Self {
            coords: grid.points(),
            dist: DistanceMatrix::from_fn(n, |a, b| grid.euclidean(a, b)),
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Same points and weights, different distance.
    pub fn with_distance(&self, dist: DistanceMatrix) -> Result<Self> {
        Self::new(self.coords.clone(), dist, self.weights.clone())
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.dist
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn diameter(&self) -> f64 {
        self.dist.max()
    }

    /// `m(B(r, x))` for the closed ball.
    pub fn ball_measure(&self, x: usize, r: f64) -> f64 {
        self.dist.row(x).iter().zip(&self.weights).filter(|(&d, _)| d <= r).map(|(_, &w)| w).sum()
    }

    /// Sorted distinct radii from `x` with the ball mass on each step.
    pub fn profile(&self, x: usize) -> BallProfile {
        let mut pairs: Vec<(f64, f64)> = self.dist.row(x).iter().copied().zip(self.weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut radii = Vec::new();
        let mut mass = Vec::new();
        let mut acc = 0.0;
        for (d, w) in pairs {
            acc += w;
            if radii.last() == Some(&d) {
                *mass.last_mut().unwrap() = acc;
            } else {
                radii.push(d);
                mass.push(acc);
            }
        }
        BallProfile { radii, mass }
    }
}

/// `r ↦ m(B(r, x))` as a step function: equal to `mass[k]` on `[radii[k], radii[k+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallProfile {
    pub radii: Vec<f64>,
    pub mass: Vec<f64>,
}

impl BallProfile {
    fn step(&self, r: f64) -> usize {
        self.radii.partition_point(|&v| v <= r).saturating_sub(1)
    }

    pub fn measure(&self, r: f64) -> f64 {
        if r < self.radii[0] {
            0.0
        } else {
            self.mass[self.step(r)]
        }
    }

    /// Exact `∫₀^δ g(m(B(r, x))) dr`, together with the radius where a
    /// zero-mass step with infinite integrand was crossed.
    fn integrator<G: Fn(f64) -> f64>(&self, g: G) -> StepIntegral {
        let k = self.radii.len();
        let vals: Vec<f64> = self.mass.iter().map(|&m| g(m)).collect();
        let mut prefix = vec![0.0; k];
        for i in 1..k {
            let len = self.radii[i] - self.radii[i - 1];
            prefix[i] = prefix[i - 1] + if len > 0.0 { len * vals[i - 1] } else { 0.0 };
        }
        StepIntegral { radii: self.radii.clone(), vals, prefix }
    }
}

#[derive(Debug, Clone)]
struct StepIntegral {
    radii: Vec<f64>,
    vals: Vec<f64>,
    prefix: Vec<f64>,
}

impl StepIntegral {
    fn at(&self, delta: f64) -> f64 {
        if delta <= self.radii[0] {
            return 0.0;
        }
        let k = self.radii.partition_point(|&v| v <= delta) - 1;
        let tail = delta - self.radii[k];
        self.prefix[k] + if tail > 0.0 { tail * self.vals[k] } else { 0.0 }
    }
}

/// Ball profiles of every centre, computed once.
#[derive(Debug, Clone)]
pub struct ChainingGeometry {
    space: MetricMeasureSpace,
    profiles: Vec<BallProfile>,
}

impl ChainingGeometry {
    pub fn new(space: &MetricMeasureSpace) -> Self {
        let profiles = (0..space.len()).into_par_iter().map(|x| space.profile(x)).collect();
        Self { space: space.clone(), profiles }
    }

    pub fn space(&self) -> &MetricMeasureSpace {
        &self.space
    }

    pub fn profile(&self, x: usize) -> &BallProfile {
        &self.profiles[x]
    }

    fn integrals<G: Fn(f64) -> f64 + Sync>(&self, g: G) -> Vec<StepIntegral> {
        self.profiles.par_iter().map(|p| p.integrator(&g)).collect()
    }

    /// Matrix of `w(x₁, x₂) = 6 ∫₀^{d} [Φ⁻¹(4V/m²(B(r,x₁))) + Φ⁻¹(4V/m²(B(r,x₂)))] dr`.
    pub fn w_matrix(&self, phi: &YoungFunction, v: f64) -> Result<DistanceMatrix> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("V must be positive and finite, got {v}")));
        }
        let ints = self.integrals(|m| phi.inverse(4.0 * v / (m * m)));
        let d = self.space.distances();
        Ok(DistanceMatrix::from_fn(self.space.len(), |a, b| {
            let r = d.get(a, b);
            6.0 * (ints[a].at(r) + ints[b].at(r))
        }))
    }

    /// Matrix of `τ(x₁, x₂) = max_i ∫₀^{d} Φ⁻¹(1/m(B(r, xᵢ))) dr`.
    pub fn tau_matrix(&self, phi: &YoungFunction) -> DistanceMatrix {
        let ints = self.integrals(|m| phi.inverse(1.0 / m));
        let d = self.space.distances();
        DistanceMatrix::from_fn(self.space.len(), |a, b| {
            let r = d.get(a, b);
            ints[a].at(r).max(ints[b].at(r))
        })
    }

    /// Centres whose small balls carry no mass, with the radius up to which
    /// the mass vanishes.
    pub fn zero_mass_witnesses(&self) -> Vec<ZeroMassWitness> {
        self.profiles
            .iter()
            .enumerate()
            .filter_map(|(x, p)| {
                (p.mass[0] == 0.0 && p.radii.len() > 1).then(|| ZeroMassWitness { center: x, radius: p.radii[1] })
            })
            .collect()
    }
}

/// A centre `x` with `m(B(r, x)) = 0` for `r < radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroMassWitness {
    pub center: usize,
    pub radius: f64,
}

/// `w(x₁, x₂)`; `+∞` when a zero-mass ball is crossed.
pub fn w_distance(space: &MetricMeasureSpace, phi: &YoungFunction, v: f64, x1: usize, x2: usize) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::InvalidInput(format!("V must be positive, got {v}")));
    }
    let r = space.distances().get(x1, x2);
    let g = |m: f64| phi.inverse(4.0 * v / (m * m));
    Ok(6.0 * (space.profile(x1).integrator(g).at(r) + space.profile(x2).integrator(g).at(r)))
}

/// `τ(x₁, x₂)`; `+∞` when a zero-mass ball is crossed.
pub fn tau_distance(space: &MetricMeasureSpace, phi: &YoungFunction, x1: usize, x2: usize) -> f64 {
    let r = space.distances().get(x1, x2);
    let g = |m: f64| phi.inverse(1.0 / m);
    space.profile(x1).integrator(g).at(r).max(space.profile(x2).integrator(g).at(r))
}

/// Fitted ball-measure exponent: `m²(B(r, x)) ≥ r^θ / C(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallExponentFit {
    pub theta: f64,
    pub c_theta: f64,
    /// `max (r^θ/C − m²)` over the step endpoints; zero by construction.
    pub residual: f64,
    /// `(r, median over centres of m²(B(r, x)))` used for the slope.
    pub samples: Vec<(f64, f64)>,
}

/// Least-squares slope of `log median_x m²(B(r, x))` against `log r` over 32
/// radii in `[4h₀, diam/8]` (`h₀` the smallest positive distance), then the
/// smallest `C(θ)` making the bound hold for every centre and radius.
pub fn fit_ball_exponent(space: &MetricMeasureSpace) -> Result<BallExponentFit> {
    let geo = ChainingGeometry::new(space);
    fit_ball_exponent_with(&geo)
}

/// [`fit_ball_exponent`] on precomputed profiles.
pub fn fit_ball_exponent_with(geo: &ChainingGeometry) -> Result<BallExponentFit> {
    let space = geo.space();
    let diam = space.diameter();
    if !(diam > 0.0) {
        return Err(Error::Degenerate("all distances vanish".into()));
    }
    let h0 = space.distances().values().iter().copied().filter(|&v| v > 1e-9 * diam).fold(f64::INFINITY, f64::min);
    let (lo, hi) = if 4.0 * h0 < diam / 8.0 { (4.0 * h0, diam / 8.0) } else { (h0, diam) };
    let radii = if lo < hi { log_grid(lo, hi, 32) } else { vec![lo, diam] };
    let n = space.len();
    let samples: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let mut m2: Vec<f64> = (0..n).map(|x| geo.profile(x).measure(r).powi(2)).collect();
            m2.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let med = if n % 2 == 1 { m2[n / 2] } else { 0.5 * (m2[n / 2 - 1] + m2[n / 2]) };
            (r, med)
        })
        .filter(|&(_, m)| m > 0.0)
        .collect();
    if samples.len() < 2 {
        return Err(Error::Degenerate("too few radii with positive ball mass".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let theta = sxy / sxx;
    if !(theta > 0.0) {
        return Err(Error::Degenerate(format!("fitted exponent {theta} is not positive")));
    }
    // sup over r of r^θ/m² is approached at the right end of each step
    let worst = |theta: f64| -> f64 {
        (0..n)
            .into_par_iter()
            .map(|x| {
                let p = geo.profile(x);
                let mut c = diam.powf(theta);
                for k in 0..p.radii.len() - 1 {
                    let m = p.mass[k];
                    let r = p.radii[k + 1];
                    c = c.max(if m > 0.0 { r.powf(theta) / (m * m) } else { f64::INFINITY });
                }
                c
            })
            .reduce(|| 0.0, f64::max)
    };
    let c_theta = worst(theta);
    if !c_theta.is_finite() {
        return Err(Error::ZeroMass { center: 0, radius: 0.0 });
    }
    let residual = (0..n)
        .map(|x| {
            let p = geo.profile(x);
            (0..p.radii.len() - 1)
                .map(|k| p.radii[k + 1].powf(theta) / c_theta - p.mass[k] * p.mass[k])
                .fold(diam.powf(theta) / c_theta - 1.0, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BallExponentFit { theta, c_theta, residual, samples })
}

/// Re-checks a fitted bound at random `(r, x)`; returns the number of violations.
pub fn verify_ball_exponent(space: &MetricMeasureSpace, fit: &BallExponentFit, samples: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diam = space.diameter();
    (0..samples)
        .filter(|_| {
            let x = rng.random_range(0..space.len());
            let r = rng.random_range(0.0..=diam);
            let m = space.ball_measure(x, r);
            m * m < r.powf(fit.theta) / fit.c_theta * (1.0 - 1e-12)
        })
        .count()
}

/// Increments entering the V functional.
#[derive(Debug, Clone, Copy)]
pub enum Increments<'a> {
    /// A single deterministic function on the points.
    Path(&'a [f64]),
    /// Replica-major paths; expectations are replica averages.
    Replicas { values: &'a [f64], replicas: usize },
}

/// `V = ΣΣ m(x₁) m(x₂) E Φ(|f(x₁) − f(x₂)| / d(x₁, x₂))`.
pub fn v_functional(inc: Increments<'_>, phi: &YoungFunction, space: &MetricMeasureSpace) -> Result<f64> {
    let n = space.len();
    let (values, reps) = match inc {
        Increments::Path(v) => (v, 1usize),
        Increments::Replicas { values, replicas } => (values, replicas),
    };
    if reps == 0 || values.len() != n * reps {
        return Err(Error::InvalidInput(format!("expected {} increment values", n * reps)));
    }
    let w = space.weights();
    let d = space.distances();
    let rows: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = 0.0;
            for j in 0..n {
                if i == j || w[i] == 0.0 || w[j] == 0.0 {
                    continue;
                }
                let dij = d.get(i, j);
                let mut e = 0.0;
                for k in 0..reps {
                    let diff = (values[k * n + i] - values[k * n + j]).abs();
                    if dij == 0.0 {
                        if diff != 0.0 {
                            return Err(Error::NonFinite(format!("increment at zero distance ({i}, {j})")));
                        }
                        continue;
                    }
                    e += phi.eval(diff / dij);
                }
                row += w[i] * w[j] * e / reps as f64;
            }
            Ok(row)
        })
        .collect();
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("V functional".into()));
    }
    Ok(total)
}

/// Measure classification with witnesses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureClassification {
    pub weakly_majorizing: bool,
    pub minorizing: bool,
    pub majorizing: bool,
    pub sup_tau: f64,
    pub sup_w: f64,
    pub v: f64,
    pub zero_mass: Vec<ZeroMassWitness>,
}

/// Weakly majorizing (all `τ` finite), minorizing (`V` and all `w` finite) and
/// majorizing (`sup w` finite) flags.
pub fn classify_measure(space: &MetricMeasureSpace, phi: &YoungFunction, v: f64) -> Result<MeasureClassification> {
    let geo = ChainingGeometry::new(space);
    classify_with(&geo, phi, v)
}

pub fn classify_with(geo: &ChainingGeometry, phi: &YoungFunction, v: f64) -> Result<MeasureClassification> {
    let tau = geo.tau_matrix(phi);
    let sup_tau = tau.max();
    let v_ok = v.is_finite() && v > 0.0;
    let sup_w = if v_ok { geo.w_matrix(phi, v)?.max() } else { f64::INFINITY };
    let weakly = sup_tau.is_finite();
    let minorizing = v_ok && sup_w.is_finite();
    Ok(MeasureClassification {
        weakly_majorizing: weakly,
        minorizing,
        majorizing: minorizing && sup_w.is_finite(),
        sup_tau,
        sup_w,
        v,
        zero_mass: geo.zero_mass_witnesses(),
    })
}

/// Dyadic profile of `d/r` at small scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingDiagnostic {
    /// `(ε, max{d/r : 0 < d ≤ ε})` for `ε = d_max 2^{-k}`.
    pub profile: Vec<(f64, f64)>,
    pub verdict: bool,
}

/// Checks `d << r`: the profile `ε ↦ max{d/r : 0 < d ≤ ε}` must vanish at
/// small scales according to `rule`.
pub fn embedding_check(
    d: &DistanceMatrix,
    r: &DistanceMatrix,
    filter: Option<&(dyn Fn(usize, usize) -> bool + Sync)>,
    rule: DecayRule,
) -> Result<EmbeddingDiagnostic> {
    let n = d.len();
    if r.len() != n {
        return Err(Error::InvalidInput("distance matrices differ in size".into()));
    }
    let pairs: Vec<(f64, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| filter.is_none_or(|f| f(i, j)))
        .filter_map(|(i, j)| {
            let dij = d.get(i, j);
            (dij > 0.0).then(|| {
                let rij = r.get(i, j);
                (dij, if rij > 0.0 { dij / rij } else { f64::INFINITY })
            })
        })
        .collect();
    if pairs.is_empty() {
        return Ok(EmbeddingDiagnostic { profile: vec![], verdict: false });
    }
    let dmax = pairs.iter().fold(0.0f64, |m, p| m.max(p.0));
    let dmin = pairs.iter().fold(f64::INFINITY, |m, p| m.min(p.0));
    let top = ((dmax / dmin).log2() + 1e-12).floor().max(0.0) as usize;
    let mut bucket = vec![0.0f64; top + 1];
    for &(dij, ratio) in &pairs {
        let k = (((dmax / dij).log2() + 1e-12).floor().max(0.0) as usize).min(top);
        bucket[k] = bucket[k].max(ratio);
    }
    for k in (0..top).rev() {
        bucket[k] = bucket[k].max(bucket[k + 1]);
    }
    let verdict = rule.vanishes(&bucket);
    Ok(EmbeddingDiagnostic {
        profile: bucket.iter().enumerate().map(|(k, &v)| (dmax / 2f64.powi(k as i32), v)).collect(),
        verdict,
    })
}

/// Outcome of the Arnold–Imkeller check on one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArnoldImkellerReport {
    pub v: f64,
    pub pairs: usize,
    pub violations: usize,
    pub worst_ratio: f64,
}

/// Checks `|f(x₁) − f(x₂)| ≤ w(x₁, x₂)` where `w` is built from the path's own
/// `V` functional under `Φ` and the space's distance.
pub fn arnold_imkeller_audit(
    path: &GridField,
    geo: &ChainingGeometry,
    phi: &YoungFunction,
) -> Result<ArnoldImkellerReport> {
    let space = geo.space();
    let n = space.len();
    let f = path.values();
    if f.len() != n {
        return Err(Error::InvalidInput("path and space sizes differ".into()));
    }
    let v = v_functional(Increments::Path(f), phi, space).map_err(|_| Error::VNonFinite)?;
    if v == 0.0 {
        return Ok(ArnoldImkellerReport { v, pairs: n * (n - 1) / 2, violations: 0, worst_ratio: 0.0 });
    }
    let w = geo.w_matrix(phi, v)?;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let lhs = (f[i] - f[j]).abs();
            if lhs == 0.0 {
                continue;
            }
            let ratio = lhs / w.get(i, j);
            worst = worst.max(ratio);
            if ratio > 1.0 + 1e-12 {
                violations += 1;
            }
        }
    }
    Ok(ArnoldImkellerReport { v, pairs: n * (n - 1) / 2, violations, worst_ratio: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> MetricMeasureSpace {
        MetricMeasureSpace::uniform_grid(&Grid::line(n).unwrap())
    }

    #[test]
    fn ball_measure_examples() {
        let s = line(101);
        assert!((s.ball_measure(50, 0.25) - 51.0 / 101.0).abs() < 1e-12);
        assert!((s.ball_measure(3, 1.0) - 1.0).abs() < 1e-12);
        assert!((s.ball_measure(3, 0.0) - 1.0 / 101.0).abs() < 1e-15);
        let p = s.profile(50);
        assert!((p.measure(0.25) - 51.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn one_point_space_is_degenerate() {
        let s =
            MetricMeasureSpace::new(vec![vec![0.5]], DistanceMatrix::new(1, vec![0.0]).unwrap(), vec![1.0]).unwrap();
        assert!(matches!(fit_ball_exponent(&s), Err(Error::Degenerate(_))));
        let c = classify_measure(&s, &YoungFunction::power(4.0).unwrap(), 1.0).unwrap();
        assert!(c.majorizing && c.minorizing && c.weakly_majorizing);
    }

    #[test]
    fn w_and_tau_basic_properties() {
        let s = line(65);
        let phi = YoungFunction::power(4.0).unwrap();
        assert_eq!(w_distance(&s, &phi, 1.0, 7, 7).unwrap(), 0.0);
        assert_eq!(w_distance(&s, &phi, 1.0, 3, 40).unwrap(), w_distance(&s, &phi, 1.0, 40, 3).unwrap());
        assert_eq!(tau_distance(&s, &phi, 9, 9), 0.0);
        let t1 = tau_distance(&s, &phi, 10, 20);
        let t2 = tau_distance(&s, &phi, 10, 30);
        assert!(t2 >= t1);
        let geo = ChainingGeometry::new(&s);
        let wm = geo.w_matrix(&phi, 1.0).unwrap();
        assert!((wm.get(3, 40) - w_distance(&s, &phi, 1.0, 3, 40).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn v_functional_examples() {
        let s = line(33);
        let phi = YoungFunction::power(2.0).unwrap();
        let c = vec![2.0; 33];
        assert_eq!(v_functional(Increments::Path(&c), &phi, &s).unwrap(), 0.0);
        // three points by hand
        let coords: Vec<Vec<f64>> = vec![vec![0.0], vec![0.5], vec![1.0]];
        let d = DistanceMatrix::from_fn(3, |a, b| (coords[a][0] - coords[b][0]).abs());
        let s3 = MetricMeasureSpace::new(coords, d, vec![0.25, 0.5, 0.25]).unwrap();
        let f = [0.0, 1.0, 3.0];
        let want: f64 = 2.0
            * (0.25 * 0.5 * (1.0f64 / 0.5).powi(2)
                + 0.25 * 0.25 * 3.0f64.powi(2)
                + 0.5 * 0.25 * (2.0f64 / 0.5).powi(2));
        assert!((v_functional(Increments::Path(&f), &phi, &s3).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_is_reported() {
        let n = 21;
        let grid = Grid::line(n).unwrap();
        let mut w: Vec<f64> = (0..n).map(|i| if (8..13).contains(&i) { 0.0 } else { 1.0 }).collect();
        let t: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= t);
        let base = MetricMeasureSpace::uniform_grid(&grid);
        let s = MetricMeasureSpace::new(base.coords().to_vec(), base.distances().clone(), w).unwrap();
        let c = classify_measure(&s, &YoungFunction::exponential(), 1.0).unwrap();
        assert!(!c.minorizing && !c.majorizing && !c.weakly_majorizing);
        assert_eq!(c.zero_mass.len(), 5);
    }

    #[test]
    fn power_measure_is_majorizing() {
        let c = classify_measure(&line(129), &YoungFunction::power(4.0).unwrap(), 1.0).unwrap();
        assert!(c.majorizing && c.minorizing && c.weakly_majorizing);
    }

    #[test]
    fn embedding_examples() {
        let s = line(257);
        let d = s.distances().clone();
        let rule = DecayRule::default();
        assert!(embedding_check(&d, &d.map(|v| v.powf(0.5)), None, rule).unwrap().verdict);
        let same = embedding_check(&d, &d, None, rule).unwrap();
        assert!(!same.verdict && same.profile.iter().all(|p| (p.1 - 1.0).abs() < 1e-12));
        let twice = embedding_check(&d, &d.map(|v| 2.0 * v), None, rule).unwrap();
        assert!(!twice.verdict && twice.profile.iter().all(|p| (p.1 - 0.5).abs() < 1e-12));
    }

    #[test]
    fn constant_and_smooth_paths_pass_arnold_imkeller() {
        let g = Grid::line(129).unwrap();
        let geo = ChainingGeometry::new(&MetricMeasureSpace::uniform_grid(&g));
        let phi = YoungFunction::power(4.0).unwrap();
        let c = GridField::from_fn(g.clone(), |_| 1.0);
        assert_eq!(arnold_imkeller_audit(&c, &geo, &phi).unwrap().violations, 0);
        let s = GridField::from_fn(g, |x| (5.0 * x[0]).sin() + x[0] * x[0]);
        let r = arnold_imkeller_audit(&s, &geo, &phi).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.worst_ratio > 0.0);
    }

    #[test]
    fn fitted_bound_reverifies() {
        let s = line(257);
        let fit = fit_ball_exponent(&s).unwrap();
        assert!((fit.theta - 2.0).abs() < 0.1);
        assert!(fit.residual <= 1e-12);
        assert_eq!(verify_ball_exponent(&s, &fit, 20_000, 5), 0);
    }
}
