//! Regular grids on `[0,1]^d`, moduli of continuity, Hölder and
//! rectangle-Hölder norms, the rectangle difference operator `□`, fractional
//! Sobolev norms and the Garsia–Rodemich–Rumsey type audit.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{abs_pow, DecayRule};

/// Regular grid `{i/(n_k − 1)}` on `[0,1]^d`, stored row-major with the last
/// axis fastest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    shape: Vec<usize>,
}

impl Grid {
    pub fn new(shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&n| n < 2) {
            return Err(Error::InvalidInput(format!("grid shape {shape:?} needs at least 2 points per axis")));
        }
        Ok(Self { shape })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(vec![n, n])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.shape[k + 1];
        }
        s
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            out[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        out
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / (self.shape[axis] - 1) as f64
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        i as f64 / (self.shape[axis] - 1) as f64
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi(flat).iter().enumerate().map(|(k, &i)| self.coord(k, i)).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn euclidean(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.multi(a), self.multi(b));
        pa.iter()
            .zip(&pb)
            .enumerate()
            .map(|(k, (&i, &j))| {
                let d = (i as f64 - j as f64) * self.spacing(k);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Real values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!("{} values for a grid of {}", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat(idx)]
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &GridField) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("fields live on different grids".into()));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Euclidean distance between flat grid indices raised to `beta`.
pub fn power_distance(grid: &Grid, beta: f64) -> impl Fn(usize, usize) -> f64 + Sync + '_ {
    move |a, b| grid.euclidean(a, b).powf(beta)
}

/// `ω(f, δ) = max |f(t) − f(s)|` over pairs with `d(t, s) ≤ δ`.
pub fn modulus<D: Fn(usize, usize) -> f64 + Sync>(f: &GridField, d: D, delta: f64) -> f64 {
    let v = &f.values;
    (0..v.len())
        .into_par_iter()
        .map(|i| {
            let mut m = 0.0f64;
            for j in i + 1..v.len() {
                if d(i, j) <= delta {
                    m = m.max((v[i] - v[j]).abs());
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max)
}

/// Hölder norm with its small-scale diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderNorm {
    pub norm: f64,
    pub sup_abs: f64,
    pub ratio_sup: f64,
    /// `(ε_k, sup_{0 < d ≤ ε_k} ratio)` over dyadic levels `ε_k = d_max 2^{-k}`.
    pub profile: Vec<(f64, f64)>,
    /// The profile passes the dyadic decay rule.
    pub separable: bool,
}

/// Pairs with positive distance, bucketed by dyadic scale, reusable across fields.
#[derive(Debug, Clone)]
pub struct HolderPlan {
    pairs: Vec<(u32, u32, f64, u16)>,
    levels: Vec<f64>,
    rule: DecayRule,
}

impl HolderPlan {
    pub fn new<D: Fn(usize, usize) -> f64 + Sync>(grid: &Grid, d: D) -> Result<Self> {
        let n = grid.len();
        let raw: Vec<(u32, u32, f64)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let d = &d;
                (i + 1..n).filter_map(move |j| {
                    let dij = d(i, j);
                    (dij > 0.0).then_some((i as u32, j as u32, dij))
                })
            })
            .collect();
        if raw.is_empty() {
            return Err(Error::Degenerate("all distances vanish".into()));
        }
        let dmax = raw.iter().fold(0.0f64, |m, p| m.max(p.2));
        let dmin = raw.iter().fold(f64::INFINITY, |m, p| m.min(p.2));
        let top = ((dmax / dmin).log2() + 1e-12).floor().max(0.0) as usize;
        let levels: Vec<f64> = (0..=top).map(|k| dmax / 2f64.powi(k as i32)).collect();
        let pairs = raw
            .into_iter()
            .map(|(i, j, dij)| {
                let k = ((dmax / dij).log2() + 1e-12).floor().max(0.0) as usize;
                (i, j, dij, k.min(top) as u16)
            })
            .collect();
        Ok(Self { pairs, levels, rule: DecayRule::default() })
    }

    pub fn with_rule(mut self, rule: DecayRule) -> Self {
        self.rule = rule;
        self
    }

    /// Number of dyadic levels in the ratio profile.
    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Largest ratio `|f(x) − f(y)| / d(x, y)`.
    pub fn ratio_sup(&self, values: &[f64]) -> f64 {
        self.pairs.iter().map(|&(i, j, d, _)| (values[i as usize] - values[j as usize]).abs() / d).fold(0.0, f64::max)
    }

    pub fn evaluate(&self, f: &GridField) -> HolderNorm {
        self.evaluate_values(f.values())
    }

    /// [`HolderPlan::evaluate`] on raw values in grid order.
    pub fn evaluate_values(&self, v: &[f64]) -> HolderNorm {
        let mut bucket = vec![0.0f64; self.levels.len()];
        for &(i, j, d, k) in &self.pairs {
            let r = (v[i as usize] - v[j as usize]).abs() / d;
            if r > bucket[k as usize] {
                bucket[k as usize] = r;
            }
        }
        for k in (0..bucket.len().saturating_sub(1)).rev() {
            bucket[k] = bucket[k].max(bucket[k + 1]);
        }
        let ratio_sup = bucket.first().copied().unwrap_or(0.0);
        let sup_abs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let separable = self.rule.vanishes(&bucket);
        HolderNorm {
            norm: sup_abs + ratio_sup,
            sup_abs,
            ratio_sup,
            profile: self.levels.iter().copied().zip(bucket).collect(),
            separable,
        }
    }
}

/// `sup|f| + sup_{d > 0} |f(x₁) − f(x₂)| / d(x₁, x₂)` plus the dyadic ratio profile.
pub fn holder_norm<D: Fn(usize, usize) -> f64 + Sync>(f: &GridField, d: D) -> Result<HolderNorm> {
    HolderPlan::new(f.grid(), d).map(|p| p.evaluate(f)).map_err(|_| Error::Degenerate("DEGENERATE_DISTANCE".into()))
}

/// `□[f](x, y)`: the alternating sum of `f` over the corners of the box
/// spanned by grid multi-indices `x` and `y`.
pub fn rectangle_difference(f: &GridField, x: &[usize], y: &[usize]) -> f64 {
    let d = f.grid().dim();
    let strides = f.grid().strides();
    let v = f.values();
    let mut acc = 0.0;
    // iterate subsets from "all y" downward so the d = 2 order reads
    // f(y1,y2) - f(x1,y2) - f(y1,x2) + f(x1,x2)
    for mask in 0..(1usize << d) {
        let mut idx = 0;
        let mut from_x = 0;
        for k in 0..d {
            let use_x = (mask >> (d - 1 - k)) & 1 == 1;
            let c = if use_x {
                from_x += 1;
                x[k]
            } else {
                y[k]
            };
            idx += c * strides[k];
        }
        if from_x % 2 == 0 {
            acc += v[idx];
        } else {
            acc -= v[idx];
        }
    }
    acc
}

/// Maxima `M(o) = max_x |□[f](x, x + o)|` for every offset vector `o ≥ 0`,
/// folded into prefix maxima so that `Ω(f, δ)` is a single lookup.
#[derive(Debug, Clone)]
pub struct RectangleModuli {
    grid: Grid,
    prefix: Vec<f64>,
}

impl RectangleModuli {
    pub fn new(f: &GridField) -> Self {
        let grid = f.grid().clone();
        let n = grid.len();
        let v = f.values();
        let d = grid.dim();
        let strides = grid.strides();
        let shape = grid.shape().to_vec();
        let corners: Vec<(Vec<bool>, bool)> = (0..(1usize << d))
            .map(|mask| {
                let use_x: Vec<bool> = (0..d).map(|k| (mask >> k) & 1 == 1).collect();
                let neg = use_x.iter().filter(|&&b| b).count() % 2 == 1;
                (use_x, neg)
            })
            .collect();
        let mut m: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|o_flat| {
                let o = grid.multi(o_flat);
                if o.iter().any(|&c| c == 0) {
                    return 0.0;
                }
                let span: Vec<usize> = (0..d).map(|k| shape[k] - o[k]).collect();
                let count: usize = span.iter().product();
                let shift: Vec<usize> = (0..d).map(|k| o[k] * strides[k]).collect();
                let offsets: Vec<(usize, bool)> = corners
                    .iter()
                    .map(|(use_x, neg)| ((0..d).filter(|&k| !use_x[k]).map(|k| shift[k]).sum(), *neg))
                    .collect();
                let mut best = 0.0f64;
                let mut xi = vec![0usize; d];
                for _ in 0..count {
                    let base: usize = (0..d).map(|k| xi[k] * strides[k]).sum();
                    let mut s = 0.0;
                    for &(off, neg) in &offsets {
                        if neg {
                            s -= v[base + off];
                        } else {
                            s += v[base + off];
                        }
                    }
                    best = best.max(s.abs());
                    for k in (0..d).rev() {
                        xi[k] += 1;
                        if xi[k] < span[k] {
                            break;
                        }
                        xi[k] = 0;
                    }
                }
                best
            })
            .collect();
        // prefix maxima along each axis
        for k in 0..d {
            for flat in 0..n {
                let idx = grid.multi(flat);
                if idx[k] > 0 {
                    let prev = flat - strides[k];
                    if m[prev] > m[flat] {
                        m[flat] = m[prev];
                    }
                }
            }
        }
        Self { grid, prefix: m }
    }

    /// `Ω(f, δ⃗)`.
    pub fn omega(&self, delta: &[f64]) -> f64 {
        let idx: Vec<usize> = delta
            .iter()
            .enumerate()
            .map(|(k, &dk)| {
                ((dk.max(0.0) * (self.grid.shape()[k] - 1) as f64 + 1e-9).floor() as usize)
                    .min(self.grid.shape()[k] - 1)
            })
            .collect();
        self.prefix[self.grid.flat(&idx)]
    }
}

/// `Ω(f, δ⃗) = sup |□[f](x, y)|` over grid pairs with `|xᵢ − yᵢ| ≤ δᵢ`.
pub fn rectangle_modulus(f: &GridField, delta: &[f64]) -> f64 {
    RectangleModuli::new(f).omega(delta)
}

/// A modulus of continuity, uniform (`ω(δ)`) or rectangle (`ω(δ⃗)`).
#[derive(Clone)]
pub enum ModulusSpec {
    Uniform(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Rectangle(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for ModulusSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModulusSpec::Uniform(_) => write!(f, "ModulusSpec::Uniform"),
            ModulusSpec::Rectangle(_) => write!(f, "ModulusSpec::Rectangle"),
        }
    }
}

impl ModulusSpec {
    /// `ω(δ⃗) = Π δᵢ^a`.
    pub fn product_power(a: f64) -> Self {
        ModulusSpec::Rectangle(Arc::new(move |d: &[f64]| d.iter().map(|x| x.powf(a)).product()))
    }

    pub fn rectangle<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ModulusSpec::Rectangle(Arc::new(f))
    }

    pub fn uniform<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ModulusSpec::Uniform(Arc::new(f))
    }

    pub fn eval_rect(&self, delta: &[f64]) -> Option<f64> {
        match self {
            ModulusSpec::Rectangle(f) => Some(f(delta)),
            ModulusSpec::Uniform(_) => None,
        }
    }
}

/// Rectangle Hölder norm with its small-scale diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangleHolderNorm {
    pub norm: f64,
    pub sup_abs: f64,
    pub ratio_sup: f64,
    pub argmax: Vec<f64>,
    /// `(2^{-L}, sup of the ratio over δ⃗ with every δᵢ ≤ 2^{-L})`.
    pub profile: Vec<(f64, f64)>,
    pub separable: bool,
}

/// Dyadic lattice `δᵢ = 2^{-kᵢ}` down to `min_cells` grid cells per axis.
pub fn dyadic_lattice(grid: &Grid, min_cells: usize) -> Vec<Vec<usize>> {
    let tops: Vec<usize> = grid
        .shape()
        .iter()
        .map(|&n| {
            let mut k = 0;
            while ((n - 1) as f64) / 2f64.powi(k as i32 + 1) >= min_cells.max(1) as f64 {
                k += 1;
            }
            k
        })
        .collect();
    let mut out = vec![vec![]];
    for &t in &tops {
        out = out
            .into_iter()
            .flat_map(|v: Vec<usize>| {
                (0..=t).map(move |k| {
                    let mut w = v.clone();
                    w.push(k);
                    w
                })
            })
            .collect();
    }
    out
}

/// `sup|f| + sup_{δ⃗} Ω(f, δ⃗)/ω(δ⃗)` over the dyadic lattice.
pub fn rectangle_holder_norm(f: &GridField, omega: &ModulusSpec, min_cells: usize) -> Result<RectangleHolderNorm> {
    let moduli = RectangleModuli::new(f);
    rectangle_holder_norm_from(&moduli, f.sup_abs(), omega, min_cells)
}

/// [`rectangle_holder_norm`] from precomputed moduli.
pub fn rectangle_holder_norm_from(
    moduli: &RectangleModuli,
    sup_abs: f64,
    omega: &ModulusSpec,
    min_cells: usize,
) -> Result<RectangleHolderNorm> {
    if matches!(omega, ModulusSpec::Uniform(_)) {
        return Err(Error::InvalidInput("rectangle norm needs a rectangle modulus".into()));
    }
    let lattice = dyadic_lattice(&moduli.grid, min_cells);
    let depth = lattice.iter().map(|k| *k.iter().min().unwrap()).max().unwrap_or(0);
    let mut profile = vec![0.0f64; depth + 1];
    let mut best = (0.0f64, vec![1.0; moduli.grid.dim()]);
    for ks in &lattice {
        let delta: Vec<f64> = ks.iter().map(|&k| 2f64.powi(-(k as i32))).collect();
        let w = omega.eval_rect(&delta).unwrap();
        if !(w > 0.0) {
            return Err(Error::Degenerate(format!("DEGENERATE_MODULUS at {delta:?}")));
        }
        let r = moduli.omega(&delta) / w;
        if r > best.0 {
            best = (r, delta.clone());
        }
        let lvl = *ks.iter().min().unwrap();
        for p in profile.iter_mut().take(lvl + 1) {
            if r > *p {
                *p = r;
            }
        }
    }
    let separable = DecayRule::default().vanishes(&profile);
    Ok(RectangleHolderNorm {
        norm: sup_abs + best.0,
        sup_abs,
        ratio_sup: best.0,
        argmax: best.1,
        profile: profile.iter().enumerate().map(|(l, &v)| (2f64.powi(-(l as i32)), v)).collect(),
        separable,
    })
}

fn check_exponents(grid: &Grid, alpha: &[f64], p: f64) -> Result<f64> {
    if alpha.len() != grid.dim() || alpha.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::InvalidInput("alpha must have one entry in (0, 1] per axis".into()));
    }
    let p0 = alpha.iter().map(|a| 1.0 / a).fold(0.0, f64::max);
    if !(p > p0) {
        return Err(Error::ExponentRange { p, p0 });
    }
    Ok(p0)
}

fn trapezoid_weight(n: usize, i: usize) -> f64 {
    let h = 1.0 / (n - 1) as f64;
    if i == 0 || i == n - 1 {
        0.5 * h
    } else {
        h
    }
}

/// Discretised `∬ |G_α[f](x, y)|^p ν(dx, dy)` as a weighted sum over grid
/// pairs with no coordinate in common, reusable across fields.
#[derive(Debug, Clone)]
pub struct SobolevPlan {
    grid: Grid,
    p: f64,
    /// corner offsets (2^d per pair, "all y" first) and pair weights
    corners: Vec<u32>,
    weights: Vec<f64>,
}

impl SobolevPlan {
    pub fn new(grid: &Grid, alpha: &[f64], p: f64) -> Result<Self> {
        check_exponents(grid, alpha, p)?;
        let d = grid.dim();
        let n = grid.len();
        let shape = grid.shape();
        let mut corners = Vec::new();
        let mut weights = Vec::new();
        for xf in 0..n {
            let x = grid.multi(xf);
            for yf in 0..n {
                let y = grid.multi(yf);
                // pairs are counted once with x₀ < y₀ and doubled
                if y[0] <= x[0] || (1..d).any(|k| x[k] == y[k]) {
                    continue;
                }
                let mut w = 2.0;
                let mut e2 = 0.0;
                for k in 0..d {
                    let dk = (x[k] as f64 - y[k] as f64).abs() * grid.spacing(k);
                    w *= trapezoid_weight(shape[k], x[k]) * trapezoid_weight(shape[k], y[k]);
                    w /= dk.powf(alpha[k] * p);
                    e2 += dk * dk;
                }
                w /= e2.sqrt();
                for mask in 0..(1usize << d) {
                    let idx: Vec<usize> =
                        (0..d).map(|k| if (mask >> (d - 1 - k)) & 1 == 1 { x[k] } else { y[k] }).collect();
                    corners.push(grid.flat(&idx) as u32);
                }
                weights.push(w);
            }
        }
        Ok(Self { grid: grid.clone(), p, corners, weights })
    }

    /// `‖f‖_{W(α,p)}^p`.
    pub fn norm_pow(&self, values: &[f64]) -> f64 {
        let c = 1usize << self.grid.dim();
        self.weights
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                let cs = &self.corners[k * c..(k + 1) * c];
                let mut s = 0.0;
                for (m, &idx) in cs.iter().enumerate() {
                    if (m.count_ones() % 2) == 0 {
                        s += values[idx as usize];
                    } else {
                        s -= values[idx as usize];
                    }
                }
                w * abs_pow(s, self.p)
            })
            .sum()
    }

    pub fn norm(&self, values: &[f64]) -> f64 {
        self.norm_pow(values).powf(1.0 / self.p)
    }
}

/// Fractional Sobolev norm `‖f‖_{W(α⃗,p)}` with trapezoid cell weights.
pub fn fractional_sobolev_norm(f: &GridField, alpha: &[f64], p: f64) -> Result<f64> {
    Ok(SobolevPlan::new(f.grid(), alpha, p)?.norm(f.values()))
}

/// `8·4^{1/p}·(α+1/p)/(α−1/p)` in one dimension, and
/// `8^d·4^{d/p}·Π(αₖ+1/p)/(αₖ−1/p)` in general.
pub fn grr_coefficient(alpha: &[f64], p: f64) -> f64 {
    let d = alpha.len() as f64;
    8f64.powf(d) * 4f64.powf(d / p) * alpha.iter().map(|a| (a + 1.0 / p) / (a - 1.0 / p)).product::<f64>()
}

/// Outcome of [`grr_audit`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrrReport {
    pub coefficient: f64,
    pub sobolev_norm: f64,
    pub pairs_checked: usize,
    pub violations: usize,
    pub worst_ratio: f64,
}

/// Options for [`grr_audit`] on large multi-dimensional grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrrOptions {
    /// Grids with more points than this are audited on random pairs.
    pub full_pairs_limit: usize,
    pub sampled_pairs: usize,
    pub seed: u64,
}

impl Default for GrrOptions {
    fn default() -> Self {
        Self { full_pairs_limit: 64 * 64, sampled_pairs: 1_000_000, seed: 0 }
    }
}

/// Checks `|□f(x, y)| ≤ Q Π|xᵢ − yᵢ|^{αᵢ − 1/p} ‖f‖_{W(α,p)}` over grid pairs.
pub fn grr_audit(f: &GridField, alpha: &[f64], p: f64, opts: &GrrOptions) -> Result<GrrReport> {
    let plan = SobolevPlan::new(f.grid(), alpha, p)?;
    grr_audit_with(&plan, f, alpha, opts)
}

/// [`grr_audit`] reusing a [`SobolevPlan`].
pub fn grr_audit_with(plan: &SobolevPlan, f: &GridField, alpha: &[f64], opts: &GrrOptions) -> Result<GrrReport> {
    let p = plan.p;
    let grid = f.grid();
    let d = grid.dim();
    let norm = plan.norm(f.values());
    let q = grr_coefficient(alpha, p);
    let v = f.values();
    let check = |x: &[usize], y: &[usize]| -> (f64, bool) {
        let lhs = if d == 1 { (v[x[0]] - v[y[0]]).abs() } else { rectangle_difference(f, x, y).abs() };
        let mut rhs = q * norm;
        for k in 0..d {
            let dk = (x[k] as f64 - y[k] as f64).abs() * grid.spacing(k);
            rhs *= dk.powf(alpha[k] - 1.0 / p);
        }
        if lhs == 0.0 {
            return (0.0, false);
        }
        let ratio = lhs / rhs;
        (ratio, ratio > 1.0 + 1e-12)
    };
    let (mut pairs, mut violations, mut worst) = (0usize, 0usize, 0.0f64);
    if d == 1 || grid.len() <= opts.full_pairs_limit {
        let n = grid.len();
        for a in 0..n {
            let x = grid.multi(a);
            for b in 0..n {
                let y = grid.multi(b);
                let skip = y[0] <= x[0] || (1..d).any(|k| x[k] == y[k]);
                if skip {
                    continue;
                }
                let (r, bad) = check(&x, &y);
                pairs += 1;
                violations += bad as usize;
                worst = worst.max(r);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let shape = grid.shape();
        while pairs < opts.sampled_pairs {
            let x: Vec<usize> = shape.iter().map(|&n| rng.random_range(0..n)).collect();
            let y: Vec<usize> = shape.iter().map(|&n| rng.random_range(0..n)).collect();
            if (0..d).any(|k| x[k] == y[k]) {
                continue;
            }
            let (r, bad) = check(&x, &y);
            pairs += 1;
            violations += bad as usize;
            worst = worst.max(r);
        }
    }
    Ok(GrrReport { coefficient: q, sobolev_norm: norm, pairs_checked: pairs, violations, worst_ratio: worst })
}
