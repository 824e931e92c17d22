//! Young–Orlicz functions, Luxemburg norms of discrete samples, the Δ²
//! constant `K(Φ)`, Young–Fenchel conjugates of tabulated symbols and the
//! `φ̄` / `Φ̄` construction used by the Kramer-type CLT.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{bisect_threshold, interp_extrapolate};

/// Relative tolerance of every scale bisection in this module.
pub const BISECTION_RTOL: f64 = 1e-12;

/// Default cap on `n` in `sup_n n φ(λ/√n)`.
pub const PHI_BAR_N_MAX: usize = 1_000_000;

/// Number of consecutive non-increasing terms after which the `φ̄` search stops.
pub const PHI_BAR_PATIENCE: usize = 64;

/// Which family a [`YoungFunction`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YoungKind {
    /// `Φ(z) = z^p`.
    Power(f64),
    /// `Φ₂(z) = exp(z²/2) − 1`.
    ExpQuadratic,
    /// `Φ_Q(z) = exp(z^Q/Q) − 1`.
    ExpPower(f64),
    /// Given by a table of `ln(1 + Φ)`.
    Tabulated,
}

#[derive(Clone, PartialEq)]
enum YoungRepr {
    Power(f64),
    ExpPower(f64),
    // knots z (z[0] = 0) and l = ln(1 + Φ(z)), both strictly increasing
    Table { z: Vec<f64>, l: Vec<f64> },
}

/// A continuous Young–Orlicz function with its inverse.
#[derive(Clone, PartialEq)]
pub struct YoungFunction {
    repr: YoungRepr,
    kind: YoungKind,
}

impl fmt::Debug for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            YoungRepr::Table { z, .. } => write!(f, "YoungFunction::Tabulated({} knots)", z.len()),
            _ => write!(f, "YoungFunction::{:?}", self.kind),
        }
    }
}

impl YoungFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("power Young function needs p >= 1, got {p}")));
        }
        Ok(Self { repr: YoungRepr::Power(p), kind: YoungKind::Power(p) })
    }

    pub fn exp_quadratic() -> Self {
        Self { repr: YoungRepr::ExpPower(2.0), kind: YoungKind::ExpQuadratic }
    }

    pub fn exp_power(q: f64) -> Result<Self> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::InvalidInput(format!("exponential Young function needs Q >= 1, got {q}")));
        }
        Ok(Self { repr: YoungRepr::ExpPower(q), kind: YoungKind::ExpPower(q) })
    }

    /// `Φ(z) = e^z − 1`.
    pub fn exponential() -> Self {
        Self { repr: YoungRepr::ExpPower(1.0), kind: YoungKind::ExpPower(1.0) }
    }

    /// Tabulated function with `ln(1 + Φ(z_i)) = l_i`; linear interpolation in
    /// between and linear extrapolation with the last slope.
    pub fn from_log_table(z: Vec<f64>, l: Vec<f64>) -> Result<Self> {
        if z.len() < 2 || z.len() != l.len() {
            return Err(Error::InvalidInput("log table needs at least two knots".into()));
        }
        if z[0] != 0.0 || l[0] != 0.0 {
            return Err(Error::InvalidInput("log table must start at (0, 0)".into()));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0] && w[1].is_finite());
        if !increasing(&z) || !increasing(&l) {
            return Err(Error::InvalidInput("log table must be strictly increasing".into()));
        }
        Ok(Self { repr: YoungRepr::Table { z, l }, kind: YoungKind::Tabulated })
    }

    pub fn kind(&self) -> YoungKind {
        self.kind
    }

    /// `Φ(z)` for `z ≥ 0`; negative arguments are reflected.
    pub fn eval(&self, z: f64) -> f64 {
        let z = z.abs();
        match &self.repr {
            YoungRepr::Power(p) => crate::numeric::abs_pow(z, *p),
            YoungRepr::ExpPower(q) => {
                if *q == 1.0 {
                    z.exp_m1()
                } else if *q == 2.0 {
                    (0.5 * z * z).exp_m1()
                } else {
                    (z.powf(*q) / q).exp_m1()
                }
            }
            YoungRepr::Table { z: zs, l } => interp_extrapolate(zs, l, z).exp_m1(),
        }
    }

    /// `Φ⁻¹(w)` for `w ≥ 0`.
    pub fn inverse(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        if w.is_infinite() {
            return f64::INFINITY;
        }
        match &self.repr {
            YoungRepr::Power(p) => w.powf(1.0 / p),
            YoungRepr::ExpPower(q) => {
                if *q == 1.0 {
                    w.ln_1p()
                } else {
                    (q * w.ln_1p()).powf(1.0 / q)
                }
            }
            YoungRepr::Table { z, l } => interp_extrapolate(l, z, w.ln_1p()),
        }
    }
}

/// A finite weighted sample standing in for the law of a random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::InvalidInput("sample and weights must be nonempty and of equal length".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("sample values must be finite and weights nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { values, weights })
    }

    /// Equally weighted sample.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        let weights = vec![1.0 / n as f64; n];
        Self::new(values, weights)
    }

    /// Discretisation of the standard normal law: nodes `k·h` on `[−L, L]`
    /// with weights proportional to the density. Nodes whose weight underflows
    /// are dropped.
    pub fn standard_normal_quadrature(h: f64, half_width: f64) -> Self {
        let m = (half_width / h).floor() as i64;
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for k in -m..=m {
            let x = k as f64 * h;
            let w = (-0.5 * x * x).exp();
            if w > 0.0 {
                values.push(x);
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { values, weights }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), weights: self.weights.clone() }
    }

    /// `E g(X)` under the sample law; terms of zero weight are skipped.
    pub fn expect<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.values.iter().zip(&self.weights).filter(|(_, &w)| w > 0.0).map(|(&v, &w)| w * g(v)).sum()
    }

    /// Weighted `L_p` norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.expect(|v| crate::numeric::abs_pow(v, p)).powf(1.0 / p)
    }
}

/// Luxemburg norm `inf{k > 0 : Σ wᵢ Φ(|vᵢ|/k) ≤ 1}`.
pub fn orlicz_norm(sample: &EmpiricalSample, phi: &YoungFunction) -> Result<f64> {
    let vmax =
        sample.values.iter().zip(&sample.weights).filter(|(_, &w)| w > 0.0).fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    if vmax == 0.0 {
        return Ok(0.0);
    }
    let fits = |k: f64| sample.expect(|v| phi.eval(v.abs() / k)) <= 1.0;
    let mut hi = vmax;
    let mut steps = 0;
    while !fits(hi) {
        hi *= 2.0;
        steps += 1;
        if steps > 2000 || !hi.is_finite() {
            return Err(Error::NonIntegrable);
        }
    }
    let mut lo = hi;
    steps = 0;
    while fits(lo) {
        lo *= 0.5;
        steps += 1;
        if steps > 2000 || lo == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(bisect_threshold(fits, lo, hi, BISECTION_RTOL))
}

/// Grid used for the Δ² supremum: `per_decade` log-spaced points per decade
/// over `[10^lo_exp, 10^hi_exp]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta2Grid {
    pub lo_exp: i32,
    pub hi_exp: i32,
    pub per_decade: usize,
    /// Number of trailing decades inspected by the divergence heuristic.
    pub tail_decades: usize,
    /// Required growth of the running supremum over the tail decades.
    pub growth: f64,
}

impl Default for Delta2Grid {
    fn default() -> Self {
        Self { lo_exp: -6, hi_exp: 6, per_decade: 200, tail_decades: 3, growth: 1.5 }
    }
}

/// Outcome of [`delta2_constant`].
#[derive(Debug, Clone, PartialEq)]
pub struct Delta2 {
    /// Grid supremum, or `+∞` when flagged divergent.
    pub k: f64,
    /// Largest ratio actually seen on the grid.
    pub grid_sup: f64,
    pub divergent: bool,
    /// Running supremum restricted to pairs below `10^j`, for each decade `j`.
    pub running_sup: Vec<(i32, f64)>,
}

/// `sup Φ⁻¹(xy) / (Φ⁻¹(x) + Φ⁻¹(y))` over grid pairs, with a divergence flag.
pub fn delta2_constant(phi: &YoungFunction, grid: &Delta2Grid) -> Delta2 {
    let pd = grid.per_decade as i64;
    let n = ((grid.hi_exp - grid.lo_exp) as i64 * pd) as usize + 1;
    let point = |k: i64, base: i64| 10f64.powf((base * pd + k) as f64 / pd as f64);
    let inv: Vec<f64> = (0..n as i64).map(|i| phi.inverse(point(i, grid.lo_exp as i64))).collect();
    let inv_prod: Vec<f64> = (0..(2 * n - 1) as i64).map(|k| phi.inverse(point(k, 2 * grid.lo_exp as i64))).collect();
    // best[m]: largest ratio over pairs whose larger index is m
    let best: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|m| {
            let mut b = 0.0f64;
            for i in 0..=m {
                let r = inv_prod[i + m] / (inv[i] + inv[m]);
                if r > b {
                    b = r;
                }
            }
            b
        })
        .collect();
    let mut running = Vec::new();
    let mut acc = 0.0f64;
    let mut grid_sup = 0.0f64;
    for (m, &b) in best.iter().enumerate() {
        acc = acc.max(b);
        grid_sup = grid_sup.max(b);
        if m > 0 && m % grid.per_decade == 0 {
            running.push((grid.lo_exp + (m / grid.per_decade) as i32, acc));
        }
    }
    let t = grid.tail_decades;
    let divergent = running.len() > t && {
        let tail = &running[running.len() - t - 1..];
        tail.windows(2).all(|w| w[1].1 > w[0].1) && tail[t].1 / tail[0].1 > grid.growth
    };
    Delta2 { k: if divergent { f64::INFINITY } else { grid_sup }, grid_sup, divergent, running_sup: running }
}

/// `C(Φ) = Φ⁻¹(1) / (54 K(Φ)²)` with `K` from the default Δ² grid.
pub fn c_phi(phi: &YoungFunction) -> Result<f64> {
    let d = delta2_constant(phi, &Delta2Grid::default());
    c_phi_with(phi, &d)
}

/// `C(Φ)` from a precomputed Δ² constant.
pub fn c_phi_with(phi: &YoungFunction, d: &Delta2) -> Result<f64> {
    if d.divergent || !d.k.is_finite() || d.k <= 0.0 {
        return Err(Error::Delta2Divergent);
    }
    Ok(phi.inverse(1.0) / (54.0 * d.k * d.k))
}

/// Piecewise-linear symbol on sorted knots. Outside the knots the symbol is
/// extended linearly inside `domain` and is `+∞` beyond it. With `head` set the
/// symbol is even, the knots start at zero and the first cell is quadratic.
#[derive(Debug, Clone, PartialEq)]
struct SymbolTable {
    x: Vec<f64>,
    y: Vec<f64>,
    domain: (f64, f64),
    head: bool,
}

impl SymbolTable {
    fn eval(&self, lam: f64) -> f64 {
        let t = if self.head { lam.abs() } else { lam };
        if t < self.domain.0 || t > self.domain.1 {
            return f64::INFINITY;
        }
        if self.head && t <= self.x[1] {
            let r = t / self.x[1];
            return self.y[1] * r * r;
        }
        interp_extrapolate(&self.x, &self.y, t)
    }
}

#[derive(Clone)]
enum SymbolRepr {
    Quadratic(f64),
    Fn(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Table(SymbolTable),
}

/// A convex symbol `φ` on `(−λ₀, λ₀)` with `φ(0) = 0`.
#[derive(Clone)]
pub struct ConvexSymbol {
    repr: SymbolRepr,
    lambda0: f64,
}

impl fmt::Debug for ConvexSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            SymbolRepr::Quadratic(s) => write!(f, "ConvexSymbol::Quadratic({s})"),
            SymbolRepr::Fn(_) => write!(f, "ConvexSymbol::Fn(lambda0 = {})", self.lambda0),
            SymbolRepr::Table(t) => write!(f, "ConvexSymbol::Table({} knots)", t.x.len()),
        }
    }
}

impl ConvexSymbol {
    /// `φ(λ) = σ² λ² / 2`.
    pub fn quadratic(sigma2: f64) -> Self {
        Self { repr: SymbolRepr::Quadratic(sigma2), lambda0: f64::INFINITY }
    }

    /// `φ(λ) = |λ|^q / q`.
    pub fn power(q: f64) -> Self {
        Self::from_fn(move |l: f64| l.abs().powf(q) / q, f64::INFINITY)
    }

    /// `φ(λ) = cosh λ − 1`.
    pub fn cosh_minus_one() -> Self {
        Self::from_fn(|l: f64| l.cosh() - 1.0, f64::INFINITY)
    }

    /// Arbitrary even convex function, `+∞` outside `(−λ₀, λ₀)`.
    pub fn from_fn<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, lambda0: f64) -> Self {
        Self { repr: SymbolRepr::Fn(Arc::new(f)), lambda0 }
    }

    /// Piecewise-linear symbol through `(x_i, y_i)`, extended linearly inside
    /// `domain` (which must contain the knots).
    pub fn tabulated(x: Vec<f64>, y: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        check_table(&x, &y)?;
        if domain.0 > x[0] || domain.1 < x[x.len() - 1] {
            return Err(Error::InvalidInput("domain must contain the tabulation".into()));
        }
        let lambda0 = domain.1.min(-domain.0);
        Ok(Self { repr: SymbolRepr::Table(SymbolTable { x, y, domain, head: false }), lambda0 })
    }

    /// Even symbol tabulated on `0 = x_0 < x_1 < … < x_m` with a quadratic
    /// piece on `[0, x_1]`; `+∞` beyond `x_m`.
    pub fn even_with_quadratic_head(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_table(&x, &y)?;
        if x[0] != 0.0 || y[0] != 0.0 || x.len() < 2 {
            return Err(Error::InvalidInput("even table must start at (0, 0)".into()));
        }
        let hi = x[x.len() - 1];
        Ok(Self { repr: SymbolRepr::Table(SymbolTable { x, y, domain: (0.0, hi), head: true }), lambda0: hi })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn eval(&self, lam: f64) -> f64 {
        match &self.repr {
            SymbolRepr::Quadratic(s) => 0.5 * s * lam * lam,
            SymbolRepr::Fn(f) => {
                if lam.abs() >= self.lambda0 {
                    f64::INFINITY
                } else {
                    f(lam)
                }
            }
            SymbolRepr::Table(t) => t.eval(lam),
        }
    }

    /// Knots of a tabulated symbol.
    pub fn knots(&self) -> Option<(&[f64], &[f64])> {
        match &self.repr {
            SymbolRepr::Table(t) => Some((&t.x, &t.y)),
            _ => None,
        }
    }

    /// Piecewise-linear tabulation on `grid`; the domain of the result is the
    /// symbol's own `(−λ₀, λ₀)`.
    pub fn tabulate(&self, grid: &[f64]) -> Result<Self> {
        let y: Vec<f64> = grid.iter().map(|&l| self.eval(l)).collect();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("tabulation grid leaves the symbol's domain".into()));
        }
        Self::tabulated(grid.to_vec(), y, (-self.lambda0, self.lambda0))
    }

    /// Midpoint convexity on consecutive triples of `grid`.
    pub fn is_convex_on(&self, grid: &[f64], tol: f64) -> bool {
        grid.windows(2).all(|w| {
            let m = 0.5 * (w[0] + w[1]);
            self.eval(m) <= 0.5 * (self.eval(w[0]) + self.eval(w[1])) + tol
        })
    }

    fn plain_table(&self) -> Result<SymbolTable> {
        match &self.repr {
            SymbolRepr::Table(t) if !t.head => Ok(t.clone()),
            SymbolRepr::Table(t) => {
                // unfold the even table onto a symmetric knot set, sampling the head
                let mut pos: Vec<f64> = (0..=32).map(|i| t.x[1] * i as f64 / 32.0).collect();
                pos.extend_from_slice(&t.x[2..]);
                let mut x: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
                x.pop();
                x.extend_from_slice(&pos);
                let y = x.iter().map(|&v| t.eval(v)).collect();
                Ok(SymbolTable { x, y, domain: (-t.domain.1, t.domain.1), head: false })
            }
            _ => Err(Error::InvalidInput("conjugate needs a tabulated symbol; call tabulate first".into())),
        }
    }
}

fn check_table(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::InvalidInput("table needs at least two knots".into()));
    }
    if !x.windows(2).all(|w| w[1] > w[0]) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("table knots must increase and values be finite".into()));
    }
    Ok(())
}

/// `g*(x) = sup_y (xy − g(y))` for a tabulated `g`.
///
/// The supremum over the knots is exact for the piecewise-linear `g`; the
/// output grid is `x_grid` with the segment slopes of `g` inserted, so the
/// output is exact at its knots and between them. Requests where the
/// supremum diverges give [`Error::Unbounded`].
pub fn young_fenchel(g: &ConvexSymbol, x_grid: &[f64]) -> Result<ConvexSymbol> {
    let t = g.plain_table()?;
    if x_grid.is_empty() {
        return Err(Error::InvalidInput("empty conjugate grid".into()));
    }
    let n = t.x.len();
    let slopes: Vec<f64> = (0..n - 1).map(|j| (t.y[j + 1] - t.y[j]) / (t.x[j + 1] - t.x[j])).collect();
    let (s_first, s_last) = (slopes[0], slopes[n - 2]);
    let open_lo = t.domain.0 < t.x[0];
    let open_hi = t.domain.1 > t.x[n - 1];
    let tol = 1e-12;
    for &x in x_grid {
        if (open_hi && x > s_last + tol * (1.0 + s_last.abs()))
            || (open_lo && x < s_first - tol * (1.0 + s_first.abs()))
        {
            return Err(Error::Unbounded { x });
        }
    }
    let (xmin, xmax) = x_grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut pts: Vec<f64> = x_grid.to_vec();
    pts.extend(slopes.iter().copied().filter(|&s| s >= xmin && s <= xmax));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    let vals: Vec<f64> = pts
        .iter()
        .map(|&x| t.x.iter().zip(&t.y).map(|(&y, &gy)| x * y - gy).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let domain = (if open_lo { xmin } else { f64::NEG_INFINITY }, if open_hi { xmax } else { f64::INFINITY });
    if pts.len() == 1 {
        let x = pts[0];
        let v = vals[0];
        return ConvexSymbol::tabulated(vec![x, x + 1e-9], vec![v, v], (x.min(domain.0), (x + 1e-9).max(domain.1)));
    }
    let lambda0 = domain.1.min(-domain.0);
    Ok(ConvexSymbol { repr: SymbolRepr::Table(SymbolTable { x: pts, y: vals, domain, head: false }), lambda0 })
}

/// `φ̄(λ) = max_{1 ≤ n ≤ n_max} n φ(λ/√n)`, stopping early after
/// [`PHI_BAR_PATIENCE`] consecutive non-increasing terms.
pub fn phi_bar(phi: &ConvexSymbol, lambda: f64, n_max: usize) -> Result<f64> {
    if lambda.abs() >= phi.lambda0() {
        return Err(Error::Domain(format!("|lambda| = {} >= lambda0 = {}", lambda.abs(), phi.lambda0())));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let even = |l: f64| phi.eval(l).max(phi.eval(-l));
    let mut best = f64::NEG_INFINITY;
    let mut prev = f64::NEG_INFINITY;
    let mut flat = 0usize;
    for n in 1..=n_max.max(1) {
        let nf = n as f64;
        let term = nf * even(lambda / nf.sqrt());
        if term > best {
            best = term;
        }
        if term <= prev {
            flat += 1;
            if flat >= PHI_BAR_PATIENCE {
                break;
            }
        } else {
            flat = 0;
        }
        prev = term;
    }
    Ok(best)
}

/// `φ̄` tabulated on a nonnegative grid starting at 0, as an even symbol with
/// a quadratic head.
pub fn phi_bar_symbol(phi: &ConvexSymbol, grid: &[f64], n_max: usize) -> Result<ConvexSymbol> {
    if grid.first() != Some(&0.0) {
        return Err(Error::InvalidInput("phi-bar grid must start at 0".into()));
    }
    let y: Vec<f64> = grid.par_iter().map(|&l| phi_bar(phi, l, n_max)).collect::<Result<_>>()?;
    ConvexSymbol::even_with_quadratic_head(grid.to_vec(), y)
}

/// The Young function `Φ̄(u) = exp(φ̄*(u)) − 1` for an even symbol with a
/// quadratic head (as produced by [`phi_bar_symbol`]).
pub fn young_from_symbol(sym: &ConvexSymbol) -> Result<YoungFunction> {
    let t = match &sym.repr {
        SymbolRepr::Table(t) if t.head => t,
        SymbolRepr::Quadratic(s) => {
            if *s <= 0.0 {
                return Err(Error::Degenerate("quadratic symbol with zero scale".into()));
            }
            // exp(u²/(2σ²)) − 1 is Φ₂ rescaled; tabulate it exactly at the knots
            let z: Vec<f64> = (0..=400).map(|i| 0.05 * i as f64 * s.sqrt()).collect();
            let l: Vec<f64> = z.iter().map(|u| u * u / (2.0 * s)).collect();
            return YoungFunction::from_log_table(z, l);
        }
        _ => return Err(Error::InvalidInput("expected an even tabulated symbol".into())),
    };
    let (x1, y1) = (t.x[1], t.y[1]);
    if y1 <= 0.0 {
        return Err(Error::Degenerate("symbol vanishes near the origin".into()));
    }
    let c = y1 / (x1 * x1);
    let conj = |u: f64| -> f64 {
        let lh = (u / (2.0 * c)).min(x1);
        let mut best = u * lh - c * lh * lh;
        for (&x, &y) in t.x.iter().zip(&t.y).skip(1) {
            best = best.max(u * x - y);
        }
        best
    };
    let head_end = 2.0 * c * x1;
    let mut u: Vec<f64> = (0..=64).map(|i| head_end * i as f64 / 64.0).collect();
    for j in 1..t.x.len() - 1 {
        let s = (t.y[j + 1] - t.y[j]) / (t.x[j + 1] - t.x[j]);
        if s > head_end {
            u.push(s);
        }
    }
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lam_max = t.x[t.x.len() - 1];
    let last = *u.last().unwrap();
    let reach = conj(last);
    if reach < 80.0 {
        u.push(last + (80.0 - reach) / lam_max + 1.0);
    }
    let mut z = Vec::with_capacity(u.len());
    let mut l = Vec::with_capacity(u.len());
    for &ui in &u {
        let v = conj(ui);
        if z.is_empty() || (ui > *z.last().unwrap() && v > *l.last().unwrap()) {
            z.push(ui);
            l.push(v);
        }
    }
    YoungFunction::from_log_table(z, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inverses_round_trip() {
        let fs = [
            YoungFunction::power(3.0).unwrap(),
            YoungFunction::exp_quadratic(),
            YoungFunction::exp_power(1.5).unwrap(),
            YoungFunction::exponential(),
        ];
        for f in &fs {
            for i in 1..60 {
                let z = 0.05 * i as f64;
                assert!((f.inverse(f.eval(z)) - z).abs() < 1e-9 * (1.0 + z), "{f:?} at {z}");
            }
        }
    }

    #[test]
    fn tabulated_inverse_round_trips() {
        let z: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let l: Vec<f64> = z.iter().map(|v| v * v * 0.5 + v * 0.01).collect();
        let f = YoungFunction::from_log_table(z, l).unwrap();
        for i in 0..80 {
            let t = i as f64 * 0.07;
            assert!((f.inverse(f.eval(t)) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_sample_has_zero_norm() {
        let s = EmpiricalSample::uniform(vec![0.0; 5]).unwrap();
        assert_eq!(orlicz_norm(&s, &YoungFunction::exp_quadratic()).unwrap(), 0.0);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(EmpiricalSample::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn exponential_delta2_is_at_most_one() {
        let d = delta2_constant(&YoungFunction::exponential(), &Delta2Grid::default());
        assert!(!d.divergent);
        assert!(d.k <= 1.0 + 1e-9);
        let c = c_phi(&YoungFunction::exponential()).unwrap();
        assert!((c - 2f64.ln() / 54.0).abs() < 1e-6);
    }

    #[test]
    fn power_delta2_diverges() {
        for p in [1.0, 2.0, 4.0] {
            let f = YoungFunction::power(p).unwrap();
            assert!(delta2_constant(&f, &Delta2Grid::default()).divergent);
            assert_eq!(c_phi(&f), Err(Error::Delta2Divergent));
        }
    }

    #[test]
    fn quadratic_is_self_conjugate() {
        let g = ConvexSymbol::from_fn(|y: f64| 0.5 * y * y, f64::INFINITY);
        let ys: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.01).collect();
        let gt = ConvexSymbol::tabulated(ys.clone(), ys.iter().map(|y| 0.5 * y * y).collect(), (-4.0, 4.0)).unwrap();
        let xs: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
        let c = young_fenchel(&gt, &xs).unwrap();
        for &x in &xs {
            assert!((c.eval(x) - 0.5 * x * x).abs() < 1e-4);
        }
        assert!(g.eval(1.0) == 0.5);
    }

    #[test]
    fn abs_conjugate_is_indicator() {
        let ys: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.1).collect();
        let g = ConvexSymbol::tabulated(
            ys.clone(),
            ys.iter().map(|y| y.abs()).collect(),
            (f64::NEG_INFINITY, f64::INFINITY),
        )
        .unwrap();
        let c = young_fenchel(&g, &[-1.0, -0.5, 0.0, 0.5, 1.0]).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert!(c.eval(x).abs() < 1e-12);
        }
        assert!(matches!(young_fenchel(&g, &[1.5]), Err(Error::Unbounded { .. })));
        assert!(matches!(young_fenchel(&g, &[-1.2]), Err(Error::Unbounded { .. })));
    }

    #[test]
    fn phi_bar_of_quadratic_is_itself() {
        let q = ConvexSymbol::quadratic(1.0);
        for l in [0.0, 0.3, 1.0, 5.0] {
            assert!((phi_bar(&q, l, PHI_BAR_N_MAX).unwrap() - 0.5 * l * l).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_bar_of_cosh_attained_at_n_one() {
        let v = phi_bar(&ConvexSymbol::cosh_minus_one(), 2.0, PHI_BAR_N_MAX).unwrap();
        assert!((v - (2f64.cosh() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn phi_bar_domain() {
        let s = ConvexSymbol::from_fn(|l: f64| -(1.0 - l * l).ln(), 1.0);
        assert!(matches!(phi_bar(&s, 1.0, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn phi_bar_young_of_quadratic_matches_phi2_shape() {
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let sym = phi_bar_symbol(&ConvexSymbol::quadratic(1.0), &grid, PHI_BAR_N_MAX).unwrap();
        let y = young_from_symbol(&sym).unwrap();
        let phi2 = YoungFunction::exp_quadratic();
        for u in [0.5, 1.0, 2.0, 3.0] {
            let rel = (y.eval(u) - phi2.eval(u)).abs() / phi2.eval(u);
            assert!(rel < 1e-2, "u = {u}: {} vs {}", y.eval(u), phi2.eval(u));
        }
    }

    proptest! {
        #[test]
        fn orlicz_norm_is_homogeneous(vals in proptest::collection::vec(-5.0f64..5.0, 1..40), c in -10.0f64..10.0) {
            let s = EmpiricalSample::uniform(vals).unwrap();
            let phi = YoungFunction::exp_quadratic();
            let a = orlicz_norm(&s.scaled(c), &phi).unwrap();
            let b = c.abs() * orlicz_norm(&s, &phi).unwrap();
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b));
        }

        #[test]
        fn orlicz_norm_is_monotone(vals in proptest::collection::vec(-5.0f64..5.0, 1..40), bump in 0.0f64..2.0) {
            let s = EmpiricalSample::uniform(vals.clone()).unwrap();
            let t = EmpiricalSample::uniform(vals.iter().map(|v| v.abs() + bump).collect()).unwrap();
            let phi = YoungFunction::exp_power(1.0).unwrap();
            prop_assert!(orlicz_norm(&s, &phi).unwrap() <= orlicz_norm(&t, &phi).unwrap() * (1.0 + 1e-11));
        }

        #[test]
        fn phi_bar_dominates_phi(l in -3.0f64..3.0) {
            let s = ConvexSymbol::cosh_minus_one();
            prop_assert!(phi_bar(&s, l, 10_000).unwrap() >= s.eval(l));
        }
    }
}
