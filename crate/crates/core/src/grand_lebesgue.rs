//! Grand Lebesgue spaces `Gψ`: ψ-functions, moment functions, `Gψ` norms,
//! fundamental functions, natural functions, `B(φ)` norms and tail bounds.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{self, bisect_threshold, sup_log_grid};
use crate::orlicz::{ConvexSymbol, EmpiricalSample, YoungFunction};

/// Relative margin kept away from finite support endpoints.
pub const SUPPORT_MARGIN: f64 = 1e-3;
/// Upper end of the tabulation when `B = ∞`.
pub const P_MAX: f64 = 512.0;
/// Size of the coarse p-grid.
pub const P_GRID: usize = 128;
/// Best known Rosenthal constant for symmetric summands.
pub const ROSENTHAL_CONSTANT: f64 = 1.53573;

/// `C_R p / (e ln p)`.
pub fn rosenthal_multiplier(p: f64, c_r: f64) -> f64 {
    c_r * p / (std::f64::consts::E * p.ln())
}

#[derive(Clone)]
enum PsiRepr {
    Fn(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Degenerate { r: f64, value: f64 },
    // log-log interpolation
    Table { lp: Vec<f64>, lv: Vec<f64> },
}

/// A function `ψ` on an open interval `(A, B)`, `1 ≤ A < B ≤ ∞`, positive and
/// `+∞` outside its support.
#[derive(Clone)]
pub struct PsiFunction {
    a: f64,
    b: f64,
    repr: PsiRepr,
}

impl fmt::Debug for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            PsiRepr::Degenerate { r, value } => write!(f, "PsiFunction::Degenerate(r = {r}, value = {value})"),
            _ => write!(f, "PsiFunction({}, {})", self.a, self.b),
        }
    }
}

impl PsiFunction {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(a: f64, b: f64, f: F) -> Result<Self> {
        if !(a >= 1.0 && b > a) {
            return Err(Error::InvalidInput(format!("psi support ({a}, {b}) must satisfy 1 <= A < B")));
        }
        Ok(Self { a, b, repr: PsiRepr::Fn(Arc::new(f)) })
    }

    /// `ψ(p) = p^e` on `(a, b)`.
    pub fn power(a: f64, b: f64, e: f64) -> Result<Self> {
        Self::new(a, b, move |p| p.powf(e))
    }

    /// `ψ(p) = √p` on `(a, b)`.
    pub fn sqrt(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, f64::sqrt)
    }

    /// `ψ_(r)`: equal to 1 at `p = r` and infinite elsewhere.
    pub fn degenerate(r: f64) -> Result<Self> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!("degenerate psi needs r >= 1, got {r}")));
        }
        Ok(Self { a: r, b: r, repr: PsiRepr::Degenerate { r, value: 1.0 } })
    }

    /// Log-log interpolation through `(p_i, v_i)` on the support `(a, b)`.
    pub fn tabulated(a: f64, b: f64, p: &[f64], v: &[f64]) -> Result<Self> {
        if p.len() < 2 || p.len() != v.len() || !p.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("psi table needs increasing knots".into()));
        }
        if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInput("psi table values must be positive and finite".into()));
        }
        if !(a >= 1.0 && b > a) {
            return Err(Error::InvalidInput(format!("psi support ({a}, {b}) must satisfy 1 <= A < B")));
        }
        Ok(Self {
            a,
            b,
            repr: PsiRepr::Table { lp: p.iter().map(|x| x.ln()).collect(), lv: v.iter().map(|x| x.ln()).collect() },
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn degenerate_point(&self) -> Option<(f64, f64)> {
        match self.repr {
            PsiRepr::Degenerate { r, value } => Some((r, value)),
            _ => None,
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        match &self.repr {
            PsiRepr::Degenerate { r, value } => {
                if p == *r {
                    *value
                } else {
                    f64::INFINITY
                }
            }
            _ if !(p > self.a && p < self.b) => f64::INFINITY,
            PsiRepr::Fn(f) => f(p),
            PsiRepr::Table { lp, lv } => numeric::interp_extrapolate(lp, lv, p.ln()).exp(),
        }
    }

    /// Clamped tabulation interval `[A(1+ε), B(1−ε)]`, or `[A(1+ε), P_MAX]` when `B = ∞`.
    pub fn clamped(&self) -> Result<(f64, f64)> {
        if let PsiRepr::Degenerate { r, .. } = self.repr {
            return Ok((r, r));
        }
        let lo = self.a * (1.0 + SUPPORT_MARGIN);
        let hi = if self.b.is_infinite() { P_MAX } else { self.b * (1.0 - SUPPORT_MARGIN) };
        if lo >= hi {
            return Err(Error::EmptySupport { a: self.a, b: self.b });
        }
        Ok((lo, hi))
    }

    /// The coarse log grid on the clamped support.
    pub fn tabulation(&self) -> Result<Vec<f64>> {
        let (lo, hi) = self.clamped()?;
        if lo == hi {
            return Ok(vec![lo]);
        }
        Ok(numeric::log_grid(lo, hi, P_GRID))
    }

    /// Smallest tabulated value.
    pub fn inf_on_grid(&self) -> Result<f64> {
        Ok(self.tabulation()?.iter().map(|&p| self.eval(p)).fold(f64::INFINITY, f64::min))
    }

    fn map<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(&self, g: F) -> Self {
        match self.repr {
            PsiRepr::Degenerate { r, value } => {
                Self { a: self.a, b: self.b, repr: PsiRepr::Degenerate { r, value: g(r, value) } }
            }
            _ => {
                let inner = self.clone();
                Self { a: self.a, b: self.b, repr: PsiRepr::Fn(Arc::new(move |p| g(p, inner.eval(p)))) }
            }
        }
    }

    /// `ψ(p)` multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        self.map(move |_, v| c * v)
    }
}

#[derive(Clone)]
enum MomentRepr {
    Fn(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Sample(Arc<EmpiricalSample>),
}

/// Where a [`MomentFunction`] comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentSource {
    ClosedForm,
    Empirical { replicas: usize },
}

/// `p ↦ |η|_p` on a support `(A, B)`.
#[derive(Clone)]
pub struct MomentFunction {
    repr: MomentRepr,
    support: (f64, f64),
}

impl fmt::Debug for MomentFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MomentFunction({:?}, support = {:?})", self.source(), self.support)
    }
}

impl MomentFunction {
    pub fn closed_form<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, support: (f64, f64)) -> Self {
        Self { repr: MomentRepr::Fn(Arc::new(f)), support }
    }

    /// `|σZ|_p = σ γ_p` for a standard normal `Z`.
    pub fn gaussian(sigma: f64) -> Self {
        Self::closed_form(move |p| sigma.abs() * numeric::gaussian_abs_moment(p), (1.0, f64::INFINITY))
    }

    pub fn constant(c: f64) -> Self {
        Self::closed_form(move |_| c.abs(), (1.0, f64::INFINITY))
    }

    /// Equally weighted replicas of a random variable.
    pub fn from_sample(values: Vec<f64>) -> Result<Self> {
        Ok(Self::from_weighted(EmpiricalSample::uniform(values)?))
    }

    pub fn from_weighted(sample: EmpiricalSample) -> Self {
        Self { repr: MomentRepr::Sample(Arc::new(sample)), support: (1.0, f64::INFINITY) }
    }

    pub fn with_support(mut self, a: f64, b: f64) -> Self {
        self.support = (a, b);
        self
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn source(&self) -> MomentSource {
        match &self.repr {
            MomentRepr::Fn(_) => MomentSource::ClosedForm,
            MomentRepr::Sample(s) => MomentSource::Empirical { replicas: s.values().len() },
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        match &self.repr {
            MomentRepr::Fn(f) => f(p),
            MomentRepr::Sample(s) => s.lp_norm(p),
        }
    }

    /// Batched standard error of an equally weighted empirical moment.
    pub fn standard_error(&self, p: f64) -> Option<f64> {
        match &self.repr {
            MomentRepr::Fn(_) => None,
            MomentRepr::Sample(s) => Some(numeric::lp_norm_with_se(s.values(), p).1),
        }
    }
}

/// Value of a `Gψ` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsiNorm {
    /// The norm, `+∞` when flagged unbounded.
    pub value: f64,
    /// Supremum actually attained on the clamped support.
    pub lower_bound: f64,
    pub argmax: f64,
    pub unbounded: bool,
}

/// `sup_p |η|_p / ψ(p)` over the clamped support.
pub fn gpsi_norm(moments: &MomentFunction, psi: &PsiFunction) -> Result<GpsiNorm> {
    if let Some((r, v)) = psi.degenerate_point() {
        let val = moments.eval(r) / v;
        return Ok(GpsiNorm { value: val, lower_bound: val, argmax: r, unbounded: false });
    }
    let (lo, hi) = psi.clamped()?;
    let s = sup_log_grid(|p| moments.eval(p) / psi.eval(p), lo, hi, P_GRID);
    let value = if s.at_upper_edge { f64::INFINITY } else { s.value };
    Ok(GpsiNorm { value, lower_bound: s.value, argmax: s.argmax, unbounded: s.at_upper_edge })
}

/// `φ(δ) = sup_p δ^{1/p} / ψ(p)` for `δ ∈ (0, 1]`.
pub fn fundamental_function(psi: &PsiFunction, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta = {delta} not in (0, 1]")));
    }
    fundamental_value(psi, delta)
}

/// `sup_p x^{1/p} / ψ(p)` for any `x > 0`.
pub fn fundamental_value(psi: &PsiFunction, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("argument {x} must be positive")));
    }
    if let Some((r, v)) = psi.degenerate_point() {
        return Ok(x.powf(1.0 / r) / v);
    }
    let (lo, hi) = psi.clamped()?;
    Ok(sup_log_grid(|p| x.powf(1.0 / p) / psi.eval(p), lo, hi, P_GRID).value)
}

/// Pointwise supremum of a family of moment functions on their common support.
pub fn natural_psi(family: &[MomentFunction]) -> Result<PsiFunction> {
    if family.is_empty() {
        return Err(Error::NoCommonSupport);
    }
    let a = family.iter().map(|m| m.support.0).fold(f64::NEG_INFINITY, f64::max);
    let b = family.iter().map(|m| m.support.1).fold(f64::INFINITY, f64::min);
    if !(b > a) {
        return Err(Error::NoCommonSupport);
    }
    let probe = PsiFunction::new(a.max(1.0), b, |_| 1.0)?;
    let grid = probe.tabulation()?;
    let vals: Vec<f64> = grid.iter().map(|&p| family.iter().map(|m| m.eval(p)).fold(0.0f64, f64::max)).collect();
    if vals.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Degenerate("natural function vanishes".into()));
    }
    PsiFunction::tabulated(a.max(1.0), b, &grid, &vals)
}

/// `ψ_θ(p) = ψ(p) / (1 − θ/p)`.
pub fn psi_theta(psi: &PsiFunction, theta: f64) -> Result<PsiFunction> {
    let (a, _) = psi.support();
    if a <= theta {
        return Err(Error::SupportBelowTheta { a, theta });
    }
    Ok(psi.map(move |p, v| v / (1.0 - theta / p)))
}

/// `ψ_R(p) = ψ(p) · C_R p / (e ln p)`.
pub fn psi_rosenthal(psi: &PsiFunction, c_r: f64) -> PsiFunction {
    psi.map(move |p, v| v * rosenthal_multiplier(p, c_r))
}

/// Moment generating function of a centred variable.
#[derive(Clone)]
pub enum Mgf {
    ClosedForm(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Empirical(EmpiricalSample),
}

impl Mgf {
    pub fn gaussian(sigma: f64) -> Self {
        Mgf::ClosedForm(Arc::new(move |l| (0.5 * sigma * sigma * l * l).exp()))
    }

    pub fn from_sample(values: Vec<f64>) -> Result<Self> {
        Ok(Mgf::Empirical(EmpiricalSample::uniform(values)?))
    }

    /// `E exp(λξ)`, computed without rescaling so that overflow is visible.
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Mgf::ClosedForm(f) => f(lambda),
            Mgf::Empirical(s) => s.expect(|v| (lambda * v).exp()),
        }
    }
}

/// `inf{τ ≥ 0 : E exp(λξ) ≤ exp(φ(λτ)) for all λ on the grid}`.
pub fn bphi_norm(mgf: &Mgf, phi: &ConvexSymbol, lambda_grid: &[f64]) -> Result<f64> {
    let mut logs = Vec::with_capacity(lambda_grid.len());
    for &l in lambda_grid {
        let m = mgf.eval(l);
        if !m.is_finite() || !(m > 0.0) {
            return Err(Error::KramerViolation { lambda: l });
        }
        logs.push((l, m.ln()));
    }
    let ok = |tau: f64| logs.iter().all(|&(l, lm)| lm <= phi.eval(l * tau) + 1e-12 * (1.0 + lm.abs()));
    if ok(0.0) {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut steps = 0;
    while !ok(hi) {
        hi *= 2.0;
        steps += 1;
        if steps > 1000 || !hi.is_finite() {
            let worst = logs.iter().map(|&(l, _)| l).fold(0.0f64, |a, l| if l.abs() > a.abs() { l } else { a });
            return Err(Error::KramerViolation { lambda: worst });
        }
    }
    let mut lo = hi;
    while ok(lo) && lo > 1e-300 {
        lo *= 0.5;
    }
    Ok(bisect_threshold(ok, lo, hi, crate::orlicz::BISECTION_RTOL))
}

/// `ψ_φ(p) = p / φ⁻¹(p)` on `(2, sup φ)`.
pub fn psi_from_phi(phi: &ConvexSymbol) -> Result<PsiFunction> {
    let l0 = phi.lambda0();
    let edge = if l0.is_finite() { l0 * (1.0 - 1e-12) } else { 1e8 };
    let top = phi.eval(edge).max(phi.eval(-edge));
    if !(top > 2.0) {
        return Err(Error::NotInvertible);
    }
    let b = if l0.is_finite() { top } else { f64::INFINITY };
    let phi = phi.clone();
    let inverse = move |p: f64| -> f64 { bisect_threshold(|l| phi.eval(l) >= p, 0.0, edge, 1e-13) };
    PsiFunction::new(2.0, b, move |p| p / inverse(p))
}

/// `min(1, 2 exp(−ψ̃*(ln(z/‖η‖))))` with `ψ̃(p) = p ln ψ(p)` and `ψ̃*` its
/// Young–Fenchel conjugate over the clamped support.
pub fn tail_bound(psi: &PsiFunction, norm: f64, z: f64) -> Result<f64> {
    if !(norm > 0.0) || !(z >= norm) {
        return Err(Error::Domain(format!("need z >= norm > 0, got z = {z}, norm = {norm}")));
    }
    let v = (z / norm).ln();
    let s = conjugate_log_psi(psi, v)?;
    Ok((2.0 * (-s).exp()).min(1.0))
}

fn conjugate_log_psi(psi: &PsiFunction, v: f64) -> Result<f64> {
    if let Some((r, val)) = psi.degenerate_point() {
        return Ok(r * v - r * val.ln());
    }
    let (lo, hi) = psi.clamped()?;
    Ok(sup_log_grid(|p| p * v - p * psi.eval(p).ln(), lo, hi, P_GRID).value)
}

/// Young function `N` attached to `ψ`: `N(u) = C u²` for `|u| ≤ 3` and
/// `exp(ψ̃*(ln |u|))` beyond. With `c = None` the constant makes `N`
/// continuous at 3.
pub fn orlicz_from_psi(psi: &PsiFunction, c: Option<f64>) -> Result<YoungFunction> {
    let at3 = conjugate_log_psi(psi, 3f64.ln())?;
    let c = c.unwrap_or_else(|| at3.exp() / 9.0);
    let mut z: Vec<f64> = (0..=64).map(|i| 3.0 * i as f64 / 64.0).collect();
    let mut l: Vec<f64> = z.iter().map(|u| (c * u * u).ln_1p()).collect();
    for u in numeric::log_grid(3.0, 1e6, 512).into_iter().skip(1) {
        let s = conjugate_log_psi(psi, u.ln())?;
        let lv = if s > 30.0 { s } else { s.exp().ln_1p() };
        if lv > *l.last().unwrap() {
            z.push(u);
            l.push(lv);
        }
        if lv > 80.0 {
            break;
        }
    }
    YoungFunction::from_log_table(z, l)
}
