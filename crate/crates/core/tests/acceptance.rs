//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion with its
//! runtime against the budget. Exits non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use holderclt::clt::{clt_verdict, tightness_audit, CltExperiment, NormSpec, TightnessConfig};
use holderclt::fields::{covariance_distance, rosenthal_audit, simulate, Covariance, FieldModel, Innovation};
use holderclt::geometry::{
    arnold_imkeller_audit, fit_ball_exponent, tau_distance, triangle_check, w_distance, ChainingGeometry,
    MetricMeasureSpace,
};
use holderclt::grand_lebesgue::{fundamental_function, gpsi_norm, MomentFunction, PsiFunction};
use holderclt::holder::{
    fractional_sobolev_norm, grr_audit_with, rectangle_difference, Grid, GridField, GrrOptions, SobolevPlan,
};
use holderclt::orlicz::{orlicz_norm, young_fenchel, ConvexSymbol, EmpiricalSample, YoungFunction};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Rosenthal constant for symmetric laws.
const C_R: f64 = 1.53573;

// ---------------------------------------------------------------------------

fn ac01() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..200);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        let p = rng.random_range(1.0..8.0);
        let lp = (v.iter().map(|x| x.abs().powf(p)).sum::<f64>() / n as f64).powf(1.0 / p);
        let got = orlicz_norm(&EmpiricalSample::uniform(v).map_err(err)?, &YoungFunction::power(p).map_err(err)?)
            .map_err(err)?;
        worst = worst.max((got - lp).abs() / lp);
    }
    ensure(worst <= 1e-9, format!("power norm relative error {worst:.2e}"))?;
    let z = EmpiricalSample::standard_normal_quadrature(0.01, 12.0);
    let phi2 = orlicz_norm(&z, &YoungFunction::exp_quadratic()).map_err(err)?;
    let target = 2.0 / 3f64.sqrt();
    ensure((phi2 - target).abs() <= 1e-6, format!("N(0,1) under Phi2: {phi2} vs {target}"))?;
    Ok(format!("max rel err {worst:.1e}; ||Z||_Phi2 = {phi2:.9}"))
}

fn ac02() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for r in [2.0, 3.0, 5.0] {
        for _ in 0..20 {
            let n = rng.random_range(2..300);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let want = (v.iter().map(|x| x.abs().powf(r)).sum::<f64>() / n as f64).powf(1.0 / r);
            let got =
                gpsi_norm(&MomentFunction::from_sample(v).map_err(err)?, &PsiFunction::degenerate(r).map_err(err)?)
                    .map_err(err)?
                    .value;
            worst = worst.max((got - want).abs() / want.max(1.0));
        }
    }
    ensure(worst <= 1e-12, format!("error {worst:.2e}"))?;
    Ok(format!("max error {worst:.1e} over r in {{2,3,5}}"))
}

fn ac03() -> Check {
    let mut checked = 0;
    let mut worst = 0.0f64;
    for q in [1.0f64, 2.0, 4.0] {
        let psi = PsiFunction::power(1.0, f64::INFINITY, 1.0 / q).map_err(err)?;
        let (lo, hi) = psi.clamped().map_err(err)?;
        for k in 1..=6 {
            let delta = 10f64.powi(-k);
            let l = (1.0 / delta).ln();
            let p_star = q * l;
            if !(p_star > lo && p_star < hi) {
                continue;
            }
            let want = (std::f64::consts::E * q * l).powf(-1.0 / q);
            let got = fundamental_function(&psi, delta).map_err(err)?;
            worst = worst.max((got - want).abs());
            checked += 1;
        }
    }
    ensure(checked >= 12, format!("only {checked} cases inside the support"))?;
    ensure(worst <= 1e-6, format!("error {worst:.2e}"))?;
    Ok(format!("{checked} cases, max error {worst:.1e}"))
}

fn ac04() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(8..80);
        let lo = -rng.random_range(0.5..3.0);
        let hi = rng.random_range(0.5..3.0);
        let mut x: Vec<f64> = (0..m - 2).map(|_| rng.random_range(lo..hi)).collect();
        x.push(lo);
        x.push(hi);
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        x.dedup();
        let mut slopes: Vec<f64> = (0..x.len() - 1).map(|_| rng.random_range(-5.0..5.0)).collect();
        slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut y = vec![rng.random_range(-1.0..1.0)];
        for j in 0..x.len() - 1 {
            y.push(y[j] + slopes[j] * (x[j + 1] - x[j]));
        }
        let g = ConvexSymbol::tabulated(x.clone(), y.clone(), (lo, hi)).map_err(err)?;
        let s_grid: Vec<f64> = (0..=200).map(|i| -7.0 + 14.0 * i as f64 / 200.0).collect();
        let g_star = young_fenchel(&g, &s_grid).map_err(err)?;
        let g_star_star = young_fenchel(&g_star, &x).map_err(err)?;
        for (xi, yi) in x.iter().zip(&y) {
            worst = worst.max((g_star_star.eval(*xi) - yi).abs());
        }
    }
    ensure(worst <= 1e-6, format!("max grid error {worst:.2e}"))?;
    Ok(format!("20 random convex tables, max grid error {worst:.1e}"))
}

fn ac05() -> Check {
    let mut parts = Vec::new();
    for (d, grid) in [(1, Grid::line(1024).map_err(err)?), (2, Grid::square(64).map_err(err)?)] {
        let fit = fit_ball_exponent(&MetricMeasureSpace::uniform_grid(&grid)).map_err(err)?;
        let target = 2.0 * d as f64;
        let rel = (fit.theta - target).abs() / target;
        ensure(rel <= 0.05, format!("d = {d}: theta = {} (target {target})", fit.theta))?;
        parts.push(format!("d={d}: theta={:.3}", fit.theta));
    }
    Ok(parts.join(", "))
}

/// `∫₀^d g(m(r)) dr` for the uniform law on `[0, 1]` with `m(r) = |B(r, x)|`,
/// using `r = d t⁴` and composite Simpson in `t`.
fn continuum_integral<G: Fn(f64) -> f64>(x: f64, d: f64, g: G) -> f64 {
    let n = 20_000;
    let h = 1.0 / n as f64;
    let f = |t: f64| {
        if t == 0.0 {
            return 0.0;
        }
        let r = d * t.powi(4);
        let m = r.min(1.0 - x) + r.min(x);
        g(m) * 4.0 * d * t.powi(3)
    };
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn ac06() -> Check {
    let n = 4096;
    let space = MetricMeasureSpace::uniform_grid(&Grid::line(n).map_err(err)?);
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for phi in [YoungFunction::power(4.0).map_err(err)?, YoungFunction::exponential()] {
        for _ in 0..20 {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let (xa, xb) = (a as f64 / (n - 1) as f64, b as f64 / (n - 1) as f64);
            let d = (xa - xb).abs();
            if d < 0.1 {
                continue;
            }
            let tau = tau_distance(&space, &phi, a, b);
            let tau_c = continuum_integral(xa, d, |m| phi.inverse(1.0 / m))
                .max(continuum_integral(xb, d, |m| phi.inverse(1.0 / m)));
            let w = w_distance(&space, &phi, 1.0, a, b).map_err(err)?;
            let g = |m: f64| phi.inverse(4.0 / (m * m));
            let w_c = 6.0 * (continuum_integral(xa, d, g) + continuum_integral(xb, d, g));
            for (got, want) in [(tau, tau_c), (w, w_c)] {
                let rel = (got - want).abs() / want;
                ensure(rel.is_finite(), format!("non-finite comparison at ({a}, {b}): {got} vs {want}"))?;
                worst = worst.max(rel);
            }
        }
    }
    ensure(worst <= 0.02, format!("relative gap to continuum {worst:.4}"))?;

    let mut triangle = Vec::new();
    let phi = YoungFunction::power(4.0).map_err(err)?;
    for grid in [Grid::line(1024).map_err(err)?, Grid::square(24).map_err(err)?] {
        let geo = ChainingGeometry::new(&MetricMeasureSpace::uniform_grid(&grid));
        for (name, m) in [("w", geo.w_matrix(&phi, 1.0).map_err(err)?), ("tau", geo.tau_matrix(&phi))] {
            let t = triangle_check(&m, 0, 100_000, 66);
            ensure(
                t.triples == 100_000 && t.violations == 0,
                format!("{name} on {:?}: {} violations", grid.shape(), t.violations),
            )?;
            triangle.push(t.triples);
        }
    }
    Ok(format!("max rel gap {worst:.4}; {} x 1e5 triples, 0 violations", triangle.len()))
}

fn ac07() -> Check {
    let grid = Grid::line(257).map_err(err)?;
    let ens = simulate(&FieldModel::gaussian(Covariance::Brownian), &grid, 100, 7).map_err(err)?;
    let space = MetricMeasureSpace::uniform_grid(&grid);
    let geo = ChainingGeometry::new(&space);
    let phi = YoungFunction::power(4.0).map_err(err)?;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for r in 0..ens.replicas() {
        let rep = arnold_imkeller_audit(&ens.field(r), &geo, &phi).map_err(err)?;
        violations += rep.violations;
        worst = worst.max(rep.worst_ratio);
        if r == 0 {
            // V = ∬ Φ(|f(x) − f(y)| / d(x, y)) m(dx) m(dy) by direct summation
            let f = ens.path(0);
            let m = 1.0 / grid.len() as f64;
            let mut v = 0.0;
            for i in 0..grid.len() {
                for j in 0..grid.len() {
                    if i != j {
                        let d = (i as f64 - j as f64).abs() / 256.0;
                        v += m * m * ((f[i] - f[j]).abs() / d).powi(4);
                    }
                }
            }
            ensure((rep.v - v).abs() <= 1e-9 * v, format!("V = {} vs direct {v}", rep.v))?;
        }
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!("100 paths, 0 violations, worst ratio {worst:.3}"))
}

fn ac08() -> Check {
    let grid = Grid::line(513).map_err(err)?;
    let ens = simulate(&FieldModel::gaussian(Covariance::Brownian), &grid, 500, 8).map_err(err)?;
    let (alpha, p) = (0.4, 8.0);
    let plan = SobolevPlan::new(&grid, &[alpha], p).map_err(err)?;
    let opts = GrrOptions::default();
    let q = 8.0 * 4f64.powf(1.0 / p) * (alpha + 1.0 / p) / (alpha - 1.0 / p);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for r in 0..ens.replicas() {
        let rep = grr_audit_with(&plan, &ens.field(r), &[alpha], &opts).map_err(err)?;
        ensure((rep.coefficient - q).abs() <= 1e-12 * q, format!("coefficient {} vs {q}", rep.coefficient))?;
        violations += rep.violations;
        worst = worst.max(rep.worst_ratio);
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!("500 paths, coefficient {q:.4}, 0 violations, worst ratio {worst:.3}"))
}

/// `(E|n^{-1/2} Σ εᵢ|^p)^{1/p}` for Rademacher signs, from the binomial law.
fn rademacher_sum_norm(n: usize, p: f64) -> f64 {
    let mut ln_binom = 0.0f64; // ln C(n, k)
    let mut acc = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let s = (2.0 * k as f64 - n as f64).abs() / (n as f64).sqrt();
        if s > 0.0 {
            acc += (ln_binom - n as f64 * 2f64.ln() + p * s.ln()).exp();
        }
    }
    acc.powf(1.0 / p)
}

fn ac09() -> Check {
    let mut parts = Vec::new();
    for (i, n) in [16usize, 256].into_iter().enumerate() {
        for (j, p) in [4.0f64, 8.0].into_iter().enumerate() {
            let row =
                rosenthal_audit(Innovation::Rademacher, n, p, 100_000, 900 + (2 * i + j) as u64, C_R).map_err(err)?;
            let bound = C_R * p / (std::f64::consts::E * p.ln());
            ensure((row.bound - bound).abs() <= 1e-12 * bound, format!("bound {} vs {bound}", row.bound))?;
            ensure(!row.violation, format!("n={n} p={p}: {} > {bound}", row.empirical))?;
            let exact = rademacher_sum_norm(n, p);
            ensure(
                (row.empirical - exact).abs() <= 4.0 * row.standard_error,
                format!("n={n} p={p}: estimate {} vs exact {exact}", row.empirical),
            )?;
            parts.push(format!("{:.3}/{:.3}", row.empirical, bound));
        }
    }
    Ok(format!("|S_n|_p / bound: {}", parts.join(" ")))
}

fn ac10() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut cases = 0;
    for _ in 0..50 {
        // integer values keep every sum exact
        let (n1, n2) = (rng.random_range(2..20), rng.random_range(2..20));
        let grid = Grid::new(vec![n1, n2]).map_err(err)?;
        let g: Vec<f64> = (0..n1).map(|_| rng.random_range(-1000..1000) as f64).collect();
        let h: Vec<f64> = (0..n2).map(|_| rng.random_range(-1000..1000) as f64).collect();
        let sep = GridField::new(grid.clone(), (0..n1 * n2).map(|k| g[k / n2] + h[k % n2]).collect()).map_err(err)?;
        let vals: Vec<f64> = (0..n1 * n2).map(|_| rng.random_range(-1000..1000) as f64).collect();
        let f = GridField::new(grid.clone(), vals.clone()).map_err(err)?;
        let at = |i: usize, j: usize| vals[i * n2 + j];
        for _ in 0..20 {
            let x = [rng.random_range(0..n1), rng.random_range(0..n2)];
            let y = [rng.random_range(0..n1), rng.random_range(0..n2)];
            ensure(rectangle_difference(&sep, &x, &y) == 0.0, "separable field has a non-zero rectangle difference")?;
            let want = at(y[0], y[1]) - at(x[0], y[1]) - at(y[0], x[1]) + at(x[0], x[1]);
            ensure(rectangle_difference(&f, &x, &y) == want, "d = 2 expansion mismatch")?;
            cases += 1;
        }
    }
    // x₁x₂ on a dyadic grid: coordinates and products are exact
    let grid = Grid::new(vec![17, 33]).map_err(err)?;
    let prod = GridField::from_fn(grid.clone(), |p| p[0] * p[1]);
    for i in 0..17 {
        for j in 0..33 {
            let (x, y) = ([i, j], [16 - i, 32 - j]);
            let want = (grid.coord(0, y[0]) - grid.coord(0, x[0])) * (grid.coord(1, y[1]) - grid.coord(1, x[1]));
            ensure(rectangle_difference(&prod, &x, &y) == want, "product rule mismatch")?;
        }
    }
    // in three dimensions a field constant in one coordinate is annihilated
    let g3 = Grid::new(vec![5, 6, 7]).map_err(err)?;
    let f3 = GridField::from_fn(g3, |p| (8.0 * p[0]).floor() * (16.0 * p[2]).floor());
    ensure(rectangle_difference(&f3, &[0, 1, 2], &[4, 5, 6]) == 0.0, "d = 3 separable mismatch")?;
    Ok(format!("{cases} random boxes, product rule on 17x33, all exact"))
}

fn ac11() -> Check {
    let grid = Grid::line(1024).map_err(err)?;
    let f = GridField::from_fn(grid, |x| x[0]);
    let mut parts = Vec::new();
    for (alpha, p) in [(0.5f64, 4.0f64), (0.25, 8.0)] {
        let got = fractional_sobolev_norm(&f, &[alpha], p).map_err(err)?.powf(p);
        let s = (1.0 - alpha) * p;
        let want = 2.0 / (s * (s + 1.0));
        let rel = (got - want).abs() / want;
        ensure(rel <= 0.01, format!("(alpha, p) = ({alpha}, {p}): {got} vs {want}"))?;
        parts.push(format!("({alpha},{p}) rel {rel:.1e}"));
    }
    Ok(parts.join(", "))
}

fn ac12() -> Check {
    let psi = PsiFunction::sqrt(3.0, f64::INFINITY).map_err(err)?;
    let cfg = TightnessConfig {
        model: FieldModel::gaussian(Covariance::Brownian),
        grid: Grid::line(257).map_err(err)?,
        n_schedule: vec![1, 4, 16, 64],
        replicas: 2000,
        seed: 12,
        p_grid: vec![4.0, 8.0],
        theta: 2.0,
        c_theta: 1.0,
        psi,
        c_r: C_R,
    };
    let rep = tightness_audit(&cfg).map_err(err)?;
    ensure(rep.rows.len() == 8, format!("{} rows", rep.rows.len()))?;
    for row in &rep.rows {
        let p = row.p;
        let bound = 12.0 * 4f64.powf(1.0 / p) * p.sqrt() * (C_R * p / (std::f64::consts::E * p.ln())) / (1.0 - 2.0 / p);
        ensure((row.bound - bound).abs() <= 1e-12 * bound, format!("bound {} vs {bound}", row.bound))?;
        ensure(row.statistic - 3.0 * row.standard_error <= bound, format!("n={} p={p} exceeds bound", row.n))?;
        ensure(!row.violation, "row flagged")?;
    }
    ensure(rep.violations == 0, format!("{} violations", rep.violations))?;
    let max_z = rep.rows.iter().map(|r| r.mean_z).fold(0.0, f64::max);
    ensure(max_z.is_finite() && max_z <= 1.0, format!("E Z = {max_z}"))?;
    Ok(format!("8 rows, 0 violations, worst ratio {:.3}, max E Z {:.2e}", rep.worst_ratio, max_z))
}

/// Two-sample KS statistic by brute force.
fn ks_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut pts: Vec<f64> = a.iter().chain(b).copied().collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.iter()
        .map(|&t| {
            let fa = a.iter().filter(|&&v| v <= t).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|&&v| v <= t).count() as f64 / b.len() as f64;
            (fa - fb).abs()
        })
        .fold(0.0, f64::max)
}

fn ac13() -> Check {
    let grid = Grid::line(128).map_err(err)?;
    let model = FieldModel::series(1.5, 64, Innovation::Rademacher).map_err(err)?;
    let rho = covariance_distance(&model, &grid).map_err(err)?.map(|d| d.powf(0.4));
    let exp = CltExperiment {
        model,
        grid,
        n_schedule: vec![1, 4, 16, 64, 256],
        replicas: 2000,
        norm: NormSpec::Holder { rho },
        seed: 13,
        precondition_p: Some(8.0),
    };
    let rep = clt_verdict(&exp).map_err(err)?;
    let crit = (-(0.005f64).ln() / 2.0).sqrt() * (4000.0f64 / 4.0e6).sqrt();
    ensure((crit - 0.0515).abs() < 2e-4, format!("critical value {crit}"))?;
    for row in &rep.rows {
        ensure((row.critical_value - crit).abs() < 1e-12, "critical value mismatch")?;
        let ks = ks_oracle(&row.ecdf, &rep.limit_ecdf);
        ensure((ks - row.ks_distance).abs() < 1e-12, format!("n={}: KS {} vs oracle {ks}", row.n, row.ks_distance))?;
    }
    let dists: Vec<String> = rep.rows.iter().map(|r| format!("{:.4}", r.ks_distance)).collect();
    ensure(rep.decreasing, format!("KS distances do not decrease: {}", dists.join(" ")))?;
    ensure(rep.final_distance <= 0.06, format!("final distance {}", rep.final_distance))?;
    Ok(format!("KS along n: {}", dists.join(" ")))
}

fn run_cli(args: &[&str], out: &Path) -> Result<i32, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_holderclt"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HOLDERCLT_OUT")
        .output()
        .map_err(err)?;
    let code = status.status.code().unwrap_or(-1);
    if code != 0 && code != 1 {
        return Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&status.stderr)));
    }
    Ok(code)
}

fn same_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a).map_err(err)?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut other: Vec<_> = std::fs::read_dir(b).map_err(err)?.map(|e| e.unwrap().file_name()).collect();
    other.sort();
    ensure(names == other, format!("{} and {} hold different files", a.display(), b.display()))?;
    for n in &names {
        let (x, y) = (std::fs::read(a.join(n)).map_err(err)?, std::fs::read(b.join(n)).map_err(err)?);
        ensure(x == y, format!("{} differs between runs", n.to_string_lossy()))?;
    }
    Ok(names.len())
}

const AC14_CONFIG: &str = r#"
version = 1
seed = 3

[grid]
shape = [65]

[model]
kind = "gaussian"
covariance = "brownian"

[simulate]
replicas = 20

[measure]
young = "power"
young_p = 4.0

[clt]
n = [1, 4, 16]
replicas = 200
rho_exponent = 0.4
precondition_p = 0.0

[audit]
paths = 20
alpha = [0.4]
p = 8.0
n = [1, 4]
replicas = 200
rosenthal_n = [16]
rosenthal_p = [4.0]
rosenthal_replicas = 20000
"#;

const AC14_SHEET: &str = r#"
version = 1
seed = 4

[grid]
shape = [9, 9]

[model]
kind = "gaussian"
covariance = "sheet"

[audit]
n = [1, 4]
replicas = 200
p_grid = [4.0, 8.0]
psi = { kind = "sqrt", a = 3.0 }
"#;

const AC14_SERIES: &str = r#"
version = 1
seed = 5

[grid]
shape = [64]

[model]
kind = "series"
decay = 1.5
terms = 32
innovation = "uniform"

[clt]
n = [1, 4, 16]
replicas = 200
rho_exponent = 0.4
precondition_p = 0.0
"#;

fn ac14() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let root = dir.path();
    let cfg = root.join("brownian.toml");
    let sheet = root.join("sheet.toml");
    let series = root.join("series.toml");
    std::fs::write(&cfg, AC14_CONFIG).map_err(err)?;
    std::fs::write(&sheet, AC14_SHEET).map_err(err)?;
    std::fs::write(&series, AC14_SERIES).map_err(err)?;
    let field = root.join("field.txt");
    let (cfg, sheet, series) = (cfg.to_str().unwrap(), sheet.to_str().unwrap(), series.to_str().unwrap());

    // a field file for `norms`
    run_cli(&["simulate", "--config", cfg], &root.join("seed-field")).map(|_| ())?;
    std::fs::copy(root.join("seed-field/field.txt"), &field).map_err(err)?;
    let field = field.to_str().unwrap();

    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("simulate", vec!["simulate", "--config", cfg]),
        ("norms", vec!["norms", "--field", field, "--config", cfg]),
        ("measure", vec!["measure", "--config", cfg]),
        ("grr", vec!["audit", "grr", "--config", cfg]),
        ("arnold-imkeller", vec!["audit", "arnold-imkeller", "--config", cfg]),
        ("rosenthal", vec!["audit", "rosenthal", "--config", cfg]),
        ("tightness", vec!["audit", "tightness", "--config", cfg]),
        ("rectangle", vec!["audit", "rectangle", "--config", sheet]),
        ("kramer", vec!["audit", "kramer", "--config", cfg]),
        ("clt", vec!["clt", "--config", cfg]),
        ("clt-series", vec!["clt", "--config", series]),
    ];
    let mut files = 0;
    for (name, args) in &runs {
        let mut codes = Vec::new();
        for (tag, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
            let mut a = args.clone();
            a.extend(["--seed", "42", "--threads", threads]);
            codes.push(run_cli(&a, &root.join(format!("{name}-{tag}")))?);
        }
        ensure(codes.iter().all(|&c| c == codes[0]), format!("{name}: exit codes {codes:?}"))?;
        files += same_dirs(&root.join(format!("{name}-a")), &root.join(format!("{name}-b")))?;
        same_dirs(&root.join(format!("{name}-a")), &root.join(format!("{name}-c")))?;
    }
    // the manifest alone reproduces a run
    let manifest = root.join("clt-a/manifest.json");
    run_cli(&["clt", "--config", manifest.to_str().unwrap()], &root.join("clt-replay"))?;
    same_dirs(&root.join("clt-a"), &root.join("clt-replay"))?;
    Ok(format!("{} runs x 3, {files} files byte-identical across repeats and threads 1/4", runs.len()))
}

// ---------------------------------------------------------------------------

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { id: "AC01", title: "Orlicz norm exactness", budget: Duration::from_secs(1), run: ac01 },
        Criterion { id: "AC02", title: "degenerate psi gives the L_r norm", budget: Duration::from_secs(1), run: ac02 },
        Criterion { id: "AC03", title: "fundamental function closed form", budget: Duration::from_secs(1), run: ac03 },
        Criterion { id: "AC04", title: "Fenchel-Moreau involution", budget: Duration::from_secs(5), run: ac04 },
        Criterion { id: "AC05", title: "ball exponent recovery", budget: Duration::from_secs(10), run: ac05 },
        Criterion {
            id: "AC06",
            title: "w/tau exactness and triangle inequality",
            budget: Duration::from_secs(30),
            run: ac06,
        },
        Criterion { id: "AC07", title: "Arnold-Imkeller audit", budget: Duration::from_secs(60), run: ac07 },
        Criterion { id: "AC08", title: "Garsia-Rodemich-Rumsey audit", budget: Duration::from_secs(120), run: ac08 },
        Criterion { id: "AC09", title: "Rosenthal audit", budget: Duration::from_secs(60), run: ac09 },
        Criterion { id: "AC10", title: "rectangle algebra", budget: Duration::from_secs(1), run: ac10 },
        Criterion { id: "AC11", title: "fractional Sobolev closed form", budget: Duration::from_secs(10), run: ac11 },
        Criterion { id: "AC12", title: "tightness audit", budget: Duration::from_secs(300), run: ac12 },
        Criterion { id: "AC13", title: "empirical CLT diagnostic", budget: Duration::from_secs(600), run: ac13 },
        Criterion { id: "AC14", title: "CLI determinism", budget: Duration::from_secs(120), run: ac14 },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.id.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {} {} ({:.2} s / {} s): {}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.title,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
