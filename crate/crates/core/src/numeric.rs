//! Small numerical kernels shared by the modules: grids, one-dimensional
//! search, interpolation, Gaussian moments and batched standard errors.

/// Number of batches used for standard errors of replica averages.
pub const SE_BATCHES: usize = 16;

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| if i == n - 1 { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() }).collect()
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Result of a supremum over a one-dimensional log grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSup {
    pub value: f64,
    pub argmax: f64,
    /// The maximum sits at the upper end of the grid and the last values increase.
    pub at_upper_edge: bool,
}

/// Supremum of `f` over a log grid on `[lo, hi]`, refined by golden section
/// around the best grid point. Non-finite values of `f` are skipped.
pub fn sup_log_grid<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> GridSup {
    let grid = log_grid(lo, hi, n);
    let vals: Vec<f64> = grid.iter().map(|&p| f(p)).collect();
    let mut best = 0usize;
    let mut found = false;
    for (i, &v) in vals.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if !found || v > vals[best] {
            best = i;
            found = true;
        }
    }
    if !found {
        return GridSup { value: f64::NAN, argmax: lo, at_upper_edge: false };
    }
    let m = grid.len();
    let at_upper_edge = best == m - 1 && m >= 3 && vals[m - 3] < vals[m - 2] && vals[m - 2] < vals[m - 1];
    let mut value = vals[best];
    let mut argmax = grid[best];
    if m >= 2 && value.is_finite() {
        let a = grid[best.saturating_sub(1)];
        let b = grid[(best + 1).min(m - 1)];
        let h = |t: f64| {
            let v = f(t.exp());
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        };
        let (t, v) = golden_max(h, a.ln(), b.ln(), 1e-12);
        if v > value {
            value = v;
            argmax = t.exp();
        }
    }
    GridSup { value, argmax, at_upper_edge }
}

/// Smallest `x` in `[lo, hi]` with `pred(x)` true, for a monotone predicate,
/// found by bisection to relative tolerance `rtol`.
pub fn bisect_threshold<P: Fn(f64) -> bool>(pred: P, mut lo: f64, mut hi: f64, rtol: f64) -> f64 {
    for _ in 0..400 {
        if hi - lo <= rtol * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mid = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Piecewise-linear interpolation on sorted knots, linearly extrapolated with
/// the end slopes.
pub fn interp_extrapolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    debug_assert!(n >= 2 && ys.len() == n);
    let k = match xs.partition_point(|&v| v <= x) {
        0 => 0,
        i if i >= n => n - 2,
        i => i - 1,
    };
    let (x0, x1, y0, y1) = (xs[k], xs[k + 1], ys[k], ys[k + 1]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// `γ_p = (E|Z|^p)^{1/p}` for a standard normal `Z`.
pub fn gaussian_abs_moment(p: f64) -> f64 {
    let ln_m = 0.5 * p * 2f64.ln() + libm::lgamma(0.5 * (p + 1.0)) - libm::lgamma(0.5);
    (ln_m / p).exp()
}

/// Mean and batched standard error of `values`, using `SE_BATCHES` contiguous
/// batches (falls back to the naive formula when there are too few values).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 * SE_BATCHES {
        if n < 2 {
            return (mean, 0.0);
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        return (mean, (var / n as f64).sqrt());
    }
    let b = SE_BATCHES;
    let size = n / b;
    let batch_means: Vec<f64> = (0..b)
        .map(|k| {
            let end = if k == b - 1 { n } else { (k + 1) * size };
            let s = &values[k * size..end];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect();
    let bm = batch_means.iter().sum::<f64>() / b as f64;
    let var = batch_means.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// `|x|^p`, using integer powers when `p` is integral.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p.fract() == 0.0 && p.abs() < 64.0 {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

/// Empirical `L_p` norm of a sample together with a delta-method standard error.
pub fn lp_norm_with_se(values: &[f64], p: f64) -> (f64, f64) {
    let pw: Vec<f64> = values.iter().map(|&v| abs_pow(v, p)).collect();
    let (m, se) = mean_and_se(&pw);
    if m <= 0.0 {
        return (0.0, 0.0);
    }
    let norm = m.powf(1.0 / p);
    (norm, norm * se / (p * m))
}


/// Rule deciding whether a dyadic profile (ordered from coarse to fine
/// scales) tends to zero: over the finest `halvings + 1` levels the profile
/// must strictly decrease and drop by at least `factor` overall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRule {
    pub halvings: usize,
    pub factor: f64,
}

impl Default for DecayRule {
    fn default() -> Self {
        Self { halvings: 3, factor: 2.0 }
    }
}

impl DecayRule {
    pub fn vanishes(&self, profile: &[f64]) -> bool {
        let k = self.halvings;
        if profile.len() < k + 1 {
            return false;
        }
        let tail = &profile[profile.len() - k - 1..];
        if tail[k] == 0.0 && tail[0] == 0.0 {
            return true;
        }
        tail.windows(2).all(|w| w[1] < w[0]) && tail[0] >= self.factor * tail[k]
    }
}

/// SplitMix64 finaliser, used to derive independent keys from a master seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replica `replica` of the stream family `domain` under a
/// master seed. The result depends only on these three numbers, never on how
/// replicas are scheduled across threads.
pub fn replica_rng(master: u64, domain: u64, replica: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix64(master ^ mix64(domain)));
    rng.set_stream(replica);
    rng
}
