//! Scalar statistics utilities: normal CDF/quantile, chi-square tail
//! probabilities for goodness-of-fit tests, Gauss-Hermite rules, and a
//! Shapiro-Francia normality test.

use nalgebra::DMatrix;

/// Standard normal density.
pub fn standard_normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
///
/// Taylor series around zero (Marsaglia), switching to the asymptotic
/// expansion in the far tails. Absolute error below 1e-14 over the range
/// used here.
pub fn standard_normal_cdf(x: f64) -> f64 {
    if x < -8.5 {
        return tail_upper(-x);
    }
    if x > 8.5 {
        return 1.0 - tail_upper(x);
    }
    // sum_{k>=0} x^{2k+1} / (1*3*5*...*(2k+1))
    let mut term = x;
    let mut sum = x;
    let mut k = 0u32;
    while term.abs() > 1e-17 * sum.abs().max(1.0) && k < 400 {
        k += 1;
        term *= x * x / (2 * k + 1) as f64;
        sum += term;
    }
    0.5 + sum * standard_normal_pdf(x)
}

// Upper tail P(X > x) for large positive x via the continued-fraction-free
// asymptotic series phi(x)/x * (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...).
fn tail_upper(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -(2.0 * k as f64 - 1.0) / x2;
        sum += term;
    }
    standard_normal_pdf(x) / x * sum
}

/// Standard normal quantile by bisection with a Newton polish.
///
/// Not the fastest route, but exact to ~1e-13 and free of tabulated
/// constants; quantiles are only computed during setup, never in hot loops.
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile requires p in (0,1), got {p}");
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if standard_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let f = standard_normal_cdf(x) - p;
        let d = standard_normal_pdf(x);
        if d > 0.0 {
            x -= f / d;
        }
    }
    x
}

/// Upper-tail probability of a chi-square variable.
///
/// Supports df = 1 (via the normal tail) and even df (finite Poisson sum);
/// these are the only cases the goodness-of-fit machinery needs.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    assert!(x >= 0.0);
    if df == 1 {
        return 2.0 * (1.0 - standard_normal_cdf(x.sqrt()));
    }
    assert!(df % 2 == 0, "chi_square_sf implemented for df=1 or even df");
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..(df / 2) {
        term *= half / k as f64;
        sum += term;
    }
    ((-half).exp() * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square statistic for observed counts against expected
/// probabilities; returns (statistic, p-value) with df = cells - 1.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n as f64 * p;
        if e > 0.0 {
            let d = o as f64 - e;
            stat += d * d / e;
        }
    }
    (stat, chi_square_sf(stat, observed.len() - 1))
}

/// Gauss-Hermite nodes and weights (physicists' convention, weight e^{-x^2})
/// via the Golub-Welsch eigenvalue method. Nodes are returned ascending.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (node, std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Shapiro-Francia normality test (Royston's 1993 normal approximation).
///
/// Returns (W', p). Valid for 5 <= n <= 5000.
pub fn shapiro_francia(sample: &[f64]) -> (f64, f64) {
    let n = sample.len();
    assert!((5..=5000).contains(&n), "shapiro_francia needs 5 <= n <= 5000");
    let mut x: Vec<f64> = sample.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    // Blom scores
    let scores: Vec<f64> = (1..=n)
        .map(|i| standard_normal_quantile((i as f64 - 0.375) / (n as f64 + 0.25)))
        .collect();
    let mx = mean(&x);
    let mm = mean(&scores);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dm = scores[i] - mm;
        sxy += dx * dm;
        sxx += dx * dx;
        syy += dm * dm;
    }
    let w = (sxy * sxy) / (sxx * syy);
    let nu = (n as f64).ln();
    let u = nu.ln();
    let mu = 1.0521 * (u - nu) - 1.2725;
    let sigma = 1.0308 - 0.26758 * (u + 2.0 / nu);
    let z = ((1.0 - w).ln() - mu) / sigma;
    let p = 1.0 - standard_normal_cdf(z);
    (w, p)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// FNV-1a over raw bytes; used for content fingerprints in manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn fnv1a64_f64s(values: impl IntoIterator<Item = f64>) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}
