//! Derivative-free 1-D search and a small quasi-Newton optimizer.

/// Golden-section search for the minimum of `f` on `[a, b]`.
///
/// Returns `(x_min, f_min, evaluations)`. Stops when the bracket is shorter
/// than `tol` (absolute) or after `max_evals` evaluations.
pub(crate) fn golden_section_minimize(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_evals: usize,
) -> (f64, f64, usize) {
    const PHI: f64 = 1.618_033_988_749_895;
    const RESP: f64 = 2.0 - PHI;

    let mut x1 = a + RESP * (b - a);
    let mut x2 = b - RESP * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2usize;

    while evals < max_evals && (b - a).abs() > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + RESP * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - RESP * (b - a);
            f2 = f(x2);
        }
        evals += 1;
    }

    if f1 < f2 {
        (x1, f1, evals)
    } else {
        (x2, f2, evals)
    }
}

/// Coarse scan over `grid` points followed by golden-section refinement in
/// the bracketing cell. Keeps the 1-D profile search robust when the
/// objective develops shallow secondary dips.
pub(crate) fn scan_then_golden(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    grid: usize,
    tol: f64,
) -> (f64, f64, usize) {
    debug_assert!(grid >= 3 && hi > lo);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best_i = 0usize;
    let mut best_f = f64::INFINITY;
    for i in 0..grid {
        let v = f(lo + step * i as f64);
        if v < best_f {
            best_f = v;
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    let (x, fx, evals) = golden_section_minimize(&mut f, a, b, tol, 200);
    if fx <= best_f {
        (x, fx, grid + evals)
    } else {
        (lo + step * best_i as f64, best_f, grid + evals)
    }
}

pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// BFGS maximization with Armijo backtracking and box lower bounds.
///
/// `f` returns (value, gradient). Components are clamped at `lower`; the
/// inverse-Hessian update is skipped when curvature is lost.
pub(crate) fn bfgs_maximize(
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: &[f64],
    lower: &[f64],
    grad_tol: f64,
    max_iter: usize,
) -> BfgsOutcome {
    let d = x0.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..d {
            if x[i] < lower[i] {
                x[i] = lower[i];
            }
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut fx, mut gx) = f(&x);
    // inverse Hessian approximation (row-major d x d)
    let mut h: Vec<f64> = (0..d * d).map(|i| if i % (d + 1) == 0 { 1.0 } else { 0.0 }).collect();
    let mut iterations = 0usize;

    for _ in 0..max_iter {
        iterations += 1;
        let gnorm = gx.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gnorm < grad_tol {
            return BfgsOutcome {
                x,
                value: fx,
                gradient_norm: gnorm,
                iterations,
                converged: true,
            };
        }
        // ascent direction p = H g
        let mut p = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                p[i] += h[i * d + j] * gx[j];
            }
        }
        let slope: f64 = p.iter().zip(&gx).map(|(a, b)| a * b).sum();
        if slope <= 0.0 {
            // reset to steepest ascent
            p.copy_from_slice(&gx);
            for i in 0..d * d {
                h[i] = if i % (d + 1) == 0 { 1.0 } else { 0.0 };
            }
        }
        let slope: f64 = p.iter().zip(&gx).map(|(a, b)| a * b).sum();

        let mut step = 1.0f64;
        let mut accepted = false;
        let (mut x_new, mut f_new, mut g_new) = (x.clone(), fx, gx.clone());
        for _ in 0..40 {
            let mut cand: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + step * pi).collect();
            clamp(&mut cand);
            let (fc, gc) = f(&cand);
            if fc.is_finite() && fc >= fx + 1e-4 * step * slope {
                x_new = cand;
                f_new = fc;
                g_new = gc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            let gnorm = gx.iter().fold(0.0f64, |a, g| a.max(g.abs()));
            return BfgsOutcome {
                x,
                value: fx,
                gradient_norm: gnorm,
                iterations,
                converged: gnorm < grad_tol,
            };
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        // y = grad change of the NEGATIVE objective in minimization terms;
        // for maximization use y = g_old - g_new so that s'y > 0 near a max.
        let y: Vec<f64> = gx.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            // BFGS update of inverse Hessian: H' = (I - s y^T/sy) H (I - y s^T/sy) + s s^T/sy
            let mut hy = vec![0.0; d];
            for i in 0..d {
                for j in 0..d {
                    hy[i] += h[i * d + j] * y[j];
                }
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += (sy + yhy) * s[i] * s[j] / (sy * sy)
                        - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        x = x_new;
        fx = f_new;
        gx = g_new;
    }

    let gnorm = gx.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    BfgsOutcome {
        x,
        value: fx,
        gradient_norm: gnorm,
        iterations,
        converged: gnorm < grad_tol,
    }
}
