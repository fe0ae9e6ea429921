use crate::error::{Error, Result};
use crate::kernels::WhitenedDesign;
use crate::model::{KernelMatrix, PhenotypeVector};

/// Spectral reduction of the variance-component likelihood.
///
/// With K = U diag(lambda) U^T and q = U^T y, every likelihood evaluation is
/// O(n):
///
///   l(sigma2, eta2) = -1/2 log sigma2 - (1/2n) sum_i log(eta2 lambda_i + 1)
///                     - (1/(2 n sigma2)) sum_i q_i^2 / (eta2 lambda_i + 1)
///
/// For whitened designs with k < n the Gram matrix route is used: the
/// response mass on the null space is kept in one bucket (`null_q_sq` over
/// `null_count` zero eigenvalues).
#[derive(Debug, Clone)]
pub struct ProfileLikelihoodCache {
    lambda: Vec<f64>,
    q_sq: Vec<f64>,
    null_q_sq: f64,
    null_count: usize,
    n: usize,
}

impl ProfileLikelihoodCache {
    pub fn from_kernel(y: &PhenotypeVector, kernel: &KernelMatrix) -> Result<Self> {
        if y.len() != kernel.n() {
            return Err(Error::DimensionMismatch {
                context: "profile cache: phenotype vs kernel size",
                expected: kernel.n(),
                found: y.len(),
            });
        }
        let eig = kernel.matrix().clone().symmetric_eigen();
        let lambda = clip_spectrum(eig.eigenvalues.as_slice())?;
        let q = eig.eigenvectors.transpose() * y.as_vector();
        let q_sq: Vec<f64> = q.iter().map(|v| v * v).collect();
        Self::build(lambda, q_sq, 0.0, 0, y)
    }

    pub fn from_whitened(y: &PhenotypeVector, design: &WhitenedDesign) -> Result<Self> {
        let n = design.n();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                context: "profile cache: phenotype vs design rows",
                expected: n,
                found: y.len(),
            });
        }
        let k = design.k();
        if k >= n {
            let kern = crate::kernels::grm_of_whitened(design);
            let eig = kern.symmetric_eigen();
            let lambda = clip_spectrum(eig.eigenvalues.as_slice())?;
            let q = eig.eigenvectors.transpose() * y.as_vector();
            let q_sq: Vec<f64> = q.iter().map(|v| v * v).collect();
            return Self::build(lambda, q_sq, 0.0, 0, y);
        }
        // Gram route: eigenvalues of (1/k) W^T W are the nonzero eigenvalues
        // of (1/k) W W^T, and the rotated response follows from the right
        // singular vectors.
        let gram = design.w().transpose() * design.w() / k as f64;
        let eig = gram.symmetric_eigen();
        let lam_raw = clip_spectrum(eig.eigenvalues.as_slice())?;
        let lam_max = lam_raw.iter().cloned().fold(0.0f64, f64::max);
        let wty = design.w().transpose() * y.as_vector();
        let mut lambda = Vec::with_capacity(k);
        let mut q_sq = Vec::with_capacity(k);
        let mut captured = 0.0;
        for (i, &l) in lam_raw.iter().enumerate() {
            if l > 1e-12 * lam_max.max(1.0) {
                let coeff = eig.eigenvectors.column(i).dot(&wty);
                let qi_sq = coeff * coeff / (k as f64 * l);
                lambda.push(l);
                q_sq.push(qi_sq);
                captured += qi_sq;
            }
        }
        let null_q_sq = (y.norm_squared() - captured).max(0.0);
        let null_count = n - lambda.len();
        Self::build(lambda, q_sq, null_q_sq, null_count, y)
    }

    fn build(
        lambda: Vec<f64>,
        q_sq: Vec<f64>,
        null_q_sq: f64,
        null_count: usize,
        y: &PhenotypeVector,
    ) -> Result<Self> {
        let n = lambda.len() + null_count;
        let total: f64 = q_sq.iter().sum::<f64>() + null_q_sq;
        let y_sq = y.norm_squared();
        if (total - y_sq).abs() > 1e-10 * y_sq.max(1.0) {
            return Err(Error::NonFinite(
                "rotated response mass does not match ||y||^2",
            ));
        }
        Ok(ProfileLikelihoodCache {
            lambda,
            q_sq,
            null_q_sq,
            null_count,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Explicit eigenvalues (zeros from the null bucket not included).
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Number of implicit zero eigenvalues.
    pub fn null_count(&self) -> usize {
        self.null_count
    }

    /// (min, max) over all n eigenvalues including the implicit zeros.
    pub fn lambda_range(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &l in &self.lambda {
            min = min.min(l);
            max = max.max(l);
        }
        if self.null_count > 0 {
            min = min.min(0.0);
            max = max.max(0.0);
        }
        (min, max)
    }

    /// The scaled Gaussian log-likelihood l(sigma2, eta2).
    pub fn log_likelihood(&self, sigma2: f64, eta2: f64) -> f64 {
        let n = self.n as f64;
        let mut logdet = 0.0;
        let mut quad = self.null_q_sq;
        for (&l, &q2) in self.lambda.iter().zip(&self.q_sq) {
            let d = eta2 * l + 1.0;
            logdet += d.ln();
            quad += q2 / d;
        }
        -0.5 * sigma2.ln() - logdet / (2.0 * n) - quad / (2.0 * n * sigma2)
    }

    /// Closed-form profile of the noise variance at fixed eta2.
    pub fn profiled_sigma2(&self, eta2: f64) -> f64 {
        let mut quad = self.null_q_sq;
        for (&l, &q2) in self.lambda.iter().zip(&self.q_sq) {
            quad += q2 / (eta2 * l + 1.0);
        }
        quad / self.n as f64
    }

    /// l(profiled sigma2, eta2); the 1-D objective the optimizer maximizes.
    pub fn profiled_objective(&self, eta2: f64) -> f64 {
        let n = self.n as f64;
        let mut logdet = 0.0;
        let mut quad = self.null_q_sq;
        for (&l, &q2) in self.lambda.iter().zip(&self.q_sq) {
            let d = eta2 * l + 1.0;
            logdet += d.ln();
            quad += q2 / d;
        }
        let sigma2 = quad / n;
        -0.5 * sigma2.ln() - logdet / (2.0 * n) - 0.5
    }
}

fn clip_spectrum(raw: &[f64]) -> Result<Vec<f64>> {
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("kernel spectrum"));
    }
    let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-8 * max.max(0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(raw.iter().map(|&l| l.max(0.0)).collect())
}
