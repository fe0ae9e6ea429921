use crate::error::{Error, Result};
use crate::model::{HeritabilityEstimate, KernelMatrix, PhenotypeVector};

/// Haseman-Elston moment regression of the phenotype products y_i y_j on the
/// kernel entries K_ij over all pairs i < j:
///
///   sigma_g2~ = Cov^(y_i y_j, K_ij) / Var^(K_ij),  h2~ = sigma_g2~ / (||y||^2/n),
///
/// where both "moments" are the uncentered pair averages
/// (2/(n(n-1))) sum_{i<j}. The estimate is deliberately not clipped to
/// [0, 1); `range_flag` records excursions instead, so bias studies see the
/// raw moment estimator.
pub fn he_regression(y: &PhenotypeVector, kernel: &KernelMatrix) -> Result<HeritabilityEstimate> {
    let n = y.len();
    if n < 3 {
        return Err(Error::invalid("Haseman-Elston regression needs n >= 3"));
    }
    if n != kernel.n() {
        return Err(Error::DimensionMismatch {
            context: "he_regression: phenotype vs kernel size",
            expected: kernel.n(),
            found: n,
        });
    }
    let k = kernel.matrix();
    let yv = y.as_vector();
    let mut sum_k_sq = 0.0;
    let mut sum_yk = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let kij = k[(i, j)];
            sum_k_sq += kij * kij;
            sum_yk += yv[i] * yv[j] * kij;
        }
    }
    if sum_k_sq == 0.0 {
        return Err(Error::DegenerateKernel);
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let var_k = sum_k_sq / pairs;
    let cov_yk = sum_yk / pairs;
    let sigma_g2 = cov_yk / var_k;
    let pheno_var = y.norm_squared() / n as f64;
    let h2 = sigma_g2 / pheno_var;
    Ok(HeritabilityEstimate::from_unclipped_h2(
        h2,
        pheno_var - sigma_g2,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::center;
    use nalgebra::DMatrix;

    #[test]
    fn exact_linear_relation_recovers_slope() {
        // construct K with K_ij = y_i y_j / c off the diagonal and ||y||^2/n = 1
        let raw = vec![1.2, -0.4, 0.9, -1.7, 0.35];
        let y = center(&raw).unwrap();
        let n = y.len();
        let scale = (y.norm_squared() / n as f64).sqrt();
        let ynorm: Vec<f64> = y.as_vector().iter().map(|v| v / scale).collect();
        let y = center(&ynorm).unwrap();
        let c = 0.37;
        let mut k = DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    k[(i, j)] = y.as_vector()[i] * y.as_vector()[j] / c;
                }
            }
        }
        let kernel = KernelMatrix::custom(k, 1).unwrap();
        let est = he_regression(&y, &kernel).unwrap();
        assert!((est.h2_hat - c).abs() < 1e-10, "h2 = {}", est.h2_hat);
    }

    #[test]
    fn zero_offdiagonal_is_an_error() {
        let y = center(&[1.0, -0.5, 0.25]).unwrap();
        let kernel = KernelMatrix::custom(DMatrix::identity(3, 3), 1).unwrap();
        assert!(matches!(
            he_regression(&y, &kernel),
            Err(Error::DegenerateKernel)
        ));
    }

    #[test]
    fn matches_explicit_pairwise_regression() {
        use crate::kernels::euclidean_grm;
        use crate::model::LDMatrix;
        use crate::sim::{simulate_gaussian_genotypes, RngStream};
        use rand::Rng;
        let mut rng = RngStream::new(60, 0).rng();
        let sigma = LDMatrix::identity(12);
        let z = simulate_gaussian_genotypes(15, &sigma, &mut rng);
        let kernel = euclidean_grm(&z);
        let y = center(
            &(0..15)
                .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let est = he_regression(&y, &kernel).unwrap();
        // least squares through the origin of {y_i y_j} on {K_ij}
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..15 {
            for j in (i + 1)..15 {
                let x = kernel.matrix()[(i, j)];
                let t = y.as_vector()[i] * y.as_vector()[j];
                num += x * t;
                den += x * x;
            }
        }
        let slope = num / den;
        let oracle = slope / (y.norm_squared() / 15.0);
        assert!((est.h2_hat - oracle).abs() < 1e-10);
    }
}
