//! Cyclic Jacobi eigen-decomposition of small dense symmetric matrices.

use crate::error::{Error, Result};

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the eigenvector of `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

fn off_diagonal_norm(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i][j] * a[i][j];
            }
        }
    }
    s.sqrt()
}

/// Diagonalizes a symmetric matrix by cyclic Jacobi rotations until the
/// off-diagonal Frobenius norm is below `1e-12` times the matrix norm.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> Result<SymmetricEigen> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("matrix must be square and non-empty".into()));
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (matrix[i][j], matrix[j][i]);
            if (a - b).abs() > 1e-12 * (a.abs() + b.abs()).max(1.0) {
                return Err(Error::InvalidParameter("matrix is not symmetric".into()));
            }
        }
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let mut sweeps = 0;
    while off_diagonal_norm(&a) > threshold {
        if sweeps >= 100 {
            return Err(Error::InvalidParameter("Jacobi iteration did not converge".into()));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&k| a[k][k]).collect(),
        vectors: order.iter().map(|&k| v.iter().map(|row| row[k]).collect()).collect(),
        sweeps,
    })
}

/// Sample covariance (n − 1 normalization) of row vectors, with the mean.
pub fn sample_covariance(samples: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} samples, need at least 2")));
    }
    let d = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::Shape {
            expected: d,
            got: bad.len(),
        });
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![vec![0.0; d]; d];
    for s in samples {
        for i in 0..d {
            let di = s[i] - mean[i];
            for j in 0..=i {
                cov[i][j] += di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    Ok((cov, mean))
}

/// Leading two principal directions of a sample.
#[derive(Clone, Debug)]
pub struct PcaOracle {
    pub eigenvalues: [f64; 2],
    pub eigenvectors: [Vec<f64>; 2],
    pub all_eigenvalues: Vec<f64>,
    pub mean: Vec<f64>,
    /// Top two eigenvalues coincide within 1e-9 (relative), so the
    /// leading plane has rotational freedom.
    pub degenerate: bool,
}

/// Top-2 eigenpairs of the mean-centered sample covariance.
pub fn pca_oracle(samples: &[Vec<f64>]) -> Result<PcaOracle> {
    let (cov, mean) = sample_covariance(samples)?;
    if cov.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 dimensions".into()));
    }
    let eig = jacobi_eigen(&cov)?;
    let (l1, l2) = (eig.values[0], eig.values[1]);
    let degenerate = (l1 - l2).abs() <= 1e-9 * l1.abs().max(f64::MIN_POSITIVE);
    Ok(PcaOracle {
        eigenvalues: [l1, l2],
        eigenvectors: [eig.vectors[0].clone(), eig.vectors[1].clone()],
        all_eigenvalues: eig.values,
        mean,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn diagonal_covariance() {
        // Deterministic axis-aligned cloud: ±2, ±1, ±√0.1, ±√0.1 on separate axes.
        let amps = [2.0, 1.0, 0.1f64.sqrt(), 0.1f64.sqrt()];
        let mut samples = Vec::new();
        for (axis, &a) in amps.iter().enumerate() {
            for s in [-1.0, 1.0] {
                let mut v = vec![0.0; 4];
                v[axis] = s * a;
                samples.push(v);
            }
        }
        let o = pca_oracle(&samples).unwrap();
        // each axis contributes 2a²/(n−1) with n = 8
        assert!((o.eigenvalues[0] - 8.0 / 7.0).abs() < 1e-12);
        assert!((o.eigenvectors[0][0].abs() - 1.0).abs() < 1e-12);
        assert!((o.eigenvectors[1][1].abs() - 1.0).abs() < 1e-12);
        assert!(!o.degenerate);
    }

    #[test]
    fn isotropic_plane_is_degenerate() {
        let samples = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        assert!(pca_oracle(&samples).unwrap().degenerate);
    }

    #[test]
    fn random_sample_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let a: f64 = rng.random::<f64>() - 0.5;
                let b: f64 = rng.random::<f64>() - 0.5;
                vec![a * 3.0, a + b, b * 0.5 + rng.random::<f64>() * 0.1, rng.random::<f64>()]
            })
            .collect();
        let (cov, _) = sample_covariance(&samples).unwrap();
        let eig = jacobi_eigen(&cov).unwrap();
        for (lambda, v) in eig.values.iter().zip(&eig.vectors) {
            let cv = matvec(&cov, v);
            let r: f64 = cv.iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            assert!(r < 1e-10, "residual {r}");
        }
        for w in eig.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // orthonormal
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = eig.vectors[i].iter().zip(&eig.vectors[j]).map(|(a, b)| a * b).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_too_few_samples() {
        assert!(pca_oracle(&[vec![1.0, 2.0]]).is_err());
        assert!(pca_oracle(&[vec![1.0], vec![2.0]]).is_err());
    }
}
