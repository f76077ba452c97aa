//! Latent-space Fréchet distance between two song populations.
//!
//! Features are per-song mean-pooled latents (64-d); the distance is the
//! Fréchet distance between Gaussian fits:
//! `|mu1-mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)`.

use latentcodec::LatentSeq;
use nalgebra::{DMatrix, DVector};

/// Mean latent vector of one song.
pub fn song_feature(latent: &LatentSeq) -> Vec<f64> {
    let mut mean = vec![0f64; latent.dim];
    for frame in 0..latent.t {
        for (d, m) in mean.iter_mut().enumerate() {
            *m += f64::from(latent.get(frame, d));
        }
    }
    mean.iter_mut().for_each(|m| *m /= latent.t.max(1) as f64);
    mean
}

fn fit_gaussian(features: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = features.len();
    let d = features[0].len();
    let mut mean = DVector::zeros(d);
    for f in features {
        mean += DVector::from_column_slice(f);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for f in features {
        let x = DVector::from_column_slice(f) - &mean;
        cov += &x * x.transpose();
    }
    cov /= (n.max(2) - 1) as f64;
    // Small ridge keeps the matrix square-rootable.
    for i in 0..d {
        cov[(i, i)] += 1e-8;
    }
    (mean, cov)
}

/// Symmetric PSD matrix square root via eigendecomposition.
fn sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    vals.iter_mut().for_each(|v| *v = v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussian fits of the two feature sets.
pub fn latent_frechet_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert!(a.len() >= 2 && b.len() >= 2, "need at least 2 songs per side");
    let (mu1, s1) = fit_gaussian(a);
    let (mu2, s2) = fit_gaussian(b);
    let diff = &mu1 - &mu2;
    let s1h = sqrtm(&s1);
    let inner = &s1h * &s2 * &s1h;
    let cross = sqrtm(&inner);
    let tr = s1.trace() + s2.trace() - 2.0 * cross.trace();
    diff.norm_squared() + tr.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_cloud(seed: u64, n: usize, d: usize, mean: f64, std: f64) -> Vec<Vec<f64>> {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 3.46
        };
        (0..n)
            .map(|_| (0..d).map(|_| mean + std * next()).collect())
            .collect()
    }

    #[test]
    fn identical_populations_near_zero() {
        let a = gauss_cloud(1, 200, 8, 0.0, 1.0);
        let d = latent_frechet_distance(&a, &a);
        assert!(d.abs() < 1e-6, "self-distance {d}");
    }

    #[test]
    fn shifted_population_is_farther() {
        let a = gauss_cloud(1, 200, 8, 0.0, 1.0);
        let b = gauss_cloud(2, 200, 8, 0.1, 1.0);
        let c = gauss_cloud(3, 200, 8, 2.0, 1.0);
        let d_near = latent_frechet_distance(&a, &b);
        let d_far = latent_frechet_distance(&a, &c);
        assert!(d_far > d_near * 5.0, "near {d_near} far {d_far}");
    }
}
