use super::{SpectralBasis, SpectralError, SpectralResult};
use crate::scalar::Scalar;

/// Eigenvalues at or below this fraction of the largest one count as zero.
const ZERO_EIGENVALUE_REL: f64 = 1e-6;

/// Per-vertex heat kernel signature, `n x T` row-major.
#[derive(Debug, Clone)]
pub struct HksDescriptor {
    pub n: usize,
    pub time_scales: Vec<f64>,
    pub values: Vec<f64>,
}

impl HksDescriptor {
    pub fn scales(&self) -> usize {
        self.time_scales.len()
    }

    pub fn row(&self, v: usize) -> &[f64] {
        let t = self.scales();
        &self.values[v * t..(v + 1) * t]
    }

    pub fn column(&self, s: usize) -> Vec<f64> {
        (0..self.n).map(|v| self.values[v * self.scales() + s]).collect()
    }
}

/// `h(t, v) = sum_i exp(-lambda_i t) phi_i(v)^2` at the given times.
pub fn heat_kernel_signature_at(basis: &SpectralBasis, times: &[f64]) -> HksDescriptor {
    let n = basis.n();
    let t_count = times.len();
    let mut values = vec![0.0; n * t_count];
    for (i, &lambda) in basis.eigenvalues.iter().enumerate() {
        let lambda = lambda.max(0.0);
        let decay: Vec<f64> = times.iter().map(|&t| (-lambda * t).exp()).collect();
        let phi = basis.eigenvectors.column(i);
        for v in 0..n {
            let p2 = phi[v] * phi[v];
            let row = &mut values[v * t_count..(v + 1) * t_count];
            for (r, d) in row.iter_mut().zip(&decay) {
                *r += d * p2;
            }
        }
    }
    HksDescriptor {
        n,
        time_scales: times.to_vec(),
        values,
    }
}

/// HKS at `scales` log-uniform times on
/// `[4 ln 10 / lambda_max, 4 ln 10 / lambda_min_nonzero]`.
pub fn compute_hks(basis: &SpectralBasis, scales: usize) -> SpectralResult<HksDescriptor> {
    if basis.k() < 2 || scales == 0 {
        return Err(SpectralError::InvalidInput(
            "HKS needs at least two eigenpairs and one time scale".into(),
        ));
    }
    let lambda_max = basis.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let threshold = ZERO_EIGENVALUE_REL * lambda_max;
    let lambda_min = basis
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > threshold && l > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !lambda_min.is_finite() {
        return Err(SpectralError::AllZeroSpectrum);
    }
    let c = 4.0 * std::f64::consts::LN_10;
    let (lo, hi) = ((c / lambda_max).ln(), (c / lambda_min).ln());
    let times: Vec<f64> = (0..scales)
        .map(|i| {
            if scales == 1 {
                lo.exp()
            } else {
                (lo + (hi - lo) * i as f64 / (scales - 1) as f64).exp()
            }
        })
        .collect();
    Ok(heat_kernel_signature_at(basis, &times))
}

/// Shifts and scales each column of a row-major `rows x cols` matrix to zero
/// mean and unit population variance; constant columns become zero.
pub fn standardize_channels<T: Scalar>(data: &mut [T], rows: usize, cols: usize) {
    assert_eq!(data.len(), rows * cols);
    if rows == 0 {
        return;
    }
    let n = T::of_usize(rows);
    for c in 0..cols {
        let mean = (0..rows).map(|r| data[r * cols + c]).sum::<T>() / n;
        let var = (0..rows)
            .map(|r| {
                let d = data[r * cols + c] - mean;
                d * d
            })
            .sum::<T>()
            / n;
        let sd = var.sqrt();
        let degenerate = !(sd > T::epsilon() * (T::one() + mean.abs()));
        for r in 0..rows {
            let x = &mut data[r * cols + c];
            *x = if degenerate { T::zero() } else { (*x - mean) / sd };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use crate::spectral::{mesh_spectrum, EigenOptions};
    use nalgebra::DMatrix;

    #[test]
    fn constant_mode_dominates_at_large_t() {
        let n = 5;
        let area: f64 = 2.5;
        let mut phi = DMatrix::zeros(n, 2);
        for v in 0..n {
            phi[(v, 0)] = 1.0 / area.sqrt();
            phi[(v, 1)] = if v % 2 == 0 { 0.3 } else { -0.2 };
        }
        let basis = SpectralBasis {
            eigenvalues: vec![0.0, 1e-3],
            eigenvectors: phi,
            residual: 0.0,
            iterations: 0,
        };
        let h = heat_kernel_signature_at(&basis, &[1e6]);
        for v in 0..n {
            assert!((h.row(v)[0] - 1.0 / area).abs() < 1e-12);
        }
        let d = compute_hks(&basis, 4).unwrap();
        assert!(d.values.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn all_zero_spectrum_is_an_error() {
        let basis = SpectralBasis {
            eigenvalues: vec![0.0, 0.0],
            eigenvectors: DMatrix::from_element(3, 2, 0.5),
            residual: 0.0,
            iterations: 0,
        };
        assert!(matches!(compute_hks(&basis, 4), Err(SpectralError::AllZeroSpectrum)));
    }

    #[test]
    fn sphere_hks_is_nearly_constant() {
        let m = primitives::icosphere(3);
        let b = mesh_spectrum(&m, 64, &EigenOptions::default()).unwrap();
        let h = compute_hks(&b, 16).unwrap();
        assert!(h.time_scales.windows(2).all(|w| w[0] < w[1]));
        for s in 0..16 {
            let col = h.column(s);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let spread = col.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
            assert!(spread / mean < 0.05, "scale {s}: spread {}", spread / mean);
        }
    }

    #[test]
    fn uniform_scaling_rescales_time_and_amplitude() {
        let m = primitives::icosphere(2);
        let s = 2.5;
        let big = m.map_vertices(|p| [p[0] * s, p[1] * s, p[2] * s]);
        let opts = EigenOptions::default();
        let n = m.vertex_count();
        let b = mesh_spectrum(&m, n, &opts).unwrap();
        let bb = mesh_spectrum(&big, n, &opts).unwrap();
        let times = [0.05, 0.2, 1.0];
        let scaled: Vec<f64> = times.iter().map(|t| t * s * s).collect();
        let h = heat_kernel_signature_at(&b, &times);
        let hb = heat_kernel_signature_at(&bb, &scaled);
        for v in 0..m.vertex_count() {
            for (a, c) in h.row(v).iter().zip(hb.row(v)) {
                assert!((a - s * s * c).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {}", s * s * c);
            }
        }
    }

    #[test]
    fn standardize_examples() {
        let mut d = vec![3.0f64, 3.0, 3.0];
        standardize_channels(&mut d, 3, 1);
        assert_eq!(d, vec![0.0; 3]);
        let mut d = vec![0.0f64, 2.0];
        standardize_channels(&mut d, 2, 1);
        assert_eq!(d, vec![-1.0, 1.0]);
    }

    #[test]
    fn standardized_columns_have_unit_variance() {
        let rows = 37;
        let cols = 4;
        let mut d: Vec<f64> = (0..rows * cols).map(|i| ((i * 7919) % 101) as f64 * 0.1 + (i % cols) as f64).collect();
        standardize_channels(&mut d, rows, cols);
        for c in 0..cols {
            let col: Vec<f64> = (0..rows).map(|r| d[r * cols + c]).collect();
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / rows as f64;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-8);
        }
    }
}
