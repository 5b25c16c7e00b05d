use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Tensor;

/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`
/// so vanishing gradients do not blow up the ratio.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Coordinates left out because a probe crossed a kink.
    pub skipped: usize,
    pub max_rel_error: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Compares `analytic` (the gradient of `f` at `x`) with central differences
/// on up to `coords` randomly chosen coordinates. The step is
/// `1e-5 * max(1, |x_i|)`.
pub fn finite_difference_check(
    x: &Tensor<f64>,
    analytic: &Tensor<f64>,
    coords: usize,
    seed: u64,
    mut f: impl FnMut(&Tensor<f64>) -> f64,
) -> GradCheckReport {
    check(x, analytic, coords, seed, |p| (f(p), Vec::new()))
}

/// Variant for piecewise-smooth graphs: `f` also returns the on/off pattern
/// of its kinks (see [`Tape::relu_pattern`](super::Tape::relu_pattern)).
/// A coordinate whose `+h` or `-h` probe changes the pattern lies within
/// one step of a kink, where central differences do not estimate the
/// derivative; it is skipped and counted in `skipped`.
pub fn finite_difference_check_piecewise(
    x: &Tensor<f64>,
    analytic: &Tensor<f64>,
    coords: usize,
    seed: u64,
    f: impl FnMut(&Tensor<f64>) -> (f64, Vec<bool>),
) -> GradCheckReport {
    check(x, analytic, coords, seed, f)
}

fn check(
    x: &Tensor<f64>,
    analytic: &Tensor<f64>,
    coords: usize,
    seed: u64,
    mut f: impl FnMut(&Tensor<f64>) -> (f64, Vec<bool>),
) -> GradCheckReport {
    assert_eq!(x.shape(), analytic.shape());
    let len = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = if coords >= len {
        (0..len).collect()
    } else {
        sample(&mut rng, len, coords).into_vec()
    };
    picked.sort_unstable();
    let mut report = GradCheckReport {
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    let base_pattern = f(x).1;
    let mut probe = x.clone();
    for i in picked {
        let xi = x.data()[i];
        let h = 1e-5 * xi.abs().max(1.0);
        probe.data_mut()[i] = xi + h;
        let (fp, pp) = f(&probe);
        probe.data_mut()[i] = xi - h;
        let (fm, pm) = f(&probe);
        probe.data_mut()[i] = xi;
        if pp != base_pattern || pm != base_pattern {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic.data()[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        if rel > report.max_rel_error || !rel.is_finite() {
            report.max_rel_error = if rel.is_finite() { rel } else { f64::INFINITY };
            report.worst_index = i;
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
    }
    report
}
