//! One module per subcommand.

pub mod fringes;
pub mod graph;
pub mod inequalities;
pub mod metrology;
pub mod spectrum;
pub mod tomography;

/// Sample mean and standard deviation; callers guarantee at least 2 values.
pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
