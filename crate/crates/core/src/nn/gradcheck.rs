use rand::seq::index::sample;
use rand::RngCore;

use super::Tensor;

/// A scalar function of a parameter set with an analytic gradient.
pub trait Objective {
    fn params_mut(&mut self) -> &mut [Tensor];
    fn loss(&self) -> f64;
    fn gradient(&self) -> Vec<Tensor>;

    /// Sign pattern of every piecewise-linear unit's input, if the objective
    /// has kinks. Coordinates whose perturbation flips the pattern are not
    /// differentiable at that step size and are skipped.
    fn kink_pattern(&self) -> Option<Vec<bool>> {
        None
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Coordinates skipped because the central difference straddled a kink.
    pub skipped: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Check at most this many coordinates per parameter tensor, chosen with
    /// the supplied rng. `None` checks every coordinate.
    pub max_coords_per_tensor: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { epsilon: 1e-4, max_coords_per_tensor: None }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Largest relative error between the analytic gradient and central
/// differences. Parameters are restored afterwards.
pub fn grad_check(obj: &mut dyn Objective, opts: &GradCheckOptions, rng: &mut dyn RngCore) -> f64 {
    grad_check_report(obj, opts, rng).max_relative_error
}

pub fn grad_check_report(obj: &mut dyn Objective, opts: &GradCheckOptions, rng: &mut dyn RngCore) -> GradCheckReport {
    let analytic = obj.gradient();
    let base = obj.kink_pattern();
    let eps = opts.epsilon;
    let mut report = GradCheckReport::default();
    for (t, grad) in analytic.iter().enumerate() {
        let n = grad.len();
        let coords: Vec<usize> = match opts.max_coords_per_tensor {
            Some(k) if k < n => sample(rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        for i in coords {
            let orig = obj.params_mut()[t].data()[i];
            obj.params_mut()[t].data_mut()[i] = orig + eps;
            let up = obj.loss();
            let crossed_up = base.is_some() && obj.kink_pattern() != base;
            obj.params_mut()[t].data_mut()[i] = orig - eps;
            let down = obj.loss();
            let crossed_down = base.is_some() && obj.kink_pattern() != base;
            obj.params_mut()[t].data_mut()[i] = orig;
            if crossed_up || crossed_down {
                report.skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * eps);
            report.checked += 1;
            report.max_relative_error = report.max_relative_error.max(relative_error(grad.data()[i], numeric));
        }
    }
    report
}
