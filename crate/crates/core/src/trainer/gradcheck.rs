//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backward::{backward, scope_loss, Example};
use crate::error::{Error, Result};
use crate::model::{LossScope, Model, ModelParameters};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Scalars to sample; ignored when `exhaustive` is set.
    pub n_samples: usize,
    /// Minimum number of sampled D/U/V scalars.
    pub min_mixing: usize,
    pub exhaustive: bool,
    pub scope: LossScope,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-5,
            n_samples: 200,
            min_mixing: 10,
            exhaustive: false,
            scope: LossScope::All,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub n_checked: usize,
    pub n_mixing: usize,
    /// Tensor name and flat offset of the worst scalar.
    pub worst: (String, usize),
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

/// Maximum relative error between [`backward`] and central differences.
pub fn gradient_check(model: &Model, sample: &[Example<'_>], epsilon: f64) -> Result<f64> {
    let opts = GradCheckOptions {
        epsilon,
        ..GradCheckOptions::default()
    };
    Ok(gradient_check_with(model, sample, &opts, |m, b, s| Ok(backward(m, b, s)?.0))?.max_relative_error)
}

/// Like [`gradient_check`] with an injectable analytic gradient.
pub fn gradient_check_with<F>(model: &Model, batch: &[Example<'_>], opts: &GradCheckOptions, analytic: F) -> Result<GradCheckReport>
where
    F: Fn(&Model, &[Example<'_>], LossScope) -> Result<ModelParameters>,
{
    if !(1e-7..=1e-3).contains(&opts.epsilon) {
        return Err(Error::invalid("epsilon", format!("{} not in [1e-7, 1e-3]", opts.epsilon)));
    }
    if batch.is_empty() {
        return Err(Error::invalid("sample", "must contain at least one example"));
    }
    let grads = analytic(model, batch, opts.scope)?;

    let layout = model.params.layout();
    let sizes: Vec<usize> = model.params.slices().iter().map(|s| s.len()).collect();
    let mut positions: Vec<(usize, usize)> = Vec::new();
    let mut mixing: Vec<(usize, usize)> = Vec::new();
    for (k, ((_, _, kind), &n)) in layout.iter().zip(&sizes).enumerate() {
        for i in 0..n {
            if kind.is_mixing() {
                mixing.push((k, i));
            } else {
                positions.push((k, i));
            }
        }
    }

    let chosen: Vec<(usize, usize)> = if opts.exhaustive {
        mixing.iter().chain(&positions).copied().collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let n_mix = opts.min_mixing.min(mixing.len());
        let mut out: Vec<(usize, usize)> = sample(&mut rng, mixing.len(), n_mix).into_iter().map(|i| mixing[i]).collect();
        // the remainder is drawn from every scalar not yet chosen
        let rest: Vec<(usize, usize)> = positions
            .iter()
            .chain(mixing.iter())
            .filter(|p| !out.contains(p))
            .copied()
            .collect();
        let n_rest = opts.n_samples.saturating_sub(n_mix).min(rest.len());
        out.extend(sample(&mut rng, rest.len(), n_rest).into_iter().map(|i| rest[i]));
        out
    };

    let grad_slices = grads.slices();
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        n_checked: 0,
        n_mixing: 0,
        worst: (String::new(), 0),
    };
    for &(k, i) in &chosen {
        let orig = model.params.slices()[k][i];
        probe.params.slices_mut()[k][i] = orig + opts.epsilon;
        let up = scope_loss(&probe, batch, opts.scope)?;
        probe.params.slices_mut()[k][i] = orig - opts.epsilon;
        let down = scope_loss(&probe, batch, opts.scope)?;
        probe.params.slices_mut()[k][i] = orig;
        let numeric = (up - down) / (2.0 * opts.epsilon);
        let err = relative_error(grad_slices[k][i], numeric);
        report.n_checked += 1;
        if layout[k].2.is_mixing() {
            report.n_mixing += 1;
        }
        if err > report.max_relative_error || report.worst.0.is_empty() {
            report.max_relative_error = report.max_relative_error.max(err);
            report.worst = (layout[k].0.clone(), i);
        }
    }
    Ok(report)
}
