//! Analytic gradients of the mean batch loss.

use crate::corpus::{Dimension, LabelVector, NUM_DIMENSIONS};
use crate::encoder::FeatureVector;
use crate::error::Result;
use crate::model::{sigmoid, total_loss, LossScope, Model, ModelParameters};

/// One training example: features and gold labels.
pub type Example<'a> = (&'a FeatureVector, LabelVector);

/// Gradient of `mean over batch of Σ_{t ∈ scope} L_t` w.r.t. every
/// parameter, plus the mean per-task losses (all six, whatever the scope).
pub fn backward(model: &Model, batch: &[Example<'_>], scope: LossScope) -> Result<(ModelParameters, [f64; NUM_DIMENSIONS])> {
    let mut grads = model.params.zeros_like();
    let mut losses = [0.0; NUM_DIMENSIONS];
    for (x, gold) in batch {
        let l = accumulate(model, x, gold, scope, &mut grads)?;
        for (acc, v) in losses.iter_mut().zip(l) {
            *acc += v;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for s in grads.slices_mut() {
        for v in s {
            *v *= scale;
        }
    }
    for v in &mut losses {
        *v *= scale;
    }
    Ok((grads, losses))
}

/// Mean scope loss, the scalar whose gradient [`backward`] returns.
pub fn scope_loss(model: &Model, batch: &[Example<'_>], scope: LossScope) -> Result<f64> {
    let mut total = 0.0;
    for (x, gold) in batch {
        let z = model.forward(x)?;
        total += total_loss(scope, &model.task_losses(&z, gold));
    }
    Ok(total / batch.len() as f64)
}

fn accumulate(
    model: &Model,
    x: &FeatureVector,
    gold: &LabelVector,
    scope: LossScope,
    grads: &mut ModelParameters,
) -> Result<[f64; NUM_DIMENSIONS]> {
    let params = &model.params;
    let cache = model.forward_cached(x)?;
    let losses = model.task_losses(&cache.out, gold);

    // dL/dz'
    let mut gz: Vec<Vec<f64>> = (0..NUM_DIMENSIONS)
        .map(|t| {
            let dim = Dimension::ALL[t];
            if scope.includes(dim) {
                model.losses[t].grad(&cache.out.0[t], gold.class_index(dim))
            } else {
                vec![0.0; cache.out.0[t].len()]
            }
        })
        .collect();

    if !cache.context.is_empty() {
        let include_diag = !model.config.zero_diagonal;
        let embed = params.task_embed_dim();
        let gm: Vec<Vec<f64>> = (0..NUM_DIMENSIONS)
            .map(|t| params.mix_back[t].matvec_t(&gz[t]))
            .collect();
        let mut ge = vec![vec![0.0; embed]; NUM_DIMENSIONS];
        for t in 0..NUM_DIMENSIONS {
            grads.mix_back[t].add_outer(&gz[t], &cache.context[t]);
            for j in 0..NUM_DIMENSIONS {
                if t == j && !include_diag {
                    continue;
                }
                let g = sigmoid(params.dependency.get(t, j));
                let dd = crate::model::dot(&gm[t], &cache.embeds[j]) * g * (1.0 - g);
                let cur = grads.dependency.get(t, j);
                grads.dependency.set(t, j, cur + dd);
                for (a, b) in ge[j].iter_mut().zip(&gm[t]) {
                    *a += g * b;
                }
            }
        }
        for j in 0..NUM_DIMENSIONS {
            grads.task_embed[j].add_outer(&ge[j], &cache.base.0[j]);
            let back = params.task_embed[j].matvec_t(&ge[j]);
            for (a, b) in gz[j].iter_mut().zip(back) {
                *a += b;
            }
        }
    }

    let hidden_dim = params.hidden_dim();
    let mut gh = vec![vec![0.0; hidden_dim]; params.encoders.len()];
    for t in 0..NUM_DIMENSIONS {
        let e = params.encoder_index(t);
        grads.heads[t].weight.add_outer(&gz[t], &cache.hidden[e]);
        for (b, g) in grads.heads[t].bias.iter_mut().zip(&gz[t]) {
            *b += g;
        }
        let back = params.heads[t].weight.matvec_t(&gz[t]);
        for (a, b) in gh[e].iter_mut().zip(back) {
            *a += b;
        }
    }

    for (e, g_hidden) in gh.iter().enumerate() {
        let enc = &mut grads.encoders[e];
        for (r, (&gr, &pre)) in g_hidden.iter().zip(&cache.pre[e]).enumerate() {
            if pre <= 0.0 || gr == 0.0 {
                continue;
            }
            enc.bias[r] += gr;
            let row = enc.weight.row_mut(r);
            for (i, v) in x.iter() {
                row[i] += gr * v;
            }
        }
    }
    Ok(losses)
}
