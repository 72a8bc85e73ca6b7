//! Off-manifold pseudo-samples in embedding space.
//!
//! For an in-distribution embedding `x` with label `y`:
//!
//! 1. start from `x + v`, `v ~ U[-delta, delta]^d`
//! 2. take the sign of the classification-loss gradient at `x`
//! 3. step by `delta * sign(grad)` and project onto the l-inf sphere of
//!    radius `delta` around `x`
//!
//! The projection is the nearest point on the sphere surface: points outside
//! the box are clamped coordinatewise; a point still strictly inside has its
//! largest coordinate moved onto the nearest face. For sequences the sphere is
//! taken jointly over every real (non-pad) position of the example.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{labels_of, EmbeddingOffsets, Input, LabeledExample, Model};
use crate::nn::{Graph, ModelParams, Tensor};
use crate::rng;

/// Radius and seed for off-manifold generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    /// l-inf radius in embedding units.
    pub delta_off: f64,
    pub seed: u64,
    /// Draw the uniform starting offset; disabled only to isolate the sign step.
    pub random_start: bool,
}

impl PerturbationConfig {
    pub fn new(delta_off: f64, seed: u64) -> Self {
        Self {
            delta_off,
            seed,
            random_start: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_off.is_finite() && self.delta_off > 0.0) {
            return Err(Error::Config(format!(
                "delta_off must be positive, got {}",
                self.delta_off
            )));
        }
        Ok(())
    }
}

/// Offset `project(noise + delta * sign(grad))` onto `{o : |o|_inf = delta}`.
pub fn off_manifold_offset(grad: &[f64], noise: &[f64], delta: f64) -> Vec<f64> {
    let mut off: Vec<f64> = grad
        .iter()
        .zip(noise)
        .map(|(g, v)| {
            let s = if *g > 0.0 {
                1.0
            } else if *g < 0.0 {
                -1.0
            } else {
                0.0
            };
            (v + delta * s).clamp(-delta, delta)
        })
        .collect();
    let far = off
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
    if let Some((i, &o)) = far {
        if o != 0.0 && o.abs() < delta {
            off[i] = delta.copysign(o);
        }
    }
    off
}

/// `x' = x + off_manifold_offset(grad, noise, delta)`.
pub fn perturb(x: &[f64], grad: &[f64], noise: &[f64], delta: f64) -> Vec<f64> {
    x.iter()
        .zip(off_manifold_offset(grad, noise, delta))
        .map(|(a, o)| a + o)
        .collect()
}

/// One generated sample, flattened over the example's real positions.
#[derive(Debug, Clone, PartialEq)]
pub struct OffManifoldSample {
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
}

impl OffManifoldSample {
    pub fn linf_distance(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.x_prime)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct OffManifoldBatch {
    pub offsets: EmbeddingOffsets,
    pub samples: Vec<OffManifoldSample>,
    /// Examples whose classification gradient vanished in every coordinate.
    pub zero_gradient: usize,
}

/// Gradient of the summed classification loss with respect to the embedding,
/// one `[rows, embed_dim]` tensor per position, plus the embedding values and mask.
pub fn classification_gradient(
    model: &Model,
    params: &ModelParams,
    batch: &[&LabeledExample],
) -> Result<(Vec<Tensor>, Vec<Tensor>, Vec<f64>)> {
    let inputs: Vec<&Input> = batch.iter().map(|e| &e.input).collect();
    let labels = labels_of(batch)?;
    let mut g = Graph::new();
    let bound = model.bind(&mut g, params);
    let emb = model.embed(&mut g, &bound, &inputs)?;
    let out = model.head(&mut g, &bound, &emb)?;
    let alpha = model.alpha(&mut g, out)?;
    let loss = g.enn_loss(alpha, &labels)?;
    let m = g.mean(loss);
    // Seeding with the batch size turns the mean into a per-example sum.
    g.backward_with_seed(m, batch.len() as f64)?;
    let values = emb.steps.iter().map(|&s| g.value(s).detached()).collect();
    let grads = emb
        .steps
        .iter()
        .map(|&s| {
            let v = g.value(s);
            let gr = g
                .grad(s)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; v.len()]);
            Tensor::matrix(v.rows(), v.cols(), gr)
        })
        .collect();
    Ok((values, grads, emb.mask))
}

/// Generates one off-manifold sample per example of an ID batch.
///
/// `stream` distinguishes calls (e.g. the training iteration); example `i`
/// draws its noise from `rng::stream(seed, [OFF_MANIFOLD, stream, i])`.
pub fn generate_off_manifold(
    model: &Model,
    params: &ModelParams,
    batch: &[&LabeledExample],
    cfg: &PerturbationConfig,
    stream: u64,
) -> Result<OffManifoldBatch> {
    cfg.validate()?;
    let (values, grads, mask) = classification_gradient(model, params, batch)?;
    let rows = batch.len();
    let t_len = values.len();
    let d = values.first().map(Tensor::cols).unwrap_or(0);
    let delta = cfg.delta_off;

    let mut offsets: Vec<Vec<f64>> = vec![vec![0.0; rows * d]; t_len];
    let mut samples = Vec::with_capacity(rows);
    let mut zero_gradient = 0;
    for r in 0..rows {
        let positions: Vec<usize> = (0..t_len).filter(|&t| mask[r * t_len + t] != 0.0).collect();
        let mut x = Vec::with_capacity(positions.len() * d);
        let mut gr = Vec::with_capacity(positions.len() * d);
        for &t in &positions {
            x.extend_from_slice(values[t].row(r));
            gr.extend_from_slice(grads[t].row(r));
        }
        let mut rng = rng::stream(cfg.seed, &[rng::STREAM_OFF_MANIFOLD, stream, r as u64]);
        let noise: Vec<f64> = if cfg.random_start {
            (0..x.len())
                .map(|_| rng.random_range(-delta..=delta))
                .collect()
        } else {
            vec![0.0; x.len()]
        };
        if gr.iter().all(|v| *v == 0.0) {
            zero_gradient += 1;
        }
        let off = off_manifold_offset(&gr, &noise, delta);
        for (p, &t) in positions.iter().enumerate() {
            offsets[t][r * d..(r + 1) * d].copy_from_slice(&off[p * d..(p + 1) * d]);
        }
        let x_prime = x.iter().zip(&off).map(|(a, o)| a + o).collect();
        samples.push(OffManifoldSample { x, x_prime });
    }
    Ok(OffManifoldBatch {
        offsets: EmbeddingOffsets {
            steps: offsets
                .into_iter()
                .map(|v| Tensor::matrix(rows, d, v))
                .collect(),
        },
        samples,
        zero_gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Architecture, Head, ModelSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vanishing_radius_returns_x() {
        let x = [0.3, -1.2, 2.0];
        let g = [1.0, -2.0, 0.5];
        let noise = [0.0; 3];
        for delta in [1e-3, 1e-6, 1e-9] {
            let xp = perturb(&x, &g, &noise, delta);
            for (a, b) in x.iter().zip(&xp) {
                assert!((a - b).abs() <= delta + 1e-15);
            }
        }
    }

    #[test]
    fn one_dimensional_positive_gradient_moves_by_delta() {
        let xp = perturb(&[1.5], &[0.8], &[0.0], 0.25);
        assert_eq!(xp[0] - 1.5, 0.25);
    }

    #[test]
    fn random_eight_dim_cases_hit_the_sphere() {
        let delta = 0.07;
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(-delta..=delta)).collect();
            let off = off_manifold_offset(&g, &v, delta);
            assert!(off.iter().all(|o| o.abs() <= delta));
            let max = off.iter().fold(0.0_f64, |m, o| m.max(o.abs()));
            assert_eq!(max, delta, "seed {seed}");
            let xp = perturb(&x, &g, &v, delta);
            let dist = x
                .iter()
                .zip(&xp)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(dist <= delta + 1e-12);
        }
    }

    fn small_model() -> (Model, ModelParams) {
        Model::init(
            ModelSpec {
                arch: Architecture::Mlp2d {
                    input_dim: 2,
                    embed_dim: 6,
                    hidden_dim: 5,
                },
                num_classes: 2,
                head: Head::Evidential(Activation::Softplus),
            },
            5,
        )
        .unwrap()
    }

    #[test]
    fn sign_step_follows_the_classification_loss() {
        // Independent check: finite differences of the ENN loss with respect
        // to the embedding, evaluated through the head only.
        let (model, params) = small_model();
        let ex = LabeledExample::features(vec![0.7, -0.4], Some(1));
        let mut cfg = PerturbationConfig::new(0.05, 1);
        cfg.random_start = false;
        let out = generate_off_manifold(&model, &params, &[&ex], &cfg, 0).unwrap();
        let x = out.samples[0].x.clone();

        let loss_at = |e: &[f64]| {
            let mut g = Graph::new();
            let bound = model.bind(&mut g, &params);
            let node = g.input(Tensor::matrix(1, e.len(), e.to_vec()));
            let emb = crate::model::Embedded {
                steps: vec![node],
                mask: vec![1.0],
                rows: 1,
            };
            let o = model.head(&mut g, &bound, &emb).unwrap();
            let a = model.alpha(&mut g, o).unwrap();
            let l = g.enn_loss(a, &[1]).unwrap();
            g.value(l).values()[0]
        };
        let h = 1e-6;
        for k in 0..x.len() {
            let mut up = x.clone();
            up[k] += h;
            let mut dn = x.clone();
            dn[k] -= h;
            let fd = (loss_at(&up) - loss_at(&dn)) / (2.0 * h);
            let step = out.samples[0].x_prime[k] - x[k];
            assert!(fd.abs() > 1e-9);
            assert!(
                (step - 0.05 * fd.signum()).abs() < 1e-15,
                "coord {k}: step {step}, fd {fd}"
            );
        }
        assert_eq!(out.zero_gradient, 0);
    }

    #[test]
    fn generation_is_deterministic_and_bounded() {
        let (model, params) = small_model();
        let exs: Vec<LabeledExample> = (0..20)
            .map(|i| LabeledExample::features(vec![i as f64 * 0.3 - 3.0, 1.0], Some(i % 2)))
            .collect();
        let refs: Vec<&LabeledExample> = exs.iter().collect();
        let cfg = PerturbationConfig::new(0.01, 99);
        let a = generate_off_manifold(&model, &params, &refs, &cfg, 3).unwrap();
        let b = generate_off_manifold(&model, &params, &refs, &cfg, 3).unwrap();
        assert_eq!(a.samples, b.samples);
        for s in &a.samples {
            assert!(s.linf_distance() <= 0.01 + 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_radius() {
        let (model, params) = small_model();
        let ex = LabeledExample::features(vec![0.0, 0.0], Some(0));
        let cfg = PerturbationConfig::new(0.0, 0);
        assert!(generate_off_manifold(&model, &params, &[&ex], &cfg, 0).is_err());
    }
}
