//! Mixed-regularization training loop.
//!
//! Each iteration draws `m` in-distribution examples and `m` outliers, then
//! applies three optimizer steps against one shared Adam state:
//!
//! 1. descend `mean L(ID) + beta_in * mean Vac(ID)`
//! 2. ascend `beta_oe * mean Vac(OE)`
//! 3. generate off-manifold samples from the ID batch and ascend
//!    `beta_ad * mean Vac(AD)`
//!
//! Steps with a zero weight are skipped. [`UpdateMode::Fused`] instead takes a
//! single step on the combined objective.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use crate::adversarial::{generate_off_manifold, PerturbationConfig};
use crate::error::{Error, Result};
use crate::model::{
    argmax, labels_of, mean_vacuity, off_manifold_vacuity, softmax_objective, total_objective,
    Activation, Architecture, Betas, Head, Input, LabeledExample, Model, ModelSpec,
};
use crate::nn::{Adam, Graph, ModelParams};
use crate::rng;
use crate::subjective_logic as sl;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// Three sequential optimizer steps per iteration.
    Sequential,
    /// One step on the full mixed objective.
    Fused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub model: ModelSpec,
    pub betas: Betas,
    pub delta_off: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub mode: UpdateMode,
}

impl TrainingConfig {
    /// Mixed training on the two-Gaussian task.
    pub fn synthetic_preset(seed: u64) -> Self {
        Self {
            model: ModelSpec {
                arch: Architecture::Mlp2d {
                    input_dim: 2,
                    embed_dim: 16,
                    hidden_dim: 32,
                },
                num_classes: 2,
                head: Head::Evidential(Activation::Softplus),
            },
            betas: Betas {
                beta_in: 0.01,
                beta_oe: 1.0,
                beta_ad: 0.1,
            },
            delta_off: 0.01,
            lr: 5e-3,
            batch_size: 64,
            epochs: 100,
            seed,
            mode: UpdateMode::Sequential,
        }
    }

    /// GRU text classifier over a vocabulary of `vocab_size` tokens.
    pub fn text_preset(vocab_size: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            model: ModelSpec {
                arch: Architecture::Gru {
                    vocab_size,
                    embed_dim: 32,
                    hidden_dim: 32,
                    layers: 1,
                },
                num_classes,
                head: Head::Evidential(Activation::Softplus),
            },
            betas: Betas {
                beta_in: 0.1,
                beta_oe: 1.0,
                beta_ad: 0.1,
            },
            delta_off: 0.01,
            lr: 1e-3,
            batch_size: 32,
            epochs: 20,
            seed,
            mode: UpdateMode::Sequential,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.betas
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.delta_off.is_finite() && self.delta_off > 0.0) {
            return Err(Error::Config(format!(
                "delta_off must be positive, got {}",
                self.delta_off
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch training statistics, averaged over iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub id_loss: f64,
    pub id_vacuity: f64,
    pub oe_vacuity: Option<f64>,
    pub ad_vacuity: Option<f64>,
    pub id_accuracy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Wall time per epoch; kept out of the CSV so reruns are byte-identical.
    pub wall_times: Vec<Duration>,
    /// Off-manifold samples whose classification gradient vanished.
    pub zero_gradient_samples: usize,
}

pub const LOG_HEADER: &str = "epoch,id_loss,id_vacuity,oe_vacuity,ad_vacuity,id_accuracy";

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = format!("{LOG_HEADER}\n");
        for r in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                r.id_loss,
                r.id_vacuity,
                opt(r.oe_vacuity),
                opt(r.ad_vacuity),
                r.id_accuracy
            ));
        }
        s
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// A trained model with its parameters and log.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub params: ModelParams,
    pub log: TrainingLog,
}

#[derive(Default)]
struct Accum {
    loss: f64,
    vac: f64,
    correct: usize,
    seen: usize,
    oe: (f64, usize),
    ad: (f64, usize),
    iters: usize,
}

fn batch_stats(g: &Graph, alpha: crate::nn::NodeId, labels: &[usize]) -> (f64, usize) {
    let a = g.value(alpha);
    let mut vac = 0.0;
    let mut correct = 0;
    for (r, &y) in labels.iter().enumerate() {
        let row = a.row(r);
        vac += row.len() as f64 / row.iter().sum::<f64>();
        if argmax(row) == y {
            correct += 1;
        }
    }
    (vac, correct)
}

/// Trains an evidential model with outlier and off-manifold regularization.
pub fn train(
    id_set: &[LabeledExample],
    oe_set: &[LabeledExample],
    cfg: &TrainingConfig,
) -> Result<Trained> {
    cfg.validate()?;
    if id_set.is_empty() {
        return Err(Error::Empty("in-distribution training set".into()));
    }
    if cfg.betas.beta_oe > 0.0 && oe_set.is_empty() {
        return Err(Error::Config(
            "beta_oe > 0 requires a non-empty outlier set".into(),
        ));
    }
    if !matches!(cfg.model.head, Head::Evidential(_)) {
        return Err(Error::Config("train() needs an evidential head".into()));
    }
    labels_of(&id_set.iter().collect::<Vec<_>>())?;

    let (model, mut params) =
        Model::init(cfg.model.clone(), rng::mix(cfg.seed, &[rng::STREAM_INIT]))?;
    let mut opt = Adam::new(cfg.lr);
    let perturb = PerturbationConfig::new(cfg.delta_off, cfg.seed);
    let m = cfg.batch_size;
    let mut log = TrainingLog::default();
    let mut iteration: u64 = 0;

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..id_set.len()).collect();
        order.shuffle(&mut rng::stream(
            cfg.seed,
            &[rng::STREAM_SHUFFLE, epoch as u64],
        ));
        let mut oe_order: Vec<usize> = (0..oe_set.len()).collect();
        oe_order.shuffle(&mut rng::stream(
            cfg.seed,
            &[rng::STREAM_OUTLIER, epoch as u64],
        ));

        let mut acc = Accum::default();
        for (it, chunk) in order.chunks(m).enumerate() {
            let id_batch: Vec<&LabeledExample> = chunk.iter().map(|&i| &id_set[i]).collect();
            let id_inputs: Vec<&Input> = id_batch.iter().map(|e| &e.input).collect();
            let labels = labels_of(&id_batch)?;
            let oe_batch: Vec<&Input> = if oe_set.is_empty() {
                Vec::new()
            } else {
                (0..m)
                    .map(|j| &oe_set[oe_order[(it * m + j) % oe_set.len()]].input)
                    .collect()
            };

            match cfg.mode {
                UpdateMode::Sequential => {
                    // Step 1: classification + ID vacuity.
                    let mut g = Graph::new();
                    let bound = model.bind(&mut g, &params);
                    let out = model.forward(&mut g, &bound, &id_inputs)?;
                    let alpha = model.alpha(&mut g, out)?;
                    let loss = g.enn_loss(alpha, &labels)?;
                    let mut obj = g.mean(loss);
                    acc.loss += g.scalar(obj) * labels.len() as f64;
                    let (vac, correct) = batch_stats(&g, alpha, &labels);
                    acc.vac += vac;
                    acc.correct += correct;
                    acc.seen += labels.len();
                    if cfg.betas.beta_in != 0.0 {
                        let v = g.vacuity(alpha);
                        let mv = g.mean(v);
                        let t = g.scale(mv, cfg.betas.beta_in);
                        obj = g.add(obj, t)?;
                    }
                    g.backward(obj)?;
                    let grads = g.param_grads(&params)?;
                    opt.step(&mut params, &grads)?;

                    // Step 2: outlier vacuity ascent.
                    if cfg.betas.beta_oe != 0.0 {
                        let mut g = Graph::new();
                        let bound = model.bind(&mut g, &params);
                        let mv = mean_vacuity(&mut g, &model, &bound, &oe_batch)?;
                        acc.oe.0 += g.scalar(mv);
                        acc.oe.1 += 1;
                        let obj = g.scale(mv, -cfg.betas.beta_oe);
                        g.backward(obj)?;
                        let grads = g.param_grads(&params)?;
                        opt.step(&mut params, &grads)?;
                    }

                    // Step 3: off-manifold vacuity ascent.
                    if cfg.betas.beta_ad != 0.0 {
                        let ad =
                            generate_off_manifold(&model, &params, &id_batch, &perturb, iteration)?;
                        log.zero_gradient_samples += ad.zero_gradient;
                        let mut g = Graph::new();
                        let bound = model.bind(&mut g, &params);
                        let mv =
                            off_manifold_vacuity(&mut g, &model, &bound, &id_inputs, &ad.offsets)?;
                        acc.ad.0 += g.scalar(mv);
                        acc.ad.1 += 1;
                        let obj = g.scale(mv, -cfg.betas.beta_ad);
                        g.backward(obj)?;
                        let grads = g.param_grads(&params)?;
                        opt.step(&mut params, &grads)?;
                    }
                }
                UpdateMode::Fused => {
                    let ad = if cfg.betas.beta_ad != 0.0 {
                        let ad =
                            generate_off_manifold(&model, &params, &id_batch, &perturb, iteration)?;
                        log.zero_gradient_samples += ad.zero_gradient;
                        Some(ad)
                    } else {
                        None
                    };
                    let mut g = Graph::new();
                    let bound = model.bind(&mut g, &params);
                    let obj = total_objective(
                        &mut g,
                        &model,
                        &bound,
                        &id_batch,
                        &oe_batch,
                        ad.as_ref().map(|a| (id_inputs.as_slice(), &a.offsets)),
                        cfg.betas,
                    )?;
                    g.backward(obj)?;
                    let grads = g.param_grads(&params)?;
                    opt.step(&mut params, &grads)?;
                    // Fused mode logs post-step statistics.
                    let stats = evaluate_batch(&model, &params, &id_batch)?;
                    acc.loss += stats.0;
                    acc.vac += stats.1;
                    acc.correct += stats.2;
                    acc.seen += id_batch.len();
                    if cfg.betas.beta_oe != 0.0 {
                        let mut g = Graph::new();
                        let bound = model.bind(&mut g, &params);
                        let mv = mean_vacuity(&mut g, &model, &bound, &oe_batch)?;
                        acc.oe.0 += g.scalar(mv);
                        acc.oe.1 += 1;
                    }
                    if let Some(ad) = &ad {
                        let mut g = Graph::new();
                        let bound = model.bind(&mut g, &params);
                        let mv =
                            off_manifold_vacuity(&mut g, &model, &bound, &id_inputs, &ad.offsets)?;
                        acc.ad.0 += g.scalar(mv);
                        acc.ad.1 += 1;
                    }
                }
            }
            acc.iters += 1;
            iteration += 1;
        }

        let n = acc.seen as f64;
        let avg = |(s, c): (f64, usize)| (c > 0).then(|| s / c as f64);
        log.epochs.push(EpochRecord {
            epoch: epoch + 1,
            id_loss: acc.loss / n,
            id_vacuity: acc.vac / n,
            oe_vacuity: avg(acc.oe),
            ad_vacuity: avg(acc.ad),
            id_accuracy: acc.correct as f64 / n,
        });
        log.wall_times.push(start.elapsed());
    }
    Ok(Trained { model, params, log })
}

/// Summed loss, summed vacuity and correct count over a batch.
fn evaluate_batch(
    model: &Model,
    params: &ModelParams,
    batch: &[&LabeledExample],
) -> Result<(f64, f64, usize)> {
    let inputs: Vec<&Input> = batch.iter().map(|e| &e.input).collect();
    let labels = labels_of(batch)?;
    let alphas = model.predict_alphas(params, &inputs)?;
    let mut loss = 0.0;
    let mut vac = 0.0;
    let mut correct = 0;
    for (a, &y) in alphas.iter().zip(&labels) {
        loss += crate::model::enn_loss_value(a.alpha(), y);
        vac += sl::vacuity(a);
        if argmax(&sl::expected_probability(a)) == y {
            correct += 1;
        }
    }
    Ok((loss, vac, correct))
}

/// Aggregate statistics of a model on a labeled set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochEval {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub mean_vacuity: f64,
}

pub fn evaluate_epoch(
    model: &Model,
    params: &ModelParams,
    set: &[LabeledExample],
) -> Result<EpochEval> {
    if set.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let refs: Vec<&LabeledExample> = set.iter().collect();
    let (loss, vac, correct) = evaluate_batch(model, params, &refs)?;
    let n = set.len() as f64;
    Ok(EpochEval {
        accuracy: correct as f64 / n,
        mean_loss: loss / n,
        mean_vacuity: vac / n,
    })
}

/// Trains the softmax (MSP) baseline: same architecture, cross-entropy loss.
pub fn train_softmax_baseline(id_set: &[LabeledExample], cfg: &TrainingConfig) -> Result<Trained> {
    cfg.validate()?;
    if id_set.is_empty() {
        return Err(Error::Empty("in-distribution training set".into()));
    }
    let spec = ModelSpec {
        head: Head::Softmax,
        ..cfg.model.clone()
    };
    let (model, mut params) = Model::init(
        spec,
        rng::mix(cfg.seed, &[rng::STREAM_BASELINE, rng::STREAM_INIT]),
    )?;
    let mut opt = Adam::new(cfg.lr);
    let mut log = TrainingLog::default();
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..id_set.len()).collect();
        order.shuffle(&mut rng::stream(
            cfg.seed,
            &[rng::STREAM_BASELINE, rng::STREAM_SHUFFLE, epoch as u64],
        ));
        let (mut loss, mut correct, mut seen) = (0.0, 0, 0);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&LabeledExample> = chunk.iter().map(|&i| &id_set[i]).collect();
            let mut g = Graph::new();
            let bound = model.bind(&mut g, &params);
            let obj = softmax_objective(&mut g, &model, &bound, &batch)?;
            loss += g.scalar(obj) * batch.len() as f64;
            g.backward(obj)?;
            let grads = g.param_grads(&params)?;
            opt.step(&mut params, &grads)?;
            let labels = labels_of(&batch)?;
            let inputs: Vec<&Input> = batch.iter().map(|e| &e.input).collect();
            for (z, y) in model.outputs(&params, &inputs)?.iter().zip(labels) {
                correct += usize::from(argmax(z) == y);
            }
            seen += batch.len();
        }
        log.epochs.push(EpochRecord {
            epoch: epoch + 1,
            id_loss: loss / seen as f64,
            id_vacuity: f64::NAN,
            oe_vacuity: None,
            ad_vacuity: None,
            id_accuracy: correct as f64 / seen as f64,
        });
        log.wall_times.push(start.elapsed());
    }
    Ok(Trained { model, params, log })
}

/// Classification accuracy of a softmax model.
pub fn softmax_accuracy(
    model: &Model,
    params: &ModelParams,
    set: &[LabeledExample],
) -> Result<f64> {
    let inputs: Vec<&Input> = set.iter().map(|e| &e.input).collect();
    let labels = labels_of(&set.iter().collect::<Vec<_>>())?;
    let outs = model.outputs(params, &inputs)?;
    let correct = outs
        .iter()
        .zip(&labels)
        .filter(|(z, y)| argmax(z) == **y)
        .count();
    Ok(correct as f64 / set.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Architecture};

    fn spec() -> ModelSpec {
        ModelSpec {
            arch: Architecture::Mlp2d {
                input_dim: 2,
                embed_dim: 8,
                hidden_dim: 8,
            },
            num_classes: 2,
            head: Head::Evidential(Activation::Softplus),
        }
    }

    fn cfg(betas: Betas, epochs: usize) -> TrainingConfig {
        TrainingConfig {
            model: spec(),
            betas,
            delta_off: 0.01,
            lr: 0.01,
            batch_size: 16,
            epochs,
            seed: 4,
            mode: UpdateMode::Sequential,
        }
    }

    fn toy() -> Vec<LabeledExample> {
        (0..40)
            .map(|i| {
                let y = i % 2;
                let s = if y == 0 { -1.0 } else { 1.0 };
                LabeledExample::features(
                    vec![s * (1.0 + (i as f64) * 0.02), (i as f64 * 0.37).sin()],
                    Some(y),
                )
            })
            .collect()
    }

    #[test]
    fn rejects_empty_and_invalid_inputs() {
        let c = cfg(Betas::ZERO, 1);
        assert!(matches!(train(&[], &[], &c), Err(Error::Empty(_))));
        let oe = Betas {
            beta_oe: 1.0,
            ..Betas::ZERO
        };
        assert!(matches!(
            train(&toy(), &[], &cfg(oe, 1)),
            Err(Error::Config(_))
        ));
        let mut bad = cfg(Betas::ZERO, 1);
        bad.batch_size = 0;
        assert!(train(&toy(), &[], &bad).is_err());
        let mut unlabeled = toy();
        unlabeled[3].label = None;
        assert!(train(&unlabeled, &[], &cfg(Betas::ZERO, 1)).is_err());
    }

    #[test]
    fn one_record_per_epoch_and_deterministic() {
        let betas = Betas {
            beta_in: 0.1,
            beta_oe: 1.0,
            beta_ad: 0.1,
        };
        let oe: Vec<LabeledExample> = (0..10)
            .map(|i| {
                LabeledExample::features(vec![6.0 * (i as f64).cos(), 6.0 * (i as f64).sin()], None)
            })
            .collect();
        let a = train(&toy(), &oe, &cfg(betas, 3)).unwrap();
        let b = train(&toy(), &oe, &cfg(betas, 3)).unwrap();
        assert_eq!(a.log.epochs.len(), 3);
        assert_eq!(a.log.epochs, b.log.epochs);
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.params, b.params);
        assert!(a.log.to_csv().starts_with(LOG_HEADER));
    }

    #[test]
    fn fused_mode_trains() {
        let mut c = cfg(
            Betas {
                beta_in: 0.1,
                beta_oe: 0.0,
                beta_ad: 0.1,
            },
            20,
        );
        c.mode = UpdateMode::Fused;
        let t = train(&toy(), &[], &c).unwrap();
        let e = evaluate_epoch(&t.model, &t.params, &toy()).unwrap();
        assert!(e.accuracy > 0.9, "{e:?}");
    }

    #[test]
    fn memorizes_a_separable_toy_set() {
        let t = train(&toy(), &[], &cfg(Betas::ZERO, 60)).unwrap();
        let e = evaluate_epoch(&t.model, &t.params, &toy()).unwrap();
        assert_eq!(e.accuracy, 1.0);
        let base = train_softmax_baseline(&toy(), &cfg(Betas::ZERO, 60)).unwrap();
        assert_eq!(
            softmax_accuracy(&base.model, &base.params, &toy()).unwrap(),
            1.0
        );
    }

    #[test]
    fn evaluate_epoch_on_empty_set_fails() {
        let (model, params) = Model::init(spec(), 0).unwrap();
        assert!(evaluate_epoch(&model, &params, &[]).is_err());
    }
}
