//! Evidential classifier, its loss terms, and the softmax (MSP) baseline.
//!
//! The network is split into an embedding stage and a head so that
//! off-manifold perturbations can be injected between the two:
//!
//! * `mlp2d`: `x -> x W_e + b_e` (embedding) `-> tanh -> tanh -> linear`
//! * `gru`:   token lookup (embedding) `-> GRU x layers -> masked mean -> linear`
//!
//! The evidential head maps the final linear output through a nonnegative
//! activation and adds one, giving Dirichlet concentrations `alpha >= 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::softmax;
use crate::nn::{Graph, GruLayer, ModelParams, NodeId, ParamId, Tensor};
use crate::subjective_logic::{self as sl, DirichletParams};

/// Model input: a raw feature vector or a token-id sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Input {
    Features(Vec<f64>),
    Tokens(Vec<usize>),
}

/// An input with an optional class label (absent for outlier sets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub input: Input,
    pub label: Option<usize>,
}

impl LabeledExample {
    pub fn labeled(input: Input, label: usize) -> Self {
        Self {
            input,
            label: Some(label),
        }
    }

    pub fn unlabeled(input: Input) -> Self {
        Self { input, label: None }
    }

    pub fn features(x: Vec<f64>, label: Option<usize>) -> Self {
        Self {
            input: Input::Features(x),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Softplus,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Softplus => "softplus",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "softplus" => Ok(Activation::Softplus),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// What the final linear layer feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// `alpha = activation(z) + 1`.
    Evidential(Activation),
    /// Raw logits for a softmax classifier.
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    Mlp2d {
        input_dim: usize,
        embed_dim: usize,
        hidden_dim: usize,
    },
    Gru {
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
        layers: usize,
    },
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Mlp2d { .. } => "mlp2d",
            Architecture::Gru { .. } => "gru",
        }
    }

    pub fn embed_dim(&self) -> usize {
        match self {
            Architecture::Mlp2d { embed_dim, .. } | Architecture::Gru { embed_dim, .. } => {
                *embed_dim
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub num_classes: usize,
    pub head: Head,
}

#[derive(Debug, Clone)]
enum Layout {
    Mlp {
        embed_w: ParamId,
        embed_b: ParamId,
        hidden: Vec<(ParamId, ParamId)>,
    },
    Gru {
        table: ParamId,
        layers: Vec<GruLayer>,
    },
}

/// Architecture plus the parameter handles it reads.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    layout: Layout,
    out_w: ParamId,
    out_b: ParamId,
}

/// Embedded batch: one `[rows, embed_dim]` node per position plus a
/// `[rows, positions]` mask of real (non-pad) positions.
#[derive(Debug, Clone)]
pub struct Embedded {
    pub steps: Vec<NodeId>,
    pub mask: Vec<f64>,
    pub rows: usize,
}

/// Graph-wide parameter binding, indexed by [`ParamId::index`].
#[derive(Debug, Clone)]
pub struct Bound(Vec<NodeId>);

impl Bound {
    pub fn node(&self, id: ParamId) -> NodeId {
        self.0[id.index()]
    }
}

const MLP_HIDDEN_LAYERS: usize = 2;

impl Model {
    /// Fresh parameters, seeded uniform initialization.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<(Self, ModelParams)> {
        if spec.num_classes < 2 {
            return Err(Error::Config("model needs at least 2 classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::new(seed);
        let k = spec.num_classes;
        let (layout, feat_dim) = match spec.arch {
            Architecture::Mlp2d {
                input_dim,
                embed_dim,
                hidden_dim,
            } => {
                let embed_w = params.register_uniform(
                    "embed.w",
                    vec![input_dim, embed_dim],
                    input_dim,
                    &mut rng,
                )?;
                let embed_b =
                    params.register_uniform("embed.b", vec![embed_dim], input_dim, &mut rng)?;
                let mut hidden = Vec::new();
                let mut d_in = embed_dim;
                for l in 0..MLP_HIDDEN_LAYERS {
                    let w = params.register_uniform(
                        format!("hidden{l}.w"),
                        vec![d_in, hidden_dim],
                        d_in,
                        &mut rng,
                    )?;
                    let b = params.register_uniform(
                        format!("hidden{l}.b"),
                        vec![hidden_dim],
                        d_in,
                        &mut rng,
                    )?;
                    hidden.push((w, b));
                    d_in = hidden_dim;
                }
                (
                    Layout::Mlp {
                        embed_w,
                        embed_b,
                        hidden,
                    },
                    hidden_dim,
                )
            }
            Architecture::Gru {
                vocab_size,
                embed_dim,
                hidden_dim,
                layers,
            } => {
                if layers == 0 {
                    return Err(Error::Config("GRU needs at least one layer".into()));
                }
                let table = params.register_uniform(
                    "embed.table",
                    vec![vocab_size, embed_dim],
                    1,
                    &mut rng,
                )?;
                let mut gru = Vec::new();
                let mut d_in = embed_dim;
                for l in 0..layers {
                    gru.push(GruLayer::register(
                        &mut params,
                        &format!("gru{l}"),
                        d_in,
                        hidden_dim,
                        &mut rng,
                    )?);
                    d_in = hidden_dim;
                }
                (Layout::Gru { table, layers: gru }, hidden_dim)
            }
        };
        let out_w = params.register_uniform("out.w", vec![feat_dim, k], feat_dim, &mut rng)?;
        let out_b = params.register_uniform("out.b", vec![k], feat_dim, &mut rng)?;
        Ok((
            Self {
                spec,
                layout,
                out_w,
                out_b,
            },
            params,
        ))
    }

    /// Reattaches an architecture to parameters loaded from a checkpoint.
    pub fn from_params(spec: ModelSpec, params: &ModelParams) -> Result<Self> {
        let get = |name: &str| {
            params
                .id(name)
                .ok_or_else(|| Error::Config(format!("checkpoint is missing parameter `{name}`")))
        };
        let layout = match spec.arch {
            Architecture::Mlp2d { .. } => Layout::Mlp {
                embed_w: get("embed.w")?,
                embed_b: get("embed.b")?,
                hidden: (0..MLP_HIDDEN_LAYERS)
                    .map(|l| Ok((get(&format!("hidden{l}.w"))?, get(&format!("hidden{l}.b"))?)))
                    .collect::<Result<_>>()?,
            },
            Architecture::Gru { layers, .. } => Layout::Gru {
                table: get("embed.table")?,
                layers: (0..layers)
                    .map(|l| GruLayer::find(params, &format!("gru{l}")))
                    .collect::<Result<_>>()?,
            },
        };
        let model = Self {
            spec,
            layout,
            out_w: get("out.w")?,
            out_b: get("out.b")?,
        };
        // Shape sanity against a freshly initialized twin.
        let (_, fresh) = Model::init(model.spec.clone(), 0)?;
        if fresh.len() != params.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameters, architecture expects {}",
                params.len(),
                fresh.len()
            )));
        }
        for (name, t) in fresh.iter() {
            let got = params.by_name(name).map(Tensor::shape);
            if got != Some(t.shape()) {
                return Err(Error::shape(
                    name,
                    format!("expected {:?}, found {got:?}", t.shape()),
                ));
            }
        }
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn bind(&self, g: &mut Graph, params: &ModelParams) -> Bound {
        Bound(params.ids().map(|id| g.param(params, id)).collect())
    }

    /// Embedding stage for a batch of inputs.
    pub fn embed(&self, g: &mut Graph, bound: &Bound, inputs: &[&Input]) -> Result<Embedded> {
        let rows = inputs.len();
        if rows == 0 {
            return Err(Error::Empty("batch has no inputs".into()));
        }
        match &self.layout {
            Layout::Mlp {
                embed_w, embed_b, ..
            } => {
                let Architecture::Mlp2d { input_dim, .. } = self.spec.arch else {
                    unreachable!()
                };
                let mut x = Vec::with_capacity(rows * input_dim);
                for inp in inputs {
                    match inp {
                        Input::Features(f) if f.len() == input_dim => x.extend_from_slice(f),
                        Input::Features(f) => {
                            return Err(Error::shape(
                                "embed",
                                format!(
                                    "feature vector of length {} for input_dim {input_dim}",
                                    f.len()
                                ),
                            ))
                        }
                        Input::Tokens(_) => {
                            return Err(Error::shape(
                                "embed",
                                "token input given to a feature model",
                            ))
                        }
                    }
                }
                let xn = g.input(Tensor::matrix(rows, input_dim, x));
                let e = g.affine(xn, bound.node(*embed_w), bound.node(*embed_b))?;
                Ok(Embedded {
                    steps: vec![e],
                    mask: vec![1.0; rows],
                    rows,
                })
            }
            Layout::Gru { table, .. } => {
                let Architecture::Gru { vocab_size, .. } = self.spec.arch else {
                    unreachable!()
                };
                let mut seqs = Vec::with_capacity(rows);
                for inp in inputs {
                    match inp {
                        Input::Tokens(t) => {
                            if let Some(bad) = t.iter().find(|&&id| id >= vocab_size) {
                                return Err(Error::domain(format!(
                                    "token id {bad} out of vocabulary range (size {vocab_size})"
                                )));
                            }
                            seqs.push(t.as_slice());
                        }
                        Input::Features(_) => {
                            return Err(Error::shape(
                                "embed",
                                "feature input given to a token model",
                            ))
                        }
                    }
                }
                let t_len = seqs.iter().map(|s| s.len()).max().unwrap_or(0).max(1);
                let mut mask = vec![0.0; rows * t_len];
                let mut steps = Vec::with_capacity(t_len);
                for t in 0..t_len {
                    let ids: Vec<usize> = seqs
                        .iter()
                        .enumerate()
                        .map(|(r, s)| {
                            if t < s.len() {
                                mask[r * t_len + t] = 1.0;
                                s[t]
                            } else {
                                crate::data::PAD_ID
                            }
                        })
                        .collect();
                    steps.push(g.gather(bound.node(*table), &ids)?);
                }
                // An empty sequence still pools its single pad position.
                for r in 0..rows {
                    if seqs[r].is_empty() {
                        mask[r * t_len] = 1.0;
                    }
                }
                Ok(Embedded { steps, mask, rows })
            }
        }
    }

    /// Head stage: embedded batch to the final linear output `[rows, K]`.
    pub fn head(&self, g: &mut Graph, bound: &Bound, emb: &Embedded) -> Result<NodeId> {
        let features = match &self.layout {
            Layout::Mlp { hidden, .. } => {
                let mut h = emb.steps[0];
                for (w, b) in hidden {
                    let z = g.affine(h, bound.node(*w), bound.node(*b))?;
                    h = g.tanh(z);
                }
                h
            }
            Layout::Gru { layers, .. } => {
                let mut seq = emb.steps.clone();
                for layer in layers {
                    let nodes = layer.nodes_from(&bound.0);
                    let mut h = g.input(Tensor::zeros(vec![emb.rows, layer.hidden_dim]));
                    let mut outs = Vec::with_capacity(seq.len());
                    for &x in &seq {
                        h = nodes.step(g, x, h)?;
                        outs.push(h);
                    }
                    seq = outs;
                }
                g.masked_mean(&seq, &emb.mask)?
            }
        };
        g.affine(features, bound.node(self.out_w), bound.node(self.out_b))
    }

    /// Dirichlet concentrations from the head output; errors for a softmax model.
    pub fn alpha(&self, g: &mut Graph, out: NodeId) -> Result<NodeId> {
        match self.spec.head {
            Head::Evidential(Activation::Softplus) => {
                let e = g.softplus(out);
                Ok(g.add_scalar(e, 1.0))
            }
            Head::Evidential(Activation::Relu) => {
                let e = g.relu(out);
                Ok(g.add_scalar(e, 1.0))
            }
            Head::Softmax => Err(Error::Usage("softmax model has no evidential head".into())),
        }
    }

    /// Full forward pass to the head output.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, inputs: &[&Input]) -> Result<NodeId> {
        let emb = self.embed(g, bound, inputs)?;
        self.head(g, bound, &emb)
    }

    /// Head outputs (logits or pre-activation evidence) for many inputs.
    pub fn outputs(&self, params: &ModelParams, inputs: &[&Input]) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(256) {
            let mut g = Graph::new();
            let bound = self.bind(&mut g, params);
            let out = self.forward(&mut g, &bound, chunk)?;
            let v = g.value(out);
            rows.extend((0..v.rows()).map(|r| v.row(r).to_vec()));
        }
        Ok(rows)
    }

    /// `alpha` for many inputs.
    pub fn predict_alphas(
        &self,
        params: &ModelParams,
        inputs: &[&Input],
    ) -> Result<Vec<DirichletParams>> {
        let act = match self.spec.head {
            Head::Evidential(a) => a,
            Head::Softmax => {
                return Err(Error::Usage("softmax model has no evidential head".into()))
            }
        };
        self.outputs(params, inputs)?
            .into_iter()
            .map(|z| {
                let alpha = z
                    .into_iter()
                    .map(|v| match act {
                        Activation::Softplus => crate::nn::graph::softplus(v) + 1.0,
                        Activation::Relu => v.max(0.0) + 1.0,
                    })
                    .collect();
                DirichletParams::new(alpha)
            })
            .collect()
    }
}

/// `alpha = activation(f(x)) + 1` for a single input.
pub fn predict_evidence(
    model: &Model,
    params: &ModelParams,
    input: &Input,
) -> Result<DirichletParams> {
    Ok(model.predict_alphas(params, &[input])?.remove(0))
}

/// Expected squared error `E ||y - p||^2` under `Dir(alpha)` for a class index.
pub fn enn_loss_value(alpha: &[f64], target: usize) -> f64 {
    let s: f64 = alpha.iter().sum();
    alpha
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let y = if j == target { 1.0 } else { 0.0 };
            let mean = a / s;
            let second = a * (a + 1.0) / (s * (s + 1.0));
            y * y - 2.0 * y * mean + second
        })
        .sum()
}

/// Index of the hot entry of a one-hot vector.
pub fn one_hot_index(y: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (j, &v) in y.iter().enumerate() {
        if v == 1.0 {
            if hot.is_some() {
                return Err(Error::domain("target has more than one hot entry"));
            }
            hot = Some(j);
        } else if v != 0.0 {
            return Err(Error::domain(format!(
                "target entry {v} is neither 0 nor 1"
            )));
        }
    }
    hot.ok_or_else(|| Error::domain("target has no hot entry"))
}

pub fn one_hot(k: usize, class: usize) -> Vec<f64> {
    let mut y = vec![0.0; k];
    y[class] = 1.0;
    y
}

/// Evidential classification loss against a one-hot target.
pub fn enn_loss(alpha: &DirichletParams, y: &[f64]) -> Result<f64> {
    if y.len() != alpha.num_classes() {
        return Err(Error::domain(format!(
            "target has {} entries for K = {}",
            y.len(),
            alpha.num_classes()
        )));
    }
    Ok(enn_loss_value(alpha.alpha(), one_hot_index(y)?))
}

/// Regularization weights of the mixed objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Betas {
    pub beta_in: f64,
    pub beta_oe: f64,
    pub beta_ad: f64,
}

impl Betas {
    pub const ZERO: Betas = Betas {
        beta_in: 0.0,
        beta_oe: 0.0,
        beta_ad: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_in", self.beta_in),
            ("beta_oe", self.beta_oe),
            ("beta_ad", self.beta_ad),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// The mixed objective evaluated on already-predicted Dirichlets:
/// `mean L(ID) + b_in mean Vac(ID) - b_oe mean Vac(OE) - b_ad mean Vac(AD)`.
pub fn objective_from_alphas(
    id: &[(DirichletParams, usize)],
    oe: &[DirichletParams],
    ad: &[DirichletParams],
    betas: Betas,
) -> Result<f64> {
    betas.validate()?;
    if id.is_empty() {
        return Err(Error::Empty("in-distribution batch".into()));
    }
    if betas.beta_oe > 0.0 && oe.is_empty() {
        return Err(Error::Empty("outlier batch with beta_oe > 0".into()));
    }
    if betas.beta_ad > 0.0 && ad.is_empty() {
        return Err(Error::Empty("off-manifold batch with beta_ad > 0".into()));
    }
    let cls = mean(id.iter().map(|(a, y)| enn_loss_value(a.alpha(), *y)));
    let vac_id = mean(id.iter().map(|(a, _)| sl::vacuity(a)));
    let vac_oe = mean(oe.iter().map(sl::vacuity));
    let vac_ad = mean(ad.iter().map(sl::vacuity));
    Ok(cls + betas.beta_in * vac_id - betas.beta_oe * vac_oe - betas.beta_ad * vac_ad)
}

/// Constant per-example offsets added to the embedding of an ID batch.
#[derive(Debug, Clone)]
pub struct EmbeddingOffsets {
    /// One `[rows, embed_dim]` tensor per position, matching [`Embedded::steps`].
    pub steps: Vec<Tensor>,
}

/// Graph version of the mixed objective. `ad` pairs the ID inputs from which
/// off-manifold samples are derived with their (constant) offsets; gradients
/// flow through the embedding of those inputs and the head.
pub fn total_objective(
    g: &mut Graph,
    model: &Model,
    bound: &Bound,
    id_batch: &[&LabeledExample],
    oe_batch: &[&Input],
    ad: Option<(&[&Input], &EmbeddingOffsets)>,
    betas: Betas,
) -> Result<NodeId> {
    betas.validate()?;
    if id_batch.is_empty() {
        return Err(Error::Empty("in-distribution batch".into()));
    }
    let inputs: Vec<&Input> = id_batch.iter().map(|e| &e.input).collect();
    let labels = labels_of(id_batch)?;
    let out = model.forward(g, bound, &inputs)?;
    let alpha = model.alpha(g, out)?;
    let loss = g.enn_loss(alpha, &labels)?;
    let mut total = g.mean(loss);
    if betas.beta_in != 0.0 {
        let v = g.vacuity(alpha);
        let m = g.mean(v);
        let t = g.scale(m, betas.beta_in);
        total = g.add(total, t)?;
    }
    if betas.beta_oe != 0.0 {
        if oe_batch.is_empty() {
            return Err(Error::Empty("outlier batch with beta_oe > 0".into()));
        }
        let m = mean_vacuity(g, model, bound, oe_batch)?;
        let t = g.scale(m, betas.beta_oe);
        total = g.sub(total, t)?;
    }
    if betas.beta_ad != 0.0 {
        let (ad_inputs, offsets) =
            ad.ok_or_else(|| Error::Empty("off-manifold batch with beta_ad > 0".into()))?;
        let m = off_manifold_vacuity(g, model, bound, ad_inputs, offsets)?;
        let t = g.scale(m, betas.beta_ad);
        total = g.sub(total, t)?;
    }
    Ok(total)
}

pub(crate) fn labels_of(batch: &[&LabeledExample]) -> Result<Vec<usize>> {
    batch
        .iter()
        .map(|e| {
            e.label
                .ok_or_else(|| Error::domain("in-distribution example without a label"))
        })
        .collect()
}

/// Mean vacuity of a batch, as a scalar node.
pub fn mean_vacuity(
    g: &mut Graph,
    model: &Model,
    bound: &Bound,
    inputs: &[&Input],
) -> Result<NodeId> {
    let out = model.forward(g, bound, inputs)?;
    let alpha = model.alpha(g, out)?;
    let v = g.vacuity(alpha);
    Ok(g.mean(v))
}

/// Mean vacuity at `embedding(inputs) + offsets`.
pub fn off_manifold_vacuity(
    g: &mut Graph,
    model: &Model,
    bound: &Bound,
    inputs: &[&Input],
    offsets: &EmbeddingOffsets,
) -> Result<NodeId> {
    let emb = model.embed(g, bound, inputs)?;
    if emb.steps.len() != offsets.steps.len() {
        return Err(Error::shape(
            "off_manifold",
            format!(
                "{} offset steps for {} positions",
                offsets.steps.len(),
                emb.steps.len()
            ),
        ));
    }
    let mut steps = Vec::with_capacity(emb.steps.len());
    for (&s, off) in emb.steps.iter().zip(&offsets.steps) {
        let o = g.input(off.clone());
        steps.push(g.add(s, o)?);
    }
    let shifted = Embedded { steps, ..emb };
    let out = model.head(g, bound, &shifted)?;
    let alpha = model.alpha(g, out)?;
    let v = g.vacuity(alpha);
    Ok(g.mean(v))
}

/// Mean softmax cross-entropy of a batch (baseline training loss).
pub fn softmax_objective(
    g: &mut Graph,
    model: &Model,
    bound: &Bound,
    batch: &[&LabeledExample],
) -> Result<NodeId> {
    let inputs: Vec<&Input> = batch.iter().map(|e| &e.input).collect();
    let labels = labels_of(batch)?;
    let logits = model.forward(g, bound, &inputs)?;
    let l = g.softmax_xent(logits, &labels)?;
    Ok(g.mean(l))
}

/// Negative maximum softmax probability; higher means more likely OOD.
pub fn msp_score(logits: &[f64]) -> f64 {
    -softmax(logits)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Per-example uncertainty summary of an evidential prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub predicted_class: usize,
    pub expected_probs: Vec<f64>,
    pub vacuity: f64,
    /// Raw dissonance in `[0, 1)`.
    pub dissonance: f64,
    pub dissonance_sqrt: f64,
    /// Entropy of `expected_probs`, normalized by `ln K`.
    pub entropy: f64,
    pub alpha: Vec<f64>,
}

impl UncertaintyReport {
    pub fn from_dirichlet(d: &DirichletParams) -> Self {
        let p = sl::expected_probability(d);
        let predicted_class = argmax(&p);
        let dissonance = sl::dissonance(d);
        Self {
            predicted_class,
            entropy: sl::shannon_entropy(&p, true),
            expected_probs: p,
            vacuity: sl::vacuity(d),
            dissonance,
            dissonance_sqrt: dissonance.sqrt(),
            alpha: d.alpha().to_vec(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn predict_report(
    model: &Model,
    params: &ModelParams,
    input: &Input,
) -> Result<UncertaintyReport> {
    Ok(UncertaintyReport::from_dirichlet(&predict_evidence(
        model, params, input,
    )?))
}

pub fn predict_reports(
    model: &Model,
    params: &ModelParams,
    inputs: &[&Input],
) -> Result<Vec<UncertaintyReport>> {
    Ok(model
        .predict_alphas(params, inputs)?
        .iter()
        .map(UncertaintyReport::from_dirichlet)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(a: &[f64]) -> DirichletParams {
        DirichletParams::new(a.to_vec()).unwrap()
    }

    fn mlp_spec(head: Head) -> ModelSpec {
        ModelSpec {
            arch: Architecture::Mlp2d {
                input_dim: 2,
                embed_dim: 4,
                hidden_dim: 5,
            },
            num_classes: 2,
            head,
        }
    }

    #[test]
    fn enn_loss_hand_values() {
        assert!((enn_loss(&dir(&[1.0, 1.0]), &[1.0, 0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        // 1 - 2/100 + (99*100 + 2)/(100*101)
        let expected = 1.0 - 0.02 + (9900.0 + 2.0) / 10100.0;
        let got = enn_loss(&dir(&[99.0, 1.0]), &[0.0, 1.0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 1.960396).abs() < 1e-6);
        let big = enn_loss(&dir(&[1e9, 1.0]), &[1.0, 0.0]).unwrap();
        assert!(big < 1e-8);
    }

    #[test]
    fn enn_loss_rejects_non_one_hot() {
        assert!(enn_loss(&dir(&[1.0, 1.0]), &[0.5, 0.5]).is_err());
        assert!(enn_loss(&dir(&[1.0, 1.0]), &[1.0, 1.0]).is_err());
        assert!(enn_loss(&dir(&[1.0, 1.0]), &[0.0, 0.0]).is_err());
        assert!(enn_loss(&dir(&[1.0, 1.0]), &[1.0]).is_err());
    }

    #[test]
    fn objective_reductions() {
        let id = vec![(dir(&[1.0, 1.0]), 0)];
        let plain = objective_from_alphas(&id, &[], &[], Betas::ZERO).unwrap();
        assert!((plain - 2.0 / 3.0).abs() < 1e-12);
        let b = Betas {
            beta_in: 0.3,
            ..Betas::ZERO
        };
        let with_in = objective_from_alphas(&id, &[], &[], b).unwrap();
        assert!((with_in - (2.0 / 3.0 + 0.3)).abs() < 1e-12);

        let oe_alpha = dir(&[3.0, 2.0]);
        let b = Betas {
            beta_oe: 1.0,
            ..Betas::ZERO
        };
        let with_oe = objective_from_alphas(&id, std::slice::from_ref(&oe_alpha), &[], b).unwrap();
        assert!((plain - with_oe - sl::vacuity(&oe_alpha)).abs() < 1e-12);
    }

    #[test]
    fn objective_rejects_negative_beta_and_missing_batches() {
        let id = vec![(dir(&[1.0, 1.0]), 0)];
        let neg = Betas {
            beta_in: -0.1,
            ..Betas::ZERO
        };
        assert!(matches!(
            objective_from_alphas(&id, &[], &[], neg),
            Err(Error::Domain(_))
        ));
        let oe = Betas {
            beta_oe: 1.0,
            ..Betas::ZERO
        };
        assert!(objective_from_alphas(&id, &[], &[], oe).is_err());
    }

    #[test]
    fn msp_examples() {
        assert!((msp_score(&[10.0, -10.0]) + 1.0).abs() < 1e-8);
        assert_eq!(msp_score(&[0.0, 0.0]), -0.5);
        assert!((msp_score(&[1.0, 0.0]) + 0.731058).abs() < 1e-6);
    }

    #[test]
    fn zero_network_gives_ln2_plus_one() {
        let (model, mut params) =
            Model::init(mlp_spec(Head::Evidential(Activation::Softplus)), 3).unwrap();
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            params
                .get_mut(id)
                .values_mut()
                .iter_mut()
                .for_each(|v| *v = 0.0);
        }
        let d = predict_evidence(&model, &params, &Input::Features(vec![0.4, -2.0])).unwrap();
        for a in d.alpha() {
            assert!((a - (std::f64::consts::LN_2 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn evidence_is_at_least_one_and_deterministic() {
        for act in [Activation::Softplus, Activation::Relu] {
            let (model, params) = Model::init(mlp_spec(Head::Evidential(act)), 9).unwrap();
            let (_, params2) = Model::init(mlp_spec(Head::Evidential(act)), 9).unwrap();
            assert_eq!(params, params2);
            for x in [[0.0, 0.0], [50.0, -50.0], [-3.0, 1.0]] {
                let a = predict_evidence(&model, &params, &Input::Features(x.to_vec())).unwrap();
                let b = predict_evidence(&model, &params2, &Input::Features(x.to_vec())).unwrap();
                assert!(a.alpha().iter().all(|v| *v >= 1.0));
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn out_of_vocabulary_token_is_an_error() {
        let spec = ModelSpec {
            arch: Architecture::Gru {
                vocab_size: 5,
                embed_dim: 3,
                hidden_dim: 3,
                layers: 2,
            },
            num_classes: 2,
            head: Head::Evidential(Activation::Softplus),
        };
        let (model, params) = Model::init(spec, 1).unwrap();
        assert!(predict_evidence(&model, &params, &Input::Tokens(vec![1, 4])).is_ok());
        assert!(matches!(
            predict_evidence(&model, &params, &Input::Tokens(vec![1, 5])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn report_examples() {
        let r = UncertaintyReport::from_dirichlet(&dir(&[1.0, 1.0]));
        assert_eq!(r.vacuity, 1.0);
        assert_eq!(r.dissonance, 0.0);
        assert!((r.entropy - 1.0).abs() < 1e-15);

        let r = UncertaintyReport::from_dirichlet(&dir(&[50.0, 50.0]));
        assert!((r.vacuity - 0.02).abs() < 1e-12);
        assert!((r.dissonance - 0.98).abs() < 1e-12);

        let r = UncertaintyReport::from_dirichlet(&dir(&[1.0, 99.0]));
        assert_eq!(r.predicted_class, 1);
        assert!((r.expected_probs[0] - 0.01).abs() < 1e-12);
        assert!((r.expected_probs[1] - 0.99).abs() < 1e-12);
    }

    #[test]
    fn report_json_has_fixed_fields() {
        let r = UncertaintyReport::from_dirichlet(&dir(&[2.0, 3.0]));
        let v: serde_json::Value = serde_json::from_str(&r.to_json_line()).unwrap();
        for key in [
            "predicted_class",
            "expected_probs",
            "vacuity",
            "dissonance",
            "dissonance_sqrt",
            "entropy",
            "alpha",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: UncertaintyReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn from_params_checks_shapes() {
        let spec = mlp_spec(Head::Softmax);
        let (_, params) = Model::init(spec.clone(), 0).unwrap();
        assert!(Model::from_params(spec.clone(), &params).is_ok());
        let mut other = spec;
        other.num_classes = 3;
        assert!(Model::from_params(other, &params).is_err());
    }
}
