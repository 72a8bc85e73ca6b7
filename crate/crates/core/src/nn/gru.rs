//! Gated recurrent unit layer.
//!
//! ```text
//! r  = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
//! z  = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
//! n  = tanh(x W_in + b_in + r * (h W_hn + b_hn))
//! h' = (1 - z) * n + z * h
//! ```

use rand::Rng;

use super::graph::{Graph, NodeId};
use super::params::{ModelParams, ParamId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

const GATES: [&str; 3] = ["r", "z", "n"];

/// Parameter handles of one GRU layer.
#[derive(Debug, Clone)]
pub struct GruLayer {
    pub input_dim: usize,
    pub hidden_dim: usize,
    w_in: [ParamId; 3],
    w_hid: [ParamId; 3],
    b_in: [ParamId; 3],
    b_hid: [ParamId; 3],
}

/// A GRU layer's parameters bound into a particular graph.
#[derive(Debug, Clone, Copy)]
pub struct GruNodes {
    hidden_dim: usize,
    w_in: [NodeId; 3],
    w_hid: [NodeId; 3],
    b_in: [NodeId; 3],
    b_hid: [NodeId; 3],
}

impl GruLayer {
    pub fn register<R: Rng + ?Sized>(
        params: &mut ModelParams,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut reg =
            |name: String, shape: Vec<usize>| params.register_uniform(name, shape, hidden_dim, rng);
        let mut w_in = Vec::with_capacity(3);
        let mut w_hid = Vec::with_capacity(3);
        let mut b_in = Vec::with_capacity(3);
        let mut b_hid = Vec::with_capacity(3);
        for gate in GATES {
            w_in.push(reg(
                format!("{prefix}.w_i{gate}"),
                vec![input_dim, hidden_dim],
            )?);
            w_hid.push(reg(
                format!("{prefix}.w_h{gate}"),
                vec![hidden_dim, hidden_dim],
            )?);
            b_in.push(reg(format!("{prefix}.b_i{gate}"), vec![hidden_dim])?);
            b_hid.push(reg(format!("{prefix}.b_h{gate}"), vec![hidden_dim])?);
        }
        let arr = |v: Vec<ParamId>| [v[0], v[1], v[2]];
        Ok(Self {
            input_dim,
            hidden_dim,
            w_in: arr(w_in),
            w_hid: arr(w_hid),
            b_in: arr(b_in),
            b_hid: arr(b_hid),
        })
    }

    /// Looks up an already-registered layer by prefix.
    pub fn find(params: &ModelParams, prefix: &str) -> Result<Self> {
        let get = |name: String| {
            params
                .id(&name)
                .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
        };
        let mut ids = [[ParamId(0); 3]; 4];
        for (g, gate) in GATES.iter().enumerate() {
            ids[0][g] = get(format!("{prefix}.w_i{gate}"))?;
            ids[1][g] = get(format!("{prefix}.w_h{gate}"))?;
            ids[2][g] = get(format!("{prefix}.b_i{gate}"))?;
            ids[3][g] = get(format!("{prefix}.b_h{gate}"))?;
        }
        let shape = params.get(ids[0][0]).shape();
        if shape.len() != 2 {
            return Err(Error::shape(format!("{prefix}.w_ir"), "expected a matrix"));
        }
        Ok(Self {
            input_dim: shape[0],
            hidden_dim: shape[1],
            w_in: ids[0],
            w_hid: ids[1],
            b_in: ids[2],
            b_hid: ids[3],
        })
    }

    pub fn bind(&self, g: &mut Graph, params: &ModelParams) -> GruNodes {
        let bind3 = |g: &mut Graph, ids: &[ParamId; 3]| {
            [
                g.param(params, ids[0]),
                g.param(params, ids[1]),
                g.param(params, ids[2]),
            ]
        };
        GruNodes {
            hidden_dim: self.hidden_dim,
            w_in: bind3(g, &self.w_in),
            w_hid: bind3(g, &self.w_hid),
            b_in: bind3(g, &self.b_in),
            b_hid: bind3(g, &self.b_hid),
        }
    }
}

impl GruLayer {
    /// Picks this layer's nodes out of a graph-wide binding indexed by parameter.
    pub fn nodes_from(&self, bound: &[NodeId]) -> GruNodes {
        let pick = |ids: &[ParamId; 3]| ids.map(|id| bound[id.index()]);
        GruNodes {
            hidden_dim: self.hidden_dim,
            w_in: pick(&self.w_in),
            w_hid: pick(&self.w_hid),
            b_in: pick(&self.b_in),
            b_hid: pick(&self.b_hid),
        }
    }
}

impl GruNodes {
    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// One recurrence step for a batch: `x` is `[n, d_in]`, `h` is `[n, d_h]`.
    pub fn step(&self, g: &mut Graph, x: NodeId, h: NodeId) -> Result<NodeId> {
        let mut pre = [x; 3];
        let mut hid = [h; 3];
        for i in 0..3 {
            pre[i] = g.affine(x, self.w_in[i], self.b_in[i])?;
            hid[i] = g.affine(h, self.w_hid[i], self.b_hid[i])?;
        }
        let r_in = g.add(pre[0], hid[0])?;
        let r = g.sigmoid(r_in);
        let z_in = g.add(pre[1], hid[1])?;
        let z = g.sigmoid(z_in);
        let gated = g.mul(r, hid[2])?;
        let n_in = g.add(pre[2], gated)?;
        let n = g.tanh(n_in);
        // h' = n + z * (h - n)
        let diff = g.sub(h, n)?;
        let zd = g.mul(z, diff)?;
        g.add(n, zd)
    }
}

/// Single GRU step on plain vectors.
pub fn gru_cell_forward(
    x_t: &[f64],
    h_prev: &[f64],
    params: &ModelParams,
    layer: &GruLayer,
) -> Result<Vec<f64>> {
    if x_t.len() != layer.input_dim || h_prev.len() != layer.hidden_dim {
        return Err(Error::shape(
            "gru_cell",
            format!(
                "x has {} (expected {}), h has {} (expected {})",
                x_t.len(),
                layer.input_dim,
                h_prev.len(),
                layer.hidden_dim
            ),
        ));
    }
    let mut g = Graph::new();
    let nodes = layer.bind(&mut g, params);
    let x = g.input(Tensor::row_vector(x_t.to_vec()));
    let h = g.input(Tensor::row_vector(h_prev.to_vec()));
    let out = nodes.step(&mut g, x, h)?;
    Ok(g.value(out).values().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer_with(
        params: &mut ModelParams,
        d_in: usize,
        d_h: usize,
        f: impl Fn(&str, usize) -> f64,
    ) -> GruLayer {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = GruLayer::register(params, "gru", d_in, d_h, &mut rng).unwrap();
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let name = params.name(id).to_string();
            let t = params.get_mut(id);
            for (k, v) in t.values_mut().iter_mut().enumerate() {
                *v = f(&name, k);
            }
        }
        layer
    }

    #[test]
    fn zero_weights_zero_input_gives_zero_state() {
        let mut params = ModelParams::new(0);
        let layer = layer_with(&mut params, 3, 2, |_, _| 0.0);
        let h = gru_cell_forward(&[0.0; 3], &[0.0; 2], &params, &layer).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn matches_hand_evaluated_two_unit_cell() {
        // Deterministic small weights: value depends on the name and position.
        let weight = |name: &str, k: usize| {
            let salt = name.bytes().map(|b| b as usize).sum::<usize>() % 7;
            0.05 * ((k + salt) as f64 % 5.0 - 2.0)
        };
        let mut params = ModelParams::new(0);
        let layer = layer_with(&mut params, 2, 2, weight);
        let x = [0.3, -0.7];
        let h = [0.1, -0.2];

        let w = |n: &str| {
            params
                .by_name(&format!("gru.{n}"))
                .unwrap()
                .values()
                .to_vec()
        };
        // Row-major [d_in, d_h] matrices: out_j = sum_i v_i W[i, j] + b_j.
        let lin = |v: &[f64], m: &[f64], b: &[f64], j: usize| {
            v.iter()
                .enumerate()
                .map(|(i, vi)| vi * m[i * 2 + j])
                .sum::<f64>()
                + b[j]
        };
        let mut expected = [0.0; 2];
        for j in 0..2 {
            let r = sig(lin(&x, &w("w_ir"), &w("b_ir"), j) + lin(&h, &w("w_hr"), &w("b_hr"), j));
            let z = sig(lin(&x, &w("w_iz"), &w("b_iz"), j) + lin(&h, &w("w_hz"), &w("b_hz"), j));
            let n = (lin(&x, &w("w_in"), &w("b_in"), j) + r * lin(&h, &w("w_hn"), &w("b_hn"), j))
                .tanh();
            expected[j] = (1.0 - z) * n + z * h[j];
        }
        let got = gru_cell_forward(&x, &h, &params, &layer).unwrap();
        for j in 0..2 {
            assert!(
                (got[j] - expected[j]).abs() < 1e-10,
                "{got:?} vs {expected:?}"
            );
        }
    }

    #[test]
    fn repeated_token_converges_to_fixed_point() {
        let mut params = ModelParams::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layer = GruLayer::register(&mut params, "gru", 4, 6, &mut rng).unwrap();
        let x = [0.5, -0.25, 0.75, 0.1];
        let mut h = vec![0.0; 6];
        let mut deltas = Vec::new();
        for _ in 0..60 {
            let next = gru_cell_forward(&x, &h, &params, &layer).unwrap();
            assert!(next.iter().all(|v| v.abs() < 1.0));
            deltas.push(
                next.iter()
                    .zip(&h)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
            h = next;
        }
        let burn_in = 10;
        for w in deltas[burn_in..].windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "deltas not decreasing: {deltas:?}");
        }
        assert!(deltas.last().unwrap() < &1e-6);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut params = ModelParams::new(0);
        let layer = layer_with(&mut params, 3, 2, |_, _| 0.0);
        assert!(matches!(
            gru_cell_forward(&[0.0; 2], &[0.0; 2], &params, &layer),
            Err(Error::Shape { .. })
        ));
    }
}
