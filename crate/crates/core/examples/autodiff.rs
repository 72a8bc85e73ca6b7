//! The autodiff tape on its own: a GRU step, a softplus evidence head and the
//! evidential loss, with backprop checked against finite differences.
//!
//! `cargo run --example autodiff`

use evidential_ood::nn::{
    finite_difference_gradient, max_relative_error, Graph, GruLayer, ModelParams, Tensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn loss(
    params: &ModelParams,
    layer: &GruLayer,
    head: &[evidential_ood::nn::ParamId; 2],
) -> evidential_ood::Result<(Graph, evidential_ood::nn::NodeId)> {
    let mut g = Graph::new();
    let nodes = layer.bind(&mut g, params);
    let x = g.input(Tensor::matrix(2, 3, vec![0.5, -1.0, 0.2, 0.1, 0.4, -0.3]));
    let h0 = g.input(Tensor::zeros(vec![2, 4]));
    let h1 = nodes.step(&mut g, x, h0)?;
    let h2 = nodes.step(&mut g, x, h1)?;
    let w = g.param(params, head[0]);
    let b = g.param(params, head[1]);
    let z = g.affine(h2, w, b)?;
    let e = g.softplus(z);
    let alpha = g.add_scalar(e, 1.0);
    let l = g.enn_loss(alpha, &[0, 2])?;
    let m = g.mean(l);
    Ok((g, m))
}

fn main() -> evidential_ood::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = ModelParams::new(0);
    let layer = GruLayer::register(&mut params, "gru", 3, 4, &mut rng)?;
    let head = [
        params.register_uniform("out.w", vec![4, 3], 4, &mut rng)?,
        params.register_uniform("out.b", vec![1, 3], 4, &mut rng)?,
    ];
    let (mut g, root) = loss(&params, &layer, &head)?;
    println!("loss {:.6} over {} tape nodes", g.scalar(root), g.len());
    g.backward(root)?;
    let analytic = g.param_grads(&params)?;
    let numeric = finite_difference_gradient(
        |p| {
            loss(p, &layer, &head)
                .map(|(g, r)| g.scalar(r))
                .unwrap_or(f64::NAN)
        },
        &params,
        1e-5,
    );
    println!(
        "{} parameters, max relative error backprop vs finite differences {:.2e}",
        params.num_scalars(),
        max_relative_error(&analytic, &numeric, 1e-6)
    );
    Ok(())
}
