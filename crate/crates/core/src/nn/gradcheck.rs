//! Central finite differences, used as an independent gradient oracle.

use super::params::ModelParams;

/// `(f(theta + h e_k) - f(theta - h e_k)) / 2h` for every scalar parameter,
/// grouped per tensor in registration order.
pub fn finite_difference_gradient<F>(mut loss: F, params: &ModelParams, h: f64) -> Vec<Vec<f64>>
where
    F: FnMut(&ModelParams) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut probe = params.clone();
    let mut out: Vec<Vec<f64>> = params
        .ids()
        .map(|id| vec![0.0; params.get(id).len()])
        .collect();
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        for (k, &orig) in params.get(id).values().iter().enumerate() {
            probe.get_mut(id).values_mut()[k] = orig + h;
            let up = loss(&probe);
            probe.get_mut(id).values_mut()[k] = orig - h;
            let down = loss(&probe);
            probe.get_mut(id).values_mut()[k] = orig;
            out[id.index()][k] = (up - down) / (2.0 * h);
        }
    }
    out
}

/// Largest `|a - n| / max(|a|, |n|, floor)` over all coordinates.
pub fn max_relative_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>], floor: f64) -> f64 {
    analytic
        .iter()
        .flatten()
        .zip(numeric.iter().flatten())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn params(values: Vec<f64>) -> ModelParams {
        let mut p = ModelParams::new(0);
        p.register("w", Tensor::row_vector(values)).unwrap();
        p
    }

    #[test]
    fn linear_loss_is_exact() {
        let p = params(vec![0.3, -1.2, 4.0]);
        let coef = [2.0, -0.5, 0.25];
        for h in [1e-1, 1e-3, 1.0] {
            let g = finite_difference_gradient(
                |q| {
                    q.by_name("w")
                        .unwrap()
                        .values()
                        .iter()
                        .zip(coef)
                        .map(|(w, c)| w * c)
                        .sum()
                },
                &p,
                h,
            );
            for (a, b) in g[0].iter().zip(coef) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cubic_error_scales_quadratically() {
        // f(w) = w^3 has a nonzero third derivative; the central-difference
        // error is h^2 f'''/6 = h^2.
        let p = params(vec![1.3]);
        let exact = 3.0 * 1.3_f64.powi(2);
        let err = |h: f64| {
            let g =
                finite_difference_gradient(|q| q.by_name("w").unwrap().values()[0].powi(3), &p, h);
            (g[0][0] - exact).abs()
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn quadratic_loss_is_exact_up_to_rounding() {
        let p = params(vec![0.7]);
        let g =
            finite_difference_gradient(|q| q.by_name("w").unwrap().values()[0].powi(2), &p, 1e-3);
        assert!((g[0][0] - 1.4).abs() < 1e-10);
    }
}
