use super::mlp::MlpParams;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic − numeric| / max(|analytic| + |numeric|, 1e-6)`.
    pub max_rel_error: f64,
    /// Smallest |pre-activation| over hidden units; relu checks are only
    /// meaningful when this is comfortably above `h`.
    pub min_kink_distance: f64,
}

fn hidden_preactivations(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let layers = params.layer_count();
    for l in 0..layers.saturating_sub(1) {
        // network truncated after layer l, identity output
        let dims = params.layer_dims()[..l + 2].to_vec();
        let prefix = MlpParams::from_parts(
            dims,
            params.activation(),
            params.weights()[..=l].to_vec(),
            params.biases()[..=l].to_vec(),
        )?;
        out.extend(prefix.predict(x)?);
    }
    Ok(out)
}

/// Compare backward gradients of `L = upstream · f(x)` against central
/// differences with step `h`, over every parameter and input element.
pub fn gradient_check(params: &MlpParams, x: &[f64], upstream: &[f64], h: f64) -> Result<GradCheck> {
    let objective = |p: &MlpParams, xi: &[f64]| -> Result<f64> {
        Ok(p.predict(xi)?.iter().zip(upstream).map(|(a, b)| a * b).sum())
    };
    let cache = params.forward(x)?;
    let grads = params.backward(&cache, upstream)?;
    let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-6);
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for l in 0..params.layer_count() {
        for i in 0..params.weights()[l].len() {
            let orig = probe.weights()[l][i];
            probe.weights_mut()[l][i] = orig + h;
            let up = objective(&probe, x)?;
            probe.weights_mut()[l][i] = orig - h;
            let down = objective(&probe, x)?;
            probe.weights_mut()[l][i] = orig;
            worst = worst.max(rel(grads.weights[l][i], (up - down) / (2.0 * h)));
        }
        for i in 0..params.biases()[l].len() {
            let orig = probe.biases()[l][i];
            probe.biases_mut()[l][i] = orig + h;
            let up = objective(&probe, x)?;
            probe.biases_mut()[l][i] = orig - h;
            let down = objective(&probe, x)?;
            probe.biases_mut()[l][i] = orig;
            worst = worst.max(rel(grads.biases[l][i], (up - down) / (2.0 * h)));
        }
    }
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let up = objective(params, &xp)?;
        xp[i] = x[i] - h;
        let down = objective(params, &xp)?;
        xp[i] = x[i];
        worst = worst.max(rel(grads.input[i], (up - down) / (2.0 * h)));
    }
    let min_kink_distance = hidden_preactivations(params, x)?
        .into_iter()
        .map(f64::abs)
        .fold(f64::INFINITY, f64::min);
    Ok(GradCheck {
        max_rel_error: worst,
        min_kink_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::Activation;
    use crate::rng::Rng;

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = Rng::new(2024);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 100 {
            attempts += 1;
            assert!(attempts < 2000, "could not find enough kink-free samples");
            let layers = 1 + checked % 3;
            let act = if checked % 2 == 0 { Activation::Relu } else { Activation::Tanh };
            let mut dims = vec![2 + rng.below(5)];
            for _ in 0..layers {
                dims.push(1 + rng.below(6));
            }
            let mut p = MlpParams::init(&dims, act, rng.next_u64()).unwrap();
            for b in p.biases_mut().iter_mut().flatten() {
                *b = 0.3 * rng.normal();
            }
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.normal()).collect();
            let up: Vec<f64> = (0..*dims.last().unwrap()).map(|_| rng.normal()).collect();
            let gc = gradient_check(&p, &x, &up, 1e-4).unwrap();
            if act == Activation::Relu && gc.min_kink_distance < 1e-2 {
                continue;
            }
            assert!(gc.max_rel_error < 1e-4, "dims {dims:?} {act:?}: {}", gc.max_rel_error);
            checked += 1;
        }
    }
}
