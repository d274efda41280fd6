use crate::rng::Rng;

/// Stationary AR(1) edge displacements with standard deviation `sigma` and
/// autocorrelation `exp(-d/xi)`.
pub fn gen_rough_edge(n: usize, sigma: f64, xi: f64, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    let rho = (-1.0 / xi.max(1.0)).exp();
    let innov = (1.0 - rho * rho).sqrt() * sigma;
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(n);
    let mut x = sigma * rng.normal();
    for _ in 0..n {
        out.push(x);
        x = rho * x + innov * rng.normal();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_flat() {
        assert!(gen_rough_edge(50, 0.0, 5.0, 1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic() {
        assert_eq!(gen_rough_edge(100, 2.0, 8.0, 42), gen_rough_edge(100, 2.0, 8.0, 42));
        assert_ne!(gen_rough_edge(100, 2.0, 8.0, 42), gen_rough_edge(100, 2.0, 8.0, 43));
    }

    #[test]
    fn monte_carlo_statistics() {
        let (sigma, xi) = (2.0, 10.0);
        let x = gen_rough_edge(100_000, sigma, xi, 7);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var.sqrt() - sigma).abs() < 0.05 * sigma, "std {}", var.sqrt());
        let lag1 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0) / var;
        assert!((lag1 - (-1.0 / xi).exp()).abs() < 0.05, "lag1 {lag1}");
    }
}
