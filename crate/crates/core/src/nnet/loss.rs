use crate::error::{Error, Result};

pub const DICE_EPS: f64 = 1e-6;
const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_shapes(a: usize, b: usize) -> Result<()> {
    if a != b || a == 0 {
        return Err(Error::DimensionMismatch(format!(
            "prediction has {a} values, target has {b}"
        )));
    }
    Ok(())
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_shapes(pred.len(), target.len())?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// `λ·(1 − 2Σpt/(Σp+Σt+ε)) + (1−λ)·mean BCE` and its gradient with respect to `pred`.
pub fn dice_ce_loss(pred: &[f64], target: &[f64], lambda_mix: f64) -> Result<(f64, Vec<f64>)> {
    check_shapes(pred.len(), target.len())?;
    if !(0.0..=1.0).contains(&lambda_mix) {
        return Err(Error::config("lambda_mix", "must lie in [0, 1]"));
    }
    let n = pred.len() as f64;
    let (mut spt, mut sp, mut st) = (0.0, 0.0, 0.0);
    for (&p, &t) in pred.iter().zip(target) {
        spt += p * t;
        sp += p;
        st += t;
    }
    let denom = sp + st + DICE_EPS;
    let dice = 1.0 - 2.0 * spt / denom;
    let mut bce = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        bce -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        let g_dice = -2.0 * (t * denom - spt) / (denom * denom);
        let g_bce = (pc - t) / (pc * (1.0 - pc)) / n;
        grad.push(lambda_mix * g_dice + (1.0 - lambda_mix) * g_bce);
    }
    Ok((lambda_mix * dice + (1.0 - lambda_mix) * bce / n, grad))
}

/// Same loss taking logits; the cross-entropy gradient is formed directly as
/// `(σ(z) − t)/n`, which stays well-conditioned for saturated units.
pub fn dice_ce_logits(logits: &[f64], target: &[f64], lambda_mix: f64) -> Result<(f64, Vec<f64>)> {
    check_shapes(logits.len(), target.len())?;
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    let (loss, _) = dice_ce_loss(&probs, target, lambda_mix)?;
    let n = probs.len() as f64;
    let (mut spt, mut sp, mut st) = (0.0, 0.0, 0.0);
    for (&p, &t) in probs.iter().zip(target) {
        spt += p * t;
        sp += p;
        st += t;
    }
    let denom = sp + st + DICE_EPS;
    let grad = probs
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let g_dice = -2.0 * (t * denom - spt) / (denom * denom) * p * (1.0 - p);
            lambda_mix * g_dice + (1.0 - lambda_mix) * (p - t) / n
        })
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_near_zero() {
        let p = vec![1.0; 16];
        let (l, _) = dice_ce_loss(&p, &p, 0.5).unwrap();
        assert!(l.abs() < 1e-5, "{l}");
    }

    #[test]
    fn inverted_prediction_dice_term_one() {
        let t: Vec<f64> = (0..10).map(|k| f64::from(k % 2 == 0)).collect();
        let p: Vec<f64> = t.iter().map(|v| 1.0 - v).collect();
        let (dice, _) = dice_ce_loss(&p, &t, 1.0).unwrap();
        assert!((dice - 1.0).abs() < 1e-9);
        let (mixed, _) = dice_ce_loss(&p, &t, 0.5).unwrap();
        assert!(mixed > 5.0);
    }

    #[test]
    fn eight_element_reference_value() {
        // Reference computed in double precision with an independent script.
        let p = [0.9, 0.2, 0.65, 0.05, 0.5, 0.8, 0.3, 0.99];
        let t = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let (l, _) = dice_ce_loss(&p, &t, 0.5).unwrap();
        assert!((l - DICE_CE_8_REFERENCE).abs() < 1e-6, "{l}");
    }

    const DICE_CE_8_REFERENCE: f64 = 0.578_354_691_920_246_7;

    #[test]
    fn gradient_matches_finite_difference() {
        let p = [0.9, 0.2, 0.65, 0.05, 0.5, 0.8, 0.3, 0.99];
        let t = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        for lambda in [0.0, 0.3, 1.0] {
            let (_, g) = dice_ce_loss(&p, &t, lambda).unwrap();
            for i in 0..p.len() {
                let h = 1e-6;
                let mut a = p;
                let mut b = p;
                a[i] += h;
                b[i] -= h;
                let fd = (dice_ce_loss(&a, &t, lambda).unwrap().0 - dice_ce_loss(&b, &t, lambda).unwrap().0) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "λ={lambda} i={i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn logit_gradient_matches_chain_rule() {
        let z = [2.1, -1.3, 0.4, -3.0, 0.0, 1.2, -0.8, 4.5];
        let t = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let (l, g) = dice_ce_logits(&z, &t, 0.5).unwrap();
        for i in 0..z.len() {
            let h = 1e-6;
            let mut a = z;
            let mut b = z;
            a[i] += h;
            b[i] -= h;
            let fd = (dice_ce_logits(&a, &t, 0.5).unwrap().0 - dice_ce_logits(&b, &t, 0.5).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "{fd} vs {}", g[i]);
        }
        assert!(l > 0.0);
    }

    #[test]
    fn non_negative_on_random_inputs() {
        let mut rng = crate::rng::Rng::new(5);
        for _ in 0..500 {
            let p: Vec<f64> = (0..12).map(|_| rng.uniform_range(1e-4, 1.0 - 1e-4)).collect();
            let t: Vec<f64> = (0..12).map(|_| f64::from(rng.uniform() < 0.5)).collect();
            let lambda = rng.uniform();
            assert!(dice_ce_loss(&p, &t, lambda).unwrap().0 >= 0.0);
        }
    }

    #[test]
    fn mse_hand_case() {
        let (l, g) = mse_loss(&[1.0, 3.0], &[0.0, 1.0]).unwrap();
        assert_eq!(l, 2.5);
        assert_eq!(g, vec![1.0, 2.0]);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }
}
