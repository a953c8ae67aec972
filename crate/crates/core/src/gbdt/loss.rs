/// Probabilities are kept inside `[PROB_EPS, 1 - PROB_EPS]`.
pub const PROB_EPS: f64 = 1e-15;

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Gradient and hessian of the logistic loss in the raw score `f`.
///
/// `g = p - y` is evaluated as `s(f)` for negatives and `-s(-f)` for
/// positives, and `h = s(f) s(-f)`. Flipping the label and negating `f`
/// therefore negates `g` and leaves `h` unchanged, bit for bit.
#[inline]
pub fn gradient_hessian(f: f64, positive: bool) -> (f64, f64) {
    let p = sigmoid(f);
    let q = sigmoid(-f);
    let g = if positive { -q } else { p };
    (g, p * q)
}

/// Pointwise logistic loss `-y ln p - (1 - y) ln(1 - p)` with `p = s(f)`.
pub fn logistic_loss(f: f64, positive: bool) -> f64 {
    let z = if positive { -f } else { f };
    // softplus(z) = ln(1 + e^z)
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Log-odds prior `logit(clamp(pos / n))`, computed as `ln(pos) - ln(neg)`
/// so that swapping the counts negates the result exactly.
pub fn logit_from_counts(pos: usize, neg: usize) -> f64 {
    let edge = ((1.0 - PROB_EPS) / PROB_EPS).ln();
    match (pos, neg) {
        (0, 0) => 0.0,
        (_, 0) => edge,
        (0, _) => -edge,
        (p, n) => {
            let raw = (p as f64).ln() - (n as f64).ln();
            raw.clamp(-edge, edge)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p: f64 = rng.random_range(0.01..0.99);
            let y = rng.random_bool(0.5);
            let f = (p / (1.0 - p)).ln();
            let step = 1e-4;
            let fd_g = (logistic_loss(f + step, y) - logistic_loss(f - step, y)) / (2.0 * step);
            let fd_h = (logistic_loss(f + step, y) - 2.0 * logistic_loss(f, y)
                + logistic_loss(f - step, y))
                / (step * step);
            let (g, h) = gradient_hessian(f, y);
            assert!((g - fd_g).abs() < 1e-6, "g {g} vs {fd_g}");
            assert!((h - fd_h).abs() < 1e-6, "h {h} vs {fd_h}");
            assert!((g - (p - y as u8 as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn flip_negates_gradient_exactly() {
        for f in [-30.0, -2.5, -1e-3, 0.0, 0.7, 12.0] {
            for y in [false, true] {
                let (g, h) = gradient_hessian(f, y);
                let (g2, h2) = gradient_hessian(-f, !y);
                assert_eq!(g2.to_bits(), (-g).to_bits());
                assert_eq!(h2.to_bits(), h.to_bits());
            }
        }
    }

    #[test]
    fn prior_log_odds() {
        assert_eq!(logit_from_counts(3, 7), -logit_from_counts(7, 3));
        assert!((logit_from_counts(3, 1) - 3f64.ln()).abs() < 1e-12);
        let edge = ((1.0 - PROB_EPS) / PROB_EPS).ln();
        assert_eq!(logit_from_counts(5, 0), edge);
    }

    #[test]
    fn loss_is_stable_for_large_scores() {
        assert!(logistic_loss(800.0, false).is_finite());
        assert!(logistic_loss(-800.0, false) >= 0.0);
        assert!((logistic_loss(0.0, true) - 2f64.ln()).abs() < 1e-15);
    }
}
