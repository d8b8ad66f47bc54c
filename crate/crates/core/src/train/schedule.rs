use std::f64::consts::PI;

/// Cosine annealing from `lr0` at step 0 to zero at step `total`.
pub fn cosine_lr(step: u64, total: u64, lr0: f64) -> f64 {
    if total == 0 || step >= total {
        return 0.0;
    }
    0.5 * lr0 * (1.0 + (PI * step as f64 / total as f64).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(cosine_lr(0, 100, 5e-3), 5e-3);
        assert_eq!(cosine_lr(100, 100, 5e-3), 0.0);
        assert!((cosine_lr(50, 100, 5e-3) - 2.5e-3).abs() < 1e-18);
    }

    #[test]
    fn monotone_decreasing() {
        let lrs: Vec<f64> = (0..=40).map(|t| cosine_lr(t, 40, 1.0)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }
}
