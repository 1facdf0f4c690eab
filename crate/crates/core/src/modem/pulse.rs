use std::f64::consts::PI;

pub const ROLLOFF: f64 = 0.25;
pub const SPAN_SYMBOLS: usize = 8;

/// Unit-energy root-raised-cosine taps, `span·sps + 1` long, centered.
pub fn rrc_taps(beta: f64, span: usize, sps: usize) -> Vec<f64> {
    let n = span * sps;
    let mid = n as f64 / 2.0;
    let taps: Vec<f64> = (0..=n)
        .map(|i| {
            let t = (i as f64 - mid) / sps as f64;
            rrc(t, beta)
        })
        .collect();
    let e: f64 = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    taps.into_iter().map(|h| h / e).collect()
}

// t in symbol periods
fn rrc(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_energy_symmetric() {
        let h = rrc_taps(ROLLOFF, SPAN_SYMBOLS, 16);
        assert_eq!(h.len(), 129);
        assert!((h.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..h.len() {
            assert_eq!(h[i], h[h.len() - 1 - i]);
        }
        let peak = h.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(peak, h[64]);
    }

    #[test]
    fn singular_point_is_continuous() {
        let beta = 0.25;
        let s = rrc(1.0, beta);
        assert!((rrc(1.0 + 1e-6, beta) - s).abs() < 1e-5);
        assert!((rrc(1.0 - 1e-6, beta) - s).abs() < 1e-5);
    }

    #[test]
    fn cascade_is_nyquist() {
        // RRC ⋆ RRC ≈ raised cosine: zero crossings at nonzero symbol instants
        let sps = 16;
        let h = rrc_taps(ROLLOFF, SPAN_SYMBOLS, sps);
        let n = h.len();
        let rc: Vec<f64> = (0..2 * n - 1)
            .map(|k| {
                (0..n)
                    .filter(|&i| k >= i && k - i < n)
                    .map(|i| h[i] * h[k - i])
                    .sum()
            })
            .collect();
        let c = n - 1;
        assert!((rc[c] - 1.0).abs() < 1e-12);
        for m in 1..SPAN_SYMBOLS {
            assert!(rc[c + m * sps].abs() < 0.01, "m={m} {}", rc[c + m * sps]);
        }
    }
}
