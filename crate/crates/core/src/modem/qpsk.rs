use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{invalid, Result};

/// Gray-mapped QPSK: the first bit of a pair sets the sign of Q, the second
/// the sign of I (0 → positive). Unit mean power.
pub fn qpsk_modulate(bits: &[bool]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return invalid(format!("QPSK needs an even number of bits, got {}", bits.len()));
    }
    let sign = |b: bool| if b { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Ok(bits
        .chunks_exact(2)
        .map(|p| Complex64::new(sign(p[1]), sign(p[0])))
        .collect())
}

/// Hard decisions. A component that is exactly zero decides toward bit 0.
pub fn qpsk_demodulate(symbols: &[Complex64]) -> Vec<bool> {
    symbols.iter().flat_map(|s| [s.im < 0.0, s.re < 0.0]).collect()
}

/// RMS error relative to RMS reference, percent.
pub fn evm_percent(measured: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if measured.len() != reference.len() {
        return invalid(format!(
            "EVM length mismatch: {} vs {}",
            measured.len(),
            reference.len()
        ));
    }
    if reference.is_empty() {
        return invalid("EVM of an empty sequence");
    }
    let err: f64 = measured.iter().zip(reference).map(|(m, r)| (m - r).norm_sqr()).sum();
    let refp: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    Ok(100.0 * (err / refp).sqrt())
}

pub fn ber(bits: &[bool], reference: &[bool]) -> Result<f64> {
    if bits.len() != reference.len() {
        return invalid(format!("BER length mismatch: {} vs {}", bits.len(), reference.len()));
    }
    if bits.is_empty() {
        return invalid("BER of an empty sequence");
    }
    let errors = bits.iter().zip(reference).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / bits.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn mapping_table() {
        let h = FRAC_1_SQRT_2;
        let syms = qpsk_modulate(&bits("00011110")).unwrap();
        assert_eq!(
            syms,
            vec![
                Complex64::new(h, h),
                Complex64::new(-h, h),
                Complex64::new(-h, -h),
                Complex64::new(h, -h)
            ]
        );
        for s in &syms {
            assert!((s.norm() - 1.0).abs() < 1e-15);
            assert!((s.arg().to_degrees().abs() - 45.0).abs() < 1e-9 || (s.arg().to_degrees().abs() - 135.0).abs() < 1e-9);
        }
        assert!(qpsk_modulate(&bits("101")).is_err());
    }

    #[test]
    fn decisions_and_ties() {
        assert_eq!(qpsk_demodulate(&[Complex64::new(0.7, 0.7)]), bits("00"));
        assert_eq!(qpsk_demodulate(&[Complex64::new(0.0, 0.0)]), bits("00"));
        assert_eq!(qpsk_demodulate(&[Complex64::new(0.1, -3.0)]), bits("10"));
    }

    #[test]
    fn round_trip_random_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b: Vec<bool> = (0..10_000).map(|_| rng.random()).collect();
        let syms = qpsk_modulate(&b).unwrap();
        let p: f64 = syms.iter().map(|s| s.norm_sqr()).sum::<f64>() / syms.len() as f64;
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(qpsk_demodulate(&syms), b);
    }

    #[test]
    fn metric_examples() {
        let r = qpsk_modulate(&bits("00110110")).unwrap();
        assert_eq!(evm_percent(&r, &r).unwrap(), 0.0);
        let scaled: Vec<Complex64> = r.iter().map(|s| s * 1.01).collect();
        assert!((evm_percent(&scaled, &r).unwrap() - 1.0).abs() < 1e-6);
        let b = bits("0110");
        let flipped: Vec<bool> = b.iter().map(|x| !x).collect();
        assert_eq!(ber(&b, &b).unwrap(), 0.0);
        assert_eq!(ber(&flipped, &b).unwrap(), 1.0);
        assert!(ber(&b, &b[..3]).is_err());
        assert!(evm_percent(&r, &r[..2]).is_err());
    }
}
