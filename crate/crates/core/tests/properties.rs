use multibeam_core::array::{array_factor, make_ula, steering_vector, Angle};
use multibeam_core::channel::{
    apply_channel, assemble_narrowband, assemble_wideband, draw_subpaths, ClusterParams, MimoChannel,
};
use multibeam_core::lens::{beam_angle_to_feed, feed_to_beam_angle, LensSpec};
use multibeam_core::modem::{qpsk_demodulate, qpsk_modulate};
use multibeam_core::rf::{quantize, QuantSpec};
use multibeam_core::CMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn weights(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

proptest! {
    #[test]
    fn steering_entries_have_unit_modulus(n in 1usize..16, spacing in 0.1..2.0f64, az in -90.0..90.0f64, el in -89.0..89.0f64) {
        let g = make_ula(n, spacing, 1.0).unwrap();
        for a in steering_vector(&g, Angle::from_degrees(az, el).unwrap()) {
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_weights_mirror_the_pattern((w, az) in (1usize..10).prop_flat_map(|n| (weights(n), -90.0..90.0f64))) {
        let g = make_ula(w.len(), 0.5, 1.0).unwrap();
        let wc: Vec<Complex64> = w.iter().map(|z| z.conj()).collect();
        let a = array_factor(&w, &g, Angle::azimuth_deg(az)).unwrap().norm();
        let b = array_factor(&wc, &g, Angle::azimuth_deg(-az)).unwrap().norm();
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a));
    }

    #[test]
    fn channel_is_linear(seed in 0u64..1000, n in 1usize..6, m in 1usize..6) {
        let params = ClusterParams { num_clusters: 2, subpaths_per_cluster: 2, angle_spread: 0.2, gain_power: 1.0, seed };
        let h = assemble_narrowband(&draw_subpaths(&params, 0.0).unwrap(), &make_ula(n, 0.5, 1.0).unwrap(), &make_ula(m, 0.5, 1.0).unwrap()).unwrap();
        let x1 = CMatrix::from_shape_fn((n, 7), |(i, j)| Complex64::new((i * 3 + j) as f64 * 0.1, -(j as f64) * 0.2 + seed as f64 * 1e-3));
        let x2 = CMatrix::from_shape_fn((n, 7), |(i, j)| Complex64::new((j as f64 - i as f64).sin(), 0.3));
        let sum = apply_channel(&h, &(&x1 + &x2), 0.0, 0).unwrap();
        let parts = &apply_channel(&h, &x1, 0.0, 0).unwrap() + &apply_channel(&h, &x2, 0.0, 0).unwrap();
        for (a, b) in sum.iter().zip(parts.iter()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn taps_sum_to_narrowband(seed in 0u64..1000, taps in 1usize..6) {
        let fs = 1e9;
        let params = ClusterParams { num_clusters: 2, subpaths_per_cluster: 3, angle_spread: 0.1, gain_power: 1.0, seed };
        let set = draw_subpaths(&params, (taps as f64 - 0.5) / fs).unwrap();
        let g = make_ula(4, 0.5, 1.0).unwrap();
        let nb = assemble_narrowband(&set, &g, &g).unwrap();
        let wb = assemble_wideband(&set, &g, &g, fs, taps).unwrap();
        prop_assert_eq!(wb.rx_count(), 4);
        for (a, b) in wb.collapse().entries().iter().zip(nb.entries().iter()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn feed_mapping_round_trips(x in -0.05..0.05f64, y in -0.05..0.05f64) {
        let spec = LensSpec::default();
        prop_assume!(x.hypot(y) < spec.focal_length);
        let back = beam_angle_to_feed(feed_to_beam_angle([x, y], &spec).unwrap(), &spec);
        prop_assert!((back[0] - x).abs() < 1e-12 && (back[1] - y).abs() < 1e-12);
    }

    #[test]
    fn qpsk_round_trips(bits in prop::collection::vec(any::<bool>(), 0..200).prop_map(|mut b| { if b.len() % 2 == 1 { b.pop(); } b })) {
        prop_assert_eq!(qpsk_demodulate(&qpsk_modulate(&bits).unwrap()), bits);
    }

    #[test]
    fn quantizer_idempotent_monotone(bits in 1u32..16, fs in 0.1..10.0f64, a in -20.0..20.0f64, b in -20.0..20.0f64) {
        let q = QuantSpec::new(bits, fs).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (once, _) = quantize(&[Complex64::new(lo, hi)], &q);
        let (twice, _) = quantize(&once, &q);
        prop_assert_eq!(&once, &twice);
        let (other, _) = quantize(&[Complex64::new(hi, lo)], &q);
        prop_assert!(once[0].re <= other[0].re && once[0].im >= other[0].im);
    }
}
