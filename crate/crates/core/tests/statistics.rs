//! Monte-Carlo and dense-grid checks across modules.

use multibeam_core::array::{azimuth_grid, beampattern, make_ula, steering_vector, Angle};
use multibeam_core::beamformer::{matched_beam_bank, quantize_phases};
use multibeam_core::channel::{apply_channel, assemble_narrowband, draw_subpaths, ClusterParams};
use multibeam_core::lens::{lens_beampattern, lenslet_pattern, FeedLayout, LensSpec, LensletArraySpec};
use multibeam_core::modem::{
    decode_cell, transmit_scene, zadoff_chu_preamble, SubchannelPlan, TxStreamSpec, PREAMBLE_SYMBOLS,
};
use multibeam_core::CMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn channel_power_normalization() {
    let (n, m) = (4, 4);
    let g = make_ula(n, 0.5, 1.0).unwrap();
    let draws = 10_000;
    let mut sum = 0.0;
    for seed in 0..draws {
        let p = ClusterParams { num_clusters: 2, subpaths_per_cluster: 3, angle_spread: 0.1, gain_power: 1.0, seed };
        let h = assemble_narrowband(&draw_subpaths(&p, 0.0).unwrap(), &g, &g).unwrap();
        sum += h.frobenius_sq() / (n * m) as f64;
    }
    let mean = sum / draws as f64;
    assert!((mean - 1.0).abs() < 0.03, "mean {mean}");
}

#[test]
fn channel_rank_bound() {
    for seed in 0..200u64 {
        let c = 1 + (seed % 2) as usize;
        let l = 1 + (seed % 3) as usize;
        let n = 2 + (seed % 6) as usize;
        let m = 3 + (seed % 5) as usize;
        let p = ClusterParams { num_clusters: c, subpaths_per_cluster: l, angle_spread: 0.3, gain_power: 1.0, seed };
        let h = assemble_narrowband(
            &draw_subpaths(&p, 0.0).unwrap(),
            &make_ula(n, 0.5, 1.0).unwrap(),
            &make_ula(m, 0.5, 1.0).unwrap(),
        )
        .unwrap();
        let e = h.entries();
        let d = DMatrix::from_fn(e.nrows(), e.ncols(), |i, j| e[(i, j)]);
        let rank = d.rank(1e-9 * d.norm().max(1.0));
        assert!(rank <= (c * l).min(n).min(m), "seed {seed}: rank {rank}");
    }
}

#[test]
fn matched_beam_peaks_at_label() {
    let g = make_ula(8, 0.5, 1.0).unwrap();
    let grid = azimuth_grid(-90.0, 90.0, 0.05).unwrap();
    for &d in &[-60.0, -22.5, 0.0, 7.3, 41.0] {
        let bank = matched_beam_bank(&g, &[Angle::azimuth_deg(d)]).unwrap();
        let p = beampattern(&bank.weights()[0], &g, &grid, false).unwrap();
        assert!((p.peak_angle().azimuth().to_degrees() - d).abs() <= 0.05 + 1e-9);
    }
}

#[test]
fn parseval_over_sine_space() {
    // uniform grid in u = sinθ on [-1, 1)
    for n in [2, 4, 7] {
        let g = make_ula(n, 0.5, 1.0).unwrap();
        let k = 4000;
        let mean: f64 = (0..k)
            .map(|i| {
                let u = -1.0 + 2.0 * i as f64 / k as f64;
                let a = steering_vector(&g, Angle::new(u.asin(), 0.0).unwrap());
                a.iter().sum::<Complex64>().norm_sqr()
            })
            .sum::<f64>()
            / k as f64;
        assert!((mean / n as f64 - 1.0).abs() < 0.02, "n={n} mean {mean}");
    }
}

#[test]
fn phase_quantization_loses_gain_monotonically() {
    let g = make_ula(8, 0.5, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut q2, mut q4, mut full) = (0.0, 0.0, 0.0);
    for _ in 0..100 {
        let dir = Angle::azimuth_deg(rng.random_range(-60.0..60.0));
        let a = steering_vector(&g, dir);
        let w = CMatrix::from_shape_fn((8, 1), |(i, _)| a[i]);
        let gain = |w: &CMatrix| w.column(0).iter().zip(&a).map(|(w, a)| w.conj() * a).sum::<Complex64>().norm();
        full += gain(&w);
        q2 += gain(&quantize_phases(&w, 2).unwrap());
        q4 += gain(&quantize_phases(&w, 4).unwrap());
    }
    assert!(q2 <= q4 && q4 <= full + 1e-9, "{q2} {q4} {full}");
}

#[test]
fn four_feed_lenslet_beams_are_distinct() {
    let lambda = 0.0107;
    let lens = LensSpec::default();
    let layout = FeedLayout::linear(4, 0.008, lambda).unwrap();
    let spec = LensletArraySpec::new(4, 0.10, &lens).unwrap();
    let grid = azimuth_grid(-40.0, 40.0, 0.02).unwrap();
    let mut peaks = Vec::new();
    for &off in layout.feed_offsets() {
        let beam = multibeam_core::lens::feed_to_beam_angle(off, &lens).unwrap();
        let el = lens_beampattern(&lens, &layout, off, lambda, &grid).unwrap();
        let comp = lenslet_pattern(&el, &spec, beam, lambda, &grid).unwrap();
        peaks.push(comp.peak_angle().azimuth().to_degrees());
    }
    for i in 0..peaks.len() {
        for j in i + 1..peaks.len() {
            assert!((peaks[i] - peaks[j]).abs() > 1.0, "{peaks:?}");
        }
    }
}

#[test]
fn evm_falls_with_noise() {
    let plan = SubchannelPlan::default();
    let g = make_ula(4, 0.5, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = TxStreamSpec {
        direction: Angle::broadside(),
        subchannel_index: 2,
        bits: (0..400).map(|_| rng.random()).collect(),
        preamble: zadoff_chu_preamble(5, PREAMBLE_SYMBOLS),
    };
    let x = transmit_scene(std::slice::from_ref(&spec), &g, &plan).unwrap();
    let bank = matched_beam_bank(&g, &[Angle::broadside()]).unwrap();
    let p = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
    let median_evm = |rel_db: f64| {
        let mut evm: Vec<f64> = (0..100u64)
            .map(|seed| {
                let r = apply_channel(&multibeam_core::channel::ChannelMatrix::identity(4), &x, p * 0.1 * 10f64.powf(rel_db / 10.0), seed).unwrap();
                let w = &bank.weights()[0];
                let y: Vec<Complex64> = r.columns().into_iter().map(|c| c.iter().zip(w).map(|(r, w)| w.conj() * r).sum()).collect();
                decode_cell(&y, &plan, &spec, Angle::broadside()).unwrap().evm_percent
            })
            .collect();
        evm.sort_by(f64::total_cmp);
        (evm[49] + evm[50]) / 2.0
    };
    let (e0, e10, e20) = (median_evm(0.0), median_evm(-10.0), median_evm(-20.0));
    assert!(e0 > e10 && e10 > e20, "{e0} {e10} {e20}");
}
