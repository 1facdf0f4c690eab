//! Special functions.

/// Bessel function of the first kind, order one.
///
/// Rational approximation for |x| < 8 and the Hankel asymptotic form beyond,
/// absolute error below 1e-8.
pub(crate) fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        let y = x * x;
        let num = x
            * (72362614232.0
                + y * (-7895059235.0
                    + y * (242396853.1 + y * (-2972611.439 + y * (15704.48260 + y * (-30.16036606))))));
        let den = 144725228442.0
            + y * (2300535178.0 + y * (18583304.74 + y * (99447.43394 + y * (376.9991397 + y))));
        num / den
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - 2.356194491;
        let p = 1.0
            + y * (0.183105e-2 + y * (-0.3516396496e-4 + y * (0.2457520174e-5 + y * (-0.240337019e-6))));
        let q = 0.04687499995
            + y * (-0.2002690873e-3 + y * (0.8449199096e-5 + y * (-0.88228987e-6 + y * 0.105787412e-6)));
        let ans = (std::f64::consts::FRAC_2_PI / ax).sqrt() * (xx.cos() * p - z * xx.sin() * q);
        if x < 0.0 {
            -ans
        } else {
            ans
        }
    }
}

/// Normalized Airy amplitude `2·J1(u)/u`, equal to 1 at u = 0.
pub(crate) fn airy(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 8.0
    } else {
        2.0 * bessel_j1(u) / u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // J1(x) = (1/π)∫₀^π cos(τ − x·sinτ) dτ, composite Simpson
    fn j1_integral(x: f64) -> f64 {
        let n = 4000;
        let h = PI / n as f64;
        let f = |t: f64| (t - x * t.sin()).cos();
        let mut s = f(0.0) + f(PI);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / PI
    }

    #[test]
    fn j1_matches_integral_representation() {
        for i in 0..=400 {
            let x = -10.0 + i as f64 * 0.1;
            let want = j1_integral(x);
            assert!((bessel_j1(x) - want).abs() < 2e-8, "x={x}");
        }
    }

    #[test]
    fn first_zero_of_j1() {
        // j_{1,1} = 3.8317059702
        assert!(bessel_j1(3.8317059702).abs() < 1e-8);
        assert!((airy(0.0) - 1.0).abs() < 1e-15);
    }
}
