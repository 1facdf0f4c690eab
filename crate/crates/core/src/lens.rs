//! Lens + focal-plane-array receiver model and lenslet cascades.
//!
//! The lens is treated as an ideal circular aperture: a feed displaced on the
//! focal plane produces a beam tilted the opposite way, with an Airy-shaped
//! pattern whose peak equals the aperture directivity. Each feed is itself a
//! short series-fed column, which shapes the elevation response.

use std::path::Path;

use num_complex::Complex64;

use crate::array::{magnitude_db, make_ula, steering_vector, Angle, Beampattern};
use crate::error::{invalid, Error, Result};
use crate::special::airy;

/// Hemispherical dielectric lens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensSpec {
    pub radius: f64,
    pub base_length: f64,
    pub focal_length: f64,
    pub loss_db: f64,
}

impl LensSpec {
    pub fn new(radius: f64, base_length: f64, focal_length: f64, loss_db: f64) -> Result<Self> {
        if !(radius > 0.0) || !(focal_length > 0.0) {
            return invalid("lens radius and focal length must be > 0");
        }
        if !(base_length >= 0.0) || !(loss_db >= 0.0) {
            return invalid("lens base length and loss must be >= 0");
        }
        Ok(Self {
            radius,
            base_length,
            focal_length,
            loss_db,
        })
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }
}

impl Default for LensSpec {
    /// 5 cm radius, 5.7 cm base (also used as focal length), 1.5 dB loss.
    fn default() -> Self {
        Self {
            radius: 0.05,
            base_length: 0.057,
            focal_length: 0.057,
            loss_db: 1.5,
        }
    }
}

/// Feeds on the focal plane and the series-fed column each feed is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedLayout {
    feed_offsets: Vec<[f64; 2]>,
    element_subarray_n: usize,
    element_spacing: f64,
}

impl FeedLayout {
    pub fn new(feed_offsets: Vec<[f64; 2]>, element_subarray_n: usize, element_spacing: f64) -> Result<Self> {
        if feed_offsets.is_empty() {
            return invalid("feed layout needs at least one feed");
        }
        if element_subarray_n == 0 || !(element_spacing > 0.0) {
            return invalid("subarray needs >= 1 element and positive spacing");
        }
        Ok(Self {
            feed_offsets,
            element_subarray_n,
            element_spacing,
        })
    }

    /// `n` feeds along x at `pitch`, centered, with 8-element λ/2 columns.
    pub fn linear(n: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        let c = (n as f64 - 1.0) / 2.0;
        let offsets = (0..n).map(|k| [(k as f64 - c) * pitch, 0.0]).collect();
        Self::new(offsets, 8, wavelength / 2.0)
    }

    pub fn feed_offsets(&self) -> &[[f64; 2]] {
        &self.feed_offsets
    }

    pub fn element_subarray_n(&self) -> usize {
        self.element_subarray_n
    }

    pub fn element_spacing(&self) -> f64 {
        self.element_spacing
    }
}

/// Several lens + FPA units side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensletArraySpec {
    pub num_lenses: usize,
    pub pitch: f64,
}

impl LensletArraySpec {
    pub fn new(num_lenses: usize, pitch: f64, lens: &LensSpec) -> Result<Self> {
        if num_lenses == 0 {
            return invalid("need at least one lens");
        }
        if !(pitch > 0.0) {
            return invalid("lenslet pitch must be > 0");
        }
        if pitch < lens.diameter() - 1e-12 {
            return invalid(format!(
                "lenslet pitch {pitch} m is smaller than the lens diameter {} m",
                lens.diameter()
            ));
        }
        Ok(Self { num_lenses, pitch })
    }
}

/// Uniform circular aperture directivity minus material loss, dBi.
pub fn lens_directivity_dbi(spec: &LensSpec, wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return invalid("wavelength must be > 0");
    }
    let area = std::f64::consts::PI * spec.radius * spec.radius;
    let d = 4.0 * std::f64::consts::PI * area / (wavelength * wavelength);
    Ok(10.0 * d.log10() - spec.loss_db)
}

/// Beam direction produced by a feed at `offset` on the focal plane.
pub fn feed_to_beam_angle(offset: [f64; 2], spec: &LensSpec) -> Result<Angle> {
    let r = offset[0].hypot(offset[1]);
    if !(r < spec.focal_length) {
        return Err(Error::OutOfField {
            offset: r,
            focal_length: spec.focal_length,
        });
    }
    Angle::new(
        -(offset[0] / spec.focal_length).atan(),
        -(offset[1] / spec.focal_length).atan(),
    )
}

/// Inverse of [`feed_to_beam_angle`].
pub fn beam_angle_to_feed(angle: Angle, spec: &LensSpec) -> [f64; 2] {
    [
        -spec.focal_length * angle.azimuth().tan(),
        -spec.focal_length * angle.elevation().tan(),
    ]
}

/// Gain pattern (dBi) of the lens fed at `feed_offset`.
///
/// The aperture term is `2·J1(u)/u` with `u = k0·radius·sin ψ`, ψ being the
/// angle between the look direction and the beam direction (on an azimuth
/// cut ψ = θ − θ_beam). It is multiplied by the normalized array factor of
/// the feed's vertical series-fed column.
pub fn lens_beampattern(
    spec: &LensSpec,
    layout: &FeedLayout,
    feed_offset: [f64; 2],
    wavelength: f64,
    grid: &[Angle],
) -> Result<Beampattern> {
    if grid.is_empty() {
        return invalid("beampattern grid is empty");
    }
    let beam = feed_to_beam_angle(feed_offset, spec)?;
    let peak = lens_directivity_dbi(spec, wavelength)?;
    let ka = 2.0 * std::f64::consts::PI * spec.radius / wavelength;
    let column = ElevationColumn::new(layout, wavelength);
    let power = grid
        .iter()
        .map(|look| {
            let psi = look.separation(&beam);
            let aperture = airy(ka * psi.sin());
            peak + magnitude_db(aperture.abs()) + magnitude_db(column.gain(look.elevation()))
        })
        .collect();
    Beampattern::new(grid.to_vec(), power, false)
}

/// Normalized response of the series-fed column along z.
struct ElevationColumn {
    n: usize,
    phase_per_sin: f64,
}

impl ElevationColumn {
    fn new(layout: &FeedLayout, wavelength: f64) -> Self {
        Self {
            n: layout.element_subarray_n,
            phase_per_sin: 2.0 * std::f64::consts::PI * layout.element_spacing / wavelength,
        }
    }

    fn gain(&self, elevation: f64) -> f64 {
        let c = (self.n as f64 - 1.0) / 2.0;
        let s = elevation.sin();
        let sum: Complex64 = (0..self.n)
            .map(|k| Complex64::from_polar(1.0, self.phase_per_sin * (k as f64 - c) * s))
            .sum();
        sum.norm() / self.n as f64
    }
}

/// Linear-in-dB interpolation of `pattern` along azimuth.
fn interp_db(az: &[f64], db: &[f64], x: f64) -> Option<f64> {
    let n = az.len();
    if n == 1 {
        return ((x - az[0]).abs() < 1e-12).then_some(db[0]);
    }
    if x < az[0] - 1e-12 || x > az[n - 1] + 1e-12 {
        return None;
    }
    let i = az.partition_point(|&a| a <= x).clamp(1, n - 1);
    let (x0, x1) = (az[i - 1], az[i]);
    let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
    Some(db[i - 1] + t * (db[i] - db[i - 1]))
}

/// Element pattern times the array factor of `spec.num_lenses` lenslets.
///
/// The lenslets form a ULA along x at `spec.pitch`, phased with unit-modulus
/// weights matched to `steer`, so the array factor peaks at
/// `20·log10(num_lenses)`. `element` must be an azimuth cut sorted by
/// azimuth that covers every grid azimuth.
pub fn lenslet_pattern(
    element: &Beampattern,
    spec: &LensletArraySpec,
    steer: Angle,
    wavelength: f64,
    grid: &[Angle],
) -> Result<Beampattern> {
    if grid.is_empty() {
        return invalid("beampattern grid is empty");
    }
    let az: Vec<f64> = element.angles().iter().map(|a| a.azimuth()).collect();
    if az.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("element pattern must be strictly increasing in azimuth");
    }
    let geom = make_ula(spec.num_lenses, spec.pitch, wavelength)?;
    let weights = steering_vector(&geom, steer);
    let power = grid
        .iter()
        .map(|&look| {
            let el = interp_db(&az, element.power_db(), look.azimuth()).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "element pattern does not cover azimuth {:.4} deg",
                    look.azimuth().to_degrees()
                ))
            })?;
            let af = crate::array::inner(&weights, &steering_vector(&geom, look));
            Ok(el + magnitude_db(af.norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    Beampattern::new(grid.to_vec(), power, false)
}

/// Reads a measured element pattern in the beampattern CSV format.
pub fn load_measured_pattern(path: impl AsRef<Path>) -> Result<Beampattern> {
    let f = std::fs::File::open(path)?;
    Beampattern::read_csv(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{azimuth_grid, default_grid};
    use crate::special::bessel_j1;

    const LAMBDA: f64 = 0.0107;

    fn reference_lens(loss: f64) -> LensSpec {
        LensSpec::new(0.05, 0.057, 0.057, loss).unwrap()
    }

    fn single_feed() -> FeedLayout {
        FeedLayout::new(vec![[0.0, 0.0]], 8, LAMBDA / 2.0).unwrap()
    }

    #[test]
    fn directivity_of_the_28ghz_lens() {
        let d = lens_directivity_dbi(&reference_lens(0.0), LAMBDA).unwrap();
        assert!((d - 29.36).abs() < 0.01, "{d}");
    }

    #[test]
    fn directivity_matches_airy_integration() {
        // D = 4π / ∫|2J1(ka sinθ)/(ka sinθ)|² dΩ over the forward hemisphere
        let ka = 2.0 * std::f64::consts::PI * 0.05 / LAMBDA;
        let n = 200_000;
        let h = (std::f64::consts::PI / 2.0) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let th = i as f64 * h;
            let u = ka * th.sin();
            let e = if u.abs() < 1e-9 { 1.0 } else { 2.0 * bessel_j1(u) / u };
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * e * e * th.sin();
        }
        let integral = 2.0 * std::f64::consts::PI * s * h;
        let numeric = 10.0 * (4.0 * std::f64::consts::PI / integral).log10();
        let formula = lens_directivity_dbi(&reference_lens(0.0), LAMBDA).unwrap();
        assert!((numeric - formula).abs() < 0.2, "numeric {numeric} formula {formula}");
    }

    #[test]
    fn directivity_scaling() {
        let base = lens_directivity_dbi(&reference_lens(0.0), LAMBDA).unwrap();
        let big = lens_directivity_dbi(&LensSpec::new(0.1, 0.057, 0.057, 0.0).unwrap(), LAMBDA).unwrap();
        let long = lens_directivity_dbi(&reference_lens(0.0), 2.0 * LAMBDA).unwrap();
        assert!((big - base - 6.0206).abs() < 1e-3);
        assert!((base - long - 6.0206).abs() < 1e-3);
    }

    #[test]
    fn feed_mapping() {
        let spec = reference_lens(0.0);
        let a = feed_to_beam_angle([0.0, 0.0], &spec).unwrap();
        assert_eq!((a.azimuth(), a.elevation()), (0.0, 0.0));
        let off = spec.focal_length * 10f64.to_radians().tan();
        let a = feed_to_beam_angle([off, 0.0], &spec).unwrap();
        assert!((a.azimuth().to_degrees() + 10.0).abs() < 1e-12);
        let b = feed_to_beam_angle([-off, 0.003], &spec).unwrap();
        let c = feed_to_beam_angle([off, -0.003], &spec).unwrap();
        assert!((b.azimuth() + c.azimuth()).abs() < 1e-15);
        assert!((b.elevation() + c.elevation()).abs() < 1e-15);
        assert!(matches!(feed_to_beam_angle([0.06, 0.0], &spec), Err(Error::OutOfField { .. })));
    }

    #[test]
    fn feed_mapping_inverts() {
        let spec = reference_lens(0.0);
        for &x in &[-0.03, -0.011, 0.0, 0.004, 0.02] {
            for &y in &[-0.01, 0.0, 0.015] {
                let back = beam_angle_to_feed(feed_to_beam_angle([x, y], &spec).unwrap(), &spec);
                assert!((back[0] - x).abs() < 1e-12 && (back[1] - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn on_axis_pattern_peak_and_first_null() {
        let spec = reference_lens(1.5);
        let grid = azimuth_grid(-20.0, 20.0, 0.001).unwrap();
        let p = lens_beampattern(&spec, &single_feed(), [0.0, 0.0], LAMBDA, &grid).unwrap();
        let (ipk, peak) = p.peak();
        assert!(grid[ipk].azimuth().abs() < 1e-12);
        let want = lens_directivity_dbi(&spec, LAMBDA).unwrap();
        assert!((peak - want).abs() < 1e-12);
        // dense-grid search for the first null on the positive side
        let db = p.power_db();
        let first_null = (ipk + 1..db.len() - 1)
            .find(|&i| db[i] < db[i - 1] && db[i] <= db[i + 1])
            .unwrap();
        let null_deg = grid[first_null].azimuth().to_degrees();
        let want = (1.2197 * LAMBDA / 0.1f64).asin().to_degrees();
        assert!((null_deg - want).abs() < 0.01, "{null_deg} vs {want}");
        assert!((null_deg - 7.5).abs() < 0.05);
    }

    #[test]
    fn mirrored_feeds_mirror_patterns() {
        let spec = reference_lens(1.5);
        let grid = default_grid();
        let layout = single_feed();
        let a = lens_beampattern(&spec, &layout, [0.008, 0.0], LAMBDA, &grid).unwrap();
        let b = lens_beampattern(&spec, &layout, [-0.008, 0.0], LAMBDA, &grid).unwrap();
        let n = grid.len();
        for i in 0..n {
            assert!((a.power_db()[i] - b.power_db()[n - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn elevation_column_shapes_elevation_cut() {
        let spec = reference_lens(0.0);
        let layout = single_feed();
        let grid: Vec<Angle> = (-60..=60).map(|e| Angle::from_degrees(0.0, e as f64).unwrap()).collect();
        let p = lens_beampattern(&spec, &layout, [0.0, 0.0], LAMBDA, &grid).unwrap();
        // 8-element λ/2 column has its first null at sin(el) = 1/4
        let i = grid.iter().position(|a| (a.elevation().to_degrees() - 14.0).abs() < 1e-9).unwrap();
        assert!(p.power_db()[i] < p.peak().1 - 20.0);
    }

    #[test]
    fn one_lenslet_is_the_element() {
        let lens = reference_lens(1.5);
        let grid = default_grid();
        let el = lens_beampattern(&lens, &single_feed(), [0.0, 0.0], LAMBDA, &grid).unwrap();
        let spec = LensletArraySpec::new(1, 0.1, &lens).unwrap();
        let out = lenslet_pattern(&el, &spec, Angle::broadside(), LAMBDA, &grid).unwrap();
        for (a, b) in out.power_db().iter().zip(el.power_db()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lenslet_grating_lobes_on_flat_element() {
        // isolate the array factor: flat element, grating lobes at sinθ = m·λ/pitch
        let lens = reference_lens(0.0);
        let wide = azimuth_grid(-90.0, 90.0, 0.1).unwrap();
        let flat = Beampattern::new(wide.clone(), vec![0.0; wide.len()], true).unwrap();
        let spec = LensletArraySpec::new(4, 0.10, &lens).unwrap();
        let grid = azimuth_grid(-10.0, 10.0, 0.001).unwrap();
        let out = lenslet_pattern(&flat, &spec, Angle::broadside(), LAMBDA, &grid).unwrap();
        let db = out.power_db();
        let peaks: Vec<f64> = (1..db.len() - 1)
            .filter(|&i| db[i] > db[i - 1] && db[i] >= db[i + 1] && db[i] > 12.0)
            .map(|i| grid[i].azimuth().to_degrees())
            .collect();
        assert_eq!(peaks.len(), 3, "{peaks:?}");
        let spacing = (LAMBDA / 0.10f64).asin().to_degrees();
        assert!((peaks[2] - peaks[1] - spacing).abs() < 0.002);
        assert!((peaks[1] - peaks[0] - spacing).abs() < 0.002);
    }

    #[test]
    fn lenslet_bounded_and_narrower() {
        let lens = reference_lens(1.5);
        let grid = azimuth_grid(-30.0, 30.0, 0.01).unwrap();
        let el = lens_beampattern(&lens, &single_feed(), [0.0, 0.0], LAMBDA, &grid).unwrap();
        let spec = LensletArraySpec::new(4, 0.10, &lens).unwrap();
        let out = lenslet_pattern(&el, &spec, Angle::broadside(), LAMBDA, &grid).unwrap();
        let bound = 20.0 * 4f64.log10();
        for (a, b) in out.power_db().iter().zip(el.power_db()) {
            assert!(*a <= b + bound + 1e-9);
        }
        assert!(out.beamwidth_deg(3.0) < el.beamwidth_deg(3.0));
    }

    #[test]
    fn lenslet_rejects_uncovered_grid() {
        let lens = reference_lens(0.0);
        let small = azimuth_grid(-5.0, 5.0, 0.1).unwrap();
        let el = Beampattern::new(small.clone(), vec![0.0; small.len()], true).unwrap();
        let spec = LensletArraySpec::new(2, 0.1, &lens).unwrap();
        assert!(lenslet_pattern(&el, &spec, Angle::broadside(), LAMBDA, &default_grid()).is_err());
        assert!(LensletArraySpec::new(4, 0.09, &lens).is_err());
    }

    #[test]
    fn interpolation_is_linear_in_db() {
        let az = [0.0, 1.0, 2.0];
        let db = [0.0, -10.0, -4.0];
        assert_eq!(interp_db(&az, &db, 0.5), Some(-5.0));
        assert_eq!(interp_db(&az, &db, 1.5), Some(-7.0));
        assert_eq!(interp_db(&az, &db, 2.0), Some(-4.0));
        assert_eq!(interp_db(&az, &db, 2.5), None);
    }
}
