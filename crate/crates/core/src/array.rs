//! Array geometry, steering vectors, array factors and beampatterns.
//!
//! Conventions used throughout the crate:
//!
//! - The unit propagation direction for azimuth `az` and elevation `el` is
//!   `u = (cos(el)·sin(az), cos(el)·cos(az), sin(el))`, so broadside
//!   `(0, 0)` is the +y axis and linear arrays lie along x.
//! - Steering vectors use the receive sign, `a_k = exp(+j·k0·⟨u, p_k⟩)`, and
//!   are unnormalized (every entry has unit modulus, so `‖a‖ = √N`).
//! - Weights act through the conjugate-linear inner product
//!   `⟨w, a⟩ = Σ_k conj(w_k)·a_k = wᴴa`. A beam matched to direction θ0 uses
//!   `w ∝ a(θ0)`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Floor applied to `20·log10|AF|` so exact nulls stay finite.
pub const POWER_FLOOR_DB: f64 = -300.0;

/// Direction of arrival or departure, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    azimuth: f64,
    elevation: f64,
}

impl Angle {
    /// Builds an angle, wrapping azimuth into `[−π, π)`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return invalid("angle components must be finite");
        }
        if elevation.abs() > PI / 2.0 + 1e-12 {
            return invalid(format!("elevation {elevation} rad outside [-pi/2, pi/2]"));
        }
        Ok(Self {
            azimuth: wrap_pi(azimuth),
            elevation: elevation.clamp(-PI / 2.0, PI / 2.0),
        })
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    /// In-plane (elevation 0) direction, degrees. Panics on non-finite input.
    pub fn azimuth_deg(azimuth_deg: f64) -> Self {
        Self::from_degrees(azimuth_deg, 0.0).expect("finite azimuth")
    }

    pub fn broadside() -> Self {
        Self {
            azimuth: 0.0,
            elevation: 0.0,
        }
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    /// Unit propagation direction.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        [ce * sa, ce * ca, se]
    }

    /// Great-circle separation to another direction, radians in `[0, π]`.
    pub fn separation(&self, other: &Angle) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = cross.iter().map(|c| c * c).sum::<f64>().sqrt();
        sin.atan2(dot)
    }
}

fn wrap_pi(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return 2π for tiny negative inputs
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Element positions (meters) and carrier wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<[f64; 3]>,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>, wavelength: f64) -> Result<Self> {
        if positions.is_empty() {
            return invalid("array needs at least one element");
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return invalid(format!("wavelength must be positive, got {wavelength}"));
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return invalid("element positions must be finite");
        }
        for (i, p) in positions.iter().enumerate() {
            if positions[..i].contains(p) {
                return invalid(format!("element {i} duplicates an earlier position"));
            }
        }
        Ok(Self {
            positions,
            wavelength,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// Uniform linear array of `n` elements along x, centered on the origin.
pub fn make_ula(n: usize, spacing: f64, wavelength: f64) -> Result<ArrayGeometry> {
    if n == 0 {
        return invalid("ULA needs at least one element");
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return invalid(format!("ULA spacing must be positive, got {spacing}"));
    }
    let center = (n as f64 - 1.0) / 2.0;
    let positions = (0..n)
        .map(|k| [(k as f64 - center) * spacing, 0.0, 0.0])
        .collect();
    ArrayGeometry::new(positions, wavelength)
}

/// Array response toward `angle`: `a_k = exp(+j·k0·⟨u, p_k⟩)`.
pub fn steering_vector(geom: &ArrayGeometry, angle: Angle) -> Vec<Complex64> {
    let u = angle.unit_vector();
    let k0 = geom.wavenumber();
    geom.positions
        .iter()
        .map(|p| {
            let path = u[0] * p[0] + u[1] * p[1] + u[2] * p[2];
            Complex64::from_polar(1.0, k0 * path)
        })
        .collect()
}

/// `Σ_k conj(w_k)·a_k` with terms accumulated in ascending element order.
pub fn inner(weights: &[Complex64], v: &[Complex64]) -> Complex64 {
    weights
        .iter()
        .zip(v)
        .fold(Complex64::new(0.0, 0.0), |acc, (w, x)| acc + w.conj() * x)
}

/// Complex array factor `⟨weights, a(angle)⟩`.
pub fn array_factor(weights: &[Complex64], geom: &ArrayGeometry, angle: Angle) -> Result<Complex64> {
    if weights.len() != geom.len() {
        return invalid(format!(
            "weight count {} does not match element count {}",
            weights.len(),
            geom.len()
        ));
    }
    Ok(inner(weights, &steering_vector(geom, angle)))
}

pub fn magnitude_db(x: f64) -> f64 {
    (20.0 * x.log10()).max(POWER_FLOOR_DB)
}

/// Power pattern over a grid of directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Beampattern {
    angles: Vec<Angle>,
    power_db: Vec<f64>,
    normalized: bool,
}

impl Beampattern {
    pub fn new(angles: Vec<Angle>, power_db: Vec<f64>, normalized: bool) -> Result<Self> {
        if angles.len() != power_db.len() {
            return invalid(format!(
                "{} angles but {} power values",
                angles.len(),
                power_db.len()
            ));
        }
        if angles.is_empty() {
            return invalid("beampattern needs at least one grid point");
        }
        if power_db.iter().any(|p| p.is_nan()) {
            return invalid("beampattern contains NaN");
        }
        let p = Self {
            angles,
            power_db,
            normalized,
        };
        if normalized && p.peak().1.abs() > 1e-9 {
            return invalid("normalized pattern must peak at 0 dB");
        }
        Ok(p)
    }

    pub fn angles(&self) -> &[Angle] {
        &self.angles
    }

    pub fn power_db(&self) -> &[f64] {
        &self.power_db
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Grid index and value of the maximum (first occurrence).
    pub fn peak(&self) -> (usize, f64) {
        self.power_db
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best })
    }

    pub fn peak_angle(&self) -> Angle {
        self.angles[self.peak().0]
    }

    /// Shifts the pattern so that its maximum sits at 0 dB.
    pub fn normalize(mut self) -> Self {
        let peak = self.peak().1;
        for p in &mut self.power_db {
            *p -= peak;
        }
        self.normalized = true;
        self
    }

    /// Width in degrees of the contiguous region around the peak that stays
    /// within `drop_db` of it, linearly interpolated along azimuth.
    pub fn beamwidth_deg(&self, drop_db: f64) -> f64 {
        let (ipk, peak) = self.peak();
        let level = peak - drop_db;
        let az: Vec<f64> = self.angles.iter().map(|a| a.azimuth().to_degrees()).collect();
        let p = &self.power_db;
        let crossing = |i: usize, j: usize| {
            let t = (level - p[i]) / (p[j] - p[i]);
            az[i] + t * (az[j] - az[i])
        };
        let mut lo = az[0];
        for i in (1..=ipk).rev() {
            if p[i - 1] < level {
                lo = crossing(i - 1, i);
                break;
            }
        }
        let mut hi = az[az.len() - 1];
        for i in ipk..p.len() - 1 {
            if p[i + 1] < level {
                hi = crossing(i, i + 1);
                break;
            }
        }
        hi - lo
    }

    /// Writes the `azimuth_deg,elevation_deg,power_db` CSV form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["azimuth_deg", "elevation_deg", "power_db"])
            .map_err(csv_io)?;
        for (a, p) in self.angles.iter().zip(&self.power_db) {
            w.write_record([
                fmt_f64(a.azimuth().to_degrees()),
                fmt_f64(a.elevation().to_degrees()),
                fmt_f64(*p),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the CSV form, validating every row.
    ///
    /// The grid must be strictly increasing in (azimuth, elevation) order, so
    /// both azimuth cuts and elevation cuts are accepted.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut records = rdr.records();
        let header = match records.next() {
            None => return parse_err(1, "empty file"),
            Some(r) => r.map_err(|e| csv_parse(1, e))?,
        };
        let expected = ["azimuth_deg", "elevation_deg", "power_db"];
        if header.len() != 3 || header.iter().zip(expected).any(|(a, b)| a != b) {
            return parse_err(1, format!("expected header {}", expected.join(",")));
        }
        let mut angles = Vec::new();
        let mut power = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for (idx, rec) in records.enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| csv_parse(line, e))?;
            if rec.len() != 3 {
                return parse_err(line, format!("expected 3 fields, found {}", rec.len()));
            }
            let mut vals = [0.0; 3];
            for (v, field) in vals.iter_mut().zip(rec.iter()) {
                *v = field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse {
                        line,
                        message: format!("not a number: {field:?}"),
                    })?;
                if !v.is_finite() {
                    return parse_err(line, format!("non-finite value {field:?}"));
                }
            }
            let key = (vals[0], vals[1]);
            if let Some(p) = prev {
                if key.partial_cmp(&p) != Some(std::cmp::Ordering::Greater) {
                    return parse_err(line, "grid is not strictly increasing");
                }
            }
            prev = Some(key);
            let angle = Angle::from_degrees(vals[0], vals[1]).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            angles.push(angle);
            power.push(vals[2]);
        }
        if angles.is_empty() {
            return parse_err(2, "no data rows");
        }
        let normalized = power.iter().copied().fold(f64::NEG_INFINITY, f64::max).abs() <= 1e-9;
        Beampattern::new(angles, power, normalized)
    }
}

fn parse_err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        message: message.into(),
    })
}

fn csv_parse(line: usize, e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map(|p| p.line() as usize).unwrap_or(line),
        message: e.to_string(),
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `20·log10|AF|` over `grid`, optionally peak-normalized.
pub fn beampattern(
    weights: &[Complex64],
    geom: &ArrayGeometry,
    grid: &[Angle],
    normalize: bool,
) -> Result<Beampattern> {
    if grid.is_empty() {
        return invalid("beampattern grid is empty");
    }
    let power = grid
        .iter()
        .map(|&a| array_factor(weights, geom, a).map(|af| magnitude_db(af.norm())))
        .collect::<Result<Vec<_>>>()?;
    let p = Beampattern::new(grid.to_vec(), power, false)?;
    Ok(if normalize { p.normalize() } else { p })
}

/// Azimuth cut at elevation 0 from `start` to `stop` degrees inclusive.
pub fn azimuth_grid(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Vec<Angle>> {
    if !(step_deg > 0.0) || stop_deg < start_deg {
        return invalid("azimuth grid needs step > 0 and stop >= start");
    }
    let n = ((stop_deg - start_deg) / step_deg + 1e-9).floor() as usize + 1;
    (0..n)
        .map(|i| Angle::from_degrees(start_deg + i as f64 * step_deg, 0.0))
        .collect()
}

/// The −90°..90° azimuth cut in 0.1° steps used by sweeps.
pub fn default_grid() -> Vec<Angle> {
    azimuth_grid(-90.0, 90.0, 0.1).expect("static grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn ula_single_element_at_origin() {
        let g = make_ula(1, 0.01, 0.01).unwrap();
        assert_eq!(g.positions(), &[[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn ula_is_centered() {
        let lam = 1.0;
        let g = make_ula(4, lam / 2.0, lam).unwrap();
        let xs: Vec<f64> = g.positions().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn lenslet_pitch_geometry() {
        let g = make_ula(4, 0.10, 0.0107).unwrap();
        let xs: Vec<f64> = g.positions().iter().map(|p| p[0]).collect();
        for (x, want) in xs.iter().zip([-0.15, -0.05, 0.05, 0.15]) {
            assert!((x - want).abs() < 1e-15);
        }
    }

    #[test]
    fn ula_rejects_bad_arguments() {
        assert!(make_ula(0, 0.1, 0.1).is_err());
        assert!(make_ula(2, 0.0, 0.1).is_err());
        assert!(make_ula(2, 0.1, -1.0).is_err());
    }

    #[test]
    fn geometry_rejects_duplicates() {
        let p = vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        assert!(ArrayGeometry::new(p, 1.0).is_err());
    }

    #[test]
    fn broadside_is_all_ones() {
        let g = ArrayGeometry::new(vec![[0.0, 0.0, 0.0], [0.3, 0.0, 0.1], [-0.2, 0.0, 0.7]], 0.05)
            .unwrap();
        for a in steering_vector(&g, Angle::broadside()) {
            assert!(close(a, Complex64::new(1.0, 0.0), 1e-15));
        }
    }

    #[test]
    fn steering_phases_at_30_degrees() {
        // k0·x·sin30° = 2π·{-0.75,-0.25,0.25,0.75}·0.5 evaluated by hand
        let g = make_ula(4, 0.5, 1.0).unwrap();
        let a = steering_vector(&g, Angle::azimuth_deg(30.0));
        for (ak, frac) in a.iter().zip([-0.75, -0.25, 0.25, 0.75]) {
            assert!(close(*ak, Complex64::from_polar(1.0, PI * frac), 1e-12));
        }
    }

    #[test]
    fn negated_angle_conjugates() {
        let g = make_ula(5, 0.37, 1.0).unwrap();
        let p = steering_vector(&g, Angle::azimuth_deg(23.0));
        let m = steering_vector(&g, Angle::azimuth_deg(-23.0));
        for (x, y) in p.iter().zip(&m) {
            assert!(close(*x, y.conj(), 1e-12));
        }
    }

    #[test]
    fn array_factor_coherent_sums() {
        let g = make_ula(4, 0.5, 1.0).unwrap();
        let avg = vec![Complex64::new(0.25, 0.0); 4];
        let ones = vec![Complex64::new(1.0, 0.0); 4];
        let b = Angle::broadside();
        assert!((array_factor(&avg, &g, b).unwrap().norm() - 1.0).abs() < 1e-12);
        let af = array_factor(&ones, &g, b).unwrap().norm();
        assert!((af - 4.0).abs() < 1e-12);
        assert!((magnitude_db(af) - 12.0412).abs() < 1e-4);
    }

    #[test]
    fn first_null_at_30_degrees() {
        let g = make_ula(4, 0.5, 1.0).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); 4];
        assert!(array_factor(&ones, &g, Angle::azimuth_deg(30.0)).unwrap().norm() < 1e-12);
        // brute-force scan for the first minimum on a 0.01° grid
        let (mut best, mut arg) = (f64::MAX, 0.0);
        for i in 1..=6000 {
            let th = i as f64 * 0.01;
            let v = ones
                .iter()
                .zip(steering_vector(&g, Angle::azimuth_deg(th)))
                .map(|(w, a)| w * a)
                .sum::<Complex64>()
                .norm();
            if v < best {
                best = v;
                arg = th;
            }
        }
        assert!((arg - 30.0).abs() < 0.011, "first null found at {arg}");
    }

    #[test]
    fn array_factor_length_mismatch() {
        let g = make_ula(4, 0.5, 1.0).unwrap();
        assert!(array_factor(&[Complex64::new(1.0, 0.0)], &g, Angle::broadside()).is_err());
    }

    #[test]
    fn single_element_pattern_is_flat() {
        let g = make_ula(1, 0.5, 1.0).unwrap();
        let p = beampattern(&[Complex64::new(0.3, -0.2)], &g, &default_grid(), true).unwrap();
        assert!(p.power_db().iter().all(|v| v.abs() < 1e-12));
        assert!(p.is_normalized());
    }

    #[test]
    fn four_element_pattern_peak_and_nulls() {
        let g = make_ula(4, 0.5, 1.0).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); 4];
        let grid = default_grid();
        let p = beampattern(&ones, &g, &grid, false).unwrap();
        let (ipk, peak) = p.peak();
        assert!((peak - 20.0 * 4f64.log10()).abs() < 1e-9);
        assert!(grid[ipk].azimuth().abs() < 1e-12);
        for null in [-90.0, -30.0, 30.0, 90.0] {
            let i = grid
                .iter()
                .position(|a| (a.azimuth().to_degrees() - null).abs() < 1e-6)
                .unwrap();
            assert!(p.power_db()[i] < -200.0, "null at {null}: {}", p.power_db()[i]);
        }
    }

    #[test]
    fn normalized_peak_is_zero() {
        let g = make_ula(6, 0.4, 1.0).unwrap();
        let w = steering_vector(&g, Angle::azimuth_deg(12.0));
        let p = beampattern(&w, &g, &default_grid(), true).unwrap();
        assert!(p.peak().1.abs() < 1e-9);
    }

    #[test]
    fn empty_grid_rejected() {
        let g = make_ula(2, 0.5, 1.0).unwrap();
        assert!(beampattern(&[Complex64::new(1.0, 0.0); 2], &g, &[], false).is_err());
    }

    #[test]
    fn angle_wraps_azimuth() {
        let a = Angle::new(3.0 * PI / 2.0, 0.0).unwrap();
        assert!((a.azimuth() + PI / 2.0).abs() < 1e-12);
        assert!(Angle::new(0.0, 2.0).is_err());
        assert!(Angle::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn beamwidth_of_uniform_ula() {
        // 4-element λ/2 ULA: half-power at sinθ ≈ ±0.22770 (|sin(2πs)/(4 sin(πs/2))|² = 1/2)
        let g = make_ula(4, 0.5, 1.0).unwrap();
        let grid = azimuth_grid(-90.0, 90.0, 0.01).unwrap();
        let p = beampattern(&[Complex64::new(1.0, 0.0); 4], &g, &grid, true).unwrap();
        let bw = p.beamwidth_deg(3.0103);
        let want = 2.0 * 0.22770f64.asin().to_degrees();
        assert!((bw - want).abs() < 0.1, "{bw} vs {want}");
    }

    #[test]
    fn csv_layout() {
        let p = Beampattern::new(vec![Angle::azimuth_deg(-1.0), Angle::azimuth_deg(1.0)], vec![-3.0, 0.0], true)
            .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "azimuth_deg,elevation_deg,power_db");
        assert_eq!(lines.len(), 3);
        assert!(!text.contains('\r'));
        let az: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert!((az + 1.0).abs() < 1e-12);
        assert!(lines[1].ends_with(",0.0000000000000000e0,-3.0000000000000000e0"));
    }
}
