//! `{re, im}` object form used for complex numbers in every JSON artifact.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub(crate) struct ReIm {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ReIm {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ReIm> for Complex64 {
    fn from(z: ReIm) -> Self {
        Complex64::new(z.re, z.im)
    }
}

pub(crate) fn to_re_im(v: &[Complex64]) -> Vec<ReIm> {
    v.iter().map(|&z| z.into()).collect()
}

pub(crate) fn from_re_im(v: Vec<ReIm>) -> Vec<Complex64> {
    v.into_iter().map(Into::into).collect()
}
