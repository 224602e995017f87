use num_complex::Complex64;

use crate::error::{Error, Result};

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Modal assurance criterion `|a^H b|^2 / ((a^H a)(b^H b))`.
///
/// ```
/// use num_complex::Complex64;
/// use shm_recover::modal::mac;
///
/// let a = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
/// let b = [Complex64::new(0.0, -3.0), Complex64::new(0.0, -6.0)];
/// assert!((mac(&a, &b).unwrap() - 1.0).abs() < 1e-12);
/// ```
pub fn mac(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "mode shapes have {} and {} components",
            a.len(),
            b.len()
        )));
    }
    let aa = inner(a, a).re;
    let bb = inner(b, b).re;
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::UndefinedMac("zero-norm mode shape".into()));
    }
    Ok((inner(a, b).norm_sqr() / (aa * bb)).clamp(0.0, 1.0))
}

pub fn mac_real(a: &[f64], b: &[f64]) -> Result<f64> {
    let lift = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
    mac(&lift(a), &lift(b))
}
