use nalgebra::DMatrix;
use num_complex::Complex64;

use super::spectral::SpectralMatrix;
use crate::error::{Error, Result};

/// Singular value decomposition of every spectral line.
#[derive(Debug, Clone, PartialEq)]
pub struct FddResult {
    pub frequencies: Vec<f64>,
    /// Singular values per line, largest first.
    pub singular_values: Vec<Vec<f64>>,
    /// Unit left singular vector of the largest singular value per line.
    pub first_vectors: Vec<Vec<Complex64>>,
}

impl FddResult {
    /// The first singular value across frequency.
    pub fn first_curve(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s[0]).collect()
    }
}

/// Rotates a vector so its largest-magnitude component is real and positive.
pub fn normalize_phase(v: &mut [Complex64]) {
    let mut best = 0;
    for (i, c) in v.iter().enumerate() {
        if c.norm() > v[best].norm() {
            best = i;
        }
    }
    let pivot = v[best];
    if pivot.norm() == 0.0 {
        return;
    }
    let rot = pivot.conj() / pivot.norm();
    for c in v.iter_mut() {
        *c *= rot;
    }
}

pub fn fdd_decompose(spectra: &SpectralMatrix) -> Result<FddResult> {
    let ns = spectra.n_channels();
    let mut singular_values = Vec::with_capacity(spectra.n_lines());
    let mut first_vectors = Vec::with_capacity(spectra.n_lines());
    for (k, &f) in spectra.frequencies().iter().enumerate() {
        let g = DMatrix::from_row_slice(ns, ns, spectra.line(k));
        let svd = g
            .try_svd(true, false, 1e-14, 10_000)
            .ok_or_else(|| Error::Numerical(format!("SVD did not converge at {f} Hz (line {k})")))?;
        let u = svd.u.as_ref().expect("left vectors requested");
        let mut order: Vec<usize> = (0..ns).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut first: Vec<Complex64> = u.column(order[0]).iter().copied().collect();
        normalize_phase(&mut first);
        singular_values.push(order.iter().map(|&i| svd.singular_values[i]).collect());
        first_vectors.push(first);
    }
    Ok(FddResult {
        frequencies: spectra.frequencies().to_vec(),
        singular_values,
        first_vectors,
    })
}

/// Topographic prominence of the local maximum at `i`: its height above the
/// higher of the two lowest points reached before climbing past it on
/// either side.
fn prominence(curve: &[f64], i: usize) -> f64 {
    let peak = curve[i];
    let mut left_min = peak;
    for &v in curve[..i].iter().rev() {
        if v > peak {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = peak;
    for &v in &curve[i + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

/// Indices of interior local maxima whose prominence is at least
/// `min_prominence`, keeping the `max_peaks` most prominent, returned in
/// increasing frequency order. A plateau counts once, at its first sample.
pub fn pick_peaks(curve: &[f64], min_prominence: f64, max_peaks: usize) -> Vec<usize> {
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    let n = curve.len();
    let mut i = 1;
    while i + 1 < n {
        if curve[i] > curve[i - 1] {
            let mut j = i;
            while j + 1 < n && curve[j + 1] == curve[i] {
                j += 1;
            }
            if j + 1 < n && curve[j + 1] < curve[i] {
                let p = prominence(curve, i);
                if p >= min_prominence {
                    peaks.push((i, p));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks.truncate(max_peaks);
    let mut idx: Vec<usize> = peaks.into_iter().map(|p| p.0).collect();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::spectral::{cpsd, WelchConfig};
    use crate::signal::RecordMatrix;
    use proptest::prelude::*;

    #[test]
    fn monotone_curve_has_no_peaks() {
        let up: Vec<f64> = (0..50).map(f64::from).collect();
        assert!(pick_peaks(&up, 0.0, 10).is_empty());
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert!(pick_peaks(&down, 0.0, 10).is_empty());
    }

    #[test]
    fn triangular_bump_apex() {
        let curve: Vec<f64> = (0..21).map(|i| 10.0 - (i as f64 - 7.0).abs()).collect();
        assert_eq!(pick_peaks(&curve, 1.0, 5), vec![7]);
    }

    #[test]
    fn prominence_filters_ripples_and_limits_count() {
        let curve = [0.0, 5.0, 4.8, 4.9, 1.0, 3.0, 0.5, 8.0, 0.0];
        // Peaks at 1 (5.0), 3 (ripple, 0.1), 5 (2.5), 7 (8.0).
        assert_eq!(pick_peaks(&curve, 0.5, 10), vec![1, 5, 7]);
        assert_eq!(pick_peaks(&curve, 0.5, 2), vec![1, 7]);
        assert_eq!(pick_peaks(&curve, 0.0, 10), vec![1, 3, 5, 7]);
    }

    #[test]
    fn plateau_counts_once() {
        let curve = [0.0, 2.0, 2.0, 2.0, 0.0];
        assert_eq!(pick_peaks(&curve, 1.0, 5), vec![1]);
    }

    #[test]
    fn phase_pivot_is_real_positive() {
        let mut v = vec![Complex64::new(0.1, 0.2), Complex64::new(0.0, -0.9), Complex64::new(0.3, 0.0)];
        normalize_phase(&mut v);
        assert!(v[1].im.abs() < 1e-15 && v[1].re > 0.0);
        assert!((v[1].re - 0.9).abs() < 1e-15);
    }

    #[test]
    fn single_source_is_rank_one_with_its_shape() {
        // Every channel carries the same narrowband signal scaled by a shape.
        let shape = [0.5, -1.0, 0.25, 0.8];
        let fs = 64.0;
        let base: Vec<f64> = (0..2048)
            .map(|t| {
                let x = t as f64 / fs;
                (2.0 * std::f64::consts::PI * 9.0 * x).sin() + 0.3 * (2.0 * std::f64::consts::PI * 17.5 * x).cos()
            })
            .collect();
        let cols: Vec<Vec<f64>> = shape.iter().map(|s| base.iter().map(|b| s * b).collect()).collect();
        let rec = RecordMatrix::from_columns(&cols, 1.0 / fs).unwrap();
        let fdd = fdd_decompose(&cpsd(&rec, WelchConfig::default()).unwrap()).unwrap();
        let curve = fdd.first_curve();
        let k = pick_peaks(&curve, 0.0, 1)[0];
        assert!((fdd.frequencies[k] - 9.0).abs() <= fdd.frequencies[0]);
        let s = &fdd.singular_values[k];
        assert!(s[1] < 1e-10 * s[0]);
        let norm: f64 = shape.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (c, x) in fdd.first_vectors[k].iter().zip(shape) {
            assert!((c.norm() - x.abs() / norm).abs() < 1e-9);
        }
        assert!(fdd.singular_values.iter().all(|s| s.windows(2).all(|w| w[0] >= w[1])));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn singular_values_descend_and_vectors_are_unit(ns in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 256;
            let data: Vec<f64> = (0..n * ns).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rec = RecordMatrix::new(data, n, ns, 0.01).unwrap();
            let fdd = fdd_decompose(&cpsd(&rec, WelchConfig { segment_len: 64, overlap_fraction: 0.5 }).unwrap()).unwrap();
            for (sv, v) in fdd.singular_values.iter().zip(&fdd.first_vectors) {
                prop_assert!(sv.iter().all(|&s| s >= 0.0));
                prop_assert!(sv.windows(2).all(|w| w[0] >= w[1]));
                let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                prop_assert!((norm - 1.0).abs() < 1e-10);
            }
        }
    }
}
