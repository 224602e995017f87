use crate::error::{Error, Result};
use crate::nn::{Network, Tensor};
use crate::signal::{denormalize, normalize_with, rmse, MaskSpec, RecordMatrix, ScaleParams, WindowSet};

fn window_len(model: &Network) -> Result<(usize, usize)> {
    match *model.input_shape() {
        [h, w, 1] => Ok((h, w)),
        ref s => Err(Error::Config(format!("model input {s:?} is not a single-channel window"))),
    }
}

fn check_arity(model: &Network, mask: &MaskSpec) -> Result<usize> {
    let (length, _) = window_len(model)?;
    if model.output_len() != length * mask.len() {
        return Err(Error::Config(format!(
            "model predicts {} samples but the mask names {} sensor(s) of {length} samples",
            model.output_len(),
            mask.len()
        )));
    }
    Ok(length)
}

/// Predicts the faulted channels of one normalized window, in normalized
/// units. Faulted columns are zeroed first, so their content is ignored.
pub fn predict_window(model: &Network, window: &[f64], mask: &MaskSpec) -> Result<Vec<Vec<f64>>> {
    let length = check_arity(model, mask)?;
    let (h, w) = window_len(model)?;
    if window.len() != h * w {
        return Err(Error::Dimension(format!(
            "window holds {} values, model expects {h}x{w}",
            window.len()
        )));
    }
    mask.check_channels(w)?;
    let mut input = window.to_vec();
    for &j in mask.faulted() {
        for t in 0..h {
            input[t * w + j] = 0.0;
        }
    }
    let out = model.predict(&Tensor::new(vec![h, w, 1], input)?)?;
    Ok(out.values().chunks(length).map(<[f64]>::to_vec).collect())
}

/// Recovers the faulted sensors of one window in physical units: output
/// element `k * length + t` belongs to the `k`-th sensor of the mask.
pub fn recover(model: &Network, window: &[f64], scale: &ScaleParams, mask: &MaskSpec) -> Result<Vec<Vec<f64>>> {
    predict_window(model, window, mask)?
        .iter()
        .zip(mask.faulted())
        .map(|(seg, &j)| denormalize(seg, j, scale))
        .collect()
}

/// Largest absolute deviation over a window, in percent of the normalized
/// range.
pub fn max_window_error(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "window error needs equal nonzero lengths, got {} and {}",
            pred.len(),
            reference.len()
        )));
    }
    let max = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r).abs())
        .fold(0.0, f64::max);
    Ok(100.0 * max)
}

/// Window start offsets covering `n_samples`: back-to-back windows plus one
/// window aligned to the end when the length does not divide evenly.
pub fn covering_starts(n_samples: usize, length: usize) -> Result<Vec<usize>> {
    if n_samples < length {
        return Err(Error::InsufficientData {
            available: n_samples,
            required: length,
        });
    }
    let mut starts: Vec<usize> = (0..=n_samples - length).step_by(length).collect();
    if starts.last() != Some(&(n_samples - length)) {
        starts.push(n_samples - length);
    }
    Ok(starts)
}

/// Rebuilds the faulted channels over the full record and splices them in.
/// Samples covered by two windows take the mean of both predictions.
pub fn recover_record(
    model: &Network,
    records: &RecordMatrix,
    scale: &ScaleParams,
    mask: &MaskSpec,
) -> Result<RecordMatrix> {
    let length = check_arity(model, mask)?;
    let norm = normalize_with(records, scale)?;
    let ns = records.n_channels();
    if window_len(model)?.1 != ns {
        return Err(Error::Dimension(format!(
            "model expects {} channels, record has {ns}",
            window_len(model)?.1
        )));
    }
    let nt = records.n_samples();
    let mut sums = vec![vec![0.0; nt]; mask.len()];
    let mut counts = vec![0u32; nt];
    for start in covering_starts(nt, length)? {
        let block = &norm.data()[start * ns..(start + length) * ns];
        let segments = predict_window(model, block, mask)?;
        for (sum, seg) in sums.iter_mut().zip(&segments) {
            for (t, v) in seg.iter().enumerate() {
                sum[start + t] += v;
            }
        }
        for c in &mut counts[start..start + length] {
            *c += 1;
        }
    }
    let mut out = records.clone();
    for (sum, &j) in sums.iter_mut().zip(mask.faulted()) {
        sum.iter_mut().zip(&counts).for_each(|(s, &c)| *s /= f64::from(c));
        out.set_column(j, &denormalize(sum, j, scale)?)?;
    }
    Ok(out)
}

/// Validation RMSE of predicting every faulted sample by that sensor's
/// mean over the training targets.
pub fn mean_predictor_rmse(train: &WindowSet, val: &WindowSet, n_faulted: usize) -> Result<f64> {
    let length = train.length;
    if train.target_len() != length * n_faulted || val.target_len() != length * n_faulted {
        return Err(Error::Dimension("target length does not match faulted count".into()));
    }
    let means: Vec<f64> = (0..n_faulted)
        .map(|k| {
            let sum: f64 = train.targets.iter().map(|t| t[k * length..(k + 1) * length].iter().sum::<f64>()).sum();
            sum / (train.len() * length) as f64
        })
        .collect();
    let pred: Vec<f64> = val
        .targets
        .iter()
        .flat_map(|_| means.iter().flat_map(|&m| std::iter::repeat_n(m, length)))
        .collect();
    let truth: Vec<f64> = val.targets.concat();
    rmse(&pred, &truth)
}
