use serde::{Deserialize, Serialize};

use super::RecordMatrix;
use crate::error::{Error, Result};

/// Per-channel extremes used to map raw accelerations onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    bounds: Vec<ChannelBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBounds {
    pub min: f64,
    pub max: f64,
}

impl ScaleParams {
    pub fn new(bounds: Vec<ChannelBounds>) -> Result<Self> {
        for (channel, b) in bounds.iter().enumerate() {
            if !(b.min.is_finite() && b.max.is_finite()) {
                return Err(Error::Numerical(format!("channel {channel} bounds are not finite")));
            }
            if b.max <= b.min {
                return Err(Error::DegenerateChannel {
                    channel,
                    value: b.min,
                });
            }
        }
        Ok(Self { bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn channel(&self, channel: usize) -> Result<ChannelBounds> {
        self.bounds.get(channel).copied().ok_or(Error::Index {
            index: channel,
            limit: self.bounds.len(),
        })
    }

    pub fn bounds(&self) -> &[ChannelBounds] {
        &self.bounds
    }
}

/// A record rescaled channel-by-channel into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    data: Vec<f64>,
    n_samples: usize,
    n_channels: usize,
    scale: ScaleParams,
    dt: f64,
}

impl NormalizedMatrix {
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scale(&self) -> &ScaleParams {
        &self.scale
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, t: usize, channel: usize) -> f64 {
        self.data[t * self.n_channels + channel]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_channels..(t + 1) * self.n_channels]
    }

    pub fn column(&self, channel: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(channel)
            .step_by(self.n_channels)
            .copied()
            .collect()
    }
}

/// Min-max normalization of every channel over the whole record.
pub fn normalize(records: &RecordMatrix) -> Result<NormalizedMatrix> {
    let ns = records.n_channels();
    let mut bounds = vec![
        ChannelBounds {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        ns
    ];
    for t in 0..records.n_samples() {
        for (b, &v) in bounds.iter_mut().zip(records.row(t)) {
            b.min = b.min.min(v);
            b.max = b.max.max(v);
        }
    }
    let scale = ScaleParams::new(bounds)?;
    normalize_with(records, &scale)
}

/// Applies previously computed scale parameters. Values outside the stored
/// envelope map outside `[0, 1]`; nothing is clamped.
pub fn normalize_with(records: &RecordMatrix, scale: &ScaleParams) -> Result<NormalizedMatrix> {
    let ns = records.n_channels();
    if scale.len() != ns {
        return Err(Error::Dimension(format!(
            "scale has {} channels, record has {ns}",
            scale.len()
        )));
    }
    let data = records
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let b = scale.bounds[i % ns];
            (v - b.min) / (b.max - b.min)
        })
        .collect();
    Ok(NormalizedMatrix {
        data,
        n_samples: records.n_samples(),
        n_channels: ns,
        scale: scale.clone(),
        dt: records.dt(),
    })
}

/// Maps normalized values of one channel back to physical units.
pub fn denormalize(values: &[f64], channel: usize, scale: &ScaleParams) -> Result<Vec<f64>> {
    let b = scale.channel(channel)?;
    Ok(values.iter().map(|x| x * (b.max - b.min) + b.min).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(col: Vec<f64>) -> RecordMatrix {
        RecordMatrix::from_columns(&[col], 0.01).unwrap()
    }

    #[test]
    fn maps_endpoints_and_midpoint() {
        assert_eq!(normalize(&single(vec![0.0, 1.0, 2.0])).unwrap().data(), &[0.0, 0.5, 1.0]);
        assert_eq!(normalize(&single(vec![-2.0, 0.0, 2.0])).unwrap().data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_channel_is_rejected() {
        let rec = RecordMatrix::from_columns(&[vec![1.0, 2.0, 3.0], vec![5.0; 3]], 0.01).unwrap();
        match normalize(&rec) {
            Err(Error::DegenerateChannel { channel: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverse_map() {
        let scale = ScaleParams::new(vec![
            ChannelBounds { min: 0.0, max: 2.0 },
            ChannelBounds { min: -2.0, max: 2.0 },
        ])
        .unwrap();
        assert_eq!(denormalize(&[0.0, 0.5, 1.0], 0, &scale).unwrap(), vec![0.0, 1.0, 2.0]);
        assert_eq!(denormalize(&[0.25], 1, &scale).unwrap(), vec![-1.0]);
        assert!(matches!(
            denormalize(&[0.0], 2, &scale),
            Err(Error::Index { index: 2, limit: 2 })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_and_bounds(
            cols in (1usize..5, 2usize..40).prop_flat_map(|(ns, nt)| {
                proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, nt), ns)
            })
        ) {
            let rec = RecordMatrix::from_columns(&cols, 0.01).unwrap();
            let norm = match normalize(&rec) {
                Ok(n) => n,
                Err(Error::DegenerateChannel { .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            for (j, source) in cols.iter().enumerate() {
                let col = norm.column(j);
                prop_assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!(col.contains(&0.0));
                prop_assert!(col.contains(&1.0));
                let back = denormalize(&col, j, norm.scale()).unwrap();
                let b = norm.scale().channel(j).unwrap();
                let span = b.max.abs().max(b.min.abs());
                for (x, y) in back.iter().zip(source) {
                    prop_assert!((x - y).abs() <= 1e-12 * span.max(y.abs()));
                }
            }
        }
    }
}
