use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Time-by-sensor matrix of raw accelerations.
///
/// Stored row-major: row `t` holds one sample from every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordMatrix {
    data: Vec<f64>,
    n_samples: usize,
    n_channels: usize,
    dt: f64,
}

impl RecordMatrix {
    pub fn new(data: Vec<f64>, n_samples: usize, n_channels: usize, dt: f64) -> Result<Self> {
        if n_samples == 0 || n_channels == 0 {
            return Err(Error::Dimension(format!(
                "record must have at least one sample and one channel, got {n_samples}x{n_channels}"
            )));
        }
        if data.len() != n_samples * n_channels {
            return Err(Error::Dimension(format!(
                "{} values do not fill a {n_samples}x{n_channels} record",
                data.len()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("sampling interval must be positive, got {dt}")));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value at sample {}, channel {}",
                pos / n_channels,
                pos % n_channels
            )));
        }
        Ok(Self {
            data,
            n_samples,
            n_channels,
            dt,
        })
    }

    /// Builds a record from per-channel columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>], dt: f64) -> Result<Self> {
        let n_channels = columns.len();
        let n_samples = columns.first().map_or(0, Vec::len);
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n_samples) {
            return Err(Error::Dimension(format!(
                "column {j} has {} samples, expected {n_samples}",
                c.len()
            )));
        }
        let mut data = Vec::with_capacity(n_samples * n_channels);
        for t in 0..n_samples {
            data.extend(columns.iter().map(|c| c[t]));
        }
        Self::new(data, n_samples, n_channels, dt)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sampling_rate(&self) -> f64 {
        1.0 / self.dt
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

    /// Replaces one channel in place.
    pub fn set_column(&mut self, channel: usize, values: &[f64]) -> Result<()> {
        if channel >= self.n_channels {
            return Err(Error::Index {
                index: channel,
                limit: self.n_channels,
            });
        }
        if values.len() != self.n_samples {
            return Err(Error::Dimension(format!(
                "replacement column has {} samples, record has {}",
                values.len(),
                self.n_samples
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("replacement column is not finite".into()));
        }
        for (t, v) in values.iter().enumerate() {
            self.data[t * self.n_channels + channel] = *v;
        }
        Ok(())
    }

    /// Serializes in the record CSV format. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 20);
        let _ = writeln!(out, "# dt={} channels={}", self.dt, self.n_channels);
        for t in 0..self.n_samples {
            for (j, v) in self.row(t).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writer.write_all(self.to_csv_string().as_bytes())
    }
}

fn parse_header(line: &str) -> Result<(f64, usize)> {
    let err = |message: String| Error::Parse { line: 1, message };
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| err("header must start with '#'".into()))?;
    let mut dt = None;
    let mut channels = None;
    for token in body.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| err(format!("malformed header token '{token}'")))?;
        match key {
            "dt" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| err(format!("dt '{value}' is not a number")))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(err(format!("dt must be positive, got {value}")));
                }
                dt = Some(v);
            }
            "channels" => {
                let v: usize = value
                    .parse()
                    .map_err(|_| err(format!("channels '{value}' is not an integer")))?;
                if v == 0 {
                    return Err(err("channels must be at least 1".into()));
                }
                channels = Some(v);
            }
            other => return Err(err(format!("unknown header key '{other}'"))),
        }
    }
    match (dt, channels) {
        (Some(dt), Some(ch)) => Ok((dt, ch)),
        _ => Err(err("header must declare both dt and channels".into())),
    }
}

/// Reads a record from the CSV format: a `# dt=<s> channels=<n>` header
/// followed by one comma-separated row per time step.
pub fn load_records<R: BufRead>(source: R) -> Result<RecordMatrix> {
    let mut lines = source.lines().enumerate();
    let (dt, n_channels) = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?;
            parse_header(&line)?
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty input".into(),
            })
        }
    };

    let mut data = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("field '{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("field '{field}' is not finite"),
                });
            }
            data.push(v);
        }
        let got = data.len() - before;
        if got != n_channels {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {n_channels} fields, found {got}"),
            });
        }
    }
    let n_samples = data.len() / n_channels;
    if n_samples == 0 {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    RecordMatrix::new(data, n_samples, n_channels, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_three_rows_at_bridge_sampling_interval() {
        let src = "# dt=0.007812 channels=2\n1.0,2.0\n3.5,-4.0\n0,1e-3\n";
        let rec = load_records(src.as_bytes()).unwrap();
        assert_eq!(rec.n_samples(), 3);
        assert_eq!(rec.n_channels(), 2);
        assert_eq!(rec.dt(), 0.007812);
        assert_eq!(rec.column(1), vec![2.0, -4.0, 1e-3]);
    }

    #[test]
    fn single_zero_row() {
        let rec = load_records("# dt=0.01 channels=2\n0.0,0.0\n".as_bytes()).unwrap();
        assert_eq!(rec.data(), &[0.0, 0.0]);
    }

    #[test]
    fn ragged_row_names_its_line() {
        let err = load_records("# dt=0.01 channels=2\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn non_numeric_field() {
        let err = load_records("# dt=0.01 channels=2\n1,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn rejects_non_positive_dt() {
        for dt in ["0", "-0.1", "nan"] {
            let src = format!("# dt={dt} channels=1\n1\n");
            assert!(matches!(
                load_records(src.as_bytes()),
                Err(Error::Parse { line: 1, .. })
            ));
        }
    }

    #[test]
    fn accepts_crlf() {
        let rec = load_records("# dt=0.5 channels=2\r\n1,2\r\n3,4\r\n".as_bytes()).unwrap();
        assert_eq!(rec.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cols = vec![vec![0.1, 1.0 / 3.0, -2e-17], vec![1e300, -0.0, 7.0]];
        let rec = RecordMatrix::from_columns(&cols, 0.0078125).unwrap();
        let back = load_records(rec.to_csv_string().as_bytes()).unwrap();
        assert_eq!(rec, back);
    }
}
