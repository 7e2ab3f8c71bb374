use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DmpError;

/// Timestamped positions recorded while a human shows the robot a motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationTrajectory {
    pub times: Vec<f64>,
    /// One row per sample, each of length `dims()`.
    pub positions: Vec<Vec<f64>>,
    pub description: String,
}

impl DemonstrationTrajectory {
    pub fn new(times: Vec<f64>, positions: Vec<Vec<f64>>, description: impl Into<String>) -> Result<Self, DmpError> {
        let demo = Self {
            times,
            positions,
            description: description.into(),
        };
        demo.validate()?;
        Ok(demo)
    }

    /// Samples `f` at `n` evenly spaced times over `[0, duration]`.
    pub fn sample(n: usize, duration: f64, description: &str, f: impl Fn(f64) -> Vec<f64>) -> Result<Self, DmpError> {
        let times: Vec<f64> = (0..n).map(|i| duration * i as f64 / (n - 1).max(1) as f64).collect();
        let positions = times.iter().map(|&t| f(t)).collect();
        Self::new(times, positions, description)
    }

    pub fn dims(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), DmpError> {
        let bad = |why: &str| Err(DmpError::DegenerateDemo(why.to_string()));
        if self.times.len() != self.positions.len() {
            return bad("times and positions differ in length");
        }
        if self.times.len() < 3 {
            return bad("need at least 3 samples");
        }
        if self.times[0] != 0.0 {
            return bad("first timestamp must be 0");
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("timestamps must strictly increase");
        }
        let d = self.dims();
        if d == 0 || self.positions.iter().any(|p| p.len() != d) {
            return bad("every sample needs the same non-zero number of coordinates");
        }
        if self.positions.iter().flatten().chain(&self.times).any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        Ok(())
    }

    /// Reads CSV with header `t,y1,...,yD`.
    pub fn from_csv_reader(reader: impl Read, description: impl Into<String>) -> Result<Self, DmpError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| DmpError::Csv(e.to_string()))?.clone();
        let ok_header = header.len() >= 2
            && &header[0] == "t"
            && header.iter().skip(1).enumerate().all(|(i, h)| h == format!("y{}", i + 1));
        if !ok_header {
            return Err(DmpError::Csv(format!(
                "header must be t,y1..yD, got {}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut positions = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| DmpError::Csv(e.to_string()))?;
            let nums = record
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| DmpError::Csv(format!("row {}: {e}", i + 2)))?;
            times.push(nums[0]);
            positions.push(nums[1..].to_vec());
        }
        Self::new(times, positions, description)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, description: impl Into<String>) -> Result<Self, DmpError> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| DmpError::Io(e.to_string()))?;
        Self::from_csv_reader(file, description)
    }

    pub fn to_csv(&self, writer: impl Write) -> Result<(), DmpError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| DmpError::Csv(e.to_string());
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dims()).map(|i| format!("y{i}")));
        w.write_record(&header).map_err(err)?;
        for (t, p) in self.times.iter().zip(&self.positions) {
            let mut row = vec![t.to_string()];
            row.extend(p.iter().map(f64::to_string));
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| DmpError::Io(e.to_string()))
    }
}
