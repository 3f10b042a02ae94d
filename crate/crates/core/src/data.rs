//! Labelled datasets: CSV I/O and small synthetic 2-D generators.
//!
//! CSV layout is a header `x0,...,x{d-1},label` followed by one row per
//! example; labels are 0-based integers.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::rng::SeededStream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub x: Vec<Vec<T>>,
    pub y: Vec<usize>,
    pub num_classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Vec<Vec<T>>, y: Vec<usize>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty("dataset has no rows"));
        }
        if x.len() != y.len() {
            return Err(Error::Parse(format!("{} inputs but {} labels", x.len(), y.len())));
        }
        let d = x[0].len();
        if d == 0 {
            return Err(Error::Parse("inputs have zero features".into()));
        }
        if let Some(i) = x.iter().position(|r| r.len() != d) {
            return Err(Error::Parse(format!("row {i} has {} features, expected {d}", x[i].len())));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite feature value".into()));
        }
        let num_classes = (y.iter().copied().max().unwrap_or(0) + 1).max(2);
        Ok(Dataset { x, y, num_classes })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn with_num_classes(mut self, k: usize) -> Result<Self> {
        if let Some(&bad) = self.y.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidClass { label: bad, classes: k });
        }
        self.num_classes = k.max(2);
        Ok(self)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for j in 0..self.dim() {
            let _ = write!(out, "x{j},");
        }
        out.push_str("label\n");
        for (row, label) in self.x.iter().zip(&self.y) {
            for v in row {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{label}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Empty("dataset file is empty"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols.last() != Some(&"label") {
            return Err(Error::Parse("header must be x0,...,x{d-1},label".into()));
        }
        for (j, c) in cols[..cols.len() - 1].iter().enumerate() {
            if *c != format!("x{j}") {
                return Err(Error::Parse(format!("header column {j} is {c:?}, expected x{j}")));
            }
        }
        let d = cols.len() - 1;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != d + 1 {
                return Err(Error::Parse(format!("line {}: expected {} fields", lineno + 1, d + 1)));
            }
            let row = fields[..d]
                .iter()
                .map(|f| f.parse::<f64>().map(T::of).map_err(|_| Error::Parse(format!("line {}: bad number {f:?}", lineno + 1))))
                .collect::<Result<Vec<T>>>()?;
            let label = fields[d]
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {}: bad label {:?}", lineno + 1, fields[d])))?;
            x.push(row);
            y.push(label);
        }
        Dataset::new(x, y)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Dataset::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Rows `range` as a new dataset with the same class count.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let ds = Dataset::new(self.x[range.clone()].to_vec(), self.y[range].to_vec())?;
        ds.with_num_classes(self.num_classes)
    }
}

/// Two isotropic Gaussian blobs centred at `(±separation/2, 0)`,
/// alternating labels.
pub fn two_blobs<T: Scalar>(n: usize, separation: f64, spread: f64, seed: u64) -> Result<Dataset<T>> {
    let noise = NoiseSpec::gaussian(spread)?;
    let stream = SeededStream::new(seed, 0xb10b);
    let x = (0..n)
        .map(|i| {
            let label = i % 2;
            let cx = if label == 0 { -separation / 2.0 } else { separation / 2.0 };
            vec![T::of(cx + noise.draw(&stream, 2 * i as u64)), T::of(noise.draw(&stream, 2 * i as u64 + 1))]
        })
        .collect();
    Dataset::new(x, (0..n).map(|i| i % 2).collect())
}

/// The interleaved half-circles problem; label 0 is the upper moon.
pub fn two_moons<T: Scalar>(n: usize, jitter: f64, seed: u64) -> Result<Dataset<T>> {
    let noise = NoiseSpec::gaussian(jitter)?;
    let stream = SeededStream::new(seed, 0x300a);
    let mut cursor = SeededStream::new(seed, 0x300b).cursor(0);
    let x = (0..n)
        .map(|i| {
            let t = PI * cursor.next_open01();
            let (px, py) = if i % 2 == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
            vec![T::of(px + noise.draw(&stream, 2 * i as u64)), T::of(py + noise.draw(&stream, 2 * i as u64 + 1))]
        })
        .collect();
    Dataset::new(x, (0..n).map(|i| i % 2).collect())
}
