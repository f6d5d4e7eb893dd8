//! Labeled point clouds and their CSV form (`x_mm,y_mm,z_mm,label`).

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown point label {0:?}")]
    UnknownLabel(String),
    #[error("non-finite coordinate in row {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointLabel {
    Rim,
    Background,
    Outlier,
}

impl PointLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PointLabel::Rim => "rim",
            PointLabel::Background => "background",
            PointLabel::Outlier => "outlier",
        }
    }
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PointLabel {
    type Err = CloudError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rim" => Ok(PointLabel::Rim),
            "background" => Ok(PointLabel::Background),
            "outlier" => Ok(PointLabel::Outlier),
            other => Err(CloudError::UnknownLabel(other.to_string())),
        }
    }
}

/// Points in millimetres with one label each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub labels: Vec<PointLabel>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
    label: String,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every point labeled `Rim`.
    pub fn from_points(points: Vec<Point3>) -> Self {
        let labels = vec![PointLabel::Rim; points.len()];
        Self { points, labels }
    }

    pub fn push(&mut self, p: Point3, label: PointLabel) {
        self.points.push(p);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps only points carrying one of `keep`.
    pub fn filter_labels(&self, keep: &[PointLabel]) -> PointCloud {
        let mut out = PointCloud::new();
        for (p, l) in self.points.iter().zip(&self.labels) {
            if keep.contains(l) {
                out.push(*p, *l);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CloudError> {
        let mut wtr = csv::Writer::from_writer(w);
        for (p, l) in self.points.iter().zip(&self.labels) {
            wtr.serialize(Row { x_mm: p.x, y_mm: p.y, z_mm: p.z, label: l.to_string() })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, CloudError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut out = PointCloud::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            let p = Point3::new(row.x_mm, row.y_mm, row.z_mm);
            if !p.is_finite() {
                return Err(CloudError::NonFinite(i));
            }
            out.push(p, row.label.parse()?);
        }
        Ok(out)
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), CloudError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: &Path) -> Result<Self, CloudError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
