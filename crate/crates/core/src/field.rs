//! Point clouds of displacements, the common currency between the FEM
//! oracle, the surrogate and calibration.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("displacement field needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Row {
    x: f64,
    y: f64,
    ux: f64,
    uy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DisplacementField {
    pub points: Vec<[f64; 2]>,
    pub displacements: Vec<[f64; 2]>,
    /// Known noise standard deviation per component, when available.
    pub noise_std: Option<[f64; 2]>,
}

impl DisplacementField {
    pub fn new(points: Vec<[f64; 2]>, displacements: Vec<[f64; 2]>) -> Self {
        assert_eq!(points.len(), displacements.len(), "points and displacements differ in length");
        Self { points, displacements, noise_std: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Displacements stacked as all x components followed by all y components.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.displacements.iter().map(|u| u[0]).collect();
        v.extend(self.displacements.iter().map(|u| u[1]));
        v
    }

    pub fn validate(&self, min_points: usize) -> Result<(), FieldError> {
        if self.len() < min_points {
            return Err(FieldError::TooFewPoints { needed: min_points, got: self.len() });
        }
        let bad = self.points.iter().zip(&self.displacements).position(|(x, u)| !(x.iter().chain(u).all(|v| v.is_finite())));
        match bad {
            Some(row) => Err(FieldError::NonFinite { row }),
            None => Ok(()),
        }
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, FieldError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut field = Self::default();
        for row in rdr.deserialize() {
            let r: Row = row?;
            field.points.push([r.x, r.y]);
            field.displacements.push([r.ux, r.uy]);
        }
        Ok(field)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), FieldError> {
        let mut w = csv::Writer::from_writer(writer);
        for (x, u) in self.points.iter().zip(&self.displacements) {
            w.serialize(Row { x: x[0], y: x[1], ux: u[0], uy: u[1] })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, FieldError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), FieldError> {
        self.to_writer(std::fs::File::create(path)?)
    }
}
