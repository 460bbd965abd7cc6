//! Point sets and the plain-text point file format.
//!
//! One point per line, whitespace separated decimals. `#` starts a comment.
//! The dimension is taken from the first data line and every later line must
//! agree with it.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Ordered list of points in 2 or 3 dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::input(format!("dimension {dim} not supported, expected 2 or 3")));
        }
        if coords.len() % dim != 0 {
            return Err(Error::input("coordinate count is not a multiple of the dimension"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("point coordinates must be finite"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self> {
        Self::new(D, points.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.point(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Subset in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> PointSet {
        let coords = indices.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        PointSet { dim: self.dim, coords }
    }

    /// Applies `f` to every point.
    pub fn map(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> PointSet {
        let coords = self.iter().flat_map(|p| f(p)).collect();
        PointSet { dim: self.dim, coords }
    }

    pub fn concat(&self, other: &PointSet) -> Result<PointSet> {
        if self.dim != other.dim {
            return Err(Error::input("cannot concatenate point sets of different dimension"));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(PointSet { dim: self.dim, coords })
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for p in self.iter() {
            for (a, x) in c.iter_mut().zip(p) {
                *a += x;
            }
        }
        let n = self.len().max(1) as f64;
        c.iter_mut().for_each(|a| *a /= n);
        c
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0_f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(distance(self.point(i), self.point(j)));
            }
        }
        best
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = 0;
        let mut coords = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut count = 0;
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("invalid number {tok:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("non-finite value {tok:?}"),
                    });
                }
                coords.push(v);
                count += 1;
            }
            if dim == 0 {
                if !(2..=3).contains(&count) {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("expected 2 or 3 coordinates, found {count}"),
                    });
                }
                dim = count;
            } else if count != dim {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {dim} coordinates, found {count}"),
                });
            }
        }
        if dim == 0 {
            return Err(Error::Parse { line: 0, message: "no points found".into() });
        }
        Ok(Self { dim, coords })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Shortest round-trip decimal representation, one point per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in self.iter() {
            let line: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
