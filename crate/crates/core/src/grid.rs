//! Tensor-product grids and the fields sampled on them.
//!
//! A grid over ℂⁿ has `2n` real axes ordered `x_1, …, x_n, y_1, …, y_n` with
//! `z_j = x_j + √−1 y_j`. Real (affine) problems use the same type with `n` axes.
//! Points are stored row-major with the last axis fastest.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DefiningFunction;
use crate::linalg::{self, c, CMat};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointClass {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone)]
pub struct GridDomain {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    strides: Vec<usize>,
    classes: Vec<PointClass>,
    interior: Vec<usize>,
    slot: Vec<usize>,
    defining_fn: Option<DefiningFunction>,
}

/// JSON description of a grid, written next to every field CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridHeader {
    pub axes: Vec<String>,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub interior_points: usize,
    pub boundary_points: usize,
    pub exterior_points: usize,
    pub defining_function: Option<String>,
    /// Column layout of the CSV rows.
    pub layout: String,
}

const NOT_INTERIOR: usize = usize::MAX;

impl GridDomain {
    /// Box `[lower, upper]` with `shape[a]` nodes per axis; the outer layer is boundary.
    pub fn new_box(shape: &[usize], lower: &[f64], upper: &[f64]) -> Result<Self> {
        let dim = shape.len();
        if dim == 0 || lower.len() != dim || upper.len() != dim {
            return Err(Error::Argument("grid shape and bounds must have equal, nonzero length".into()));
        }
        if shape.iter().any(|&s| s < 3) {
            return Err(Error::Argument("every axis needs at least 3 nodes".into()));
        }
        let spacing: Vec<f64> = (0..dim)
            .map(|a| (upper[a] - lower[a]) / (shape[a] - 1) as f64)
            .collect();
        if spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Argument("grid spacing must be positive on every axis".into()));
        }
        let mut d = Self::skeleton(shape.to_vec(), spacing, lower.to_vec());
        let classes: Vec<PointClass> = (0..d.len())
            .map(|idx| {
                if d.on_edge(idx) {
                    PointClass::Boundary
                } else {
                    PointClass::Interior
                }
            })
            .collect();
        d.set_classes(classes);
        Ok(d)
    }

    /// Cube with the same node count and bounds on all `dim` axes.
    pub fn cube(dim: usize, nodes: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new_box(&vec![nodes; dim], &vec![lower; dim], &vec![upper; dim])
    }

    /// Box grid masked by a defining function: interior points have `φ < −tol`
    /// (`tol = spacing · max|dφ|`) and a full stencil neighbourhood with `φ < 0`.
    pub fn with_defining_function(
        shape: &[usize],
        lower: &[f64],
        upper: &[f64],
        phi: DefiningFunction,
    ) -> Result<Self> {
        let base = Self::new_box(shape, lower, upper)?;
        let dim = base.dim();
        if phi.real_dim() != Some(dim) && phi.real_dim().is_some() {
            return Err(Error::Argument("defining function dimension does not match grid".into()));
        }
        let values = par::map_indexed(base.len(), |idx| phi.value(&base.coords(idx)));
        let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
        let grad_max = par::max_indexed(base.len(), |idx| {
            phi.real_gradient_norm(&base.coords(idx)).unwrap_or(0.0)
        });
        let h = base.spacing.iter().copied().fold(0.0, f64::max);
        let tol = h * grad_max.max(0.0);
        let offsets = base.stencil_offsets();
        let mut classes = vec![PointClass::Exterior; base.len()];
        for idx in 0..base.len() {
            if base.on_edge(idx) || values[idx] >= -tol {
                continue;
            }
            let full = offsets.iter().all(|&(o, sign)| {
                let nb = if sign { idx + o } else { idx - o };
                values[nb] < 0.0
            });
            if full {
                classes[idx] = PointClass::Interior;
            }
        }
        for idx in 0..base.len() {
            if classes[idx] != PointClass::Interior {
                continue;
            }
            for &(o, sign) in &offsets {
                let nb = if sign { idx + o } else { idx - o };
                if classes[nb] == PointClass::Exterior {
                    classes[nb] = PointClass::Boundary;
                }
            }
        }
        for idx in 0..base.len() {
            if classes[idx] == PointClass::Exterior && values[idx] < 0.0 {
                classes[idx] = PointClass::Boundary;
            }
        }
        let mut d = Self::skeleton(base.shape.clone(), base.spacing.clone(), base.origin.clone());
        d.defining_fn = Some(phi);
        d.set_classes(classes);
        Ok(d)
    }

    fn skeleton(shape: Vec<usize>, spacing: Vec<f64>, origin: Vec<f64>) -> Self {
        let dim = shape.len();
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        GridDomain {
            shape,
            spacing,
            origin,
            strides,
            classes: Vec::new(),
            interior: Vec::new(),
            slot: Vec::new(),
            defining_fn: None,
        }
    }

    fn set_classes(&mut self, classes: Vec<PointClass>) {
        self.interior = classes
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == PointClass::Interior)
            .map(|(i, _)| i)
            .collect();
        self.slot = vec![NOT_INTERIOR; classes.len()];
        for (k, &idx) in self.interior.iter().enumerate() {
            self.slot[idx] = k;
        }
        self.classes = classes;
    }

    /// Number of real axes.
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Complex dimension `n` of a grid over ℂⁿ (`2n` real axes).
    pub fn complex_dim(&self) -> Result<usize> {
        if self.dim() % 2 != 0 {
            return Err(Error::Argument(format!(
                "a grid over C^n needs an even number of real axes, got {}",
                self.dim()
            )));
        }
        Ok(self.dim() / 2)
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn class(&self, idx: usize) -> PointClass {
        self.classes[idx]
    }

    pub fn classes(&self) -> &[PointClass] {
        &self.classes
    }

    /// Flat indices of interior points, ascending.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Position of `idx` in [`Self::interior`], if interior.
    pub fn interior_slot(&self, idx: usize) -> Option<usize> {
        let s = self.slot[idx];
        (s != NOT_INTERIOR).then_some(s)
    }

    pub fn defining_fn(&self) -> Option<&DefiningFunction> {
        self.defining_fn.as_ref()
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        self.shape
            .iter()
            .zip(&self.strides)
            .map(|(&s, &st)| (idx / st) % s)
            .collect()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Nearest node to `x`, if it coincides with `x` up to `1e-9` of the spacing.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let mut multi = Vec::with_capacity(self.dim());
        for a in 0..self.dim() {
            let r = (x[a] - self.origin[a]) / self.spacing[a];
            let i = r.round();
            if (r - i).abs() > 1e-9 || i < 0.0 || i as usize >= self.shape[a] {
                return None;
            }
            multi.push(i as usize);
        }
        Some(self.flat_index(&multi))
    }

    pub fn on_edge(&self, idx: usize) -> bool {
        self.multi_index(idx)
            .iter()
            .zip(&self.shape)
            .any(|(&i, &s)| i == 0 || i + 1 == s)
    }

    /// Offsets reached by the second-order stencils: `±e_a` and `±e_a ± e_b`.
    /// Returned as `(magnitude, is_positive)` pairs of flat offsets.
    pub fn stencil_offsets(&self) -> Vec<(usize, bool)> {
        let dim = self.dim();
        let mut out = Vec::new();
        for a in 0..dim {
            out.push((self.strides[a], true));
            out.push((self.strides[a], false));
            for b in a + 1..dim {
                out.push((self.strides[a] + self.strides[b], true));
                out.push((self.strides[a] + self.strides[b], false));
                // strides[a] > strides[b] for a < b
                out.push((self.strides[a] - self.strides[b], true));
                out.push((self.strides[a] - self.strides[b], false));
            }
        }
        out
    }

    /// Whether every stencil neighbour of `idx` lies in the grid and is not exterior.
    pub fn has_stencil(&self, idx: usize) -> bool {
        if self.on_edge(idx) {
            return false;
        }
        self.stencil_offsets().iter().all(|&(o, sign)| {
            let nb = if sign { idx + o } else { idx - o };
            self.classes[nb] != PointClass::Exterior
        })
    }

    /// Interior points whose stencil neighbours are all interior (one-layer margin).
    pub fn deep_interior(&self) -> Vec<usize> {
        let offsets = self.stencil_offsets();
        self.interior
            .iter()
            .copied()
            .filter(|&idx| {
                offsets.iter().all(|&(o, sign)| {
                    let nb = if sign { idx + o } else { idx - o };
                    self.classes[nb] == PointClass::Interior
                })
            })
            .collect()
    }

    pub fn header(&self, layout: &str) -> GridHeader {
        let count = |c: PointClass| self.classes.iter().filter(|&&x| x == c).count();
        let axes = if self.dim() % 2 == 0 {
            let n = self.dim() / 2;
            (0..n)
                .map(|i| format!("x{}", i + 1))
                .chain((0..n).map(|i| format!("y{}", i + 1)))
                .collect()
        } else {
            (0..self.dim()).map(|i| format!("x{}", i + 1)).collect()
        };
        GridHeader {
            axes,
            shape: self.shape.clone(),
            spacing: self.spacing.clone(),
            origin: self.origin.clone(),
            interior_points: count(PointClass::Interior),
            boundary_points: count(PointClass::Boundary),
            exterior_points: count(PointClass::Exterior),
            defining_function: self.defining_fn.as_ref().map(|d| d.describe()),
            layout: layout.to_string(),
        }
    }
}

/// A real number per grid point.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub domain: Arc<GridDomain>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let values = vec![0.0; domain.len()];
        ScalarField { domain, values }
    }

    pub fn from_values(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Argument(format!(
                "field has {} values, grid has {} points",
                values.len(),
                domain.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("scalar field values must be finite".into()));
        }
        Ok(ScalarField { domain, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(domain: Arc<GridDomain>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let values = par::map_indexed(domain.len(), |idx| f(&domain.coords(idx)));
        ScalarField { domain, values }
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// `sup |u|` over interior points.
    pub fn interior_sup_abs(&self) -> f64 {
        let pts = self.domain.interior();
        par::max_indexed(pts.len(), |k| self.values[pts[k]].abs()).max(0.0)
    }

    /// `sup |u − v|` over interior points.
    pub fn interior_sup_diff(&self, other: &ScalarField) -> f64 {
        let pts = self.domain.interior();
        par::max_indexed(pts.len(), |k| (self.values[pts[k]] - other.values[pts[k]]).abs()).max(0.0)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let dim = self.domain.dim();
        let mut header: Vec<String> = self.domain.header("").axes;
        header.push("value".into());
        wr.write_record(&header)?;
        let _ = dim;
        for idx in 0..self.domain.len() {
            let mut row: Vec<String> = self.domain.coords(idx).iter().map(|x| format!("{x:e}")).collect();
            row.push(format!("{:e}", self.values[idx]));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(domain: Arc<GridDomain>, r: R) -> Result<Self> {
        let rows = read_rows(r, domain.dim() + 1)?;
        let values = rows.into_iter().map(|row| row[domain.dim()]).collect();
        Self::from_values(domain, values)
    }

    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let f = std::fs::File::create(csv_path)?;
        self.write_csv(std::io::BufWriter::new(f))?;
        write_header(csv_path, &self.domain.header("coordinates, value"))
    }
}

/// A Hermitian `n × n` matrix per grid point.
#[derive(Debug, Clone)]
pub struct HermitianField {
    pub domain: Arc<GridDomain>,
    pub values: Vec<CMat>,
    /// Set when positive-definiteness was checked on the interior.
    pub positive_definite: Option<bool>,
}

impl HermitianField {
    pub fn constant(domain: Arc<GridDomain>, m: &CMat) -> Self {
        let values = vec![m.clone(); domain.len()];
        HermitianField {
            domain,
            values,
            positive_definite: None,
        }
    }

    pub fn from_fn<F>(domain: Arc<GridDomain>, f: F) -> Self
    where
        F: Fn(&[f64]) -> CMat + Sync + Send,
    {
        let values = par::map_indexed(domain.len(), |idx| f(&domain.coords(idx)));
        HermitianField {
            domain,
            values,
            positive_definite: None,
        }
    }

    /// Matrix size `n`.
    pub fn n(&self) -> usize {
        self.values.first().map_or(0, |m| m.nrows())
    }

    /// Largest Hermitian defect over interior points.
    pub fn hermitian_defect(&self) -> f64 {
        let pts = self.domain.interior();
        par::max_indexed(pts.len(), |k| linalg::hermitian_defect(&self.values[pts[k]])).max(0.0)
    }

    /// Minimum eigenvalue over interior points.
    pub fn min_eigenvalue(&self) -> f64 {
        let pts = self.domain.interior();
        -par::max_indexed(pts.len(), |k| -linalg::min_eigenvalue(&self.values[pts[k]]))
    }

    /// Checks and records positive-definiteness on the interior.
    pub fn flag_positive_definite(mut self) -> Self {
        let pd = self.min_eigenvalue() > 0.0;
        self.positive_definite = Some(pd);
        self
    }

    /// Scales every matrix by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        HermitianField {
            domain: self.domain.clone(),
            values: par::map_slice(&self.values, |m| m.map(|z| z * s)),
            positive_definite: self.positive_definite.map(|p| p && s > 0.0),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.n();
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = self.domain.header("").axes;
        for i in 0..n {
            for j in 0..n {
                header.push(format!("re_{}{}", i + 1, j + 1));
                header.push(format!("im_{}{}", i + 1, j + 1));
            }
        }
        wr.write_record(&header)?;
        for idx in 0..self.domain.len() {
            let mut row: Vec<String> = self.domain.coords(idx).iter().map(|x| format!("{x:e}")).collect();
            let m = &self.values[idx];
            for i in 0..n {
                for j in 0..n {
                    row.push(format!("{:e}", m[(i, j)].re));
                    row.push(format!("{:e}", m[(i, j)].im));
                }
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(domain: Arc<GridDomain>, n: usize, r: R) -> Result<Self> {
        let dim = domain.dim();
        let rows = read_rows(r, dim + 2 * n * n)?;
        if rows.len() != domain.len() {
            return Err(Error::Parse(format!(
                "CSV has {} rows, grid has {} points",
                rows.len(),
                domain.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len());
        for row in rows {
            let mut m = CMat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let k = dim + 2 * (i * n + j);
                    m[(i, j)] = c(row[k], row[k + 1]);
                }
            }
            linalg::check_hermitian(&m, 1e-12)?;
            values.push(m);
        }
        Ok(HermitianField {
            domain,
            values,
            positive_definite: None,
        })
    }

    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let f = std::fs::File::create(csv_path)?;
        self.write_csv(std::io::BufWriter::new(f))?;
        write_header(
            csv_path,
            &self
                .domain
                .header("coordinates, then matrix entries row-major as (re, im) pairs"),
        )
    }
}

fn read_rows<R: Read>(r: R, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Parse(format!(
                "CSV row has {} columns, expected {width}",
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number '{s}' in CSV")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Writes `<csv>.json` with the grid header.
fn write_header(csv_path: &Path, header: &GridHeader) -> Result<()> {
    let path = csv_path.with_extension("json");
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, header)?;
    f.write_all(b"\n")?;
    Ok(())
}
