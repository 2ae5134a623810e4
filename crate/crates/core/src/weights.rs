//! Spatial weight matrices: inverse great-circle distance, binary contiguity,
//! row standardization, CSV import/export and a cached eigenvalue spectrum
//! used for log-determinants and the admissible autoregressive interval.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{region_index, Region};
use crate::error::{Error, Result};
use crate::lsq::RowKey;

/// Mean Earth radius (km) of the WGS84 ellipsoid.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

const STANDARDIZED_TOL: f64 = 1e-12;

#[derive(Debug)]
pub struct SpatialWeights {
    region_order: Vec<String>,
    matrix: DMatrix<f64>,
    standardized: bool,
    // row sums before standardization; lets the spectrum use a symmetric solver
    source_row_sums: Option<Vec<f64>>,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for SpatialWeights {
    fn clone(&self) -> Self {
        SpatialWeights {
            region_order: self.region_order.clone(),
            matrix: self.matrix.clone(),
            standardized: self.standardized,
            source_row_sums: self.source_row_sums.clone(),
            spectrum: self.spectrum.clone(),
        }
    }
}

impl PartialEq for SpatialWeights {
    fn eq(&self, other: &Self) -> bool {
        self.region_order == other.region_order
            && self.matrix == other.matrix
            && self.standardized == other.standardized
    }
}

impl SpatialWeights {
    /// Validates and wraps a raw matrix. The `standardized` flag is checked against row sums.
    pub fn new(
        region_order: Vec<String>,
        matrix: DMatrix<f64>,
        standardized: bool,
    ) -> Result<Self> {
        let n = region_order.len();
        if n < 2 {
            return Err(Error::SingleRegion);
        }
        if matrix.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "{} regions but a {}x{} matrix",
                n,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if region_index(&region_order).len() != n {
            return Err(Error::InvalidInput("duplicate region id in weights".into()));
        }
        for i in 0..n {
            if matrix[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "nonzero diagonal weight for `{}`",
                    region_order[i]
                )));
            }
        }
        if matrix.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if standardized {
            for (i, row) in matrix.row_iter().enumerate() {
                let s = row.sum();
                if s != 0.0 && (s - 1.0).abs() > STANDARDIZED_TOL {
                    return Err(Error::InvalidInput(format!(
                        "row `{}` sums to {s}, not 1",
                        region_order[i]
                    )));
                }
            }
        }
        Ok(SpatialWeights {
            region_order,
            matrix,
            standardized,
            source_row_sums: None,
            spectrum: OnceLock::new(),
        })
    }

    pub fn region_order(&self) -> &[String] {
        &self.region_order
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn len(&self) -> usize {
        self.region_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_order.is_empty()
    }

    /// Sum of all weights.
    pub fn s0(&self) -> f64 {
        self.matrix.sum()
    }

    /// Spatial lag `W v`.
    pub fn lag(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    pub fn is_symmetric(&self) -> bool {
        is_symmetric(&self.matrix)
    }

    /// Divides each nonzero row by its sum. Rows of zeros stay zero and are reported.
    pub fn row_standardize(&self) -> Standardized {
        let n = self.len();
        let mut matrix = self.matrix.clone();
        let mut sums = Vec::with_capacity(n);
        let mut isolated = Vec::new();
        for i in 0..n {
            let s = self.matrix.row(i).sum();
            if s == 0.0 {
                isolated.push(self.region_order[i].clone());
            } else {
                matrix.row_mut(i).scale_mut(1.0 / s);
            }
            sums.push(s);
        }
        let source_row_sums = match &self.source_row_sums {
            Some(prev) if self.standardized => Some(prev.clone()),
            _ => Some(sums),
        };
        Standardized {
            weights: SpatialWeights {
                region_order: self.region_order.clone(),
                matrix,
                standardized: true,
                source_row_sums,
                spectrum: OnceLock::new(),
            },
            isolated,
        }
    }

    /// Eigenvalues of W, computed once and cached.
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| Spectrum::of(self))
    }

    /// Reorders to `order`, which must be a permutation of the current region ids.
    pub fn reorder(&self, order: &[String]) -> Result<SpatialWeights> {
        let idx = region_index(&self.region_order);
        let perm: Vec<usize> = order
            .iter()
            .map(|r| {
                idx.get(r.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownRegion(r.clone()))
            })
            .collect::<Result<_>>()?;
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "reorder to {} regions from {}",
                perm.len(),
                self.len()
            )));
        }
        let matrix = DMatrix::from_fn(perm.len(), perm.len(), |i, j| {
            self.matrix[(perm[i], perm[j])]
        });
        Ok(SpatialWeights {
            region_order: order.to_vec(),
            matrix,
            standardized: self.standardized,
            source_row_sums: self
                .source_row_sums
                .as_ref()
                .map(|s| perm.iter().map(|&p| s[p]).collect()),
            spectrum: OnceLock::new(),
        })
    }

    /// Weights over design rows: rows in the same year are linked by the
    /// regional weight, rows in different years are unlinked.
    pub fn expand_to_rows(&self, keys: &[RowKey]) -> Result<SpatialWeights> {
        let idx = region_index(&self.region_order);
        let positions: Vec<usize> = keys
            .iter()
            .map(|k| {
                idx.get(k.region.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownRegion(k.region.clone()))
            })
            .collect::<Result<_>>()?;
        let n = keys.len();
        let matrix = DMatrix::from_fn(n, n, |a, b| {
            if keys[a].year == keys[b].year {
                self.matrix[(positions[a], positions[b])]
            } else {
                0.0
            }
        });
        let order = keys
            .iter()
            .map(|k| format!("{}@{}", k.region, k.year))
            .collect();
        Ok(SpatialWeights {
            region_order: order,
            matrix,
            standardized: self.standardized,
            source_row_sums: self
                .source_row_sums
                .as_ref()
                .map(|s| positions.iter().map(|&p| s[p]).collect()),
            spectrum: OnceLock::new(),
        })
    }

    /// Square CSV with a `region_id` header row and column, 12 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("region_id");
        for r in &self.region_order {
            out.push(',');
            out.push_str(r);
        }
        out.push('\n');
        for (i, r) in self.region_order.iter().enumerate() {
            out.push_str(r);
            for j in 0..self.len() {
                let v = self.matrix[(i, j)];
                if v == 0.0 {
                    out.push_str(",0");
                } else {
                    write!(out, ",{v:.11e}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv_string().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<SpatialWeights> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<SpatialWeights> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let order: Vec<String> = headers.iter().skip(1).map(String::from).collect();
        let n = order.len();
        let mut matrix: DMatrix<f64> = DMatrix::zeros(n, n);
        let mut seen = 0;
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if i >= n || record.get(0) != Some(order[i].as_str()) {
                return Err(Error::Parse {
                    line,
                    message: "row labels must repeat the header order".into(),
                });
            }
            for j in 0..n {
                let raw = record.get(j + 1).unwrap_or("");
                matrix[(i, j)] = raw.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("cannot parse weight `{raw}`"),
                })?;
            }
            seen += 1;
        }
        if seen != n {
            return Err(Error::DimensionMismatch(format!(
                "{seen} rows for {n} columns"
            )));
        }
        let standardized = matrix
            .row_iter()
            .all(|r| r.sum() == 0.0 || (r.sum() - 1.0).abs() <= 1e-10);
        let mut w = SpatialWeights::new(order, matrix, false)?;
        if standardized {
            // re-normalize away the 12-digit rounding
            w = w.row_standardize().weights;
        }
        Ok(w)
    }
}

/// Row-standardized weights plus the ids of rows that had no neighbours.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub weights: SpatialWeights,
    pub isolated: Vec<String>,
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * scale))
}

/// Great-circle distance in km by the haversine formula.
pub fn great_circle_km(a: &Region, b: &Region) -> f64 {
    let (lat1, lon1) = (a.latitude.to_radians(), a.longitude.to_radians());
    let (lat2, lon2) = (b.latitude.to_radians(), b.longitude.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// `w_ij = d_ij^-power` with `d` the great-circle distance in km.
pub fn inverse_distance_weights(regions: &[Region], power: f64) -> Result<SpatialWeights> {
    if regions.len() < 2 {
        return Err(Error::SingleRegion);
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "distance power must be positive, got {power}"
        )));
    }
    let n = regions.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = great_circle_km(&regions[i], &regions[j]);
            if d == 0.0 {
                return Err(Error::CoincidentCoordinates(
                    regions[i].id.clone(),
                    regions[j].id.clone(),
                ));
            }
            let w = d.powf(-power);
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
    }
    SpatialWeights::new(regions.iter().map(|r| r.id.clone()).collect(), m, false)
}

/// Symmetric 0/1 weights from an explicit adjacency list.
pub fn binary_contiguity_weights(
    adjacency: &[(&str, &str)],
    regions: &[String],
) -> Result<SpatialWeights> {
    let idx = region_index(regions);
    let n = regions.len();
    let mut m = DMatrix::zeros(n, n);
    for (a, b) in adjacency {
        let i = *idx
            .get(a)
            .ok_or_else(|| Error::UnknownRegion(a.to_string()))?;
        let j = *idx
            .get(b)
            .ok_or_else(|| Error::UnknownRegion(b.to_string()))?;
        if i == j {
            return Err(Error::SelfPair(a.to_string()));
        }
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
    }
    SpatialWeights::new(regions.to_vec(), m, false)
}

/// Rook contiguity on an `rows x cols` lattice; ids are `r{row}c{col}`, row-major.
pub fn rook_lattice(rows: usize, cols: usize) -> Result<SpatialWeights> {
    let ids: Vec<String> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| format!("r{r}c{c}")))
        .collect();
    let mut pairs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let here = r * cols + c;
            if c + 1 < cols {
                pairs.push((here, here + 1));
            }
            if r + 1 < rows {
                pairs.push((here, here + cols));
            }
        }
    }
    let pairs: Vec<(&str, &str)> = pairs
        .iter()
        .map(|&(a, b)| (ids[a].as_str(), ids[b].as_str()))
        .collect();
    binary_contiguity_weights(&pairs, &ids)
}

/// Eigenvalues of a general square matrix by a bounded Schur iteration.
/// Spectra symmetric about zero (bipartite graphs) stall the shifted QR
/// sweeps, so a stalled run is retried on `W + cI` and shifted back.
fn general_eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let n = m.nrows();
    for shift in [0.0, 0.313_7, -0.582_1, 1.417_9] {
        let shifted = m + DMatrix::identity(n, n) * shift;
        if let Some(schur) = shifted.try_schur(f64::EPSILON, 20_000) {
            return schur
                .complex_eigenvalues()
                .iter()
                .map(|c| (c.re - shift, c.im))
                .collect();
        }
    }
    panic!("Schur iteration failed to converge on a {n}x{n} weights matrix")
}

/// Eigenvalues of a weights matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// (real, imaginary) parts.
    pub eigenvalues: Vec<(f64, f64)>,
    pub min_real: f64,
    pub max_real: f64,
}

impl Spectrum {
    fn of(w: &SpatialWeights) -> Spectrum {
        let m = &w.matrix;
        let n = m.nrows();
        let eigenvalues: Vec<(f64, f64)> = if is_symmetric(m) {
            m.clone()
                .symmetric_eigenvalues()
                .iter()
                .map(|&v| (v, 0.0))
                .collect()
        } else if let Some(sums) = w
            .source_row_sums
            .as_ref()
            .filter(|_| w.standardized)
            .filter(|s| is_symmetric(&DMatrix::from_fn(n, n, |i, j| s[i] * m[(i, j)])))
        {
            // W = D^-1 C with C symmetric is similar to D^-1/2 C D^-1/2
            let root: Vec<f64> = sums
                .iter()
                .map(|&s| if s > 0.0 { s.sqrt() } else { 1.0 })
                .collect();
            let sym = DMatrix::from_fn(n, n, |i, j| root[i] * m[(i, j)] / root[j]);
            let sym = (&sym + sym.transpose()) * 0.5;
            sym.symmetric_eigenvalues()
                .iter()
                .map(|&v| (v, 0.0))
                .collect()
        } else {
            general_eigenvalues(m)
        };
        let scale = eigenvalues
            .iter()
            .map(|(re, im)| re.hypot(*im))
            .fold(0.0f64, f64::max);
        let real: Vec<f64> = eigenvalues
            .iter()
            .filter(|(_, im)| im.abs() <= 1e-10 * scale.max(1.0))
            .map(|(re, _)| *re)
            .collect();
        let min_real = real.iter().copied().fold(f64::INFINITY, f64::min);
        let max_real = real.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Spectrum {
            eigenvalues,
            min_real,
            max_real,
        }
    }

    /// Open interval `(1/omega_min, 1/omega_max)` on which `I - rho W` is nonsingular.
    pub fn admissible_interval(&self) -> Result<(f64, f64)> {
        if self.max_real.is_nan() || self.max_real <= 0.0 {
            return Err(Error::DegenerateWeights(
                "weights matrix has no positive real eigenvalue".into(),
            ));
        }
        let upper = 1.0 / self.max_real;
        let lower = if self.min_real < 0.0 {
            1.0 / self.min_real
        } else {
            -upper
        };
        Ok((lower, upper))
    }

    /// `ln |det(I - rho W)|` as a sum over eigenvalues.
    pub fn log_det(&self, rho: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&(re, im)| {
                let a = 1.0 - rho * re;
                let b = rho * im;
                0.5 * (a * a + b * b).ln()
            })
            .sum()
    }
}
