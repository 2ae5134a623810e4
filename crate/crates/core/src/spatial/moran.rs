use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_two_sided;
use crate::weights::SpatialWeights;

/// Global Moran's I with its moments under the normality assumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    pub i_value: f64,
    pub expected_i: f64,
    pub variance_i: f64,
    pub z_score: f64,
    pub p_value: f64,
}

/// Moran's I of `values` (typically regression residuals) over `w`.
pub fn morans_i(values: &DVector<f64>, w: &SpatialWeights) -> Result<MoranResult> {
    let n = values.len();
    if w.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} values but {} weight rows",
            w.len()
        )));
    }
    let m = w.matrix();
    let s0 = w.s0();
    if s0 <= 0.0 {
        return Err(Error::DegenerateWeights("all weights are zero".into()));
    }
    let mean = values.mean();
    let z = values.map(|v| v - mean);
    let zz = z.norm_squared();
    let scale = values.amax();
    if zz == 0.0 || zz.sqrt() <= 1e-12 * scale * (n as f64).sqrt() {
        return Err(Error::DegenerateSample("values are constant".into()));
    }
    let zwz = z.dot(&(m * &z));
    let nf = n as f64;
    let i_value = nf / s0 * zwz / zz;

    let mut s1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s = m[(i, j)] + m[(j, i)];
            s1 += s * s;
        }
    }
    s1 *= 0.5;
    let s2: f64 = (0..n)
        .map(|i| (m.row(i).sum() + m.column(i).sum()).powi(2))
        .sum();
    let expected_i = -1.0 / (nf - 1.0);
    let second_moment = (nf * nf * s1 - nf * s2 + 3.0 * s0 * s0) / ((nf * nf - 1.0) * s0 * s0);
    let variance_i = second_moment - expected_i * expected_i;
    let z_score = (i_value - expected_i) / variance_i.sqrt();
    Ok(MoranResult {
        i_value,
        expected_i,
        variance_i,
        z_score,
        p_value: normal_two_sided(z_score),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{binary_contiguity_weights, rook_lattice};

    #[test]
    fn checkerboard_is_minus_one() {
        let w = rook_lattice(2, 2).unwrap();
        let r = morans_i(&DVector::from_vec(vec![1.0, -1.0, -1.0, 1.0]), &w).unwrap();
        assert!((r.i_value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_graph_is_one_third() {
        let ids: Vec<String> = (1..=4).map(|i| i.to_string()).collect();
        let w = binary_contiguity_weights(&[("1", "2"), ("2", "3"), ("3", "4")], &ids).unwrap();
        let r = morans_i(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]), &w).unwrap();
        assert!((r.i_value - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.expected_i + 1.0 / 3.0).abs() < 1e-15);
        assert!(((r.i_value - r.expected_i) / r.variance_i.sqrt() - r.z_score).abs() < 1e-12);
    }

    #[test]
    fn expectation_closed_form() {
        let w = rook_lattice(5, 6).unwrap();
        let v = DVector::from_fn(30, |i, _| ((i * 37) % 11) as f64);
        let r = morans_i(&v, &w).unwrap();
        assert_eq!(r.expected_i, -1.0 / 29.0);
    }

    #[test]
    fn constant_values_rejected() {
        let w = rook_lattice(2, 2).unwrap();
        assert!(matches!(
            morans_i(&DVector::from_element(4, 3.0), &w),
            Err(Error::DegenerateSample(_))
        ));
    }
}
