use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use netmig::dataset::{NutsLevel, Region};
use netmig::lsq::{breusch_pagan, jarque_bera, koenker_bassett, ols_fit, DesignMatrix, RowKey};
use netmig::panel::{fe_lsdv, hausman_test, re_gls};
use netmig::simulate::{simulate_panel, simulate_sar_cross_section, synthetic_regions, SimConfig};
use netmig::spatial::{decide, morans_i, spec_search};
use netmig::weights::{inverse_distance_weights, rook_lattice, SpatialWeights};

fn design(y: Vec<f64>, cols: &[Vec<f64>]) -> DesignMatrix {
    let n = y.len();
    let x = DMatrix::from_fn(
        n,
        cols.len() + 1,
        |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] },
    );
    let mut names = vec!["intercept".to_string()];
    names.extend((1..=cols.len()).map(|j| format!("x{j}")));
    DesignMatrix::from_columns(DVector::from_vec(y), x, names).unwrap()
}

fn panel(y: &[f64], cols: &[Vec<f64>], regions: usize) -> DesignMatrix {
    let n = y.len();
    let t = n / regions;
    let x = DMatrix::from_fn(
        n,
        cols.len() + 1,
        |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] },
    );
    let mut names = vec!["intercept".to_string()];
    names.extend((1..=cols.len()).map(|j| format!("x{j}")));
    let keys = (0..n)
        .map(|i| RowKey {
            region: format!("R{:02}", i / t),
            year: (i % t) as i32,
        })
        .collect();
    DesignMatrix::new(DVector::from_column_slice(y), x, names, keys).unwrap()
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

/// y, one slope column and region effects for a balanced panel.
fn panel_data() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (3usize..6, 3usize..6).prop_flat_map(|(g, t)| {
        (
            Just(g),
            Just(t),
            values(g * t),
            values(g * t),
            prop::collection::vec(-5.0..5.0f64, g),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ols_residuals_are_orthogonal(y in values(12), x1 in values(12), x2 in values(12)) {
        let d = design(y, &[x1, x2]);
        if let Ok(fit) = ols_fit(&d) {
            let xte = d.regressors().transpose() * &fit.residuals;
            let scale = d.regressors().norm() * d.response().norm().max(1.0);
            prop_assert!(xte.amax() <= 1e-9 * scale);
        }
    }

    #[test]
    fn ols_scale_equivariance(y in values(10), x1 in values(10), c in 0.1..20.0f64) {
        let d = design(y.clone(), std::slice::from_ref(&x1));
        let scaled_y = design(y.iter().map(|v| v * c).collect(), std::slice::from_ref(&x1));
        let scaled_x = design(y, &[x1.iter().map(|v| v * c).collect()]);
        if let (Ok(a), Ok(b), Ok(s)) = (ols_fit(&d), ols_fit(&scaled_y), ols_fit(&scaled_x)) {
            for j in 0..2 {
                prop_assert!((b.coefficients[j] - c * a.coefficients[j]).abs() <= 1e-8 * (1.0 + (c * a.coefficients[j]).abs()));
            }
            prop_assert!((s.coefficients[1] * c - a.coefficients[1]).abs() <= 1e-8 * (1.0 + a.coefficients[1].abs()));
            prop_assert!((s.t_stats[1] - a.t_stats[1]).abs() <= 1e-6 * (1.0 + a.t_stats[1].abs()));
        }
    }

    #[test]
    fn residual_tests_are_scale_invariant(y in values(15), x1 in values(15), c in 0.1..50.0f64) {
        let d = design(y.clone(), std::slice::from_ref(&x1));
        let s = design(y.iter().map(|v| v * c).collect(), &[x1]);
        if let (Ok(fa), Ok(fb)) = (ols_fit(&d), ols_fit(&s)) {
            if let (Ok(ja), Ok(jb)) = (jarque_bera(fa.residuals.as_slice()), jarque_bera(fb.residuals.as_slice())) {
                prop_assert!((ja.statistic - jb.statistic).abs() <= 1e-7 * (1.0 + ja.statistic));
            }
            if let (Ok(ba), Ok(bb)) = (breusch_pagan(&fa, &d), breusch_pagan(&fb, &s)) {
                prop_assert!((ba.statistic - bb.statistic).abs() <= 1e-7 * (1.0 + ba.statistic));
            }
            if let (Ok(ka), Ok(kb)) = (koenker_bassett(&fa, &d), koenker_bassett(&fb, &s)) {
                prop_assert!((ka.statistic - kb.statistic).abs() <= 1e-7 * (1.0 + ka.statistic));
            }
        }
    }

    #[test]
    fn moran_is_affine_invariant(v in values(20), a in 0.1..10.0f64, b in -100.0..100.0f64, flip in any::<bool>()) {
        let w = rook_lattice(4, 5).unwrap().row_standardize().weights;
        let z = DVector::from_vec(v);
        let a = if flip { -a } else { a };
        let t = z.map(|x| a * x + b);
        if let (Ok(i0), Ok(i1)) = (morans_i(&z, &w), morans_i(&t, &w)) {
            prop_assert!((i0.i_value - i1.i_value).abs() <= 1e-9);
            prop_assert!((i0.z_score - i1.z_score).abs() <= 1e-7);
        }
    }

    #[test]
    fn lsdv_equals_dummy_regression((g, t, y, x, effects) in panel_data()) {
        let y: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + effects[i / t]).collect();
        let d = panel(&y, std::slice::from_ref(&x), g);
        let Ok(fe) = fe_lsdv(&d) else { return Ok(()); };
        let n = g * t;
        let dummies = DMatrix::from_fn(n, g + 1, |i, j| if j == 0 { x[i] } else { ((i / t) == j - 1) as u8 as f64 });
        let mut names = vec!["x1".to_string()];
        names.extend((0..g).map(|k| format!("D{k}")));
        let dd = DesignMatrix::from_columns(DVector::from_vec(y), dummies, names).unwrap();
        let ols = ols_fit(&dd).unwrap();
        prop_assert!((fe.coefficients[0] - ols.coefficients[0]).abs() <= 1e-9 * (1.0 + ols.coefficients[0].abs()));
        prop_assert!((fe.std_errors[0] - ols.std_errors[0]).abs() <= 1e-9 * (1.0 + ols.std_errors[0]));
    }

    #[test]
    fn re_slope_lies_between_pooled_and_within((g, t, y, x, effects) in panel_data()) {
        let y: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + effects[i / t]).collect();
        let d = panel(&y, &[x], g);
        if let (Ok(fe), Ok(re), Ok(ols)) = (fe_lsdv(&d), re_gls(&d), ols_fit(&d)) {
            let (lo, hi) = if fe.coefficients[0] < ols.coefficients[1] {
                (fe.coefficients[0], ols.coefficients[1])
            } else {
                (ols.coefficients[1], fe.coefficients[0])
            };
            let tol = 1e-9 * (1.0 + lo.abs() + hi.abs());
            let b = re.coefficient("x1").unwrap();
            prop_assert!(b >= lo - tol && b <= hi + tol, "{} not in [{}, {}]", b, lo, hi);
            let theta = re.theta().unwrap();
            prop_assert!((0.0..=1.0).contains(&theta));
        }
    }

    #[test]
    fn hausman_invariant_to_reparameterization(
        (g, t, y, x1, effects) in panel_data(),
        a in prop::array::uniform4(-3.0..3.0f64),
    ) {
        let det = a[0] * a[3] - a[1] * a[2];
        prop_assume!(det.abs() > 0.1);
        let n = g * t;
        let x2: Vec<f64> = (0..n).map(|i| ((i * 13 + 5) % 7) as f64 - 3.0 + 0.1 * x1[(i + 1) % n]).collect();
        let y: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + effects[i / t] + 0.5 * x1[i]).collect();
        let z1: Vec<f64> = (0..n).map(|i| a[0] * x1[i] + a[2] * x2[i]).collect();
        let z2: Vec<f64> = (0..n).map(|i| a[1] * x1[i] + a[3] * x2[i]).collect();
        let d0 = panel(&y, &[x1, x2], g);
        let d1 = panel(&y, &[z1, z2], g);
        let h = |d: &DesignMatrix| -> Option<f64> {
            let fe = fe_lsdv(d).ok()?;
            let re = re_gls(d).ok()?;
            Some(hausman_test(&fe, &re).ok()?.statistic)
        };
        if let (Some(h0), Some(h1)) = (h(&d0), h(&d1)) {
            prop_assert!((h0 - h1).abs() <= 1e-8 * (1.0 + h0.abs()), "{} vs {}", h0, h1);
        }
    }

    #[test]
    fn row_standardized_spectrum_peaks_at_one(coords in prop::collection::vec((37.0..42.0f64, -9.5..-6.2f64), 4..12)) {
        let regions: Vec<Region> = coords
            .iter()
            .enumerate()
            .map(|(i, (lat, lon))| Region::new(format!("R{i:02}"), "r", NutsLevel::III, *lat, *lon).unwrap())
            .collect();
        let Ok(raw) = inverse_distance_weights(&regions, 1.0) else { return Ok(()); };
        let w = raw.row_standardize().weights;
        for i in 0..w.len() {
            prop_assert!((w.matrix().row(i).sum() - 1.0).abs() <= 1e-12);
        }
        let spec = w.spectrum();
        prop_assert!((spec.max_real - 1.0).abs() <= 1e-9, "max eigenvalue {}", spec.max_real);
        prop_assert!(spec.eigenvalues.iter().all(|(re, im)| (re * re + im * im).sqrt() <= 1.0 + 1e-9));
    }

    #[test]
    fn weights_csv_round_trip(n in 2usize..8, seed in any::<u64>()) {
        let regions = synthetic_regions(n, seed);
        let w = inverse_distance_weights(&regions, 2.0).unwrap();
        let back = SpatialWeights::parse_csv(&w.to_csv_string()).unwrap();
        prop_assert_eq!(back.region_order(), w.region_order());
        prop_assert!((back.matrix() - w.matrix()).amax() <= 1e-10 * w.matrix().amax());
    }

    #[test]
    fn spec_search_decision_replays(seed in any::<u64>(), rho in prop::sample::select(vec![0.0, 0.3, 0.7])) {
        let w = rook_lattice(6, 6).unwrap().row_standardize().weights;
        let d = simulate_sar_cross_section(&w, rho, &[1.0, 1.0], 1.0, seed).unwrap();
        let result = spec_search(&d, &w, 0.05).unwrap();
        prop_assert_eq!(decide(&result.trail, 0.05).unwrap(), result.chosen);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), n in 3usize..8) {
        let cfg = SimConfig { n_regions: n, n_periods: 2, master_seed: seed, ..SimConfig::default() };
        let regions = synthetic_regions(n, seed);
        let a = simulate_panel(&cfg, &regions).unwrap().to_csv_string();
        let b = simulate_panel(&cfg, &regions).unwrap().to_csv_string();
        prop_assert_eq!(a, b);
    }
}
