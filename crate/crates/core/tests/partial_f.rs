mod oracles;

use ndarray::Array2;
use seqreject::fdist::{f_cdf, f_pdf, f_sf};
use seqreject::lowdim::TestingHalf;
use seqreject::{Dataset, ScreenedSplit};

use oracles::{gaussian_matrix, gaussian_vector, ks_uniform, rng, simpson};

#[test]
fn cdf_matches_quadrature_of_density() {
    for &(d1, d2) in &[(2.0, 10.0), (3.0, 7.0), (5.0, 40.0), (10.0, 3.0), (4.0, 4.0)] {
        for &x in &[0.2, 0.7, 1.0, 1.9, 4.5] {
            let reference = simpson(|u| 2.0 * u * f_pdf(u * u, d1, d2), 0.0, f64::sqrt(x), 20_000);
            let got = f_cdf(x, d1, d2).unwrap();
            assert!((got - reference).abs() < 1e-8, "F({d1},{d2}) at {x}: {got} vs {reference}");
        }
    }
}

#[test]
fn survival_is_monotone_in_the_statistic() {
    for &(d1, d2) in &[(1.0, 5.0), (2.0, 43.0), (7.0, 12.0)] {
        let mut last = 1.0;
        for k in 0..400 {
            let s = f_sf(k as f64 * 0.05, d1, d2).unwrap();
            assert!(s <= last);
            last = s;
        }
    }
}

fn null_pvalues(seed: u64, replicates: usize) -> Vec<f64> {
    let mut r = rng(seed);
    let split = ScreenedSplit { b: 0, n_in: vec![], n_out: (0..50).collect(), s_hat: (0..5).collect(), lambda: None };
    (0..replicates)
        .map(|_| {
            let x: Array2<f64> = gaussian_matrix(&mut r, 50, 5);
            let noise = gaussian_vector(&mut r, 50);
            let y = &noise + &(x.column(2).to_owned() * 0.7 - x.column(4).to_owned() * 1.3);
            let data = Dataset::new(x, y).unwrap();
            let half = TestingHalf::new(&data, &split, false).unwrap();
            half.test(&[0, 1]).unwrap().unwrap().p_value
        })
        .collect()
}

#[test]
fn null_pvalues_are_uniform() {
    let ps = null_pvalues(31, 10_000);
    let ks = ks_uniform(&ps);
    assert!(ks < 0.02, "KS distance {ks}");
    for &alpha in &[0.01, 0.05, 0.1] {
        let rate = ps.iter().filter(|&&p| p <= alpha).count() as f64 / ps.len() as f64;
        let se = (alpha * (1.0 - alpha) / ps.len() as f64).sqrt();
        assert!(rate <= alpha + 3.0 * se, "P[p <= {alpha}] = {rate}");
    }
}

#[test]
fn intercept_keeps_the_test_exact_under_a_shifted_mean() {
    let mut r = rng(32);
    let split = ScreenedSplit { b: 0, n_in: vec![], n_out: (0..40).collect(), s_hat: (0..4).collect(), lambda: None };
    let ps: Vec<f64> = (0..4000)
        .map(|_| {
            let x = gaussian_matrix(&mut r, 40, 4);
            let y = gaussian_vector(&mut r, 40).mapv(|e| e + 5.0) + x.column(3).to_owned();
            let data = Dataset::new(x, y).unwrap();
            TestingHalf::new(&data, &split, true).unwrap().test(&[0, 2]).unwrap().unwrap().p_value
        })
        .collect();
    assert!(ks_uniform(&ps) < 0.03);
}

#[test]
fn signal_in_tested_columns_drives_pvalues_down() {
    let mut r = rng(33);
    let split = ScreenedSplit { b: 0, n_in: vec![], n_out: (0..50).collect(), s_hat: (0..5).collect(), lambda: None };
    let mut small = 0;
    for _ in 0..200 {
        let x = gaussian_matrix(&mut r, 50, 5);
        let y = x.column(0).to_owned() * 0.8 + gaussian_vector(&mut r, 50);
        let data = Dataset::new(x, y).unwrap();
        let p = TestingHalf::new(&data, &split, false).unwrap().test(&[0, 1]).unwrap().unwrap().p_value;
        small += (p <= 0.05) as usize;
    }
    assert!(small > 180, "{small} of 200 significant");
}
