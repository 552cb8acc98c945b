use proptest::prelude::*;
use statrs::function::gamma::gamma;

use awreg::bandwidth::{cv_scores, default_grid, pilot_bandwidth, SmoothingMode};
use awreg::simulation::{generate_sample, replication_rng};
use awreg::smoothing::Embedding;
use awreg::weights::first_step;
use awreg::{Kernel, Loss, SigmaModel};

/// `∫ K` by a radial Simpson rule, with the sphere area from the gamma function.
fn radial_integral(q: usize) -> f64 {
    let k = Kernel::epanechnikov(q).unwrap();
    let area = 2.0 * std::f64::consts::PI.powf(q as f64 / 2.0) / gamma(q as f64 / 2.0);
    let m = 2000;
    let h = 1.0 / m as f64;
    let mut u = vec![0.0; q];
    let mut acc = 0.0;
    for j in 0..=m {
        let r = j as f64 * h;
        u[q - 1] = r;
        let c = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += c * k.eval(&u).unwrap() * r.powi(q as i32 - 1);
    }
    area * acc * h / 3.0
}

#[test]
fn kernel_integrates_to_one_up_to_25_dims() {
    for q in 1..=25 {
        let v = radial_integral(q);
        assert!((v - 1.0).abs() < 1e-3, "q = {q}: {v}");
    }
}

fn sample(seed: u64, n: usize, q: usize) -> (Embedding, Vec<f64>) {
    let data = generate_sample(n, q, SigmaModel::Smooth, &mut replication_rng(seed, 0));
    let fs = first_step(&data, &Loss::Square).unwrap();
    let emb = SmoothingMode::Np.embedding(&data, &fs, 0.0).unwrap();
    let sq = fs.residuals.iter().map(|e| e * e).collect();
    (emb, sq)
}

#[test]
fn default_grid_brackets_pilot() {
    let (emb, _) = sample(3, 120, 2);
    let h0 = pilot_bandwidth(&emb);
    let grid = default_grid(&emb);
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(0.0, f64::max);
    assert!((lo - h0 / 4.0).abs() < 1e-12 * h0);
    assert!((hi - 4.0 * h0).abs() < 1e-12 * h0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cv_scores_nonnegative_and_permutation_invariant(seed in 0u64..1000, shift in 1usize..59) {
        let (emb, sq) = sample(seed, 60, 2);
        let grid = default_grid(&emb);
        let base = cv_scores(&emb, &sq, &grid);

        let perm: Vec<usize> = (0..60).map(|i| (i + shift) % 60).collect();
        let coords: Vec<f64> = perm.iter().flat_map(|&i| emb.point(i).to_vec()).collect();
        let permuted = Embedding::from_points(2, coords);
        let psq: Vec<f64> = perm.iter().map(|&i| sq[i]).collect();
        let other = cv_scores(&permuted, &psq, &grid);

        for ((s1, f1), (s2, f2)) in base.iter().zip(&other) {
            prop_assert_eq!(f1, f2);
            match (s1, s2) {
                (Some(a), Some(b)) => {
                    prop_assert!(*a >= 0.0);
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
                }
                (None, None) => {}
                _ => prop_assert!(false, "evaluability differs"),
            }
        }
        prop_assert_eq!(&base, &cv_scores(&emb, &sq, &grid));
    }
}
