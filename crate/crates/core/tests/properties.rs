use gpdm::geometry::{sample_annulus, sample_circle, sample_ellipse, Sampling};
use gpdm::ghost::{assemble_gpdm_operator, build_extrapolation_matrix, build_ghost_points, estimate_normals_secant, GhostMode};
use gpdm::kernel::{assemble_dm_operator, KernelConfig};
use gpdm::solver::{dense_solve, SddSolver};
use gpdm::CsrMatrix;
use proptest::prelude::*;

fn check_generator(a: &CsrMatrix) -> Result<(), TestCaseError> {
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sum: f64 = vals.iter().sum();
        prop_assert!(sum.abs() <= 1e-12 * scale.max(1.0), "row {i} sums to {sum}");
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                prop_assert!(v < 0.0, "diagonal {i} is {v}");
            } else {
                prop_assert!(v >= 0.0, "entry ({i}, {j}) is {v}");
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dm_operators_are_generators(n in 40usize..240, k in 8usize..40, log_eps in -6.0f64..-2.0, random in any::<bool>()) {
        let cloud = if random { sample_ellipse(n, Sampling::Random { seed: n as u64 }).unwrap() } else { sample_circle(n).unwrap() };
        let op = assemble_dm_operator(&cloud, &KernelConfig::new(log_eps.exp(), k, 1)).unwrap();
        check_generator(&op.matrix)?;
    }

    #[test]
    fn neumann_matrices_are_generators(i in 24usize..48, j in 6usize..12, log_eps in -7.0f64..-4.5, layers in 1usize..6) {
        let cloud = sample_annulus(i, j).unwrap();
        let sn = estimate_normals_secant(&cloud).unwrap();
        let normals: Vec<f64> = sn.iter().flat_map(|s| s.normal.iter().copied()).collect();
        let h: Vec<f64> = sn.iter().map(|s| s.h).collect();
        let frame = build_ghost_points(&cloud, &normals, &h, layers, GhostMode::WellSampled).unwrap();
        let blocks = assemble_gpdm_operator(&cloud, &frame, &KernelConfig::new(log_eps.exp(), 60, 2)).unwrap();
        check_generator(&blocks.neumann_matrix().unwrap())?;
    }

    #[test]
    fn extrapolation_is_exact_for_affine_data(i in 24usize..48, j in 6usize..12, layers in 1usize..6, c in proptest::collection::vec(-2.0f64..2.0, 6)) {
        let cloud = sample_annulus(i, j).unwrap();
        let sn = estimate_normals_secant(&cloud).unwrap();
        let normals: Vec<f64> = sn.iter().flat_map(|s| s.normal.iter().copied()).collect();
        let h: Vec<f64> = sn.iter().map(|s| 0.7 * s.h).collect();
        let frame = build_ghost_points(&cloud, &normals, &h, layers, GhostMode::Random).unwrap();
        let m = frame.m;
        let affine = |x: &[f64]| c[0] + x.iter().zip(&c[1..]).map(|(a, b)| a * b).sum::<f64>();
        let aug = frame.augmented_points(&cloud);
        let u: Vec<f64> = aug.chunks(m).map(affine).collect();
        let ghost_values = build_extrapolation_matrix(&frame).g.mul_vec(&u);
        let nb = frame.boundary.len();
        for k in 1..=layers {
            for b in 0..nb {
                let want = affine(frame.ghost(b, k));
                let got = ghost_values[(k - 1) * nb + b];
                prop_assert!((got - want).abs() <= 1e-11 * (1.0 + want.abs()) * k as f64, "ghost ({b}, {k}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn sdd_solver_matches_dense(n in 2usize..60, seed in any::<u64>(), dt in 1e-4f64..10.0) {
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut trip = Vec::new();
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if j != i && next() < 0.2 {
                    let w = next();
                    off += w;
                    trip.push((i, j, -dt * w));
                }
            }
            trip.push((i, i, 1.0 + dt * off));
        }
        let a = CsrMatrix::from_triplets(n, n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|_| next() - 0.5).collect();
        let x = SddSolver::new(a.clone()).unwrap().solve(&b).unwrap();
        let y = dense_solve(&a.to_dense(), n, &b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn csr_roundtrips(rows in 1usize..20, cols in 1usize..20, raw in proptest::collection::vec((0usize..400, 0usize..400, -5.0f64..5.0), 0..80)) {
        let trip: Vec<(usize, usize, f64)> = raw.iter().map(|&(r, c, v)| (r % rows, c % cols, v)).collect();
        let a = CsrMatrix::from_triplets(rows, cols, &trip).unwrap();
        let mut dense = vec![0.0; rows * cols];
        for &(r, c, v) in &trip {
            dense[r * cols + c] += v;
        }
        let got = a.to_dense();
        for (p, q) in got.iter().zip(&dense) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
        prop_assert_eq!(a.transpose().transpose().to_dense(), got.clone());
        let x: Vec<f64> = (0..cols).map(|j| j as f64 - 3.0).collect();
        let ax = a.mul_vec(&x);
        for r in 0..rows {
            let want: f64 = (0..cols).map(|c| dense[r * cols + c] * x[c]).sum();
            prop_assert!((ax[r] - want).abs() <= 1e-9);
        }
        let sums = a.row_sums();
        for r in 0..rows {
            prop_assert!((sums[r] - (0..cols).map(|c| dense[r * cols + c]).sum::<f64>()).abs() <= 1e-9);
        }
    }
}
