use proptest::prelude::*;

use sylnet::dynamics::{Algorithm, NetworkState};
use sylnet::matcore::frobenius_inner;
use sylnet::penalty::{L1Norm, Regularizer};
use sylnet::problem::{distributed_objective_reg, gen_exact_instance};
use sylnet::simulator::{Trace, TraceRecord};
use sylnet::{BlockPartition, DenseMatrix, Network, PenaltySpec};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-10.0f64..10.0, rows * cols).prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

fn triple() -> impl Strategy<Value = (DenseMatrix, DenseMatrix, DenseMatrix)> {
    (1usize..5, 1usize..5, 1usize..5, 1usize..5)
        .prop_flat_map(|(p, q, s, t)| (matrix(p, q), matrix(q, s), matrix(s, t)))
}

fn connected_graph() -> impl Strategy<Value = Network> {
    (2usize..7, 0.2f64..1.0, any::<u64>()).prop_map(|(n, p, seed)| Network::erdos_renyi(n, p, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn vec_of_product_is_kronecker((a, x, b) in triple()) {
        let lhs = a.matmul(&x).unwrap().matmul(&b).unwrap().vec();
        let rhs = b.transpose().kron(&a).matmul(&x.vec()).unwrap();
        let scale = 1.0 + a.frobenius_norm() * x.frobenius_norm() * b.frobenius_norm();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-10 * scale);
    }

    #[test]
    fn unvec_inverts_vec(x in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c))) {
        let v = x.vec();
        prop_assert_eq!(DenseMatrix::unvec(v.as_slice(), x.rows(), x.cols()).unwrap(), x);
    }

    #[test]
    fn inner_product_matches_norm_and_vec(
        (x, y) in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| (matrix(r, c), matrix(r, c)))
    ) {
        let ip = frobenius_inner(&x, &y).unwrap();
        let via_vec: f64 = x.vec().as_slice().iter().zip(y.vec().as_slice()).map(|(a, b)| a * b).sum();
        prop_assert!((ip - via_vec).abs() <= 1e-10 * (1.0 + ip.abs()));
        let nx = x.frobenius_norm();
        prop_assert!((frobenius_inner(&x, &x).unwrap() - nx * nx).abs() <= 1e-10 * (1.0 + nx * nx));
        prop_assert!(ip.abs() <= nx * y.frobenius_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn neighbor_sums_are_the_kronecker_laplacian(net in connected_graph(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (m, r) = (2, 3);
        let blocks: Vec<DenseMatrix> =
            (0..net.n()).map(|_| DenseMatrix::from_fn(m, r, |_, _| rng.random_range(-1.0..1.0))).collect();
        let mut stacked = Vec::new();
        for b in &blocks {
            stacked.extend_from_slice(b.vec().as_slice());
        }
        let stacked = DenseMatrix::column(&stacked);
        let full = net.laplacian().kron(&DenseMatrix::identity(m * r)).matmul(&stacked).unwrap();
        let mut total = DenseMatrix::zeros(m, r);
        for i in 0..net.n() {
            let local = net.neighbor_sum(&blocks, i).unwrap();
            let expect = full.row_band(i * m * r, m * r).unwrap();
            prop_assert!(local.vec().sub(&expect).unwrap().max_abs() <= 1e-12);
            total.axpy(1.0, &local).unwrap();
        }
        prop_assert!(total.max_abs() <= 1e-12);
    }

    #[test]
    fn l1_prox_satisfies_its_inclusion(
        (x, t) in ((1usize..5, 1usize..5).prop_flat_map(|(r, c)| matrix(r, c)), 0.0f64..3.0)
    ) {
        // u = prox(x) iff x − u ∈ t·∂|u|_1
        let u = L1Norm.prox(&x, t);
        let gap = L1Norm.min_norm_residual(&x.sub(&u).unwrap(), &u, t);
        prop_assert!(gap.max_abs() <= 1e-12);
        prop_assert!(L1Norm.value(&u) <= L1Norm.value(&x) + 1e-12);
    }

    #[test]
    fn objective_matches_centralized_at_feasible_points(seed in 0u64..500, alpha in 0.0f64..1.0) {
        let part = BlockPartition::new(vec![1, 2, 1], vec![2, 1, 1]).unwrap();
        let (prob, _) = gen_exact_instance(part.clone(), Network::path(3).unwrap(), seed).unwrap();
        let prob = prob.with_penalty(PenaltySpec::l1(alpha.max(1e-3)).unwrap());
        let x = NetworkState::random(&prob, Algorithm::Regularized, 1.0, seed).agent(0).x.clone();
        let ax = prob.a().matmul(&x).unwrap();
        // consensual X with Z_i the column bands of AX satisfies every constraint
        let mut s = NetworkState::zeros(&prob, Algorithm::Regularized);
        for (i, a) in s.agents_mut().iter_mut().enumerate() {
            let (off, len) = part.col_range(i).unwrap();
            a.x = x.clone();
            a.z = ax.col_band(off, len).unwrap();
        }
        let alpha = alpha.max(1e-3);
        let distributed = distributed_objective_reg(&prob, &s, alpha).unwrap();
        let res = prob.residual(&x).unwrap();
        let central = 0.5 * res * res + prob.n() as f64 * alpha * x.l1_norm();
        prop_assert!((distributed - central).abs() <= 1e-10 * (1.0 + central));
    }

    #[test]
    fn trace_csv_roundtrip(rows in prop::collection::vec(
        (1e-6f64..1e3, prop::option::of(1e-300f64..1e3), 0.0f64..1e3, 0.0f64..1e3, prop::option::of(0.0f64..1e3), 0.0f64..1e3),
        0..20,
    )) {
        let mut trace = Trace::default();
        let mut t = 0.0;
        for (dt, e, c, k, l, f) in rows {
            trace.times.push(t);
            t += dt;
            trace.records.push(TraceRecord {
                estimation_error: e,
                consensus_error: c,
                kkt_residual: k,
                lyapunov: l,
                field_norm: f,
            });
        }
        let back = Trace::parse_csv(&trace.to_csv(), "mem").unwrap();
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn matrix_text_roundtrip_is_bit_exact(x in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| matrix(r, c))) {
        let back = DenseMatrix::parse_text(&x.to_text(), "mem").unwrap();
        prop_assert_eq!(back, x);
    }
}
