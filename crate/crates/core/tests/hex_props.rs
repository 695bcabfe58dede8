use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spurprobe_core::hex::{hex_forward, hex_infer, hex_project, hex_project_with_cache, HexHead};
use spurprobe_core::random::gaussian;
use spurprobe_core::tensor::gradcheck::{central_difference, max_relative_error};
use spurprobe_core::tensor::{cross_entropy_loss, MlpParams, Parameters};
use spurprobe_core::Matrix;

fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| gaussian(&mut rng)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// `b x c` pairs with `b >= c`.
fn shapes() -> impl Strategy<Value = (usize, usize)> {
    (2usize..9).prop_flat_map(|c| (c..c + 12, Just(c)))
}

/// Ratio of extreme singular values. Round-off in the projection grows with
/// its square, so the tight tolerances are checked on conditioned inputs.
fn condition(m: &Matrix) -> f64 {
    let sv = nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.data()).singular_values();
    sv.max() / sv.min()
}

/// Smallest |pre-activation| over the hidden ReLUs; finite differences are
/// only meaningful away from the kinks.
fn relu_margin(mlp: &MlpParams, x: &Matrix) -> f64 {
    let t = mlp.forward_trace(x).unwrap();
    let hidden = &t.outputs[..t.outputs.len() - 1];
    hidden.iter().flat_map(|m| m.data().iter()).fold(f64::INFINITY, |acc, v| acc.min(v.abs()))
}

fn flatten<P: Parameters>(p: &P) -> Vec<f64> {
    p.tensors().into_iter().flatten().copied().collect()
}

fn assign<P: Parameters>(p: &mut P, flat: &[f64]) {
    let mut at = 0;
    for t in p.tensors_mut() {
        let n = t.len();
        t.copy_from_slice(&flat[at..at + n]);
        at += n;
    }
}

proptest! {
    #[test]
    fn projection_is_orthogonal_to_the_naive_span((b, c) in shapes(), seed in any::<u64>()) {
        let a = matrix(b, c, seed);
        let g = matrix(b, c, seed ^ 0x5bd1);
        prop_assume!(condition(&g) <= 1e3);
        let l = hex_project(&a, &g, 0.0).unwrap();
        let bound = 1e-6 * g.frobenius_norm() * a.frobenius_norm();
        prop_assert!(g.t_matmul(&l).unwrap().max_abs() <= bound);
    }

    #[test]
    fn projection_is_idempotent((b, c) in shapes(), seed in any::<u64>()) {
        let a = matrix(b, c, seed);
        let g = matrix(b, c, seed ^ 0x5bd1);
        prop_assume!(condition(&g) <= 1e3);
        let l = hex_project(&a, &g, 0.0).unwrap();
        let again = hex_project(&l, &g, 0.0).unwrap();
        // F_L itself vanishes when b == c, so the scale is taken from F_A.
        let scale = l.frobenius_norm().max(a.frobenius_norm());
        prop_assert!(again.sub(&l).unwrap().frobenius_norm() <= 1e-9 * scale);
    }

    #[test]
    fn naive_span_is_annihilated((b, c) in shapes(), seed in any::<u64>()) {
        let g = matrix(b, c, seed);
        prop_assume!(condition(&g) <= 1e3);
        let a = g.matmul(&matrix(c, c, seed ^ 7)).unwrap();
        let l = hex_project(&a, &g, 0.0).unwrap();
        prop_assert!(l.frobenius_norm() <= 1e-6 * a.frobenius_norm());
    }

    #[test]
    fn huge_lambda_leaves_input_alone((b, c) in shapes(), seed in any::<u64>()) {
        let a = matrix(b, c, seed);
        let g = matrix(b, c, seed ^ 0x5bd1);
        let lambda = 1e8 * g.t_matmul(&g).unwrap().frobenius_norm();
        let l = hex_project(&a, &g, lambda).unwrap();
        prop_assert!(l.sub(&a).unwrap().frobenius_norm() <= 1e-4 * a.frobenius_norm());
    }

    #[test]
    fn projection_gradients_match_finite_differences(
        (b, c) in (1usize..5).prop_flat_map(|c| (c..9, Just(c))),
        seed in any::<u64>(),
        lambda in prop::sample::select(vec![0.0, 1e-4, 0.1, 1.0, 10.0]),
    ) {
        let a = matrix(b, c, seed);
        let g = matrix(b, c, seed ^ 0x5bd1);
        prop_assume!(condition(&g) <= 1e3);
        // A square F_G at λ = 0 projects everything to zero; there is no
        // gradient to check beyond round-off.
        prop_assume!(lambda > 0.0 || b > c);
        let w = matrix(b, c, seed ^ 0xa11);
        let loss = |a: &Matrix, g: &Matrix, lambda: f64| {
            let l = hex_project(a, g, lambda).unwrap();
            l.data().iter().zip(w.data()).map(|(x, y)| x * y).sum::<f64>()
        };
        let grad = hex_project_with_cache(&a, &g, lambda).unwrap().backward(&a, &g, &w).unwrap();
        let na = central_difference(a.data(), 1e-5, |v| loss(&Matrix::from_vec(b, c, v.to_vec()).unwrap(), &g, lambda));
        let ng = central_difference(g.data(), 1e-5, |v| loss(&a, &Matrix::from_vec(b, c, v.to_vec()).unwrap(), lambda));
        prop_assert!(max_relative_error(grad.d_f_a.data(), &na) <= 1e-4);
        prop_assert!(max_relative_error(grad.d_f_g.data(), &ng) <= 1e-4);
        if lambda > 0.0 {
            // Checked in log space, the parameterization training uses.
            let nl = central_difference(&[lambda.ln()], 1e-5, |v| loss(&a, &g, v[0].exp()));
            prop_assert!(max_relative_error(&[lambda * grad.d_lambda], &nl) <= 1e-4);
        }
    }

    #[test]
    fn head_gradients_match_finite_differences(
        rows in 3usize..9, main in 1usize..5, naive in 1usize..5, dim in 1usize..4, classes in 2usize..4,
        seed in any::<u64>(), naive_weight in prop::sample::select(vec![0.0, 0.5, 5.0]),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut head = HexHead::new(main, naive, dim, classes, 0.3, &mut rng).unwrap();
        let xm = matrix(rows, main, seed ^ 1);
        let xn = matrix(rows, naive, seed ^ 2);
        prop_assume!(relu_margin(&head.main, &xm).min(relu_margin(&head.naive, &xn)) > 1e-3);
        let gold: Vec<usize> = (0..rows).map(|i| i % classes).collect();
        let theta = flatten(&head);
        let (_, grad) = head.loss_and_grad(&xm, &xn, &gold, naive_weight).unwrap();
        let numeric = central_difference(&theta, 1e-5, |t| {
            assign(&mut head, t);
            let out = hex_forward(&head, &xm, &xn).unwrap();
            let (l, _) = cross_entropy_loss(&out.f_l, &gold).unwrap();
            let (g, _) = cross_entropy_loss(&out.f_g, &gold).unwrap();
            l + naive_weight * g
        });
        let err = max_relative_error(&flatten(&grad), &numeric);
        prop_assert!(err <= 1e-4, "max relative error {}", err);
    }

    #[test]
    fn inference_ignores_the_naive_branch(
        rows in 1usize..9, main in 1usize..6, naive in 1usize..6, dim in 1usize..6, classes in 2usize..5,
        seed in any::<u64>(), lambda in 1e-8f64..1e3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = HexHead::new(main, naive, dim, classes, 1e-4, &mut rng).unwrap();
        let x = matrix(rows, main, seed ^ 3);
        let before = hex_infer(&head, &x).unwrap();
        let mut other = head.clone();
        let mut naive_params: Vec<f64> = flatten(&other.naive);
        naive_params.iter_mut().for_each(|v| *v = 10.0 * gaussian(&mut rng));
        assign(&mut other.naive, &naive_params);
        other.log_lambda = lambda.ln();
        prop_assert_eq!(hex_infer(&other, &x).unwrap(), before);
    }
}
