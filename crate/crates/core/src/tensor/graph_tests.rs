use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::tensor::grad_check;

fn t2(rows: &[&[f64]]) -> Tensor {
    Tensor::from_rows(rows).unwrap()
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn matmul_identity_and_dot() {
    let mut g = Graph::new();
    let a = g.constant(t2(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let b = g.constant(t2(&[&[3.0, 4.0], &[5.0, 6.0]]));
    let c = g.matmul(a, b).unwrap();
    assert_eq!(g.value(c).data(), &[3.0, 4.0, 5.0, 6.0]);

    let x = g.constant(t2(&[&[1.0, 2.0]]));
    let y = g.constant(t2(&[&[3.0], &[4.0]]));
    let z = g.matmul(x, y).unwrap();
    assert_eq!(g.value(z).data(), &[11.0]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[4, 5]));
    let err = g.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]") && err.contains("[4, 5]"), "{err}");
}

#[test]
fn matmul_nt_equals_explicit_transpose() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut g = Graph::new();
    let a = g.constant(random(&[3, 4], &mut rng));
    let b = g.constant(random(&[5, 4], &mut rng));
    let bt = g.transpose(b).unwrap();
    let c1 = g.matmul(a, bt).unwrap();
    let c2 = g.matmul_nt(a, b).unwrap();
    for (x, y) in g.value(c1).data().iter().zip(g.value(c2).data()) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn elementwise_examples() {
    let mut g = Graph::new();
    let z = g.constant(Tensor::scalar(0.0));
    let s = g.sigmoid(z).unwrap();
    assert_eq!(g.item(s), 0.5);

    let v = g.constant(Tensor::vector(vec![0.0, 0.0, 0.0]));
    let p = g.softmax(v, 0).unwrap();
    for &x in g.value(p).data() {
        assert!((x - 1.0 / 3.0).abs() < 1e-15);
    }

    let w = g.constant(Tensor::vector(vec![0.2, -0.3]));
    let a = g.abs(w).unwrap();
    let s = g.sum_all(a).unwrap();
    assert!((g.item(s) - 0.5).abs() < 1e-15);
}

#[test]
fn axis_errors() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::zeros(&[2, 3]));
    assert!(matches!(g.softmax(x, 2), Err(Error::Axis { axis: 2, rank: 2 })));
    assert!(g.sum(x, 5).is_err());
    let y = g.constant(Tensor::zeros(&[3, 3]));
    assert!(g.concat(&[x, y], 1).is_err());
    assert!(g.concat(&[x, y], 0).is_ok());
}

#[test]
fn backward_square_and_sum() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    let xx = g.mul(x, x).unwrap();
    let l = g.sum_all(xx).unwrap();
    g.backward(l).unwrap();
    assert_eq!(g.grad(x).data(), &[2.0, 4.0]);

    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![-3.0, 0.5, 7.0]));
    let l = g.sum_all(x).unwrap();
    g.backward(l).unwrap();
    assert_eq!(g.grad(x).data(), &[1.0, 1.0, 1.0]);
}

#[test]
fn backward_constant_loss_leaves_zero_grads() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    let c = g.constant(Tensor::scalar(4.0));
    let l = g.scale(c, 2.0).unwrap();
    g.backward(l).unwrap();
    assert_eq!(g.grad(x).data(), &[0.0, 0.0]);
}

#[test]
fn backward_rejects_non_scalar_and_foreign_loss() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    assert!(g.backward(x).is_err());
    let mut other = Graph::new();
    let y = other.param(Tensor::scalar(1.0));
    assert!(g.backward(y).is_err());
}

#[test]
fn fan_out_sums_contributions() {
    let mut g = Graph::new();
    let x = g.param(Tensor::scalar(0.7));
    let y = g.add(x, x).unwrap();
    g.backward(y).unwrap();
    assert_eq!(g.grad(x).item(), 2.0);
}

#[test]
fn repeated_backward_accumulates() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    let xx = g.mul(x, x).unwrap();
    let l = g.sum_all(xx).unwrap();
    g.backward(l).unwrap();
    g.backward(l).unwrap();
    assert_eq!(g.grad(x).data(), &[4.0, 8.0]);
    g.zero_grad();
    assert_eq!(g.grad(x).data(), &[0.0, 0.0]);
}

#[test]
fn no_grad_graph_records_no_requirements() {
    let mut g = Graph::no_grad();
    let x = g.param(Tensor::scalar(1.0));
    let y = g.mul(x, x).unwrap();
    assert!(!g.requires_grad(y));
}

#[cfg(debug_assertions)]
#[test]
fn non_finite_values_are_detected() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::scalar(0.0));
    assert!(matches!(g.ln(x), Err(Error::NonFinite("ln"))));
}

#[test]
fn wrap_angle_range() {
    assert_eq!(wrap_angle(PI), PI);
    assert_eq!(wrap_angle(-PI), PI);
    assert!((wrap_angle(6.2) - (6.2 - 2.0 * PI)).abs() < 1e-15);
    assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
    assert_eq!(wrap_angle(0.0), 0.0);
}

// Every primitive against central differences at h = 1e-5 on inputs in [-1, 1].
fn check_primitive(shapes: &[&[usize]], seed: u64, f: impl FnMut(&mut Graph, &[Var]) -> Result<Var>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: Vec<Tensor> = shapes.iter().map(|s| random(s, &mut rng)).collect();
    let rep = grad_check(&mut params, &[], 1e-5, 1e-4, f).unwrap();
    assert!(rep.passed(), "{rep:#?}");
}

/// Reduces any tensor to a scalar with a fixed non-uniform weighting so that
/// every output coordinate receives a distinct upstream gradient.
fn weighted_sum(g: &mut Graph, v: Var) -> Result<Var> {
    let n = g.value(v).len();
    let w: Vec<f64> = (0..n).map(|i| 0.3 + 0.17 * i as f64 - 0.01 * (i * i) as f64).collect();
    let w = g.constant(Tensor::new(g.shape(v).to_vec(), w)?);
    let p = g.mul(v, w)?;
    g.sum_all(p)
}

#[test]
fn gradcheck_matmul_variants() {
    check_primitive(&[&[3, 4], &[4, 2]], 1, |g, v| {
        let y = g.matmul(v[0], v[1])?;
        weighted_sum(g, y)
    });
    check_primitive(&[&[3, 4], &[5, 4]], 2, |g, v| {
        let y = g.matmul_nt(v[0], v[1])?;
        weighted_sum(g, y)
    });
    check_primitive(&[&[3, 4]], 3, |g, v| {
        let y = g.transpose(v[0])?;
        weighted_sum(g, y)
    });
}

#[test]
fn gradcheck_binary_with_broadcast() {
    check_primitive(&[&[3, 4], &[4]], 4, |g, v| {
        let y = g.add(v[0], v[1])?;
        weighted_sum(g, y)
    });
    check_primitive(&[&[3, 4], &[3, 4]], 5, |g, v| {
        let y = g.sub(v[0], v[1])?;
        weighted_sum(g, y)
    });
    check_primitive(&[&[2, 3], &[3]], 6, |g, v| {
        let y = g.mul(v[0], v[1])?;
        weighted_sum(g, y)
    });
}

#[test]
fn gradcheck_unary() {
    type Unary = fn(&mut Graph, Var) -> Result<Var>;
    let ops: [Unary; 8] = [
        |g, x| g.abs(x),
        |g, x| g.relu(x),
        |g, x| g.gelu(x),
        |g, x| g.sigmoid(x),
        |g, x| g.scale(x, -1.7),
        |g, x| g.add_scalar(x, 0.4),
        |g, x| g.wrap_angle(x),
        |g, x| g.clamp(x, -0.5, 0.5),
    ];
    for (k, op) in ops.iter().enumerate() {
        check_primitive(&[&[2, 5]], 10 + k as u64, |g, v| {
            let y = op(g, v[0])?;
            weighted_sum(g, y)
        });
    }
    check_primitive(&[&[6]], 30, |g, v| {
        let a = g.abs(v[0])?;
        let p = g.add_scalar(a, 0.5)?;
        let y = g.ln(p)?;
        weighted_sum(g, y)
    });
    check_primitive(&[&[6], &[6]], 31, |g, v| {
        let x = g.add_scalar(v[1], 1.5)?;
        let y = g.atan2(v[0], x)?;
        weighted_sum(g, y)
    });
}

#[test]
fn gradcheck_normalisation() {
    check_primitive(&[&[3, 4]], 40, |g, v| {
        let y = g.softmax(v[0], 1)?;
        weighted_sum(g, y)
    });
    check_primitive(&[&[3, 4]], 41, |g, v| {
        let y = g.softmax(v[0], 0)?;
        weighted_sum(g, y)
    });
    check_primitive(&[&[3, 5], &[5], &[5]], 42, |g, v| {
        let y = g.layer_norm(v[0], v[1], v[2])?;
        weighted_sum(g, y)
    });
}

#[test]
fn gradcheck_reductions_and_structure() {
    for axis in 0..3 {
        check_primitive(&[&[2, 3, 4]], 50 + axis as u64, |g, v| {
            let y = g.sum(v[0], axis)?;
            weighted_sum(g, y)
        });
        check_primitive(&[&[2, 3, 4]], 60 + axis as u64, |g, v| {
            let y = g.mean(v[0], axis)?;
            weighted_sum(g, y)
        });
    }
    check_primitive(&[&[2, 3]], 70, |g, v| {
        let y = g.mean_all(v[0])?;
        g.scale(y, 3.0)
    });
    check_primitive(&[&[2, 3], &[2, 1], &[2, 2]], 71, |g, v| {
        let y = g.concat(&[v[0], v[1], v[2]], 1)?;
        weighted_sum(g, y)
    });
    check_primitive(&[&[4, 3]], 72, |g, v| {
        let y = g.slice(v[0], 0, 1..3)?;
        weighted_sum(g, y)
    });
    check_primitive(&[&[4, 3]], 73, |g, v| {
        let y = g.reshape(v[0], &[2, 6])?;
        weighted_sum(g, y)
    });
}

proptest! {
    #[test]
    fn softmax_is_a_probability_vector(xs in prop::collection::vec(-30.0f64..30.0, 1..12)) {
        let mut g = Graph::no_grad();
        let n = xs.len();
        let x = g.constant(Tensor::vector(xs));
        let p = g.softmax(x, 0).unwrap();
        let d = g.value(p).data();
        prop_assert!(d.iter().all(|&v| v >= 0.0));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(d.len(), n);
    }

    #[test]
    fn concat_then_slice_roundtrips(rows_a in 1usize..4, rows_b in 1usize..4, cols in 1usize..5, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&[rows_a, cols], &mut rng);
        let b = random(&[rows_b, cols], &mut rng);
        let mut g = Graph::no_grad();
        let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
        let c = g.concat(&[va, vb], 0).unwrap();
        let sa = g.slice(c, 0, 0..rows_a).unwrap();
        let sb = g.slice(c, 0, rows_a..rows_a + rows_b).unwrap();
        prop_assert_eq!(g.value(sa), &a);
        prop_assert_eq!(g.value(sb), &b);
    }
}
