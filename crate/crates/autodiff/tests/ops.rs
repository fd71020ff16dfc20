//! Per-primitive checks: hand-computable cases plus central
//! finite-difference verification of every backward rule.

use autodiff::{gradient_check, Activation, AdError, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(data, shape).unwrap()
}

// ---------------------------------------------------------------- matmul

#[test]
fn matmul_identity() {
    let tape = Tape::no_grad();
    let i2 = Tensor::new(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
    let a = Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
    let out = tape.matmul(&i2, &a).unwrap();
    assert_eq!(out.data(), a.data());
}

#[test]
fn matmul_hand_sum() {
    let tape = Tape::no_grad();
    let a = Tensor::new(vec![1.0, 2.0], &[1, 2]).unwrap();
    let b = Tensor::new(vec![3.0, 4.0], &[2, 1]).unwrap();
    let out = tape.matmul(&a, &b).unwrap();
    assert_eq!(out.data(), &[11.0]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let tape = Tape::no_grad();
    let a = Tensor::new(vec![0.0; 6], &[2, 3]).unwrap();
    let b = Tensor::new(vec![0.0; 8], &[4, 2]).unwrap();
    let err = tape.matmul(&a, &b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
}

#[test]
fn matmul_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = randn(&mut rng, &[3, 4]);
    let b = randn(&mut rng, &[4, 2]);
    let err = gradient_check(
        |t, xs| {
            let y = t.matmul(&xs[0], &xs[1])?;
            t.sum_all(&t.mul(&y, &y)?)
        },
        &[a, b],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "rel err {err}");
}

// ---------------------------------------------------------------- softmax

#[test]
fn softmax_uniform_on_equal_logits() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![0.0, 0.0, 0.0], &[3]).unwrap();
    let y = tape.softmax(&x, 0).unwrap();
    for v in y.data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn softmax_no_overflow_on_huge_logits() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![1000.0, 0.0], &[2]).unwrap();
    let y = tape.softmax(&x, 0).unwrap();
    assert!((y.data()[0] - 1.0).abs() < 1e-12);
    assert!(y.data()[1].abs() < 1e-12);
}

#[test]
fn softmax_matches_high_precision_reference() {
    // exp-normalize of [1,2,3] computed with 60-digit arithmetic.
    let expected = [
        0.0900305731703804579980221,
        0.2447284710547976524729596,
        0.6652409557748218895290183,
    ];
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![1.0, 2.0, 3.0], &[3]).unwrap();
    let y = tape.softmax(&x, 0).unwrap();
    for (v, e) in y.data().iter().zip(expected) {
        assert!((v - e).abs() < 1e-15, "{v} vs {e}");
    }
}

#[test]
fn softmax_gradient_through_matmul() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = randn(&mut rng, &[3, 3]);
    let b = randn(&mut rng, &[3, 3]);
    let err = gradient_check(
        |t, xs| {
            let y = t.matmul(&xs[0], &xs[1])?;
            let s = t.softmax(&y, 1)?;
            t.sum_all(&t.mul(&s, &xs[0])?)
        },
        &[a, b],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "rel err {err}");
}

// ---------------------------------------------------------------- conv2d

#[test]
fn conv2d_identity_kernel() {
    let tape = Tape::no_grad();
    let x = Tensor::new((1..=9).map(f64::from).collect(), &[1, 1, 3, 3]).unwrap();
    let w = Tensor::new(vec![1.0], &[1, 1, 1, 1]).unwrap();
    let b = Tensor::new(vec![0.0], &[1]).unwrap();
    let y = tape.conv2d(&x, &w, &b, 1, (0, 0)).unwrap();
    assert_eq!(y.shape(), &[1, 1, 3, 3]);
    assert_eq!(y.data(), x.data());
}

#[test]
fn conv2d_counting_window() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![1.0; 9], &[1, 1, 3, 3]).unwrap();
    let w = Tensor::new(vec![1.0; 4], &[1, 1, 2, 2]).unwrap();
    let b = Tensor::new(vec![0.0], &[1]).unwrap();
    let y = tape.conv2d(&x, &w, &b, 1, (0, 0)).unwrap();
    assert_eq!(y.shape(), &[1, 1, 2, 2]);
    assert_eq!(y.data(), &[4.0, 4.0, 4.0, 4.0]);
}

#[test]
fn conv2d_kernel_larger_than_padded_input_errors() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![1.0; 4], &[1, 1, 2, 2]).unwrap();
    let w = Tensor::new(vec![1.0; 25], &[1, 1, 5, 5]).unwrap();
    let b = Tensor::new(vec![0.0], &[1]).unwrap();
    assert!(matches!(
        tape.conv2d(&x, &w, &b, 1, (1, 1)),
        Err(AdError::DimError { .. })
    ));
}

#[test]
fn conv2d_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = randn(&mut rng, &[2, 3, 8, 8]);
    let w = randn(&mut rng, &[4, 3, 4, 4]);
    let b = randn(&mut rng, &[4]);
    let err = gradient_check(
        |t, xs| {
            let y = t.conv2d(&xs[0], &xs[1], &xs[2], 2, (1, 1))?;
            t.sum_all(&t.mul(&y, &y)?)
        },
        &[x, w, b],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-5, "rel err {err}");
}

// ---------------------------------------------------------------- deconv2d

#[test]
fn deconv2d_broadcast_case() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![3.5], &[1, 1, 1, 1]).unwrap();
    let w = Tensor::new(vec![1.0; 4], &[1, 1, 2, 2]).unwrap();
    let b = Tensor::new(vec![0.0], &[1]).unwrap();
    let y = tape.deconv2d(&x, &w, &b, 2, (0, 0)).unwrap();
    assert_eq!(y.shape(), &[1, 1, 2, 2]);
    assert_eq!(y.data(), &[3.5, 3.5, 3.5, 3.5]);
}

#[test]
fn deconv2d_equals_conv2d_input_gradient() {
    // conv: y[1,2,H',W'] = x[1,3,H,W] ⋆ w[2,3,3,3], stride 2, pad 1.
    // The gradient of sum(y·g) w.r.t. x must equal deconv2d(g, w).
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = randn(&mut rng, &[1, 3, 7, 7]).to_param();
    let w = randn(&mut rng, &[2, 3, 3, 3]);
    let b0 = Tensor::zeros(&[2]);
    let tape = Tape::new();
    let y = tape.conv2d(&x, &w, &b0, 2, (1, 1)).unwrap();
    let g = randn(&mut rng, y.shape());
    let loss = tape.sum_all(&tape.mul(&y, &g).unwrap()).unwrap();
    tape.backward(&loss).unwrap();
    let dx = x.grad().unwrap();

    let tape2 = Tape::no_grad();
    let b1 = Tensor::zeros(&[3]);
    let via_deconv = tape2.deconv2d(&g, &w, &b1, 2, (1, 1)).unwrap();
    assert_eq!(via_deconv.shape(), &[1, 3, 7, 7]);
    for (a, b) in dx.iter().zip(via_deconv.data()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn deconv2d_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let x = randn(&mut rng, &[1, 2, 3, 3]);
    let w = randn(&mut rng, &[2, 3, 4, 4]);
    let b = randn(&mut rng, &[3]);
    let err = gradient_check(
        |t, xs| {
            let y = t.deconv2d(&xs[0], &xs[1], &xs[2], 2, (1, 1))?;
            t.sum_all(&t.mul(&y, &y)?)
        },
        &[x, w, b],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-5, "rel err {err}");
}

// ---------------------------------------------------------------- linear

#[test]
fn linear_identity() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![2.0, -1.0], &[1, 2]).unwrap();
    let w = Tensor::new(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
    let b = Tensor::zeros(&[2]);
    let y = tape.linear(&x, &w, &b).unwrap();
    assert_eq!(y.data(), x.data());
}

#[test]
fn linear_hand_sum() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![1.0, 1.0], &[1, 2]).unwrap();
    let w = Tensor::new(vec![2.0, 3.0], &[1, 2]).unwrap();
    let b = Tensor::new(vec![1.0], &[1]).unwrap();
    let y = tape.linear(&x, &w, &b).unwrap();
    assert_eq!(y.data(), &[6.0]);
}

#[test]
fn linear_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let x = randn(&mut rng, &[3, 5]);
    let w = randn(&mut rng, &[2, 5]);
    let b = randn(&mut rng, &[2]);
    let err = gradient_check(
        |t, xs| {
            let y = t.linear(&xs[0], &xs[1], &xs[2])?;
            t.sum_all(&t.mul(&y, &y)?)
        },
        &[x, w, b],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "rel err {err}");
}

// ---------------------------------------------------------------- batch_norm

#[test]
fn batch_norm_constant_channel_is_zero() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![5.0; 8], &[2, 1, 2, 2]).unwrap();
    let gamma = Tensor::new(vec![1.0], &[1]).unwrap();
    let beta = Tensor::zeros(&[1]);
    let (y, stats) = tape
        .batch_norm(&x, &gamma, &beta, &Tensor::zeros(&[1]), &Tensor::zeros(&[1]), true, 1e-5)
        .unwrap();
    assert!(y.data().iter().all(|v| *v == 0.0));
    let stats = stats.unwrap();
    assert!((stats.mean[0] - 5.0).abs() < 1e-12);
}

#[test]
fn batch_norm_already_normalized_pair() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![-1.0, 1.0], &[2, 1, 1, 1]).unwrap();
    let gamma = Tensor::new(vec![1.0], &[1]).unwrap();
    let beta = Tensor::zeros(&[1]);
    let (y, _) = tape
        .batch_norm(&x, &gamma, &beta, &Tensor::zeros(&[1]), &Tensor::zeros(&[1]), true, 1e-5)
        .unwrap();
    assert!((y.data()[0] + 1.0).abs() < 1e-4);
    assert!((y.data()[1] - 1.0).abs() < 1e-4);
}

#[test]
fn batch_norm_single_element_channel_errors() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![1.0, 2.0], &[1, 2, 1, 1]).unwrap();
    let gamma = Tensor::new(vec![1.0, 1.0], &[2]).unwrap();
    let beta = Tensor::zeros(&[2]);
    assert!(matches!(
        tape.batch_norm(&x, &gamma, &beta, &Tensor::zeros(&[2]), &Tensor::zeros(&[2]), true, 1e-5),
        Err(AdError::DegenerateStats { .. })
    ));
}

#[test]
fn batch_norm_training_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let x = randn(&mut rng, &[3, 2, 2, 2]);
    let gamma = randn(&mut rng, &[2]);
    let beta = randn(&mut rng, &[2]);
    let target = randn(&mut rng, &[3, 2, 2, 2]);
    let err = gradient_check(
        |t, xs| {
            let (y, _) = t.batch_norm(
                &xs[0],
                &xs[1],
                &xs[2],
                &Tensor::zeros(&[2]),
                &Tensor::zeros(&[2]),
                true,
                1e-5,
            )?;
            t.mse(&y, &target)
        },
        &[x, gamma, beta],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "rel err {err}");
}

// ---------------------------------------------------------------- activations

#[test]
fn activation_values() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![-1.0, 0.0, 2.0], &[3]).unwrap();
    let relu = tape.relu(&x).unwrap();
    assert_eq!(relu.data(), &[0.0, 0.0, 2.0]);
    let z = Tensor::new(vec![0.0], &[1]).unwrap();
    assert_eq!(tape.tanh(&z).unwrap().data(), &[0.0]);
    assert_eq!(tape.sigmoid(&z).unwrap().data(), &[0.5]);
    let leaky = tape.leaky_relu(&x).unwrap();
    assert!((leaky.data()[0] + 0.2).abs() < 1e-15);
}

#[test]
fn activation_gradients_off_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for kind in [
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Tanh,
        Activation::Sigmoid,
    ] {
        // Keep probes away from 0 so the finite difference is clean.
        let data: Vec<f64> = (0..6)
            .map(|_| {
                let v: f64 = rng.gen_range(0.1..0.9);
                if rng.gen_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let x = Tensor::new(data, &[6]).unwrap();
        let err = gradient_check(
            |t, xs| {
                let y = t.activation(&xs[0], kind)?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[x],
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{kind:?} rel err {err}");
    }
}

// ---------------------------------------------------------------- pooling

#[test]
fn max_pool_basic() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]).unwrap();
    let y = tape.max_pool2d(&x, 2).unwrap();
    assert_eq!(y.data(), &[4.0]);
}

#[test]
fn max_pool_tie_routes_to_first() {
    let x = Tensor::param(vec![7.0; 4], &[1, 1, 2, 2]).unwrap();
    let tape = Tape::new();
    let y = tape.max_pool2d(&x, 2).unwrap();
    assert_eq!(y.data(), &[7.0]);
    let loss = tape.sum_all(&y).unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn max_pool_odd_dims_error() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![0.0; 9], &[1, 1, 3, 3]).unwrap();
    assert!(matches!(
        tape.max_pool2d(&x, 2),
        Err(AdError::DimError { .. })
    ));
}

#[test]
fn max_pool_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let x = randn(&mut rng, &[1, 1, 4, 4]);
    let err = gradient_check(
        |t, xs| {
            let y = t.max_pool2d(&xs[0], 2)?;
            t.sum_all(&t.mul(&y, &y)?)
        },
        &[x],
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-6, "rel err {err}");
}

// ---------------------------------------------------------------- concat / slice

#[test]
fn concat_single_input_is_identity() {
    let tape = Tape::no_grad();
    let a = Tensor::new(vec![1.0, 2.0, 3.0], &[3]).unwrap();
    let y = tape.concat(&[&a], 0).unwrap();
    assert_eq!(y.data(), a.data());
}

#[test]
fn concat_columns_in_order() {
    let tape = Tape::no_grad();
    let a = Tensor::new(vec![1.0, 2.0], &[2, 1]).unwrap();
    let b = Tensor::new(vec![3.0, 4.0, 5.0, 6.0], &[2, 2]).unwrap();
    let y = tape.concat(&[&a, &b], 1).unwrap();
    assert_eq!(y.shape(), &[2, 3]);
    assert_eq!(y.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
}

#[test]
fn concat_off_axis_mismatch_errors() {
    let tape = Tape::no_grad();
    let a = Tensor::new(vec![0.0; 2], &[2, 1]).unwrap();
    let b = Tensor::new(vec![0.0; 3], &[3, 1]).unwrap();
    assert!(tape.concat(&[&a, &b], 1).is_err());
}

#[test]
fn concat_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let a = randn(&mut rng, &[2, 2, 3]);
    let b = randn(&mut rng, &[2, 1, 3]);
    let err = gradient_check(
        |t, xs| {
            let y = t.concat(&[&xs[0], &xs[1]], 1)?;
            t.sum_all(&t.mul(&y, &y)?)
        },
        &[a, b],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "rel err {err}");
}

// ---------------------------------------------------------------- bilinear_sample

fn identity_grid(h: usize, w: usize) -> Tensor {
    let mut data = vec![0.0; 2 * h * w];
    for y in 0..h {
        for x in 0..w {
            data[y * w + x] = x as f64;
            data[h * w + y * w + x] = y as f64;
        }
    }
    Tensor::new(data, &[1, 2, h, w]).unwrap()
}

#[test]
fn bilinear_identity_grid_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let src = randn(&mut rng, &[1, 2, 4, 5]);
    let tape = Tape::no_grad();
    let y = tape.bilinear_sample(&src, &identity_grid(4, 5)).unwrap();
    assert_eq!(y.data(), src.data());
}

#[test]
fn bilinear_integer_shift_with_border_clamp() {
    let tape = Tape::no_grad();
    // Columns carry distinct values 0..4.
    let src = Tensor::from_fn(&[1, 1, 3, 5], |i| (i % 5) as f64).unwrap();
    let grid = identity_grid(3, 5);
    let shifted = Tensor::new(
        grid.data()
            .iter()
            .enumerate()
            .map(|(i, v)| if i < 15 { v + 1.0 } else { *v })
            .collect(),
        &[1, 2, 3, 5],
    )
    .unwrap();
    let y = tape.bilinear_sample(&src, &shifted).unwrap();
    assert_eq!(y.data()[..5], [1.0, 2.0, 3.0, 4.0, 4.0]);
}

#[test]
fn bilinear_coordinate_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let src = randn(&mut rng, &[1, 2, 5, 5]);
    // Fractional interior coordinates, away from integers and the border.
    let coords = Tensor::from_fn(&[1, 2, 5, 5], |i| {
        1.3 + 0.42 * ((i * 37 % 17) as f64 / 17.0) + (i % 5) as f64 * 0.31
    })
    .unwrap();
    let err = gradient_check(
        |t, xs| {
            let y = t.bilinear_sample(&xs[0], &xs[1])?;
            t.sum_all(&t.mul(&y, &y)?)
        },
        &[src, coords],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "rel err {err}");
}

// ---------------------------------------------------------------- mse

#[test]
fn mse_basics() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![0.3, -0.7], &[2]).unwrap();
    assert_eq!(tape.mse(&x, &x).unwrap().item(), 0.0);
    let a = Tensor::new(vec![0.0, 0.0], &[2]).unwrap();
    let b = Tensor::new(vec![1.0, 1.0], &[2]).unwrap();
    assert_eq!(tape.mse(&a, &b).unwrap().item(), 1.0);
}

#[test]
fn mse_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let a = randn(&mut rng, &[2, 3]);
    let b = randn(&mut rng, &[2, 3]);
    let err = gradient_check(|t, xs| t.mse(&xs[0], &xs[1]), &[a, b], 1e-5).unwrap();
    assert!(err < 1e-6, "rel err {err}");
}

// ---------------------------------------------------------------- backward plumbing

#[test]
fn backward_sum_gives_ones() {
    let x = Tensor::param(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
    let tape = Tape::new();
    let loss = tape.sum_all(&x).unwrap();
    tape.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0; 4]);
}

#[test]
fn backward_matches_hand_derivative() {
    // loss = mse(w·x, y) in 1-d: d/dw = 2x(wx − y).
    let (xv, wv, yv) = (0.7, 1.3, 0.2);
    let w = Tensor::param(vec![wv], &[1, 1]).unwrap();
    let x = Tensor::new(vec![xv], &[1, 1]).unwrap();
    let y = Tensor::new(vec![yv], &[1, 1]).unwrap();
    let tape = Tape::new();
    let pred = tape.matmul(&w, &x).unwrap();
    let loss = tape.mse(&pred, &y).unwrap();
    tape.backward(&loss).unwrap();
    let expected = 2.0 * xv * (wv * xv - yv);
    assert!((w.grad().unwrap()[0] - expected).abs() < 1e-12);
}

#[test]
fn backward_twice_errors() {
    let x = Tensor::param(vec![1.0], &[1]).unwrap();
    let tape = Tape::new();
    let loss = tape.sum_all(&x).unwrap();
    tape.backward(&loss).unwrap();
    assert!(matches!(
        tape.backward(&loss),
        Err(AdError::BackwardConsumed)
    ));
}

#[test]
fn backward_non_scalar_errors() {
    let x = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
    let tape = Tape::new();
    let y = tape.scale(&x, 2.0).unwrap();
    assert!(matches!(
        tape.backward(&y),
        Err(AdError::NonScalarLoss { numel: 2 })
    ));
}

#[test]
fn unreachable_leaf_reports_zero_gradient() {
    let x = Tensor::param(vec![1.0], &[1]).unwrap();
    let unused = Tensor::param(vec![5.0], &[1]).unwrap();
    let tape = Tape::new();
    let loss = tape.sum_all(&x).unwrap();
    let grads = tape.backward(&loss).unwrap();
    assert_eq!(grads.of(&unused), vec![0.0]);
    assert_eq!(grads.of(&x), vec![1.0]);
}

// ---------------------------------------------------------------- gradcheck harness

#[test]
fn gradcheck_sum_of_squares_is_tight() {
    let x = Tensor::new(vec![0.4, -1.2, 2.2], &[3]).unwrap();
    let err = gradient_check(|t, xs| t.sum_all(&t.mul(&xs[0], &xs[0])?), &[x], 1e-5).unwrap();
    assert!(err < 1e-9, "rel err {err}");
}

#[test]
fn gradcheck_rejects_non_scalar() {
    let x = Tensor::new(vec![0.4, -1.2], &[2]).unwrap();
    assert!(matches!(
        gradient_check(|t, xs| t.scale(&xs[0], 1.0), &[x], 1e-5),
        Err(AdError::NonScalarLoss { .. })
    ));
}

// ---------------------------------------------------------------- misc ops

#[test]
fn diff_ops_match_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let x = randn(&mut rng, &[2, 3, 4]);
    let tape = Tape::no_grad();
    let dx = tape.diff_x(&x).unwrap();
    let dy = tape.diff_y(&x).unwrap();
    let (h, w) = (3, 4);
    for l in 0..2 {
        for i in 0..h {
            for j in 0..w {
                let at = |ii: usize, jj: usize| x.data()[l * h * w + ii * w + jj];
                let ex = if j + 1 < w { at(i, j + 1) - at(i, j) } else { 0.0 };
                let ey = if i + 1 < h { at(i + 1, j) - at(i, j) } else { 0.0 };
                assert_eq!(dx.data()[l * h * w + i * w + j], ex);
                assert_eq!(dy.data()[l * h * w + i * w + j], ey);
            }
        }
    }
}

#[test]
fn diff_and_abs_gradients() {
    // Neighbor differences stay well away from the |·| kink.
    let x = Tensor::from_fn(&[1, 4, 4], |i| {
        0.37 * (i as f64) * if i % 2 == 0 { 1.0 } else { -0.8 }
    })
    .unwrap();
    let err = gradient_check(
        |t, xs| {
            let d = t.add(&t.abs(&t.diff_x(&xs[0])?)?, &t.abs(&t.diff_y(&xs[0])?)?)?;
            t.mean_all(&d)
        },
        &[x],
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-5, "rel err {err}");
}

#[test]
fn film_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let x = randn(&mut rng, &[2, 3, 2, 2]);
    let gamma = randn(&mut rng, &[2, 3]);
    let beta = randn(&mut rng, &[2, 3]);
    let err = gradient_check(
        |t, xs| {
            let y = t.film(&xs[0], &xs[1], &xs[2])?;
            t.sum_all(&t.mul(&y, &y)?)
        },
        &[x, gamma, beta],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "rel err {err}");
}

#[test]
fn global_avg_pool_and_sum_axis_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let x = randn(&mut rng, &[2, 3, 2, 2]);
    let err = gradient_check(
        |t, xs| {
            let p = t.global_avg_pool(&xs[0])?;
            let s = t.sum_axis(&p, 1)?;
            t.sum_all(&t.mul(&s, &s)?)
        },
        &[x],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-6, "rel err {err}");
}

#[test]
fn exp_and_scale_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let x = randn(&mut rng, &[5]);
    let err = gradient_check(
        |t, xs| {
            let y = t.exp(&t.scale(&xs[0], -0.7)?)?;
            t.sum_all(&y)
        },
        &[x],
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-7, "rel err {err}");
}

#[test]
fn non_finite_forward_is_an_error() {
    let tape = Tape::no_grad();
    let x = Tensor::new(vec![710.0], &[1]).unwrap();
    // exp(710) overflows f64.
    assert!(matches!(tape.exp(&x), Err(AdError::NonFinite { .. })));
}
