//! Cross-cutting properties: softmax algebra, exact identities,
//! round-trips, determinism, and a multi-seed gradient sweep.

use autodiff::{gradient_check, Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), shape).unwrap()
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one(xs in proptest::collection::vec(-50.0f64..50.0, 2..16)) {
        let tape = Tape::no_grad();
        let t = Tensor::new(xs.clone(), &[xs.len()]).unwrap();
        let y = tape.softmax(&t, 0).unwrap();
        let sum: f64 = y.data().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(y.data().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn softmax_shift_invariant(xs in proptest::collection::vec(-20.0f64..20.0, 2..12), c in -30.0f64..30.0) {
        let tape = Tape::no_grad();
        let a = Tensor::new(xs.clone(), &[xs.len()]).unwrap();
        let b = Tensor::new(xs.iter().map(|v| v + c).collect(), &[xs.len()]).unwrap();
        let ya = tape.softmax(&a, 0).unwrap();
        let yb = tape.softmax(&b, 0).unwrap();
        for (p, q) in ya.data().iter().zip(yb.data()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn concat_slice_round_trips(split in 1usize..5, rest in 1usize..5, inner in 1usize..4) {
        let n = (split + rest) * inner;
        let data: Vec<f64> = (0..n).map(|i| i as f64 * 0.5 - 3.0).collect();
        let tape = Tape::no_grad();
        let x = Tensor::new(data.clone(), &[split + rest, inner]).unwrap();
        let a = tape.slice_axis(&x, 0, 0, split).unwrap();
        let b = tape.slice_axis(&x, 0, split, split + rest).unwrap();
        let back = tape.concat(&[&a, &b], 0).unwrap();
        prop_assert_eq!(back.data(), &data[..]);
    }
}

#[test]
fn conv_identity_kernel_is_bitwise_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let x = randn(&mut rng, &[2, 3, 6, 6]);
    // One-hot 1x1 kernels wiring channel i -> i.
    let mut wdata = vec![0.0; 9];
    for i in 0..3 {
        wdata[i * 3 + i] = 1.0;
    }
    let w = Tensor::new(wdata, &[3, 3, 1, 1]).unwrap();
    let b = Tensor::zeros(&[3]);
    let tape = Tape::no_grad();
    let y = tape.conv2d(&x, &w, &b, 1, (0, 0)).unwrap();
    assert_eq!(y.data(), x.data());
}

#[test]
fn bilinear_identity_grid_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let src = randn(&mut rng, &[2, 3, 5, 4]);
    let (h, w) = (5usize, 4usize);
    let mut cdata = vec![0.0; 2 * 2 * h * w];
    for b in 0..2 {
        for y in 0..h {
            for x in 0..w {
                cdata[b * 2 * h * w + y * w + x] = x as f64;
                cdata[b * 2 * h * w + h * w + y * w + x] = y as f64;
            }
        }
    }
    let coords = Tensor::new(cdata, &[2, 2, h, w]).unwrap();
    let tape = Tape::no_grad();
    let out = tape.bilinear_sample(&src, &coords).unwrap();
    assert_eq!(out.data(), src.data());
}

#[test]
fn forward_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(999);
        let x = randn(&mut rng, &[2, 3, 8, 8]);
        let w = randn(&mut rng, &[4, 3, 3, 3]);
        let b = randn(&mut rng, &[4]);
        let tape = Tape::no_grad();
        let y = tape.conv2d(&x, &w, &b, 1, (1, 1)).unwrap();
        let z = tape.tanh(&y).unwrap();
        z.data().to_vec()
    };
    assert_eq!(run(), run());
}

/// Multi-seed sweep: every primitive passes its finite-difference check at
/// the stated tolerance over 20 random seeds.
#[test]
fn gradient_sweep_over_20_seeds() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);

        let a = randn(&mut rng, &[3, 4]);
        let b = randn(&mut rng, &[4, 2]);
        let e = gradient_check(
            |t, xs| {
                let y = t.matmul(&xs[0], &xs[1])?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[a, b],
            1e-5,
        )
        .unwrap();
        assert!(e < 1e-6, "matmul seed {seed}: {e}");

        let x = randn(&mut rng, &[2, 4]);
        let e = gradient_check(
            |t, xs| {
                let s = t.softmax(&xs[0], 1)?;
                t.sum_all(&t.mul(&s, &s)?)
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(e < 1e-6, "softmax seed {seed}: {e}");

        let x = randn(&mut rng, &[1, 2, 6, 6]);
        let w = randn(&mut rng, &[3, 2, 3, 3]);
        let bias = randn(&mut rng, &[3]);
        let e = gradient_check(
            |t, xs| {
                let y = t.conv2d(&xs[0], &xs[1], &xs[2], 2, (1, 1))?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[x, w, bias],
            1e-5,
        )
        .unwrap();
        assert!(e < 1e-5, "conv2d seed {seed}: {e}");

        let x = randn(&mut rng, &[1, 3, 3, 3]);
        let w = randn(&mut rng, &[3, 2, 4, 4]);
        let bias = randn(&mut rng, &[2]);
        let e = gradient_check(
            |t, xs| {
                let y = t.deconv2d(&xs[0], &xs[1], &xs[2], 2, (1, 1))?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[x, w, bias],
            1e-5,
        )
        .unwrap();
        assert!(e < 1e-5, "deconv2d seed {seed}: {e}");

        let src = randn(&mut rng, &[1, 2, 5, 5]);
        // Spacing keeps every coordinate at least 0.02 from integer kinks.
        let coords = Tensor::from_fn(&[1, 2, 5, 5], |i| {
            0.65 + ((i * 13 + seed as usize) % 23) as f64 * 0.137
        })
        .unwrap();
        let e = gradient_check(
            |t, xs| {
                let y = t.bilinear_sample(&xs[0], &xs[1])?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[src, coords],
            1e-5,
        )
        .unwrap();
        assert!(e < 1e-4, "bilinear seed {seed}: {e}");

        let x = randn(&mut rng, &[4, 3]);
        let w = randn(&mut rng, &[2, 3]);
        let bias = randn(&mut rng, &[2]);
        let e = gradient_check(
            |t, xs| {
                let y = t.linear(&xs[0], &xs[1], &xs[2])?;
                t.sum_all(&t.mul(&y, &y)?)
            },
            &[x, w, bias],
            1e-5,
        )
        .unwrap();
        assert!(e < 1e-6, "linear seed {seed}: {e}");
    }
}
