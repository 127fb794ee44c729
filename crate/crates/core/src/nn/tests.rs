use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Squared-error loss of the node built by `f` against fixed pseudo-random
/// targets. Inputs are registered as parameters so their gradients are
/// checked as well.
fn check<F>(params: &ParamStore, f: F) -> GradCheckReport
where
    F: Fn(&mut Graph) -> NodeId,
{
    let run = |p: &ParamStore| -> crate::Result<(f64, Vec<Tensor>)> {
        let mut g = Graph::new(p, Mode::Inference, 0);
        let out = f(&mut g);
        let pred = g.value(out).clone();
        let mut r = rng(99);
        let targets: Vec<f64> = (0..pred.len())
            .map(|_| rand::Rng::random_range(&mut r, -1.0..1.0))
            .collect();
        let (loss, grad) = mse_loss(pred.data(), &targets)?;
        let grads = g.backward(out, Tensor::new(pred.shape().to_vec(), grad)?)?;
        Ok((loss, grads.into_param_grads(p)))
    };
    grad_check(params, 1e-5, 40, 7, run).unwrap()
}

fn assert_close(report: &GradCheckReport, tol: f64) {
    assert!(report.checked > 0);
    assert!(report.max_rel_error < tol, "{report:?}");
}

#[test]
fn conv_output_length_example() {
    let mut p = ParamStore::new();
    let w = p.add("w", Tensor::zeros(&[2, 1, 5]));
    let b = p.add("b", Tensor::zeros(&[2]));
    let mut g = Graph::new(&p, Mode::Inference, 0);
    let x = g.input(Tensor::zeros(&[3, 1, 53]));
    let (w, b) = (g.param(w), g.param(b));
    let y = g.conv1d(x, w, b, 1).unwrap();
    assert_eq!(g.value(y).shape(), &[3, 2, 49]);
    assert_eq!(conv_output_len(53, 5, 1), 49);
}

#[test]
fn conv_known_values() {
    let mut p = ParamStore::new();
    let w = p.add("w", Tensor::new(vec![1, 1, 2], vec![1.0, -1.0]).unwrap());
    let b = p.add("b", Tensor::new(vec![1], vec![0.5]).unwrap());
    let mut g = Graph::new(&p, Mode::Inference, 0);
    let x = g.input(Tensor::new(vec![1, 1, 5], vec![1.0, 3.0, 6.0, 10.0, 15.0]).unwrap());
    let (w, b) = (g.param(w), g.param(b));
    let y = g.conv1d(x, w, b, 2).unwrap();
    assert_eq!(g.value(y).data(), &[-1.5, -3.5]);
}

proptest! {
    #[test]
    fn conv_length_matches_formula(len in 1usize..80, k in 1usize..20, s in 1usize..6) {
        prop_assume!(k <= len);
        let mut p = ParamStore::new();
        let w = p.add("w", Tensor::zeros(&[1, 1, k]));
        let b = p.add("b", Tensor::zeros(&[1]));
        let mut g = Graph::new(&p, Mode::Inference, 0);
        let x = g.input(Tensor::zeros(&[1, 1, len]));
        let (w, b) = (g.param(w), g.param(b));
        let y = g.conv1d(x, w, b, s).unwrap();
        prop_assert_eq!(g.value(y).shape()[2], (len - k) / s + 1);
    }
}

#[test]
fn conv_kernel_longer_than_input_is_shape_error() {
    let mut p = ParamStore::new();
    let w = p.add("w", Tensor::zeros(&[1, 1, 60]));
    let b = p.add("b", Tensor::zeros(&[1]));
    let mut g = Graph::new(&p, Mode::Inference, 0);
    let x = g.input(Tensor::zeros(&[1, 1, 53]));
    let (w, b) = (g.param(w), g.param(b));
    let err = g.conv1d(x, w, b, 1).unwrap_err();
    assert!(
        matches!(err, Error::Shape { ref layer, .. } if layer == "conv1d"),
        "{err}"
    );
}

#[test]
fn dense_shape_error_names_layer() {
    let mut p = ParamStore::new();
    let w = p.add("w", Tensor::zeros(&[4, 2]));
    let b = p.add("b", Tensor::zeros(&[2]));
    let mut g = Graph::new(&p, Mode::Inference, 0);
    let x = g.input(Tensor::zeros(&[3, 5]));
    let (w, b) = (g.param(w), g.param(b));
    let err = g.dense(x, w, b).unwrap_err();
    assert!(matches!(err, Error::Shape { ref layer, .. } if layer == "dense"));
}

#[test]
fn relu_values() {
    let p = ParamStore::new();
    let mut g = Graph::new(&p, Mode::Train, 0);
    let x = g.input(Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap());
    let y = g.relu(x);
    assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);
}

#[test]
fn dropout_zero_ratio_and_inference_are_identity() {
    let p = ParamStore::new();
    let data = Tensor::from_fn(&[4, 8], |i| i as f64 - 7.5);
    for mode in [Mode::Train, Mode::Inference] {
        let mut g = Graph::new(&p, mode, 3);
        let x = g.input(data.clone());
        let y = g.dropout(x, 0.0).unwrap();
        assert_eq!(g.value(y), &data);
    }
    let mut g = Graph::new(&p, Mode::Inference, 3);
    let x = g.input(data.clone());
    let y = g.dropout(x, 0.7).unwrap();
    assert_eq!(g.value(y), &data);
}

#[test]
fn dropout_rejects_ratio_one() {
    let p = ParamStore::new();
    let mut g = Graph::new(&p, Mode::Train, 0);
    let x = g.input(Tensor::zeros(&[2]));
    assert!(g.dropout(x, 1.0).is_err());
    assert!(g.dropout(x, -0.1).is_err());
}

#[test]
fn dropout_preserves_expected_activation() {
    let p = ParamStore::new();
    let n = 20_000;
    let ratio = 0.7;
    let mut g = Graph::new(&p, Mode::Train, 11);
    let x = g.input(Tensor::from_fn(&[n], |_| 2.0));
    let y = g.dropout(x, ratio).unwrap();
    let out = g.value(y).data();
    let mean = out.iter().sum::<f64>() / n as f64;
    // each output is 2/(1-r) w.p. 1-r: sd = 2 sqrt(r/(1-r)), standard error sd/sqrt(n)
    let se = 2.0 * (ratio / (1.0 - ratio)).sqrt() / (n as f64).sqrt();
    assert!((mean - 2.0).abs() < 5.0 * se, "mean {mean}");
    let zeros = out.iter().filter(|v| **v == 0.0).count() as f64 / n as f64;
    assert!((zeros - ratio).abs() < 0.02);
}

#[test]
fn concat_and_swap_layouts() {
    let p = ParamStore::new();
    let mut g = Graph::new(&p, Mode::Inference, 0);
    let a = g.input(Tensor::new(vec![2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let b = g.input(Tensor::new(vec![2, 2, 2], vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap());
    let c = g.concat(&[a, b], 1).unwrap();
    assert_eq!(g.value(c).shape(), &[2, 3, 2]);
    assert_eq!(
        g.value(c).data(),
        &[1.0, 2.0, 5.0, 6.0, 7.0, 8.0, 3.0, 4.0, 9.0, 10.0, 11.0, 12.0]
    );
    let s = g.swap_last_axes(c).unwrap();
    assert_eq!(g.value(s).shape(), &[2, 2, 3]);
    assert_eq!(&g.value(s).data()[..6], &[1.0, 5.0, 7.0, 2.0, 6.0, 8.0]);
    assert!(g.concat(&[a, b], 2).is_err());
}

#[test]
fn lstm_single_step_matches_hand_computation() {
    // H = 1, F = 1: gates are scalars
    let mut p = ParamStore::new();
    let wi = p.add("wi", Tensor::new(vec![1, 4], vec![0.5, -0.3, 0.8, 0.1]).unwrap());
    let wh = p.add("wh", Tensor::new(vec![1, 4], vec![0.2, 0.4, -0.6, 0.9]).unwrap());
    let b = p.add("b", Tensor::new(vec![4], vec![0.0, 1.0, 0.1, -0.2]).unwrap());
    let mut g = Graph::new(&p, Mode::Inference, 0);
    let x = g.input(Tensor::new(vec![1, 2, 1], vec![1.0, -2.0]).unwrap());
    let (wi, wh, b) = (g.param(wi), g.param(wh), g.param(b));
    let h = g.lstm(x, wi, wh, b).unwrap();

    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let (mut hp, mut cp) = (0.0, 0.0);
    for xt in [1.0, -2.0] {
        let i = sig(0.5 * xt + 0.2 * hp);
        let f = sig(-0.3 * xt + 0.4 * hp + 1.0);
        let gg = (0.8 * xt - 0.6 * hp + 0.1).tanh();
        let o = sig(0.1 * xt + 0.9 * hp - 0.2);
        cp = f * cp + i * gg;
        hp = o * cp.tanh();
    }
    assert!((g.value(h).data()[0] - hp).abs() < 1e-15);
}

#[test]
fn grad_check_dense_quadratic() {
    let mut r = rng(1);
    let mut p = ParamStore::new();
    let x = p.add("x", init::uniform(&[5, 4], 1.0, &mut r));
    let w = p.add("w", init::uniform(&[4, 3], 1.0, &mut r));
    let b = p.add("b", init::uniform(&[3], 1.0, &mut r));
    let report = check(&p, |g| {
        let (x, w, b) = (g.param(x), g.param(w), g.param(b));
        g.dense(x, w, b).unwrap()
    });
    assert_close(&report, 1e-7);
}

#[test]
fn grad_check_conv1d_strided() {
    let mut r = rng(2);
    let mut p = ParamStore::new();
    let x = p.add("x", init::uniform(&[2, 3, 17], 1.0, &mut r));
    let w = p.add("w", init::uniform(&[4, 3, 5], 0.5, &mut r));
    let b = p.add("b", init::uniform(&[4], 0.5, &mut r));
    for stride in [1, 2, 3] {
        let report = check(&p, |g| {
            let (x, w, b) = (g.param(x), g.param(w), g.param(b));
            g.conv1d(x, w, b, stride).unwrap()
        });
        assert_close(&report, 1e-5);
    }
}

#[test]
fn grad_check_relu_dropout_concat_reshape() {
    let mut r = rng(3);
    let mut p = ParamStore::new();
    let a = p.add("a", init::uniform(&[3, 2, 4], 1.0, &mut r));
    let c = p.add("c", init::uniform(&[3, 1, 4], 1.0, &mut r));
    let w = p.add("w", init::uniform(&[12, 2], 1.0, &mut r));
    let b = p.add("b", init::uniform(&[2], 1.0, &mut r));
    let report = check(&p, |g| {
        let (a, c, w, b) = (g.param(a), g.param(c), g.param(w), g.param(b));
        let cat = g.concat(&[a, c], 1).unwrap();
        let s = g.swap_last_axes(cat).unwrap();
        let act = g.relu(s);
        let d = g.dropout(act, 0.5).unwrap();
        let flat = g.reshape(d, &[3, 12]).unwrap();
        g.dense(flat, w, b).unwrap()
    });
    assert_close(&report, 1e-5);
}

#[test]
fn grad_check_lstm_length_five() {
    let mut r = rng(4);
    let hidden = 3;
    let mut p = ParamStore::new();
    let x = p.add("x", init::uniform(&[2, 5, 4], 1.0, &mut r));
    let wi = p.add("wi", init::lstm_uniform(&[4, 4 * hidden], hidden, &mut r));
    let wh = p.add("wh", init::lstm_uniform(&[hidden, 4 * hidden], hidden, &mut r));
    let b = p.add("b", init::lstm_bias(hidden));
    let report = check(&p, |g| {
        let (x, wi, wh, b) = (g.param(x), g.param(wi), g.param(wh), g.param(b));
        g.lstm(x, wi, wh, b).unwrap()
    });
    assert_close(&report, 1e-5);
}

#[test]
fn input_gradients_are_reported() {
    let mut p = ParamStore::new();
    let w = p.add("w", Tensor::new(vec![2, 1], vec![3.0, -1.0]).unwrap());
    let b = p.add("b", Tensor::zeros(&[1]));
    let mut g = Graph::new(&p, Mode::Inference, 0);
    let x = g.input_with_grad(Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap());
    let c = g.input(Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap());
    let (w, b) = (g.param(w), g.param(b));
    let y = g.dense(x, w, b).unwrap();
    let _ = g.dense(c, w, b).unwrap();
    let grads = g.backward(y, Tensor::new(vec![1, 1], vec![1.0]).unwrap()).unwrap();
    assert_eq!(grads.input(x).unwrap().data(), &[3.0, -1.0]);
    assert!(grads.input(c).is_none());
}
