use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{finite_difference_check_piecewise, Mode, NormKind, ParamStore, Tape, Tensor, EPS_NORM};
use crate::mesh::Task;

fn random<T: crate::scalar::Scalar>(rows: usize, cols: usize, seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(rows, cols, |_, _| T::of(rng.gen_range(-1.5..1.5)))
}

fn backbone<T: crate::scalar::Scalar>(net: &mut Network<T>, x: &Tensor<T>) -> Tensor<T> {
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let y = net.backbone(&mut tape, xv, Mode::Train).unwrap();
    tape.value(y).clone()
}

// Plain-loop reference for FC -> LN(gamma=1, beta=0) -> ReLU.
fn ref_transition(x: &[Vec<f64>], store: &ParamStore<f64>, name: &str) -> Vec<Vec<f64>> {
    let w = &store.get(store.id(&format!("{name}.fc.w")).unwrap()).value;
    let b = &store.get(store.id(&format!("{name}.fc.b")).unwrap()).value;
    x.iter()
        .map(|row| {
            let h: Vec<f64> = (0..w.cols())
                .map(|j| b.get(0, j) + row.iter().enumerate().map(|(i, &v)| v * w.get(i, j)).sum::<f64>())
                .collect();
            let mean = h.iter().sum::<f64>() / h.len() as f64;
            let var = h.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / h.len() as f64;
            h.iter().map(|v| ((v - mean) / (var + EPS_NORM).sqrt()).max(0.0)).collect()
        })
        .collect()
}

#[test]
fn zero_block_outputs_leave_the_transition_path() {
    let config = NetworkConfig::scaled_down(Task::Segmentation, 3, 8);
    let mut net = Network::<f64>::new(config.clone(), 4).unwrap();
    net.zero_block_outputs();
    let x = random::<f64>(6, 26, 5);
    let got = backbone(&mut net, &x);

    let rows: Vec<Vec<f64>> = (0..6).map(|r| x.row(r).to_vec()).collect();
    let store = net.params();
    let s1 = ref_transition(&rows, store, "stem");
    let mut h = ref_transition(&s1, store, "g4.in");
    for g in ["g5", "g6", "g7"] {
        let p = ref_transition(&h, store, &format!("{g}.in"));
        h = p.into_iter().zip(&s1).map(|(mut a, s)| {
            a.extend(s);
            a
        }).collect();
    }
    let h = ref_transition(&h, store, "head1");
    let h = ref_transition(&h, store, "head2");
    for r in 0..6 {
        for c in 0..config.output_width() {
            assert!((got.get(r, c) - h[r][c]).abs() < 1e-12);
        }
    }
}

#[test]
fn default_network_shapes_and_size() {
    let mut net = Network::<f32>::new(NetworkConfig::new(Task::Classification, 30), 1).unwrap();
    // Stem, eight groups, transitions and heads of the default table.
    assert!(net.trainable_count() > 3_000_000, "{}", net.trainable_count());
    let one = backbone(&mut net, &random(1, 26, 2));
    assert_eq!(one.shape(), (1, 32));
    assert!(one.is_finite());
    let logits = net.predict(&random(100, 26, 3), Mode::Eval).unwrap();
    assert_eq!(logits.shape(), (1, 30));
    assert!(logits.is_finite());
    assert!(matches!(
        net.predict(&random(4, 25, 3), Mode::Eval),
        Err(ModelError::InputChannels { expected: 26, got: 25 })
    ));
}

#[test]
fn backbone_is_row_permutation_equivariant_bitwise() {
    let mut net = Network::<f32>::new(NetworkConfig::new(Task::Segmentation, 4), 9).unwrap();
    let n = 37;
    let x = random::<f32>(n, 26, 10);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let y = backbone(&mut net, &x);
    let yp = backbone(&mut net, &x.select_rows(&perm));
    assert_eq!(yp, y.select_rows(&perm));
}

#[test]
fn classification_head_pools() {
    let mut net = Network::<f64>::new(NetworkConfig::scaled_down(Task::Classification, 5, 8), 3).unwrap();
    let row = random::<f64>(1, 26, 4);
    let dup = row.select_rows(&[0, 0, 0, 0]);
    let a = net.predict(&row, Mode::Eval).unwrap();
    let b = net.predict(&dup, Mode::Eval).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-12);
    let x = random::<f64>(9, 26, 6);
    let p = net.predict(&x.select_rows(&[3, 1, 8, 0, 2, 7, 5, 4, 6]), Mode::Eval).unwrap();
    assert!(net.predict(&x, Mode::Eval).unwrap().max_abs_diff(&p) < 1e-12);
}

#[test]
fn segmentation_head_shapes() {
    let mut net = Network::<f32>::new(NetworkConfig::scaled_down(Task::Segmentation, 8, 4), 3).unwrap();
    let logits = net.predict(&random(1500, 26, 1), Mode::Eval).unwrap();
    assert_eq!(logits.shape(), (1500, 8));
    assert!(logits.is_finite());
}

#[test]
fn hks_channels_matter() {
    let mut net = Network::<f32>::new(NetworkConfig::new(Task::Segmentation, 4), 2).unwrap();
    let x = random::<f32>(20, 26, 3);
    let mut zeroed = x.clone();
    for r in 0..20 {
        zeroed.row_mut(r)[10..].iter_mut().for_each(|v| *v = 0.0);
    }
    let a = net.predict(&x, Mode::Eval).unwrap();
    let b = net.predict(&zeroed, Mode::Eval).unwrap();
    assert!(a.max_abs_diff(&b) > 0.0);
}

#[test]
fn every_norm_kind_builds_and_runs() {
    for kind in NormKind::ALL {
        let config = NetworkConfig::scaled_down(Task::Segmentation, 3, 8).with_norm(kind);
        let mut net = Network::<f32>::new(config, 1).unwrap();
        let x = random::<f32>(12, 26, 2);
        let loss = net.loss_and_backward(&x, &[0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2]).unwrap();
        assert!(loss.is_finite(), "{kind:?}");
        for mode in [Mode::Train, Mode::Eval] {
            assert!(net.predict(&x, mode).unwrap().is_finite());
        }
    }
}

/// Full default network, 10 vertices, 64-bit: input and parameter gradients
/// against central differences.
#[test]
fn full_network_gradient_check() {
    let mut net = Network::<f64>::new(NetworkConfig::new(Task::Segmentation, 4), 21).unwrap();
    let x = random::<f64>(10, 26, 22);
    let targets = [0, 1, 2, 3, 0, 1, 2, 3, 0, 1];
    let loss = |net: &mut Network<f64>, x: &Tensor<f64>| {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let logits = net.forward(&mut tape, xv, Mode::Train).unwrap();
        let l = tape.softmax_cross_entropy(logits, &targets).unwrap();
        (tape, xv, l)
    };
    let value = |net: &mut Network<f64>, x: &Tensor<f64>| {
        let (t, _, l) = loss(net, x);
        (t.scalar(l), t.relu_pattern())
    };
    let (tape, xv, l) = loss(&mut net, &x);
    let mut grads_store = net.params().clone();
    grads_store.zero_grads();
    let g = tape.backward(l, &mut grads_store);
    let dx = g.get(xv).unwrap().clone();

    let mut probe = net.clone();
    let rx = finite_difference_check_piecewise(&x, &dx, 40, 1, |p| value(&mut probe, p));
    assert!(rx.passes(1e-3) && rx.checked >= 30, "input: {rx:?}");

    for name in ["stem.fc.w", "g3.b6.fc1.w", "g6.in.fc.w", "g8.b3.fc3.w", "head2.norm.gamma", "out.w"] {
        let id = net.params().id(name).unwrap();
        let analytic = grads_store.get(id).grad.clone();
        let base = net.params().get(id).value.clone();
        let mut probe = net.clone();
        let r = finite_difference_check_piecewise(&base, &analytic, 8, 2, |p| {
            probe.params_mut().get_mut(id).value = p.clone();
            value(&mut probe, &x)
        });
        assert!(r.passes(1e-3), "{name}: {r:?}");
    }
}

#[test]
fn checkpoint_roundtrip() {
    let config = NetworkConfig::scaled_down(Task::Classification, 3, 8).with_norm(NormKind::Batch);
    let mut a = Network::<f32>::new(config.clone(), 1).unwrap();
    let x = random::<f32>(8, 26, 2);
    a.loss_and_backward(&x, &[1]).unwrap();
    crate::autodiff::Adam::default().step(a.params_mut());
    let bytes = a.checkpoint_bytes();
    assert_eq!(&bytes[..9], CHECKPOINT_MAGIC);

    let mut b = Network::<f32>::new(config.clone(), 99).unwrap();
    b.load_checkpoint_bytes(&bytes).unwrap();
    assert_eq!(b.checkpoint_bytes(), bytes);
    assert_eq!(a.predict(&x, Mode::Eval).unwrap(), b.predict(&x, Mode::Eval).unwrap());

    let mut other = Network::<f32>::new(config.with_norm(NormKind::Layer), 1).unwrap();
    assert!(matches!(other.load_checkpoint_bytes(&bytes), Err(ModelError::ConfigMismatch)));
    assert!(b.load_checkpoint_bytes(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn non_residual_variant_runs() {
    let mut config = NetworkConfig::scaled_down(Task::Segmentation, 2, 8);
    config.residual = false;
    let mut net = Network::<f32>::new(config, 1).unwrap();
    assert!(net.predict(&random(5, 26, 1), Mode::Eval).unwrap().is_finite());
}
