use efgsolve::approx::{stack, CircularReplayBuffer, LossKind, Mlp, Optimizer, ReservoirBuffer, TrainBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_rows(rng: &mut impl Rng, rows: usize, width: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn random_batch(rng: &mut impl Rng, net: &Mlp, loss: LossKind) -> TrainBatch {
    let n = 6;
    let k = net.output_width();
    let inputs = random_rows(rng, n, net.input_width());
    let targets: Vec<Vec<f64>> = match loss {
        LossKind::SoftmaxCrossEntropy => (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect()
            })
            .collect(),
        _ => random_rows(rng, n, k),
    };
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    // Keep at least two live columns per row so the masked softmax is non-trivial.
    let mask: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|c| if c < 2 || rng.gen_bool(0.7) { 1.0 } else { 0.0 }).collect())
        .collect();
    TrainBatch::from_rows(&inputs, &targets)
        .unwrap()
        .with_weights(weights)
        .unwrap()
        .with_mask(&mask)
        .unwrap()
}

/// Analytic gradients of every loss mode against central differences.
#[test]
fn gradients_match_finite_differences() {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let shapes: [(&[usize], bool); 5] = [
        (&[3, 4], false),
        (&[4, 6, 3], false),
        (&[5, 8, 8, 3], true),
        (&[2, 7, 7, 7, 4], true),
        (&[6, 5, 4, 2], false),
    ];
    for loss in [LossKind::Mse, LossKind::SoftmaxCrossEntropy, LossKind::CustomGradient] {
        for (k, (sizes, skip)) in shapes.iter().enumerate() {
            let net = Mlp::new(sizes, 100 + k as u64, *skip).unwrap();
            let batch = random_batch(&mut rng, &net, loss);
            let (_, grads) = net.loss_and_grads(&batch, loss).unwrap();
            let mut analytic: Vec<f64> = Vec::new();
            for (w, b) in grads.weights.iter().zip(&grads.biases) {
                analytic.extend(w.iter().copied());
                analytic.extend(b.iter().copied());
            }
            let params = net.params();
            let mut probe = net.clone();
            let mut worst: f64 = 0.0;
            for j in 0..params.len() {
                let mut p = params.clone();
                p[j] += h;
                probe.set_params(&p).unwrap();
                let up = probe.loss(&batch, loss).unwrap();
                p[j] -= 2.0 * h;
                probe.set_params(&p).unwrap();
                let down = probe.loss(&batch, loss).unwrap();
                let fd = (up - down) / (2.0 * h);
                let scale = analytic[j].abs().max(fd.abs());
                if scale > 1e-7 {
                    worst = worst.max((analytic[j] - fd).abs() / scale);
                }
            }
            assert!(worst < 1e-4, "{loss:?} net {sizes:?}: relative error {worst}");
        }
    }
}

#[test]
fn overfits_a_small_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs = random_rows(&mut rng, 10, 4);
    let targets = random_rows(&mut rng, 10, 2);
    let batch = TrainBatch::from_rows(&inputs, &targets).unwrap();
    let mut net = Mlp::new(&[4, 32, 32, 2], 8, false).unwrap();
    let mut opt = Optimizer::adam(&net);
    let mut reached = None;
    for step in 0..2000 {
        net.train_step(&batch, LossKind::Mse, &mut opt, 1e-2).unwrap();
        if net.loss(&batch, LossKind::Mse).unwrap() < 1e-4 {
            reached = Some(step);
            break;
        }
    }
    assert!(reached.is_some(), "final mse {}", net.loss(&batch, LossKind::Mse).unwrap());
}

#[test]
fn non_finite_loss_is_a_training_error() {
    let mut net = Mlp::new(&[1, 1], 0, false).unwrap();
    let batch = TrainBatch::new(stack(&[vec![1.0]]).unwrap(), stack(&[vec![f64::NAN]]).unwrap()).unwrap();
    let err = net.train_step(&batch, LossKind::Mse, &mut Optimizer::sgd(), 0.1).unwrap_err();
    assert!(matches!(err, efgsolve::Error::Training(_)));
}

#[test]
fn l2_only_step_shrinks_parameters() {
    let mut net = Mlp::new(&[2, 3, 1], 4, false).unwrap();
    let x = stack(&[vec![0.3, -0.7]]).unwrap();
    // Custom gradient of zero: only the penalty acts.
    let batch = TrainBatch::new(x, stack(&[vec![0.0]]).unwrap()).unwrap();
    let before = net.params();
    let mut opt = Optimizer::sgd().with_l2(0.5);
    net.train_step(&batch, LossKind::CustomGradient, &mut opt, 0.1).unwrap();
    for (a, b) in net.params().iter().zip(&before) {
        assert!((a - b * 0.95).abs() < 1e-15);
    }
}

/// Each offered item survives with probability capacity / n.
#[test]
fn reservoir_retention_is_uniform() {
    let capacity = 100;
    let offers = 100_000;
    let runs = 200;
    let blocks = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut kept = vec![0u64; blocks];
    for _ in 0..runs {
        let mut buf = ReservoirBuffer::new(capacity);
        for tag in 0..offers {
            buf.add(tag, &mut rng);
        }
        assert_eq!(buf.len(), capacity);
        assert_eq!(buf.seen(), offers as u64);
        for &tag in buf.items() {
            kept[tag * blocks / offers] += 1;
        }
    }
    let p = capacity as f64 / offers as f64;
    let trials = (runs * offers / blocks) as f64;
    let mean = trials * p;
    let sd = (trials * p * (1.0 - p)).sqrt();
    for (b, &k) in kept.iter().enumerate() {
        assert!((k as f64 - mean).abs() <= 3.0 * sd, "block {b}: {k} kept, expected {mean} ± {sd}");
    }
}

#[test]
fn replay_sampling_is_uniform() {
    let mut buf = CircularReplayBuffer::new(10);
    (0..10).for_each(|i| buf.add(i));
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let draws = 10_000;
    let mut counts = [0f64; 10];
    for &&i in &buf.sample(draws, 1, &mut rng).unwrap() {
        counts[i] += 1.0;
    }
    let expected = draws as f64 / 10.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-squared with 9 degrees of freedom.
    assert!(chi2 < 27.877, "chi2 {chi2}");
}
