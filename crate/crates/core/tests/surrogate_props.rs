use nsc_core::rng::Rng;
use nsc_core::surrogate::{
    adapt_outputs, finetune, pad_input, prune_inputs, select_reported, Dataset, FinetuneConfig, LogEntry, OutputStrategy,
    PaddingMode, ParamVector, Splits, SurrogateNet, Topology,
};

fn random_vector(rng: &mut Rng) -> ParamVector {
    ParamVector::new((0..65).map(|_| rng.uniform_range(-3.0, 3.0)).collect())
}

fn random_net(seed: u64) -> SurrogateNet {
    SurrogateNet::interpret(&Topology::covering(), &random_vector(&mut Rng::new(seed))).unwrap()
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn interpret_flatten_round_trip() {
    let mut rng = Rng::new(77);
    let topo = Topology::covering();
    for _ in 0..100 {
        let p = random_vector(&mut rng);
        let net = SurrogateNet::interpret(&topo, &p).unwrap();
        assert_eq!(bits(net.flatten().values()), bits(p.values()));
    }
}

#[test]
fn zero_pad_and_full_arity() {
    let mut rng = Rng::new(1);
    let p = pad_input(&[1.0, 2.0, 3.0], PaddingMode::ZeroPad, &mut rng).unwrap();
    assert_eq!(p, vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let full: Vec<f64> = (0..9).map(|i| i as f64 * 0.1).collect();
    for mode in [PaddingMode::ZeroPad, PaddingMode::RandomPad] {
        assert_eq!(pad_input(&full, mode, &mut rng).unwrap(), full);
    }
}

#[test]
fn random_pad_statistics() {
    let mut rng = Rng::new(2);
    let mut sum = 0.0;
    let mut count = 0usize;
    for _ in 0..10_000 {
        let p = pad_input(&[0.25], PaddingMode::RandomPad, &mut rng).unwrap();
        assert_eq!(p[0], 0.25);
        for &v in &p[1..] {
            assert!((-1.0..=1.0).contains(&v));
            sum += v;
            count += 1;
        }
    }
    // Standard error of the mean is about 0.0020 here.
    assert!((sum / count as f64).abs() < 0.01);
}

#[test]
fn clone_outputs_identical() {
    let net = random_net(5);
    let wide = adapt_outputs(&net, 2, OutputStrategy::Clone, &mut Rng::new(0)).unwrap();
    assert_eq!(bits(wide.weight(2).row(0)), bits(wide.weight(2).row(1)));
    let mut rng = Rng::new(6);
    for _ in 0..200 {
        let x: Vec<f64> = (0..9).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let y = wide.forward(&x);
        assert_eq!(y[0].to_bits(), y[1].to_bits());
        assert_eq!(y[0].to_bits(), net.forward(&x)[0].to_bits());
    }
}

#[test]
fn grow_to_one_is_identity() {
    let net = random_net(9);
    let same = adapt_outputs(&net, 1, OutputStrategy::Grow, &mut Rng::new(0)).unwrap();
    assert_eq!(same, net);
}

#[test]
fn reinitialize_keeps_hidden_layers() {
    let net = random_net(10);
    let mut rng = Rng::new(11);
    let mut samples = Vec::new();
    for _ in 0..1250 {
        let r = adapt_outputs(&net, 2, OutputStrategy::Reinitialize, &mut rng).unwrap();
        for l in 0..2 {
            assert_eq!(r.weight(l), net.weight(l));
            assert_eq!(r.bias(l), net.bias(l));
        }
        assert_eq!(r.weight(2).shape(), &[2, 4]);
        assert!(r.bias(2).data().iter().all(|&b| b == 0.0));
        samples.extend_from_slice(r.weight(2).data());
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!((var - 0.5).abs() < 0.1, "variance {var}");
    assert!(mean.abs() < 0.05);
}

#[test]
fn prune_matches_zero_padded() {
    let net = random_net(12);
    assert_eq!(prune_inputs(&net, 9).unwrap(), net);
    let pruned = prune_inputs(&net, 3).unwrap();
    assert_eq!(pruned.weight(0).shape(), &[4, 3]);
    assert_eq!(pruned.inputs(), 3);
    let mut rng = Rng::new(13);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..3).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let padded = pad_input(&x, PaddingMode::ZeroPad, &mut rng).unwrap();
        assert_eq!(pruned.forward(&x)[0].to_bits(), net.forward(&padded)[0].to_bits());
    }
    assert!(prune_inputs(&net, 10).is_err());
}

fn line_splits(seed: u64) -> Splits {
    let mut rng = Rng::new(seed);
    let mut make = |n: usize| {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let v = rng.uniform_range(-1.0, 1.0);
            x.extend(pad_input(&[v], PaddingMode::ZeroPad, &mut rng).unwrap());
            y.push(0.3 * v);
        }
        Dataset::new(9, 1, x, y)
    };
    Splits {
        train: make(160),
        val: make(40),
        test: make(200),
    }
}

fn he_vector(seed: u64) -> ParamVector {
    let mut rng = Rng::new(seed);
    let mut v = Vec::new();
    for (i, o) in Topology::covering().layers() {
        v.extend(nsc_core::nn::he_init(&[o, i], &mut rng).unwrap().into_data());
        v.extend(vec![0.0; o]);
    }
    ParamVector::new(v)
}

#[test]
fn fits_a_line() {
    let splits = line_splits(21);
    let trace = finetune(&he_vector(22), &splits, &FinetuneConfig::default()).unwrap();
    let last = trace.final_entry();
    assert_eq!(last.epoch, 5000);
    assert!(last.train < 1e-3, "final train MSE {}", last.train);
    assert_eq!(trace.val_curve.len(), 5001);
    assert_eq!(trace.log.iter().filter(|e| e.epoch % 3 == 0).count(), 1667);
    assert_eq!(trace.log.len(), 1668);
}

#[test]
fn finetune_bitwise_reproducible() {
    let splits = line_splits(31);
    let cfg = FinetuneConfig {
        epochs: 200,
        batch_size: Some(32),
        seed: 4,
        ..FinetuneConfig::default()
    };
    let a = finetune(&he_vector(1), &splits, &cfg).unwrap();
    let b = finetune(&he_vector(1), &splits, &cfg).unwrap();
    assert_eq!(bits(a.final_params.values()), bits(b.final_params.values()));
    assert_eq!(a.log, b.log);
}

#[test]
fn zero_target_zero_init_stays_zero() {
    let mut rng = Rng::new(3);
    let x: Vec<f64> = (0..90).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let d = Dataset::new(9, 1, x, vec![0.0; 10]);
    let splits = Splits {
        train: d.clone(),
        val: d.clone(),
        test: d,
    };
    let cfg = FinetuneConfig {
        epochs: 30,
        ..FinetuneConfig::default()
    };
    let t = finetune(&ParamVector::zeros(65), &splits, &cfg).unwrap();
    assert!(t.log.iter().all(|e| e.train == 0.0 && e.test == 0.0 && e.val == Some(0.0)));
}

#[test]
fn empty_validation_reports_final_epoch() {
    let mut s = line_splits(41);
    s.val = Dataset::empty(9, 1);
    let cfg = FinetuneConfig {
        epochs: 10,
        ..FinetuneConfig::default()
    };
    let t = finetune(&he_vector(2), &s, &cfg).unwrap();
    assert_eq!(t.best_val_epoch, None);
    assert_eq!(t.reported_test_loss, t.final_entry().test);
    assert_eq!(t.final_entry().epoch, 10);
}

#[test]
fn nan_loss_is_an_error() {
    let mut s = line_splits(42);
    s.train.targets[0] = f64::NAN;
    assert!(finetune(&he_vector(3), &s, &FinetuneConfig::default()).is_err());
}

// Reference rule: scan every logged epoch and keep the one with the smallest
// distance, breaking ties towards the smaller epoch.
fn reference_report(log: &[LogEntry], best: usize) -> f64 {
    let mut sorted: Vec<&LogEntry> = log.iter().collect();
    sorted.sort_by_key(|e| (e.epoch.abs_diff(best), e.epoch));
    sorted[0].test
}

#[test]
fn reported_loss_matches_reference() {
    let mut rng = Rng::new(99);
    for _ in 0..200 {
        let total = 1 + rng.below(40);
        let every = 1 + rng.below(5);
        let mut log: Vec<LogEntry> = (0..=total)
            .filter(|e| e % every == 0 || *e == total)
            .map(|epoch| LogEntry {
                epoch,
                train: 0.0,
                val: None,
                test: rng.uniform(),
            })
            .collect();
        log.dedup_by_key(|e| e.epoch);
        let best = rng.below(total + 1);
        assert_eq!(select_reported(&log, Some(best)), reference_report(&log, best));
    }
}

#[test]
fn finetune_trace_records_best_validation_epoch() {
    let s = line_splits(51);
    let cfg = FinetuneConfig {
        epochs: 50,
        ..FinetuneConfig::default()
    };
    let t = finetune(&he_vector(5), &s, &cfg).unwrap();
    let (best, _) = t
        .val_curve
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    assert_eq!(t.best_val_epoch, Some(best));
    assert_eq!(t.reported_test_loss, reference_report(&t.log, best));
}

#[test]
fn stop_at_test_target() {
    let s = line_splits(61);
    let cfg = FinetuneConfig {
        stop_at_test: Some(0.01),
        epochs: 5000,
        ..FinetuneConfig::default()
    };
    let t = finetune(&he_vector(6), &s, &cfg).unwrap();
    let at = t.stopped_at.expect("target reached");
    assert_eq!(t.final_entry().epoch, at);
    assert!(t.final_entry().test <= 0.01);
    assert!(t.log[..t.log.len() - 1].iter().all(|e| e.test > 0.01));
}
