mod common;

use common::records::{affine_family, record_from};
use nsc_core::baselines::{
    adapt, maml_train, meta_gradient, pretrain, pretrain_from, random_init, MamlConfig,
    PretrainConfig,
};
use nsc_core::rng::Rng;
use nsc_core::surrogate::{
    finetune, loss_and_grad, pad_input, Dataset, FinetuneConfig, PaddingMode, Splits, SurrogateNet, Topology,
};

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn random_init_layout() {
    let topo = Topology::covering();
    let p = random_init(&topo, &mut Rng::new(3));
    assert_eq!(p.len(), 65);
    let net = SurrogateNet::interpret(&topo, &p).unwrap();
    for l in 0..3 {
        assert!(net.bias(l).data().iter().all(|&b| b == 0.0));
    }
    assert_eq!(p, random_init(&topo, &mut Rng::new(3)));
    assert_ne!(p, random_init(&topo, &mut Rng::new(4)));
}

fn line_task(rng: &mut Rng, slope: f64, n: usize) -> (Dataset, Dataset) {
    let mut mk = |n| {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let v = rng.uniform_range(-1.0, 1.0);
            x.extend(pad_input(&[v], PaddingMode::ZeroPad, rng).unwrap());
            y.push(slope * v);
        }
        Dataset::new(9, 1, x, y)
    };
    (mk(n), mk(n))
}

#[test]
fn zero_steps_and_zero_rate_give_query_gradient() {
    let topo = Topology::covering();
    let init = random_init(&topo, &mut Rng::new(1)).into_values();
    let mut rng = Rng::new(2);
    let tasks: Vec<_> = (0..4).map(|i| line_task(&mut rng, 0.2 * i as f64, 20)).collect();
    let mut expected = vec![0.0; 65];
    for (_, q) in &tasks {
        let (_, g) = loss_and_grad(&topo, &init, q).unwrap();
        expected.iter_mut().zip(&g).for_each(|(e, d)| *e += d);
    }
    expected.iter_mut().for_each(|e| *e /= 4.0);
    let (g0, pre, post) = meta_gradient(&topo, &init, &tasks, 0.2, 0).unwrap();
    assert_eq!(bits(&g0), bits(&expected));
    assert_eq!(pre, post);
    let (ga, _, _) = meta_gradient(&topo, &init, &tasks, 0.0, 3).unwrap();
    assert_eq!(bits(&ga), bits(&expected));
}

#[test]
fn adaptation_leaves_initialization_untouched() {
    let topo = Topology::covering();
    let init = random_init(&topo, &mut Rng::new(5)).into_values();
    let before = bits(&init);
    let (s, _) = line_task(&mut Rng::new(6), 0.7, 30);
    let adapted = adapt(&topo, &init, &s, 0.2, 3).unwrap();
    assert_eq!(bits(&init), before);
    assert_ne!(bits(&adapted), before);
}

#[test]
fn maml_emits_interpretable_vectors_deterministically() {
    let recs = affine_family(6, 28, 2);
    let cfg = MamlConfig {
        epochs: 20,
        meta_batch: 4,
        seed: 7,
        ..MamlConfig::default()
    };
    let (a, ra) = maml_train(&recs, &cfg).unwrap();
    let (b, _) = maml_train(&recs, &cfg).unwrap();
    assert_eq!(bits(a.values()), bits(b.values()));
    assert_eq!(ra.post_losses.len(), 20);
    assert!(SurrogateNet::interpret(&Topology::covering(), &a).is_ok());
    let (c, _) = maml_train(&recs, &MamlConfig { seed: 8, ..cfg }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn sine_tasks_improve_after_adaptation() {
    let improved = common::sine::held_out_improvements();
    assert!(improved >= 90, "{improved} of 100 tasks improved");
}

#[test]
fn single_program_pretraining_is_finetuning() {
    let rec = record_from("p", "float f(float a,float b,float c,float d,float e,float g,float h,float i,float j){return a*b-c;}", 9, 64, 3, |x| x[0] * x[1] - x[2]);
    let topo = Topology::covering();
    let init = random_init(&topo, &mut Rng::new(11));
    let cfg = PretrainConfig {
        epochs: 100,
        learning_rate: 0.01,
        ..PretrainConfig::default()
    };
    let (p, report) = pretrain_from(&init, std::slice::from_ref(&rec), &cfg).unwrap();
    let splits = Splits {
        train: nsc_core::corpus::pad_dataset(&rec.train_set(), PaddingMode::ZeroPad, &mut Rng::new(0)).unwrap(),
        val: Dataset::empty(9, 1),
        test: nsc_core::corpus::pad_dataset(&rec.test_set(), PaddingMode::ZeroPad, &mut Rng::new(0)).unwrap(),
    };
    let ft = finetune(
        &init,
        &splits,
        &FinetuneConfig {
            epochs: 100,
            eval_every: 1,
            ..FinetuneConfig::default()
        },
    )
    .unwrap();
    for (e, l) in report.epoch_losses.iter().enumerate() {
        assert!((l - ft.log[e].train).abs() <= 1e-12, "epoch {e}: {l} vs {}", ft.log[e].train);
    }
    for (a, b) in p.values().iter().zip(ft.final_params.values()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn pooled_loss_non_increasing_on_linear_corpus() {
    let recs = affine_family(8, 64, 12);
    let cfg = PretrainConfig {
        epochs: 50,
        seed: 2,
        padding: PaddingMode::ZeroPad,
        ..PretrainConfig::default()
    };
    let (p, report) = pretrain(&recs, &cfg).unwrap();
    assert_eq!(p.len(), 65);
    for w in report.epoch_losses.windows(2) {
        assert!(w[1] <= w[0], "{} rose to {}", w[0], w[1]);
    }
}
