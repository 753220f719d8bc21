use nsc_core::baselines::{adapt, maml_train_tasks, random_init, MamlConfig, MamlTask};
use nsc_core::rng::Rng;
use nsc_core::surrogate::{pad_input, Dataset, PaddingMode, SurrogateNet, Topology};

/// `amp * sin(x + phase)` with `k` support and `k` query points.
pub fn sine_task(rng: &mut Rng, k: usize) -> MamlTask {
    let amp = rng.uniform_range(0.1, 5.0);
    let phase = rng.uniform_range(0.0, std::f64::consts::PI);
    let mut mk = |n: usize| {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let v = rng.uniform_range(-5.0, 5.0);
            x.extend(pad_input(&[v], PaddingMode::ZeroPad, rng).unwrap());
            y.push(amp * (v + phase).sin());
        }
        Dataset::new(9, 1, x, y)
    };
    MamlTask {
        support: mk(k),
        query: mk(k),
    }
}

/// Meta-trains on 2000 sine tasks and counts how many of 100 held-out tasks
/// end with a lower query loss after adaptation.
pub fn held_out_improvements() -> usize {
    let topo = Topology::covering();
    let mut rng = Rng::new(2024);
    let train: Vec<MamlTask> = (0..2000).map(|_| sine_task(&mut rng, 10)).collect();
    let cfg = MamlConfig {
        epochs: 8000,
        meta_batch: 25,
        inner_lr: 0.1,
        outer_lr: 0.05,
        inner_steps: 3,
        seed: 1,
        ..MamlConfig::default()
    };
    let init = random_init(&topo, &mut Rng::new(3));
    let (theta, _) = maml_train_tasks(&train, &init, &cfg).unwrap();
    let net = SurrogateNet::interpret(&topo, &theta).unwrap();
    let mut improved = 0;
    for _ in 0..100 {
        let t = sine_task(&mut rng, 10);
        let adapted = adapt(&topo, theta.values(), &t.support, cfg.inner_lr, 3).unwrap();
        let after = t.query.mse(&SurrogateNet::interpret(&topo, &adapted.into()).unwrap());
        if after < t.query.mse(&net) {
            improved += 1;
        }
    }
    improved
}
