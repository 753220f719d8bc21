use super::{random_init, BaselineError};
use crate::corpus::ProgramRecord;
use crate::rng::Rng;
use crate::surrogate::{loss_and_grad, Dataset, PaddingMode, ParamVector, Topology};

#[derive(Clone, Debug, PartialEq)]
pub struct MamlConfig {
    pub meta_batch: usize,
    pub input_batch: usize,
    /// Meta-iterations.
    pub epochs: usize,
    pub inner_lr: f64,
    pub outer_lr: f64,
    pub inner_steps: usize,
    pub padding: PaddingMode,
    pub seed: u64,
    pub topology: Topology,
    /// Share of each program's train rows used as support; the rest is query.
    pub support_fraction: f64,
}

/// Meta-iterations used by the original MAML applications.
pub const FULL_MAML_EPOCHS: usize = 70_000;

impl Default for MamlConfig {
    fn default() -> Self {
        Self {
            meta_batch: 32,
            input_batch: 1024,
            epochs: 5000,
            inner_lr: 0.2,
            outer_lr: 0.001,
            inner_steps: 3,
            padding: PaddingMode::ZeroPad,
            seed: 0,
            topology: Topology::covering(),
            support_fraction: 5.0 / 7.0,
        }
    }
}

/// Support and query rows at the surrogate input width.
#[derive(Clone, Debug, PartialEq)]
pub struct MamlTask {
    pub support: Dataset,
    pub query: Dataset,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MamlReport {
    /// Mean query loss of the initialization, per meta-iteration.
    pub pre_losses: Vec<f64>,
    /// Mean query loss after inner adaptation, per meta-iteration.
    pub post_losses: Vec<f64>,
    pub skipped_batches: usize,
}

/// `steps` plain SGD steps at rate `alpha` on `support`, starting from a
/// copy of `init`.
pub fn adapt(topology: &Topology, init: &[f64], support: &Dataset, alpha: f64, steps: usize) -> Result<Vec<f64>, BaselineError> {
    let mut theta = init.to_vec();
    for _ in 0..steps {
        let (_, g) = loss_and_grad(topology, &theta, support)?;
        theta.iter_mut().zip(&g).for_each(|(t, d)| *t -= alpha * d);
    }
    Ok(theta)
}

/// First-order meta-gradient: the mean over tasks of the query-loss
/// gradient at the adapted parameters. Also returns mean pre- and
/// post-adaptation query losses.
pub fn meta_gradient(
    topology: &Topology,
    init: &[f64],
    tasks: &[(Dataset, Dataset)],
    alpha: f64,
    steps: usize,
) -> Result<(Vec<f64>, f64, f64), BaselineError> {
    let mut acc = vec![0.0; init.len()];
    let (mut pre, mut post) = (0.0, 0.0);
    for (support, query) in tasks {
        let adapted = adapt(topology, init, support, alpha, steps)?;
        let net = crate::surrogate::SurrogateNet::interpret(topology, &ParamVector::new(init.to_vec()))?;
        pre += query.mse(&net);
        let (l, g) = loss_and_grad(topology, &adapted, query)?;
        post += l;
        acc.iter_mut().zip(&g).for_each(|(a, d)| *a += d);
    }
    let n = tasks.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok((acc, pre / n, post / n))
}

fn check(cfg: &MamlConfig) -> Result<(), BaselineError> {
    if cfg.meta_batch == 0 || cfg.input_batch == 0 {
        return Err(BaselineError::Config("batch sizes must be positive".into()));
    }
    if !(cfg.inner_lr >= 0.0) || !(cfg.outer_lr > 0.0) {
        return Err(BaselineError::Config("learning rates must be positive".into()));
    }
    if !(cfg.support_fraction > 0.0 && cfg.support_fraction < 1.0) {
        return Err(BaselineError::Config("support fraction must lie in (0, 1)".into()));
    }
    Ok(())
}

/// Splits each program's train rows into support and query and pads them.
pub fn tasks_from_records(records: &[ProgramRecord], cfg: &MamlConfig) -> Result<Vec<MamlTask>, BaselineError> {
    let mut rng = Rng::derive(cfg.seed, &[0x3a3]);
    records
        .iter()
        .map(|r| {
            let train = crate::corpus::pad_dataset(&r.train_set(), cfg.padding, &mut rng)?;
            let n = train.rows();
            let n_support = ((n as f64) * cfg.support_fraction).round() as usize;
            if n_support == 0 || n_support >= n {
                return Err(BaselineError::NoRows(r.id.clone()));
            }
            let idx: Vec<usize> = (0..n).collect();
            Ok(MamlTask {
                support: train.select(&idx[..n_support]),
                query: train.select(&idx[n_support..]),
            })
        })
        .collect()
}

/// First-order MAML over a program corpus from a He initialization.
pub fn maml_train(records: &[ProgramRecord], cfg: &MamlConfig) -> Result<(ParamVector, MamlReport), BaselineError> {
    check(cfg)?;
    if records.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    let tasks = tasks_from_records(records, cfg)?;
    let init = random_init(&cfg.topology, &mut Rng::derive(cfg.seed, &[0x3a4]));
    maml_train_tasks(&tasks, &init, cfg)
}

fn subsample(d: &Dataset, k: usize, rng: &mut Rng) -> Dataset {
    if k >= d.rows() {
        d.clone()
    } else {
        d.select(&rng.sample_indices(d.rows(), k))
    }
}

/// First-order MAML over explicit tasks.
pub fn maml_train_tasks(tasks: &[MamlTask], init: &ParamVector, cfg: &MamlConfig) -> Result<(ParamVector, MamlReport), BaselineError> {
    check(cfg)?;
    if tasks.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    let mut theta = init.values().to_vec();
    let mut rng = Rng::derive(cfg.seed, &[0x3a5]);
    let mut report = MamlReport::default();
    let mut bad = 0;
    for _ in 0..cfg.epochs {
        let chosen = rng.sample_indices(tasks.len(), cfg.meta_batch);
        let batch: Vec<(Dataset, Dataset)> = chosen
            .iter()
            .map(|&i| {
                let t = &tasks[i];
                (subsample(&t.support, cfg.input_batch, &mut rng), subsample(&t.query, cfg.input_batch, &mut rng))
            })
            .collect();
        let (g, pre, post) = meta_gradient(&cfg.topology, &theta, &batch, cfg.inner_lr, cfg.inner_steps)?;
        if !post.is_finite() || g.iter().any(|v| !v.is_finite()) {
            report.skipped_batches += 1;
            bad += 1;
            log::warn!("skipping meta-batch with non-finite loss");
            if bad >= 3 {
                return Err(BaselineError::NonFinite(bad));
            }
            continue;
        }
        bad = 0;
        theta.iter_mut().zip(&g).for_each(|(t, d)| *t -= cfg.outer_lr * d);
        report.pre_losses.push(pre);
        report.post_losses.push(post);
    }
    Ok((ParamVector::new(theta), report))
}
