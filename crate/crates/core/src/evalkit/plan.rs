use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::baselines::random_init;
use crate::corpus::{pad_dataset, ProgramRecord};
use crate::hypernet::HypernetModel;
use crate::rng::{derive_seed, Rng};
use crate::surrogate::{finetune, Dataset, FinetuneConfig, LogEntry, PaddingMode, ParamVector, Splits, Topology};

/// Dataset-size grid as fractions of each program's training rows.
pub const SIZE_GRID: [f64; 5] = [0.0, 0.001, 0.01, 0.1, 1.0];
pub const TRIALS: usize = 9;
pub const TIMEOUT_EPOCHS: usize = 15_000;
pub const TARGET_EPOCHS: usize = 5_000;

/// A source of surrogate initializations.
pub trait Initializer: Sync {
    fn name(&self) -> &str;

    fn instances(&self) -> usize {
        1
    }

    /// True for the random-initialization baseline every ratio divides by.
    fn is_baseline(&self) -> bool {
        false
    }

    fn init(&self, program: &ProgramRecord, instance: usize, seed: u64) -> Result<ParamVector, String>;
}

/// He-random weights drawn afresh for every trial.
pub struct RandomInit {
    pub topology: Topology,
}

impl Default for RandomInit {
    fn default() -> Self {
        Self { topology: Topology::covering() }
    }
}

impl Initializer for RandomInit {
    fn name(&self) -> &str {
        "RND"
    }

    fn is_baseline(&self) -> bool {
        true
    }

    fn init(&self, _: &ProgramRecord, _: usize, seed: u64) -> Result<ParamVector, String> {
        Ok(random_init(&self.topology, &mut Rng::derive(seed, &[0x12d])))
    }
}

/// One stored vector per instance, shared by every program (MAML, pretraining).
pub struct FixedInit {
    pub name: String,
    pub vectors: Vec<ParamVector>,
}

impl Initializer for FixedInit {
    fn name(&self) -> &str {
        &self.name
    }

    fn instances(&self) -> usize {
        self.vectors.len()
    }

    fn init(&self, _: &ProgramRecord, instance: usize, _: u64) -> Result<ParamVector, String> {
        self.vectors.get(instance).cloned().ok_or_else(|| format!("no instance {instance}"))
    }
}

/// Vectors compiled from program text by trained hypernetworks.
pub struct CompiledInit {
    pub name: String,
    pub models: Vec<HypernetModel>,
}

impl Initializer for CompiledInit {
    fn name(&self) -> &str {
        &self.name
    }

    fn instances(&self) -> usize {
        self.models.len()
    }

    fn init(&self, program: &ProgramRecord, instance: usize, _: u64) -> Result<ParamVector, String> {
        let model = self.models.get(instance).ok_or_else(|| format!("no instance {instance}"))?;
        model.compile_tokens(&program.tokens).map_err(|e| e.to_string())
    }
}

/// What a training run reports back.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub log: Vec<LogEntry>,
    pub reported_test_loss: f64,
}

/// Runs one surrogate training job.
pub trait Trainer: Sync {
    fn train(&self, init: &ParamVector, splits: &Splits, cfg: &FinetuneConfig) -> Result<TrainOutcome, String>;
}

/// The standard trainer: Adam finetuning.
pub struct FinetuneTrainer;

impl Trainer for FinetuneTrainer {
    fn train(&self, init: &ParamVector, splits: &Splits, cfg: &FinetuneConfig) -> Result<TrainOutcome, String> {
        let trace = finetune(init, splits, cfg).map_err(|e| e.to_string())?;
        Ok(TrainOutcome {
            reported_test_loss: trace.reported_test_loss,
            log: trace.log,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub programs: Vec<ProgramRecord>,
    pub sizes: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub finetune: FinetuneConfig,
    /// Fraction of each subset held out for validation.
    pub val_fraction: f64,
    pub padding: PaddingMode,
    pub jobs: usize,
}

impl ExperimentPlan {
    pub fn new(programs: Vec<ProgramRecord>, seed: u64) -> Self {
        Self {
            programs,
            sizes: SIZE_GRID.to_vec(),
            trials: TRIALS,
            seed,
            finetune: FinetuneConfig::default(),
            val_fraction: 0.2,
            padding: PaddingMode::ZeroPad,
            jobs: 1,
        }
    }

    /// Seed of one trial, a pure function of the plan seed and its indices.
    pub fn trial_seed(&self, program: usize, method: usize, instance: usize, trial: usize, size: usize) -> u64 {
        derive_seed(self.seed, &[program as u64, method as u64, instance as u64, trial as u64, size as u64])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub program: usize,
    pub program_id: String,
    pub method: String,
    pub instance: usize,
    pub trial: usize,
    /// Dataset-size fraction, absent for training-time trials.
    pub size: Option<f64>,
    pub seed: u64,
    /// Reported test loss or finish epoch.
    pub metric: f64,
    pub timed_out: bool,
    pub error: Option<String>,
}

impl TrialResult {
    pub fn is_zero(&self) -> bool {
        self.metric == 0.0
    }

    pub fn is_nan(&self) -> bool {
        self.metric.is_nan()
    }

    /// Counts toward aggregation: finite, non-zero, no error.
    pub fn usable(&self) -> bool {
        self.error.is_none() && self.metric.is_finite() && self.metric != 0.0
    }
}

fn padded(d: &Dataset, mode: PaddingMode, width: usize, rng: &mut Rng) -> Result<Dataset, String> {
    if d.width == width {
        return Ok(d.clone());
    }
    pad_dataset(d, mode, rng).map_err(|e| e.to_string())
}

/// Runs `jobs` closures over `0..n`, returning results in index order.
fn parallel<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = f(i);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect()
}

/// A fresh `size` fraction of the program's train rows split into
/// sub-train and validation, plus the full test split, all padded to `width`.
pub fn subset_splits(rec: &ProgramRecord, size: f64, val_fraction: f64, padding: PaddingMode, width: usize, seed: u64) -> Result<Splits, String> {
    let mut rng = Rng::derive(seed, &[0xd47a]);
    let train = rec.train_set();
    let count = ((size * train.rows() as f64).floor() as usize).min(train.rows());
    let mut idx = rng.sample_indices(train.rows(), count);
    rng.shuffle(&mut idx);
    let n_val = (count as f64 * val_fraction).floor() as usize;
    let (val_idx, train_idx) = idx.split_at(n_val);
    let test = padded(&rec.test_set(), padding, width, &mut rng)?;
    Ok(Splits {
        train: padded(&train.select(train_idx), padding, width, &mut rng)?,
        val: padded(&train.select(val_idx), padding, width, &mut rng)?,
        test,
    })
}

struct Job {
    program: usize,
    method: usize,
    instance: usize,
    trial: usize,
    size: usize,
}

fn data_efficiency_trial(plan: &ExperimentPlan, methods: &[&dyn Initializer], trainer: &dyn Trainer, job: &Job) -> TrialResult {
    let rec = &plan.programs[job.program];
    let m = methods[job.method];
    let size = plan.sizes[job.size];
    let seed = plan.trial_seed(job.program, job.method, job.instance, job.trial, job.size);
    let mut result = TrialResult {
        program: job.program,
        program_id: rec.id.clone(),
        method: m.name().to_string(),
        instance: job.instance,
        trial: job.trial,
        size: Some(size),
        seed,
        metric: f64::NAN,
        timed_out: false,
        error: None,
    };
    let run = || -> Result<f64, String> {
        let init = m.init(rec, job.instance, seed)?;
        let width = plan.finetune.topology.inputs();
        let splits = subset_splits(rec, size, plan.val_fraction, plan.padding, width, seed)?;
        let mut cfg = plan.finetune.clone();
        cfg.seed = seed;
        if splits.train.is_empty() {
            cfg.epochs = 0;
        }
        Ok(trainer.train(&init, &splits, &cfg)?.reported_test_loss)
    };
    match run() {
        Ok(v) => result.metric = v,
        Err(e) => result.error = Some(e),
    }
    result
}

/// Finetunes every (program, method, instance, size, trial) cell.
pub fn run_data_efficiency(plan: &ExperimentPlan, methods: &[&dyn Initializer], trainer: &dyn Trainer) -> Vec<TrialResult> {
    let mut jobs = Vec::new();
    for program in 0..plan.programs.len() {
        for (method, m) in methods.iter().enumerate() {
            for instance in 0..m.instances() {
                for size in 0..plan.sizes.len() {
                    for trial in 0..plan.trials {
                        jobs.push(Job {
                            program,
                            method,
                            instance,
                            trial,
                            size,
                        });
                    }
                }
            }
        }
    }
    parallel(jobs.len(), plan.jobs, |i| data_efficiency_trial(plan, methods, trainer, &jobs[i]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingTimeResults {
    /// Per-program target test loss.
    pub targets: Vec<f64>,
    pub trials: Vec<TrialResult>,
}

/// Epoch of the first logged test loss at or below `target`.
pub fn finish_epoch(log: &[LogEntry], target: f64) -> Option<usize> {
    log.iter().find(|e| e.test <= target).map(|e| e.epoch)
}

fn full_splits(plan: &ExperimentPlan, rec: &ProgramRecord, seed: u64) -> Result<Splits, String> {
    let width = plan.finetune.topology.inputs();
    let mut rng = Rng::derive(seed, &[0x7e57]);
    Ok(Splits {
        train: padded(&rec.train_set(), plan.padding, width, &mut rng)?,
        val: Dataset::empty(width, 1),
        test: padded(&rec.test_set(), plan.padding, width, &mut rng)?,
    })
}

/// Training-time-to-target experiment: random-init runs of 5,000 epochs fix
/// each program's target, then every method trains until it reaches the
/// target or 15,000 epochs.
pub fn run_training_time(plan: &ExperimentPlan, methods: &[&dyn Initializer], trainer: &dyn Trainer) -> Result<TrainingTimeResults, String> {
    let base = methods
        .iter()
        .position(|m| m.is_baseline())
        .ok_or("training time needs a random-initialization baseline")?;
    let n = plan.programs.len();
    let targets: Vec<Result<f64, String>> = parallel(n * plan.trials, plan.jobs, |i| {
        let (p, t) = (i / plan.trials, i % plan.trials);
        let rec = &plan.programs[p];
        let seed = plan.trial_seed(p, base, 0, t, 0);
        let init = methods[base].init(rec, 0, seed)?;
        let mut cfg = plan.finetune.clone();
        cfg.seed = seed;
        cfg.epochs = TARGET_EPOCHS.min(plan.finetune.epochs);
        let out = trainer.train(&init, &full_splits(plan, rec, seed)?, &cfg)?;
        out.log.last().map(|e| e.test).ok_or_else(|| "empty training log".to_string())
    })
    .chunks(plan.trials)
    .map(|runs| {
        let finals: Result<Vec<f64>, String> = runs.iter().cloned().collect();
        finals.map(|f| f.iter().sum::<f64>() / f.len() as f64)
    })
    .collect();

    let mut jobs = Vec::new();
    for program in 0..n {
        for (method, m) in methods.iter().enumerate() {
            for instance in 0..m.instances() {
                for trial in 0..plan.trials {
                    jobs.push(Job {
                        program,
                        method,
                        instance,
                        trial,
                        size: 0,
                    });
                }
            }
        }
    }
    let trials = parallel(jobs.len(), plan.jobs, |i| {
        let job = &jobs[i];
        let rec = &plan.programs[job.program];
        let m = methods[job.method];
        let seed = plan.trial_seed(job.program, job.method, job.instance, job.trial, 0);
        let mut r = TrialResult {
            program: job.program,
            program_id: rec.id.clone(),
            method: m.name().to_string(),
            instance: job.instance,
            trial: job.trial,
            size: None,
            seed,
            metric: f64::NAN,
            timed_out: false,
            error: None,
        };
        let run = || -> Result<(f64, bool), String> {
            let target = targets[job.program].clone()?;
            let init = m.init(rec, job.instance, seed)?;
            let mut cfg = plan.finetune.clone();
            cfg.seed = seed;
            cfg.epochs = TIMEOUT_EPOCHS;
            cfg.stop_at_test = Some(target);
            let out = trainer.train(&init, &full_splits(plan, rec, seed)?, &cfg)?;
            Ok(match finish_epoch(&out.log, target) {
                Some(e) => (e.min(TIMEOUT_EPOCHS) as f64, false),
                None => (TIMEOUT_EPOCHS as f64, true),
            })
        };
        match run() {
            Ok((e, timeout)) => {
                r.metric = e;
                r.timed_out = timeout;
            }
            Err(e) => r.error = Some(e),
        }
        r
    });
    Ok(TrainingTimeResults {
        targets: targets.into_iter().map(|t| t.unwrap_or(f64::NAN)).collect(),
        trials,
    })
}
