//! Injected initializers and trainers with closed-form loss curves, and a
//! hand-built trial table with known aggregates.

use nsc_core::corpus::ProgramRecord;
use nsc_core::evalkit::{Initializer, TrainOutcome, Trainer, TrialResult};
use nsc_core::surrogate::{FinetuneConfig, LogEntry, ParamVector, Splits};

/// Encodes a decay constant in every parameter. `tau = inf` never improves.
pub struct CurveInit {
    pub name: &'static str,
    pub tau: f64,
    pub baseline: bool,
    pub instances: usize,
}

impl Initializer for CurveInit {
    fn name(&self) -> &str {
        self.name
    }
    fn instances(&self) -> usize {
        self.instances
    }
    fn is_baseline(&self) -> bool {
        self.baseline
    }
    fn init(&self, _: &ProgramRecord, _: usize, _: u64) -> Result<ParamVector, String> {
        Ok(ParamVector::new(vec![self.tau; 65]))
    }
}

pub fn curve_loss(tau: f64, epoch: usize) -> f64 {
    (-(epoch as f64) / tau).exp()
}

/// Test loss `exp(-epoch / tau)`, logged like the real finetuner.
pub struct CurveTrainer;

impl Trainer for CurveTrainer {
    fn train(&self, init: &ParamVector, _: &Splits, cfg: &FinetuneConfig) -> Result<TrainOutcome, String> {
        let tau = init.values()[0];
        let mut log = Vec::new();
        for epoch in 0..=cfg.epochs {
            let test = curve_loss(tau, epoch);
            let stop = epoch == cfg.epochs || cfg.stop_at_test.is_some_and(|t| test <= t);
            if epoch % cfg.eval_every == 0 || stop {
                log.push(LogEntry { epoch, train: test, val: None, test });
            }
            if stop {
                break;
            }
        }
        Ok(TrainOutcome {
            reported_test_loss: log.last().unwrap().test,
            log,
        })
    }
}

fn trial(method: &str, program: &str, size: f64, trial: usize, metric: f64) -> TrialResult {
    TrialResult {
        program: if program == "p0" { 0 } else { 1 },
        program_id: program.into(),
        method: method.into(),
        instance: 0,
        trial,
        size: Some(size),
        seed: 0,
        metric,
        timed_out: false,
        error: None,
    }
}

/// Two programs, two sizes, ratios 2, 8, 0.5 and 3 (one zero trial dropped).
pub fn hand_table() -> Vec<TrialResult> {
    let cells: [(&str, f64, [f64; 2], [f64; 2]); 4] = [
        ("p0", 0.1, [1.0, 3.0], [0.5, 1.5]),
        ("p0", 1.0, [4.0, 4.0], [0.5, 0.5]),
        ("p1", 0.1, [1.0, 1.0], [2.0, 2.0]),
        ("p1", 1.0, [3.0, 3.0], [1.0, 0.0]),
    ];
    let mut out = Vec::new();
    for (p, s, rnd, m) in cells {
        for t in 0..2 {
            out.push(trial("RND", p, s, t, rnd[t]));
            out.push(trial("M", p, s, t, m[t]));
        }
    }
    out
}

/// Independent MPI oracle: scan integer percentiles with the interpolation
/// written out from rank fractions.
pub fn brute_mpi(ratios: &[f64]) -> u32 {
    let mut s = ratios.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    for p in 0..=100u32 {
        let rank = (p as f64 / 100.0) * (n as f64 - 1.0);
        let lo = rank as usize;
        let frac = rank - lo as f64;
        let v = if lo + 1 < n { s[lo] * (1.0 - frac) + s[lo + 1] * frac } else { s[lo] };
        if v > 1.0 {
            return p;
        }
    }
    100
}
