use super::{forward_graph, ParamVector, SurrogateError, SurrogateNet, Topology};
use crate::nn::{Adam, AdamConfig, ParamSet, Tape, Tensor};
use crate::rng::Rng;

/// Row-major inputs and targets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub width: usize,
    pub outputs: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(width: usize, outputs: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Self {
        assert_eq!(inputs.len() * outputs, targets.len() * width, "row counts differ");
        Self {
            width,
            outputs,
            inputs,
            targets,
        }
    }

    pub fn empty(width: usize, outputs: usize) -> Self {
        Self::new(width, outputs, Vec::new(), Vec::new())
    }

    pub fn rows(&self) -> usize {
        if self.outputs == 0 {
            0
        } else {
            self.targets.len() / self.outputs
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0
    }

    pub fn row(&self, r: usize) -> (&[f64], &[f64]) {
        (
            &self.inputs[r * self.width..(r + 1) * self.width],
            &self.targets[r * self.outputs..(r + 1) * self.outputs],
        )
    }

    /// The rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(idx.len() * self.width);
        let mut targets = Vec::with_capacity(idx.len() * self.outputs);
        for &r in idx {
            let (x, y) = self.row(r);
            inputs.extend_from_slice(x);
            targets.extend_from_slice(y);
        }
        Self::new(self.width, self.outputs, inputs, targets)
    }

    pub fn mse(&self, net: &SurrogateNet) -> f64 {
        net.mse(&self.inputs, &self.targets, self.rows())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneConfig {
    pub topology: Topology,
    pub learning_rate: f64,
    pub epochs: usize,
    pub eval_every: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Stop as soon as the test loss is at or below this value.
    pub stop_at_test: Option<f64>,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            topology: Topology::covering(),
            learning_rate: 0.01,
            epochs: 5000,
            eval_every: 3,
            batch_size: None,
            seed: 0,
            stop_at_test: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogEntry {
    pub epoch: usize,
    pub train: f64,
    pub val: Option<f64>,
    pub test: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneTrace {
    pub log: Vec<LogEntry>,
    /// Validation loss after every epoch, starting at epoch 0.
    pub val_curve: Vec<f64>,
    pub best_val_epoch: Option<usize>,
    pub reported_test_loss: f64,
    /// Epoch at which the test target was reached, if one was set and met.
    pub stopped_at: Option<usize>,
    pub epochs_run: usize,
    pub final_params: ParamVector,
}

impl FinetuneTrace {
    pub fn initial_test_loss(&self) -> f64 {
        self.log[0].test
    }

    pub fn final_entry(&self) -> &LogEntry {
        self.log.last().unwrap()
    }
}

/// Test loss at the logged epoch nearest `best_epoch` (earlier epoch on a
/// tie), or the last logged test loss when there is no best epoch.
pub fn select_reported(log: &[LogEntry], best_epoch: Option<usize>) -> f64 {
    let Some(best) = best_epoch else {
        return log.last().map_or(f64::NAN, |e| e.test);
    };
    let mut chosen = &log[0];
    for e in log {
        if e.epoch.abs_diff(best) < chosen.epoch.abs_diff(best) {
            chosen = e;
        }
    }
    chosen.test
}

fn check(cfg: &FinetuneConfig, splits: &Splits) -> Result<(), SurrogateError> {
    if !(cfg.learning_rate > 0.0) {
        return Err(SurrogateError::Config(format!("learning rate {} must be positive", cfg.learning_rate)));
    }
    if cfg.eval_every == 0 {
        return Err(SurrogateError::Config("eval_every must be positive".into()));
    }
    if cfg.batch_size == Some(0) {
        return Err(SurrogateError::Config("batch size must be positive".into()));
    }
    let want = cfg.topology.inputs();
    for d in [&splits.train, &splits.val, &splits.test] {
        if d.width != want && !d.is_empty() {
            return Err(SurrogateError::DataWidth {
                expected: want,
                got: d.width,
            });
        }
    }
    if splits.train.is_empty() && cfg.epochs > 0 {
        return Err(SurrogateError::EmptyTrain);
    }
    Ok(())
}

/// Adam/MSE training from `init`, logging losses at epoch 0, every
/// `eval_every` epochs and at the end.
pub fn finetune(init: &ParamVector, splits: &Splits, cfg: &FinetuneConfig) -> Result<FinetuneTrace, SurrogateError> {
    check(cfg, splits)?;
    let topo = &cfg.topology;
    let mut net = SurrogateNet::interpret(topo, init)?;
    let mut params = ParamSet::new();
    let pid = params.add("surrogate", Tensor::vector(init.values().to_vec()));
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.learning_rate), &params);
    let mut rng = Rng::derive(cfg.seed, &[0x5f7]);

    let has_val = !splits.val.is_empty();
    let mut log = Vec::new();
    let mut val_curve = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut stopped_at = None;

    let n = splits.train.rows();
    let batch = cfg.batch_size.unwrap_or(n).min(n.max(1));
    let mut order: Vec<usize> = (0..n).collect();

    let mut epoch = 0;
    loop {
        let train = splits.train.mse(&net);
        if !train.is_finite() {
            return Err(SurrogateError::NonFiniteLoss { epoch });
        }
        let val = has_val.then(|| splits.val.mse(&net));
        if let Some(v) = val {
            val_curve.push(v);
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((epoch, v));
            }
        }
        let done = epoch == cfg.epochs;
        let mut test = None;
        if let Some(target) = cfg.stop_at_test {
            let t = splits.test.mse(&net);
            if t <= target {
                stopped_at = Some(epoch);
            }
            test = Some(t);
        }
        let stop = done || stopped_at.is_some();
        if epoch % cfg.eval_every == 0 || stop {
            let test = test.unwrap_or_else(|| splits.test.mse(&net));
            log.push(LogEntry { epoch, train, val, test });
        }
        if stop {
            break;
        }

        if batch < n {
            rng.shuffle(&mut order);
        }
        for chunk in order.chunks(batch) {
            let data = if batch < n {
                std::borrow::Cow::Owned(splits.train.select(chunk))
            } else {
                std::borrow::Cow::Borrowed(&splits.train)
            };
            let rows = data.rows();
            let mut tape = Tape::new();
            let vars = params.bind(&mut tape);
            let x = tape.constant(Tensor::matrix(rows, data.width, data.inputs.clone())?);
            let y = tape.constant(Tensor::matrix(rows, data.outputs, data.targets.clone())?);
            let pred = forward_graph(&mut tape, topo, vars[pid.index()], x)?;
            let loss = tape.mse(pred, y)?;
            if !tape.value(loss).item().is_finite() {
                return Err(SurrogateError::NonFiniteLoss { epoch });
            }
            let grads = tape.backward(loss)?;
            adam.step(&mut params, &vars, &grads)?;
        }
        net = SurrogateNet::interpret(topo, &ParamVector::new(params.get(pid).data().to_vec()))?;
        epoch += 1;
    }

    let best_val_epoch = best.map(|(e, _)| e);
    let reported_test_loss = select_reported(&log, best_val_epoch);
    Ok(FinetuneTrace {
        log,
        val_curve,
        best_val_epoch,
        reported_test_loss,
        stopped_at,
        epochs_run: epoch,
        final_params: net.flatten(),
    })
}

/// MSE of the flat surrogate `params` on `data` and its gradient.
pub fn loss_and_grad(topology: &Topology, params: &[f64], data: &Dataset) -> Result<(f64, Vec<f64>), SurrogateError> {
    let rows = data.rows();
    let mut tape = Tape::new();
    let p = tape.param(Tensor::vector(params.to_vec()));
    let x = tape.constant(Tensor::matrix(rows, data.width, data.inputs.clone())?);
    let y = tape.constant(Tensor::matrix(rows, data.outputs, data.targets.clone())?);
    let pred = forward_graph(&mut tape, topology, p, x)?;
    let loss = tape.mse(pred, y)?;
    let grads = tape.backward(loss)?;
    Ok((tape.value(loss).item(), grads.get(p).unwrap().data().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(epoch: usize, test: f64) -> LogEntry {
        LogEntry {
            epoch,
            train: 0.0,
            val: None,
            test,
        }
    }

    #[test]
    fn selection_prefers_earlier_on_tie() {
        let log = [entry(0, 1.0), entry(3, 2.0), entry(6, 3.0)];
        assert_eq!(select_reported(&log, Some(4)), 2.0);
        assert_eq!(select_reported(&log, Some(5)), 3.0);
        assert_eq!(select_reported(&log, None), 3.0);
        let odd = [entry(0, 1.0), entry(2, 2.0), entry(4, 3.0)];
        assert_eq!(select_reported(&odd, Some(3)), 2.0);
    }

    #[test]
    fn zero_epochs_logs_initial_only() {
        let d = Dataset::new(9, 1, vec![0.5; 18], vec![1.0, 2.0]);
        let splits = Splits {
            train: d.clone(),
            val: Dataset::empty(9, 1),
            test: d,
        };
        let cfg = FinetuneConfig {
            epochs: 0,
            ..FinetuneConfig::default()
        };
        let t = finetune(&ParamVector::zeros(65), &splits, &cfg).unwrap();
        assert_eq!(t.log.len(), 1);
        assert_eq!(t.reported_test_loss, 2.5);
    }
}
