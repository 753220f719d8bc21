use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::surrogate::{pad_input, Dataset, PaddingMode, SurrogateError};

/// One curated function with its harvested input/output table.
///
/// `io` holds the train rows first, then the test rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub id: String,
    pub name: String,
    pub provenance: String,
    pub return_type: String,
    pub param_types: Vec<String>,
    pub source: String,
    pub tokens: Vec<String>,
    pub arity: usize,
    pub io: Vec<(Vec<f64>, f64)>,
    pub split_seed: u64,
    pub train_rows: usize,
    pub audit: Vec<String>,
}

impl ProgramRecord {
    /// Shuffles harvested rows with `split_seed` and puts the first
    /// `floor(rows * train_fraction)` of them in the train split.
    pub fn split_rows(rows: Vec<(Vec<f64>, f64)>, split_seed: u64, train_fraction: f64) -> (Vec<(Vec<f64>, f64)>, usize) {
        let n = rows.len();
        let perm = Rng::derive(split_seed, &[0x5111]).permutation(n);
        let mut slots: Vec<Option<(Vec<f64>, f64)>> = rows.into_iter().map(Some).collect();
        let io = perm.iter().map(|&i| slots[i].take().unwrap()).collect();
        (io, (n as f64 * train_fraction).floor() as usize)
    }

    fn dataset(&self, rows: &[(Vec<f64>, f64)]) -> Dataset {
        let mut x = Vec::with_capacity(rows.len() * self.arity);
        let mut y = Vec::with_capacity(rows.len());
        for (i, o) in rows {
            x.extend_from_slice(i);
            y.push(*o);
        }
        Dataset::new(self.arity, 1, x, y)
    }

    pub fn train_io(&self) -> &[(Vec<f64>, f64)] {
        &self.io[..self.train_rows.min(self.io.len())]
    }

    pub fn test_io(&self) -> &[(Vec<f64>, f64)] {
        &self.io[self.train_rows.min(self.io.len())..]
    }

    /// Train rows at the program's own arity.
    pub fn train_set(&self) -> Dataset {
        self.dataset(self.train_io())
    }

    pub fn test_set(&self) -> Dataset {
        self.dataset(self.test_io())
    }

    /// Up to `input_batch` train rows padded to the covering width: every
    /// row in stored order when the batch covers them all, otherwise a
    /// random subset.
    pub fn sample_batch(&self, input_batch: usize, padding: PaddingMode, rng: &mut Rng) -> Result<Dataset, SurrogateError> {
        let train = self.train_io();
        let idx: Vec<usize> = if input_batch >= train.len() {
            (0..train.len()).collect()
        } else {
            rng.sample_indices(train.len(), input_batch)
        };
        let mut x = Vec::with_capacity(idx.len() * crate::surrogate::MAX_INPUTS);
        let mut y = Vec::with_capacity(idx.len());
        for &i in &idx {
            let (inp, out) = &train[i];
            x.extend(pad_input(inp, padding, rng)?);
            y.push(*out);
        }
        Ok(Dataset::new(crate::surrogate::MAX_INPUTS, 1, x, y))
    }
}

/// Pads every row of an arity-wide dataset to the covering width.
pub fn pad_dataset(data: &Dataset, mode: PaddingMode, rng: &mut Rng) -> Result<Dataset, SurrogateError> {
    let mut x = Vec::with_capacity(data.rows() * crate::surrogate::MAX_INPUTS);
    for r in 0..data.rows() {
        x.extend(pad_input(data.row(r).0, mode, rng)?);
    }
    Ok(Dataset::new(crate::surrogate::MAX_INPUTS, data.outputs, x, data.targets.clone()))
}
