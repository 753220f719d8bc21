use std::collections::HashSet;

use super::{BenchError, Kernel};
use crate::corpus::ProgramRecord;
use crate::hypernet::tokenize;
use crate::quantize::Image;
use crate::rng::Rng;
use crate::surrogate::Dataset;

/// Row counts for one kernel's train and test sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchSizes {
    pub train: usize,
    pub test: usize,
}

impl BenchSizes {
    pub fn reference(kernel: Kernel) -> Self {
        let (train, test) = match kernel {
            Kernel::Fft0 | Kernel::Fft1 => (32_768, 2_048),
            Kernel::Invk2j0 | Kernel::Invk2j1 => (10_000, 10_000),
            Kernel::Kmeans => (50_000, KMEANS_IMAGE_SIDE * KMEANS_IMAGE_SIDE),
            Kernel::Sobel => (SOBEL_WINDOW_COLS * SOBEL_TRAIN_ROWS, SOBEL_WINDOW_COLS * SOBEL_TEST_ROWS),
        };
        Self { train, test }
    }
}

const KMEANS_IMAGE_SIDE: usize = 220;
const KMEANS_CENTROIDS: usize = 6;
const SOBEL_WINDOW_COLS: usize = 107;
const SOBEL_TRAIN_ROWS: usize = 175;
const SOBEL_TEST_ROWS: usize = 168;

/// Inputs and reference outputs for one kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchDataset {
    pub kernel: Kernel,
    pub seed: u64,
    pub train: Dataset,
    pub test: Dataset,
    /// Generated rows removed because an output was NaN.
    pub dropped_train: usize,
    pub dropped_test: usize,
}

impl BenchDataset {
    /// Rows generated before NaN removal.
    pub fn generated(&self) -> BenchSizes {
        BenchSizes {
            train: self.train.rows() + self.dropped_train,
            test: self.test.rows() + self.dropped_test,
        }
    }

    /// The dataset in the corpus record schema: train rows first, then test.
    pub fn to_record(&self) -> ProgramRecord {
        let k = self.kernel;
        let mut io = Vec::with_capacity(self.train.rows() + self.test.rows());
        for d in [&self.train, &self.test] {
            for r in 0..d.rows() {
                io.push((d.row(r).0.to_vec(), d.targets[r]));
            }
        }
        let source = k.source().to_string();
        ProgramRecord {
            id: format!("bench:{}", k.name()),
            name: k.name().to_string(),
            provenance: "benchkit".into(),
            return_type: "float".into(),
            param_types: vec!["float".into(); k.arity()],
            tokens: tokenize(&source),
            source,
            arity: k.arity(),
            io,
            split_seed: self.seed,
            train_rows: self.train.rows(),
            audit: vec![format!("dropped {} train and {} test rows with NaN outputs", self.dropped_train, self.dropped_test)],
        }
    }
}

fn row_key(row: &[f64]) -> Vec<u64> {
    row.iter().map(|v| v.to_bits()).collect()
}

fn uniform_rows(rng: &mut Rng, n: usize, ranges: &[(f64, f64)], exclude: Option<&HashSet<Vec<u64>>>) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(n);
    while rows.len() < n {
        let row: Vec<f64> = ranges.iter().map(|&(lo, hi)| rng.uniform_range(lo, hi)).collect();
        if exclude.is_some_and(|s| s.contains(&row_key(&row))) {
            continue;
        }
        rows.push(row);
    }
    rows
}

/// Evaluates and drops rows where either precision yields NaN.
fn labelled(kernel: Kernel, rows: Vec<Vec<f64>>) -> Result<(Dataset, usize), BenchError> {
    let width = kernel.arity();
    let mut inputs = Vec::with_capacity(rows.len() * width);
    let mut targets = Vec::with_capacity(rows.len());
    let mut dropped = 0;
    for row in rows {
        let y = kernel.eval_f32(&row)?;
        if y.is_nan() || kernel.eval_f64(&row)?.is_nan() {
            dropped += 1;
            continue;
        }
        inputs.extend_from_slice(&row);
        targets.push(y);
    }
    Ok((Dataset::new(width, 1, inputs, targets), dropped))
}

fn gray_windows(img: &Image, count: usize) -> Vec<Vec<f64>> {
    let luma = img.luma();
    let (w, h) = (img.width(), img.height());
    let mut rows = Vec::with_capacity(count);
    'outer: for y in 0..h.saturating_sub(2) {
        for x in 0..w.saturating_sub(2) {
            if rows.len() == count {
                break 'outer;
            }
            let mut win = Vec::with_capacity(9);
            for dy in 0..3 {
                for dx in 0..3 {
                    win.push(luma[(y + dy) * w + x + dx] / 255.0);
                }
            }
            rows.push(win);
        }
    }
    rows
}

fn sobel_image(count: usize, seed: u64) -> Image {
    let rows = count.div_ceil(SOBEL_WINDOW_COLS).max(1);
    Image::synthetic(SOBEL_WINDOW_COLS + 2, rows + 2, seed)
}

/// Train and test data for `kernel` at the reference sizes.
pub fn gen_inputs(kernel: Kernel, seed: u64) -> Result<BenchDataset, BenchError> {
    gen_inputs_sized(kernel, seed, BenchSizes::reference(kernel))
}

/// Train and test data for `kernel` with explicit sizes.
pub fn gen_inputs_sized(kernel: Kernel, seed: u64, sizes: BenchSizes) -> Result<BenchDataset, BenchError> {
    // Kernels sharing a program (fft0/fft1, invk2j0/invk2j1) share inputs.
    let family = match kernel {
        Kernel::Fft0 | Kernel::Fft1 => 0,
        Kernel::Invk2j0 | Kernel::Invk2j1 => 1,
        Kernel::Kmeans => 2,
        Kernel::Sobel => 3,
    };
    let mut rng = Rng::derive(seed, &[0xbe7c, family]);
    let (train_rows, test_rows) = match kernel {
        Kernel::Fft0 | Kernel::Fft1 | Kernel::Invk2j0 | Kernel::Invk2j1 => {
            let ranges: &[(f64, f64)] = if kernel.arity() == 1 { &[(0.0, 0.5)] } else { &[(-0.5, 1.0), (0.0, 1.0)] };
            let train = uniform_rows(&mut rng, sizes.train, ranges, None);
            let seen: HashSet<Vec<u64>> = train.iter().map(|r| row_key(r)).collect();
            let test = uniform_rows(&mut rng, sizes.test, ranges, Some(&seen));
            (train, test)
        }
        Kernel::Kmeans => {
            let train = uniform_rows(&mut rng, sizes.train, &[(0.0, 1.0); 6], None);
            let side = (sizes.test as f64).sqrt().ceil().max(1.0) as usize;
            let img = Image::synthetic(side, sizes.test.div_ceil(side).max(1), derive_image_seed(seed, 0));
            let centroids: Vec<[f64; 3]> = (0..KMEANS_CENTROIDS).map(|_| [rng.uniform(), rng.uniform(), rng.uniform()]).collect();
            let test = img
                .pixels()
                .take(sizes.test)
                .map(|p| {
                    let c = centroids[rng.below(KMEANS_CENTROIDS)];
                    vec![p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0, c[0], c[1], c[2]]
                })
                .collect();
            (train, test)
        }
        Kernel::Sobel => {
            let train = gray_windows(&sobel_image(sizes.train, derive_image_seed(seed, 1)), sizes.train);
            let test = gray_windows(&sobel_image(sizes.test, derive_image_seed(seed, 2)), sizes.test);
            (train, test)
        }
    };
    let (train, dropped_train) = labelled(kernel, train_rows)?;
    let (test, dropped_test) = labelled(kernel, test_rows)?;
    if dropped_train + dropped_test > 0 {
        let total = sizes.train + sizes.test;
        log::info!(
            "{kernel}: dropped {} of {total} rows with NaN outputs ({:.2}%)",
            dropped_train + dropped_test,
            100.0 * (dropped_train + dropped_test) as f64 / total as f64
        );
    }
    Ok(BenchDataset {
        kernel,
        seed,
        train,
        test,
        dropped_train,
        dropped_test,
    })
}

fn derive_image_seed(seed: u64, which: u64) -> u64 {
    crate::rng::derive_seed(seed, &[0x17a9e, which])
}

/// Mean squared difference between the single- and double-precision
/// versions of `kernel` over the rows of `data`. Rows where either version
/// is NaN are skipped.
pub fn downcast_mse(kernel: Kernel, data: &Dataset) -> Result<f64, BenchError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in 0..data.rows() {
        let row = &data.row(r).0[..kernel.arity()];
        let (a, b) = (kernel.eval_f32(row)?, kernel.eval_f64(row)?);
        if a.is_nan() || b.is_nan() {
            continue;
        }
        sum += (a - b) * (a - b);
        n += 1;
    }
    if n == 0 {
        return Err(BenchError::Empty);
    }
    Ok(sum / n as f64)
}
