//! In-memory program records that skip the C toolchain.

use nsc_core::corpus::ProgramRecord;
use nsc_core::hypernet::tokenize;
use nsc_core::rng::Rng;

/// A record for `source` whose outputs come from `f` on `rows` uniform
/// inputs in [-1, 1], split 50/50.
pub fn record_from(id: &str, source: &str, arity: usize, rows: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> ProgramRecord {
    let mut rng = Rng::new(seed);
    let io: Vec<(Vec<f64>, f64)> = (0..rows)
        .map(|_| {
            let x: Vec<f64> = (0..arity).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let y = f(&x);
            (x, y)
        })
        .collect();
    ProgramRecord {
        id: id.to_string(),
        name: "f".into(),
        provenance: format!("{id}.c"),
        return_type: "float".into(),
        param_types: vec!["float".into(); arity],
        source: source.to_string(),
        tokens: tokenize(source),
        arity,
        io,
        split_seed: seed,
        train_rows: rows / 2,
        audit: vec![],
    }
}

pub fn affine(id: usize, a: f64, b: f64, rows: usize) -> ProgramRecord {
    let src = format!("float f(float x){{return {a:.2}f*x + {b:.2}f;}}");
    record_from(&format!("affine-{id}"), &src, 1, rows, id as u64 + 1000, move |x| a * x[0] + b)
}

/// Affine records with coefficients on a 0.01 grid in [-1, 1].
pub fn affine_family(count: usize, rows: usize, seed: u64) -> Vec<ProgramRecord> {
    let mut rng = Rng::new(seed);
    (0..count)
        .map(|i| {
            let a = (rng.uniform_range(-100.0, 100.0).round()) / 100.0;
            let b = (rng.uniform_range(-100.0, 100.0).round()) / 100.0;
            affine(i, a, b, rows)
        })
        .collect()
}
