use std::time::Duration;

use nsc_core::benchkit::{ulp_distance_f32, ulp_distance_f64, Kernel};
use nsc_core::corpus::{compile, extract_functions, InputBank};

/// Largest ulp gap between the compiled C kernel and the in-process one over
/// every row of `bank`.
pub fn worst_ulps(bank: &InputBank, k: Kernel, f32_precision: bool) -> u64 {
    let source = if f32_precision { k.source().to_string() } else { k.source_double() };
    let (funcs, _) = extract_functions(&source, "bench.c").unwrap();
    assert_eq!(funcs.len(), 1, "{k}");
    let compiled = compile(&funcs[0], bank, "cc", Duration::from_secs(8)).unwrap();
    let out = compiled.run(1, Duration::from_secs(8), 1 << 20).unwrap();
    out.iter()
        .enumerate()
        .map(|(r, &o)| {
            let x = &bank.row(r)[..k.arity()];
            if f32_precision {
                ulp_distance_f32(o as f32, k.eval_f32(x).unwrap() as f32)
            } else {
                ulp_distance_f64(o, k.eval_f64(x).unwrap())
            }
        })
        .max()
        .unwrap_or(0)
}

/// Closed-form kernel values at fixed points.
pub fn identity_cases() -> [(Kernel, Vec<f64>, f64); 5] {
    [
        (Kernel::Fft0, vec![0.0], 0.0),
        (Kernel::Fft1, vec![0.0], 1.0),
        (Kernel::Invk2j1, vec![0.5, 0.5], std::f64::consts::FRAC_PI_2),
        (Kernel::Kmeans, vec![0.0; 6], 0.0),
        (Kernel::Sobel, vec![0.0; 9], 0.0),
    ]
}
