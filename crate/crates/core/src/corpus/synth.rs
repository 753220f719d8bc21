use std::collections::HashSet;
use std::str::FromStr;

use super::CorpusError;
use crate::rng::Rng;

/// Families of generated single-input programs. Coefficients are two-decimal
/// literals in [-1, 1], so every output on [-1, 1] stays below 3 in
/// magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthFamily {
    Affine,
    Quadratic,
    TrigMix,
}

impl SynthFamily {
    pub fn name(self) -> &'static str {
        match self {
            SynthFamily::Affine => "affine",
            SynthFamily::Quadratic => "quadratic",
            SynthFamily::TrigMix => "trig-mix",
        }
    }

    fn coefficients(self) -> usize {
        match self {
            SynthFamily::Affine | SynthFamily::TrigMix => 2,
            SynthFamily::Quadratic => 3,
        }
    }

    /// Source text for the given coefficients.
    pub fn render(self, c: &[f64]) -> String {
        let lit = |v: f64| format!("{}f", coefficient(v));
        match self {
            SynthFamily::Affine => format!("float f(float x){{return {}*x + {};}}", lit(c[0]), lit(c[1])),
            SynthFamily::Quadratic => {
                format!("float f(float x){{return {}*x*x + {}*x + {};}}", lit(c[0]), lit(c[1]), lit(c[2]))
            }
            SynthFamily::TrigMix => format!("float f(float x){{return {}*sinf(x) + {}*cosf(x);}}", lit(c[0]), lit(c[1])),
        }
    }
}

impl FromStr for SynthFamily {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "affine" => Ok(SynthFamily::Affine),
            "quadratic" => Ok(SynthFamily::Quadratic),
            "trig-mix" | "trig" => Ok(SynthFamily::TrigMix),
            other => Err(CorpusError::Synth(format!("unknown family {other:?}"))),
        }
    }
}

/// Two-decimal rendering that never prints `-0.00`.
fn coefficient(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// A coefficient drawn uniformly from the 201 two-decimal values in [-1, 1].
fn draw(rng: &mut Rng) -> f64 {
    (rng.below(201) as f64 - 100.0) / 100.0
}

/// `count` distinct sources of `family`, with the coefficient values used.
pub fn synth_programs(family: SynthFamily, count: usize, seed: u64) -> Result<Vec<(String, Vec<f64>)>, CorpusError> {
    if count == 0 {
        return Err(CorpusError::Synth("count must be at least 1".into()));
    }
    let mut rng = Rng::derive(seed, &[0x5e7, family.coefficients() as u64]);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > count.saturating_mul(1000).max(10_000) {
            return Err(CorpusError::Synth(format!("could not draw {count} distinct {} programs", family.name())));
        }
        let c: Vec<f64> = (0..family.coefficients()).map(|_| draw(&mut rng)).collect();
        let src = family.render(&c);
        if seen.insert(src.clone()) {
            out.push((src, c));
        }
    }
    Ok(out)
}

/// `count` distinct sources of `family`.
pub fn synth_corpus(family: SynthFamily, count: usize, seed: u64) -> Result<Vec<String>, CorpusError> {
    Ok(synth_programs(family, count, seed)?.into_iter().map(|(s, _)| s).collect())
}
