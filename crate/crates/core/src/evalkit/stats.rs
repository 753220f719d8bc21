use serde::{Deserialize, Serialize};

use super::EvalError;

/// `exp(mean(ln r))`.
pub fn geomean(ratios: &[f64]) -> Result<f64, EvalError> {
    if ratios.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(&bad) = ratios.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(EvalError::NonPositive(bad));
    }
    let mean = ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
    Ok(mean.exp())
}

/// Linearly interpolated `p`-th percentile (0..=100) of sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64 / 100.0;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Smallest integer percentile whose value exceeds 1, or 100 when none does.
pub fn mpi(ratios: &[f64]) -> Result<u32, EvalError> {
    if ratios.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((0..=100).find(|&p| percentile(&sorted, p as f64) > 1.0).unwrap_or(100))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileSummary {
    pub p0: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p100: f64,
    pub mpi: u32,
}

pub fn percentile_summary(ratios: &[f64]) -> Result<PercentileSummary, EvalError> {
    if ratios.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut s = ratios.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(PercentileSummary {
        p0: percentile(&s, 0.0),
        p25: percentile(&s, 25.0),
        p50: percentile(&s, 50.0),
        p75: percentile(&s, 75.0),
        p100: percentile(&s, 100.0),
        mpi: mpi(ratios)?,
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geomean_examples() {
        assert!((geomean(&[2.0, 8.0]).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(geomean(&[1.0; 5]).unwrap(), 1.0);
        assert!((geomean(&[3.7]).unwrap() - 3.7).abs() < 1e-15);
        assert!(geomean(&[]).is_err());
        assert!(geomean(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn mpi_examples() {
        assert_eq!(mpi(&[0.5, 0.9, 1.1, 2.0]).unwrap(), 51);
        assert_eq!(mpi(&[1.5, 2.0]).unwrap(), 0);
        assert_eq!(mpi(&[0.5, 0.7]).unwrap(), 100);
        assert!(mpi(&[]).is_err());
    }

    #[test]
    fn percentile_endpoints() {
        let s = [1.0, 2.0, 4.0];
        assert_eq!(percentile(&s, 0.0), 1.0);
        assert_eq!(percentile(&s, 50.0), 2.0);
        assert_eq!(percentile(&s, 75.0), 3.0);
        assert_eq!(percentile(&s, 100.0), 4.0);
    }
}
