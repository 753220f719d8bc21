use super::extract::CandidateFunction;
use super::text::non_empty_lines;

fn numeric(ty: &str) -> bool {
    ty == "float" || ty == "double"
}

/// Keeps functions whose return and parameter types are all plain `float`
/// or `double`.
pub fn filter_signature(f: &CandidateFunction) -> Result<(), String> {
    if f.return_type.contains('*') {
        return Err("pointer return type".into());
    }
    if f.return_type == "void" {
        return Err("void return type".into());
    }
    if !numeric(&f.return_type) {
        return Err(format!("non-numeric return type {}", f.return_type));
    }
    if f.variadic {
        return Err("variadic parameter list".into());
    }
    if f.params.is_empty() {
        return Err("no parameters".into());
    }
    for p in &f.params {
        if p.pointer {
            return Err("pointer parameter".into());
        }
        if !numeric(&p.ty) {
            return Err(format!("non-numeric parameter type {}", p.ty));
        }
    }
    Ok(())
}

/// Checks every output is finite with magnitude below `limit`.
pub fn filter_magnitude(outputs: &[f64], limit: f64) -> Result<(), String> {
    for (i, v) in outputs.iter().enumerate() {
        if v.is_nan() {
            return Err(format!("NaN output at row {i}"));
        }
        if v.abs() >= limit {
            return Err(format!("output {v} at row {i} reaches magnitude {limit}"));
        }
    }
    Ok(())
}

/// A near-duplicate predicate against one benchmark kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecontamRule {
    FftSin,
    FftCos,
    Invk2j0,
    Invk2j1,
    Kmeans,
    Sobel,
}

impl DecontamRule {
    pub const ALL: [DecontamRule; 6] = [
        DecontamRule::FftSin,
        DecontamRule::FftCos,
        DecontamRule::Invk2j0,
        DecontamRule::Invk2j1,
        DecontamRule::Kmeans,
        DecontamRule::Sobel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DecontamRule::FftSin => "fft-sin",
            DecontamRule::FftCos => "fft-cos",
            DecontamRule::Invk2j0 => "invk2j-0",
            DecontamRule::Invk2j1 => "invk2j-1",
            DecontamRule::Kmeans => "kmeans",
            DecontamRule::Sobel => "sobel",
        }
    }

    pub fn matches(self, source: &str, arity: usize) -> bool {
        let has = |s: &str| source.contains(s);
        let all = |xs: &[&str]| xs.iter().all(|s| has(s));
        let lines = non_empty_lines(source);
        let half = has(".5") || (has("/") && has("2"));
        match self {
            DecontamRule::FftSin => has("sin") && (has("3.14") || has("M_PI")) && lines <= 5 && arity == 1,
            DecontamRule::FftCos => has("cos") && (has("3.14") || has("M_PI")) && lines <= 5 && arity == 1,
            DecontamRule::Invk2j0 => all(&["asin", "acos", "sin", "cos"]) && half && lines <= 7 && arity == 2,
            DecontamRule::Invk2j1 => has("acos") && half && lines <= 6 && arity == 2,
            DecontamRule::Kmeans => all(&["sqrt", "*", "+", "-"]) && arity == 6,
            DecontamRule::Sobel => all(&["sqrt", "+", "*", "/"]) && arity == 9,
        }
    }
}

/// The first rule `source` matches.
pub fn contamination(source: &str, arity: usize) -> Option<DecontamRule> {
    DecontamRule::ALL.into_iter().find(|r| r.matches(source, arity))
}
