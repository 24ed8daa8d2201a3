//! Mission evaluation functions `F(n)`: a team's performance as a function of
//! its agent count. Valid evaluators are strictly increasing with diminishing
//! returns (discrete concavity), which is what makes pairwise transfers
//! uni-directional and the collaboration loop convergent.

use serde::{Deserialize, Serialize};

/// Errors raised by evaluator construction and queries.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("evaluator undefined at n = {0}")]
    OutOfDomain(u32),
    #[error("cannot compute the marginal cost of an empty team")]
    EmptyTeam,
    #[error("invalid evaluator parameters: {0}")]
    InvalidParams(String),
    #[error("table parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A team mission evaluation function.
///
/// Implementations must be immutable after construction: repeated queries
/// return bit-identical values, and shared references may be used from any
/// number of threads.
pub trait MissionEvaluator: Send + Sync {
    /// `F(n)`, or `EvalError::OutOfDomain` outside `[domain_min, domain_max]`.
    fn value(&self, n: u32) -> Result<f64, EvalError>;

    /// Smallest supported count (0 unless the evaluator starts higher).
    fn domain_min(&self) -> u32 {
        0
    }

    /// Largest supported count, if bounded.
    fn domain_max(&self) -> Option<u32> {
        None
    }
}

impl MissionEvaluator for std::sync::Arc<dyn MissionEvaluator> {
    fn value(&self, n: u32) -> Result<f64, EvalError> {
        self.as_ref().value(n)
    }
    fn domain_min(&self) -> u32 {
        self.as_ref().domain_min()
    }
    fn domain_max(&self) -> Option<u32> {
        self.as_ref().domain_max()
    }
}

/// Closed-form evaluator families, all satisfying the increasing/concave
/// requirements on their domains with `F(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticKind {
    /// `F(n) = sqrt(n)`
    Sqrt,
    /// `F(n) = ln(1 + n)`
    Log1p,
    /// `F(n) = 1 - exp(-n / tau)`
    SaturatingExp { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticEvaluator {
    kind: AnalyticKind,
    domain_max: Option<u32>,
}

/// Builds one of the closed-form evaluators, rejecting invalid parameters.
pub fn make_analytic(kind: AnalyticKind) -> Result<AnalyticEvaluator, EvalError> {
    let domain_max = match kind {
        AnalyticKind::Sqrt | AnalyticKind::Log1p => None,
        AnalyticKind::SaturatingExp { tau } => {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(EvalError::InvalidParams(format!(
                    "saturation rate tau must be positive and finite, got {tau}"
                )));
            }
            Some(saturating_exp_cap(tau))
        }
    };
    Ok(AnalyticEvaluator { kind, domain_max })
}

/// Largest n for which consecutive values of `1 - exp(-n/tau)` are still
/// separated by comfortably more than an ulp. Past this point saturation
/// makes stored values collide, so strict monotonicity (and the concavity
/// margin between consecutive increments) would be lost to rounding.
fn saturating_exp_cap(tau: f64) -> u32 {
    let step = -(-1.0 / tau).exp_m1(); // 1 - e^(-1/tau)
    let threshold = 2e-15 / step; // increment floor; also >= 2e-15
    let cap = tau * (step / threshold).ln();
    if cap.is_finite() && cap >= 1.0 {
        cap.min(u32::MAX as f64) as u32
    } else {
        1
    }
}

impl AnalyticEvaluator {
    pub fn kind(&self) -> AnalyticKind {
        self.kind
    }
}

impl MissionEvaluator for AnalyticEvaluator {
    fn value(&self, n: u32) -> Result<f64, EvalError> {
        if let Some(max) = self.domain_max {
            if n > max {
                return Err(EvalError::OutOfDomain(n));
            }
        }
        let x = f64::from(n);
        Ok(match self.kind {
            AnalyticKind::Sqrt => x.sqrt(),
            AnalyticKind::Log1p => x.ln_1p(),
            AnalyticKind::SaturatingExp { tau } => -(-x / tau).exp_m1(),
        })
    }

    fn domain_max(&self) -> Option<u32> {
        self.domain_max
    }
}

/// A finite table of `F(n)` values, immutable after construction.
///
/// This is the deterministic form a coverage-backed evaluator takes once
/// tabulated, and the only evaluator kind the text format serializes.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedEvaluator {
    first_n: u32,
    values: Vec<f64>,
    provenance: String,
}

impl TabulatedEvaluator {
    pub fn new(
        first_n: u32,
        values: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self, EvalError> {
        if values.is_empty() {
            return Err(EvalError::InvalidParams("empty value table".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(EvalError::InvalidParams(format!(
                "non-finite table entry {bad}"
            )));
        }
        if first_n.checked_add(values.len() as u32 - 1).is_none() {
            return Err(EvalError::InvalidParams("table range overflows".into()));
        }
        Ok(Self {
            first_n,
            values,
            provenance: provenance.into(),
        })
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn last_n(&self) -> u32 {
        self.first_n + self.values.len() as u32 - 1
    }

    /// Plain-text form: `#`-prefixed provenance lines, then one `n value`
    /// pair per line. Values carry 17 significant digits and round-trip
    /// exactly through [`TabulatedEvaluator::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in self.provenance.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{} {:.16e}\n", self.first_n + i as u32, v));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, EvalError> {
        let mut provenance = Vec::new();
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                provenance.push(comment.trim().to_string());
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let n = parts
                .next()
                .unwrap()
                .parse::<u32>()
                .map_err(|e| EvalError::Parse {
                    line,
                    message: format!("bad count: {e}"),
                })?;
            let v = parts
                .next()
                .ok_or(EvalError::Parse {
                    line,
                    message: "missing value".into(),
                })?
                .parse::<f64>()
                .map_err(|e| EvalError::Parse {
                    line,
                    message: format!("bad value: {e}"),
                })?;
            if parts.next().is_some() {
                return Err(EvalError::Parse {
                    line,
                    message: "trailing fields".into(),
                });
            }
            if let Some(&(prev, _)) = entries.last() {
                if n != prev + 1 {
                    return Err(EvalError::Parse {
                        line,
                        message: format!("counts must be consecutive, got {n} after {prev}"),
                    });
                }
            }
            entries.push((n, v));
        }
        let first_n = entries
            .first()
            .ok_or(EvalError::Parse {
                line: 0,
                message: "no table entries".into(),
            })?
            .0;
        TabulatedEvaluator::new(
            first_n,
            entries.into_iter().map(|(_, v)| v).collect(),
            provenance.join("\n"),
        )
    }
}

impl MissionEvaluator for TabulatedEvaluator {
    fn value(&self, n: u32) -> Result<f64, EvalError> {
        if n < self.first_n || n > self.last_n() {
            return Err(EvalError::OutOfDomain(n));
        }
        Ok(self.values[(n - self.first_n) as usize])
    }

    fn domain_min(&self) -> u32 {
        self.first_n
    }

    fn domain_max(&self) -> Option<u32> {
        Some(self.last_n())
    }
}

/// Which requirement a value table broke, and where.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NotIncreasing,
    NotConcave,
}

/// Outcome of an exhaustive increasing/concavity scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Report {
    pub checked_from: u32,
    pub checked_to: u32,
    pub increasing_ok: bool,
    pub concave_ok: bool,
    /// First violating `n` per kind. For concavity the reported `n` is the
    /// midpoint of the offending increment pair, i.e. the smallest n >= 2
    /// with `F(n+1) - F(n) > F(n) - F(n-1) + tol`.
    pub first_not_increasing: Option<u32>,
    pub first_not_concave: Option<u32>,
}

impl Assumption2Report {
    pub fn ok(&self) -> bool {
        self.increasing_ok && self.concave_ok
    }

    pub fn first_violation(&self) -> Option<(u32, ViolationKind)> {
        let inc = self
            .first_not_increasing
            .map(|n| (n, ViolationKind::NotIncreasing));
        let con = self.first_not_concave.map(|n| (n, ViolationKind::NotConcave));
        match (inc, con) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        }
    }
}

/// Exhaustively checks strict increase and discrete concavity over the
/// evaluator's domain up to `n_max` (clamped to `domain_max`).
///
/// The increase check covers every consecutive pair from `domain_min`; the
/// concavity check compares increments from n = 2 upward, allowing slack
/// `concavity_tol` (pass 0.0 for exact arithmetic, or a small tolerance for
/// tables produced by an iterative solver).
pub fn validate_assumption2(
    evaluator: &dyn MissionEvaluator,
    n_max: u32,
    concavity_tol: f64,
) -> Result<Assumption2Report, EvalError> {
    let lo = evaluator.domain_min();
    let hi = evaluator.domain_max().map_or(n_max, |m| m.min(n_max));
    if hi <= lo {
        return Err(EvalError::InvalidParams(format!(
            "nothing to validate: domain [{lo}, {hi}]"
        )));
    }
    let mut first_not_increasing = None;
    let mut first_not_concave = None;
    let mut prev = evaluator.value(lo)?;
    let mut prev_inc: Option<f64> = None;
    for n in lo + 1..=hi {
        let cur = evaluator.value(n)?;
        let inc = cur - prev;
        if inc <= 0.0 && first_not_increasing.is_none() {
            first_not_increasing = Some(n - 1);
        }
        if n >= 3 {
            if let Some(lower) = prev_inc {
                if inc > lower + concavity_tol && first_not_concave.is_none() {
                    first_not_concave = Some(n - 1);
                }
            }
        }
        // Increments entering the concavity comparison start at F(2)-F(1).
        prev_inc = if n >= 2 { Some(inc) } else { None };
        prev = cur;
    }
    Ok(Assumption2Report {
        checked_from: lo,
        checked_to: hi,
        increasing_ok: first_not_increasing.is_none(),
        concave_ok: first_not_concave.is_none(),
        first_not_increasing,
        first_not_concave,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_values() {
        let ev = make_analytic(AnalyticKind::Sqrt).unwrap();
        assert_eq!(ev.value(0).unwrap(), 0.0);
        assert_eq!(ev.value(4).unwrap(), 2.0);
    }

    #[test]
    fn log1p_at_zero() {
        let ev = make_analytic(AnalyticKind::Log1p).unwrap();
        assert_eq!(ev.value(0).unwrap(), 0.0);
    }

    #[test]
    fn saturating_exp_value() {
        let ev = make_analytic(AnalyticKind::SaturatingExp { tau: 2.0 }).unwrap();
        // 1 - e^(-1)
        assert_relative_eq!(ev.value(2).unwrap(), 0.6321205588285577, max_relative = 1e-15);
    }

    #[test]
    fn saturating_exp_rejects_bad_tau() {
        assert!(matches!(
            make_analytic(AnalyticKind::SaturatingExp { tau: 0.0 }),
            Err(EvalError::InvalidParams(_))
        ));
        assert!(matches!(
            make_analytic(AnalyticKind::SaturatingExp { tau: -1.0 }),
            Err(EvalError::InvalidParams(_))
        ));
    }

    #[test]
    fn saturating_exp_domain_is_capped() {
        let ev = make_analytic(AnalyticKind::SaturatingExp { tau: 2.0 }).unwrap();
        let cap = ev.domain_max().unwrap();
        assert!(cap > 10 && cap < 200, "cap {cap}");
        assert!(ev.value(cap).is_ok());
        assert_eq!(ev.value(cap + 1), Err(EvalError::OutOfDomain(cap + 1)));
        // Strictness still holds at the cap.
        assert!(ev.value(cap).unwrap() > ev.value(cap - 1).unwrap());
    }

    #[test]
    fn validate_sqrt_to_100() {
        let ev = make_analytic(AnalyticKind::Sqrt).unwrap();
        let report = validate_assumption2(&ev, 100, 0.0).unwrap();
        assert!(report.ok());
        assert_eq!(report.checked_to, 100);
    }

    #[test]
    fn validate_all_analytic_to_10000() {
        let evs = [
            make_analytic(AnalyticKind::Sqrt).unwrap(),
            make_analytic(AnalyticKind::Log1p).unwrap(),
            make_analytic(AnalyticKind::SaturatingExp { tau: 2.0 }).unwrap(),
            make_analytic(AnalyticKind::SaturatingExp { tau: 0.7 }).unwrap(),
            make_analytic(AnalyticKind::SaturatingExp { tau: 40.0 }).unwrap(),
        ];
        for ev in &evs {
            let report = validate_assumption2(ev, 10_000, 0.0).unwrap();
            assert!(report.ok(), "{:?}: {report:?}", ev.kind());
        }
    }

    #[test]
    fn validate_flags_square_table() {
        // F(n) = n^2 is increasing but convex; first bad increment pair is
        // centred at n = 2 (9 - 4 > 4 - 1).
        let table: Vec<f64> = (0..6).map(|n| (n * n) as f64).collect();
        let ev = TabulatedEvaluator::new(0, table, "square test").unwrap();
        let report = validate_assumption2(&ev, 5, 0.0).unwrap();
        assert!(report.increasing_ok);
        assert!(!report.concave_ok);
        assert_eq!(report.first_not_concave, Some(2));
        assert_eq!(
            report.first_violation(),
            Some((2, ViolationKind::NotConcave))
        );
    }

    #[test]
    fn validate_flags_non_increasing() {
        let ev = TabulatedEvaluator::new(1, vec![1.0, 2.0, 2.0, 2.5], "flat test").unwrap();
        let report = validate_assumption2(&ev, 10, 0.0).unwrap();
        assert!(!report.increasing_ok);
        assert_eq!(report.first_not_increasing, Some(2));
        assert_eq!(report.checked_to, 4);
    }

    #[test]
    fn tabulated_queries_and_domain() {
        let ev = TabulatedEvaluator::new(1, vec![-0.5, -0.3, -0.2], "t").unwrap();
        assert_eq!(ev.value(2).unwrap(), -0.3);
        assert_eq!(ev.value(0), Err(EvalError::OutOfDomain(0)));
        assert_eq!(ev.value(4), Err(EvalError::OutOfDomain(4)));
        assert_eq!(ev.domain_min(), 1);
        assert_eq!(ev.domain_max(), Some(3));
    }

    #[test]
    fn tabulated_text_round_trip_is_exact() {
        let values = vec![
            -0.744_944_380_751_653_4,
            -0.489_012_430_000_000_03,
            -1.0 / 3.0,
            f64::MIN_POSITIVE,
        ];
        let ev = TabulatedEvaluator::new(1, values.clone(), "line one\nline two").unwrap();
        let text = ev.to_text();
        let back = TabulatedEvaluator::from_text(&text).unwrap();
        assert_eq!(back.provenance(), "line one\nline two");
        for (n, v) in (1..).zip(&values) {
            assert_eq!(back.value(n).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn tabulated_text_rejects_gaps() {
        let err = TabulatedEvaluator::from_text("1 0.5\n3 0.7\n").unwrap_err();
        assert!(matches!(err, EvalError::Parse { line: 2, .. }), "{err}");
    }
}
