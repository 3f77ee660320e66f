//! Uniform run reports for the verification suites and the batch CLI:
//! per-case outcomes tagged with opaque anchor identifiers, JSON rendering
//! with fixed 17-significant-digit number formatting, exact values carried
//! as numerator/denominator strings, and pre-rendered rows for CSV export.
//!
//! Reports are deterministic by construction — every number is formatted
//! through [`real17`], map-free structs serialize in declaration order, and
//! the only run-dependent fields are the per-case runtimes, which
//! [`SuiteReport::with_zeroed_runtimes`] strips for byte-level comparisons.

use num_complex::Complex64;
use serde::Serialize;

use crate::exactnum::Rational;

/// Fixed 17-significant-digit scientific rendering. Every distinct f64 maps
/// to a distinct string (17 digits round-trip the 53-bit significand), and
/// the output never depends on shortest-representation heuristics.
pub fn real17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// A computed or reference value in a report cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ReportValue {
    Count(u64),
    Bool(bool),
    Real { real: String },
    Complex { re: String, im: String },
    Exact { num: String, den: String },
    Text(String),
}

impl ReportValue {
    pub fn real(x: f64) -> Self {
        ReportValue::Real { real: real17(x) }
    }

    pub fn complex(z: Complex64) -> Self {
        ReportValue::Complex { re: real17(z.re), im: real17(z.im) }
    }

    pub fn exact(x: &Rational) -> Self {
        ReportValue::Exact { num: x.numer().to_string(), den: x.denom().to_string() }
    }

    pub fn text(s: impl Into<String>) -> Self {
        ReportValue::Text(s.into())
    }

    /// Single-cell rendering for tabular output.
    pub fn render(&self) -> String {
        match self {
            ReportValue::Count(k) => k.to_string(),
            ReportValue::Bool(b) => b.to_string(),
            ReportValue::Real { real } => real.clone(),
            ReportValue::Complex { re, im } => format!("{re} {im}i"),
            ReportValue::Exact { num, den } => format!("{num}/{den}"),
            ReportValue::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    Pass,
    Fail,
    Skip,
}

impl CaseStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseStatus::Pass => "pass",
            CaseStatus::Fail => "fail",
            CaseStatus::Skip => "skip",
        }
    }
}

/// One executed check: an id, the opaque anchor identifier it certifies,
/// and the computed/reference pair with the absolute error where the check
/// is numeric.
#[derive(Clone, Debug, Serialize)]
pub struct CaseOutcome {
    pub id: String,
    pub anchor: String,
    pub status: CaseStatus,
    pub computed: Option<ReportValue>,
    pub reference: Option<ReportValue>,
    /// |computed − reference| in 17-digit rendering, when numeric.
    pub abs_error: Option<String>,
    pub runtime_ms: u64,
    /// Failure message or skip reason.
    pub detail: Option<String>,
}

/// The report of one suite run (or of the concatenated `all` run).
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    /// Snapshot of the configuration the run used.
    pub config: serde_json::Value,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub cases: Vec<CaseOutcome>,
}

pub const CSV_HEADER: [&str; 8] =
    ["suite", "case", "anchor", "status", "computed", "reference", "abs_error", "runtime_ms"];

impl SuiteReport {
    pub fn from_cases(
        suite: impl Into<String>,
        config: serde_json::Value,
        cases: Vec<CaseOutcome>,
    ) -> Self {
        let passed = cases.iter().filter(|c| c.status == CaseStatus::Pass).count();
        let failed = cases.iter().filter(|c| c.status == CaseStatus::Fail).count();
        let skipped = cases.iter().filter(|c| c.status == CaseStatus::Skip).count();
        SuiteReport { suite: suite.into(), config, passed, failed, skipped, cases }
    }

    /// Process exit status for this report: nonzero iff any case failed.
    pub fn exit_code(&self) -> i32 {
        if self.failed > 0 {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serialization");
        out.push('\n');
        out
    }

    /// Tabular rows matching [`CSV_HEADER`], one per case.
    pub fn csv_rows(&self) -> Vec<[String; 8]> {
        self.cases
            .iter()
            .map(|c| {
                [
                    self.suite.clone(),
                    c.id.clone(),
                    c.anchor.clone(),
                    c.status.as_str().to_string(),
                    c.computed.as_ref().map(ReportValue::render).unwrap_or_default(),
                    c.reference.as_ref().map(ReportValue::render).unwrap_or_default(),
                    c.abs_error.clone().unwrap_or_default(),
                    c.runtime_ms.to_string(),
                ]
            })
            .collect()
    }

    /// Copy with all runtimes set to zero — the determinism contract is
    /// byte-identical output up to the runtime fields.
    pub fn with_zeroed_runtimes(&self) -> Self {
        let mut copy = self.clone();
        for case in &mut copy.cases {
            case.runtime_ms = 0;
        }
        copy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::rat;

    fn sample_case(id: &str, status: CaseStatus, runtime_ms: u64) -> CaseOutcome {
        CaseOutcome {
            id: id.to_string(),
            anchor: "SymF-f3".to_string(),
            status,
            computed: Some(ReportValue::real(1.75)),
            reference: Some(ReportValue::exact(&rat(7, 4))),
            abs_error: Some(real17(0.0)),
            runtime_ms,
            detail: None,
        }
    }

    #[test]
    fn seventeen_digit_rendering_is_fixed_width_and_faithful() {
        assert_eq!(real17(1.75), "1.7500000000000000e0");
        assert_eq!(real17(-0.125), "-1.2500000000000000e-1");
        assert_eq!(real17(3.0e-300), "3.0000000000000000e-300");
        // 17 significant digits round-trip the bit pattern.
        for x in [std::f64::consts::PI, 1.0 / 3.0, 6.02214076e23, f64::MIN_POSITIVE] {
            let back: f64 = real17(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn report_values_render_and_serialize() {
        assert_eq!(ReportValue::Count(7).render(), "7");
        assert_eq!(ReportValue::Bool(true).render(), "true");
        assert_eq!(ReportValue::exact(&rat(-7, 4)).render(), "-7/4");
        assert_eq!(
            ReportValue::complex(num_complex::Complex64::new(0.5, -2.0)).render(),
            "5.0000000000000000e-1 -2.0000000000000000e0i"
        );
        let json = serde_json::to_string(&ReportValue::exact(&rat(22, 7))).unwrap();
        assert_eq!(json, r#"{"num":"22","den":"7"}"#);
        let json = serde_json::to_string(&ReportValue::real(0.5)).unwrap();
        assert_eq!(json, r#"{"real":"5.0000000000000000e-1"}"#);
    }

    #[test]
    fn suite_report_tallies_and_exit_codes() {
        let passing = SuiteReport::from_cases(
            "symfun",
            serde_json::json!({"seed": 7}),
            vec![sample_case("a", CaseStatus::Pass, 3), sample_case("b", CaseStatus::Skip, 0)],
        );
        assert_eq!((passing.passed, passing.failed, passing.skipped), (1, 0, 1));
        assert_eq!(passing.exit_code(), 0);

        let failing = SuiteReport::from_cases(
            "symfun",
            serde_json::json!({}),
            vec![sample_case("a", CaseStatus::Pass, 3), sample_case("b", CaseStatus::Fail, 9)],
        );
        assert_eq!(failing.exit_code(), 1);

        let rows = failing.csv_rows();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1][0], "symfun");
        assert_eq!(rows[1][3], "fail");
        assert_eq!(rows[1][4], "1.7500000000000000e0");
        assert_eq!(rows[1][5], "7/4");
        assert_eq!(rows[1][7], "9");
    }

    #[test]
    fn zeroed_runtimes_make_reports_comparable() {
        let a = SuiteReport::from_cases(
            "coset",
            serde_json::json!({"seed": 7}),
            vec![sample_case("a", CaseStatus::Pass, 3)],
        );
        let b = SuiteReport::from_cases(
            "coset",
            serde_json::json!({"seed": 7}),
            vec![sample_case("a", CaseStatus::Pass, 8)],
        );
        assert_ne!(a.to_json(), b.to_json());
        assert_eq!(a.with_zeroed_runtimes().to_json(), b.with_zeroed_runtimes().to_json());
        // JSON parses back with the declared shape.
        let value: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(value["suite"], "coset");
        assert_eq!(value["cases"][0]["anchor"], "SymF-f3");
        assert_eq!(value["cases"][0]["status"], "pass");
        assert_eq!(value["cases"][0]["reference"]["num"], "7");
    }
}
