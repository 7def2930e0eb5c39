use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mlmc::{CostRegime, LinearFit, PassRecord, WeakConvergence};

use super::{CaseResult, OutputBundle};

/// Six significant digits; scientific notation below `1e-3` (and at `1e6` or above).
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let a = x.abs();
    if !(1e-3..1e6).contains(&a) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - a.log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

/// One line of the printed summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub case: String,
    pub epsilon: f64,
    pub histories: u64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub samples: Vec<u64>,
    pub max_w: Option<f64>,
    pub weak_pass: bool,
}

impl TableRow {
    pub fn from_case(case: &CaseResult) -> Self {
        let r = &case.report;
        Self {
            case: case.label.clone(),
            epsilon: case.epsilon,
            histories: case.histories,
            alpha: r.alpha.map(|f| f.slope),
            beta: r.beta.map(|f| f.slope),
            gamma: r.gamma.map(|f| f.slope),
            samples: r.samples.clone(),
            max_w: r.weak.as_ref().map(|w| w.max),
            weak_pass: r.weak.as_ref().is_some_and(|w| w.passed),
        }
    }

    pub fn header(levels: usize) -> String {
        let mut h = format!("{:>8} {:>8} {:>7} {:>6} {:>6} {:>6}", "case", "eps", "K", "alpha", "beta", "gamma");
        for l in 0..levels {
            let _ = write!(h, " {:>6}", format!("N_{l}"));
        }
        h.push_str("      max W");
        h
    }
}

impl fmt::Display for TableRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rate = |r: Option<f64>| r.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        write!(
            f,
            "{:>8} {:>8.1e} {:>7} {:>6} {:>6} {:>6}",
            self.case,
            self.epsilon,
            self.histories,
            rate(self.alpha),
            rate(self.beta),
            rate(self.gamma)
        )?;
        for n in &self.samples {
            write!(f, " {n:>6}")?;
        }
        match self.max_w {
            Some(w) => write!(f, "  {w:>9.1e}"),
            None => write!(f, "  {:>9}", "-"),
        }
    }
}

#[derive(Serialize)]
struct LevelDoc {
    level: usize,
    #[serde(rename = "N")]
    samples: u64,
    #[serde(rename = "mean_P")]
    mean_fine: f64,
    #[serde(rename = "var_P")]
    var_fine: f64,
    #[serde(rename = "mean_P_coarse")]
    mean_coarse: Option<f64>,
    #[serde(rename = "var_P_coarse")]
    var_coarse: Option<f64>,
    #[serde(rename = "mean_dP")]
    mean_delta: f64,
    #[serde(rename = "V")]
    var_delta: f64,
    kurtosis: f64,
    kurtosis_degenerate: bool,
    #[serde(rename = "C")]
    cost: f64,
}

#[derive(Serialize)]
struct Fits {
    alpha: Option<LinearFit>,
    beta: Option<LinearFit>,
    gamma: Option<LinearFit>,
}

#[derive(Serialize)]
struct CaseDoc<'a> {
    case: &'a str,
    label: &'a str,
    epsilon: f64,
    histories: u64,
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    #[serde(rename = "N")]
    samples: &'a [u64],
    /// `N` counts every realization drawn, the initial ones included.
    #[serde(rename = "N_counts")]
    samples_note: &'static str,
    #[serde(rename = "maxW")]
    max_w: Option<f64>,
    weak_pass: bool,
    #[serde(rename = "CC")]
    consistency: &'a [f64],
    consistency_pass: bool,
    combined_estimate: f64,
    total_cost: f64,
    optimal_cost: f64,
    regime: Option<CostRegime>,
    fits: Fits,
    weak: Option<&'a WeakConvergence>,
    levels: Vec<LevelDoc>,
    passes: &'a [PassRecord],
    void_cells: u64,
    boundary_fallbacks: u64,
    max_balance_residual: f64,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    cases: Vec<CaseDoc<'a>>,
}

fn case_doc(case: &CaseResult) -> CaseDoc<'_> {
    let r = &case.report;
    CaseDoc {
        case: &case.case_id,
        label: &case.label,
        epsilon: case.epsilon,
        histories: case.histories,
        alpha: r.alpha.map(|f| f.slope),
        beta: r.beta.map(|f| f.slope),
        gamma: r.gamma.map(|f| f.slope),
        samples: &r.samples,
        samples_note: "total",
        max_w: r.weak.as_ref().map(|w| w.max),
        weak_pass: r.weak.as_ref().is_some_and(|w| w.passed),
        consistency: &r.consistency,
        consistency_pass: r.consistency_passed(),
        combined_estimate: r.combined_estimate,
        total_cost: r.total_cost,
        optimal_cost: r.optimal_cost,
        regime: r.regime,
        fits: Fits {
            alpha: r.alpha,
            beta: r.beta,
            gamma: r.gamma,
        },
        weak: r.weak.as_ref(),
        levels: r
            .levels
            .iter()
            .map(|s| LevelDoc {
                level: s.level,
                samples: s.samples,
                mean_fine: s.mean_fine,
                var_fine: s.var_fine,
                mean_coarse: s.mean_coarse,
                var_coarse: s.var_coarse,
                mean_delta: s.mean_delta,
                var_delta: s.var_delta,
                kurtosis: s.kurtosis,
                kurtosis_degenerate: s.kurtosis_degenerate,
                cost: s.cost,
            })
            .collect(),
        passes: &r.passes,
        void_cells: r.void_cells,
        boundary_fallbacks: r.boundary_fallbacks,
        max_balance_residual: r.max_balance_residual,
    }
}

pub(crate) fn report_json(bundle: &OutputBundle) -> String {
    let doc = ReportDoc {
        cases: bundle.cases.iter().map(case_doc).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report is serializable");
    s.push('\n');
    s
}

pub(crate) fn levels_csv(bundle: &OutputBundle) -> String {
    let mut out = String::from("case,level,N,mean_P,mean_dP,V,kurtosis,C,CC\n");
    for case in &bundle.cases {
        let r = &case.report;
        for s in &r.levels {
            let cc = s.level.checked_sub(1).map(|i| r.consistency[i]);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                case.case_id,
                s.level,
                s.samples,
                format_number(s.mean_fine),
                format_number(s.mean_delta),
                format_number(s.var_delta),
                format_number(s.kurtosis),
                format_number(s.cost),
                format_opt(cc)
            );
        }
    }
    out
}

fn log2_abs(x: f64) -> String {
    if x == 0.0 {
        "nan".into()
    } else {
        format_number(x.abs().log2())
    }
}

/// Whitespace-delimited blocks, two blank lines apart, for gnuplot's `index`.
pub(crate) fn plot_data(bundle: &OutputBundle) -> String {
    let mut out = String::new();
    let mut block = |title: &str, columns: &str, rows: Vec<String>| {
        if !out.is_empty() {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {title}");
        let _ = writeln!(out, "# {columns}");
        for row in rows {
            out.push_str(&row);
            out.push('\n');
        }
    };
    for case in &bundle.cases {
        let r = &case.report;
        let id = &case.case_id;
        block(
            &format!("{id} mean"),
            "level log2|mean_P| log2|mean_dP|",
            r.levels
                .iter()
                .map(|s| format!("{} {} {}", s.level, log2_abs(s.mean_fine), log2_abs(s.mean_delta)))
                .collect(),
        );
        block(
            &format!("{id} variance"),
            "level log2_var_P log2_var_dP",
            r.levels
                .iter()
                .map(|s| format!("{} {} {}", s.level, log2_abs(s.var_fine), log2_abs(s.var_delta)))
                .collect(),
        );
        block(
            &format!("{id} cost"),
            "level log2_C",
            r.levels.iter().map(|s| format!("{} {}", s.level, log2_abs(s.cost))).collect(),
        );
        block(
            &format!("{id} realizations"),
            "level N log2_N",
            r.levels
                .iter()
                .map(|s| format!("{} {} {}", s.level, s.samples, log2_abs(s.samples as f64)))
                .collect(),
        );
        block(
            &format!("{id} kurtosis"),
            "level kurtosis",
            r.levels
                .iter()
                .map(|s| format!("{} {}", s.level, format_number(s.kurtosis)))
                .collect(),
        );
        block(
            &format!("{id} consistency"),
            "level CC",
            r.consistency
                .iter()
                .enumerate()
                .map(|(i, cc)| format!("{} {}", i + 1, format_number(*cc)))
                .collect(),
        );
    }
    out
}

fn samples_csv(bundle: &OutputBundle) -> Option<String> {
    let records = bundle.samples.as_ref()?;
    let mut out = String::from("case,level,replicate,P_fine,P_coarse,dP,cost\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{},{:e},{:e}",
            r.case_id,
            r.level,
            r.replicate,
            r.sample.fine,
            r.sample.coarse.map(|c| format!("{c:e}")).unwrap_or_default(),
            r.sample.delta,
            r.sample.cost
        );
    }
    Some(out)
}

/// Writes `levels.csv`, `report.json`, `plotdata.csv` and, when sample logging
/// is on, `samples.csv` into `directory`.
pub fn emit_outputs(bundle: &OutputBundle, directory: &Path) -> Result<()> {
    fs::create_dir_all(directory).map_err(|e| Error::io(directory, e))?;
    let mut files = vec![
        ("levels.csv", levels_csv(bundle)),
        ("report.json", report_json(bundle)),
        ("plotdata.csv", plot_data(bundle)),
    ];
    if let Some(samples) = samples_csv(bundle) {
        files.push(("samples.csv", samples));
    }
    for (name, contents) in files {
        let path = directory.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0), "1.00000");
        assert_eq!(format_number(1.5e-4), "1.50000e-4");
        assert_eq!(format_number(-3.6e-4), "-3.60000e-4");
        assert_eq!(format_number(123.456789), "123.457");
        assert_eq!(format_number(0.00123456789), "0.00123457");
        assert_eq!(format_number(2.5e7), "2.50000e7");
    }
}
