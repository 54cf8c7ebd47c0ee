//! CSV and JSONL rendering of run results.
//!
//! Every report is first flattened into a [`Table`]; both formats are then
//! written from the same cells, so column names and digits always agree.
//! Reals are printed with 9 significant digits in `%g` style.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use tseba_core::{AggregateStats, BayesBoundReport, BayesEstimate, BoundReport, Regime, ScanReport};

use crate::config::Format;

/// Significant digits of every real written to disk.
pub const SIG_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    /// Absent value: empty CSV field, JSON `null`.
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => fmt_num(*x),
            Cell::Num(_) | Cell::Empty => "null".into(),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => serde_json::Value::String(s.clone()).to_string(),
        }
    }
}

/// Formats `x` like C's `%.9g`, without trailing zeros.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rows with a fixed column order, plus an optional footer row with its own
/// names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub footer: Option<(Vec<String>, Vec<Cell>)>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), footer: None }
    }

    /// Header, rows, then the footer values (no footer header). The footer
    /// row is recognizable by its field count.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        if let Some((_, cells)) = &self.footer {
            w.write_record(cells.iter().map(Cell::csv)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    /// One object per row, footer last.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |names: &[String], cells: &[Cell]| {
            let fields: Vec<String> = names
                .iter()
                .zip(cells)
                .map(|(n, c)| format!("{}:{}", serde_json::Value::String(n.clone()), c.json()))
                .collect();
            out.push('{');
            out.push_str(&fields.join(","));
            out.push_str("}\n");
        };
        for row in &self.rows {
            line(&self.columns, row);
        }
        if let Some((names, cells)) = &self.footer {
            line(names, cells);
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Jsonl => self.to_jsonl(),
        }
    }
}

/// One `kl-check` evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    pub arm: usize,
    pub mean: f64,
    pub eps: f64,
    pub kl: f64,
    /// `kl / eps^2`
    pub ratio: f64,
    /// `I(mean) / 2`
    pub limit: f64,
    pub rel_err: f64,
    /// `rel_err <= 5 eps`
    pub within_tol: bool,
}

/// Everything a command can produce.
#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Simulate { policy: String, stats: AggregateStats },
    Scan(ScanReport),
    Bounds { arms: usize, budget: u64, split: f64, report: BoundReport },
    Bayes { budget: u64, reps_per_draw: u64, estimate: BayesEstimate, constants: BayesBoundReport },
    KlCheck(Vec<KlRow>),
}

pub const SCAN_COLUMNS: [&str; 5] = ["gap", "scaled_regret", "regret_se", "misid_rate", "early_stop_rate"];
pub const SCAN_FOOTER: [&str; 3] = ["sup", "bound_constant", "within_bound"];

fn opt(x: Option<f64>) -> Cell {
    x.map_or(Cell::Empty, Cell::Num)
}

impl Report {
    pub fn table(&self) -> Table {
        match self {
            Report::Simulate { policy, stats } => simulate_table(policy, stats),
            Report::Scan(scan) => {
                let mut t = Table::new(&SCAN_COLUMNS);
                for (gap, s) in &scan.grid {
                    t.rows.push(vec![
                        Cell::Num(*gap),
                        Cell::Num(s.scaled_regret),
                        Cell::Num(s.scaled_regret_se()),
                        Cell::Num(s.misid_rate),
                        Cell::Num(s.early_stop_rate),
                    ]);
                }
                t.footer = Some((
                    SCAN_FOOTER.iter().map(|c| c.to_string()).collect(),
                    vec![
                        Cell::Num(scan.sup_scaled_regret),
                        Cell::Num(scan.bound_constant),
                        Cell::Bool(scan.within_bound),
                    ],
                ));
                t
            }
            Report::Bounds { arms, budget, split, report } => {
                let mut t = Table::new(&[
                    "k",
                    "budget",
                    "r",
                    "regime",
                    "minimax_constant",
                    "worst_gap",
                    "side_condition_ok",
                ]);
                let regime = match report.regime {
                    Regime::TwoArm => "two-arm",
                    Regime::MultiArm => "multi-arm",
                };
                t.rows.push(vec![
                    Cell::Int(*arms as u64),
                    Cell::Int(*budget),
                    Cell::Num(*split),
                    Cell::Text(regime.into()),
                    Cell::Num(report.minimax_constant),
                    Cell::Num(report.worst_gap),
                    Cell::Bool(report.side_condition_ok),
                ]);
                t
            }
            Report::Bayes { budget, reps_per_draw, estimate, constants } => {
                let mut t = Table::new(&[
                    "budget",
                    "prior_draws",
                    "reps_per_draw",
                    "bayes_regret",
                    "bayes_regret_se",
                    "lower_constant",
                    "upper_constant",
                    "constant_mc_sigma",
                ]);
                t.rows.push(vec![
                    Cell::Int(*budget),
                    Cell::Int(estimate.draws),
                    Cell::Int(*reps_per_draw),
                    Cell::Num(estimate.mean),
                    Cell::Num(estimate.se),
                    Cell::Num(constants.lower_constant),
                    Cell::Num(constants.upper_constant),
                    Cell::Num(constants.mc_sigma),
                ]);
                t
            }
            Report::KlCheck(rows) => {
                let mut t = Table::new(&["arm", "mean", "eps", "kl", "ratio", "limit", "rel_err", "within_tol"]);
                for r in rows {
                    t.rows.push(vec![
                        Cell::Int(r.arm as u64),
                        Cell::Num(r.mean),
                        Cell::Num(r.eps),
                        Cell::Num(r.kl),
                        Cell::Num(r.ratio),
                        Cell::Num(r.limit),
                        Cell::Num(r.rel_err),
                        Cell::Bool(r.within_tol),
                    ]);
                }
                t
            }
        }
    }
}

fn simulate_table(policy: &str, s: &AggregateStats) -> Table {
    let mut columns: Vec<String> = [
        "policy",
        "budget",
        "reps",
        "mean_regret",
        "regret_se",
        "misid_rate",
        "misid_se",
        "scaled_regret",
        "scaled_regret_se",
        "early_stop_rate",
        "mean_candidate_size",
        "coverage_rate",
        "best_in_candidates_rate",
    ]
    .iter()
    .map(|c| c.to_string())
    .collect();
    let mut row = vec![
        Cell::Text(policy.into()),
        Cell::Int(s.budget),
        Cell::Int(s.reps),
        Cell::Num(s.mean_regret),
        Cell::Num(s.regret_se),
        Cell::Num(s.misid_rate),
        Cell::Num(s.misid_se),
        Cell::Num(s.scaled_regret),
        Cell::Num(s.scaled_regret_se()),
        Cell::Num(s.early_stop_rate),
        Cell::Num(s.mean_candidate_size),
        opt(s.coverage_rate),
        opt(s.best_in_candidates_rate),
    ];
    for (a, c) in s.mean_counts.iter().enumerate() {
        columns.push(format!("mean_count_{a}"));
        row.push(Cell::Num(*c));
    }
    for (a, f) in s.choice_freq.iter().enumerate() {
        columns.push(format!("choice_freq_{a}"));
        row.push(Cell::Num(*f));
    }
    Table { columns, rows: vec![row], footer: None }
}

/// Writes `report` to `path`, or to stdout when `path` is `None`.
pub fn emit(report: &Report, format: Format, path: Option<&Path>) -> io::Result<()> {
    let text = report.table().render(format);
    match path {
        Some(p) => fs::write(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

/// Scan results read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScan {
    /// `[gap, scaled_regret, regret_se, misid_rate, early_stop_rate]`
    pub rows: Vec<[f64; 5]>,
    pub sup: f64,
    pub bound_constant: f64,
    pub within_bound: bool,
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn num(s: &str) -> io::Result<f64> {
    s.parse().map_err(|_| bad(format!("not a number: {s:?}")))
}

/// Reads every record of a CSV document (header included) as strings.
pub fn read_csv(text: &str) -> io::Result<Vec<Vec<String>>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes())
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()).map_err(io::Error::other))
        .collect()
}

pub fn parse_scan_csv(text: &str) -> io::Result<ParsedScan> {
    let records = read_csv(text)?;
    let (header, rest) = records.split_first().ok_or_else(|| bad("empty document"))?;
    if header != &SCAN_COLUMNS {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let (footer, body) = rest.split_last().ok_or_else(|| bad("missing footer"))?;
    if footer.len() != SCAN_FOOTER.len() {
        return Err(bad(format!("footer has {} fields", footer.len())));
    }
    let rows = body
        .iter()
        .map(|r| {
            if r.len() != SCAN_COLUMNS.len() {
                return Err(bad(format!("row has {} fields", r.len())));
            }
            let mut out = [0.0; 5];
            for (o, s) in out.iter_mut().zip(r) {
                *o = num(s)?;
            }
            Ok(out)
        })
        .collect::<io::Result<_>>()?;
    Ok(ParsedScan {
        rows,
        sup: num(&footer[0])?,
        bound_constant: num(&footer[1])?,
        within_bound: footer[2].parse().map_err(|_| bad("within_bound is not a bool"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(2.0 / 1f64.exp().sqrt()), "1.21306132");
        assert_eq!(fmt_num(10.0 / 3.0 * (3.0 * 3f64.ln()).sqrt()), "6.05147995");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(-2.0), "-2");
        assert_eq!(fmt_num(123456789.0), "123456789");
        assert_eq!(fmt_num(1234567890.0), "1.23456789e9");
        assert_eq!(fmt_num(1.5e-7), "1.5e-7");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(0.99999999999), "1");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn formatted_values_round_trip_to_nine_digits() {
        for x in [std::f64::consts::PI, 1e-12, 6.02e23, -0.000123456789123, 0.158655253931457] {
            let back: f64 = fmt_num(x).parse().unwrap();
            assert!(((back - x) / x).abs() <= 5e-9, "{x} -> {back}");
        }
    }

    fn sample_table() -> Table {
        let mut t = Table::new(&["name", "x", "n", "ok", "missing"]);
        t.rows.push(vec![Cell::Text("a,b".into()), Cell::Num(0.25), Cell::Int(3), Cell::Bool(true), Cell::Empty]);
        t.footer = Some((vec!["total".into()], vec![Cell::Num(1.0 / 3.0)]));
        t
    }

    #[test]
    fn csv_layout() {
        assert_eq!(sample_table().to_csv(), "name,x,n,ok,missing\n\"a,b\",0.25,3,true,\n0.333333333\n");
    }

    #[test]
    fn jsonl_layout() {
        let text = sample_table().to_jsonl();
        assert_eq!(
            text,
            "{\"name\":\"a,b\",\"x\":0.25,\"n\":3,\"ok\":true,\"missing\":null}\n{\"total\":0.333333333}\n"
        );
        for line in text.lines() {
            serde_json::from_str::<serde_json::Value>(line).unwrap();
        }
    }
}
