//! UAI network/evidence text formats and bound reports (CSV and JSON).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Evidence, Factor, Network, VarSet};
use crate::oracle::ExactMarginals;
use crate::store::BoundsStore;

/// Slack allowed when checking that exact values lie within their bounds.
pub const SANDWICH_SLACK: f64 = 1e-9;

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, line)| line.split_whitespace().map(move |t| (i + 1, t)))
            .collect();
        Self { items, pos: 0 }
    }

    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or(self.items.last())
            .map_or(1, |t| t.0)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let t = self.items.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line: self.line(),
            message: format!("unexpected end of input, expected {what}"),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let (line, t) = self.next(what)?;
        t.parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected {what}, found '{t}'"),
        })
    }

    fn f64(&mut self, what: &str) -> Result<(usize, f64)> {
        let (line, t) = self.next(what)?;
        t.parse().map(|v| (line, v)).map_err(|_| Error::Parse {
            line,
            message: format!("expected {what}, found '{t}'"),
        })
    }

    fn is_done(&self) -> bool {
        self.pos >= self.items.len()
    }
}

/// Parses a `MARKOV` or `BAYES` network. CPTs are read as plain factors.
pub fn parse_uai(text: &str) -> Result<Network> {
    let mut tok = Tokens::new(text);
    let (line, header) = tok.next("header")?;
    if !matches!(header.to_ascii_uppercase().as_str(), "MARKOV" | "BAYES") {
        return Err(Error::Parse {
            line,
            message: format!("unknown network type '{header}'"),
        });
    }
    let num_vars = tok.usize("variable count")?;
    let mut cards = Vec::with_capacity(num_vars);
    for v in 0..num_vars {
        let line = tok.line();
        let c = tok.usize("cardinality")?;
        if c < 2 {
            return Err(Error::Parse {
                line,
                message: format!("variable {v} has cardinality {c}"),
            });
        }
        cards.push(c);
    }
    let num_factors = tok.usize("factor count")?;
    let mut scopes = Vec::with_capacity(num_factors);
    for fi in 0..num_factors {
        let size = tok.usize("scope size")?;
        let mut scope = Vec::with_capacity(size);
        for _ in 0..size {
            let line = tok.line();
            let v = tok.usize("variable index")?;
            if v >= num_vars {
                return Err(Error::Parse {
                    line,
                    message: format!("factor {fi}: variable {v} out of range"),
                });
            }
            if scope.contains(&v) {
                return Err(Error::Parse {
                    line,
                    message: format!("factor {fi}: duplicate variable {v}"),
                });
            }
            scope.push(v);
        }
        scopes.push(scope);
    }
    let mut factors = Vec::with_capacity(num_factors);
    for (fi, scope) in scopes.into_iter().enumerate() {
        let expected: usize = scope.iter().map(|&v| cards[v]).product();
        let line = tok.line();
        let count = tok.usize("table size")?;
        if count != expected {
            return Err(Error::Parse {
                line,
                message: format!("factor {fi}: table declares {count} values, scope requires {expected}"),
            });
        }
        let mut table = Vec::with_capacity(count);
        for k in 0..count {
            let (line, w) = tok.f64("weight").map_err(|e| match e {
                Error::Parse { line, message } => Error::Parse {
                    line,
                    message: format!("factor {fi}: {k} of {count} values read; {message}"),
                },
                other => other,
            })?;
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Parse {
                    line,
                    message: format!("factor {fi}: invalid weight {w}"),
                });
            }
            table.push(w);
        }
        factors.push(Factor::new(scope, table));
    }
    if !tok.is_done() {
        return Err(Error::Parse {
            line: tok.line(),
            message: "trailing tokens after last factor".into(),
        });
    }
    Network::new(cards, factors)
}

/// Shortest round-trip representation; exponent form for very small or
/// large magnitudes.
pub fn fmt_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn write_uai(net: &Network) -> String {
    let mut out = String::from("MARKOV\n");
    let _ = writeln!(out, "{}", net.num_vars());
    let cards: Vec<String> = net.cardinalities().iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "{}", cards.join(" "));
    let _ = writeln!(out, "{}", net.factors().len());
    for f in net.factors() {
        let scope: Vec<String> = f.scope().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{} {}", scope.len(), scope.join(" "));
    }
    for f in net.factors() {
        let _ = writeln!(out, "\n{}", f.table().len());
        let values: Vec<String> = f.table().iter().map(|&w| fmt_float(w)).collect();
        let _ = writeln!(out, " {}", values.join(" "));
    }
    out
}

/// `count var state var state ...`
pub fn parse_evidence(text: &str) -> Result<Evidence> {
    let mut tok = Tokens::new(text);
    if tok.is_done() {
        return Ok(Evidence::new());
    }
    let count = tok.usize("evidence count")?;
    let mut ev = Evidence::new();
    for _ in 0..count {
        let line = tok.line();
        let var = tok.usize("variable")?;
        let state = tok.usize("state")?;
        ev.observe(var, state).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
    }
    if !tok.is_done() {
        return Err(Error::Parse {
            line: tok.line(),
            message: "trailing tokens in evidence".into(),
        });
    }
    Ok(ev)
}

pub fn write_evidence(ev: &Evidence) -> String {
    let mut out = ev.len().to_string();
    for (v, s) in ev.iter() {
        let _ = write!(out, " {v} {s}");
    }
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub vars: VarSet,
    pub state: usize,
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<f64>,
}

impl ReportRow {
    pub fn bandwidth(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunMetadata {
    pub omega_schedule: Vec<u128>,
    pub sweeps: usize,
    pub wall_time_secs: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportSummary {
    pub single_entries: usize,
    /// Fraction of single-variable entries whose widest state band is below 0.1.
    pub fraction_single_below_0_1: f64,
    pub mean_bandwidth: f64,
    pub max_bandwidth: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundsReport {
    pub rows: Vec<ReportRow>,
    pub metadata: RunMetadata,
}

impl BoundsReport {
    /// Rows from `store`, renaming variables through `var_names` (reduced to
    /// original index) when given, with exact values attached when given.
    pub fn from_store(store: &BoundsStore, var_names: Option<&[usize]>, exact: Option<&ExactMarginals>) -> Self {
        let mut rows = Vec::new();
        for (set, entry) in store.iter() {
            let exact_vec = exact.and_then(|e| e.get(set));
            let vars: VarSet = match var_names {
                Some(map) => set.iter().map(|&v| map[v]).collect(),
                None => set.clone(),
            };
            for s in 0..entry.num_states() {
                rows.push(ReportRow {
                    vars: vars.clone(),
                    state: s,
                    lower: entry.lower[s],
                    upper: entry.upper[s],
                    exact: exact_vec.map(|p| p[s]),
                });
            }
        }
        let mut report = Self {
            rows,
            metadata: RunMetadata::default(),
        };
        report.sort();
        report
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.vars.cmp(&b.vars).then(a.state.cmp(&b.state)));
    }

    /// Fails if any attached exact value escapes its bounds by more than
    /// [`SANDWICH_SLACK`].
    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            if r.bandwidth() < -SANDWICH_SLACK {
                return Err(Error::Soundness(format!("{:?} state {}: lower {} > upper {}", r.vars, r.state, r.lower, r.upper)));
            }
            if let Some(x) = r.exact {
                if x < r.lower - SANDWICH_SLACK || x > r.upper + SANDWICH_SLACK {
                    return Err(Error::Soundness(format!(
                        "{:?} state {}: exact {} outside [{}, {}]",
                        r.vars, r.state, x, r.lower, r.upper
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> ReportSummary {
        let mut widest: BTreeMap<&VarSet, f64> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.vars.len() == 1) {
            let w = widest.entry(&r.vars).or_insert(0.0);
            *w = w.max(r.bandwidth());
        }
        let single_entries = widest.len();
        let below = widest.values().filter(|&&w| w < 0.1).count();
        let n = self.rows.len();
        ReportSummary {
            single_entries,
            fraction_single_below_0_1: if single_entries == 0 { 0.0 } else { below as f64 / single_entries as f64 },
            mean_bandwidth: if n == 0 { 0.0 } else { self.rows.iter().map(ReportRow::bandwidth).sum::<f64>() / n as f64 },
            max_bandwidth: self.rows.iter().map(ReportRow::bandwidth).fold(0.0, f64::max),
        }
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let s = self.summary();
        vec![
            format!(
                "single-variable entries with bandwidth < 0.1: {:.4} ({} entries)",
                s.fraction_single_below_0_1, s.single_entries
            ),
            format!("mean bandwidth: {}", fmt_float(s.mean_bandwidth)),
            format!("max bandwidth: {}", fmt_float(s.max_bandwidth)),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: &str = "vars,state,lower,upper,bandwidth,exact";

fn fmt_vars(vars: &[usize]) -> String {
    vars.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Renders a report; exact values, when present, are re-validated first.
pub fn write_report(report: &BoundsReport, format: ReportFormat) -> Result<String> {
    report.validate()?;
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in &report.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt_vars(&r.vars),
                    r.state,
                    fmt_float(r.lower),
                    fmt_float(r.upper),
                    fmt_float(r.bandwidth()),
                    r.exact.map(fmt_float).unwrap_or_default()
                );
            }
            Ok(out)
        }
        ReportFormat::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                metadata: &'a RunMetadata,
                summary: ReportSummary,
                rows: Vec<JsonRow<'a>>,
            }
            #[derive(Serialize)]
            struct JsonRow<'a> {
                vars: &'a [usize],
                state: usize,
                lower: f64,
                upper: f64,
                bandwidth: f64,
                exact: Option<f64>,
            }
            let doc = Doc {
                metadata: &report.metadata,
                summary: report.summary(),
                rows: report
                    .rows
                    .iter()
                    .map(|r| JsonRow {
                        vars: &r.vars,
                        state: r.state,
                        lower: r.lower,
                        upper: r.upper,
                        bandwidth: r.bandwidth(),
                        exact: r.exact,
                    })
                    .collect(),
            };
            Ok(serde_json::to_string_pretty(&doc).expect("report serializes"))
        }
    }
}

fn parse_vars(field: &str, line: usize) -> Result<VarSet> {
    field
        .split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad variable '{t}'"),
            })
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {what} '{field}'"),
    })
}

fn data_lines(text: &str, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        Some((i, h)) => {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected header '{header}', found '{h}'"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let width = header.split(',').count();
    lines
        .map(|(i, l)| {
            let fields: Vec<String> = l.split(',').map(str::to_string).collect();
            if fields.len() != width {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {width} fields, found {}", fields.len()),
                });
            }
            Ok((i + 1, fields))
        })
        .collect()
}

/// Reads a bounds CSV written by [`write_report`].
pub fn parse_report_csv(text: &str) -> Result<BoundsReport> {
    let mut rows = Vec::new();
    for (line, f) in data_lines(text, CSV_HEADER)? {
        rows.push(ReportRow {
            vars: parse_vars(&f[0], line)?,
            state: parse_field(&f[1], line, "state")?,
            lower: parse_field(&f[2], line, "lower bound")?,
            upper: parse_field(&f[3], line, "upper bound")?,
            exact: if f[5].trim().is_empty() {
                None
            } else {
                Some(parse_field(&f[5], line, "exact value")?)
            },
        });
    }
    Ok(BoundsReport {
        rows,
        metadata: RunMetadata::default(),
    })
}

pub const EXACT_HEADER: &str = "vars,state,probability";

pub fn write_exact_csv(exact: &ExactMarginals, var_names: Option<&[usize]>) -> String {
    let mut rows: Vec<(VarSet, usize, f64)> = Vec::new();
    for (set, p) in &exact.marginals {
        let vars: VarSet = match var_names {
            Some(map) => set.iter().map(|&v| map[v]).collect(),
            None => set.clone(),
        };
        rows.extend(p.iter().enumerate().map(|(s, &x)| (vars.clone(), s, x)));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = String::from(EXACT_HEADER);
    out.push('\n');
    for (vars, s, x) in rows {
        let _ = writeln!(out, "{},{},{}", fmt_vars(&vars), s, fmt_float(x));
    }
    out
}

pub fn parse_exact_csv(text: &str) -> Result<BTreeMap<(VarSet, usize), f64>> {
    let mut out = BTreeMap::new();
    for (line, f) in data_lines(text, EXACT_HEADER)? {
        out.insert(
            (parse_vars(&f[0], line)?, parse_field(&f[1], line, "state")?),
            parse_field(&f[2], line, "probability")?,
        );
    }
    Ok(out)
}

/// Attaches exact values to matching rows and validates the result.
pub fn merge_exact(mut report: BoundsReport, exact: &BTreeMap<(VarSet, usize), f64>) -> Result<BoundsReport> {
    for r in &mut report.rows {
        if let Some(&x) = exact.get(&(r.vars.clone(), r.state)) {
            r.exact = Some(x);
        }
    }
    report.validate()?;
    Ok(report)
}
