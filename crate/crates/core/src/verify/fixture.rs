//! Plain-text reference tables: one record per line,
//! `alpha nu lambda t k value`, whitespace separated, `#` starts a comment.

use std::fmt::Write as _;

use crate::dist::ProcessParams;
use crate::error::{Error, Result};
use crate::verify::oracle::{oracle_pmf_table, OracleConfig};

/// Significant digits written for each value.
pub const FIXTURE_DIGITS: usize = 25;

/// Reference mass-function table shipped with the crate.
pub const PMF_REFERENCE: &str = include_str!("../../fixtures/oracle_pmf.txt");

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureRow {
    pub alpha: f64,
    pub nu: f64,
    pub lambda: f64,
    pub t: f64,
    pub k: u64,
    /// The value as written, for comparisons beyond `f64`.
    pub text: String,
    pub value: f64,
}

impl FixtureRow {
    pub fn params(&self) -> Result<ProcessParams> {
        ProcessParams::new(self.lambda, self.alpha, self.nu)
    }
}

pub fn parse_fixture(src: &str) -> Result<Vec<FixtureRow>> {
    let mut rows = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Fixture(format!("line {}: {what}", i + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(bad(&format!("expected 6 fields, found {}", fields.len())));
        }
        let num =
            |j: usize, name: &str| fields[j].parse::<f64>().map_err(|_| bad(&format!("bad {name} {:?}", fields[j])));
        rows.push(FixtureRow {
            alpha: num(0, "alpha")?,
            nu: num(1, "nu")?,
            lambda: num(2, "lambda")?,
            t: num(3, "t")?,
            k: fields[4].parse().map_err(|_| bad(&format!("bad k {:?}", fields[4])))?,
            text: fields[5].to_string(),
            value: num(5, "value")?,
        });
    }
    Ok(rows)
}

/// Renders oracle values for `k = 0..=k_max` at each parameter set, with a
/// comment line per block recording precision and term counts.
pub fn render_fixture(blocks: &[(ProcessParams, f64, u64)], ocfg: &OracleConfig) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "# alpha nu lambda t k value").unwrap();
    for &(params, t, k_max) in blocks {
        let table = oracle_pmf_table(&params, t, k_max, ocfg)?;
        let terms: Vec<String> = table.iter().map(|v| v.terms_used.to_string()).collect();
        writeln!(out, "# precision_digits={} terms_per_k={}", ocfg.precision_digits, terms.join(",")).unwrap();
        for v in &table {
            writeln!(
                out,
                "{} {} {} {} {} {}",
                params.alpha(),
                params.nu(),
                params.lambda(),
                t,
                v.k,
                v.to_decimal_string(FIXTURE_DIGITS)
            )
            .unwrap();
        }
    }
    Ok(out)
}
