//! Forecast metrics and model-comparison statistics.
//!
//! Besides MAE/MAPE this module covers the comparison machinery used to rank
//! a set of competing monthly forecasts: per-month win/loss counts against a
//! reference model, Friedman mean ranks, and the exact one-sided Wilcoxon
//! signed-rank test (enumeration over all sign assignments, feasible for the
//! 12-month grids handled here; ties take average ranks and the enumeration
//! then runs over the realized rank multiset).
//!
//! The `fixtures` submodule embeds the two benchmark MAPE grids shipped under
//! `fixtures/`; their derived statistics are pinned by the integration tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::series::YearMonth;
use crate::{Error, Result};

/// A models-by-months grid of MAPE percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapeTable {
    pub models: Vec<String>,
    pub months: Vec<YearMonth>,
    /// `values[model][month]`, fully populated, all entries >= 0.
    pub values: Vec<Vec<f64>>,
}

impl MapeTable {
    pub fn new(models: Vec<String>, months: Vec<YearMonth>, values: Vec<Vec<f64>>) -> Result<Self> {
        if models.is_empty() || months.is_empty() {
            return Err(Error::config("table needs at least one model and month"));
        }
        if values.len() != models.len() {
            return Err(Error::config("one value row per model required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for model in &models {
            if !seen.insert(model.clone()) {
                return Err(Error::config(format!("duplicate model {model:?}")));
            }
        }
        for (model, row) in models.iter().zip(&values) {
            if row.len() != months.len() {
                return Err(Error::config(format!(
                    "model {model:?} has {} values, expected {}",
                    row.len(),
                    months.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::config(format!(
                    "model {model:?} has invalid MAPE {v}"
                )));
            }
        }
        Ok(MapeTable {
            models,
            months,
            values,
        })
    }

    /// Parses the fixture schema: header `model,m1..m12`, one row per model.
    /// The `m1..` columns are mapped onto consecutive months of `first_month`.
    pub fn parse_csv(text: &str, first_month: YearMonth) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::config("empty table"))?;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "model" {
            return Err(Error::config("table header must be `model,m1,...`"));
        }
        let n_months = cols.len() - 1;
        let months: Vec<YearMonth> = (0..n_months)
            .map(|i| first_month.plus_months(i as i64))
            .collect();

        let mut models = Vec::new();
        let mut values = Vec::new();
        for (line_no, line) in lines {
            let cells: Vec<&str> = line.trim().split(',').map(str::trim).collect();
            if cells.len() != cols.len() {
                return Err(Error::Parse {
                    row: line_no,
                    column: "<row>".into(),
                    content: line.into(),
                });
            }
            models.push(cells[0].to_string());
            let row: Vec<f64> = cells[1..]
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    c.parse::<f64>().map_err(|_| Error::Parse {
                        row: line_no,
                        column: cols[j + 1].into(),
                        content: (*c).into(),
                    })
                })
                .collect::<Result<_>>()?;
            values.push(row);
        }
        MapeTable::new(models, months, values)
    }

    pub fn row(&self, model: &str) -> Option<&[f64]> {
        let i = self.models.iter().position(|m| m == model)?;
        Some(&self.values[i])
    }
}

/// Comparison report for one table against a reference model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub reference: String,
    pub alpha: f64,
    /// Mean MAPE per model, table order.
    pub mean_mape: BTreeMap<String, f64>,
    /// Months won/lost by each non-reference model against the reference,
    /// plus the aggregate pair for the reference itself.
    pub win_loss: BTreeMap<String, (usize, usize)>,
    /// Friedman mean rank per model (lower is better).
    pub f_rank: BTreeMap<String, f64>,
    /// Exact one-sided p-value per non-reference model.
    pub p_value: BTreeMap<String, f64>,
    /// Models whose p-value falls below `alpha`.
    pub significant: BTreeMap<String, bool>,
}

/// Mean absolute error.
pub fn mae(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != forecast.len() {
        return Err(Error::alignment(format!(
            "mae over {} actuals vs {} forecasts",
            actual.len(),
            forecast.len()
        )));
    }
    Ok(actual
        .iter()
        .zip(forecast)
        .map(|(y, f)| (y - f).abs())
        .sum::<f64>()
        / actual.len() as f64)
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != forecast.len() {
        return Err(Error::alignment(format!(
            "mape over {} actuals vs {} forecasts",
            actual.len(),
            forecast.len()
        )));
    }
    if let Some(i) = actual.iter().position(|y| *y == 0.0) {
        return Err(Error::DivisionByZero { index: i });
    }
    Ok(100.0
        * actual
            .iter()
            .zip(forecast)
            .map(|(y, f)| ((y - f) / y).abs())
            .sum::<f64>()
        / actual.len() as f64)
}

/// Months where the baseline strictly beats the reference, and the rest.
/// Ties count against the baseline.
pub fn win_loss(baseline_mapes: &[f64], reference_mapes: &[f64]) -> (usize, usize) {
    let wins = baseline_mapes
        .iter()
        .zip(reference_mapes)
        .filter(|(b, r)| b < r)
        .count();
    (wins, baseline_mapes.len() - wins)
}

/// Average ranks (1-based) of a slice, ascending; tied values share the mean
/// of the ranks they span.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman mean rank per model: models are ranked by MAPE ascending within
/// each month, ties averaged, then averaged over months.
pub fn friedman_rank(table: &MapeTable) -> BTreeMap<String, f64> {
    let mut sums = vec![0.0; table.models.len()];
    for month_idx in 0..table.months.len() {
        let column: Vec<f64> = table.values.iter().map(|row| row[month_idx]).collect();
        for (s, r) in sums.iter_mut().zip(average_ranks(&column)) {
            *s += r;
        }
    }
    table
        .models
        .iter()
        .zip(sums)
        .map(|(m, s)| (m.clone(), s / table.months.len() as f64))
        .collect()
}

/// Exact one-sided Wilcoxon signed-rank test of whether the reference's
/// errors are lower than the baseline's.
///
/// Differences `d = baseline - reference` with zeros dropped; the statistic
/// is the rank sum of negative differences, and the p-value is the exact
/// lower-tail probability `P(W <= W⁻)` over all `2^n` equiprobable sign
/// assignments, computed by subset-sum convolution over doubled ranks (ties
/// give half-integer average ranks, so doubling keeps everything integral).
pub fn wilcoxon_one_sided(baseline: &[f64], reference: &[f64]) -> Result<f64> {
    if baseline.len() != reference.len() || baseline.is_empty() {
        return Err(Error::alignment(format!(
            "wilcoxon over {} vs {} observations",
            baseline.len(),
            reference.len()
        )));
    }
    let diffs: Vec<f64> = baseline
        .iter()
        .zip(reference)
        .map(|(b, r)| b - r)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::degenerate("all paired differences are zero"));
    }
    let n = diffs.len();
    if n > 25 {
        return Err(Error::config(format!(
            "exact enumeration supports up to 25 pairs, got {n}"
        )));
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    // doubled ranks are integers even with averaged ties
    let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
    let w_neg_doubled: u64 = diffs
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d < 0.0)
        .map(|(_, r)| *r)
        .sum();

    // subset-sum counts over the doubled-rank multiset
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0u64; (total + 1) as usize];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s as usize] += counts[(s - r) as usize];
        }
    }
    let at_or_below: u64 = counts[..=(w_neg_doubled as usize)].iter().sum();
    Ok(at_or_below as f64 / (1u64 << n) as f64)
}

/// Assembles the derived-statistics report for a table: mean MAPE, win/loss
/// against the reference, Friedman ranks and exact Wilcoxon p-values with
/// significance flags at `alpha`.
pub fn build_report(table: &MapeTable, reference: &str, alpha: f64) -> Result<EvalReport> {
    let reference_row = table
        .row(reference)
        .ok_or_else(|| Error::config(format!("unknown reference model {reference:?}")))?
        .to_vec();

    let mut mean_mape = BTreeMap::new();
    let mut wl = BTreeMap::new();
    let mut p_value = BTreeMap::new();
    let mut significant = BTreeMap::new();
    let mut agg = (0usize, 0usize);

    for (model, row) in table.models.iter().zip(&table.values) {
        mean_mape.insert(model.clone(), row.iter().sum::<f64>() / row.len() as f64);
        if model == reference {
            continue;
        }
        let (w, l) = win_loss(row, &reference_row);
        agg.0 += l; // a baseline loss is a reference win
        agg.1 += w;
        wl.insert(model.clone(), (w, l));
        let p = wilcoxon_one_sided(row, &reference_row)?;
        significant.insert(model.clone(), p < alpha);
        p_value.insert(model.clone(), p);
    }
    if table.models.len() > 1 {
        wl.insert(reference.to_string(), agg);
    }

    Ok(EvalReport {
        reference: reference.to_string(),
        alpha,
        mean_mape,
        win_loss: wl,
        f_rank: friedman_rank(table),
        p_value,
        significant,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV with the derived rows (`mean_mape`, `win_loss`, `f_rank`,
    /// `p_value`) as lines and models as columns, mirroring the layout of the
    /// benchmark tables.
    pub fn summary_csv(&self, table: &MapeTable) -> String {
        let mut out = String::from("statistic");
        for m in &table.models {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');

        out.push_str("mean_mape");
        for m in &table.models {
            out.push_str(&format!(",{:.4}", self.mean_mape[m]));
        }
        out.push('\n');

        out.push_str("win_loss");
        for m in &table.models {
            match self.win_loss.get(m) {
                Some((w, l)) => out.push_str(&format!(",{w}/{l}")),
                None => out.push(','),
            }
        }
        out.push('\n');

        out.push_str("f_rank");
        for m in &table.models {
            out.push_str(&format!(",{:.3}", self.f_rank[m]));
        }
        out.push('\n');

        out.push_str("p_value");
        for m in &table.models {
            match self.p_value.get(m) {
                Some(p) => out.push_str(&format!(",{p:.4}")),
                None => out.push_str(",-"),
            }
        }
        out.push('\n');
        out
    }
}

/// Embedded copies of the benchmark MAPE grids shipped under `fixtures/`.
pub mod fixtures {
    use super::MapeTable;
    use crate::series::YearMonth;

    pub const TABLE_D1_CSV: &str = include_str!("../fixtures/table1_d1.csv");
    pub const TABLE_D2_CSV: &str = include_str!("../fixtures/table2_d2.csv");

    fn first_month() -> YearMonth {
        YearMonth::new(2021, 1).expect("static month")
    }

    /// Benchmark grid for the first city dataset.
    pub fn table_d1() -> MapeTable {
        MapeTable::parse_csv(TABLE_D1_CSV, first_month()).expect("embedded table parses")
    }

    /// Benchmark grid for the second city dataset.
    pub fn table_d2() -> MapeTable {
        MapeTable::parse_csv(TABLE_D2_CSV, first_month()).expect("embedded table parses")
    }
}
