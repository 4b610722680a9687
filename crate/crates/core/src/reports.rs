//! Tabular reports and the figure data sets.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fock_states::SingleModeState;
use crate::optical_sim::{self, CircuitConfig};
use crate::param_solver::{solve_param_for_nbar, Family, FamilyTarget};
use crate::qcrb::{self, ProbeSpec, QcrbReport, Weighting};

/// Significant digits written for every value.
pub const SIGNIFICANT_DIGITS: usize = 12;

pub const FIGURE_IDS: [u32; 4] = [2, 3, 4, 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Named columns of numbers; `None` marks a point where a curve does not
/// exist (for example a target photon number out of a family's reach).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map(format_value).unwrap_or_default())
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// `{"columns": [...], "rows": [[...], ...]}` with `null` for missing cells.
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| match v {
                        Some(x) => format_value(*x)
                            .parse::<f64>()
                            .ok()
                            .and_then(serde_json::Number::from_f64)
                            .map_or(serde_json::Value::Null, serde_json::Value::Number),
                        None => serde_json::Value::Null,
                    })
                    .collect()
            })
            .collect();
        let doc = serde_json::json!({ "columns": self.columns, "rows": rows });
        let mut text = serde_json::to_string_pretty(&doc).expect("json values are finite");
        text.push('\n');
        text
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.render(format))?;
        Ok(())
    }
}

/// `%.12g`-style formatting: fixed notation for exponents in `[-4, 12)`,
/// scientific otherwise, trailing zeros removed.
pub fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!(
            "{}e{sign}{:02}",
            trim_zeros(mantissa.to_string()),
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced in `ln`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    grid_points(n, |t| (a + t * (b - a)).exp(), lo, hi)
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    grid_points(n, |t| lo + t * (hi - lo), lo, hi)
}

fn grid_points(n: usize, map: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| match i {
                0 => lo,
                i if i == n - 1 => hi,
                i => map(i as f64 / (n - 1) as f64),
            })
            .collect(),
    }
}

/// Grid and parameters of one figure.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub id: u32,
    pub d: usize,
    /// Photon-number range for figures 2 and 3.
    pub n_bar_range: (f64, f64),
    /// Squeeze-factor range for figures 4 and 6.
    pub r_range: (f64, f64),
    pub steps: usize,
}

impl FigureSpec {
    pub fn defaults(id: u32) -> Result<Self> {
        let (d, steps, r_range) = match id {
            2 | 3 => (5, 40, (0.0, 0.0)),
            4 => (5, 60, (0.3, 3.0)),
            6 => (1, 20, (1.0, 2.0)),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "figure {id} is not available (choose from {FIGURE_IDS:?})"
                )))
            }
        };
        Ok(FigureSpec {
            id,
            d,
            n_bar_range: (0.5, 20.0),
            r_range,
            steps,
        })
    }

    pub fn file_name(&self, format: Format) -> String {
        format!("figure{}.{}", self.id, format.extension())
    }
}

/// Builds the data set of a figure and checks its invariants before returning it.
pub fn figure_table(spec: &FigureSpec, circuit: &CircuitConfig) -> Result<Table> {
    match spec.id {
        2 => family_figure(
            spec,
            &[
                ("noon", Family::Noon, None),
                ("ecs", Family::Ecs, None),
                ("escs_r1", Family::Escs, Some(1.0)),
                ("esvs", Family::Esvs, None),
            ],
        ),
        3 => family_figure(
            spec,
            &[
                ("ecs", Family::Ecs, None),
                ("escs_r0.4", Family::Escs, Some(0.4)),
                ("escs_r0.8", Family::Escs, Some(0.8)),
                ("escs_r1.2", Family::Escs, Some(1.2)),
                ("esvs", Family::Esvs, None),
            ],
        ),
        4 => unbalanced_figure(spec),
        6 => experiment_figure(spec, circuit),
        id => Err(Error::InvalidArgument(format!(
            "figure {id} is not available (choose from {FIGURE_IDS:?})"
        ))),
    }
}

/// Curves listed from worst to best bound; each row must respect that order.
fn family_figure(spec: &FigureSpec, curves: &[(&str, Family, Option<f64>)]) -> Result<Table> {
    let mut table = Table::new(std::iter::once("n_bar").chain(curves.iter().map(|c| c.0)));
    let (lo, hi) = spec.n_bar_range;
    for n_bar in log_grid(lo, hi, spec.steps) {
        let mut row = vec![Some(n_bar)];
        for &(name, family, r_prime) in curves {
            let mut target = FamilyTarget::new(family, spec.d, n_bar);
            target.r_prime = r_prime;
            let value = match solve_param_for_nbar(&target) {
                Ok(matched) => {
                    let report = matched.report(spec.d)?;
                    check_report(name, &report)?;
                    Some(report.qcrb)
                }
                Err(Error::TargetUnreachable { .. }) => None,
                Err(e) => return Err(e),
            };
            row.push(value);
        }
        let present: Vec<(usize, f64)> = row[1..]
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
            .collect();
        if let Some(w) = present.windows(2).find(|w| !(w[0].1 > w[1].1)) {
            return Err(Error::OrderingViolation(format!(
                "at n_bar = {n_bar}: {} = {} not above {} = {}",
                curves[w[0].0].0, w[0].1, curves[w[1].0].0, w[1].1
            )));
        }
        table.push(row)?;
    }
    Ok(table)
}

fn check_report(name: &str, report: &QcrbReport) -> Result<()> {
    let violations = report.invariant_violations();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::OrderingViolation(format!(
            "{name}: {}",
            violations.join("; ")
        )))
    }
}

fn unbalanced_figure(spec: &FigureSpec) -> Result<Table> {
    let mut table = Table::new([
        "r",
        "n_bar_balanced",
        "balanced",
        "n_bar_unbalanced",
        "unbalanced",
    ]);
    let (lo, hi) = spec.r_range;
    for r in linear_grid(lo, hi, spec.steps) {
        let state = SingleModeState::squeezed_vacuum(r)?;
        let balanced = qcrb::qcrb_closed_form(&ProbeSpec::balanced(spec.d, state.clone())?)?;
        check_report("balanced", &balanced)?;
        let unbalanced =
            qcrb::qcrb_closed_form(&ProbeSpec::new(spec.d, state, Weighting::OptimizedB)?)?;
        check_report("unbalanced", &unbalanced)?;
        table.push(vec![
            Some(r),
            Some(balanced.n_bar),
            Some(balanced.qcrb),
            Some(unbalanced.n_bar),
            Some(unbalanced.qcrb),
        ])?;
    }
    Ok(table)
}

fn experiment_figure(spec: &FigureSpec, circuit: &CircuitConfig) -> Result<Table> {
    if spec.d != 1 {
        return Err(Error::InvalidArgument(format!(
            "the prepared state is a single-phase probe; figure 6 needs d = 1, got {}",
            spec.d
        )));
    }
    let (lo, hi) = spec.r_range;
    let cmp = optical_sim::experiment_qcrb_comparison(&linear_grid(lo, hi, spec.steps), circuit)?;
    let mut table = Table::new(["n_bar", "noon_effective", "ecs", "phi"]);
    for ((phi, noon), ecs) in cmp
        .phi
        .points
        .iter()
        .zip(&cmp.noon.points)
        .zip(&cmp.ecs.points)
    {
        table.push(vec![
            Some(phi.n_bar),
            Some(noon.qcrb),
            Some(ecs.qcrb),
            Some(phi.qcrb),
        ])?;
    }
    Ok(table)
}

/// One-row table describing a single bound.
pub fn report_table(report: &QcrbReport) -> Table {
    let mut table = Table::new([
        "d",
        "qcrb",
        "f",
        "r_ratio",
        "b2",
        "n_tilde",
        "n_bar",
        "noon_bound",
    ]);
    table
        .push(vec![
            Some(report.d as f64),
            Some(report.qcrb),
            Some(report.f),
            Some(report.r_ratio),
            Some(report.b2),
            Some(report.n_tilde),
            Some(report.n_bar),
            Some(report.noon_bound()),
        ])
        .expect("fixed width");
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_printf_g() {
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(3.75), "3.75");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_value(2.0 / 3.0 * 1e-7), "6.66666666667e-08");
        assert_eq!(format_value(123456789012.0), "123456789012");
        assert_eq!(format_value(1234567890123.0), "1.23456789012e+12");
        assert_eq!(format_value(-0.0001), "-0.0001");
        assert_eq!(format_value(0.00001), "1e-05");
        assert_eq!(format_value(0.999_999_999_999_9), "1");
    }

    #[test]
    fn grids_hit_endpoints() {
        let g = log_grid(0.5, 20.0, 40);
        assert_eq!(g.len(), 40);
        assert_eq!((g[0], g[39]), (0.5, 20.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(linear_grid(1.0, 2.0, 3), vec![1.0, 1.5, 2.0]);
    }

    #[test]
    fn csv_and_json_layout() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![Some(1.0), None]).unwrap();
        t.push(vec![Some(0.5), Some(2.0)]).unwrap();
        assert_eq!(t.to_csv(), "a,b\n1,\n0.5,2\n");
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["columns"][1], "b");
        assert!(v["rows"][0][1].is_null());
        assert_eq!(v["rows"][1][1], 2.0);
        assert!(t.push(vec![Some(1.0)]).is_err());
    }

    #[test]
    fn unknown_figure() {
        assert!(FigureSpec::defaults(7).is_err());
    }
}
