//! Published detection and energy figures recomputed from their inputs.

use serde::{Deserialize, Serialize};

use crate::bench::{battery_life, compare_energy, PlatformProfile};
use crate::error::Result;
use crate::metrics::{published, round_percent, MetricsReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub quantity: String,
    pub reproduced: f64,
    pub published: f64,
    /// Absolute tolerance, or relative when `relative` is set.
    pub tolerance: f64,
    pub relative: bool,
    pub pass: bool,
}

impl TableRow {
    fn new(quantity: &str, reproduced: f64, published: f64, tolerance: f64, relative: bool) -> Self {
        let err = (reproduced - published).abs();
        let bound = if relative { tolerance * published.abs() } else { tolerance };
        Self {
            quantity: quantity.into(),
            reproduced,
            published,
            tolerance,
            relative,
            pass: err <= bound + 1e-12,
        }
    }
}

/// Every row passes.
pub fn all_pass(rows: &[TableRow]) -> bool {
    rows.iter().all(|r| r.pass)
}

/// Percent points from the three published confusion matrices.
pub fn detection_rows() -> Result<Vec<TableRow>> {
    let b = MetricsReport::from_confusion(&published::BASELINE)?;
    let t = MetricsReport::from_confusion(&published::TEACHER)?;
    let s = MetricsReport::from_confusion(&published::STUDENT)?;
    let pct = round_percent;
    let row = |q, v, p| TableRow::new(q, v, p, 0.01, false);
    Ok(vec![
        row("baseline Sen (%)", pct(b.sen), 80.87),
        row("baseline Spe (%)", pct(b.spe), 79.59),
        row("teacher Sen (%)", pct(t.sen), 86.99),
        row("teacher Spe (%)", pct(t.spe), 95.66),
        row("teacher Gmean (%)", pct(t.gmean), 91.22),
        row("teacher F1 (%)", pct(t.f1), 90.93),
        row("student Sen (%)", pct(s.sen), 85.59),
        row("student Spe (%)", pct(s.spe), 94.39),
        row("teacher - baseline Sen (points)", pct(t.sen - b.sen), 6.12),
        row("teacher - baseline Spe (points)", pct(t.spe - b.spe), 16.07),
        TableRow::new("teacher - student Gmean (points)", pct(t.gmean - s.gmean), 1.35, 0.05, false),
    ])
}

/// Battery lives of the bundled platform profiles.
pub fn energy_rows() -> Result<Vec<TableRow>> {
    let life = |name: &str| -> Result<f64> { Ok(battery_life(&PlatformProfile::bundled(name)?)?.battery_life_h) };
    Ok(vec![
        TableRow::new("pulp battery life (h)", life("pulp")?, 91.33, 0.01, true),
        TableRow::new("raspberry-pi-zero battery life (h)", life("raspberry-pi-zero")?, 7.86, 0.005, true),
        TableRow::new(
            "raspberry-pi-zero teacher battery life (h)",
            life("raspberry-pi-zero-teacher")?,
            5.71,
            0.005,
            true,
        ),
        TableRow::new("kendryte-k210 battery life (h)", life("kendryte-k210")?, 16.29, 0.005, true),
    ])
}

/// A published figure that cannot be recomputed from the published inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unreproduced {
    pub quantity: String,
    pub derived: f64,
    pub published: f64,
    pub note: String,
}

/// The headline energy reduction next to what the profile averages give.
pub fn unreproduced() -> Result<Vec<Unreproduced>> {
    let teacher = battery_life(&PlatformProfile::bundled("raspberry-pi-zero-teacher")?)?;
    let student = battery_life(&PlatformProfile::bundled("raspberry-pi-zero")?)?;
    Ok(vec![Unreproduced {
        quantity: "teacher to student energy reduction (%)".into(),
        derived: 100.0 * compare_energy(&student, &teacher)?,
        published: 37.65,
        note: "raspberry-pi-zero average currents; the published arithmetic is not recoverable".into(),
    }])
}

pub fn published_tables() -> Result<Vec<TableRow>> {
    let mut rows = detection_rows()?;
    rows.extend(energy_rows()?);
    Ok(rows)
}

/// Plain-text table, one row per quantity.
pub fn render(rows: &[TableRow]) -> String {
    let width = rows.iter().map(|r| r.quantity.len()).max().unwrap_or(0);
    let mut out = format!("{:<width$}  {:>10}  {:>10}  {:>10}  result\n", "quantity", "reproduced", "published", "tolerance");
    for r in rows {
        let tol = if r.relative {
            format!("{}%", r.tolerance * 100.0)
        } else {
            format!("{}", r.tolerance)
        };
        out.push_str(&format!(
            "{:<width$}  {:>10.2}  {:>10.2}  {:>10}  {}\n",
            r.quantity,
            r.reproduced,
            r.published,
            tol,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}

pub fn render_unreproduced(items: &[Unreproduced]) -> String {
    let mut out = String::new();
    for u in items {
        out.push_str(&format!(
            "not reproduced: {}: derived {:.2}, published {:.2} ({})\n",
            u.quantity, u.derived, u.published, u.note
        ));
    }
    out
}
