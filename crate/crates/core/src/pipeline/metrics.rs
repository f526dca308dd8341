//! Field coverage: how many fields the automation placed, paired or left
//! unidentified.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::context::PlaceholderContext;
use crate::llm::{BindingSource, VariableBinding};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub total_fields: usize,
    /// Stamped tokens OCR found again.
    pub placed_inline: usize,
    /// Small fields named from adjacent text.
    pub paired_checkboxes: usize,
    /// Everything else: lost tokens and small fields without a label.
    pub unidentified: usize,
}

impl Counts {
    /// Counts for one form, from its OCR reconciliation and draft bindings.
    pub fn from_draft(ctx: &PlaceholderContext, bindings: &[VariableBinding]) -> Self {
        let boxes: Vec<&VariableBinding> = bindings
            .iter()
            .filter(|b| b.source == BindingSource::Checkbox)
            .collect();
        let paired = boxes.iter().filter(|b| b.paired == Some(true)).count();
        let (recovered, missing) = ctx.coverage();
        Self {
            total_fields: recovered + missing + boxes.len(),
            placed_inline: recovered,
            paired_checkboxes: paired,
            unidentified: missing + boxes.len() - paired,
        }
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, other: Counts) -> Counts {
        Counts {
            total_fields: self.total_fields + other.total_fields,
            placed_inline: self.placed_inline + other.placed_inline,
            paired_checkboxes: self.paired_checkboxes + other.paired_checkboxes,
            unidentified: self.unidentified + other.unidentified,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub placed_inline: f64,
    pub paired_checkboxes: f64,
    pub unidentified: f64,
    /// Placed plus paired.
    pub recognized: f64,
}

impl Fractions {
    /// All zero for a form without fields.
    pub fn of(c: &Counts) -> Self {
        if c.total_fields == 0 {
            return Self::default();
        }
        let t = c.total_fields as f64;
        Self {
            placed_inline: c.placed_inline as f64 / t,
            paired_checkboxes: c.paired_checkboxes as f64 / t,
            unidentified: c.unidentified as f64 / t,
            recognized: (c.placed_inline + c.paired_checkboxes) as f64 / t,
        }
    }

    fn mean(rows: &[Fractions]) -> Self {
        if rows.is_empty() {
            return Self::default();
        }
        let n = rows.len() as f64;
        let sum = |f: fn(&Fractions) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Self {
            placed_inline: sum(|r| r.placed_inline),
            paired_checkboxes: sum(|r| r.paired_checkboxes),
            unidentified: sum(|r| r.unidentified),
            recognized: sum(|r| r.recognized),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub form: String,
    pub counts: Counts,
    pub fractions: Fractions,
}

impl MetricsRow {
    pub fn new(form: impl Into<String>, counts: Counts) -> Self {
        Self {
            form: form.into(),
            counts,
            fractions: Fractions::of(&counts),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    /// Pooled counts: every field weighs the same.
    pub field_weighted: MetricsRow,
    /// Mean of the per-form fractions over forms with fields: every form
    /// weighs the same.
    pub form_mean: Fractions,
}

/// Per-form rows and both aggregates.
pub fn compute_metrics(rows: Vec<MetricsRow>) -> MetricsReport {
    let pooled = rows.iter().fold(Counts::default(), |acc, r| acc + r.counts);
    let with_fields: Vec<Fractions> = rows
        .iter()
        .filter(|r| r.counts.total_fields > 0)
        .map(|r| r.fractions)
        .collect();
    MetricsReport {
        field_weighted: MetricsRow::new("all forms (field-weighted)", pooled),
        form_mean: Fractions::mean(&with_fields),
        rows,
    }
}

fn pct(f: f64) -> String {
    format!("{:.1}%", f * 100.0)
}

impl MetricsReport {
    /// An aligned text table.
    pub fn render_table(&self) -> String {
        let header = [
            "form",
            "fields",
            "placed",
            "paired",
            "unidentified",
            "recognized %",
            "paired %",
            "unidentified %",
        ];
        let mut lines: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        let row = |r: &MetricsRow| {
            vec![
                r.form.clone(),
                r.counts.total_fields.to_string(),
                r.counts.placed_inline.to_string(),
                r.counts.paired_checkboxes.to_string(),
                r.counts.unidentified.to_string(),
                pct(r.fractions.recognized),
                pct(r.fractions.paired_checkboxes),
                pct(r.fractions.unidentified),
            ]
        };
        lines.extend(self.rows.iter().map(row));
        lines.push(row(&self.field_weighted));
        let m = &self.form_mean;
        lines.push(
            [
                "all forms (form mean)".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                pct(m.recognized),
                pct(m.paired_checkboxes),
                pct(m.unidentified),
            ]
            .to_vec(),
        );
        let widths: Vec<usize> = (0..header.len())
            .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &lines {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(t: usize, p: usize, c: usize) -> Counts {
        Counts {
            total_fields: t,
            placed_inline: p,
            paired_checkboxes: c,
            unidentified: t - p - c,
        }
    }

    #[test]
    fn fixture_arithmetic() {
        let f = Fractions::of(&counts(14, 9, 2));
        assert_eq!(f.recognized, 11.0 / 14.0);
        assert_eq!(f.unidentified, 3.0 / 14.0);
        assert!((f.placed_inline + f.paired_checkboxes + f.unidentified - 1.0).abs() < 1e-9);
        assert_eq!(pct(f.recognized), "78.6%");
        assert_eq!(pct(f.unidentified), "21.4%");
    }

    #[test]
    fn everything_placed() {
        let f = Fractions::of(&counts(5, 5, 0));
        assert_eq!((f.recognized, f.unidentified), (1.0, 0.0));
    }

    #[test]
    fn aggregates() {
        let report = compute_metrics(vec![
            MetricsRow::new("a", counts(10, 5, 0)),
            MetricsRow::new("b", counts(30, 27, 3)),
            MetricsRow::new("empty", counts(0, 0, 0)),
        ]);
        assert_eq!(report.field_weighted.counts, counts(40, 32, 3));
        assert_eq!(report.field_weighted.fractions.recognized, 35.0 / 40.0);
        assert!((report.form_mean.recognized - (0.5 + 1.0) / 2.0).abs() < 1e-12);
        let table = report.render_table();
        assert_eq!(table.lines().count(), 6);
        assert!(table.contains("87.5%"));
    }
}
