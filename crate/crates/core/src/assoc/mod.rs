//! Cardio-sleep stratified comparisons and the PSQI consistency analysis.

mod consistency;
mod hypothesis;

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use consistency::{
    pearson_regression, psqi_normalize, sleep_efficiency_from_predictions, wake_probability, ConsistencyResult,
    PSQI_MAX,
};
pub use hypothesis::{format_p, mann_whitney, mann_whitney_u, two_sample_test, welch_t, TestKind, TestResult};

use crate::stats::{mean, median, percentile_sorted, std_dev};

#[derive(Debug, Error)]
pub enum AssocError {
    #[error("variable '{0}' not in cohort table")]
    MissingVariable(String),
    #[error("stratifying on '{0}' leaves an empty group")]
    EmptyGroup(String),
    #[error("groups too small for a test: {a} vs {b}")]
    GroupSize { a: usize, b: usize },
    #[error("zero variance in '{0}'")]
    ZeroVariance(String),
    #[error("PSQI score {0} outside 0..=21")]
    Psqi(u32),
    #[error("empty {0}")]
    Empty(String),
    #[error("{0}")]
    Shape(String),
    #[error("invalid scheme: {0}")]
    Scheme(String),
    #[error("cohort table: {0}")]
    Table(String),
}

/// One row per recording, numeric columns with missing values as `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortTable {
    pub ids: Vec<String>,
    pub columns: BTreeMap<String, Vec<Option<f64>>>,
}

fn parse_cell(s: &str) -> Result<Option<f64>, String> {
    let t = s.trim();
    if t.is_empty() || ["na", "nan", "null", "none"].contains(&t.to_ascii_lowercase().as_str()) {
        return Ok(None);
    }
    match t.to_ascii_lowercase().as_str() {
        "true" | "yes" => return Ok(Some(1.0)),
        "false" | "no" => return Ok(Some(0.0)),
        _ => {}
    }
    t.parse::<f64>().map(Some).map_err(|_| format!("'{t}' is not numeric"))
}

impl CohortTable {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>], AssocError> {
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| AssocError::MissingVariable(name.to_string()))
    }

    pub fn push_row(&mut self, id: &str, values: &BTreeMap<String, Option<f64>>) {
        let n = self.ids.len();
        for k in values.keys() {
            self.columns.entry(k.clone()).or_insert_with(|| vec![None; n]);
        }
        for (k, col) in self.columns.iter_mut() {
            col.push(values.get(k).copied().flatten());
        }
        self.ids.push(id.to_string());
    }

    /// Delimited text with a header; the first column is the record id.
    pub fn read_csv<R: Read>(reader: R, delimiter: u8) -> Result<Self, AssocError> {
        let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> =
            rdr.headers().map_err(|e| AssocError::Table(e.to_string()))?.iter().map(String::from).collect();
        if headers.len() < 2 {
            return Err(AssocError::Table("need an id column and at least one variable".into()));
        }
        let mut table = CohortTable {
            ids: Vec::new(),
            columns: headers[1..].iter().map(|h| (h.clone(), Vec::new())).collect(),
        };
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| AssocError::Table(e.to_string()))?;
            table.ids.push(rec.get(0).unwrap_or("").to_string());
            for (j, h) in headers.iter().enumerate().skip(1) {
                let v = parse_cell(rec.get(j).unwrap_or(""))
                    .map_err(|e| AssocError::Table(format!("row {}: column {h}: {e}", line + 2)))?;
                table.columns.get_mut(h).unwrap().push(v);
            }
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend(self.columns.keys().cloned());
        w.write_record(&header).unwrap();
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.columns.values().map(|c| c[i].map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&row).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Present (> 0) vs absent.
    BinaryEvent,
    /// Rate ≥ threshold vs below.
    ThresholdBurden,
    /// ≥ median vs below.
    MedianSplit,
    /// ≥ upper percentile vs ≤ lower percentile; the middle is dropped.
    QuantileSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratificationScheme {
    pub kind: SchemeKind,
    pub variable: String,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub quantiles: Option<[f64; 2]>,
    /// Display names of group A and group B.
    #[serde(default)]
    pub labels: Option<[String; 2]>,
}

impl StratificationScheme {
    pub fn new(kind: SchemeKind, variable: &str) -> Self {
        StratificationScheme { kind, variable: variable.to_string(), threshold: None, quantiles: None, labels: None }
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn frequent_pvc() -> Self {
        Self::new(SchemeKind::ThresholdBurden, "PVC_per_hour")
            .with_threshold(21.0)
            .labelled("Frequent PVC", "Non-frequent PVC")
    }

    pub fn frequent_pac() -> Self {
        Self::new(SchemeKind::ThresholdBurden, "PAC_per_hour")
            .with_threshold(30.0)
            .labelled("Frequent PAC", "Non-frequent PAC")
    }

    pub fn labelled(mut self, a: &str, b: &str) -> Self {
        self.labels = Some([a.to_string(), b.to_string()]);
        self
    }

    pub fn group_labels(&self) -> [String; 2] {
        self.labels.clone().unwrap_or_else(|| {
            let v = &self.variable;
            match self.kind {
                SchemeKind::BinaryEvent => [format!("{v} present"), format!("{v} absent")],
                SchemeKind::ThresholdBurden => [format!("{v} high"), format!("{v} low")],
                SchemeKind::MedianSplit => [format!("{v} >= median"), format!("{v} < median")],
                SchemeKind::QuantileSplit => [format!("High {v}"), format!("Low {v}")],
            }
        })
    }

    pub fn validate(&self) -> Result<(), AssocError> {
        if let Some(t) = self.threshold {
            if !t.is_finite() {
                return Err(AssocError::Scheme(format!("threshold {t}")));
            }
        }
        if self.kind == SchemeKind::ThresholdBurden && self.threshold.is_none() {
            return Err(AssocError::Scheme("threshold_burden needs a threshold".into()));
        }
        if let Some([lo, hi]) = self.quantiles {
            if !(0.0 <= lo && lo < hi && hi <= 100.0) {
                return Err(AssocError::Scheme(format!("quantiles [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Row indices of group A and group B. Rows missing the variable are in
/// neither.
pub fn stratify(table: &CohortTable, scheme: &StratificationScheme) -> Result<(Vec<usize>, Vec<usize>), AssocError> {
    scheme.validate()?;
    let col = table.column(&scheme.variable)?;
    let present: Vec<(usize, f64)> = col.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    let values: Vec<f64> = present.iter().map(|p| p.1).collect();
    let (in_a, in_b): (Box<dyn Fn(f64) -> bool>, Box<dyn Fn(f64) -> bool>) = match scheme.kind {
        SchemeKind::BinaryEvent => (Box::new(|v| v > 0.0), Box::new(|v| v <= 0.0)),
        SchemeKind::ThresholdBurden => {
            let t = scheme.threshold.unwrap();
            (Box::new(move |v| v >= t), Box::new(move |v| v < t))
        }
        SchemeKind::MedianSplit => {
            let m = median(&values).ok_or_else(|| AssocError::EmptyGroup(scheme.variable.clone()))?;
            (Box::new(move |v| v >= m), Box::new(move |v| v < m))
        }
        SchemeKind::QuantileSplit => {
            let [lo_q, hi_q] = scheme.quantiles.unwrap_or([25.0, 75.0]);
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let lo = percentile_sorted(&sorted, lo_q).ok_or_else(|| AssocError::EmptyGroup(scheme.variable.clone()))?;
            let hi = percentile_sorted(&sorted, hi_q).unwrap();
            (Box::new(move |v| v >= hi), Box::new(move |v| v <= lo))
        }
    };
    let a: Vec<usize> = present.iter().filter(|p| in_a(p.1)).map(|p| p.0).collect();
    let b: Vec<usize> = present.iter().filter(|p| in_b(p.1) && !in_a(p.1)).map(|p| p.0).collect();
    if a.is_empty() || b.is_empty() {
        return Err(AssocError::EmptyGroup(scheme.variable.clone()));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    /// Min, lower quartile, median, upper quartile, max.
    pub five_number: [f64; 5],
}

impl GroupSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let m = mean(values)?;
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| percentile_sorted(&s, p).unwrap();
        Some(GroupSummary {
            n: values.len(),
            mean: m,
            sd: std_dev(values, 1).unwrap_or(0.0),
            five_number: [q(0.0), q(25.0), q(50.0), q(75.0), q(100.0)],
        })
    }

    /// `mean ± sd` with two decimals.
    pub fn display(&self) -> String {
        format!("{:.2} ± {:.2}", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub metric: String,
    pub group_a: Option<GroupSummary>,
    pub group_b: Option<GroupSummary>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub p_display: String,
    pub test: String,
    /// Rows dropped for a missing metric value.
    pub missing: usize,
}

pub fn compare_groups(metric: &str, a: &[f64], b: &[f64], kind: TestKind) -> Result<GroupComparison, AssocError> {
    let r = two_sample_test(kind, a, b)?;
    Ok(GroupComparison {
        metric: metric.to_string(),
        group_a: GroupSummary::of(a),
        group_b: GroupSummary::of(b),
        statistic: Some(r.statistic),
        p_value: Some(r.p_value),
        p_display: format_p(r.p_value),
        test: kind.name().to_string(),
        missing: 0,
    })
}

/// Sleep rows of the per-stratum comparison tables, with display labels.
pub const SLEEP_COMPARISON_ROWS: [(&str, &str); 18] = [
    ("Age", "Age (years)"),
    ("BMI", "BMI (kg/m2)"),
    ("AHI", "AHI (events/h)"),
    ("ArI", "ArI (events/h)"),
    ("N1_TST", "N1 % of TST"),
    ("N2_TST", "N2 % of TST"),
    ("N3_TST", "N3 % of TST"),
    ("NREM_TST", "NREM % of TST"),
    ("REM_TST", "REM % of TST"),
    ("SE", "SE (%)"),
    ("SL", "SL (min)"),
    ("TIB", "TIB (min)"),
    ("TST", "TST (min)"),
    ("TTSP", "TTSP (min)"),
    ("WASO", "WASO (min)"),
    ("Wake_TIB", "Wake % of TIB"),
    ("ODI3", "ODI 3% (events/h)"),
    ("ODI4", "ODI 4% (events/h)"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub scheme: StratificationScheme,
    pub group_labels: [String; 2],
    pub n_a: usize,
    pub n_b: usize,
    pub test: String,
    pub rows: Vec<GroupComparison>,
}

/// Stratify once, then compare every metric with pairwise deletion. Rows
/// whose groups are too small carry no p value.
pub fn compare_cohort(
    table: &CohortTable,
    scheme: &StratificationScheme,
    metrics: &[&str],
    kind: TestKind,
) -> Result<ComparisonTable, AssocError> {
    let (ia, ib) = stratify(table, scheme)?;
    let mut rows = Vec::with_capacity(metrics.len());
    for &m in metrics {
        let Ok(col) = table.column(m) else {
            log::warn!("metric '{m}' missing from cohort table");
            rows.push(GroupComparison {
                metric: m.to_string(),
                group_a: None,
                group_b: None,
                statistic: None,
                p_value: None,
                p_display: "n/a".into(),
                test: kind.name().into(),
                missing: ia.len() + ib.len(),
            });
            continue;
        };
        let take = |idx: &[usize]| -> Vec<f64> { idx.iter().filter_map(|&i| col[i]).collect() };
        let (a, b) = (take(&ia), take(&ib));
        let missing = ia.len() + ib.len() - a.len() - b.len();
        let row = match compare_groups(m, &a, &b, kind) {
            Ok(mut r) => {
                r.missing = missing;
                r
            }
            Err(_) => GroupComparison {
                metric: m.to_string(),
                group_a: GroupSummary::of(&a),
                group_b: GroupSummary::of(&b),
                statistic: None,
                p_value: None,
                p_display: "n/a".into(),
                test: kind.name().into(),
                missing,
            },
        };
        rows.push(row);
    }
    Ok(ComparisonTable {
        group_labels: scheme.group_labels(),
        scheme: scheme.clone(),
        n_a: ia.len(),
        n_b: ib.len(),
        test: kind.name().into(),
        rows,
    })
}

impl ComparisonTable {
    /// Plain-text rendering: metric, `mean ± sd` per group, p.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "Metric\t{} (n={})\t{} (n={})\tP-value\n",
            self.group_labels[0], self.n_a, self.group_labels[1], self.n_b
        );
        for r in &self.rows {
            let label = SLEEP_COMPARISON_ROWS.iter().find(|(k, _)| *k == r.metric).map_or(r.metric.as_str(), |x| x.1);
            let cell = |g: &Option<GroupSummary>| g.as_ref().map_or("n/a".to_string(), GroupSummary::display);
            out.push_str(&format!("{label}\t{}\t{}\t{}\n", cell(&r.group_a), cell(&r.group_b), r.p_display));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(name: &str, values: &[f64]) -> CohortTable {
        let mut t = CohortTable::default();
        for (i, v) in values.iter().enumerate() {
            t.push_row(&format!("r{i}"), &BTreeMap::from([(name.to_string(), Some(*v))]));
        }
        t
    }

    #[test]
    fn frequent_pvc_example() {
        let t = table("PVC_per_hour", &[25.0, 10.0, 30.0, 5.0]);
        let (a, b) = stratify(&t, &StratificationScheme::frequent_pvc()).unwrap();
        assert_eq!((a, b), (vec![0, 2], vec![1, 3]));
    }

    #[test]
    fn median_split_degenerate() {
        let t = table("Avg_HR", &[64.0; 6]);
        let err = stratify(&t, &StratificationScheme::new(SchemeKind::MedianSplit, "Avg_HR")).unwrap_err();
        assert!(err.to_string().contains("Avg_HR"));
    }

    #[test]
    fn quantile_tails() {
        let t = table("SDANN", &[8.0, 3.0, 1.0, 6.0, 2.0, 7.0, 4.0, 5.0]);
        let (a, b) = stratify(&t, &StratificationScheme::new(SchemeKind::QuantileSplit, "SDANN")).unwrap();
        // order statistics: P25 = 2.75, P75 = 6.25
        let va: Vec<f64> = a.iter().map(|&i| t.columns["SDANN"][i].unwrap()).collect();
        let vb: Vec<f64> = b.iter().map(|&i| t.columns["SDANN"][i].unwrap()).collect();
        assert_eq!((va, vb), (vec![8.0, 7.0], vec![1.0, 2.0]));
    }

    #[test]
    fn binary_event_and_missing() {
        let mut t = table("AF", &[0.0, 1.0, 0.0, 2.0]);
        t.columns.get_mut("AF").unwrap()[2] = None;
        let (a, b) = stratify(&t, &StratificationScheme::new(SchemeKind::BinaryEvent, "AF")).unwrap();
        assert_eq!((a, b), (vec![1, 3], vec![0]));
        assert!(matches!(
            stratify(&t, &StratificationScheme::new(SchemeKind::BinaryEvent, "VT")),
            Err(AssocError::MissingVariable(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let text = "id,PVC_per_hour,SE\nr1,25,80.5\nr2,NA,70\nr3,3,\n";
        let t = CohortTable::read_csv(text.as_bytes(), b',').unwrap();
        assert_eq!(t.ids, vec!["r1", "r2", "r3"]);
        assert_eq!(t.columns["PVC_per_hour"], vec![Some(25.0), None, Some(3.0)]);
        assert_eq!(t.columns["SE"], vec![Some(80.5), Some(70.0), None]);
        let back = CohortTable::read_csv(t.to_csv().as_bytes(), b',').unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn table_render() {
        let mut t = CohortTable::default();
        for i in 0..40 {
            let mut row = BTreeMap::new();
            row.insert("PVC_per_hour".to_string(), Some(if i % 4 == 0 { 40.0 } else { 2.0 }));
            row.insert("SE".to_string(), Some(60.0 + (i % 7) as f64));
            t.push_row(&format!("r{i}"), &row);
        }
        let c = compare_cohort(&t, &StratificationScheme::frequent_pvc(), &["SE", "TST"], TestKind::MannWhitney).unwrap();
        assert_eq!((c.n_a, c.n_b), (10, 30));
        assert_eq!(c.rows[1].p_display, "n/a");
        let text = c.render_text();
        assert!(text.starts_with("Metric\tFrequent PVC (n=10)\tNon-frequent PVC (n=30)\tP-value\n"));
        assert!(text.contains("SE (%)\t"));
    }

    proptest! {
        #[test]
        fn partitions(values in prop::collection::vec(0.0f64..50.0, 4..60), kind in 0usize..4) {
            let t = table("x", &values);
            let scheme = match kind {
                0 => StratificationScheme::new(SchemeKind::BinaryEvent, "x"),
                1 => StratificationScheme::new(SchemeKind::ThresholdBurden, "x").with_threshold(21.0),
                2 => StratificationScheme::new(SchemeKind::MedianSplit, "x"),
                _ => StratificationScheme::new(SchemeKind::QuantileSplit, "x"),
            };
            if let Ok((a, b)) = stratify(&t, &scheme) {
                prop_assert!(a.iter().all(|i| !b.contains(i)));
                if kind != 3 {
                    prop_assert_eq!(a.len() + b.len(), values.len());
                }
            }
        }
    }
}
