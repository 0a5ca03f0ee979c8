//! Tab-separated results table: one row per method and dimension, columns
//! for each metric under each feature set.

use std::fmt::Write;

use crate::eval::cv::mean_std;
use crate::eval::metrics::MetricsReport;
use crate::features::FeatureSet;
use crate::observation::Dimension;

#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    /// Written as a leading `#` comment line.
    pub note: String,
    entries: Vec<(String, FeatureSet, Vec<MetricsReport>)>,
}

impl ResultsTable {
    pub fn new(note: impl Into<String>) -> Self {
        ResultsTable { note: note.into(), entries: Vec::new() }
    }

    /// Add one report (one seed) for a method under a feature set.
    pub fn add(&mut self, method: &str, set: FeatureSet, report: MetricsReport) {
        match self.entries.iter_mut().find(|(m, s, _)| m == method && *s == set) {
            Some(e) => e.2.push(report),
            None => self.entries.push((method.to_string(), set, vec![report])),
        }
    }

    fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (m, _, _) in &self.entries {
            if !out.contains(&m.as_str()) {
                out.push(m);
            }
        }
        out
    }

    fn cell(&self, method: &str, set: FeatureSet, value: impl Fn(&MetricsReport) -> f64) -> String {
        match self.entries.iter().find(|(m, s, _)| m == method && *s == set) {
            None => "-".into(),
            Some((_, _, reports)) if reports.len() == 1 => format!("{:.3}", value(&reports[0])),
            Some((_, _, reports)) => {
                let ms = mean_std(&reports.iter().map(value).collect::<Vec<_>>());
                format!("{:.3}±{:.3}", ms.mean, ms.std)
            }
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if !self.note.is_empty() {
            writeln!(out, "# {}", self.note).unwrap();
        }
        out.push_str("dimension\tmethod");
        for metric in ["F1", "Acc", "MAE"] {
            for set in FeatureSet::ALL {
                write!(out, "\t{metric} {}", set.short_name()).unwrap();
            }
        }
        out.push('\n');
        let dims: Vec<Option<Dimension>> = Dimension::ALL.iter().copied().map(Some).chain([None]).collect();
        for d in dims {
            for m in self.methods() {
                out.push_str(d.map_or("mean", Dimension::name));
                write!(out, "\t{m}").unwrap();
                for metric in 0..3 {
                    for set in FeatureSet::ALL {
                        let c = self.cell(m, set, |r| {
                            let (f1, acc, mae) = match d {
                                Some(d) => (r.dimension(d).f1, r.dimension(d).accuracy, r.dimension(d).mae),
                                None => (r.f1_macro, r.accuracy, r.mae),
                            };
                            [f1, acc, mae][metric]
                        });
                        write!(out, "\t{c}").unwrap();
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}
