//! Serving state for the annotation study. Every accepted record is
//! appended to a log file and synced before the in-memory state changes, so
//! replaying the log reconstructs the state after a restart.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::plan::AssignmentPlan;
use crate::annotate::record::{AnnotationRecord, Stage};
use crate::dataio::annotations::parse_annotations;
use crate::error::{Error, Result};
use crate::eval::human::{aggregate_human_baseline, ConditionBaseline};
use crate::features::FeatureSet;
use crate::labels::Binarizer;
use crate::observation::Ratings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Assignment {
    Task {
        sample_id: String,
        condition: FeatureSet,
        stage: Stage,
        stage_index: usize,
        stages: Vec<Stage>,
        form_unlocked: bool,
        trace_url: String,
    },
    Complete {
        status: String,
    },
}

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("annotation already recorded")]
    Duplicate,
    #[error("{0}")]
    Invalid(String),
    #[error("could not persist annotation: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    #[serde(flatten)]
    pub baseline: ConditionBaseline,
    pub expected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub expected: usize,
    pub conditions: Vec<ConditionStats>,
}

type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

fn system_clock() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

pub struct AnnotationService {
    plan: AssignmentPlan,
    truth: HashMap<String, Ratings>,
    binarizer: Binarizer,
    records: Vec<AnnotationRecord>,
    done: HashSet<(String, String, FeatureSet)>,
    progress: HashMap<String, usize>,
    viewed: HashMap<String, usize>,
    log: Option<(PathBuf, File)>,
    clock: Clock,
}

impl AnnotationService {
    /// In-memory service with no log file.
    pub fn new(plan: AssignmentPlan, truth: HashMap<String, Ratings>) -> Result<Self> {
        plan.validate()?;
        if let Some(s) = plan.sample_ids.iter().find(|s| !truth.contains_key(*s)) {
            return Err(Error::UnknownSample(s.clone()));
        }
        Ok(AnnotationService {
            plan,
            truth,
            binarizer: Binarizer::default(),
            records: Vec::new(),
            done: HashSet::new(),
            progress: HashMap::new(),
            viewed: HashMap::new(),
            log: None,
            clock: Arc::new(system_clock),
        })
    }

    /// Open (or create) the log at `path` and replay any records in it. A
    /// trailing partial line left by an interrupted write is discarded.
    pub fn open(plan: AssignmentPlan, truth: HashMap<String, Ratings>, path: &Path) -> Result<Self> {
        let mut svc = Self::new(plan, truth)?;
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let complete = match text.rfind('\n') {
                Some(i) => &text[..=i],
                None => "",
            };
            if complete.len() != text.len() {
                let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
                f.set_len(complete.len() as u64).map_err(|e| Error::io(path, e))?;
            }
            for r in parse_annotations(complete, &path.display().to_string())? {
                svc.check_matches_assignment(&r).map_err(|e| Error::Config(format!("log does not match plan: {e}")))?;
                svc.apply(r);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        svc.log = Some((path.to_path_buf(), file));
        Ok(svc)
    }

    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn plan(&self) -> &AssignmentPlan {
        &self.plan
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    fn current(&self, annotator: &str) -> Option<(&str, FeatureSet)> {
        let q = self.plan.queues.get(annotator)?;
        let i = self.progress.get(annotator).copied().unwrap_or(0);
        q.samples.get(i).map(|s| (s.as_str(), q.condition))
    }

    pub fn is_known(&self, annotator: &str) -> bool {
        self.plan.queues.contains_key(annotator)
    }

    /// The annotator's current assignment. It stays the same until a
    /// record for it is accepted.
    pub fn next_assignment(&self, annotator: &str) -> Result<Assignment> {
        if !self.is_known(annotator) {
            return Err(Error::Config(format!("unknown annotator `{annotator}`")));
        }
        let Some((sample, condition)) = self.current(annotator) else {
            return Ok(Assignment::Complete { status: "complete".into() });
        };
        let stages = Stage::sequence(condition);
        let viewed = self.viewed.get(annotator).copied().unwrap_or(0);
        let idx = viewed.min(stages.len() - 1);
        Ok(Assignment::Task {
            sample_id: sample.to_string(),
            condition,
            stage: stages[idx],
            stage_index: idx,
            stages: stages.to_vec(),
            form_unlocked: viewed >= stages.len(),
            trace_url: format!("/api/trace/{sample}?view={}&annotator={annotator}", stages[idx]),
        })
    }

    /// Record that `annotator` viewed `stage` of `sample`. Only the next
    /// unviewed stage of the current assignment advances progress; replays
    /// of earlier stages are allowed and change nothing. Returns whether
    /// progress advanced.
    pub fn mark_viewed(&mut self, annotator: &str, sample: &str, stage: Stage) -> bool {
        let Some((cur, condition)) = self.current(annotator) else {
            return false;
        };
        if cur != sample {
            return false;
        }
        let stages = Stage::sequence(condition);
        let v = self.viewed.entry(annotator.to_string()).or_insert(0);
        if *v < stages.len() && stages[*v] == stage {
            *v += 1;
            true
        } else {
            false
        }
    }

    fn check_matches_assignment(&self, r: &AnnotationRecord) -> std::result::Result<(), SubmitError> {
        if self.done.contains(&(r.annotator_id.clone(), r.sample_id.clone(), r.condition)) {
            return Err(SubmitError::Duplicate);
        }
        if !self.truth.contains_key(&r.sample_id) {
            return Err(SubmitError::Invalid(format!("unknown sample `{}`", r.sample_id)));
        }
        match self.current(&r.annotator_id) {
            None if !self.is_known(&r.annotator_id) => {
                Err(SubmitError::Invalid(format!("unknown annotator `{}`", r.annotator_id)))
            }
            None => Err(SubmitError::Invalid("annotator has no open assignment".into())),
            Some((s, c)) if s != r.sample_id || c != r.condition => Err(SubmitError::Invalid(format!(
                "current assignment is {s} under {c}, not {} under {}",
                r.sample_id, r.condition
            ))),
            Some(_) => Ok(()),
        }
    }

    fn apply(&mut self, r: AnnotationRecord) {
        self.done.insert((r.annotator_id.clone(), r.sample_id.clone(), r.condition));
        *self.progress.entry(r.annotator_id.clone()).or_insert(0) += 1;
        self.viewed.remove(&r.annotator_id);
        self.records.push(r);
    }

    /// Validate, persist, then advance the annotator's queue.
    pub fn submit(&mut self, mut record: AnnotationRecord) -> std::result::Result<AnnotationRecord, SubmitError> {
        self.check_matches_assignment(&record)?;
        let needed = Stage::sequence(record.condition).len();
        if self.viewed.get(&record.annotator_id).copied().unwrap_or(0) < needed {
            return Err(SubmitError::Invalid("all stages must be viewed before rating".into()));
        }
        record.submitted_at = Some((self.clock)());
        if let Some((path, file)) = &mut self.log {
            let mut line = serde_json::to_string(&record).map_err(|e| SubmitError::Storage(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|e| SubmitError::Storage(format!("{}: {e}", path.display())))?;
        }
        self.apply(record.clone());
        Ok(record)
    }

    pub fn stats(&self) -> Result<StatsReport> {
        let baselines = aggregate_human_baseline(&self.records, &self.truth, &self.binarizer)?;
        let conditions = baselines
            .into_iter()
            .map(|b| {
                let expected =
                    self.plan.queues.values().filter(|q| q.condition == b.condition).map(|q| q.samples.len()).sum();
                ConditionStats { baseline: b, expected }
            })
            .collect();
        Ok(StatsReport { total: self.records.len(), expected: self.plan.total_assignments(), conditions })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (AssignmentPlan, HashMap<String, Ratings>) {
        let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        let plan = AssignmentPlan::build(&ids, &[FeatureSet::NavOnly, FeatureSet::NavPlusFacial], 2, 2).unwrap();
        let truth = ids.iter().enumerate().map(|(i, s)| (s.clone(), Ratings::new(1 + i as i64, 2, 3).unwrap())).collect();
        (plan, truth)
    }

    fn record(a: &str, asg: &Assignment, p: Ratings) -> AnnotationRecord {
        let Assignment::Task { sample_id, condition, .. } = asg else { panic!("complete") };
        AnnotationRecord {
            annotator_id: a.into(),
            sample_id: sample_id.clone(),
            condition: *condition,
            predictions: p,
            submitted_at: None,
            elapsed_ms: 100,
        }
    }

    #[test]
    fn single_stage_flow() {
        let (plan, truth) = setup();
        let mut svc = AnnotationService::new(plan, truth).unwrap().with_clock(|| 7);
        let a = svc.next_assignment("nav-000").unwrap();
        assert_eq!(svc.next_assignment("nav-000").unwrap(), a);
        let Assignment::Task { ref sample_id, stage, form_unlocked, .. } = a else { panic!() };
        assert_eq!((stage, form_unlocked), (Stage::Nav, false));
        let r = record("nav-000", &a, Ratings::new(1, 2, 3).unwrap());
        assert!(matches!(svc.submit(r.clone()), Err(SubmitError::Invalid(_))));
        assert!(svc.mark_viewed("nav-000", sample_id, Stage::Nav));
        let stored = svc.submit(r.clone()).unwrap();
        assert_eq!(stored.submitted_at, Some(7));
        assert!(matches!(svc.submit(r), Err(SubmitError::Duplicate)));
        assert_ne!(svc.next_assignment("nav-000").unwrap(), a);
    }

    #[test]
    fn combined_condition_enforces_order() {
        let (plan, truth) = setup();
        let mut svc = AnnotationService::new(plan, truth).unwrap();
        let a = svc.next_assignment("both-000").unwrap();
        let Assignment::Task { sample_id, stages, .. } = a.clone() else { panic!() };
        assert_eq!(stages, vec![Stage::Nav, Stage::Facial, Stage::Combined]);
        assert!(!svc.mark_viewed("both-000", &sample_id, Stage::Combined));
        assert!(svc.mark_viewed("both-000", &sample_id, Stage::Nav));
        assert!(!svc.mark_viewed("both-000", &sample_id, Stage::Nav));
        assert!(svc.mark_viewed("both-000", &sample_id, Stage::Facial));
        let Assignment::Task { stage, form_unlocked, .. } = svc.next_assignment("both-000").unwrap() else { panic!() };
        assert_eq!((stage, form_unlocked), (Stage::Combined, false));
        let r = record("both-000", &a, Ratings::new(1, 2, 3).unwrap());
        assert!(svc.submit(r.clone()).is_err());
        assert!(svc.mark_viewed("both-000", &sample_id, Stage::Combined));
        assert!(matches!(svc.next_assignment("both-000").unwrap(), Assignment::Task { form_unlocked: true, .. }));
        svc.submit(r).unwrap();
    }

    #[test]
    fn log_replay_restores_state() {
        let (plan, truth) = setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.log");
        let mut svc = AnnotationService::open(plan.clone(), truth.clone(), &path).unwrap();
        let mut accepted = 0;
        while let Assignment::Task { sample_id, condition, .. } = svc.next_assignment("nav-001").unwrap() {
            svc.mark_viewed("nav-001", &sample_id, Stage::Nav);
            let r = AnnotationRecord {
                annotator_id: "nav-001".into(),
                sample_id: sample_id.clone(),
                condition,
                predictions: truth[&sample_id],
                submitted_at: None,
                elapsed_ms: 5,
            };
            svc.submit(r).unwrap();
            accepted += 1;
        }
        let before = svc.stats().unwrap();
        drop(svc);
        std::fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"annotator_id\":\"x").unwrap();
        let svc = AnnotationService::open(plan, truth, &path).unwrap();
        assert_eq!(svc.records().len(), accepted);
        assert_eq!(svc.stats().unwrap(), before);
        assert_eq!(svc.next_assignment("nav-001").unwrap(), Assignment::Complete { status: "complete".into() });
        let nav = &before.conditions[1];
        assert_eq!(nav.baseline.multiclass.as_ref().unwrap().f1_macro, 1.0);
    }

    #[test]
    fn empty_stats() {
        let (plan, truth) = setup();
        let svc = AnnotationService::new(plan, truth).unwrap();
        let s = svc.stats().unwrap();
        assert_eq!(s.total, 0);
        assert!(s.conditions.iter().all(|c| c.baseline.n == 0 && c.baseline.multiclass.is_none()));
        assert!(svc.next_assignment("nobody").is_err());
    }
}
