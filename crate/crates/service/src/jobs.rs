//! In-memory job registry. Jobs do not survive a restart; their results do,
//! in the run store.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_finished(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    /// Generations completed (optimize) or cases finished (screening).
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobHandle {
    pub id: String,
    /// `optimize` or `screening`.
    pub kind: String,
    pub case_id: String,
    pub state: JobState,
    pub progress: Progress,
    /// Stored run, set once the job is done.
    pub run_id: Option<String>,
    pub error: Option<String>,
}

#[derive(Default)]
struct Inner {
    jobs: HashMap<String, JobHandle>,
    order: Vec<String>,
    /// Run id to the job computing or holding it.
    by_run: HashMap<String, String>,
    /// Run id each job will produce.
    target: HashMap<String, String>,
    next: u64,
}

impl Inner {
    fn insert(&mut self, kind: &str, case_id: &str, run_id: &str, state: JobState, total: usize) -> JobHandle {
        self.next += 1;
        let id = format!("job-{}", self.next);
        let done = state == JobState::Done;
        let handle = JobHandle {
            id: id.clone(),
            kind: kind.to_string(),
            case_id: case_id.to_string(),
            state,
            progress: Progress {
                done: if done { total } else { 0 },
                total,
            },
            run_id: done.then(|| run_id.to_string()),
            error: None,
        };
        self.jobs.insert(id.clone(), handle.clone());
        self.order.push(id.clone());
        self.by_run.insert(run_id.to_string(), id.clone());
        self.target.insert(id, run_id.to_string());
        handle
    }
}

/// Synchronized job map with forward-only state transitions.
#[derive(Default)]
pub struct JobRegistry {
    inner: Mutex<Inner>,
}

impl JobRegistry {
    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Queues a job for `run_id`. Fails with the existing handle when an
    /// identical job is queued or running.
    pub fn submit(&self, kind: &str, case_id: &str, run_id: &str, total: usize) -> Result<JobHandle, JobHandle> {
        let mut inner = self.lock();
        if let Some(existing) = inner.by_run.get(run_id).and_then(|id| inner.jobs.get(id)) {
            if !existing.state.is_finished() {
                return Err(existing.clone());
            }
        }
        Ok(inner.insert(kind, case_id, run_id, JobState::Queued, total))
    }

    /// Handle for a run that is already stored. Reuses the finished job
    /// that produced it when there is one.
    pub fn completed(&self, kind: &str, case_id: &str, run_id: &str, total: usize) -> JobHandle {
        let mut inner = self.lock();
        if let Some(existing) = inner.by_run.get(run_id).and_then(|id| inner.jobs.get(id)) {
            if existing.state == JobState::Done {
                return existing.clone();
            }
        }
        inner.insert(kind, case_id, run_id, JobState::Done, total)
    }

    fn advance(&self, id: &str, state: JobState, f: impl FnOnce(&mut JobHandle, Option<&String>)) {
        let mut inner = self.lock();
        let Inner { jobs, target, .. } = &mut *inner;
        if let Some(job) = jobs.get_mut(id) {
            if state > job.state && !job.state.is_finished() {
                job.state = state;
                f(job, target.get(id));
            }
        }
    }

    pub fn start(&self, id: &str) {
        self.advance(id, JobState::Running, |_, _| {});
    }

    /// Raises the progress counter; lower values are ignored.
    pub fn progress(&self, id: &str, done: usize) {
        let mut inner = self.lock();
        if let Some(job) = inner.jobs.get_mut(id) {
            if !job.state.is_finished() {
                job.progress.done = job.progress.done.max(done.min(job.progress.total));
            }
        }
    }

    pub fn finish(&self, id: &str) {
        self.advance(id, JobState::Done, |job, run| {
            job.progress.done = job.progress.total;
            job.run_id = run.cloned();
        });
    }

    pub fn fail(&self, id: &str, error: String) {
        self.advance(id, JobState::Failed, |job, _| job.error = Some(error));
    }

    pub fn get(&self, id: &str) -> Option<JobHandle> {
        self.lock().jobs.get(id).cloned()
    }

    /// Every job in submission order.
    pub fn list(&self) -> Vec<JobHandle> {
        let inner = self.lock();
        inner.order.iter().filter_map(|id| inner.jobs.get(id).cloned()).collect()
    }
}
