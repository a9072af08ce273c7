//! The scripted agent: baseline, promoting phase, debunking phase, teardown.
//!
//! A run talks to the platform only through [`PlatformAdapter`]. Every probe
//! result is streamed to a [`RunSink`] as soon as it exists, so an
//! interrupted run still leaves a usable prefix on disk.

pub mod clock;
pub mod study;

use std::io;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    ExposureSnapshot, Minutes, Phase, ProcessParameters, ResumeCursor, RunRecord, RunStatus, SnapshotKind, Topic,
    VideoId, WatchEvent,
};
use crate::platform::{PlatformError, Session};
use crate::record::{RunHeader, RunSink};
use crate::seed::derive_seed;
pub use clock::{Clock, RealClock, TimeMode, VirtualClock};
pub use study::{plan_study, run_study, simulator_factory, RunOutcome, SeedSets, StudyPlan};

/// Attempts after the first failure of an adapter call.
pub const MAX_RETRIES: u32 = 3;
/// Listing length requested from the platform.
pub const LISTING_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    #[error("video {0} does not exist")]
    NotFound(VideoId),
    /// The platform refused the request; retrying will not help.
    #[error("request rejected: {0}")]
    Rejected(String),
    /// Transient failure, worth retrying.
    #[error("platform unavailable: {0}")]
    Unavailable(String),
}

impl From<PlatformError> for AdapterError {
    fn from(e: PlatformError) -> Self {
        match e {
            PlatformError::UnknownVideo(v) => AdapterError::NotFound(v),
            other => AdapterError::Rejected(other.to_string()),
        }
    }
}

/// The side-effecting surface of a platform.
pub trait PlatformAdapter {
    fn login(&mut self) -> Result<(), AdapterError> {
        Ok(())
    }
    fn accept_cookies(&mut self) -> Result<(), AdapterError> {
        Ok(())
    }
    fn search(&mut self, query: &str) -> Result<Vec<VideoId>, AdapterError>;
    /// Watches a video; returns the watch-page recommendations and the home page.
    fn watch(&mut self, video: &VideoId, minutes: Minutes) -> Result<(Vec<VideoId>, Vec<VideoId>), AdapterError>;
    fn home(&mut self) -> Result<Vec<VideoId>, AdapterError>;
    fn reset(&mut self) -> Result<(), AdapterError>;
    fn video_duration(&mut self, video: &VideoId) -> Result<Minutes, AdapterError>;
}

/// Adapter over a simulator session.
pub struct SimulatorAdapter {
    pub session: Session,
}

impl PlatformAdapter for SimulatorAdapter {
    fn search(&mut self, query: &str) -> Result<Vec<VideoId>, AdapterError> {
        Ok(self.session.search(query, LISTING_LIMIT)?)
    }

    fn watch(&mut self, video: &VideoId, minutes: Minutes) -> Result<(Vec<VideoId>, Vec<VideoId>), AdapterError> {
        Ok(self.session.watch(video, minutes, LISTING_LIMIT)?)
    }

    fn home(&mut self) -> Result<Vec<VideoId>, AdapterError> {
        Ok(self.session.home(LISTING_LIMIT))
    }

    fn reset(&mut self) -> Result<(), AdapterError> {
        self.session.reset_history();
        Ok(())
    }

    fn video_duration(&mut self, video: &VideoId) -> Result<Minutes, AdapterError> {
        self.session
            .catalog()
            .video(video)
            .map(|v| v.duration)
            .ok_or_else(|| AdapterError::NotFound(video.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub run_id: String,
    pub topic: Topic,
    /// V_prom, in configuration order; the run watches a permutation of it.
    pub seed_promoting: Vec<VideoId>,
    /// V_deb
    pub seed_debunking: Vec<VideoId>,
    pub queries: Vec<String>,
    pub parameters: ProcessParameters,
    pub agent_seed: u64,
    pub time_mode: TimeMode,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("run {run_id}: {reason}")]
    InvalidConfig { run_id: String, reason: String },
    #[error("run {run_id}: seed video {video} is missing from the platform")]
    MissingSeedVideo { run_id: String, video: VideoId },
    #[error("run {run_id}: writing the record failed: {source}")]
    Sink { run_id: String, source: io::Error },
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let p = &self.parameters;
        let invalid = |reason: String| ScenarioError::InvalidConfig { run_id: self.run_id.clone(), reason };
        p.validate().map_err(|e| invalid(e.to_string()))?;
        if self.seed_promoting.len() != p.n_prom as usize {
            return Err(invalid(format!("{} promoting seeds, n_prom is {}", self.seed_promoting.len(), p.n_prom)));
        }
        if self.seed_debunking.len() != p.n_deb as usize {
            return Err(invalid(format!("{} debunking seeds, n_deb is {}", self.seed_debunking.len(), p.n_deb)));
        }
        if self.queries.len() != p.n_q as usize {
            return Err(invalid(format!("{} queries, n_q is {}", self.queries.len(), p.n_q)));
        }
        Ok(())
    }

    /// Seed of the platform session this run should use.
    pub fn session_seed(&self) -> u64 {
        derive_seed(self.agent_seed, "session")
    }
}

/// Progress bookkeeping plus the record under construction.
struct Runner<'a> {
    config: &'a AgentConfig,
    adapter: &'a mut dyn PlatformAdapter,
    sink: &'a mut dyn RunSink,
    clock: Box<dyn Clock>,
    rng: ChaCha8Rng,
    record: RunRecord,
    phase: Phase,
}

enum Halt {
    Adapter(AdapterError),
    Sink(io::Error),
}

impl Runner<'_> {
    fn call<T>(&mut self, mut op: impl FnMut(&mut dyn PlatformAdapter) -> Result<T, AdapterError>) -> Result<T, Halt> {
        let mut attempt = 0;
        loop {
            match op(self.adapter) {
                Ok(v) => return Ok(v),
                Err(AdapterError::Unavailable(reason)) if attempt < MAX_RETRIES => {
                    log::warn!("run {}: {reason}; retry {}", self.config.run_id, attempt + 1);
                    self.clock.sleep(Minutes::whole(1 << attempt));
                    attempt += 1;
                }
                Err(e) => return Err(Halt::Adapter(e)),
            }
        }
    }

    fn watches(&self) -> u32 {
        self.record.watch_sequence.len() as u32
    }

    fn snapshot(&mut self, kind: SnapshotKind, query: Option<String>, ids: Vec<VideoId>) -> Result<(), Halt> {
        let snap = ExposureSnapshot::from_ids(&self.config.run_id, kind, query, self.watches(), self.phase, ids);
        self.sink.snapshot(&snap).map_err(Halt::Sink)?;
        self.record.snapshots.push(snap);
        Ok(())
    }

    fn search_phase(&mut self) -> Result<(), Halt> {
        let mut queries = self.config.queries.clone();
        queries.shuffle(&mut self.rng);
        for q in queries {
            let results = self.call(|a| a.search(&q))?;
            self.snapshot(SnapshotKind::Search, Some(q), results)?;
            self.clock.sleep(Minutes::whole(self.config.parameters.t_wait));
        }
        Ok(())
    }

    fn watch_phase(&mut self, phase: Phase, seeds: &[VideoId]) -> Result<(), Halt> {
        self.phase = phase;
        let mut order = seeds.to_vec();
        order.shuffle(&mut self.rng);
        let t_watch = Minutes::whole(self.config.parameters.t_watch);
        for (j, video) in order.iter().enumerate() {
            let duration = self.call(|a| a.video_duration(video))?;
            let minutes = duration.min(t_watch);
            let (recs, home) = self.call(|a| a.watch(video, minutes))?;
            self.clock.sleep(minutes);
            let event = WatchEvent { phase, video_id: video.clone(), watched: minutes };
            self.sink.watch(&event).map_err(Halt::Sink)?;
            self.record.watch_sequence.push(event);
            self.snapshot(SnapshotKind::Recommendation, None, recs)?;
            self.snapshot(SnapshotKind::Home, None, home)?;
            if (j as u32 + 1).is_multiple_of(self.config.parameters.f_q) {
                self.search_phase()?;
            }
        }
        Ok(())
    }

    fn script(&mut self) -> Result<(), Halt> {
        self.call(|a| a.login())?;
        self.call(|a| a.accept_cookies())?;
        self.phase = Phase::Baseline;
        let home = self.call(|a| a.home())?;
        self.snapshot(SnapshotKind::Home, None, home)?;
        self.search_phase()?;
        let prom = self.config.seed_promoting.clone();
        self.watch_phase(Phase::Promoting, &prom)?;
        let deb = self.config.seed_debunking.clone();
        self.watch_phase(Phase::Debunking, &deb)?;
        self.call(|a| a.reset())?;
        Ok(())
    }
}

/// Executes one run.
///
/// Adapter failures that survive the retries end the run with a failed
/// status and a resume cursor; the partial record is still returned.
pub fn run_scenario(
    config: &AgentConfig,
    adapter: &mut dyn PlatformAdapter,
    sink: &mut dyn RunSink,
) -> Result<RunRecord, ScenarioError> {
    config.validate()?;
    let run_id = config.run_id.clone();
    for video in config.seed_promoting.iter().chain(&config.seed_debunking) {
        if let Err(AdapterError::NotFound(_)) = adapter.video_duration(video) {
            return Err(ScenarioError::MissingSeedVideo { run_id, video: video.clone() });
        }
    }
    let sink_err = |source| ScenarioError::Sink { run_id: config.run_id.clone(), source };
    sink.begin(&RunHeader::new(&config.run_id, &config.topic.topic_id, config.agent_seed, &config.parameters))
        .map_err(sink_err)?;

    let mut runner = Runner {
        config,
        adapter,
        sink,
        clock: config.time_mode.clock(),
        rng: ChaCha8Rng::seed_from_u64(derive_seed(config.agent_seed, "agent")),
        record: RunRecord {
            run_id: config.run_id.clone(),
            topic_id: config.topic.topic_id.clone(),
            agent_seed: config.agent_seed,
            parameters: config.parameters.clone(),
            watch_sequence: Vec::new(),
            snapshots: Vec::new(),
            status: RunStatus::Completed,
        },
        phase: Phase::Baseline,
    };
    let status = match runner.script() {
        Ok(()) => RunStatus::Completed,
        Err(Halt::Sink(e)) => return Err(sink_err(e)),
        Err(Halt::Adapter(e)) => {
            log::error!("run {}: {e}", config.run_id);
            RunStatus::Failed {
                reason: e.to_string(),
                cursor: ResumeCursor {
                    phase: runner.phase,
                    watches_completed: runner.watches(),
                    snapshots_completed: runner.record.snapshots.len() as u32,
                },
            }
        }
    };
    log::debug!("run {} finished after {} simulated minutes", config.run_id, runner.clock.elapsed());
    runner.sink.finish(&status).map_err(sink_err)?;
    let mut record = runner.record;
    record.status = status;
    Ok(record)
}
