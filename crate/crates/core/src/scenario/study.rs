//! Many runs per topic, executed on a bounded worker pool.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_scenario, AgentConfig, PlatformAdapter, ScenarioError, SimulatorAdapter, TimeMode};
use crate::domain::{ProcessParameters, RunRecord, Stance, TopicId, VideoId};
use crate::platform::{Catalog, PersonalizationConfig, Session};
use crate::record::RunSink;
use crate::seed::derive_seed;

/// Explicit V_prom and V_deb of one topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSets {
    pub promoting: Vec<VideoId>,
    pub debunking: Vec<VideoId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub master_seed: u64,
    pub runs: Vec<AgentConfig>,
}

pub fn run_id(topic: &TopicId, index: u32) -> String {
    format!("{topic}-{index:02}")
}

/// One agent configuration per (topic, run). Topics without explicit seed
/// sets watch their most popular promoting and debunking videos.
pub fn plan_study(
    catalog: &Catalog,
    parameters: &ProcessParameters,
    master_seed: u64,
    seed_sets: &BTreeMap<TopicId, SeedSets>,
    time_mode: TimeMode,
) -> Result<StudyPlan, ScenarioError> {
    let study_seed = derive_seed(master_seed, "study");
    let mut runs = Vec::new();
    for topic in catalog.topics() {
        let sets = match seed_sets.get(&topic.topic_id) {
            Some(s) => s.clone(),
            None => SeedSets {
                promoting: catalog.most_popular(&topic.topic_id, Stance::Promoting, parameters.n_prom as usize),
                debunking: catalog.most_popular(&topic.topic_id, Stance::Debunking, parameters.n_deb as usize),
            },
        };
        for i in 0..parameters.runs_per_topic {
            let id = run_id(&topic.topic_id, i);
            let config = AgentConfig {
                agent_seed: derive_seed(study_seed, &id),
                run_id: id,
                topic: topic.clone(),
                seed_promoting: sets.promoting.clone(),
                seed_debunking: sets.debunking.clone(),
                queries: topic.queries.iter().take(parameters.n_q as usize).cloned().collect(),
                parameters: parameters.clone(),
                time_mode,
            };
            config.validate()?;
            runs.push(config);
        }
    }
    Ok(StudyPlan { master_seed, runs })
}

#[derive(Debug)]
pub struct RunOutcome {
    pub run_id: String,
    pub result: Result<RunRecord, ScenarioError>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        matches!(&self.result, Ok(r) if r.status.is_completed())
    }
}

/// Builds simulator adapters whose sessions are seeded from each run.
pub fn simulator_factory(
    catalog: Arc<Catalog>,
    personalization: PersonalizationConfig,
) -> impl Fn(&AgentConfig) -> Box<dyn PlatformAdapter> + Sync {
    move |config| {
        let session = Session::new(catalog.clone(), personalization, &config.run_id, config.session_seed());
        Box::new(SimulatorAdapter { session })
    }
}

/// Executes every planned run on at most `workers` threads. Outcomes come
/// back in plan order; a failed run never stops the others.
pub fn run_study<A, S>(plan: &StudyPlan, workers: usize, adapters: A, sinks: S) -> Vec<RunOutcome>
where
    A: Fn(&AgentConfig) -> Box<dyn PlatformAdapter> + Sync,
    S: Fn(&AgentConfig) -> io::Result<Box<dyn RunSink>> + Sync,
{
    let execute = |config: &AgentConfig| {
        let result = sinks(config)
            .map_err(|source| ScenarioError::Sink { run_id: config.run_id.clone(), source })
            .and_then(|mut sink| run_scenario(config, adapters(config).as_mut(), sink.as_mut()));
        RunOutcome { run_id: config.run_id.clone(), result }
    };
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| plan.runs.par_iter().map(execute).collect()),
        Err(e) => {
            log::warn!("worker pool unavailable ({e}); running sequentially");
            plan.runs.iter().map(execute).collect()
        }
    }
}
