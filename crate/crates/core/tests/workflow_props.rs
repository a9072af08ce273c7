use std::fs;

use bubble_audit::domain::{Stance, VideoId};
use bubble_audit::platform::generate_catalog;
use bubble_audit::record::read_records_dir;
use bubble_audit::scenario::SeedSets;
use bubble_audit::workflow::{
    execute_study, RunState, StudyConfig, StudyManifest, MANIFEST_FILE, RUNS_DIR,
};

#[test]
fn default_study_writes_fifty_records_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = StudyConfig { seed: 71, ..Default::default() };
    let (run, manifest) = execute_study(&config, dir.path()).unwrap();
    assert_eq!(manifest.runs.len(), 50);
    assert!(manifest.runs.iter().all(|r| r.state == RunState::Completed));
    assert_eq!(fs::read_dir(dir.path().join(RUNS_DIR)).unwrap().count(), 50);
    let mut from_disk = read_records_dir(&dir.path().join(RUNS_DIR)).unwrap();
    let mut in_memory = run.records();
    from_disk.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    in_memory.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    assert_eq!(from_disk, in_memory);
}

#[test]
fn manifest_reproduces_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let config = StudyConfig { seed: 72, ..Default::default() };
    execute_study(&config, dir.path()).unwrap();
    let manifest = StudyManifest::load(dir.path()).unwrap();
    assert_eq!(manifest.master_seed, 72);
    assert_eq!(manifest.catalog_seed, config.catalog_seed());
    let mut exported = Vec::new();
    generate_catalog(&config.catalog_config()).unwrap().write_jsonl(&mut exported).unwrap();
    assert_eq!(fs::read(dir.path().join(&manifest.catalog)).unwrap(), exported);
    assert_eq!(manifest.config_digest, StudyConfig { workers: 1, ..config }.digest());
}

#[test]
fn unwritable_output_leaves_no_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"not a directory").unwrap();
    let out = blocker.join("study");
    let err = execute_study(&StudyConfig::default(), &out).err().expect("output under a file must fail");
    assert!(!err.is_config(), "{err}");
    assert!(!out.join(MANIFEST_FILE).exists());
}

#[test]
fn rerun_replaces_outputs_with_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = StudyConfig { seed: 73, ..Default::default() };
    execute_study(&config, dir.path()).unwrap();
    let first = fs::read(dir.path().join(MANIFEST_FILE)).unwrap();
    execute_study(&config, dir.path()).unwrap();
    assert_eq!(fs::read(dir.path().join(MANIFEST_FILE)).unwrap(), first);
}

#[test]
fn missing_seed_video_fails_only_its_topic() {
    let base = StudyConfig { seed: 74, ..Default::default() };
    let catalog = generate_catalog(&base.catalog_config()).unwrap();
    let topic = catalog.topics()[1].topic_id.clone();
    let mut promoting = catalog.most_popular(&topic, Stance::Promoting, 40);
    promoting[7] = VideoId::new("no-such-video");
    let debunking = catalog.most_popular(&topic, Stance::Debunking, 40);
    let mut config = base;
    config.seed_videos.insert(topic.clone(), SeedSets { promoting, debunking });

    let dir = tempfile::tempdir().unwrap();
    let (run, manifest) = execute_study(&config, dir.path()).unwrap();
    assert_eq!(run.failed(), 10);
    for r in &manifest.runs {
        if r.topic == topic {
            assert_eq!(r.state, RunState::Failed);
            assert!(r.reason.as_deref().unwrap().contains("no-such-video"));
        } else {
            assert_eq!(r.state, RunState::Completed);
        }
    }
}
