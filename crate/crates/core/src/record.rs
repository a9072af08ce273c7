//! Append-only persistence of run traces.
//!
//! One run per file. The first line is a schema-versioned header, then one
//! JSON object per watch event or snapshot in the order they happened, and a
//! closing status line once the run ends. A file without a status line is a
//! run that was interrupted while writing.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    ExposureSnapshot, Phase, ProcessParameters, ResumeCursor, RunRecord, RunStatus, TopicId,
    WatchEvent,
};

pub const RECORD_SCHEMA: &str = "bubble-audit/run-record";
pub const RECORD_VERSION: u32 = 1;
pub const RECORD_EXTENSION: &str = "jsonl";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: malformed record line: {source}")]
    Parse { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{path}: unsupported schema `{schema}` version {version}")]
    Schema { path: PathBuf, schema: String, version: u32 },
    #[error("{path}: missing header line")]
    MissingHeader { path: PathBuf },
    #[error("{path}:{line}: unexpected header line")]
    DuplicateHeader { path: PathBuf, line: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema: String,
    pub version: u32,
    pub run_id: String,
    pub topic_id: TopicId,
    pub agent_seed: u64,
    pub parameters: ProcessParameters,
}

impl RunHeader {
    pub fn new(run_id: &str, topic_id: &TopicId, agent_seed: u64, parameters: &ProcessParameters) -> Self {
        RunHeader {
            schema: RECORD_SCHEMA.to_string(),
            version: RECORD_VERSION,
            run_id: run_id.to_string(),
            topic_id: topic_id.clone(),
            agent_seed,
            parameters: parameters.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Line {
    Header(RunHeader),
    Watch(WatchEvent),
    Snapshot(ExposureSnapshot),
    End { outcome: RunStatus },
}

/// Receives a run's trace as it is produced.
pub trait RunSink {
    fn begin(&mut self, header: &RunHeader) -> io::Result<()>;
    fn watch(&mut self, event: &WatchEvent) -> io::Result<()>;
    fn snapshot(&mut self, snapshot: &ExposureSnapshot) -> io::Result<()>;
    fn finish(&mut self, status: &RunStatus) -> io::Result<()>;
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl RunSink for NullSink {
    fn begin(&mut self, _: &RunHeader) -> io::Result<()> {
        Ok(())
    }
    fn watch(&mut self, _: &WatchEvent) -> io::Result<()> {
        Ok(())
    }
    fn snapshot(&mut self, _: &ExposureSnapshot) -> io::Result<()> {
        Ok(())
    }
    fn finish(&mut self, _: &RunStatus) -> io::Result<()> {
        Ok(())
    }
}

/// Streams a run into its record file, one line per event.
pub struct RunLogWriter<W: Write> {
    out: W,
}

impl RunLogWriter<BufWriter<File>> {
    /// Creates (truncating) the record file at `path`.
    pub fn create(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        Ok(RunLogWriter { out: BufWriter::new(file) })
    }
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(out: W) -> Self {
        RunLogWriter { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    fn line(&mut self, line: &Line) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, line)?;
        self.out.write_all(b"\n")
    }
}

impl<W: Write> RunSink for RunLogWriter<W> {
    fn begin(&mut self, header: &RunHeader) -> io::Result<()> {
        self.line(&Line::Header(header.clone()))
    }

    fn watch(&mut self, event: &WatchEvent) -> io::Result<()> {
        self.line(&Line::Watch(event.clone()))
    }

    fn snapshot(&mut self, snapshot: &ExposureSnapshot) -> io::Result<()> {
        self.line(&Line::Snapshot(snapshot.clone()))
    }

    fn finish(&mut self, status: &RunStatus) -> io::Result<()> {
        self.line(&Line::End { outcome: status.clone() })?;
        self.out.flush()
    }
}

/// Replays a complete record into a sink in chronological order.
///
/// A snapshot taken after `k` watches is emitted right after the `k`-th
/// watch event, which is the order the scenario engine produces.
pub fn replay(record: &RunRecord, sink: &mut dyn RunSink) -> io::Result<()> {
    sink.begin(&RunHeader::new(&record.run_id, &record.topic_id, record.agent_seed, &record.parameters))?;
    let mut watches = record.watch_sequence.iter().enumerate().peekable();
    for snapshot in &record.snapshots {
        while let Some((i, w)) = watches.peek() {
            if (*i as u32) < snapshot.watch_index {
                sink.watch(w)?;
                watches.next();
            } else {
                break;
            }
        }
        sink.snapshot(snapshot)?;
    }
    for (_, w) in watches {
        sink.watch(w)?;
    }
    sink.finish(&record.status)
}

pub fn write_record(record: &RunRecord, path: &Path) -> Result<(), RecordError> {
    let io_err = |source| RecordError::Io { path: path.to_path_buf(), source };
    let mut writer = RunLogWriter::create(path).map_err(io_err)?;
    replay(record, &mut writer).map_err(io_err)
}

pub fn to_bytes(record: &RunRecord) -> Vec<u8> {
    let mut writer = RunLogWriter::new(Vec::new());
    replay(record, &mut writer).expect("writing to memory cannot fail");
    writer.into_inner()
}

pub fn read_record(path: &Path) -> Result<RunRecord, RecordError> {
    let file = File::open(path).map_err(|source| RecordError::Io { path: path.to_path_buf(), source })?;
    parse_record(BufReader::new(file), path)
}

pub fn parse_record(reader: impl BufRead, path: &Path) -> Result<RunRecord, RecordError> {
    let mut header: Option<RunHeader> = None;
    let mut watch_sequence = Vec::new();
    let mut snapshots = Vec::new();
    let mut status = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| RecordError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|source| RecordError::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            source,
        })?;
        match parsed {
            Line::Header(h) => {
                if header.is_some() {
                    return Err(RecordError::DuplicateHeader { path: path.to_path_buf(), line: n + 1 });
                }
                if h.schema != RECORD_SCHEMA || h.version != RECORD_VERSION {
                    return Err(RecordError::Schema {
                        path: path.to_path_buf(),
                        schema: h.schema,
                        version: h.version,
                    });
                }
                header = Some(h);
            }
            _ if header.is_none() => return Err(RecordError::MissingHeader { path: path.to_path_buf() }),
            Line::Watch(w) => watch_sequence.push(w),
            Line::Snapshot(s) => snapshots.push(s),
            Line::End { outcome } => status = Some(outcome),
        }
    }
    let header = header.ok_or_else(|| RecordError::MissingHeader { path: path.to_path_buf() })?;
    let status = status.unwrap_or_else(|| RunStatus::Failed {
        reason: "record ends without a status line".into(),
        cursor: ResumeCursor {
            phase: watch_sequence.last().map(|w: &WatchEvent| w.phase).unwrap_or(Phase::Baseline),
            watches_completed: watch_sequence.len() as u32,
            snapshots_completed: snapshots.len() as u32,
        },
    });
    Ok(RunRecord {
        run_id: header.run_id,
        topic_id: header.topic_id,
        agent_seed: header.agent_seed,
        parameters: header.parameters,
        watch_sequence,
        snapshots,
        status,
    })
}

/// Reads every `*.jsonl` record in a directory, ordered by file name.
pub fn read_records_dir(dir: &Path) -> Result<Vec<RunRecord>, RecordError> {
    let entries = std::fs::read_dir(dir).map_err(|source| RecordError::Io { path: dir.to_path_buf(), source })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| RecordError::Io { path: dir.to_path_buf(), source })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some(RECORD_EXTENSION) {
            paths.push(path);
        }
    }
    paths.sort();
    paths.iter().map(|p| read_record(p)).collect()
}
