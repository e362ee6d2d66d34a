//! Line-delimited epoch logs and evaluation records.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use mtss_core::corpus::Corpus;
use mtss_core::metrics::Responses;
use mtss_core::training::EpochLog;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: String,
    pub epoch: usize,
    pub turns: usize,
    pub j_nll: f64,
    pub j_kd: Option<f64>,
    pub j_kd_pi: Option<f64>,
    pub j_theta: f64,
    pub clamped: usize,
    pub selection: Option<f64>,
    /// Seconds since the logger was opened.
    pub wall_secs: f64,
}

impl EpochRecord {
    pub fn new(log: &EpochLog, wall_secs: f64) -> Self {
        EpochRecord {
            phase: log.phase.clone(),
            epoch: log.epoch,
            turns: log.turns,
            j_nll: log.j_nll,
            j_kd: log.j_kd,
            j_kd_pi: log.j_kd_pi,
            j_theta: log.j_theta,
            clamped: log.clamped,
            selection: log.selection,
            wall_secs,
        }
    }
}

/// Appends one JSON line per epoch and flushes after each.
pub struct EpochLogger {
    path: PathBuf,
    file: File,
    start: Instant,
    error: Option<Error>,
    echo: bool,
}

impl EpochLogger {
    pub fn create(path: &Path, echo: bool) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(Error::io(dir))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(Error::io(path))?;
        Ok(EpochLogger {
            path: path.to_path_buf(),
            file,
            start: Instant::now(),
            error: None,
            echo,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Write failures are kept until [`EpochLogger::finish`] so this can
    /// be used as a training progress callback.
    pub fn log(&mut self, log: &EpochLog) {
        let rec = EpochRecord::new(log, self.start.elapsed().as_secs_f64());
        if self.echo {
            let kd = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.4}"));
            eprintln!(
                "[{:>7.1}s] {} epoch {}: J_NLL {:.4} J_KD {} J_KD_pi {} J_theta {:.4}",
                rec.wall_secs,
                rec.phase,
                rec.epoch,
                rec.j_nll,
                kd(rec.j_kd),
                kd(rec.j_kd_pi),
                rec.j_theta
            );
        }
        if self.error.is_some() {
            return;
        }
        let line = serde_json::to_string(&rec).expect("record serializes");
        if let Err(e) = writeln!(self.file, "{line}").and_then(|_| self.file.flush()) {
            self.error = Some(Error::Io {
                path: self.path.clone(),
                source: e,
            });
        }
    }

    pub fn finish(self) -> Result<PathBuf> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.path),
        }
    }
}

pub fn read_epoch_log(path: &Path) -> Result<Vec<EpochRecord>> {
    read_jsonl(path)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::parse(path, format!("line {}", i + 1), e))?,
        );
    }
    Ok(out)
}

/// One generated response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub episode: String,
    pub turn: usize,
    pub response: String,
}

pub fn write_eval_records(path: &Path, corpus: &Corpus, responses: &Responses) -> Result<()> {
    let mut text = String::new();
    for (ep, turns) in corpus.episodes.iter().zip(responses) {
        for (t, r) in turns.iter().enumerate() {
            let rec = EvalRecord {
                episode: ep.id.clone(),
                turn: t,
                response: r.join(" "),
            };
            text.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            text.push('\n');
        }
    }
    crate::io::write_bytes(path, text.as_bytes())
}

/// Reads records in any order and lines them up with `corpus`. Every turn
/// needs exactly one record.
pub fn read_eval_records(path: &Path, corpus: &Corpus) -> Result<Responses> {
    let records: Vec<EvalRecord> = read_jsonl(path)?;
    let index: BTreeMap<&str, usize> = corpus
        .episodes
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let mut out: Vec<Vec<Option<Vec<String>>>> = corpus
        .episodes
        .iter()
        .map(|e| vec![None; e.turns.len()])
        .collect();
    for (line, r) in records.into_iter().enumerate() {
        let at = || format!("line {}", line + 1);
        let e = *index
            .get(r.episode.as_str())
            .ok_or_else(|| Error::parse(path, at(), format!("unknown episode {}", r.episode)))?;
        let slot = out[e].get_mut(r.turn).ok_or_else(|| {
            Error::parse(
                path,
                at(),
                format!("episode {} has no turn {}", r.episode, r.turn),
            )
        })?;
        if slot.is_some() {
            return Err(Error::parse(
                path,
                at(),
                format!("duplicate record for {} turn {}", r.episode, r.turn),
            ));
        }
        *slot = Some(r.response.split_whitespace().map(String::from).collect());
    }
    out.into_iter()
        .zip(&corpus.episodes)
        .map(|(turns, ep)| {
            turns
                .into_iter()
                .enumerate()
                .map(|(t, r)| {
                    r.ok_or_else(|| {
                        Error::parse(path, "records", format!("missing {} turn {t}", ep.id))
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use mtss_core::metrics::gold_responses;
    use mtss_core::synth::{gen_corpus, SynthConfig};

    fn corpus() -> Corpus {
        gen_corpus(&SynthConfig {
            train_episodes: 4,
            valid_episodes: 1,
            test_episodes: 1,
            ..SynthConfig::default()
        })
        .unwrap()
        .train
    }

    #[test]
    fn eval_records_round_trip() {
        let c = corpus();
        let gold = gold_responses(&c);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        write_eval_records(&p, &c, &gold).unwrap();
        assert_eq!(read_eval_records(&p, &c).unwrap(), gold);

        let mut lines: Vec<String> = fs::read_to_string(&p)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        lines.reverse();
        fs::write(&p, lines.join("\n")).unwrap();
        assert_eq!(read_eval_records(&p, &c).unwrap(), gold);
    }

    #[test]
    fn missing_and_duplicate_records_are_reported() {
        let c = corpus();
        let gold = gold_responses(&c);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        write_eval_records(&p, &c, &gold).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let first = text.lines().next().unwrap().to_string();
        fs::write(&p, format!("{text}{first}\n")).unwrap();
        assert!(read_eval_records(&p, &c)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        let rest: Vec<&str> = text.lines().skip(1).collect();
        fs::write(&p, rest.join("\n")).unwrap();
        assert!(read_eval_records(&p, &c)
            .unwrap_err()
            .to_string()
            .contains("missing"));
    }

    #[test]
    fn epoch_log_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/epochs.jsonl");
        let mut l = EpochLogger::create(&p, false).unwrap();
        for epoch in 1..=3 {
            l.log(&EpochLog {
                phase: "student".into(),
                epoch,
                turns: 5,
                j_nll: 1.0 / epoch as f64,
                j_kd: Some(0.5),
                j_kd_pi: None,
                j_theta: 2.0,
                clamped: 0,
                selection: None,
            });
        }
        l.finish().unwrap();
        let recs = read_epoch_log(&p).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].epoch, 3);
        assert_eq!(recs[0].j_kd, Some(0.5));
        assert!(recs.windows(2).all(|w| w[0].wall_secs <= w[1].wall_secs));
    }
}
