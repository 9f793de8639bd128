use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::session::{EpisodeRecord, SessionResult};
use crate::error::Result;

pub const CSV_HEADER: &str =
    "session,episode,train_return,eval_return,n_explore,n_exploit,n_listen,p_explore,p_conf_mean,p_cons,loss";

/// One CSV row: an episode record tagged with its session index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub session: usize,
    pub episode: u64,
    pub train_return: f64,
    pub eval_return: f64,
    pub n_explore: u64,
    pub n_exploit: u64,
    pub n_listen: u64,
    pub p_explore: f64,
    pub p_conf_mean: f64,
    pub p_cons: f64,
    pub loss: Option<f64>,
}

impl MetricsRow {
    pub fn new(session: usize, r: &EpisodeRecord) -> Self {
        MetricsRow {
            session,
            episode: r.episode,
            train_return: r.train_return,
            eval_return: r.eval_return,
            n_explore: r.n_explore,
            n_exploit: r.n_exploit,
            n_listen: r.n_listen,
            p_explore: r.p_explore,
            p_conf_mean: r.p_conf_mean,
            p_cons: r.p_cons,
            loss: r.loss,
        }
    }

    pub fn record(&self) -> EpisodeRecord {
        EpisodeRecord {
            episode: self.episode,
            train_return: self.train_return,
            eval_return: self.eval_return,
            n_explore: self.n_explore,
            n_exploit: self.n_exploit,
            n_listen: self.n_listen,
            p_explore: self.p_explore,
            p_conf_mean: self.p_conf_mean,
            p_cons: self.p_cons,
            loss: self.loss,
        }
    }
}

/// Streams rows as they arrive; used by the live service.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Self {
        MetricsWriter {
            inner: csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out),
        }
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_metrics<W: Write>(results: &[SessionResult], out: W) -> Result<()> {
    let mut w = MetricsWriter::new(out);
    for (i, res) in results.iter().enumerate() {
        for r in &res.records {
            w.write(&MetricsRow::new(i, r))?;
        }
    }
    w.flush()
}

pub fn export_metrics(results: &[SessionResult], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_metrics(results, std::io::BufWriter::new(file))
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn load_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    read_metrics(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(episode: u64, loss: Option<f64>) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            train_return: -12.0,
            eval_return: 0.1 + 0.2,
            n_explore: 3,
            n_exploit: 2,
            n_listen: 1,
            p_explore: 1.0,
            p_conf_mean: 1.0 / 3.0,
            p_cons: 0.5,
            loss,
        }
    }

    #[test]
    fn header_and_rows() {
        let res = SessionResult::from_records(vec![record(0, None), record(1, Some(2.5))], 98.0, 10);
        let mut buf = Vec::new();
        write_metrics(&[res], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].ends_with(",0.5,"), "{}", lines[1]);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn round_trip_is_exact() {
        let recs = vec![record(0, None), record(1, Some(1e-300)), record(2, Some(0.1 + 0.7))];
        let res = SessionResult::from_records(recs.clone(), 98.0, 10);
        let mut buf = Vec::new();
        write_metrics(&[res], &mut buf).unwrap();
        let back: Vec<EpisodeRecord> = read_metrics(buf.as_slice()).unwrap().iter().map(|r| r.record()).collect();
        assert_eq!(back, recs);
    }
}
