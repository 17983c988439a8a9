use crate::error::{Error, Result};

use super::search::StreamScores;

/// Column order of a decode record. Per-stream columns repeat once per
/// stream (audio first in late fusion).
pub const DECODE_COLUMNS: &str = "id\thypothesis\tscore\t(ctc\tatt\tlm)+";

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeRecord {
    pub id: String,
    pub text: String,
    pub score: f64,
    /// `(ctc, att, lm)` per stream.
    pub components: Vec<(f64, f64, f64)>,
}

impl DecodeRecord {
    pub fn new(id: &str, text: String, score: f64, streams: &[StreamScores]) -> Self {
        DecodeRecord { id: id.into(), text, score, components: streams.iter().map(|s| (s.ctc, s.att, s.lm)).collect() }
    }
}

pub fn format_decode_record(r: &DecodeRecord) -> String {
    let mut line = format!("{}\t{}\t{:.6}", r.id, r.text, r.score);
    for (c, a, l) in &r.components {
        line.push_str(&format!("\t{c:.6}\t{a:.6}\t{l:.6}"));
    }
    line
}

pub fn parse_decode_record(line: &str) -> Result<DecodeRecord> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 3 || (fields.len() - 3) % 3 != 0 {
        return Err(Error::Format(format!("decode record has {} fields", fields.len())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number {s:?} in decode record")));
    let components = fields[3..]
        .chunks(3)
        .map(|c| Ok((num(c[0])?, num(c[1])?, num(c[2])?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecodeRecord { id: fields[0].into(), text: fields[1].into(), score: num(fields[2])?, components })
}
