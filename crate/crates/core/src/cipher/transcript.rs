use crate::error::{Error, Result};
use std::fmt::Write as _;

pub const TRANSCRIPT_SCHEMA: &str = "priorcipher.transcript/1";
const COLUMNS: [&str; 6] = ["t", "x", "k", "s", "y_B", "y_E"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub t: u64,
    /// Plaintext symbol.
    pub x: usize,
    /// Lexicographic rank of the running-key permutation.
    pub running_key: u64,
    /// Frame prior index.
    pub k: usize,
    /// Transmitted index.
    pub s: usize,
    pub y_bob: usize,
    pub y_eve: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub m: usize,
    pub slots: Vec<Slot>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn eve_outcomes(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.y_eve).collect()
    }

    /// Slots where the two receivers disagree.
    pub fn hamming_distance(&self) -> usize {
        self.slots.iter().filter(|s| s.y_bob != s.y_eve).count()
    }

    /// Tab-separated export: a schema comment, a header, one row per slot.
    /// The running key is not exported.
    pub fn to_tsv(&self) -> String {
        let mut out = String::with_capacity(16 * (self.slots.len() + 2));
        writeln!(out, "# schema: {TRANSCRIPT_SCHEMA}").unwrap();
        writeln!(out, "# m: {}", self.m).unwrap();
        writeln!(out, "{}", COLUMNS.join("\t")).unwrap();
        for s in &self.slots {
            writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", s.t, s.x, s.k, s.s, s.y_bob, s.y_eve).unwrap();
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |what: String| Error::Parse(format!("transcript: {what}"));
        let schema = lines.next().ok_or_else(|| bad("empty input".into()))?;
        if schema != format!("# schema: {TRANSCRIPT_SCHEMA}") {
            return Err(bad(format!("unexpected schema line `{schema}`")));
        }
        let m: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("# m: "))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing alphabet size".into()))?;
        if lines.next() != Some(COLUMNS.join("\t").as_str()) {
            return Err(bad("missing column header".into()));
        }
        let mut slots = Vec::new();
        for (n, line) in lines.enumerate() {
            let f: Vec<u64> = line
                .split('\t')
                .map(|v| v.parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("row {n}: {e}")))?;
            if f.len() != COLUMNS.len() {
                return Err(bad(format!("row {n}: {} fields", f.len())));
            }
            if f[1..].iter().enumerate().any(|(i, &v)| i != 1 && v as usize >= m) {
                return Err(bad(format!("row {n}: symbol out of range")));
            }
            slots.push(Slot {
                t: f[0],
                x: f[1] as usize,
                running_key: 0,
                k: f[2] as usize,
                s: f[3] as usize,
                y_bob: f[4] as usize,
                y_eve: f[5] as usize,
            });
        }
        Ok(Self { m, slots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Transcript {
        Transcript {
            m: 3,
            slots: vec![
                Slot { t: 0, x: 2, running_key: 0, k: 1, s: 0, y_bob: 0, y_eve: 1 },
                Slot { t: 1, x: 0, running_key: 0, k: 1, s: 2, y_bob: 2, y_eve: 2 },
            ],
        }
    }

    #[test]
    fn tsv_round_trip() {
        let tr = sample();
        let text = tr.to_tsv();
        assert!(text.starts_with("# schema: priorcipher.transcript/1\n# m: 3\nt\tx\tk\ts\ty_B\ty_E\n0\t2\t1\t0\t0\t1\n"));
        assert_eq!(Transcript::from_tsv(&text).unwrap(), tr);
        assert_eq!(tr.hamming_distance(), 1);
    }

    #[test]
    fn tsv_rejects_garbage() {
        assert!(Transcript::from_tsv("").is_err());
        assert!(Transcript::from_tsv("# schema: other/1\n").is_err());
        let text = sample().to_tsv().replace("0\t2\t1\t0\t0\t1", "0\t5\t1\t0\t0\t1");
        assert!(Transcript::from_tsv(&text).is_err());
    }
}
