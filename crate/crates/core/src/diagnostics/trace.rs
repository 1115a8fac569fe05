use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::serde_ext;

/// CSV header of the per-iteration trace.
pub const TRACE_COLUMNS: [&str; 9] = [
    "n",
    "s_n",
    "objective",
    "r_n",
    "D_s",
    "R",
    "T",
    "dist_to_ref",
    "support_size",
];

/// Quantities recorded at iterate `uⁿ`. `step_size` and `descent` describe the
/// step from `uⁿ` to `uⁿ⁺¹` and are absent on the final entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub n: usize,
    #[serde(serialize_with = "serde_ext::opt_f64")]
    pub step_size: Option<f64>,
    #[serde(serialize_with = "serde_ext::f64")]
    pub objective: f64,
    #[serde(serialize_with = "serde_ext::opt_f64")]
    pub gap: Option<f64>,
    #[serde(serialize_with = "serde_ext::opt_f64")]
    pub descent: Option<f64>,
    #[serde(serialize_with = "serde_ext::opt_f64")]
    pub bregman: Option<f64>,
    #[serde(serialize_with = "serde_ext::opt_f64")]
    pub taylor: Option<f64>,
    #[serde(serialize_with = "serde_ext::opt_f64")]
    pub distance_to_ref: Option<f64>,
    pub support: Vec<usize>,
}

impl TraceEntry {
    pub fn row(&self) -> TraceRow {
        TraceRow {
            n: self.n,
            step_size: self.step_size,
            objective: self.objective,
            gap: self.gap,
            descent: self.descent,
            bregman: self.bregman,
            taylor: self.taylor,
            distance_to_ref: self.distance_to_ref,
            support_size: self.support.len(),
        }
    }
}

/// The CSV-representable part of a [`TraceEntry`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub step_size: Option<f64>,
    pub objective: f64,
    pub gap: Option<f64>,
    pub descent: Option<f64>,
    pub bregman: Option<f64>,
    pub taylor: Option<f64>,
    pub distance_to_ref: Option<f64>,
    pub support_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub entries: Vec<TraceEntry>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: TraceEntry) {
        self.entries.push(entry);
    }

    pub fn rows(&self) -> Vec<TraceRow> {
        self.entries.iter().map(TraceEntry::row).collect()
    }

    /// First index after which the support never changes again.
    pub fn support_freeze_index(&self) -> usize {
        let mut freeze = 0;
        for (i, pair) in self.entries.windows(2).enumerate() {
            if pair[0].support != pair[1].support {
                freeze = i + 1;
            }
        }
        freeze
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.objective).collect()
    }

    pub fn gaps(&self) -> Option<Vec<f64>> {
        self.entries.iter().map(|e| e.gap).collect()
    }

    pub fn distances(&self) -> Option<Vec<f64>> {
        self.entries.iter().map(|e| e.distance_to_ref).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows(), out)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_rows<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt_opt(r.step_size),
            r.objective.to_string(),
            fmt_opt(r.gap),
            fmt_opt(r.descent),
            fmt_opt(r.bregman),
            fmt_opt(r.taylor),
            fmt_opt(r.distance_to_ref),
            r.support_size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_COLUMNS {
        return Err(Error::Parse(format!("unexpected trace header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let opt = |i: usize| -> Result<Option<f64>> {
            let t = field(i);
            if t.is_empty() {
                Ok(None)
            } else {
                serde_ext::parse_ext(t)
                    .map(Some)
                    .ok_or_else(|| Error::Parse(format!("row {line}: bad number {t:?}")))
            }
        };
        let int = |i: usize| -> Result<usize> {
            field(i)
                .parse()
                .map_err(|_| Error::Parse(format!("row {line}: bad integer {:?}", field(i))))
        };
        rows.push(TraceRow {
            n: int(0)?,
            step_size: opt(1)?,
            objective: opt(2)?
                .ok_or_else(|| Error::Parse(format!("row {line}: missing objective")))?,
            gap: opt(3)?,
            descent: opt(4)?,
            bregman: opt(5)?,
            taylor: opt(6)?,
            distance_to_ref: opt(7)?,
            support_size: int(8)?,
        });
    }
    Ok(rows)
}
