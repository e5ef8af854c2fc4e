//! CSV tables with fixed headers, `,` separators and LF line endings.

use crate::error::CliError;
use caulk_core::fitting::FitTrace;
use caulk_core::rates::{DepthTable, MSweepRow, RateTable};

pub const RATE_HEADER: [&str; 4] = ["n", "trials", "mean_error", "std_error"];
pub const DEPTH_HEADER: [&str; 5] = ["variant", "depth", "mean_error", "std_error", "is_min"];
pub const M_SWEEP_HEADER: [&str; 3] = ["m", "exponent", "r_squared"];
pub const CAULKING_HEADER: [&str; 6] = [
    "model_id",
    "n",
    "seed",
    "l2_estimate",
    "l2_stderr",
    "excess_estimate",
];
pub const TRACE_HEADER: [&str; 2] = ["epoch", "loss"];

/// Known table layouts, told apart by their header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Rate,
    Depth,
    MSweep,
    Caulking,
    Trace,
}

impl Schema {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            Schema::Rate => &RATE_HEADER,
            Schema::Depth => &DEPTH_HEADER,
            Schema::MSweep => &M_SWEEP_HEADER,
            Schema::Caulking => &CAULKING_HEADER,
            Schema::Trace => &TRACE_HEADER,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Schema::Rate => "rate",
            Schema::Depth => "depth",
            Schema::MSweep => "m-sweep",
            Schema::Caulking => "caulking",
            Schema::Trace => "trace",
        }
    }

    pub const ALL: [Schema; 5] = [
        Schema::Rate,
        Schema::Depth,
        Schema::MSweep,
        Schema::Caulking,
        Schema::Trace,
    ];

    pub fn detect(header: &[String]) -> Option<Schema> {
        Schema::ALL.into_iter().find(|s| {
            s.header()
                .iter()
                .copied()
                .eq(header.iter().map(String::as_str))
        })
    }
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn write_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn rate_csv(table: &RateTable) -> String {
    write_table(
        &RATE_HEADER,
        table.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.trials.to_string(),
                fmt_f64(r.mean_error),
                fmt_f64(r.std_error),
            ]
        }),
    )
}

pub fn depth_csv(table: &DepthTable) -> String {
    write_table(
        &DEPTH_HEADER,
        table.rows.iter().map(|r| {
            vec![
                r.variant.clone(),
                r.depth.to_string(),
                fmt_f64(r.mean_error),
                fmt_f64(r.std_error),
                r.is_min.to_string(),
            ]
        }),
    )
}

pub fn m_sweep_csv(rows: &[MSweepRow]) -> String {
    write_table(
        &M_SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                r.m.to_string(),
                fmt_f64(r.fit.exponent),
                fmt_f64(r.fit.r_squared),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaulkingRow {
    pub model_id: String,
    pub n: usize,
    pub seed: u64,
    pub l2_estimate: f64,
    pub l2_stderr: f64,
    pub excess_estimate: f64,
}

pub fn caulking_csv(rows: &[CaulkingRow]) -> String {
    write_table(
        &CAULKING_HEADER,
        rows.iter().map(|r| {
            vec![
                r.model_id.clone(),
                r.n.to_string(),
                r.seed.to_string(),
                fmt_f64(r.l2_estimate),
                fmt_f64(r.l2_stderr),
                fmt_f64(r.excess_estimate),
            ]
        }),
    )
}

pub fn trace_csv(trace: &FitTrace) -> String {
    write_table(
        &TRACE_HEADER,
        trace
            .losses
            .iter()
            .enumerate()
            .map(|(k, l)| vec![k.to_string(), fmt_f64(*l)]),
    )
}

/// A parsed CSV file with a recognized header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Schema,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Table, CliError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| CliError::Runtime(format!("csv: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let schema = Schema::detect(&header).ok_or_else(|| {
            CliError::Runtime(format!(
                "unknown csv schema with header `{}`; expected one of: {}",
                header.join(","),
                Schema::ALL.map(|s| s.name()).join(", ")
            ))
        })?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::Runtime(format!("csv: {e}")))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { schema, rows })
    }

    /// Column `name` parsed as floats.
    pub fn column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let k = self
            .schema
            .header()
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Runtime(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[k].parse::<f64>().map_err(|_| {
                    CliError::Runtime(format!("row {}: `{name}` is not a number", i + 1))
                })
            })
            .collect()
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<String>, CliError> {
        let k = self
            .schema
            .header()
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Runtime(format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[k].clone()).collect())
    }
}
