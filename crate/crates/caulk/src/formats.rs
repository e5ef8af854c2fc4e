//! Text formats for targets and pre-trained models.
//!
//! A target is stored as `caulk-target v1`:
//!
//! ```text
//! caulk-target v1
//! seed 21
//! layers 2
//! layer 2 2 2 0.5 kink
//! coord 0 1 0.61 0.39 kink 0.8 0.4 0.1 0.5
//! coord 0 1 0.2 0.8 kink 0.7 0.5 0.2 0.5
//! layer 2 1 1 2 polynomial
//! coord 1 1 poly 2 0.1 0.8
//! ```
//!
//! `layer` lines carry `in_dim out_dim active_vars beta mode`. Each `coord`
//! line lists its active variables, then its weights, then the shape. Floats
//! use the shortest decimal form that parses back to the same bits.

use caulk_core::caulking::{NetStage, PretrainedModel, Provenance, Stage};
use caulk_core::function_spaces::{
    CompositionSpec, CoordinateFn, RoughnessMode, Shape, SmoothLayerSpec, TargetFunction,
};
use caulk_core::network::{deserialize_network, serialize_network};
use caulk_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::sync::Arc;

pub const TARGET_HEADER: &str = "caulk-target v1";
pub const PRETRAINED_FORMAT: &str = "caulk-pretrained v1";

pub fn serialize_target(target: &TargetFunction) -> String {
    let spec = target.spec();
    let mut out = String::new();
    let _ = writeln!(out, "{TARGET_HEADER}");
    let _ = writeln!(out, "seed {}", spec.seed);
    let _ = writeln!(out, "layers {}", spec.depth());
    for (ls, coords) in spec.layers.iter().zip(target.layers()) {
        let mode = match ls.mode {
            RoughnessMode::Kink => "kink",
            RoughnessMode::Polynomial => "polynomial",
        };
        let _ = writeln!(
            out,
            "layer {} {} {} {} {mode}",
            ls.in_dim, ls.out_dim, ls.active_vars, ls.beta
        );
        for c in coords {
            out.push_str("coord");
            for v in &c.vars {
                let _ = write!(out, " {v}");
            }
            for w in &c.weights {
                let _ = write!(out, " {w}");
            }
            match &c.shape {
                Shape::Kink {
                    scale,
                    center,
                    offset,
                    beta,
                } => {
                    let _ = write!(out, " kink {scale} {center} {offset} {beta}");
                }
                Shape::Polynomial { coeffs } => {
                    let _ = write!(out, " poly {}", coeffs.len());
                    for a in coeffs {
                        let _ = write!(out, " {a}");
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

struct Tokens<'a> {
    line: usize,
    iter: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn word(&mut self, what: &str) -> Result<&'a str> {
        self.iter
            .next()
            .ok_or_else(|| parse_err(self.line, format!("missing {what}")))
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let w = self.word(keyword)?;
        if w == keyword {
            Ok(())
        } else {
            Err(parse_err(
                self.line,
                format!("expected `{keyword}`, found `{w}`"),
            ))
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let w = self.word(what)?;
        w.parse()
            .map_err(|_| parse_err(self.line, format!("bad {what} `{w}`")))
    }

    fn finish(mut self) -> Result<()> {
        match self.iter.next() {
            None => Ok(()),
            Some(w) => Err(parse_err(self.line, format!("unexpected trailing `{w}`"))),
        }
    }
}

pub fn deserialize_target(text: &str) -> Result<TargetFunction> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| -> Result<Tokens<'_>> {
        lines
            .next()
            .map(|(line, l)| Tokens {
                line,
                iter: l.split_whitespace(),
            })
            .ok_or_else(|| parse_err(0, format!("unexpected end of input, expected {what}")))
    };
    let header = next("header")?;
    let line = header.line;
    if header.iter.collect::<Vec<_>>().join(" ") != TARGET_HEADER {
        return Err(parse_err(
            line,
            format!("expected header `{TARGET_HEADER}`"),
        ));
    }
    let mut t = next("seed")?;
    t.expect("seed")?;
    let seed: u64 = t.parse("seed")?;
    t.finish()?;
    let mut t = next("layers")?;
    t.expect("layers")?;
    let depth: usize = t.parse("layer count")?;
    t.finish()?;
    let mut specs = Vec::with_capacity(depth);
    let mut layers = Vec::with_capacity(depth);
    for _ in 0..depth {
        let mut t = next("layer")?;
        t.expect("layer")?;
        let in_dim = t.parse("in_dim")?;
        let out_dim: usize = t.parse("out_dim")?;
        let active: usize = t.parse("active_vars")?;
        let beta: f64 = t.parse("beta")?;
        let mode = match t.word("mode")? {
            "kink" => RoughnessMode::Kink,
            "polynomial" => RoughnessMode::Polynomial,
            other => return Err(parse_err(t.line, format!("unknown mode `{other}`"))),
        };
        t.finish()?;
        specs.push(SmoothLayerSpec::new(in_dim, out_dim, active, beta, mode));
        let mut coords = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            let mut t = next("coord")?;
            t.expect("coord")?;
            let vars = (0..active)
                .map(|_| t.parse("variable index"))
                .collect::<Result<Vec<usize>>>()?;
            let weights = (0..active)
                .map(|_| t.parse("weight"))
                .collect::<Result<Vec<f64>>>()?;
            let shape = match t.word("shape")? {
                "kink" => Shape::Kink {
                    scale: t.parse("scale")?,
                    center: t.parse("center")?,
                    offset: t.parse("offset")?,
                    beta: t.parse("beta")?,
                },
                "poly" => {
                    let k: usize = t.parse("coefficient count")?;
                    Shape::Polynomial {
                        coeffs: (0..k)
                            .map(|_| t.parse("coefficient"))
                            .collect::<Result<Vec<f64>>>()?,
                    }
                }
                other => return Err(parse_err(t.line, format!("unknown shape `{other}`"))),
            };
            t.finish()?;
            coords.push(CoordinateFn {
                vars,
                weights,
                shape,
            });
        }
        layers.push(coords);
    }
    if let Some((line, l)) = lines.next() {
        return Err(parse_err(line, format!("unexpected content `{l}`")));
    }
    TargetFunction::from_parts(CompositionSpec::new(specs, seed), layers)
}

/// JSON description of one frozen stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StageRecord {
    Identity {
        dim: usize,
    },
    /// Target layers `from..=to`.
    Oracle {
        from: usize,
        to: usize,
    },
    Network {
        file: String,
        relu_input: bool,
        relu_output: bool,
    },
}

/// `pretrained.json`: split, provenance and the three stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainedRecord {
    pub format: String,
    pub provenance: String,
    pub m: Option<usize>,
    pub split: [usize; 2],
    pub target: String,
    pub extractor: StageRecord,
    pub middle: StageRecord,
    pub head: StageRecord,
}

/// Files making up a saved pre-trained model, as `(name, contents)` pairs.
/// Network stages become `<stage>.relunet`; the target is always included.
pub fn pretrained_files(
    model: &PretrainedModel,
    target: &TargetFunction,
) -> (PretrainedRecord, Vec<(String, String)>) {
    let mut files = vec![("target.txt".to_string(), serialize_target(target))];
    let mut record = |name: &str, stage: &Stage| match stage {
        Stage::Identity(d) => StageRecord::Identity { dim: *d },
        Stage::Oracle(seg) => {
            let (from, to) = seg.range();
            StageRecord::Oracle { from, to }
        }
        Stage::Network(n) => {
            let file = format!("{name}.relunet");
            files.push((file.clone(), serialize_network(&n.net)));
            StageRecord::Network {
                file,
                relu_input: n.relu_input,
                relu_output: n.relu_output,
            }
        }
    };
    let extractor = record("extractor", &model.extractor);
    let middle = record("middle", &model.middle);
    let head = record("head", &model.head);
    let (provenance, m) = match model.provenance {
        Provenance::Oracle => ("oracle", None),
        Provenance::Empirical { m } => ("empirical", Some(m)),
    };
    let rec = PretrainedRecord {
        format: PRETRAINED_FORMAT.to_string(),
        provenance: provenance.to_string(),
        m,
        split: [model.split.0, model.split.1],
        target: "target.txt".to_string(),
        extractor,
        middle,
        head,
    };
    (rec, files)
}

/// Rebuilds a pre-trained model; `read` returns the contents of a named file.
pub fn load_pretrained(
    record: &PretrainedRecord,
    mut read: impl FnMut(&str) -> std::io::Result<String>,
) -> Result<(PretrainedModel, Arc<TargetFunction>)> {
    let io = |e: std::io::Error| Error::Other(e.to_string());
    if record.format != PRETRAINED_FORMAT {
        return Err(parse_err(
            1,
            format!("unsupported format `{}`", record.format),
        ));
    }
    let target = Arc::new(deserialize_target(&read(&record.target).map_err(io)?)?);
    let mut stage = |s: &StageRecord| -> Result<Stage> {
        Ok(match s {
            StageRecord::Identity { dim } => Stage::Identity(*dim),
            StageRecord::Oracle { from, to } => Stage::Oracle(target.segment(*from, *to)?),
            StageRecord::Network {
                file,
                relu_input,
                relu_output,
            } => Stage::Network(NetStage {
                net: deserialize_network(&read(file).map_err(io)?)?,
                relu_input: *relu_input,
                relu_output: *relu_output,
            }),
        })
    };
    let extractor = stage(&record.extractor)?;
    let middle = stage(&record.middle)?;
    let head = stage(&record.head)?;
    let provenance = match (record.provenance.as_str(), record.m) {
        ("oracle", _) => Provenance::Oracle,
        ("empirical", Some(m)) => Provenance::Empirical { m },
        (p, _) => return Err(parse_err(1, format!("bad provenance `{p}`"))),
    };
    Ok((
        PretrainedModel {
            extractor,
            head,
            middle,
            split: (record.split[0], record.split[1]),
            provenance,
        },
        target,
    ))
}
