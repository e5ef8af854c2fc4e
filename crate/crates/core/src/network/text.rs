use super::{ReluNetwork, ReluNetworkSpec};
use crate::error::{Error, Result};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

pub const NETWORK_HEADER: &str = "relunet v1";

/// Text form: header, a `spec` line, then per layer `W rows cols` followed by
/// `rows` lines of weights and `b len` followed by one line of biases. Floats
/// use the shortest representation that parses back to the same bits.
pub fn serialize_network(net: &ReluNetwork) -> String {
    let s = net.spec();
    let mut out = String::new();
    let _ = writeln!(out, "{NETWORK_HEADER}");
    let _ = writeln!(
        out,
        "spec {} {} {} {} {} {}",
        s.height, s.width, s.in_dim, s.out_dim, s.sparsity, s.bound
    );
    for slot in net.slots() {
        let w = &net.params()[slot.weights_range()];
        let _ = writeln!(out, "W {} {}", slot.rows, slot.cols);
        for r in 0..slot.rows {
            push_floats(&mut out, &w[r * slot.cols..(r + 1) * slot.cols]);
        }
        let _ = writeln!(out, "b {}", slot.rows);
        push_floats(&mut out, &net.params()[slot.bias_range()]);
    }
    out
}

fn push_floats(out: &mut String, v: &[f64]) {
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x}");
    }
    out.push('\n');
}

/// Line cursor that numbers lines from 1 and skips blank lines.
pub(crate) struct Lines<'a> {
    inner: core::iter::Enumerate<core::str::Lines<'a>>,
    pub last: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok(t);
            }
        }
        Err(Error::Parse {
            line: self.last + 1,
            reason: "unexpected end of input".into(),
        })
    }

    pub(crate) fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            line: self.last,
            reason: reason.into(),
        }
    }

    pub(crate) fn expect_end(&mut self) -> Result<()> {
        match self.next_line() {
            Ok(_) => Err(self.err("trailing content")),
            Err(_) => Ok(()),
        }
    }

    /// Next line split as `keyword n1 n2 …` with exactly `count` integers.
    pub(crate) fn keyed_ints(&mut self, key: &str, count: usize) -> Result<Vec<usize>> {
        let line = self.next_line()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        let v: Vec<usize> = it
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| self.err(format!("bad integer `{t}`")))
            })
            .collect::<Result<_>>()?;
        if v.len() != count {
            return Err(self.err(format!("`{key}` takes {count} integers, found {}", v.len())));
        }
        Ok(v)
    }

    pub(crate) fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| self.err(format!("bad number `{t}`")))
            })
            .collect::<Result<_>>()?;
        if v.len() != count {
            return Err(self.err(format!("expected {count} numbers, found {}", v.len())));
        }
        Ok(v)
    }

    pub(crate) fn header(&mut self, expected: &str) -> Result<()> {
        let line = self.next_line()?;
        if line == expected {
            return Ok(());
        }
        let (want_kind, want_ver) = expected.split_once(' ').unwrap_or((expected, ""));
        match line.split_once(' ') {
            Some((kind, ver)) if kind == want_kind => Err(self.err(format!(
                "unsupported {kind} version `{ver}` (this build reads `{want_ver}`)"
            ))),
            _ => Err(self.err(format!("missing `{expected}` header"))),
        }
    }
}

pub fn deserialize_network(text: &str) -> Result<ReluNetwork> {
    let mut lines = Lines::new(text);
    lines.header(NETWORK_HEADER)?;
    let line = lines.next_line()?;
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 7 || toks[0] != "spec" {
        return Err(lines.err("expected `spec height width in_dim out_dim S B`"));
    }
    let int = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| lines.err(format!("bad integer `{t}`")))
    };
    let float = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| lines.err(format!("bad number `{t}`")))
    };
    let spec = ReluNetworkSpec::new(
        int(toks[1])?,
        int(toks[2])?,
        int(toks[3])?,
        int(toks[4])?,
        float(toks[5])?,
        float(toks[6])?,
    );
    spec.validate().map_err(|e| lines.err(e.to_string()))?;
    let mut params = Vec::with_capacity(spec.param_count());
    for (rows, cols) in spec.layer_shapes() {
        let wdims = lines.keyed_ints("W", 2)?;
        if wdims != [rows, cols] {
            return Err(lines.err(format!(
                "weight block is {}x{}, spec needs {rows}x{cols}",
                wdims[0], wdims[1]
            )));
        }
        for _ in 0..rows {
            params.extend(lines.floats(cols)?);
        }
        let bdims = lines.keyed_ints("b", 1)?;
        if bdims[0] != rows {
            return Err(lines.err(format!(
                "bias block has length {}, spec needs {rows}",
                bdims[0]
            )));
        }
        params.extend(lines.floats(rows)?);
    }
    lines.expect_end()?;
    ReluNetwork::from_params(spec, params)
}

#[cfg(test)]
mod tests {
    use super::super::{init_network, InitScheme};
    use super::*;

    fn sample_net() -> ReluNetwork {
        let spec = ReluNetworkSpec::new(3, 4, 2, 1, 7.5, 1.25);
        init_network(&spec, InitScheme::UniformScaled, 17).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let net = sample_net();
        let back = deserialize_network(&serialize_network(&net)).unwrap();
        assert_eq!(back.spec(), net.spec());
        let bits = |n: &ReluNetwork| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&net));

        let inf = ReluNetwork::zeros(ReluNetworkSpec::unconstrained(1, 1, 1, 1)).unwrap();
        assert_eq!(deserialize_network(&serialize_network(&inf)).unwrap(), inf);
    }

    #[test]
    fn truncated_text_is_rejected() {
        let text = serialize_network(&sample_net());
        let cut: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            deserialize_network(&cut),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn wrong_version_names_both_versions() {
        let text = serialize_network(&sample_net()).replacen("relunet v1", "relunet v2", 1);
        match deserialize_network(&text) {
            Err(Error::Parse { line: 1, reason }) => {
                assert!(reason.contains("v2") && reason.contains("v1"), "{reason}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let text = serialize_network(&sample_net());
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = "0.1 nope".into();
        match deserialize_network(&lines.join("\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }
}
