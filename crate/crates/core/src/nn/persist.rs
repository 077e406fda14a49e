//! Plain-text model format.
//!
//! ```text
//! mixgen-model 1
//! net <name> <layer-count>
//! layer <inputs> <outputs> <activation>
//! w <inputs*outputs values, row-major>
//! b <outputs values>
//! ...
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! save/load is bit-exact.

use std::fmt::Write as _;

use super::{Activation, DenseLayer, Mlp, NnError};

pub const MODEL_FORMAT_HEADER: &str = "mixgen-model 1";

/// An ordered set of named networks stored in one file.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelFile {
    pub nets: Vec<(String, Mlp)>,
}

impl ModelFile {
    pub fn push(&mut self, name: impl Into<String>, net: Mlp) {
        self.nets.push((name.into(), net));
    }

    pub fn get(&self, name: &str) -> Result<&Mlp, NnError> {
        self.nets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
            .ok_or_else(|| NnError::Format(format!("model file has no network named {name:?}")))
    }

    pub fn take(&mut self, name: &str) -> Result<Mlp, NnError> {
        let pos = self
            .nets
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| NnError::Format(format!("model file has no network named {name:?}")))?;
        Ok(self.nets.remove(pos).1)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MODEL_FORMAT_HEADER);
        out.push('\n');
        for (name, net) in &self.nets {
            let _ = writeln!(out, "net {name} {}", net.layers().len());
            for layer in net.layers() {
                let _ = writeln!(out, "layer {} {} {}", layer.inputs(), layer.outputs(), layer.activation().name());
                write_values(&mut out, 'w', layer.weights());
                write_values(&mut out, 'b', layer.biases());
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, NnError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        match lines.next() {
            Some((_, MODEL_FORMAT_HEADER)) => {}
            Some((_, other)) => return Err(NnError::Format(format!("unsupported model header {other:?}"))),
            None => return Err(NnError::Format("empty model file".into())),
        }
        let mut file = ModelFile::default();
        loop {
            let (no, line) = lines.next().ok_or_else(|| NnError::Format("missing `end`".into()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["end"] => break,
                ["net", name, count] => {
                    let count: usize = parse_num(count, no)?;
                    let mut layers = Vec::with_capacity(count);
                    for _ in 0..count {
                        let (no, header) = lines.next().ok_or_else(|| truncated(no))?;
                        let h: Vec<&str> = header.split_whitespace().collect();
                        let ["layer", inputs, outputs, act] = h.as_slice() else {
                            return Err(NnError::Format(format!("line {no}: expected layer header")));
                        };
                        let inputs: usize = parse_num(inputs, no)?;
                        let outputs: usize = parse_num(outputs, no)?;
                        let act = Activation::from_name(act)
                            .ok_or_else(|| NnError::Format(format!("line {no}: unknown activation {act:?}")))?;
                        let weights = read_values(&mut lines, 'w', inputs * outputs)?;
                        let biases = read_values(&mut lines, 'b', outputs)?;
                        layers.push(DenseLayer::from_parts(inputs, outputs, weights, biases, act)?);
                    }
                    file.push(*name, Mlp::new(layers)?);
                }
                _ => return Err(NnError::Format(format!("line {no}: unexpected {line:?}"))),
            }
        }
        Ok(file)
    }
}

fn truncated(after: usize) -> NnError {
    NnError::Format(format!("file truncated after line {after}"))
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, NnError> {
    s.parse().map_err(|_| NnError::Format(format!("line {line}: bad number {s:?}")))
}

fn write_values(out: &mut String, tag: char, values: &[f64]) {
    out.push(tag);
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}

fn read_values<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    tag: char,
    expected: usize,
) -> Result<Vec<f64>, NnError> {
    let (no, line) = lines.next().ok_or_else(|| NnError::Format("file truncated".into()))?;
    let mut fields = line.split_whitespace();
    if fields.next() != Some(tag.encode_utf8(&mut [0; 4])) {
        return Err(NnError::Format(format!("line {no}: expected `{tag}` row")));
    }
    let values = fields.map(|f| parse_num::<f64>(f, no)).collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(NnError::Format(format!("line {no}: expected {expected} values, found {}", values.len())));
    }
    Ok(values)
}
