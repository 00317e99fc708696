//! Flat text serialization for nets.
//!
//! Layout, one item per line:
//!
//! ```text
//! ffnet <num_layers>
//! layer <fan_in> <fan_out> <activation> <trainable 0|1>
//! w <fan_out values>        # one line per input unit, row-major
//! ...
//! b <fan_out values>
//! ```
//!
//! Values are printed with 17 significant digits, enough for an exact
//! f64 round trip.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use super::{Activation, DenseLayer, FeedForwardNet};
use crate::{Error, Result};

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl FeedForwardNet {
    /// Writes the net in the flat text format.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "ffnet {}", self.layers().len())?;
        for layer in self.layers() {
            writeln!(
                out,
                "layer {} {} {} {}",
                layer.fan_in(),
                layer.fan_out(),
                layer.activation().name(),
                u8::from(layer.trainable())
            )?;
            for r in 0..layer.fan_in() {
                let row: Vec<String> = (0..layer.fan_out())
                    .map(|c| fmt_f64(layer.weights()[(r, c)]))
                    .collect();
                writeln!(out, "w {}", row.join(" "))?;
            }
            let bias: Vec<String> = layer.bias().iter().map(|&b| fmt_f64(b)).collect();
            writeln!(out, "b {}", bias.join(" "))?;
        }
        Ok(())
    }

    /// Reads a net written by [`FeedForwardNet::write_text`]. `name` labels
    /// parse errors.
    pub fn read_text<R: BufRead>(input: R, name: &str) -> Result<Self> {
        let mut lines = LineReader::new(input, name);
        let net = lines.read_net()?;
        Ok(net)
    }
}

/// Line-oriented reader shared by the net and model formats.
pub(crate) struct LineReader<R> {
    input: R,
    name: String,
    pub(crate) line: usize,
}

impl<R: BufRead> LineReader<R> {
    pub(crate) fn new(input: R, name: &str) -> Self {
        Self {
            input,
            name: name.to_string(),
            line: 0,
        }
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            file: self.name.clone().into(),
            line: self.line,
            msg: msg.into(),
        }
    }

    /// Next non-empty line, trimmed.
    pub(crate) fn next_line(&mut self) -> Result<Option<String>> {
        loop {
            let mut buf = String::new();
            let n = self.input.read_line(&mut buf).map_err(Error::Io)?;
            if n == 0 {
                return Ok(None);
            }
            self.line += 1;
            let trimmed = buf.trim();
            if !trimmed.is_empty() {
                return Ok(Some(trimmed.to_string()));
            }
        }
    }

    pub(crate) fn expect_line(&mut self, what: &str) -> Result<String> {
        self.next_line()?
            .ok_or_else(|| self.error(format!("unexpected end of input, expected {what}")))
    }

    /// A line of the form `<tag> v v v ...`, returning the parsed values.
    pub(crate) fn tagged_values(&mut self, tag: &str, count: usize) -> Result<Vec<f64>> {
        let line = self.expect_line(tag)?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(self.error(format!("expected a '{tag}' line, got '{line}'")));
        }
        let values: Vec<f64> = parts
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| self.error(format!("bad number '{t}'")))
            })
            .collect::<Result<_>>()?;
        if values.len() != count {
            return Err(self.error(format!(
                "expected {count} values after '{tag}', got {}",
                values.len()
            )));
        }
        Ok(values)
    }

    pub(crate) fn read_net(&mut self) -> Result<FeedForwardNet> {
        let header = self.expect_line("ffnet header")?;
        let num_layers: usize = match header.split_whitespace().collect::<Vec<_>>()[..] {
            ["ffnet", n] => n
                .parse()
                .map_err(|_| self.error(format!("bad layer count '{n}'")))?,
            _ => return Err(self.error(format!("expected 'ffnet <n>', got '{header}'"))),
        };
        if num_layers == 0 {
            return Err(self.error("net must have at least one layer"));
        }
        let mut layers = Vec::with_capacity(num_layers);
        for _ in 0..num_layers {
            layers.push(self.read_layer()?);
        }
        FeedForwardNet::from_layers(layers)
    }

    fn read_layer(&mut self) -> Result<DenseLayer> {
        let header = self.expect_line("layer header")?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (fan_in, fan_out, act, trainable): (usize, usize, Activation, bool) = match parts[..] {
            ["layer", fi, fo, act, tr] => (
                fi.parse()
                    .map_err(|_| self.error(format!("bad fan_in '{fi}'")))?,
                fo.parse()
                    .map_err(|_| self.error(format!("bad fan_out '{fo}'")))?,
                Activation::parse(act).map_err(|e| self.error(e.to_string()))?,
                match tr {
                    "0" => false,
                    "1" => true,
                    _ => return Err(self.error(format!("bad trainable flag '{tr}'"))),
                },
            ),
            _ => {
                return Err(self.error(format!(
                    "expected 'layer <fan_in> <fan_out> <activation> <trainable>', got '{header}'"
                )))
            }
        };
        if fan_in == 0 || fan_out == 0 {
            return Err(self.error("layer dimensions must be >= 1"));
        }
        let mut weights = DMatrix::zeros(fan_in, fan_out);
        for r in 0..fan_in {
            let row = self.tagged_values("w", fan_out)?;
            for (c, v) in row.into_iter().enumerate() {
                weights[(r, c)] = v;
            }
        }
        let bias = DVector::from_vec(self.tagged_values("b", fan_out)?);
        DenseLayer::new(weights, bias, act, trainable)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{mlp_init, Activation, FeedForwardNet};
    use crate::Error;

    #[test]
    fn roundtrip_is_bit_exact() {
        let net = mlp_init(
            &[3, 4, 1],
            &[Activation::Tanh, Activation::Sigmoid],
            99,
        )
        .unwrap();
        let mut buf = Vec::new();
        net.write_text(&mut buf).unwrap();
        let back = FeedForwardNet::read_text(buf.as_slice(), "<mem>").unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn parse_error_names_line() {
        let text = "ffnet 1\nlayer 2 1 tanh 1\nw 0.5\nw oops\nb 0.0\n";
        let err = FeedForwardNet::read_text(text.as_bytes(), "bad.net").unwrap_err();
        match err {
            Error::Parse { file, line, .. } => {
                assert_eq!(file.to_string_lossy(), "bad.net");
                assert_eq!(line, 4);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_input_is_a_parse_error() {
        let text = "ffnet 2\nlayer 2 1 tanh 1\nw 0.5\nw 0.25\nb 0.0\n";
        assert!(matches!(
            FeedForwardNet::read_text(text.as_bytes(), "short.net"),
            Err(Error::Parse { .. })
        ));
    }
}
