//! Self-describing structured-text checkpoints with a content checksum.
//!
//! Layout (values written with 17 significant digits, one matrix row per
//! line, row-major):
//!
//! ```text
//! lift3d checkpoint v1
//! n 20
//! input uv-interleaved
//! config <64-hex sha256 of the training config>
//! epoch 23
//! validation 9.31e-1
//! net 5
//! dims 40 40 40 40 20
//! layer 0 40 40
//! <40 rows of 40 values>
//! bias 0 40
//! <1 row of 40 values>
//! ...
//! imputer 3 40            # tau, 2n — only for imputer-equipped models
//! lambdas <tau values>
//! weights 40 40
//! <40 rows>
//! checksum <sha256 of every byte above this line>
//! ```
//!
//! The trailing checksum makes truncation and byte corruption detectable;
//! the magic line carries the format version.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::imputer::ImputerParams;
use crate::net::{Layer, NetworkParams};
use crate::pipeline::{TrainedModel, INPUT_ORDERING};
use crate::textio::{format_float, parse_floats, parse_header_rest, parse_header_usize, Lines};

/// Magic first line of a checkpoint file.
pub const CHECKPOINT_MAGIC: &str = "lift3d checkpoint v1";

fn write_matrix(out: &mut String, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_float(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// Serializes a model to checkpoint text.
pub fn model_to_text(model: &TrainedModel) -> Result<String> {
    model.validate()?;
    let mut body = String::new();
    let _ = writeln!(body, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(body, "n {}", model.n);
    let _ = writeln!(body, "input {}", model.input_ordering);
    let _ = writeln!(body, "config {}", model.config_hash);
    let _ = writeln!(body, "epoch {}", model.epoch_reached);
    let _ = writeln!(body, "validation {}", format_float(model.best_validation_error));
    let _ = writeln!(body, "net {}", model.net.layers().len());
    // Output width of each layer; the input width is implied by n.
    let dims: Vec<String> = model.net.dims()[1..].iter().map(|d| d.to_string()).collect();
    let _ = writeln!(body, "dims {}", dims.join(" "));
    for (idx, layer) in model.net.layers().iter().enumerate() {
        let _ = writeln!(body, "layer {idx} {} {}", layer.weights.nrows(), layer.weights.ncols());
        write_matrix(&mut body, &layer.weights);
        let _ = writeln!(body, "bias {idx} {}", layer.bias.len());
        let row: Vec<String> = layer.bias.iter().map(|v| format_float(*v)).collect();
        let _ = writeln!(body, "{}", row.join(" "));
    }
    if let Some(imp) = &model.imputer {
        let _ = writeln!(body, "imputer {} {}", imp.tau(), imp.weights().nrows());
        let row: Vec<String> = imp.lambdas().iter().map(|v| format_float(*v)).collect();
        let _ = writeln!(body, "lambdas {}", row.join(" "));
        let _ = writeln!(body, "weights {} {}", imp.weights().nrows(), imp.weights().ncols());
        write_matrix(&mut body, imp.weights());
    }
    let digest = crate::textio::sha256_hex(body.as_bytes());
    let _ = writeln!(body, "checksum {digest}");
    Ok(body)
}

fn parse_counted_row(lines: &mut Lines<'_>, count: usize, context: &str) -> Result<Vec<f64>> {
    let (line_no, line) = lines.next_required(context)?;
    let values = parse_floats(line, line_no, context)?;
    if values.len() != count {
        return Err(Error::CorruptFile(format!(
            "{context} on line {line_no}: expected {count} values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

fn parse_matrix(lines: &mut Lines<'_>, rows: usize, cols: usize, context: &str) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let values = parse_counted_row(lines, cols, &format!("{context} row {i}"))?;
        for (j, v) in values.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Expects a `<key> a b ...` line with exactly `count` integer fields.
fn parse_keyed_usizes(
    lines: &mut Lines<'_>,
    key: &str,
    count: usize,
) -> Result<Vec<usize>> {
    let (line_no, line) = lines.next_required(&format!("the '{key}' line"))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::ParseError {
            line: line_no,
            message: format!("expected '{key} ...', found '{line}'"),
        });
    }
    let fields: Vec<usize> = parts
        .map(|t| {
            t.parse::<usize>().map_err(|_| Error::ParseError {
                line: line_no,
                message: format!("'{key}' fields must be non-negative integers, got '{t}'"),
            })
        })
        .collect::<Result<_>>()?;
    if fields.len() != count {
        return Err(Error::ParseError {
            line: line_no,
            message: format!("'{key}' takes {count} fields, got {}", fields.len()),
        });
    }
    Ok(fields)
}

/// Parses checkpoint text, verifying the version and the content checksum.
pub fn model_from_text(text: &str) -> Result<TrainedModel> {
    // Locate and verify the checksum trailer before trusting any content.
    let marker = "\nchecksum ";
    let pos = text.rfind(marker).ok_or_else(|| {
        Error::CorruptFile("checkpoint has no checksum line; the file appears truncated".into())
    })?;
    let body = &text[..pos + 1]; // includes the newline before 'checksum'
    let trailer = &text[pos + 1..];
    let expected = trailer
        .strip_prefix("checksum ")
        .and_then(|r| r.strip_suffix('\n').or(Some(r)))
        .map(str::trim)
        .unwrap_or_default();
    let actual = crate::textio::sha256_hex(body.as_bytes());
    if expected != actual {
        return Err(Error::CorruptFile(format!(
            "checkpoint checksum mismatch: file says {expected}, content hashes to {actual}"
        )));
    }

    let mut lines = Lines::new(body);
    crate::textio::expect_magic(&mut lines, CHECKPOINT_MAGIC, "lift3d checkpoint")?;
    let n = parse_header_usize(&mut lines, "n")?;
    let input_ordering = parse_header_rest(&mut lines, "input")?;
    if input_ordering != INPUT_ORDERING {
        return Err(Error::FormatVersionMismatch(format!(
            "unsupported input ordering '{input_ordering}'; this build reads '{INPUT_ORDERING}'"
        )));
    }
    let config_hash = parse_header_rest(&mut lines, "config")?;
    let epoch_reached = parse_header_usize(&mut lines, "epoch")?;
    let (line_no, line) = lines.next_required("the 'validation' header")?;
    let validation_str = crate::textio::header_rest(line, line_no, "validation")?;
    let best_validation_error =
        validation_str.parse::<f64>().map_err(|_| Error::ParseError {
            line: line_no,
            message: format!("'validation' must be a number, got '{validation_str}'"),
        })?;

    let layer_count = parse_header_usize(&mut lines, "net")?;
    if layer_count == 0 {
        return Err(Error::CorruptFile("checkpoint declares a net with no layers".into()));
    }
    let dims = parse_keyed_usizes(&mut lines, "dims", layer_count)?;
    let mut layers = Vec::with_capacity(layer_count);
    let mut in_dim = 2 * n;
    for (idx, &out_dim) in dims.iter().enumerate() {
        let header = parse_keyed_usizes(&mut lines, "layer", 3)?;
        if header != [idx, out_dim, in_dim] {
            return Err(Error::CorruptFile(format!(
                "layer {idx} header {header:?} does not match declared dims ({out_dim} x {in_dim})"
            )));
        }
        let weights = parse_matrix(&mut lines, out_dim, in_dim, &format!("layer {idx} weights"))?;
        let bias_header = parse_keyed_usizes(&mut lines, "bias", 2)?;
        if bias_header != [idx, out_dim] {
            return Err(Error::CorruptFile(format!(
                "bias {idx} header {bias_header:?} does not match declared dim {out_dim}"
            )));
        }
        let bias = parse_counted_row(&mut lines, out_dim, &format!("bias {idx}"))?;
        layers.push(Layer { weights, bias: DVector::from_vec(bias) });
        in_dim = out_dim;
    }
    let net = NetworkParams::from_layers(layers)?;

    // Optional imputer block, then nothing.
    let imputer = match lines.next_significant() {
        None => None,
        Some((line_no, line)) => {
            let mut parts = line.split_whitespace();
            if parts.next() != Some("imputer") {
                return Err(Error::ParseError {
                    line: line_no,
                    message: format!("expected 'imputer <tau> <2n>' or end of file, found '{line}'"),
                });
            }
            let fields: Vec<usize> = parts
                .map(|t| {
                    t.parse::<usize>().map_err(|_| Error::ParseError {
                        line: line_no,
                        message: format!("'imputer' fields must be integers, got '{t}'"),
                    })
                })
                .collect::<Result<_>>()?;
            if fields.len() != 2 {
                return Err(Error::ParseError {
                    line: line_no,
                    message: format!("'imputer' takes 2 fields, got {}", fields.len()),
                });
            }
            let (tau, two_n) = (fields[0], fields[1]);
            if two_n != 2 * n {
                return Err(Error::CorruptFile(format!(
                    "imputer width {two_n} does not match 2n = {}",
                    2 * n
                )));
            }
            let (line_no, line) = lines.next_required("the 'lambdas' line")?;
            let rest = crate::textio::header_rest(line, line_no, "lambdas")?;
            let lambdas = parse_floats(rest, line_no, "lambdas")?;
            if lambdas.len() != tau {
                return Err(Error::CorruptFile(format!(
                    "imputer declares tau = {tau} but {} lambdas",
                    lambdas.len()
                )));
            }
            let w_header = parse_keyed_usizes(&mut lines, "weights", 2)?;
            if w_header != [two_n, two_n] {
                return Err(Error::CorruptFile(format!(
                    "imputer weights header {w_header:?} does not match width {two_n}"
                )));
            }
            let weights = parse_matrix(&mut lines, two_n, two_n, "imputer weights")?;
            lines.expect_eof("the imputer block")?;
            Some(ImputerParams::new(weights, lambdas)?)
        }
    };

    let model = TrainedModel {
        net,
        imputer,
        n,
        input_ordering,
        config_hash,
        epoch_reached,
        best_validation_error,
    };
    model.validate()?;
    Ok(model)
}

/// Writes a checkpoint file.
pub fn save_model(path: impl AsRef<Path>, model: &TrainedModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_text(model)?).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Reads and verifies a checkpoint file.
pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    model_from_text(&text)
}
