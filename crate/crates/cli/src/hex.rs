//! Hex dumps used by the wire fixture corpus.
//!
//! Whitespace-separated byte pairs; `#` starts a comment that runs to the
//! end of the line.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {source}")]
pub struct HexError {
    pub line: usize,
    pub source: hex::FromHexError,
}

pub fn parse_hex(text: &str) -> Result<Vec<u8>, HexError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let data = line.split('#').next().unwrap_or("");
        for token in data.split_whitespace() {
            if token.len() != 2 {
                return Err(HexError { line: i + 1, source: hex::FromHexError::InvalidStringLength });
            }
            out.extend(hex::decode(token).map_err(|source| HexError { line: i + 1, source })?);
        }
    }
    Ok(out)
}

/// Upper-case pairs, `per_line` to a line, preceded by `# ` comment lines.
pub fn to_hex(bytes: &[u8], comments: &[&str], per_line: usize) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for chunk in bytes.chunks(per_line.max(1)) {
        let pairs: Vec<String> = chunk.iter().map(|b| hex::encode_upper([*b])).collect();
        let _ = writeln!(out, "{}", pairs.join(" "));
    }
    out
}
