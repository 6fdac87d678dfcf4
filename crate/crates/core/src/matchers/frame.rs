//! Matched-sequence frame file:
//!
//! ```text
//! PAS-FRAME 1
//! model <id>
//! n <payload bits>
//! seed <u64>
//! symbols <count>
//! <space-separated symbol indices>
//! ```

use crate::error::{Error, Result};

pub const FRAME_MAGIC: &str = "PAS-FRAME 1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchedFrame {
    pub model_id: String,
    pub payload_bits: usize,
    pub seed: u64,
    pub symbols: Vec<usize>,
}

pub fn write_frame(frame: &MatchedFrame) -> String {
    let syms: Vec<String> = frame.symbols.iter().map(|s| s.to_string()).collect();
    format!(
        "{FRAME_MAGIC}\nmodel {}\nn {}\nseed {}\nsymbols {}\n{}\n",
        frame.model_id,
        frame.payload_bits,
        frame.seed,
        frame.symbols.len(),
        syms.join(" ")
    )
}

pub fn read_frame(text: &str) -> Result<MatchedFrame> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(FRAME_MAGIC) {
        return Err(Error::Format(format!("missing '{FRAME_MAGIC}' header")));
    }
    let mut field = |name: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing '{name}' line")))?;
        line.strip_prefix(name)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| Error::Format(format!("bad '{name}' line")))
    };
    let model_id = field("model")?;
    let parse = |s: String, what: &str| -> Result<u64> {
        s.trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad {what}")))
    };
    let payload_bits = parse(field("n")?, "n")? as usize;
    let seed = parse(field("seed")?, "seed")?;
    let count = parse(field("symbols")?, "symbol count")? as usize;
    let symbols: Vec<usize> = lines
        .flat_map(str::split_whitespace)
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Format(format!("bad symbol '{t}'")))
        })
        .collect::<Result<_>>()?;
    if symbols.len() != count {
        return Err(Error::Format(format!(
            "frame declares {count} symbols but holds {}",
            symbols.len()
        )));
    }
    Ok(MatchedFrame {
        model_id,
        payload_bits,
        seed,
        symbols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_text_roundtrip() {
        let f = MatchedFrame {
            model_id: "seq-npas++".into(),
            payload_bits: 2048,
            seed: 17,
            symbols: vec![0, 15, 3, 3, 9],
        };
        assert_eq!(read_frame(&write_frame(&f)).unwrap(), f);
        let bad = write_frame(&f).replace("symbols 5", "symbols 6");
        assert!(read_frame(&bad).is_err());
    }
}
