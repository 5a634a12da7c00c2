//! PGM label maps: one grey value per grid node.
//!
//! Maps are written as plain (P2) PGM with `maxval` equal to the largest
//! label. Both P2 and binary P5 are accepted on input.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::LabelMap;

/// Serializes as P2. An all-background map is written with maxval 1 since
/// PGM requires a positive maxval.
pub fn to_p2(map: &LabelMap) -> Result<String> {
    let maxval = map.max_label().max(1);
    if maxval > 65535 {
        return Err(Error::InvalidParameter(format!(
            "label {maxval} does not fit a 16-bit PGM"
        )));
    }
    let mut out = String::new();
    writeln!(out, "P2\n{} {}\n{}", map.width(), map.height(), maxval).unwrap();
    for row in map.labels().chunks(map.width()) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    Ok(out)
}

pub fn write_label_map(path: impl AsRef<Path>, map: &LabelMap) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_p2(map)?).map_err(|e| Error::io(path, e))
}

pub fn read_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

/// Reads the header tokens, skipping `#` comments. Returns the offset of the
/// byte following the single whitespace after maxval.
fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'2' || bytes[1] == b'5') {
        return Err(Error::Header("expected a P2 or P5 PGM".into()));
    }
    let mut pos = 2;
    let mut vals = [0u64; 3];
    for (i, slot) in vals.iter_mut().enumerate() {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        let tok = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        *slot = tok
            .parse()
            .map_err(|_| Error::Header(format!("bad PGM {}", ["width", "height", "maxval"][i])))?;
    }
    let [width, height, maxval] = vals;
    if width == 0 || height == 0 {
        return Err(Error::Header("PGM dimensions must be positive".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Header(format!(
            "PGM maxval {maxval} outside 1..=65535"
        )));
    }
    if pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Header("missing whitespace after maxval".into()));
    }
    Ok(Header {
        magic: [bytes[0], bytes[1]],
        width: width as usize,
        height: height as usize,
        maxval: maxval as u32,
        data_start: (pos + 1).min(bytes.len()),
    })
}

pub fn parse_pgm(bytes: &[u8]) -> Result<LabelMap> {
    let h = parse_header(bytes)?;
    let count = h.width * h.height;
    let body = &bytes[h.data_start..];
    let labels: Vec<u32> = if h.magic[1] == b'2' {
        let text =
            std::str::from_utf8(body).map_err(|_| Error::Header("P2 body is not ASCII".into()))?;
        // line numbers are relative to the whole file
        let header_lines = bytes[..h.data_start]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        let mut labels = Vec::with_capacity(count);
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for tok in line.split_whitespace() {
                let v: u32 = tok.parse().map_err(|_| {
                    Error::parse(header_lines + i + 1, format!("bad PGM sample {tok:?}"))
                })?;
                if v > h.maxval {
                    return Err(Error::parse(
                        header_lines + i + 1,
                        format!("sample {v} exceeds maxval {}", h.maxval),
                    ));
                }
                labels.push(v);
            }
        }
        labels
    } else {
        let wide = h.maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        if body.len() < need {
            return Err(Error::CountMismatch {
                expected: count,
                found: body.len() / if wide { 2 } else { 1 },
            });
        }
        if wide {
            body[..need]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as u32)
                .collect()
        } else {
            body[..need].iter().map(|&b| b as u32).collect()
        }
    };
    if labels.len() != count {
        return Err(Error::CountMismatch {
            expected: count,
            found: labels.len(),
        });
    }
    LabelMap::new(h.width, h.height, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn writes_plain_pgm() {
        let map = LabelMap::new(3, 2, vec![0, 1, 1, 2, 2, 0]).unwrap();
        assert_eq!(to_p2(&map).unwrap(), "P2\n3 2\n2\n0 1 1\n2 2 0\n");
        let empty = LabelMap::background(2, 1);
        assert_eq!(to_p2(&empty).unwrap(), "P2\n2 1\n1\n0 0\n");
    }

    #[test]
    fn reads_comments_and_binary() {
        let map = parse_pgm(b"P2\n# made by hand\n2 2 # dims\n3\n0 1\n3 2\n").unwrap();
        assert_eq!(map.labels(), &[0, 1, 3, 2]);

        let mut p5 = b"P5 3 1 255\n".to_vec();
        p5.extend([0u8, 7, 255]);
        assert_eq!(parse_pgm(&p5).unwrap().labels(), &[0, 7, 255]);

        let mut p5 = b"P5 2 1 1000\n".to_vec();
        p5.extend([0x03, 0xE8, 0x00, 0x01]);
        assert_eq!(parse_pgm(&p5).unwrap().labels(), &[1000, 1]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(
            parse_pgm(b"P3\n1 1\n1\n0\n"),
            Err(Error::Header(_))
        ));
        assert!(matches!(
            parse_pgm(b"P2\n2 2\n1\n0 1 1\n"),
            Err(Error::CountMismatch { .. })
        ));
        assert!(matches!(
            parse_pgm(b"P2\n1 1\n1\n2\n"),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(matches!(parse_pgm(b"P2\n0 1\n1\n"), Err(Error::Header(_))));
        assert!(matches!(
            parse_pgm(b"P5 2 1 255\n\x01"),
            Err(Error::CountMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn p2_round_trip(w in 1usize..6, h in 1usize..6, seed in prop::collection::vec(0u32..300, 36)) {
            let map = LabelMap::new(w, h, seed[..w * h].to_vec()).unwrap();
            let back = parse_pgm(to_p2(&map).unwrap().as_bytes()).unwrap();
            prop_assert_eq!(back, map);
        }
    }
}
