//! Plain-text parameter snapshots.
//!
//! ```text
//! pairdistill-params direct 3
//! 0.5
//! -1.25
//! 2
//! ```
//!
//! or, for splat fields, `pairdistill-params splat <len> <width> <height> <channels>`
//! followed by the flat parameter vector (per splat: cx, cy, log_scale,
//! then one amplitude per channel). One value per line, shortest
//! round-trip decimal form.

use std::fmt::Write as _;
use std::path::Path;

use pairdistill_core::representation::{DirectVector, ImageShape, Representation, SplatField2D};

use crate::error::{format_err, io_err, Result};

const MAGIC: &str = "pairdistill-params";

pub fn format_snapshot(rep: &Representation) -> String {
    let params = rep.params();
    let mut out = match rep {
        Representation::Direct(_) => format!("{MAGIC} direct {}\n", params.len()),
        Representation::Splat(f) => {
            let s = f.shape();
            format!("{MAGIC} splat {} {} {} {}\n", params.len(), s.width, s.height, s.channels)
        }
    };
    for p in params {
        let _ = writeln!(out, "{p}");
    }
    out
}

pub fn parse_snapshot(text: &str) -> Result<Representation, String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.first() != Some(&MAGIC) {
        return Err("not a parameter snapshot".into());
    }
    let nums: Vec<usize> = header
        .iter()
        .skip(2)
        .map(|v| v.parse().map_err(|_| format!("bad header field '{v}'")))
        .collect::<Result<_, _>>()?;
    let params: Vec<f64> = lines
        .enumerate()
        .map(|(i, l)| l.trim().parse().map_err(|_| format!("line {}: bad value '{l}'", i + 2)))
        .collect::<Result<_, _>>()?;
    let len = *nums.first().ok_or("header lacks a length")?;
    if params.len() != len {
        return Err(format!("header says {len} values, found {}", params.len()));
    }
    match (header.get(1).copied(), nums.as_slice()) {
        (Some("direct"), [_]) => DirectVector::new(params).map(Into::into).map_err(|e| e.to_string()),
        (Some("splat"), [_, w, h, c]) => {
            let shape = ImageShape { width: *w, height: *h, channels: *c };
            SplatField2D::from_params(params, shape).map(Into::into).map_err(|e| e.to_string())
        }
        _ => Err("unknown representation kind in header".into()),
    }
}

pub fn write_snapshot(path: &Path, rep: &Representation) -> Result<()> {
    std::fs::write(path, format_snapshot(rep)).map_err(io_err(path))
}

pub fn read_snapshot(path: &Path) -> Result<Representation> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_snapshot(&text).map_err(|m| format_err(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pairdistill_core::representation::Splat;

    #[test]
    fn direct_round_trip() {
        let rep: Representation = DirectVector::new(vec![0.1, -2.5e-9, 3.0]).unwrap().into();
        let text = format_snapshot(&rep);
        assert!(text.starts_with("pairdistill-params direct 3\n0.1\n"));
        assert_eq!(parse_snapshot(&text).unwrap(), rep);
    }

    #[test]
    fn splat_round_trip() {
        let shape = ImageShape { width: 5, height: 4, channels: 3 };
        let splats = [
            Splat { center: [1.0, 2.0], log_scale: -0.3, amplitude: vec![0.1, 0.2, 0.3] },
            Splat { center: [4.5, 0.25], log_scale: 0.7, amplitude: vec![1.0, -1.0, 1.0 / 3.0] },
        ];
        let rep: Representation = SplatField2D::new(&splats, shape).unwrap().into();
        assert_eq!(parse_snapshot(&format_snapshot(&rep)).unwrap(), rep);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_snapshot("").is_err());
        assert!(parse_snapshot("pairdistill-params direct 2\n1\n").is_err());
        assert!(parse_snapshot("pairdistill-params direct 1\nx\n").is_err());
        assert!(parse_snapshot("pairdistill-params splat 5 2 2 1\n1\n2\n3\n4\n5\n").is_err());
        assert!(parse_snapshot("pairdistill-params cube 1\n1\n").is_err());
    }
}
