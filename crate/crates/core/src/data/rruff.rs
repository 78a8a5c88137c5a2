//! RRUFF-style text spectra: `##KEY=VALUE` headers, `x, y` data lines and
//! an optional `##END=` terminator.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::lineshape::PeakKind;
use crate::spectrum::{Modality, Spectrum};

pub const NAME_KEY: &str = "NAMES";
pub const GENERATED_KEY: &str = "GENERATED";
pub const PRIOR_KEY: &str = "PRIOR";

#[derive(Debug, Clone, PartialEq)]
pub struct RruffRecord {
    pub metadata: IndexMap<String, String>,
    pub spectrum: Spectrum<f64>,
    pub source_path: Option<PathBuf>,
}

impl RruffRecord {
    pub fn new(name: &str, spectrum: Spectrum<f64>) -> Self {
        let mut metadata = IndexMap::new();
        metadata.insert(NAME_KEY.to_string(), name.to_string());
        RruffRecord { metadata, spectrum, source_path: None }
    }

    /// Record for a model output, tagged as generated under `prior`.
    pub fn generated(name: &str, spectrum: Spectrum<f64>, prior: PeakKind) -> Self {
        let mut r = RruffRecord::new(name, spectrum);
        r.metadata.insert(GENERATED_KEY.to_string(), "true".to_string());
        r.metadata.insert(PRIOR_KEY.to_string(), prior.to_string());
        r
    }

    pub fn name(&self) -> Option<&str> {
        self.metadata.get(NAME_KEY).map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "##{k}={v}");
        }
        for (x, y) in self.spectrum.axis().iter().zip(self.spectrum.intensity()) {
            let _ = writeln!(out, "{x}, {y}");
        }
        out.push_str("##END=\n");
        out
    }
}

/// Sample-name normalization used for pairing across modalities.
pub fn normalize_name(name: &str) -> String {
    name.trim().to_lowercase()
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses one file's text. The spectrum gets `modality`; data lines may come
/// in any x order and are stably sorted ascending.
pub fn parse_rruff(text: &str, modality: Modality) -> Result<RruffRecord> {
    let mut metadata = IndexMap::new();
    let mut points: Vec<(f64, f64, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix("##") {
            let (key, value) = header.split_once('=').unwrap_or((header, ""));
            let key = key.trim();
            if key == "END" {
                break;
            }
            metadata.insert(key.to_string(), value.trim().to_string());
            continue;
        }
        let (xs, ys) = line
            .split_once(',')
            .ok_or_else(|| parse_error(line_no, format!("expected `x, y`, found {line:?}")))?;
        let parse = |s: &str| -> Result<f64> {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| parse_error(line_no, format!("not a number: {:?}", s.trim())))?;
            if !v.is_finite() {
                return Err(parse_error(line_no, "non-finite value"));
            }
            Ok(v)
        };
        points.push((parse(xs)?, parse(ys)?, line_no));
    }
    if points.is_empty() {
        return Err(parse_error(0, "no data lines"));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(parse_error(w[1].2, format!("duplicate x value {}", w[1].0)));
    }
    let (axis, intensity): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y, _)| (x, y)).unzip();
    let spectrum = Spectrum::new(axis, intensity, modality)?;
    let spectrum = match metadata.get(NAME_KEY) {
        Some(name) => spectrum.with_label(name.clone()),
        None => spectrum,
    };
    Ok(RruffRecord { metadata, spectrum, source_path: None })
}

pub fn read_rruff(path: &Path, modality: Modality) -> Result<RruffRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut record = parse_rruff(&text, modality).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        other => other,
    })?;
    record.source_path = Some(path.to_path_buf());
    Ok(record)
}

pub fn write_rruff(path: &Path, record: &RruffRecord) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, record.to_text()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_file() {
        let r = parse_rruff("##NAMES=Test\n1, 0.5\n2, 1.0\n##END=", Modality::Raman).unwrap();
        assert_eq!(r.metadata.len(), 1);
        assert_eq!(r.name(), Some("Test"));
        assert_eq!(r.spectrum.axis(), &[1.0, 2.0]);
        assert_eq!(r.spectrum.intensity(), &[0.5, 1.0]);
        assert_eq!(r.spectrum.modality, Modality::Raman);
    }

    #[test]
    fn headers_only_is_an_error() {
        let e = parse_rruff("##NAMES=Test\n##END=\n", Modality::Ir).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
    }

    #[test]
    fn descending_data_is_sorted_consistently() {
        let r = parse_rruff("3, 30\n1, 10\n2, 20\n", Modality::Xrd).unwrap();
        assert_eq!(r.spectrum.axis(), &[1.0, 2.0, 3.0]);
        assert_eq!(r.spectrum.intensity(), &[10.0, 20.0, 30.0]);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        match parse_rruff("##NAMES=x\n1, 2\n2, abc\n", Modality::Ir) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_rruff("1, 2\n2 3\n", Modality::Ir) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn end_marker_stops_parsing() {
        let r = parse_rruff("1, 2\n2, 3\n##END=\ngarbage\n", Modality::Ir).unwrap();
        assert_eq!(r.spectrum.len(), 2);
    }

    #[test]
    fn values_may_contain_equals_and_whitespace() {
        let r = parse_rruff("##DESCRIPTION= a=b \n  1.5 ,  2e-3 \n2,1\n", Modality::Ir).unwrap();
        assert_eq!(r.metadata["DESCRIPTION"], "a=b");
        assert_eq!(r.spectrum.intensity()[0], 2e-3);
    }

    #[test]
    fn generated_records_carry_tags() {
        let s = Spectrum::new(vec![0.0, 1.0], vec![0.2, 0.4], Modality::Raman).unwrap();
        let text = RruffRecord::generated("Quartz", s, PeakKind::Voigt).to_text();
        assert!(text.contains("##GENERATED=true\n"));
        assert!(text.contains("##PRIOR=voigt\n"));
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            mut xs in proptest::collection::vec(-1e4f64..1e4, 2..40),
            seed in any::<u64>(),
            name in "[A-Za-z][A-Za-z0-9 _-]{0,20}",
        ) {
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            prop_assume!(xs.len() >= 2);
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| (x * 1.37 + (seed % 97) as f64 + i as f64).sin()).collect();
            let s = Spectrum::new(xs, ys, Modality::Ir).unwrap();
            let mut rec = RruffRecord::new(name.trim(), s);
            rec.metadata.insert("RRUFFID".into(), "R000001".into());
            let back = parse_rruff(&rec.to_text(), Modality::Ir).unwrap();
            prop_assert_eq!(back.metadata, rec.metadata.clone());
            prop_assert_eq!(back.spectrum.axis(), rec.spectrum.axis());
            prop_assert_eq!(back.spectrum.intensity(), rec.spectrum.intensity());
        }
    }
}
