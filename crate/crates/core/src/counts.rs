//! Coincidence tables keyed by analyzer settings, and their text format.
//!
//! Counts are stored as `f64`: sampled tables hold whole numbers, while the
//! exact-expectation mode stores Born-rule expectation values directly.
//!
//! File format, one setting per line:
//!
//! ```text
//! # trials 1000000
//! # seed 42
//! 0.000000000000 0.392699081699 146446
//! H V 500000
//! ```
//!
//! A line is either `angle_a angle_b count` (radians) or
//! `label_a label_b count` with labels from `{H, V, D, R}`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::qstate::{Analyzer, PolLabel};

/// Angle settings within this distance (mod π) match on lookup.
pub const ANGLE_MATCH_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Setting {
    Angles(f64, f64),
    Labels(PolLabel, PolLabel),
}

impl Setting {
    pub fn analyzers(self) -> (Analyzer, Analyzer) {
        match self {
            Setting::Angles(a, b) => (Analyzer::Linear(a), Analyzer::Linear(b)),
            Setting::Labels(a, b) => (Analyzer::Label(a), Analyzer::Label(b)),
        }
    }

    fn format(&self) -> String {
        match self {
            Setting::Angles(a, b) => format!("{a:.12} {b:.12}"),
            Setting::Labels(a, b) => format!("{a} {b}"),
        }
    }
}

/// Distance between two polarizer angles, modulo π.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceTable {
    pub settings: Vec<Setting>,
    pub counts: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl CoincidenceTable {
    pub fn new(settings: Vec<Setting>, counts: Vec<f64>, trials: u64, seed: u64) -> Result<Self> {
        if settings.len() != counts.len() {
            return Err(Error::Dimension(format!("{} settings, {} counts", settings.len(), counts.len())));
        }
        if let Some(c) = counts.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput(format!("count {c} is not a non-negative number")));
        }
        Ok(CoincidenceTable { settings, counts, trials, seed })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Count for a linear-angle setting, matching angles modulo π.
    pub fn count_at_angles(&self, a: f64, b: f64) -> Result<f64> {
        self.settings
            .iter()
            .zip(&self.counts)
            .find(|(s, _)| match s {
                Setting::Angles(x, y) => angle_distance(*x, a) < ANGLE_MATCH_TOL && angle_distance(*y, b) < ANGLE_MATCH_TOL,
                _ => false,
            })
            .map(|(_, c)| *c)
            .ok_or_else(|| Error::MissingSetting(format!("angles ({a:.6}, {b:.6})")))
    }

    pub fn count_at_labels(&self, a: PolLabel, b: PolLabel) -> Result<f64> {
        self.settings
            .iter()
            .zip(&self.counts)
            .find(|(s, _)| **s == Setting::Labels(a, b))
            .map(|(_, c)| *c)
            .ok_or_else(|| Error::MissingSetting(format!("labels ({a}, {b})")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# trials {}", self.trials).unwrap();
        writeln!(out, "# seed {}", self.seed).unwrap();
        for (s, c) in self.settings.iter().zip(&self.counts) {
            writeln!(out, "{} {}", s.format(), format_count(*c)).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut settings = Vec::new();
        let mut counts = Vec::new();
        let (mut trials, mut seed) = (0u64, 0u64);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let mut it = meta.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("trials"), Some(v)) => trials = parse_field(v, lineno)?,
                    (Some("seed"), Some(v)) => seed = parse_field(v, lineno)?,
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse { line: lineno, msg: format!("expected 3 fields, found {}", fields.len()) });
            }
            let setting = match (fields[0].parse::<PolLabel>(), fields[1].parse::<PolLabel>()) {
                (Ok(a), Ok(b)) => Setting::Labels(a, b),
                _ => Setting::Angles(parse_field(fields[0], lineno)?, parse_field(fields[1], lineno)?),
            };
            let count: f64 = parse_field(fields[2], lineno)?;
            if !(count >= 0.0) {
                return Err(Error::Parse { line: lineno, msg: "negative count".into() });
            }
            settings.push(setting);
            counts.push(count);
        }
        CoincidenceTable::new(settings, counts, trials, seed)
    }
}

/// Whole numbers (up to 1e-9 relative round-off) print as integers;
/// expectation values print with nine decimals.
pub fn format_count(c: f64) -> String {
    let r = c.round();
    if (c - r).abs() <= 1e-9 * r.abs().max(1.0) && r.abs() < 1e15 {
        format!("{}", r as i64)
    } else {
        format!("{c:.9}")
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse `{s}`") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let t = CoincidenceTable::new(
            vec![Setting::Angles(0.0, PI / 8.0), Setting::Labels(PolLabel::H, PolLabel::R)],
            vec![12.0, 0.25],
            100,
            7,
        )
        .unwrap();
        let back = CoincidenceTable::parse(&t.to_text()).unwrap();
        assert_eq!(back.trials, 100);
        assert_eq!(back.seed, 7);
        assert_eq!(back.settings[1], Setting::Labels(PolLabel::H, PolLabel::R));
        assert!((back.count_at_angles(0.0, 0.3927).unwrap() - 12.0).abs() < 1e-12);
        assert!((back.counts[1] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn angle_lookup_is_mod_pi() {
        let t = CoincidenceTable::new(vec![Setting::Angles(PI, 1.5 * PI)], vec![3.0], 0, 0).unwrap();
        assert_eq!(t.count_at_angles(0.0, PI / 2.0).unwrap(), 3.0);
        assert!(matches!(t.count_at_angles(0.1, 0.0), Err(Error::MissingSetting(_))));
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = CoincidenceTable::parse("# trials 5\nH V\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(CoincidenceTable::parse("H V -3\n").is_err());
    }
}
