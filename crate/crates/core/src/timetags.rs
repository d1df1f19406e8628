//! Time-tag correlation analysis: windowed coincidences, normalized
//! cross-correlation g², heralded anticorrelation α, and Gaussian fits of
//! pulse-shape histograms.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::counts::{format_count, parse_field};
use crate::error::{Error, Result};
use crate::linalg;

pub const STOKES: &str = "stokes";
pub const ANTISTOKES: &str = "antistokes";
pub const TRIGGER: &str = "trigger";

/// g² above this value cannot be produced by classical fields.
pub const G2_NONCLASSICAL_THRESHOLD: f64 = 2.0;

/// Detection timestamps (ns) per channel, strictly ascending.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeTagStream {
    channels: BTreeMap<String, Vec<f64>>,
}

impl TimeTagStream {
    pub fn new(channels: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        for (name, tags) in &channels {
            if tags.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidInput(format!("channel `{name}` has a non-finite timestamp")));
            }
            if tags.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidInput(format!("timestamps of channel `{name}` are not strictly ascending")));
            }
        }
        Ok(TimeTagStream { channels })
    }

    /// Sorts each channel and drops repeated timestamps (a detector cannot
    /// fire twice at the same instant).
    pub fn from_unsorted(mut channels: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        for tags in channels.values_mut() {
            tags.sort_by(f64::total_cmp);
            tags.dedup();
        }
        Self::new(channels)
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channels.get(name).map(|v| v.as_slice()).ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(|s| s.as_str())
    }

    pub fn insert(&mut self, name: &str, tags: Vec<f64>) -> Result<()> {
        let mut one = BTreeMap::new();
        one.insert(name.to_string(), tags);
        let checked = TimeTagStream::new(one)?;
        self.channels.extend(checked.channels);
        Ok(())
    }

    /// Every timestamp shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> TimeTagStream {
        TimeTagStream {
            channels: self.channels.iter().map(|(k, v)| (k.clone(), v.iter().map(|t| t + dt).collect())).collect(),
        }
    }

    /// `channel_id timestamp_ns` lines, globally sorted by time (ties by
    /// channel name).
    pub fn to_text(&self) -> String {
        let mut events: Vec<(f64, &str)> =
            self.channels.iter().flat_map(|(k, v)| v.iter().map(move |t| (*t, k.as_str()))).collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
        let mut out = String::with_capacity(events.len() * 24);
        for (t, ch) in events {
            writeln!(out, "{ch} {t:.4}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut channels: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut last = f64::NEG_INFINITY;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (ch, t) = match (it.next(), it.next(), it.next()) {
                (Some(ch), Some(t), None) => (ch, parse_field::<f64>(t, i + 1)?),
                _ => return Err(Error::Parse { line: i + 1, msg: "expected `channel_id timestamp_ns`".into() }),
            };
            if t < last {
                return Err(Error::Parse { line: i + 1, msg: "events are not sorted by timestamp".into() });
            }
            last = t;
            channels.entry(ch.to_string()).or_default().push(t);
        }
        Self::new(channels)
    }
}

/// Pairs `(a, b)` with `|t_a − t_b| ≤ window/2`, each tag used at most once,
/// matched greedily in time order.
pub fn coincidences(s: &TimeTagStream, ch_a: &str, ch_b: &str, window_ns: f64) -> Result<u64> {
    let a = s.channel(ch_a)?;
    let b = s.channel(ch_b)?;
    Ok(count_matches(a, b, window_ns / 2.0))
}

fn count_matches(a: &[f64], b: &[f64], half: f64) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let d = a[i] - b[j];
        if d.abs() <= half {
            n += 1;
            i += 1;
            j += 1;
        } else if d < 0.0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    n
}

/// `g² = N_c · T / (N_a · N_b · τ)`, accidentals estimated from the mean
/// singles rates.
pub fn g2_cross(s: &TimeTagStream, ch_a: &str, ch_b: &str, window_ns: f64, duration_ns: f64) -> Result<f64> {
    let na = s.channel(ch_a)?.len();
    let nb = s.channel(ch_b)?.len();
    if na == 0 || nb == 0 {
        return Err(Error::Degenerate(format!("empty channel in g2({ch_a}, {ch_b})")));
    }
    if !(window_ns > 0.0 && duration_ns > 0.0) {
        return Err(Error::InvalidInput("window and duration must be positive".into()));
    }
    let nc = coincidences(s, ch_a, ch_b, window_ns)?;
    Ok(nc as f64 * duration_ns / (na as f64 * nb as f64 * window_ns))
}

fn any_within(tags: &[f64], t: f64, half: f64) -> bool {
    let k = tags.partition_point(|&x| x < t - half);
    k < tags.len() && tags[k] <= t + half
}

/// Heralded anticorrelation `α = N_T · N_T12 / (N_T1 · N_T2)` over trigger
/// windows of width `window_ns` centred on each trigger.
pub fn alpha_heralded(s: &TimeTagStream, trigger: &str, ch_1: &str, ch_2: &str, window_ns: f64) -> Result<f64> {
    let t = s.channel(trigger)?;
    let c1 = s.channel(ch_1)?;
    let c2 = s.channel(ch_2)?;
    if t.is_empty() {
        return Err(Error::Degenerate("no trigger events".into()));
    }
    let half = window_ns / 2.0;
    let (mut n1, mut n2, mut n12) = (0u64, 0u64, 0u64);
    for &tt in t {
        let h1 = any_within(c1, tt, half);
        let h2 = any_within(c2, tt, half);
        n1 += h1 as u64;
        n2 += h2 as u64;
        n12 += (h1 && h2) as u64;
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::Degenerate("a detector never fired inside a trigger window".into()));
    }
    Ok(t.len() as f64 * n12 as f64 / (n1 as f64 * n2 as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Histogram {
    pub fn new(centers: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if centers.len() != counts.len() {
            return Err(Error::Dimension(format!("{} bins, {} counts", centers.len(), counts.len())));
        }
        Ok(Histogram { centers, counts })
    }

    /// `bin_center_ns,count` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center_ns,count\n");
        for (c, n) in self.centers.iter().zip(&self.counts) {
            writeln!(out, "{c:.6},{}", format_count(*n)).unwrap();
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut centers = Vec::new();
        let mut counts = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("bin")) {
                continue;
            }
            let (c, n) = line.split_once(',').ok_or_else(|| Error::Parse { line: i + 1, msg: "expected `bin_center_ns,count`".into() })?;
            centers.push(parse_field(c.trim(), i + 1)?);
            counts.push(parse_field(n.trim(), i + 1)?);
        }
        Histogram::new(centers, counts)
    }
}

/// Histogram of `stop − start` delays for every start tag, over
/// `[0, bins·bin_width)`.
pub fn delay_histogram(s: &TimeTagStream, start: &str, stop: &str, bin_width_ns: f64, bins: usize) -> Result<Histogram> {
    let a = s.channel(start)?;
    let b = s.channel(stop)?;
    if !(bin_width_ns > 0.0) || bins == 0 {
        return Err(Error::InvalidInput("histogram needs a positive bin width and at least one bin".into()));
    }
    let span = bin_width_ns * bins as f64;
    let mut counts = vec![0.0; bins];
    for &t in a {
        let lo = b.partition_point(|&x| x < t);
        for &x in &b[lo..] {
            let d = x - t;
            if d >= span {
                break;
            }
            counts[((d / bin_width_ns) as usize).min(bins - 1)] += 1.0;
        }
    }
    let centers = (0..bins).map(|k| (k as f64 + 0.5) * bin_width_ns).collect();
    Histogram::new(centers, counts)
}

/// Fitted `y0 + A·exp(−2((t − tc)/w)²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseFit {
    pub y0: f64,
    pub amplitude: f64,
    pub tc: f64,
    pub w: f64,
    /// `w·√(2 ln 2)`
    pub fwhm: f64,
    pub iterations: usize,
}

fn pulse_model(p: &[f64; 4], t: f64) -> f64 {
    let x = (t - p[2]) / p[3];
    p[0] + p[1] * (-2.0 * x * x).exp()
}

fn sse(p: &[f64; 4], h: &Histogram) -> f64 {
    h.centers.iter().zip(&h.counts).map(|(t, y)| (y - pulse_model(p, *t)).powi(2)).sum()
}

const MAX_LM_ITERATIONS: usize = 200;
const LM_STEP_TOL: f64 = 1e-6;

/// Damped least-squares fit of the Gaussian pulse model. Starts from
/// `y0 = min`, `A = max − min`, `tc` at the peak bin and `w` from the RMS
/// width; stops once an accepted step changes every parameter by less than
/// 1e-6 relative.
pub fn fit_gaussian_pulse(h: &Histogram) -> Result<PulseFit> {
    let n = h.centers.len();
    if n < 5 || h.counts.len() != n {
        return Err(Error::InvalidInput(format!("pulse fit needs at least 5 bins, got {n}")));
    }
    let ymin = h.counts.iter().cloned().fold(f64::INFINITY, f64::min);
    let (imax, ymax) = h.counts.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &y)| if y > acc.1 { (i, y) } else { acc });
    if !(ymax > ymin) {
        return Err(Error::Degenerate("flat histogram".into()));
    }
    let tc0 = h.centers[imax];
    let (mut m0, mut m2) = (0.0, 0.0);
    for (t, y) in h.centers.iter().zip(&h.counts) {
        let wgt = y - ymin;
        m0 += wgt;
        m2 += wgt * (t - tc0).powi(2);
    }
    let rms = (m2 / m0).sqrt();
    let mut p = [ymin, ymax - ymin, tc0, (2.0 * rms).max(1e-9)];
    let mut cost = sse(&p, h);
    let mut lambda = 1e-3;

    for iter in 1..=MAX_LM_ITERATIONS {
        let mut jtj = [0.0; 16];
        let mut jtr = [0.0; 4];
        for (t, y) in h.centers.iter().zip(&h.counts) {
            let x = (t - p[2]) / p[3];
            let e = (-2.0 * x * x).exp();
            let jac = [1.0, e, p[1] * e * 4.0 * x / p[3], p[1] * e * 4.0 * x * x / p[3]];
            let r = y - (p[0] + p[1] * e);
            for i in 0..4 {
                jtr[i] += jac[i] * r;
                for j in 0..4 {
                    jtj[i * 4 + j] += jac[i] * jac[j];
                }
            }
        }
        loop {
            let mut damped = jtj;
            for i in 0..4 {
                damped[i * 4 + i] += lambda * jtj[i * 4 + i].max(1e-12);
            }
            let step = match linalg::solve(&damped, &jtr) {
                Ok(s) => s,
                Err(_) => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        return Err(Error::NoConvergence(iter));
                    }
                    continue;
                }
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            let trial_cost = sse(&trial, h);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel = step.iter().zip(&p).map(|(d, v)| d.abs() / v.abs().max(1e-12)).fold(0.0, f64::max);
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                if rel < LM_STEP_TOL {
                    let w = p[3].abs();
                    if !(p[1] > 0.0) {
                        return Err(Error::Degenerate(format!("fitted amplitude {} is not positive", p[1])));
                    }
                    return Ok(PulseFit {
                        y0: p[0],
                        amplitude: p[1],
                        tc: p[2],
                        w,
                        fwhm: w * (2.0 * std::f64::consts::LN_2).sqrt(),
                        iterations: iter,
                    });
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no downhill step exists: already at the minimum
                let rel_cost = cost / h.counts.iter().map(|y| y * y).sum::<f64>().max(1e-300);
                if rel_cost < 1e-20 || cost == 0.0 {
                    let w = p[3].abs();
                    return Ok(PulseFit { y0: p[0], amplitude: p[1], tc: p[2], w, fwhm: w * (2.0 * std::f64::consts::LN_2).sqrt(), iterations: iter });
                }
                return Err(Error::NoConvergence(iter));
            }
        }
    }
    Err(Error::NoConvergence(MAX_LM_ITERATIONS))
}
