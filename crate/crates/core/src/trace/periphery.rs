use std::path::{Path, PathBuf};

use super::{io_err, ObservationTrace, TraceError};

/// Change log of one sensor: `(timestamp_ms, raw value)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SensorLog {
    entries: Vec<(u64, String)>,
}

impl SensorLog {
    pub fn new(entries: Vec<(u64, String)>) -> Result<Self, TraceError> {
        for (i, w) in entries.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(TraceError::NotIncreasing { source_name: "log".into(), line: i + 2, t: w[1].0 });
            }
        }
        Ok(SensorLog { entries })
    }

    pub fn entries(&self) -> &[(u64, String)] {
        &self.entries
    }

    /// Parses `timestamp_ms,value` lines; a non-numeric first line is a header.
    pub fn parse(text: &str, source_name: &str) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut entries: Vec<(u64, String)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 1;
            let fmt = |message: String| TraceError::Format { source_name: source_name.into(), line, message };
            let rec = rec.map_err(|e| fmt(e.to_string()))?;
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            if rec.len() != 2 {
                return Err(fmt(format!("expected 2 columns, got {}", rec.len())));
            }
            let t = match rec[0].parse::<u64>() {
                Ok(t) => t,
                Err(_) if line == 1 => continue,
                Err(_) => return Err(fmt(format!("bad timestamp `{}`", &rec[0]))),
            };
            if let Some(&(prev, _)) = entries.last() {
                if t <= prev {
                    return Err(TraceError::NotIncreasing { source_name: source_name.into(), line, t });
                }
            }
            entries.push((t, rec[1].to_string()));
        }
        Ok(SensorLog { entries })
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("timestamp_ms,value\n");
        for (t, v) in &self.entries {
            s.push_str(&format!("{t},{v}\n"));
        }
        s
    }

    /// Raw value of the latest entry at or before `t`.
    pub fn at(&self, t: u64) -> Option<&str> {
        let i = self.entries.partition_point(|(ts, _)| *ts <= t);
        (i > 0).then(|| self.entries[i - 1].1.as_str())
    }
}

/// Token table for Boolean sensors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tokens {
    pub truthy: Vec<String>,
    pub falsy: Vec<String>,
}

impl Default for Tokens {
    fn default() -> Self {
        Tokens { truthy: vec!["ON".into(), "OPEN".into()], falsy: vec!["OFF".into(), "CLOSED".into()] }
    }
}

impl Tokens {
    pub fn interpret(&self, value: &str) -> Option<bool> {
        if self.truthy.iter().any(|t| t == value) {
            Some(true)
        } else if self.falsy.iter().any(|t| t == value) {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    Bool,
    /// `above == true` maps `value >= threshold` to true, otherwise
    /// `value < threshold` is true.
    Threshold { threshold: f64, above: bool },
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kind::Bool => f.write_str("bool"),
            Kind::Threshold { threshold, above } => {
                write!(f, "thresh:{threshold}:{}", if *above { "above" } else { "below" })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Periphery {
    pub ap: String,
    pub kind: Kind,
    pub default: bool,
    pub file: PathBuf,
    pub log: SensorLog,
}

impl Periphery {
    pub fn interpret(&self, raw: &str, tokens: &Tokens) -> Result<bool, TraceError> {
        match &self.kind {
            Kind::Bool => tokens
                .interpret(raw)
                .ok_or_else(|| TraceError::Token { ap: self.ap.clone(), value: raw.to_string() }),
            Kind::Threshold { threshold, above } => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| TraceError::NotNumeric { ap: self.ap.clone(), value: raw.to_string() })?;
                Ok(if *above { v >= *threshold } else { v < *threshold })
            }
        }
    }

    /// Held value at absolute time `t`.
    pub fn poll(&self, t: u64, tokens: &Tokens) -> Result<bool, TraceError> {
        match self.log.at(t) {
            None => Ok(self.default),
            Some(raw) => self.interpret(raw, tokens),
        }
    }

    /// Interpreted `(timestamp, value)` for every log entry.
    pub fn interpreted(&self, tokens: &Tokens) -> Result<Vec<(u64, bool)>, TraceError> {
        self.log.entries().iter().map(|(t, raw)| Ok((*t, self.interpret(raw, tokens)?))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PollConfig {
    pub start: u64,
    pub end: u64,
    pub interval: u64,
}

impl PollConfig {
    pub fn new(start: u64, end: u64, interval: u64) -> Result<Self, TraceError> {
        if interval == 0 {
            return Err(TraceError::PollConfig("interval must be positive".into()));
        }
        if start >= end {
            return Err(TraceError::PollConfig(format!("start {start} is not before end {end}")));
        }
        Ok(PollConfig { start, end, interval })
    }

    /// Number of rounds: polls at `start + k * interval < end`.
    pub fn rounds(&self) -> usize {
        ((self.end - self.start).div_ceil(self.interval)) as usize
    }

    pub fn time_of(&self, round: usize) -> u64 {
        self.start + round as u64 * self.interval
    }
}

/// Periphery manifest.
///
/// ```text
/// # comment
/// tokens true=ON|OPEN false=OFF|CLOSED
/// lamp0, logs/lamp0.csv, bool, default=false
/// bed, logs/bed.csv, thresh:30:above, default=false
/// ```
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub tokens: Tokens,
    pub peripheries: Vec<Periphery>,
}

impl Manifest {
    /// Reads the manifest and every log it names; relative log paths are
    /// taken from the manifest's directory.
    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), |file| SensorLog::load(&dir.join(file)))
    }

    pub fn parse(
        text: &str,
        source_name: &str,
        mut open: impl FnMut(&Path) -> Result<SensorLog, TraceError>,
    ) -> Result<Self, TraceError> {
        let mut m = Manifest::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fmt = |message: String| TraceError::Format { source_name: source_name.into(), line, message };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix("tokens ") {
                m.tokens = parse_tokens(rest).map_err(fmt)?;
                continue;
            }
            let cols: Vec<&str> = body.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(fmt(format!("expected 4 columns, got {}", cols.len())));
            }
            let kind = parse_kind(cols[2]).map_err(fmt)?;
            let default = match cols[3].strip_prefix("default=") {
                Some("true") => true,
                Some("false") => false,
                _ => return Err(fmt(format!("expected default=true|false, got `{}`", cols[3]))),
            };
            let file = PathBuf::from(cols[1]);
            let log = open(&file)?;
            m.peripheries.push(Periphery { ap: cols[0].to_string(), kind, default, file, log });
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("tokens true={} false={}\n", self.tokens.truthy.join("|"), self.tokens.falsy.join("|"));
        for p in &self.peripheries {
            s.push_str(&format!("{}, {}, {}, default={}\n", p.ap, p.file.display(), p.kind, p.default));
        }
        s
    }

    pub fn get(&self, ap: &str) -> Option<&Periphery> {
        self.peripheries.iter().find(|p| p.ap == ap)
    }
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    if s == "bool" {
        return Ok(Kind::Bool);
    }
    let rest = s.strip_prefix("thresh:").ok_or_else(|| format!("unknown sensor type `{s}`"))?;
    let (x, dir) = rest.rsplit_once(':').ok_or_else(|| format!("expected thresh:<x>:<above|below>, got `{s}`"))?;
    let threshold: f64 = x.parse().map_err(|_| format!("bad threshold `{x}`"))?;
    let above = match dir {
        "above" => true,
        "below" => false,
        _ => return Err(format!("expected above or below, got `{dir}`")),
    };
    Ok(Kind::Threshold { threshold, above })
}

fn parse_tokens(s: &str) -> Result<Tokens, String> {
    let mut tokens = Tokens { truthy: Vec::new(), falsy: Vec::new() };
    for part in s.split_whitespace() {
        let (side, list) = part.split_once('=').ok_or_else(|| format!("bad token list `{part}`"))?;
        let list: Vec<String> = list.split('|').filter(|t| !t.is_empty()).map(str::to_string).collect();
        match side {
            "true" => tokens.truthy = list,
            "false" => tokens.falsy = list,
            _ => return Err(format!("expected true= or false=, got `{side}`")),
        }
    }
    Ok(tokens)
}

/// Polls every periphery at each round of `cfg`.
pub fn poll_all(m: &Manifest, cfg: &PollConfig) -> Result<ObservationTrace, TraceError> {
    let names = m.peripheries.iter().map(|p| p.ap.clone()).collect();
    let mut trace = ObservationTrace::new(names);
    for r in 0..cfg.rounds() {
        let t = cfg.time_of(r);
        let row = m.peripheries.iter().map(|p| p.poll(t, &m.tokens)).collect::<Result<Vec<_>, _>>()?;
        trace.push(row);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bool_periphery(entries: &[(u64, &str)], default: bool) -> Periphery {
        let log = SensorLog::new(entries.iter().map(|(t, v)| (*t, v.to_string())).collect()).unwrap();
        Periphery { ap: "p".into(), kind: Kind::Bool, default, file: "p.csv".into(), log }
    }

    #[test]
    fn hold_last_value() {
        let p = bool_periphery(&[(100, "ON"), (500, "OFF")], false);
        let tk = Tokens::default();
        let got: Vec<bool> = [50, 100, 499, 500].iter().map(|&t| p.poll(t, &tk).unwrap()).collect();
        assert_eq!(got, [false, true, true, false]);
    }

    #[test]
    fn thresholds() {
        let mut p = bool_periphery(&[(0, "5.2")], false);
        p.kind = Kind::Threshold { threshold: 3.0, above: true };
        let tk = Tokens::default();
        assert!(p.poll(10, &tk).unwrap());
        p.log = SensorLog::new(vec![(0, "3.0".into())]).unwrap();
        assert!(p.poll(0, &tk).unwrap());
        p.kind = Kind::Threshold { threshold: 3.0, above: false };
        assert!(!p.poll(0, &tk).unwrap());
        p.log = SensorLog::new(vec![(0, "warm".into())]).unwrap();
        assert!(matches!(p.poll(0, &tk), Err(TraceError::NotNumeric { .. })));
    }

    #[test]
    fn unknown_token_is_an_error() {
        let p = bool_periphery(&[(0, "MAYBE")], false);
        assert!(matches!(p.poll(5, &Tokens::default()), Err(TraceError::Token { .. })));
        let custom = Tokens { truthy: vec!["1".into()], falsy: vec!["0".into()] };
        let q = bool_periphery(&[(0, "1")], false);
        assert!(q.poll(0, &custom).unwrap());
    }

    #[test]
    fn log_parsing() {
        let log = SensorLog::parse("timestamp_ms,value\n0,ON\n\n1000, OFF\n", "x").unwrap();
        assert_eq!(log.entries(), &[(0, "ON".into()), (1000, "OFF".into())]);
        assert!(SensorLog::parse("0,ON\n1000,OFF\n5000,ON\n", "x").is_ok());
        assert!(matches!(SensorLog::parse("5,ON\n5,OFF\n", "x"), Err(TraceError::NotIncreasing { line: 2, .. })));
        assert!(SensorLog::parse("0,ON\nabc,OFF\n", "x").is_err());
        assert!(SensorLog::parse("0,ON,1\n", "x").is_err());
    }

    #[test]
    fn manifest_parsing() {
        let text = "# home\ntokens true=1|ON false=0|OFF\nlamp, lamp.csv, bool, default=false\n\
                    bed, bed.csv, thresh:30:above, default=true\n";
        let m = Manifest::parse(text, "m", |_| Ok(SensorLog::default())).unwrap();
        assert_eq!(m.tokens.truthy, ["1", "ON"]);
        assert_eq!(m.peripheries.len(), 2);
        assert_eq!(m.peripheries[1].kind, Kind::Threshold { threshold: 30.0, above: true });
        assert!(m.peripheries[1].default);
        let again = Manifest::parse(&m.to_text(), "m", |_| Ok(SensorLog::default())).unwrap();
        assert_eq!(again, m);
        for bad in ["a, b, bool\n", "a, b, thresh:x:above, default=true\n", "a, b, bool, default=yes\n", "a, b, int, default=true\n"] {
            assert!(Manifest::parse(bad, "m", |_| Ok(SensorLog::default())).is_err(), "{bad}");
        }
    }

    #[test]
    fn poll_window() {
        let cfg = PollConfig::new(0, 36_000_000, 1000).unwrap();
        assert_eq!(cfg.rounds(), 36_000);
        assert_eq!(PollConfig::new(0, 10, 3).unwrap().rounds(), 4);
        assert!(PollConfig::new(5, 5, 1).is_err());
        assert!(PollConfig::new(0, 5, 0).is_err());
    }

    fn step_function(changes: &[(u64, bool)], default: bool, t: u64) -> bool {
        // independent reconstruction: scan all entries
        let mut v = default;
        for &(ts, x) in changes {
            if ts <= t {
                v = x;
            }
        }
        v
    }

    proptest! {
        #[test]
        fn polling_matches_step_function(
            gaps in proptest::collection::vec((1u64..500, any::<bool>()), 0..20),
            default in any::<bool>(),
            probes in proptest::collection::vec(0u64..10_000, 1..40),
        ) {
            let mut t = 0;
            let mut entries = Vec::new();
            for (g, v) in &gaps {
                t += g;
                entries.push((t, *v));
            }
            let raw: Vec<(u64, &str)> = entries.iter().map(|&(t, v)| (t, if v { "ON" } else { "OFF" })).collect();
            let p = bool_periphery(&raw, default);
            for &x in &probes {
                prop_assert_eq!(p.poll(x, &Tokens::default()).unwrap(), step_function(&entries, default, x));
                prop_assert_eq!(p.poll(x, &Tokens::default()), p.poll(x, &Tokens::default()));
            }
        }
    }
}
