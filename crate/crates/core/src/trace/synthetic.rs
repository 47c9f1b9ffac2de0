//! Scripted scenarios rendered into per-sensor change logs plus the matching
//! activity annotations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{io_err, Kind, Manifest, Periphery, PollConfig, SensorLog, Tokens, TraceError};
use crate::eval::AnnotationSet;
use crate::expr::Round;

#[derive(Clone, Debug, PartialEq)]
pub struct SensorSpec {
    pub ap: String,
    pub kind: Kind,
    /// Raw values written for the active and idle state.
    pub on: String,
    pub off: String,
}

impl SensorSpec {
    pub fn switch(ap: &str) -> Self {
        SensorSpec { ap: ap.into(), kind: Kind::Bool, on: "ON".into(), off: "OFF".into() }
    }

    pub fn door(ap: &str) -> Self {
        SensorSpec { ap: ap.into(), kind: Kind::Bool, on: "OPEN".into(), off: "CLOSED".into() }
    }

    pub fn pressure(ap: &str) -> Self {
        SensorSpec {
            ap: ap.into(),
            kind: Kind::Threshold { threshold: 30.0, above: true },
            on: "72.5".into(),
            off: "4.0".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Activity {
    pub sensors: Vec<String>,
    pub min_len: Round,
    pub max_len: Round,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Home {
    pub sensors: Vec<SensorSpec>,
    pub activities: BTreeMap<String, Activity>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Episode {
    pub activity: String,
    pub start: Round,
    pub len: Round,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub manifest: Manifest,
    pub annotations: AnnotationSet,
    pub poll: PollConfig,
}

impl Synthetic {
    /// Writes `manifest.txt`, `logs/<ap>.csv`, `annotations.csv` and
    /// `poll.txt` (start, end, interval) under `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), TraceError> {
        let logs = dir.join("logs");
        std::fs::create_dir_all(&logs).map_err(|e| io_err(&logs, e))?;
        for p in &self.manifest.peripheries {
            let path = dir.join(&p.file);
            std::fs::write(&path, p.log.to_text()).map_err(|e| io_err(&path, e))?;
        }
        let files = [
            ("manifest.txt", self.manifest.to_text()),
            ("annotations.csv", self.annotations.to_text()),
            ("poll.txt", format!("{} {} {}\n", self.poll.start, self.poll.end, self.poll.interval)),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }
}

/// Sensor value at each round: active while any covering episode uses it.
pub fn sensor_rows(home: &Home, episodes: &[Episode], rounds: usize) -> BTreeMap<String, Vec<bool>> {
    let mut rows: BTreeMap<String, Vec<bool>> =
        home.sensors.iter().map(|s| (s.ap.clone(), vec![false; rounds])).collect();
    for e in episodes {
        let act = &home.activities[&e.activity];
        for ap in &act.sensors {
            let row = rows.get_mut(ap).expect("activity sensor is declared");
            let end = ((e.start + e.len) as usize).min(rounds);
            for v in &mut row[(e.start as usize).min(rounds)..end] {
                *v = true;
            }
        }
    }
    rows
}

/// Renders episodes into logs. A change at round `r > 0` is stamped half an
/// interval before the poll at `r`; every `heartbeat` rounds the current
/// value is repeated.
pub fn render(home: &Home, episodes: &[Episode], poll: PollConfig, heartbeat: Round) -> Synthetic {
    let rounds = poll.rounds();
    let rows = sensor_rows(home, episodes, rounds);
    let mut peripheries = Vec::new();
    for s in &home.sensors {
        let row = &rows[&s.ap];
        let raw = |v: bool| if v { s.on.clone() } else { s.off.clone() };
        let mut entries = vec![(poll.start, raw(row.first().copied().unwrap_or(false)))];
        for r in 1..rounds {
            let changed = row[r] != row[r - 1];
            let beat = heartbeat > 0 && (r as Round).is_multiple_of(heartbeat);
            if changed || beat {
                let t = poll.time_of(r) - if changed { poll.interval / 2 } else { 0 };
                entries.push((t, raw(row[r])));
            }
        }
        peripheries.push(Periphery {
            ap: s.ap.clone(),
            kind: s.kind.clone(),
            default: false,
            file: PathBuf::from(format!("logs/{}.csv", s.ap)),
            log: SensorLog::new(entries).expect("increasing by construction"),
        });
    }
    let mut annotations = AnnotationSet::new();
    for e in episodes.iter().filter(|e| e.len > 0 && (e.start as usize) < rounds) {
        let end = (e.start + e.len - 1).min(rounds as Round - 1);
        annotations.add(&e.activity, e.start, end).expect("episodes do not overlap");
    }
    Synthetic { manifest: Manifest { tokens: Tokens::default(), peripheries }, annotations, poll }
}

/// Back-to-back episodes separated by idle gaps of 5 to 60 rounds.
pub fn random_schedule(home: &Home, rounds: Round, seed: u64) -> Vec<Episode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<&String> = home.activities.keys().collect();
    let mut out = Vec::new();
    let mut t: Round = rng.gen_range(0..30);
    while t < rounds && !names.is_empty() {
        let name = names[rng.gen_range(0..names.len())];
        let act = &home.activities[name];
        let len = rng.gen_range(act.min_len..=act.max_len);
        out.push(Episode { activity: name.clone(), start: t, len });
        t += len + rng.gen_range(5..=60);
    }
    out
}

/// Sensors and activities of the bundled smart apartment.
pub fn amiqual_home() -> Home {
    let mut sensors: Vec<SensorSpec> = Vec::new();
    for i in 0..4 {
        sensors.push(SensorSpec::switch(&format!("l{i}")));
        sensors.push(SensorSpec::switch(&format!("s{i}")));
    }
    sensors.push(SensorSpec::switch("hall_panel"));
    for ap in [
        "bathroom_sink_cold",
        "bathroom_sink_hot",
        "bathroom_shower_cold",
        "bathroom_shower_hot",
        "toilet_water",
        "bedroom_light",
        "office_tv_power",
        "office_deskplug",
        "kitchen_cooktop",
        "kitchen_oven",
        "kitchen_dishwasher",
        "kitchen_sink_cold",
        "kitchen_sink_hot",
        "kitchen_presence",
        "livingroom_tv_power",
    ] {
        sensors.push(SensorSpec::switch(ap));
    }
    for ap in [
        "bedroom_closet_door",
        "bedroom_drawer_1",
        "bedroom_drawer_2",
        "kitchen_fridgedoor",
        "kitchen_cupboard_1",
        "kitchen_cupboard_2",
        "kitchen_cupboard_3",
        "kitchen_cupboard_4",
        "kitchen_cupboard_5",
    ] {
        sensors.push(SensorSpec::door(ap));
    }
    for ap in ["bedroom_bed_pressure", "livingroom_couch_pressure", "livingroom_table_pressure"] {
        sensors.push(SensorSpec::pressure(ap));
    }
    let act = |s: &[&str], min_len, max_len| Activity {
        sensors: s.iter().map(|x| x.to_string()).collect(),
        min_len,
        max_len,
    };
    let activities = BTreeMap::from([
        ("toilet".into(), act(&["toilet_water"], 1, 3)),
        ("sink_usage".into(), act(&["bathroom_sink_cold"], 4, 30)),
        ("shower_usage".into(), act(&["bathroom_shower_hot"], 60, 300)),
        ("napping".into(), act(&["bedroom_bed_pressure"], 40, 400)),
        ("dressing".into(), act(&["bedroom_closet_door", "bedroom_drawer_1"], 10, 60)),
        ("reading".into(), act(&["bedroom_light"], 30, 300)),
        ("office_tv".into(), act(&["office_tv_power"], 60, 600)),
        ("computing".into(), act(&["office_deskplug"], 60, 600)),
        ("cooking".into(), act(&["kitchen_presence", "kitchen_cooktop"], 60, 400)),
        ("washing_dishes".into(), act(&["kitchen_presence", "kitchen_dishwasher", "kitchen_sink_hot"], 30, 120)),
        ("preparing".into(), act(&["kitchen_presence", "kitchen_fridgedoor", "kitchen_cupboard_2"], 10, 90)),
        ("livingroom_tv".into(), act(&["livingroom_tv_power", "livingroom_couch_pressure"], 60, 600)),
        ("eating".into(), act(&["livingroom_table_pressure"], 30, 120)),
    ]);
    Home { sensors, activities }
}

/// A day (by default 07:30 to 17:30 polled each second) of random activity
/// in the bundled apartment.
pub fn synthetic_day(rounds: usize, seed: u64) -> Synthetic {
    let home = amiqual_home();
    let poll = PollConfig::new(0, rounds as u64 * 1000, 1000).expect("rounds > 0");
    let episodes = random_schedule(&home, rounds as Round, seed);
    render(&home, &episodes, poll, 600)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{poll_all, rate_analysis};

    fn tiny_home() -> Home {
        Home {
            sensors: vec![SensorSpec::switch("tv"), SensorSpec::pressure("couch")],
            activities: BTreeMap::from([
                ("watch".to_string(), Activity { sensors: vec!["tv".into(), "couch".into()], min_len: 3, max_len: 5 }),
                ("sit".to_string(), Activity { sensors: vec!["couch".into()], min_len: 2, max_len: 2 }),
            ]),
        }
    }

    #[test]
    fn polling_recovers_the_script() {
        let home = tiny_home();
        let episodes = vec![
            Episode { activity: "watch".into(), start: 2, len: 4 },
            Episode { activity: "sit".into(), start: 9, len: 2 },
        ];
        let poll = PollConfig::new(1000, 16_000, 1000).unwrap();
        let syn = render(&home, &episodes, poll.clone(), 4);
        let trace = poll_all(&syn.manifest, &poll).unwrap();
        let tv: Vec<bool> = (0..trace.len()).map(|r| trace.value(r, 0)).collect();
        let couch: Vec<bool> = (0..trace.len()).map(|r| trace.value(r, 1)).collect();
        let expect = |ones: &[usize]| (0..15).map(|r| ones.contains(&r)).collect::<Vec<_>>();
        assert_eq!(tv, expect(&[2, 3, 4, 5]));
        assert_eq!(couch, expect(&[2, 3, 4, 5, 9, 10]));
        assert_eq!(syn.annotations.get("watch"), &[(2, 5)]);
        assert_eq!(syn.annotations.get("sit"), &[(9, 10)]);
        // heartbeats repeat values without adding changes
        assert!(syn.manifest.peripheries[0].log.entries().len() > 3);
        let rates = rate_analysis(&syn.manifest, None).unwrap();
        // the opening entry at 1000 counts as the first change point
        assert_eq!((rates.rows[0].min, rates.rows[0].max), (Some(1500), Some(4000)));
        assert_eq!((rates.rows[1].min, rates.rows[1].max), (Some(1500), Some(4000)));
    }

    #[test]
    fn schedules_are_seeded_and_disjoint() {
        let home = amiqual_home();
        let a = random_schedule(&home, 5000, 7);
        assert_eq!(a, random_schedule(&home, 5000, 7));
        assert_ne!(a, random_schedule(&home, 5000, 8));
        for w in a.windows(2) {
            assert!(w[0].start + w[0].len < w[1].start);
        }
        let day = synthetic_day(2000, 1);
        assert_eq!(day.poll.rounds(), 2000);
        assert_eq!(poll_all(&day.manifest, &day.poll).unwrap().len(), 2000);
    }

    #[test]
    fn home_covers_the_bundled_spec() {
        let reg = crate::bundled::amiqual();
        let home = amiqual_home();
        let aps: std::collections::BTreeSet<String> = home.sensors.iter().map(|s| s.ap.clone()).collect();
        assert_eq!(aps, reg.propositions());
    }
}
