//! Text serializations of a simulation report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use crate::expr::Round;
use crate::ltl::Verdict;
use crate::sim::Report;

/// `round,label,verdict,delay`, ordered by round then registry order. The
/// delay is empty for rows cut off by the end of the trace.
pub fn verdicts_csv(rep: &Report) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["round", "label", "verdict", "delay"]).expect("in-memory write");
    for t in 0..rep.rounds as usize {
        for (i, label) in rep.labels.iter().enumerate() {
            let row = &rep.verdicts[i][t];
            let delay = row.delay().map(|d| d.to_string()).unwrap_or_default();
            w.write_record([&row.t.to_string(), label, &row.verdict.to_string(), &delay]).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// `round,msgs,simplifications,max_ehe_nodes`.
pub fn metrics_csv(rep: &Report) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["round", "msgs", "simplifications", "max_ehe_nodes"]).expect("in-memory write");
    for m in &rep.metrics {
        w.write_record([m.round, m.msgs, m.simplifications, m.max_ehe_nodes as u64].map(|x| x.to_string()))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Per-label TRUE intervals: `label<TAB>start<TAB>end`.
pub fn timeline_tsv(rep: &Report) -> String {
    let mut s = String::from("label\tstart\tend\n");
    for label in &rep.labels {
        for (a, b) in rep.true_intervals(label) {
            let _ = writeln!(s, "{label}\t{a}\t{b}");
        }
    }
    s
}

/// Per-round averages and peaks, then per-label verdict counts.
pub fn summary(rep: &Report) -> String {
    let rounds = rep.metrics.len().max(1) as f64;
    let total = |f: &dyn Fn(&crate::sim::RoundMetrics) -> f64| rep.metrics.iter().map(f).sum::<f64>();
    let mut s = String::new();
    let _ = writeln!(s, "rounds = {}", rep.rounds);
    let _ = writeln!(s, "simulated_rounds = {}", rep.metrics.len());
    let _ = writeln!(s, "monitors = {}", rep.labels.len());
    let _ = writeln!(s, "msgs_total = {}", rep.total_messages());
    let _ = writeln!(s, "msgs_per_round = {:.4}", total(&|m| m.msgs as f64) / rounds);
    let _ = writeln!(s, "steady_state_msgs_per_round = {:.4}", rep.steady_state_rate());
    let _ = writeln!(s, "simplifications_per_round = {:.4}", total(&|m| m.simplifications as f64) / rounds);
    let _ = writeln!(s, "ehe_nodes_per_round = {:.4}", total(&|m| m.max_ehe_nodes as f64) / rounds);
    let _ = writeln!(s, "ehe_nodes_peak = {}", rep.peak_ehe_nodes());
    let _ = writeln!(s, "ehe_entries_peak = {}", rep.peak_ehe_entries());
    let _ = writeln!(s, "memory_per_round = {:.4}", total(&|m| m.memory as f64) / rounds);
    let _ = writeln!(s, "memory_peak = {}", rep.peak_memory());
    s.push_str("# label true false unknown truncated mean_delay\n");
    for (i, label) in rep.labels.iter().enumerate() {
        let rows = &rep.verdicts[i];
        let count = |v: Verdict| rows.iter().filter(|r| r.verdict == v && !r.truncated()).count();
        let truncated = rows.iter().filter(|r| r.truncated()).count();
        let delays: Vec<u64> = rows.iter().filter_map(|r| r.delay()).collect();
        let mean = if delays.is_empty() {
            "-".to_string()
        } else {
            format!("{:.3}", delays.iter().sum::<u64>() as f64 / delays.len() as f64)
        };
        let _ = writeln!(
            s,
            "{label} {} {} {} {truncated} {mean}",
            count(Verdict::True),
            count(Verdict::False),
            count(Verdict::Unknown)
        );
    }
    s
}

/// Writes the four report files into `dir`.
pub fn write_dir(rep: &Report, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("verdicts.csv"), verdicts_csv(rep))?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(rep))?;
    std::fs::write(dir.join("summary.txt"), summary(rep))?;
    std::fs::write(dir.join("timeline.tsv"), timeline_tsv(rep))?;
    Ok(())
}

/// Reads `verdicts.csv` back as label → round → verdict.
pub fn read_verdicts_csv(r: impl Read) -> Result<BTreeMap<String, BTreeMap<Round, Verdict>>, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out: BTreeMap<String, BTreeMap<Round, Verdict>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
        if rec.len() < 3 {
            return Err(format!("line {line}: expected round,label,verdict[,delay]"));
        }
        let t: Round = rec[0].parse().map_err(|_| format!("line {line}: bad round `{}`", &rec[0]))?;
        let v: Verdict = rec[2].parse().map_err(|_| format!("line {line}: bad verdict `{}`", &rec[2]))?;
        out.entry(rec[1].to_string()).or_default().insert(t, v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Registry;
    use crate::sim::{simulate, SimConfig};
    use crate::trace::ObservationTrace;

    fn report() -> Report {
        let reg = Registry::parse("component c { p }\nmonitor m @ c := p\nmonitor n @ c := X m\n").unwrap();
        let mut tr = ObservationTrace::new(vec!["p".into()]);
        for v in [true, false, true] {
            tr.push(vec![v]);
        }
        simulate(&reg, &tr, &SimConfig::default()).unwrap()
    }

    #[test]
    fn csv_layouts() {
        let rep = report();
        let v = verdicts_csv(&rep);
        assert_eq!(
            v,
            "round,label,verdict,delay\n0,m,TRUE,0\n0,n,FALSE,2\n1,m,FALSE,0\n1,n,TRUE,2\n2,m,TRUE,0\n2,n,UNKNOWN,\n"
        );
        let back = read_verdicts_csv(v.as_bytes()).unwrap();
        assert_eq!(back["n"][&1], Verdict::True);
        assert!(metrics_csv(&rep).starts_with("round,msgs,simplifications,max_ehe_nodes\n0,1,"));
        assert_eq!(timeline_tsv(&rep), "label\tstart\tend\nm\t0\t0\nm\t2\t2\nn\t1\t1\n");
        let s = summary(&rep);
        assert!(s.contains("msgs_total = 3"), "{s}");
        assert!(s.contains("n 1 1 0 1 2.000"), "{s}");
        assert!(read_verdicts_csv("round,label,verdict\nx,m,TRUE\n".as_bytes()).is_err());
    }
}
