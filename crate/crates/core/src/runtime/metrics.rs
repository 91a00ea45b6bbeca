use std::io::{self, Write};

use crate::dtd::WaveStats;

/// Per-worker time breakdown and counters. Times are seconds for the thread
/// transport and ticks for the simulator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkerMetrics {
    pub worker: usize,
    pub main_s: f64,
    pub preprocess_s: f64,
    pub probe_s: f64,
    pub idle_s: f64,
    pub nodes_expanded: u64,
    pub nodes_pruned: u64,
    pub steals_attempted: u64,
    pub steals_succeeded: u64,
    pub messages_sent: u64,
}

pub const METRICS_HEADER: &str =
    "worker\tmain_s\tpreprocess_s\tprobe_s\tidle_s\tnodes_expanded\tsteals_attempted\tsteals_succeeded\tmessages_sent";

pub fn write_metrics_tsv<W: Write>(mut w: W, metrics: &[WorkerMetrics], waves: &WaveStats) -> io::Result<()> {
    writeln!(w, "# waves\t{}", waves.waves)?;
    writeln!(w, "# wave_retries\t{}", waves.retries)?;
    writeln!(w, "# time_to_termination\t{:.6}", waves.time_to_termination)?;
    writeln!(w, "{METRICS_HEADER}")?;
    for m in metrics {
        writeln!(
            w,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}",
            m.worker,
            m.main_s,
            m.preprocess_s,
            m.probe_s,
            m.idle_s,
            m.nodes_expanded,
            m.steals_attempted,
            m.steals_succeeded,
            m.messages_sent
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_has_header_and_one_row_per_worker() {
        let ms = vec![
            WorkerMetrics {
                worker: 0,
                nodes_expanded: 5,
                ..Default::default()
            },
            WorkerMetrics {
                worker: 1,
                ..Default::default()
            },
        ];
        let mut buf = Vec::new();
        write_metrics_tsv(&mut buf, &ms, &WaveStats::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], METRICS_HEADER);
        assert_eq!(rows.len(), 3);
        assert!(rows[1].starts_with("0\t") && rows[1].contains("\t5\t"));
    }
}
