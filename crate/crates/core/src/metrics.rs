//! Measurement plane: per-second throughput per attachment point, per-packet
//! delay, drops, handoff log, protocol event logs and CSV export.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::engine::{SimStats, SimTime};
use crate::handoff::MoveRequestDrop;
use crate::network::{ChannelId, NodeId, Packet};

pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const DELAY_CSV: &str = "delay.csv";
pub const HANDOFFS_CSV: &str = "handoffs.csv";
pub const DROPS_CSV: &str = "drops.csv";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed {file}: {reason}")]
    Malformed { file: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThroughputRow {
    pub t_sec: u32,
    /// "AP1", "AP2", "BS" or "ESS".
    pub node: String,
    pub bits_delivered: u64,
    pub mn_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayRow {
    pub packet_id: u64,
    pub flow_id: u32,
    pub sent_at: SimTime,
    pub received_at: SimTime,
}

impl DelayRow {
    pub fn delay(&self) -> Duration {
        self.received_at - self.sent_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandoffKind {
    Horizontal,
    VerticalUp,
    VerticalDown,
}

impl HandoffKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HandoffKind::Horizontal => "horizontal",
            HandoffKind::VerticalUp => "vertical_up",
            HandoffKind::VerticalDown => "vertical_down",
        }
    }
}

impl fmt::Display for HandoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandoffRow {
    pub mn: NodeId,
    pub from: NodeId,
    pub to: NodeId,
    pub kind: HandoffKind,
    pub decided_at: SimTime,
    pub completed_at: SimTime,
    /// Last data frame sent via `from` to first data frame sent via `to`.
    pub gap: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropRow {
    pub t_sec: u32,
    pub node: String,
    pub drops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerKind {
    DropRate,
    Ewma,
    /// EWMA crossed the level that switches the WMAN radio on.
    WmanActivation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggerRecord {
    pub at: SimTime,
    pub mn: NodeId,
    pub kind: TriggerKind,
    /// The MN was already busy with a handoff process.
    pub ignored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveRequestOutcome {
    Processed,
    Dropped(MoveRequestDrop),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveRequestRecord {
    pub at: SimTime,
    pub ap: NodeId,
    pub mn: NodeId,
    pub outcome: MoveRequestOutcome,
}

/// One visit to a foreign channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DwellRecord {
    pub mn: NodeId,
    pub channel: ChannelId,
    pub left_home: SimTime,
    pub back_home: SimTime,
    /// Time actually listening on the foreign channel.
    pub dwell: Duration,
}

impl DwellRecord {
    pub fn off_channel(&self) -> Duration {
        self.back_home - self.left_home
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanCycleRecord {
    pub mn: NodeId,
    pub started_at: SimTime,
    pub completed_at: SimTime,
    pub channels: Vec<ChannelId>,
    pub aps_found: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FlowAudit {
    pub flow_id: u32,
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl FlowAudit {
    pub fn balanced(&self) -> bool {
        self.generated == self.delivered + self.dropped + self.in_flight
    }
}

/// Change of a station's data attachment to `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttachmentChange {
    pub at: SimTime,
    pub mn: NodeId,
    pub node: NodeId,
    pub attached: bool,
}

/// Accumulates everything while the simulation runs.
#[derive(Debug, Clone)]
pub struct MetricsCollector {
    horizon_secs: u32,
    points: Vec<NodeId>,
    bits: BTreeMap<(u32, NodeId), u64>,
    mn_count: BTreeMap<(u32, NodeId), u32>,
    drops: BTreeMap<(u32, NodeId), u64>,
    delays: Vec<DelayRow>,
    handoffs: Vec<HandoffRow>,
    triggers: Vec<TriggerRecord>,
    move_requests: Vec<MoveRequestRecord>,
    dwells: Vec<DwellRecord>,
    scan_cycles: Vec<ScanCycleRecord>,
    attachments: Vec<AttachmentChange>,
    route_violations: u64,
}

impl MetricsCollector {
    /// `points` are the attachment points (APs, then BS if any) reported per
    /// second.
    pub fn new(horizon: Duration, points: Vec<NodeId>) -> Self {
        MetricsCollector {
            horizon_secs: horizon.as_secs() as u32 + (horizon.subsec_nanos() > 0) as u32,
            points,
            bits: BTreeMap::new(),
            mn_count: BTreeMap::new(),
            drops: BTreeMap::new(),
            delays: Vec::new(),
            handoffs: Vec::new(),
            triggers: Vec::new(),
            move_requests: Vec::new(),
            dwells: Vec::new(),
            scan_cycles: Vec::new(),
            attachments: Vec::new(),
            route_violations: 0,
        }
    }

    fn second(&self, now: SimTime) -> u32 {
        (now.whole_secs() as u32).min(self.horizon_secs.saturating_sub(1))
    }

    /// Packet reached its destination; credited to the attachment that
    /// carried it over the air.
    pub fn record_delivery(&mut self, pkt: &Packet, now: SimTime) {
        self.delays.push(DelayRow {
            packet_id: pkt.id,
            flow_id: pkt.flow_id,
            sent_at: pkt.created_at,
            received_at: now,
        });
        if let Some(via) = pkt.via {
            *self.bits.entry((self.second(now), via)).or_default() += pkt.bits();
        }
    }

    pub fn record_drop(&mut self, at_node: NodeId, now: SimTime) {
        *self.drops.entry((self.second(now), at_node)).or_default() += 1;
    }

    /// Association count of `node` for second `t_sec`.
    pub fn record_mn_count(&mut self, t_sec: u32, node: NodeId, count: u32) {
        if t_sec < self.horizon_secs {
            self.mn_count.insert((t_sec, node), count);
        }
    }

    pub fn record_handoff(&mut self, row: HandoffRow) {
        self.handoffs.push(row);
    }

    pub fn record_trigger(&mut self, rec: TriggerRecord) {
        self.triggers.push(rec);
    }

    pub fn record_move_request(&mut self, rec: MoveRequestRecord) {
        self.move_requests.push(rec);
    }

    pub fn record_dwell(&mut self, rec: DwellRecord) {
        self.dwells.push(rec);
    }

    pub fn record_scan_cycle(&mut self, rec: ScanCycleRecord) {
        self.scan_cycles.push(rec);
    }

    pub fn record_attachment(&mut self, change: AttachmentChange) {
        self.attachments.push(change);
    }

    pub fn record_route_violation(&mut self) {
        self.route_violations += 1;
    }

    pub fn finish(self, flows: Vec<FlowAudit>, sim: SimStats) -> RunResults {
        let mut throughput = Vec::new();
        let mut drops = Vec::new();
        let aps: Vec<NodeId> = self.points.iter().copied().filter(NodeId::is_ap).collect();
        for t in 0..self.horizon_secs {
            for &p in &self.points {
                throughput.push(ThroughputRow {
                    t_sec: t,
                    node: p.to_string(),
                    bits_delivered: self.bits.get(&(t, p)).copied().unwrap_or(0),
                    mn_count: self.mn_count.get(&(t, p)).copied().unwrap_or(0),
                });
                drops.push(DropRow {
                    t_sec: t,
                    node: p.to_string(),
                    drops: self.drops.get(&(t, p)).copied().unwrap_or(0),
                });
            }
            throughput.push(ThroughputRow {
                t_sec: t,
                node: "ESS".to_string(),
                bits_delivered: aps.iter().map(|&a| self.bits.get(&(t, a)).copied().unwrap_or(0)).sum(),
                mn_count: aps.iter().map(|&a| self.mn_count.get(&(t, a)).copied().unwrap_or(0)).sum(),
            });
        }
        RunResults {
            horizon_secs: self.horizon_secs,
            throughput,
            delays: self.delays,
            handoffs: self.handoffs,
            drops,
            triggers: self.triggers,
            move_requests: self.move_requests,
            dwells: self.dwells,
            scan_cycles: self.scan_cycles,
            attachments: self.attachments,
            route_violations: self.route_violations,
            flows,
            sim,
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunResults {
    pub horizon_secs: u32,
    pub throughput: Vec<ThroughputRow>,
    pub delays: Vec<DelayRow>,
    pub handoffs: Vec<HandoffRow>,
    pub drops: Vec<DropRow>,
    pub triggers: Vec<TriggerRecord>,
    pub move_requests: Vec<MoveRequestRecord>,
    pub dwells: Vec<DwellRecord>,
    pub scan_cycles: Vec<ScanCycleRecord>,
    pub attachments: Vec<AttachmentChange>,
    pub route_violations: u64,
    pub flows: Vec<FlowAudit>,
    pub sim: SimStats,
}

impl RunResults {
    pub fn bits_at(&self, node: &str, t_sec: u32) -> u64 {
        self.throughput
            .iter()
            .find(|r| r.t_sec == t_sec && r.node == node)
            .map_or(0, |r| r.bits_delivered)
    }

    /// Mean delivered rate of `node` over seconds `[from, to)`, in bit/s.
    pub fn mean_bps(&self, node: &str, from: u32, to: u32) -> f64 {
        if to <= from {
            return 0.0;
        }
        let total: u64 = (from..to).map(|t| self.bits_at(node, t)).sum();
        total as f64 / (to - from) as f64
    }

    pub fn total_drops(&self) -> u64 {
        self.drops.iter().map(|d| d.drops).sum()
    }

    pub fn first_drop_at(&self) -> Option<u32> {
        self.drops.iter().filter(|d| d.drops > 0).map(|d| d.t_sec).min()
    }

    /// Median delay of packets received in `[from, to)`.
    pub fn median_delay(&self, from: SimTime, to: SimTime) -> Option<Duration> {
        let mut d: Vec<Duration> = self
            .delays
            .iter()
            .filter(|r| r.received_at >= from && r.received_at < to)
            .map(DelayRow::delay)
            .collect();
        if d.is_empty() {
            return None;
        }
        d.sort();
        let n = d.len();
        Some(if n % 2 == 1 { d[n / 2] } else { (d[n / 2 - 1] + d[n / 2]) / 2 })
    }

    pub fn first_trigger(&self, kinds: &[TriggerKind]) -> Option<SimTime> {
        self.triggers.iter().filter(|t| kinds.contains(&t.kind)).map(|t| t.at).min()
    }

    /// Stations attached to `node` at instant `at`.
    pub fn attached_at(&self, node: NodeId, at: SimTime) -> Vec<NodeId> {
        let mut state: BTreeMap<NodeId, bool> = BTreeMap::new();
        for c in self.attachments.iter().filter(|c| c.at <= at && c.node == node) {
            state.insert(c.mn, c.attached);
        }
        state.into_iter().filter(|&(_, on)| on).map(|(mn, _)| mn).collect()
    }

    pub fn delivered_bits(&self) -> u64 {
        self.throughput.iter().filter(|r| r.node != "ESS").map(|r| r.bits_delivered).sum()
    }

    pub fn export_csv(&self, out_dir: &Path) -> Result<(), MetricsError> {
        fs::create_dir_all(out_dir).map_err(|source| MetricsError::Io {
            path: out_dir.display().to_string(),
            source,
        })?;
        let open = |name: &str| -> Result<csv::Writer<fs::File>, MetricsError> {
            let path = out_dir.join(name);
            let file = fs::File::create(&path).map_err(|source| MetricsError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
        };

        let mut w = open(THROUGHPUT_CSV)?;
        w.write_record(["t_sec", "node", "bits_delivered", "mn_count"])?;
        for r in &self.throughput {
            w.write_record([r.t_sec.to_string(), r.node.clone(), r.bits_delivered.to_string(), r.mn_count.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;

        let mut w = open(DELAY_CSV)?;
        w.write_record(["packet_id", "flow_id", "sent_us", "recv_us", "delay_us"])?;
        for r in &self.delays {
            w.write_record([
                r.packet_id.to_string(),
                r.flow_id.to_string(),
                r.sent_at.as_micros().to_string(),
                r.received_at.as_micros().to_string(),
                r.delay().as_micros().to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;

        let mut w = open(HANDOFFS_CSV)?;
        w.write_record(["mn", "from", "to", "kind", "decided_us", "completed_us", "gap_us"])?;
        for r in &self.handoffs {
            w.write_record([
                r.mn.to_string(),
                r.from.to_string(),
                r.to.to_string(),
                r.kind.to_string(),
                r.decided_at.as_micros().to_string(),
                r.completed_at.as_micros().to_string(),
                r.gap.as_micros().to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;

        let mut w = open(DROPS_CSV)?;
        w.write_record(["t_sec", "node", "drops"])?;
        for r in &self.drops {
            w.write_record([r.t_sec.to_string(), r.node.clone(), r.drops.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Throughput,
    Delay,
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "throughput" => Ok(Figure::Throughput),
            "delay" => Ok(Figure::Delay),
            _ => Err(format!("unknown figure {s:?}, expected throughput or delay")),
        }
    }
}

fn read_rows(dir: &Path, name: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, MetricsError> {
    let path = dir.join(name);
    let mut r = csv::Reader::from_path(&path)?;
    let got: Vec<&str> = r.headers()?.iter().collect();
    if got != header {
        return Err(MetricsError::Malformed {
            file: path.display().to_string(),
            reason: format!("unexpected header {got:?}"),
        });
    }
    Ok(r.records().collect::<Result<_, _>>()?)
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, file: &str) -> Result<T, MetricsError> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| MetricsError::Malformed {
        file: file.to_string(),
        reason: format!("bad field {i} in {rec:?}"),
    })
}

/// Long-format table for one figure, read back from an exported run.
///
/// * throughput: `t_sec,node,mn_count,throughput_mbps` per node per second.
/// * delay: `packet_index,flow_id,delay_ms` in order of packet id.
pub fn plot_table(dir: &Path, figure: Figure) -> Result<String, MetricsError> {
    let mut out = String::new();
    match figure {
        Figure::Throughput => {
            let rows = read_rows(dir, THROUGHPUT_CSV, &["t_sec", "node", "bits_delivered", "mn_count"])?;
            out.push_str("t_sec,node,mn_count,throughput_mbps\n");
            for r in rows {
                let t: u32 = field(&r, 0, THROUGHPUT_CSV)?;
                let bits: u64 = field(&r, 2, THROUGHPUT_CSV)?;
                let n: u32 = field(&r, 3, THROUGHPUT_CSV)?;
                out.push_str(&format!("{t},{},{n},{:.6}\n", &r[1], bits as f64 / 1e6));
            }
        }
        Figure::Delay => {
            let rows = read_rows(dir, DELAY_CSV, &["packet_id", "flow_id", "sent_us", "recv_us", "delay_us"])?;
            let mut v = Vec::with_capacity(rows.len());
            for r in rows {
                let id: u64 = field(&r, 0, DELAY_CSV)?;
                let flow: u32 = field(&r, 1, DELAY_CSV)?;
                let d: u64 = field(&r, 4, DELAY_CSV)?;
                v.push((id, flow, d));
            }
            v.sort();
            out.push_str("packet_index,flow_id,delay_ms\n");
            for (i, (_, flow, d)) in v.into_iter().enumerate() {
                out.push_str(&format!("{i},{flow},{:.3}\n", d as f64 / 1e3));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::PacketKind;

    fn pkt(id: u64, created: SimTime, via: NodeId) -> Packet {
        Packet {
            id,
            flow_id: 1,
            size_bytes: 1500,
            created_at: created,
            src: NodeId::mn(1),
            dst: NodeId::CN,
            kind: PacketKind::Data,
            via: Some(via),
        }
    }

    fn points() -> Vec<NodeId> {
        vec![NodeId::ap(1), NodeId::ap(2)]
    }

    #[test]
    fn delay_is_receive_minus_send() {
        let mut m = MetricsCollector::new(Duration::from_secs(20), points());
        m.record_delivery(&pkt(1, SimTime::from_millis(3000), NodeId::ap(1)), SimTime::from_millis(3012));
        let r = m.finish(vec![], SimStats::default());
        assert_eq!(r.delays[0].delay(), Duration::from_millis(12));
    }

    #[test]
    fn one_second_of_cbr() {
        let mut m = MetricsCollector::new(Duration::from_secs(20), points());
        for i in 0..50 {
            let t = SimTime::from_millis(5000 + 20 * i);
            m.record_delivery(&pkt(i, t, NodeId::ap(1)), t + Duration::from_millis(3));
        }
        let r = m.finish(vec![], SimStats::default());
        assert_eq!(r.bits_at("AP1", 5), 600_000);
        assert_eq!(r.bits_at("ESS", 5), 600_000);
        assert_eq!(r.delivered_bits(), 50 * 1500 * 8);
    }

    #[test]
    fn drop_has_no_delay_row() {
        let mut m = MetricsCollector::new(Duration::from_secs(2), points());
        m.record_drop(NodeId::ap(1), SimTime::from_millis(500));
        let r = m.finish(vec![], SimStats::default());
        assert!(r.delays.is_empty());
        assert_eq!(r.total_drops(), 1);
        assert_eq!(r.first_drop_at(), Some(0));
    }

    #[test]
    fn rows_cover_horizon_and_ess_sums_aps() {
        let mut pts = points();
        pts.push(NodeId::BS);
        let mut m = MetricsCollector::new(Duration::from_secs(20), pts);
        m.record_delivery(&pkt(1, SimTime::from_millis(100), NodeId::ap(1)), SimTime::from_millis(7100));
        m.record_delivery(&pkt(2, SimTime::from_millis(100), NodeId::ap(2)), SimTime::from_millis(7200));
        m.record_delivery(&pkt(3, SimTime::from_millis(100), NodeId::BS), SimTime::from_millis(7300));
        // Deliveries at the horizon fold into the last second.
        m.record_delivery(&pkt(4, SimTime::from_millis(19_990), NodeId::ap(2)), SimTime::from_secs(20));
        let r = m.finish(vec![], SimStats::default());
        let secs: Vec<u32> = r.throughput.iter().filter(|x| x.node == "ESS").map(|x| x.t_sec).collect();
        assert_eq!(secs, (0..20).collect::<Vec<_>>());
        for t in 0..20 {
            assert_eq!(r.bits_at("ESS", t), r.bits_at("AP1", t) + r.bits_at("AP2", t));
        }
        assert_eq!(r.bits_at("ESS", 7), 24_000);
        assert_eq!(r.bits_at("BS", 7), 12_000);
        assert_eq!(r.bits_at("AP2", 19), 12_000);
        assert_eq!(r.delivered_bits(), 4 * 12_000);
    }

    #[test]
    fn empty_run_exports_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let r = MetricsCollector::new(Duration::ZERO, points()).finish(vec![], SimStats::default());
        r.export_csv(dir.path()).unwrap();
        let read = |n| fs::read_to_string(dir.path().join(n)).unwrap();
        assert_eq!(read(THROUGHPUT_CSV), "t_sec,node,bits_delivered,mn_count\n");
        assert_eq!(read(DELAY_CSV), "packet_id,flow_id,sent_us,recv_us,delay_us\n");
        assert_eq!(read(HANDOFFS_CSV), "mn,from,to,kind,decided_us,completed_us,gap_us\n");
        assert_eq!(read(DROPS_CSV), "t_sec,node,drops\n");
    }

    #[test]
    fn export_then_plot() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = MetricsCollector::new(Duration::from_secs(2), points());
        m.record_delivery(&pkt(9, SimTime::from_millis(100), NodeId::ap(1)), SimTime::from_millis(112));
        m.record_delivery(&pkt(3, SimTime::from_millis(100), NodeId::ap(2)), SimTime::from_millis(1105));
        m.record_mn_count(1, NodeId::ap(1), 4);
        m.record_handoff(HandoffRow {
            mn: NodeId::mn(2),
            from: NodeId::ap(1),
            to: NodeId::BS,
            kind: HandoffKind::VerticalUp,
            decided_at: SimTime::from_millis(500),
            completed_at: SimTime::from_millis(530),
            gap: Duration::from_micros(1234),
        });
        let r = m.finish(vec![], SimStats::default());
        r.export_csv(dir.path()).unwrap();
        let h = fs::read_to_string(dir.path().join(HANDOFFS_CSV)).unwrap();
        assert_eq!(h.lines().nth(1), Some("MN2,AP1,BS,vertical_up,500000,530000,1234"));
        let tp = plot_table(dir.path(), Figure::Throughput).unwrap();
        assert!(tp.contains("1,AP1,4,0.000000\n"));
        assert!(tp.contains("0,AP1,0,0.012000\n"));
        let d = plot_table(dir.path(), Figure::Delay).unwrap();
        assert_eq!(d, "packet_index,flow_id,delay_ms\n0,1,1005.000\n1,1,12.000\n");
        assert!(!h.contains('\r'));
    }

    #[test]
    fn attachment_snapshot() {
        let mut m = MetricsCollector::new(Duration::from_secs(20), points());
        let ch = |at: u64, mn: u16, attached| AttachmentChange {
            at: SimTime::from_secs(at),
            mn: NodeId::mn(mn),
            node: NodeId::BS,
            attached,
        };
        m.record_attachment(ch(3, 1, true));
        m.record_attachment(ch(4, 2, true));
        m.record_attachment(ch(10, 1, false));
        let r = m.finish(vec![], SimStats::default());
        assert_eq!(r.attached_at(NodeId::BS, SimTime::from_secs(5)), vec![NodeId::mn(1), NodeId::mn(2)]);
        assert_eq!(r.attached_at(NodeId::BS, SimTime::from_secs(19)), vec![NodeId::mn(2)]);
    }

    #[test]
    fn median_of_window() {
        let mut m = MetricsCollector::new(Duration::from_secs(20), points());
        for (i, d) in [5u64, 1, 3, 100].iter().enumerate() {
            let sent = SimTime::from_secs(16);
            m.record_delivery(&pkt(i as u64, sent, NodeId::ap(1)), sent + Duration::from_millis(*d));
        }
        let r = m.finish(vec![], SimStats::default());
        let med = r.median_delay(SimTime::from_secs(15), SimTime::from_secs(20)).unwrap();
        assert_eq!(med, Duration::from_millis(4));
        assert_eq!(r.median_delay(SimTime::ZERO, SimTime::from_secs(1)), None);
    }
}
