//! The integrated simulation: topology, CBR sources, per-AP channel servers,
//! the wired backbone and the MN/AP/BS protocol state machines, all driven
//! from one event queue.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Duration;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::detection::{DetectionMode, DropRateTracker, EdgeTrigger, EwmaTracker, SendOutcome};
use crate::engine::{EventHandle, RngState, Scheduler, SimError, SimEvent, SimTime};
use crate::handoff::{ApHandoffState, ControlMessage, MnHandoffState, MnPhase, RetryAction, TargetDecision};
use crate::metrics::{
    AttachmentChange, DwellRecord, FlowAudit, HandoffKind, HandoffRow, MetricsCollector, MoveRequestOutcome,
    MoveRequestRecord, RunResults, ScanCycleRecord, TriggerKind, TriggerRecord,
};
use crate::network::coverage::strongest;
use crate::network::{
    Backbone, BitRate, CbrFlow, ChannelId, ChannelServer, ControlFrame, CoverageModel, Frame, LoadMeter, NoSuchLink,
    NodeId, NodeKind, Packet, WiredLink, WirelessChannel,
};
use crate::scanning::{ApEntry, ScanState};
use crate::vertical::{bs_admits, return_allowed, spare_capacity};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("backbone: {0}")]
    Link(#[from] NoSuchLink),
    #[error("scheduler: {0}")]
    Scheduling(#[from] SimError),
}

#[derive(Debug, Clone)]
pub enum Wired {
    Data(Packet),
    Control(ControlFrame),
}

#[derive(Debug, Clone)]
pub enum Event {
    /// CBR source emits its next packet.
    Emit,
    /// The packet wins channel access and joins the serving queue.
    Access { pkt: Packet },
    /// EWMA sampling instant.
    Sample,
    /// The AP or BS channel finished the frame on the air.
    ServiceDone,
    /// A frame reaches the target node over the backbone.
    Wired { dst: NodeId, payload: Wired },
    ScanTimer,
    OnForeignChannel { channel: ChannelId },
    /// A foreign AP hears the DSProbe.
    ProbeHeard { mn: NodeId, reply_to: NodeId },
    BackHome { left: SimTime, last: bool },
    ScanComplete,
    RetryTimer,
    LoadDeadline,
    BsFound,
    EntryComplete,
    SwitchDone,
    ReturnScan,
    BackoffOver,
    MetricsTick { t_sec: u32 },
}

type Sched = Scheduler<Event>;

#[derive(Debug)]
struct Ap {
    id: NodeId,
    channel: ChannelId,
    server: ChannelServer,
    load: LoadMeter,
    ho: ApHandoffState,
    associated: BTreeSet<NodeId>,
}

#[derive(Debug)]
struct Bs {
    server: ChannelServer,
    load: LoadMeter,
    attached: BTreeSet<NodeId>,
}

#[derive(Debug)]
struct ActiveScan {
    state: ScanState,
    started: SimTime,
    returning: bool,
}

#[derive(Debug, Clone, Copy)]
enum Departure {
    Scan { channel: ChannelId, last: bool },
    Handoff,
}

#[derive(Debug, Clone, Copy)]
struct OpenHandoff {
    from: NodeId,
    to: NodeId,
    kind: HandoffKind,
    decided_at: SimTime,
    completed_at: Option<SimTime>,
    old_released: bool,
    last_old: Option<SimTime>,
    first_new: Option<SimTime>,
}

#[derive(Debug)]
struct Mn {
    id: NodeId,
    flow: CbrFlow,
    active: bool,
    assoc: Option<NodeId>,
    /// Channel the WLAN radio listens on; `None` while switching or idle.
    tuned: Option<ChannelId>,
    /// Where new packets go; `None` holds them during a channel change.
    data_via: Option<NodeId>,
    held: VecDeque<Packet>,
    /// Packets generated but still contending for the medium.
    in_access: usize,
    rng: ChaCha8Rng,
    offered: LoadMeter,
    ewma: EwmaTracker,
    prev_y: Option<f64>,
    /// Sampling waits until a queue carried across a handoff has drained.
    settling: bool,
    wman_edge: EdgeTrigger,
    drops: DropRateTracker,
    ho: MnHandoffState,
    scan: Option<ActiveScan>,
    retry_timer: Option<EventHandle>,
    departure: Option<Departure>,
    backoff_until: SimTime,
    bs_discovery_pending: bool,
    ru_pending: Option<NodeId>,
    draining: Option<NodeId>,
    target: Option<ApEntry>,
    return_candidates: VecDeque<ApEntry>,
    open: Option<OpenHandoff>,
    last_tx: BTreeMap<NodeId, SimTime>,
}

#[derive(Debug, Default, Clone, Copy)]
struct FlowCounts {
    delivered: u64,
    dropped: u64,
}

/// Attachment table at the access router.
#[derive(Debug, Clone, Copy)]
struct Route {
    current: NodeId,
    prev: Option<NodeId>,
}

pub struct World {
    cfg: ScenarioConfig,
    coverage: CoverageModel,
    backbone: Backbone,
    aps: Vec<Ap>,
    bs: Option<Bs>,
    mns: Vec<Mn>,
    routes: BTreeMap<NodeId, Route>,
    counts: Vec<FlowCounts>,
    metrics: MetricsCollector,
    next_packet_id: u64,
    error: Option<WorldError>,
}

impl World {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let cfg = cfg.clone();
        let mut coverage = CoverageModel::new(cfg.radio);
        let mut backbone = Backbone::default();
        let channel = |id: ChannelId, cap: u64| WirelessChannel {
            channel_id: id,
            effective_capacity_bps: cap,
            mac_overhead_per_packet: cfg.mac.overhead,
        };

        let mut aps = Vec::new();
        for (i, spec) in cfg.topology.aps.iter().enumerate() {
            let id = NodeId::ap(i as u16 + 1);
            let ch = ChannelId::new(spec.channel).expect("validated channel");
            coverage.place_station(id, spec.pos, spec.range_m);
            backbone.add(WiredLink::new(id, NodeId::AR, cfg.links.backbone_bps, cfg.links.backbone_delay));
            aps.push(Ap {
                id,
                channel: ch,
                server: ChannelServer::new(id, channel(ch, cfg.mac.effective_capacity_bps), cfg.mac.queue_capacity),
                load: LoadMeter::new(cfg.mac.load_window),
                ho: ApHandoffState::default(),
                associated: BTreeSet::new(),
            });
        }
        backbone.add(WiredLink::new(NodeId::AR, NodeId::CN, cfg.links.backbone_bps, cfg.links.backbone_delay));

        let bs = match (&cfg.topology.bs, cfg.wman.enabled) {
            (Some(spec), true) => {
                coverage.place_station(NodeId::BS, spec.pos, spec.range_m);
                backbone.add(WiredLink::new(NodeId::BS, NodeId::AR, cfg.links.bs_bps, cfg.links.bs_delay));
                // The WMAN radio has no 802.11 channel; the id is a placeholder.
                let ch = ChannelId::new(1).expect("channel 1 exists");
                Some(Bs {
                    server: ChannelServer::new(NodeId::BS, channel(ch, cfg.wman.capacity_bps), cfg.mac.queue_capacity),
                    load: LoadMeter::new(cfg.mac.load_window),
                    attached: BTreeSet::new(),
                })
            }
            _ => None,
        };

        let rng_root = RngState::new(cfg.sim.seed);
        let interval_us = cfg.traffic.interval.as_micros() as u64;
        let mut mns = Vec::new();
        let mut routes = BTreeMap::new();
        for (i, spec) in cfg.topology.mns.iter().enumerate() {
            let id = NodeId::mn(i as u16 + 1);
            coverage.place(id, spec.pos);
            let ap = NodeId::ap(spec.ap);
            let mut rng = rng_root.stream_for(id);
            let phase = if cfg.traffic.phase_jitter {
                rng.random_range(0..interval_us)
            } else {
                0
            };
            let start = SimTime::ZERO + spec.start + Duration::from_micros(phase);
            let mut flow = CbrFlow::new(
                i as u32 + 1,
                id,
                NodeId::CN,
                cfg.traffic.packet_size_bytes,
                cfg.traffic.interval,
                start,
            );
            flow.attachment = Some(ap);
            aps[ap.slot()].associated.insert(id);
            routes.insert(id, Route { current: ap, prev: None });
            let mut ho = MnHandoffState::new(cfg.handoff.n_repeat, cfg.handoff.t_repeat);
            ho.known_bs = None;
            mns.push(Mn {
                id,
                flow,
                active: false,
                assoc: Some(ap),
                tuned: Some(aps[ap.slot()].channel),
                data_via: Some(ap),
                held: VecDeque::new(),
                in_access: 0,
                rng,
                offered: LoadMeter::new(cfg.mac.load_window),
                ewma: EwmaTracker::new(cfg.detection.alpha, cfg.detection.qlength),
                prev_y: None,
                settling: false,
                wman_edge: EdgeTrigger::default(),
                drops: DropRateTracker::new(cfg.detection.window, cfg.detection.drop_threshold),
                ho,
                scan: None,
                retry_timer: None,
                departure: None,
                backoff_until: SimTime::ZERO,
                bs_discovery_pending: false,
                ru_pending: None,
                draining: None,
                target: None,
                return_candidates: VecDeque::new(),
                open: None,
                last_tx: BTreeMap::new(),
            });
        }

        let mut points: Vec<NodeId> = aps.iter().map(|a| a.id).collect();
        if bs.is_some() {
            points.push(NodeId::BS);
        }
        let mut metrics = MetricsCollector::new(cfg.sim.horizon, points);
        for mn in &mns {
            metrics.record_attachment(AttachmentChange {
                at: SimTime::ZERO,
                mn: mn.id,
                node: mn.assoc.expect("initial association"),
                attached: true,
            });
        }
        World {
            counts: vec![FlowCounts::default(); mns.len()],
            cfg,
            coverage,
            backbone,
            aps,
            bs,
            mns,
            routes,
            metrics,
            next_packet_id: 1,
            error: None,
        }
    }

    /// Runs to the horizon and collects the results.
    pub fn run(mut self) -> Result<RunResults, WorldError> {
        let mut sched: Sched = Scheduler::new();
        for i in 0..self.mns.len() {
            let mn = &self.mns[i];
            sched.schedule(mn.flow.start_at, mn.id, Event::Emit)?;
        }
        let horizon = SimTime::ZERO + self.cfg.sim.horizon;
        for k in 1..=self.cfg.sim.horizon.as_secs() as u32 {
            sched.schedule(SimTime::from_secs(k as u64), NodeId::AR, Event::MetricsTick { t_sec: k - 1 })?;
        }
        if self.cfg.sim.horizon.subsec_nanos() > 0 {
            let last = self.cfg.sim.horizon.as_secs() as u32;
            sched.schedule(horizon, NodeId::AR, Event::MetricsTick { t_sec: last })?;
        }
        let stats = sched.run_until(horizon, |s, ev| {
            if self.error.is_none() {
                if let Err(e) = self.handle(s, ev) {
                    self.error = Some(e);
                }
            }
        });
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        let flows = self.audit(&sched);
        Ok(self.metrics.finish(flows, stats))
    }

    fn audit(&self, sched: &Sched) -> Vec<FlowAudit> {
        let mut in_flight = vec![0u64; self.mns.len()];
        let mut count = |p: &Packet| in_flight[p.flow_id as usize - 1] += 1;
        for ap in &self.aps {
            ap.server.data_packets().for_each(&mut count);
        }
        if let Some(bs) = &self.bs {
            bs.server.data_packets().for_each(&mut count);
        }
        for mn in &self.mns {
            mn.held.iter().for_each(&mut count);
        }
        for (_, _, ev) in sched.pending() {
            match ev {
                Event::Wired { payload: Wired::Data(p), .. } | Event::Access { pkt: p } => count(p),
                _ => {}
            }
        }
        self.mns
            .iter()
            .zip(&self.counts)
            .zip(in_flight)
            .map(|((mn, c), f)| FlowAudit {
                flow_id: mn.flow.id,
                generated: mn.flow.generated(),
                delivered: c.delivered,
                dropped: c.dropped,
                in_flight: f,
            })
            .collect()
    }

    fn handle(&mut self, s: &mut Sched, ev: SimEvent<Event>) -> Result<(), WorldError> {
        let node = ev.target;
        match ev.payload {
            Event::Emit => self.on_emit(s, node),
            Event::Access { pkt } => self.on_access(s, node, pkt),
            Event::Sample => self.on_sample(s, node),
            Event::ServiceDone => return self.on_service_done(s, node),
            Event::Wired { dst, payload } => return self.on_wired(s, node, dst, payload),
            Event::ScanTimer => self.on_scan_timer(s, node),
            Event::OnForeignChannel { channel } => self.on_foreign_channel(s, node, channel),
            Event::ProbeHeard { mn, reply_to } => return self.on_probe_heard(s, node, mn, reply_to),
            Event::BackHome { left, last } => self.on_back_home(s, node, left, last),
            Event::ScanComplete => self.on_scan_complete(s, node),
            Event::RetryTimer => self.on_retry_timer(s, node),
            Event::LoadDeadline => self.on_load_deadline(s, node),
            Event::BsFound => self.on_bs_found(node),
            Event::EntryComplete => self.on_entry_complete(s, node),
            Event::SwitchDone => self.on_switch_done(s, node),
            Event::ReturnScan => self.on_return_scan(s, node),
            Event::BackoffOver => self.rearm(node),
            Event::MetricsTick { t_sec } => self.on_metrics_tick(t_sec),
        }
        Ok(())
    }

    fn mn(&mut self, id: NodeId) -> &mut Mn {
        &mut self.mns[id.slot()]
    }

    fn server(&mut self, point: NodeId) -> &mut ChannelServer {
        match point.kind {
            NodeKind::Ap => &mut self.aps[point.slot()].server,
            NodeKind::Bs => &mut self.bs.as_mut().expect("BS exists").server,
            _ => unreachable!("{point} has no radio"),
        }
    }

    fn load_meter(&mut self, point: NodeId) -> &mut LoadMeter {
        match point.kind {
            NodeKind::Ap => &mut self.aps[point.slot()].load,
            NodeKind::Bs => &mut self.bs.as_mut().expect("BS exists").load,
            _ => unreachable!("{point} carries no load"),
        }
    }

    fn control(&self, src: NodeId, dst: NodeId, now: SimTime, msg: ControlMessage) -> ControlFrame {
        ControlFrame {
            src,
            dst,
            created_at: now,
            size_bytes: self.cfg.mac.control_bytes,
            msg,
        }
    }

    /// Starts the next eligible frame if the channel is idle. Stations that
    /// are tuned elsewhere are skipped, not dropped.
    fn kick(&mut self, s: &mut Sched, point: NodeId) {
        let mns = &self.mns;
        let started = match point.kind {
            NodeKind::Ap => {
                let ap = &mut self.aps[point.slot()];
                let ch = ap.channel;
                ap.server.start_next(|m| mns[m.slot()].tuned == Some(ch))
            }
            NodeKind::Bs => self.bs.as_mut().expect("BS exists").server.start_next(|_| true),
            _ => None,
        };
        if let Some(airtime) = started {
            s.schedule_in(airtime, point, Event::ServiceDone);
        }
    }

    fn send_air(&mut self, s: &mut Sched, point: NodeId, frame: ControlFrame) {
        self.server(point).push_control(frame);
        self.kick(s, point);
    }

    fn send_wired(&mut self, s: &mut Sched, from: NodeId, dst: NodeId, payload: Wired) -> Result<(), WorldError> {
        let now = s.now();
        let hop = self.backbone.next_hop(from, dst);
        let size = match &payload {
            Wired::Data(p) => p.size_bytes,
            Wired::Control(c) => c.size_bytes,
        };
        let at = self.backbone.transmit(from, hop, size, now)?;
        s.schedule(at, hop, Event::Wired { dst, payload })?;
        Ok(())
    }

    fn detection_on(&self) -> bool {
        self.cfg.sim.scheme
    }

    // ---- traffic ----

    fn on_emit(&mut self, s: &mut Sched, id: NodeId) {
        let now = s.now();
        let pid = self.next_packet_id;
        self.next_packet_id += 1;
        let interval = self.cfg.traffic.interval;
        let first = !self.mn(id).active;
        let mn = self.mn(id);
        mn.active = true;
        let pkt = mn.flow.emit(pid, now);
        mn.offered.record(now, pkt.bits());
        let jitter = self.cfg.mac.access_jitter.as_micros() as u64;
        let mn = self.mn(id);
        let wait = if jitter > 0 { mn.rng.random_range(0..=jitter) } else { 0 };
        mn.in_access += 1;
        s.schedule_in(Duration::from_micros(wait), id, Event::Access { pkt });
        s.schedule_in(interval, id, Event::Emit);
        if first && self.detection_on() && self.cfg.detection.mode == DetectionMode::Ewma {
            // Samples fall on a common grid, not in step with the source.
            let period = self.cfg.detection.sample_period.as_micros() as u64;
            let next = (now.as_micros() / period + 1) * period;
            s.schedule_in(Duration::from_micros(next - now.as_micros()), id, Event::Sample);
        }
    }

    fn on_access(&mut self, s: &mut Sched, id: NodeId, pkt: Packet) {
        let now = s.now();
        let mn = self.mn(id);
        mn.in_access -= 1;
        match mn.data_via {
            Some(point) if mn.held.is_empty() => {
                self.load_meter(point).record(now, pkt.bits());
                self.enqueue(s, point, pkt);
            }
            via => {
                if self.mns[id.slot()].held.len() < self.cfg.mac.queue_capacity {
                    self.mn(id).held.push_back(pkt);
                    self.release_held(s, id);
                } else {
                    let at = via.or(self.mns[id.slot()].target.map(|t| t.ap_id)).unwrap_or(NodeId::AR);
                    self.count_drop(s, id, at);
                }
            }
        }
    }

    /// A backlog carried across a handoff contends like any station: one
    /// frame in the shared queue at a time.
    fn release_held(&mut self, s: &mut Sched, id: NodeId) {
        let now = s.now();
        let Some(point) = self.mns[id.slot()].data_via else {
            return;
        };
        while self.server(point).backlog_of(id) == 0 {
            let Some(pkt) = self.mn(id).held.pop_front() else {
                return;
            };
            self.load_meter(point).record(now, pkt.bits());
            self.enqueue(s, point, pkt);
        }
    }

    fn count_drop(&mut self, s: &mut Sched, mn: NodeId, at: NodeId) {
        self.counts[mn.slot()].dropped += 1;
        if at != NodeId::AR {
            self.metrics.record_drop(at, s.now());
        }
    }

    /// Offers a data packet to an AP/BS queue and feeds the drop detector.
    fn enqueue(&mut self, s: &mut Sched, point: NodeId, pkt: Packet) {
        let now = s.now();
        let src = pkt.src;
        let outcome = match self.server(point).offer(pkt) {
            Ok(()) => SendOutcome::Sent,
            Err(_) => {
                self.count_drop(s, src, point);
                SendOutcome::Dropped
            }
        };
        let update = self.mn(src).drops.record(now, outcome);
        if outcome == SendOutcome::Sent {
            self.kick(s, point);
        }
        if update.triggered && self.detection_on() && self.cfg.detection.mode == DetectionMode::DropRate {
            self.on_trigger(s, src, TriggerKind::DropRate);
        }
    }

    fn backlog(&self, id: NodeId) -> usize {
        let mn = &self.mns[id.slot()];
        let queued = match mn.data_via {
            Some(p) if p.is_ap() => self.aps[p.slot()].server.backlog_of(id),
            Some(_) => self.bs.as_ref().map_or(0, |b| b.server.backlog_of(id)),
            None => 0,
        };
        queued + mn.held.len() + mn.in_access
    }

    // ---- detection ----

    fn on_sample(&mut self, s: &mut Sched, id: NodeId) {
        s.schedule_in(self.cfg.detection.sample_period, id, Event::Sample);
        let y = self.backlog(id) as f64;
        let wman = self.bs.is_some();
        let limit = self.cfg.detection.wman_limit();
        let mn = self.mn(id);
        if mn.settling {
            if y > mn.ewma.threshold() {
                return;
            }
            mn.settling = false;
        }
        let Some(prev) = mn.prev_y.replace(y) else {
            return;
        };
        mn.ewma.update(prev);
        let crossed = mn.ewma.crossed();
        let wman_cross = wman && mn.ewma.warmed_up() && mn.wman_edge.observe(mn.ewma.value() > limit);
        if wman_cross {
            self.start_bs_discovery(s, id);
        }
        if crossed {
            self.on_trigger(s, id, TriggerKind::Ewma);
        }
    }

    fn on_trigger(&mut self, s: &mut Sched, id: NodeId, kind: TriggerKind) {
        let now = s.now();
        let mn = &self.mns[id.slot()];
        let eligible = now >= mn.backoff_until
            && mn.assoc.is_some()
            && mn.data_via == mn.assoc
            && mn.draining.is_none()
            && mn.open.is_none();
        let accepted = eligible && self.mn(id).ho.on_degradation();
        self.metrics.record_trigger(TriggerRecord {
            at: now,
            mn: id,
            kind,
            ignored: !accepted,
        });
        if kind == TriggerKind::DropRate {
            self.start_bs_discovery(s, id);
        }
        if accepted {
            let home = self.aps[self.mns[id.slot()].assoc.expect("associated").slot()].channel;
            self.start_scan(s, id, ScanState::around(home), false);
        }
    }

    fn rearm(&mut self, id: NodeId) {
        let mn = self.mn(id);
        mn.ewma.rearm();
        mn.drops.rearm();
    }

    fn reset_detectors(&mut self, id: NodeId) {
        let mn = self.mn(id);
        mn.ewma.reset();
        mn.prev_y = None;
        mn.settling = true;
        mn.drops.reset();
        mn.wman_edge.rearm();
    }

    fn back_off(&mut self, s: &mut Sched, id: NodeId) {
        let d = self.cfg.handoff.retry_backoff;
        let now = s.now();
        let mn = self.mn(id);
        mn.ho.phase = MnPhase::Idle;
        mn.backoff_until = now + d;
        s.schedule_in(d, id, Event::BackoffOver);
    }

    // ---- scanning ----

    fn start_scan(&mut self, s: &mut Sched, id: NodeId, state: ScanState, returning: bool) {
        let now = s.now();
        self.mn(id).scan = Some(ActiveScan {
            state,
            started: now,
            returning,
        });
        s.schedule_in(Duration::ZERO, id, Event::ScanTimer);
    }

    fn on_scan_timer(&mut self, s: &mut Sched, id: NodeId) {
        let period = self.cfg.scan.period;
        let Some(scan) = self.mn(id).scan.as_mut() else {
            return;
        };
        let Some(step) = scan.state.tick() else {
            return;
        };
        if !step.cycle_done {
            s.schedule_in(period, id, Event::ScanTimer);
        }
        self.depart(
            s,
            id,
            Departure::Scan {
                channel: step.channel,
                last: step.cycle_done,
            },
        );
    }

    /// Leaves the home channel now, or right after the frame the MN has on
    /// the air. A handoff also waits for the MN's next queued frame.
    fn depart(&mut self, s: &mut Sched, id: NodeId, d: Departure) {
        let mn = &self.mns[id.slot()];
        let busy = mn
            .assoc
            .filter(|p| mn.tuned == Some(self.aps[p.slot()].channel))
            .is_some_and(|p| {
                let server = &self.aps[p.slot()].server;
                match d {
                    Departure::Scan { .. } => server.is_transmitting(id),
                    Departure::Handoff => server.backlog_of(id) > 0,
                }
            });
        if busy {
            self.mn(id).departure = Some(d);
        } else {
            self.execute_departure(s, id, d);
        }
    }

    fn execute_departure(&mut self, s: &mut Sched, id: NodeId, d: Departure) {
        let now = s.now();
        let sw = self.cfg.scan.switch;
        match d {
            Departure::Scan { channel, last } => {
                let dwell = self.cfg.scan.dwell;
                self.mn(id).tuned = None;
                s.schedule_in(sw, id, Event::OnForeignChannel { channel });
                s.schedule_in(sw + dwell + sw, id, Event::BackHome { left: now, last });
            }
            Departure::Handoff => {
                let from = self.mns[id.slot()].assoc.expect("associated before handoff");
                let server = self.server(from);
                let mut withdrawn: VecDeque<Packet> = server.withdraw(id).into();
                server.purge_control(id);
                let mn = self.mn(id);
                withdrawn.append(&mut mn.held);
                mn.held = withdrawn;
                mn.data_via = None;
                mn.assoc = None;
                mn.tuned = None;
                let last = mn.last_tx.get(&from).copied();
                if let Some(o) = mn.open.as_mut() {
                    o.old_released = true;
                    o.last_old = last;
                }
                self.aps[from.slot()].associated.remove(&id);
                self.metrics.record_attachment(AttachmentChange {
                    at: now,
                    mn: id,
                    node: from,
                    attached: false,
                });
                s.schedule_in(sw, id, Event::SwitchDone);
            }
        }
    }

    fn on_foreign_channel(&mut self, s: &mut Sched, id: NodeId, channel: ChannelId) {
        let reply_to = self.mns[id.slot()].assoc.unwrap_or(NodeId::BS);
        let heard: Vec<(NodeId, Duration)> = self
            .aps
            .iter()
            .filter(|ap| ap.channel == channel && self.coverage.in_range(id, ap.id))
            .map(|ap| (ap.id, ap.server.channel().service_time(self.cfg.mac.control_bytes)))
            .collect();
        for (ap, airtime) in heard {
            s.schedule_in(airtime, ap, Event::ProbeHeard { mn: id, reply_to });
        }
    }

    fn on_probe_heard(&mut self, s: &mut Sched, ap: NodeId, mn: NodeId, reply_to: NodeId) -> Result<(), WorldError> {
        let now = s.now();
        let Some(sinr) = self.coverage.signal_quality(mn, ap).db() else {
            return Ok(());
        };
        let entry = ApEntry {
            ap_id: ap,
            channel: self.aps[ap.slot()].channel,
            sinr,
        };
        if reply_to == NodeId::BS && self.bs.is_none() {
            return Ok(());
        }
        let frame = self.control(ap, reply_to, now, ControlMessage::DsProbeResponse { mn, entry });
        self.send_wired(s, ap, reply_to, Wired::Control(frame))
    }

    fn on_back_home(&mut self, s: &mut Sched, id: NodeId, left: SimTime, last: bool) {
        let now = s.now();
        let home = self.mns[id.slot()].assoc.map(|p| (p, self.aps[p.slot()].channel));
        self.mn(id).tuned = home.map(|(_, c)| c);
        let channel = self.mns[id.slot()]
            .scan
            .as_ref()
            .and_then(|sc| {
                let list = sc.state.channel_list();
                // Last probed channel is the one before `next`.
                let next = sc.state.next_channel()?;
                let i = list.iter().position(|&c| c == next)?;
                Some(list[(i + list.len() - 1) % list.len()])
            })
            .unwrap_or_else(|| ChannelId::new(1).expect("channel 1 exists"));
        self.metrics.record_dwell(DwellRecord {
            mn: id,
            channel,
            left_home: left,
            back_home: now,
            dwell: self.cfg.scan.dwell,
        });
        if let Some((p, _)) = home {
            self.kick(s, p);
        }
        if last {
            s.schedule_in(self.cfg.scan.collect, id, Event::ScanComplete);
        }
    }

    fn on_scan_complete(&mut self, s: &mut Sched, id: NodeId) {
        let now = s.now();
        let Some(scan) = self.mn(id).scan.take() else {
            return;
        };
        let channels = scan.state.channel_list().to_vec();
        let ap_list = scan.state.into_ap_list();
        self.metrics.record_scan_cycle(ScanCycleRecord {
            mn: id,
            started_at: scan.started,
            completed_at: now,
            channels,
            aps_found: ap_list.iter().map(|e| e.ap_id).collect(),
        });
        if scan.returning {
            let mut cands = ap_list;
            cands.sort_by(|a, b| b.sinr.total_cmp(&a.sinr).then(a.ap_id.cmp(&b.ap_id)));
            self.mn(id).return_candidates = cands.into();
            self.try_next_candidate(s, id);
        } else {
            self.mn(id).ho.on_scan_complete(ap_list);
            self.send_move_request(s, id);
        }
    }

    // ---- horizontal protocol ----

    fn send_move_request(&mut self, s: &mut Sched, id: NodeId) {
        let now = s.now();
        let t_repeat = self.cfg.handoff.t_repeat;
        let mn = self.mn(id);
        let m = mn.offered.measure(now);
        let ap_list = mn.ho.ap_list.clone();
        let Some(ap) = mn.assoc else {
            return;
        };
        let frame = self.control(id, ap, now, ControlMessage::MoveRequest { ap_list, mn_load: m });
        self.send_air(s, ap, frame);
        let h = s.schedule_in(t_repeat, id, Event::RetryTimer);
        self.mn(id).retry_timer = Some(h);
    }

    fn on_retry_timer(&mut self, s: &mut Sched, id: NodeId) {
        let mn = self.mn(id);
        mn.retry_timer = None;
        if !matches!(mn.ho.phase, MnPhase::Requesting | MnPhase::AwaitingTarget) {
            return;
        }
        match mn.ho.on_retry_timer() {
            RetryAction::Resend => self.send_move_request(s, id),
            RetryAction::Abandon => self.rearm(id),
        }
    }

    fn on_move_request(&mut self, s: &mut Sched, ap: NodeId, mn: NodeId, ap_list: &[ApEntry], m: BitRate) -> Result<(), WorldError> {
        let now = s.now();
        let timeout = self.cfg.handoff.load_response_timeout;
        let r = self.aps[ap.slot()].ho.on_move_request(now, ap, mn, ap_list, m, timeout);
        self.metrics.record_move_request(MoveRequestRecord {
            at: now,
            ap,
            mn,
            outcome: match &r {
                Ok(_) => MoveRequestOutcome::Processed,
                Err(d) => MoveRequestOutcome::Dropped(*d),
            },
        });
        if let Ok(asked) = r {
            for peer in asked {
                let frame = self.control(ap, peer, now, ControlMessage::LoadRequest);
                self.send_wired(s, ap, peer, Wired::Control(frame))?;
            }
            s.schedule_in(timeout, ap, Event::LoadDeadline);
        }
        Ok(())
    }

    fn on_load_deadline(&mut self, s: &mut Sched, ap: NodeId) {
        let now = s.now();
        let delta = self.cfg.handoff.delta_bps;
        let t_ignore = self.cfg.handoff.t_ignore;
        let a = &mut self.aps[ap.slot()];
        let own = a.load.measure(now);
        let Some((mn, hc_list)) = a.ho.on_deadline(now, own, delta, t_ignore) else {
            return;
        };
        if self.mns[mn.slot()].assoc == Some(ap) {
            let frame = self.control(ap, mn, now, ControlMessage::HandoffTarget { hc_list });
            self.send_air(s, ap, frame);
        }
    }

    fn on_handoff_target(&mut self, s: &mut Sched, id: NodeId, hc_list: &[NodeId]) {
        let now = s.now();
        if let Some(h) = self.mn(id).retry_timer.take() {
            s.cancel(h);
        }
        let decision = self.mn(id).ho.on_target(hc_list);
        match decision {
            TargetDecision::Horizontal(t) => {
                let mn = self.mn(id);
                let from = mn.assoc.expect("associated");
                mn.target = mn.ho.ap_list.iter().find(|e| e.ap_id == t).copied();
                mn.open = Some(OpenHandoff {
                    from,
                    to: t,
                    kind: HandoffKind::Horizontal,
                    decided_at: now,
                    completed_at: None,
                    old_released: false,
                    last_old: None,
                    first_new: None,
                });
                self.depart(s, id, Departure::Handoff);
            }
            TargetDecision::Vertical(bs) => self.begin_vertical(s, id, bs),
            TargetDecision::Backoff => self.back_off(s, id),
            TargetDecision::Ignore => {}
        }
    }

    fn on_switch_done(&mut self, s: &mut Sched, id: NodeId) {
        let now = s.now();
        let Some(target) = self.mns[id.slot()].target else {
            return;
        };
        let phase = self.mns[id.slot()].ho.phase;
        if !self.coverage.in_range(id, target.ap_id) {
            match phase {
                MnPhase::Returning => self.try_next_candidate(s, id),
                _ => {
                    // Association failed: go back to the AP just left.
                    let from = self.mns[id.slot()].open.map(|o| o.from);
                    let mn = self.mn(id);
                    mn.open = None;
                    if let Some(from) = from {
                        let ch = self.aps[from.slot()].channel;
                        self.mn(id).target = Some(ApEntry {
                            ap_id: from,
                            channel: ch,
                            sinr: 0.0,
                        });
                        s.schedule_in(self.cfg.scan.switch, id, Event::SwitchDone);
                    }
                }
            }
            return;
        }
        self.mn(id).tuned = Some(target.channel);
        let msg = match phase {
            MnPhase::Returning => ControlMessage::LoadRequestFromMn {
                mn_load: self.mn(id).offered.measure(now),
            },
            _ => ControlMessage::AssocRequest,
        };
        let frame = self.control(id, target.ap_id, now, msg);
        self.send_air(s, target.ap_id, frame);
    }

    fn on_assoc_response(&mut self, s: &mut Sched, id: NodeId, ap: NodeId) {
        let now = s.now();
        let phase = self.mns[id.slot()].ho.phase;
        if !matches!(phase, MnPhase::HandingOff | MnPhase::Returning) {
            return;
        }
        self.aps[ap.slot()].associated.insert(id);
        self.metrics.record_attachment(AttachmentChange {
            at: now,
            mn: id,
            node: ap,
            attached: true,
        });
        let mn = self.mn(id);
        mn.assoc = Some(ap);
        mn.target = None;
        mn.flow.attachment = Some(ap);
        mn.ho.phase = MnPhase::Idle;
        if let Some(o) = mn.open.as_mut() {
            o.completed_at = Some(now);
        }
        // Route update first: control frames go out ahead of data.
        let ru = self.control(id, ap, now, ControlMessage::RouteUpdate { mn: id, new_attachment: ap });
        self.send_air(s, ap, ru);
        let mn = self.mn(id);
        mn.ru_pending = Some(ap);
        mn.data_via = Some(ap);
        if phase == MnPhase::Returning {
            mn.draining = Some(NodeId::BS);
        }
        self.release_held(s, id);
        self.reset_detectors(id);
        self.close_handoff_if_done(id);
    }

    // ---- vertical ----

    fn start_bs_discovery(&mut self, s: &mut Sched, id: NodeId) {
        if self.bs.is_none() || !self.detection_on() {
            return;
        }
        let now = s.now();
        let mn = self.mn(id);
        if mn.ho.known_bs.is_some() || mn.bs_discovery_pending {
            return;
        }
        mn.bs_discovery_pending = true;
        self.metrics.record_trigger(TriggerRecord {
            at: now,
            mn: id,
            kind: TriggerKind::WmanActivation,
            ignored: false,
        });
        s.schedule_in(self.cfg.wman.scan_latency, id, Event::BsFound);
    }

    fn on_bs_found(&mut self, id: NodeId) {
        let found = self.bs.is_some() && self.coverage.in_range(id, NodeId::BS);
        let mn = self.mn(id);
        mn.bs_discovery_pending = false;
        if found {
            mn.ho.known_bs = Some(NodeId::BS);
        }
    }

    fn begin_vertical(&mut self, s: &mut Sched, id: NodeId, bs: NodeId) {
        let now = s.now();
        let cap = self.cfg.wman.capacity_bps as f64;
        let bs_load = self.load_meter(bs).measure(now);
        let mn = self.mn(id);
        let m = mn.offered.measure(now);
        if !bs_admits(bs_load, m, cap) {
            self.back_off(s, id);
            return;
        }
        let from = mn.assoc.expect("associated");
        mn.open = Some(OpenHandoff {
            from,
            to: bs,
            kind: HandoffKind::VerticalUp,
            decided_at: now,
            completed_at: None,
            old_released: false,
            last_old: None,
            first_new: None,
        });
        s.schedule_in(self.cfg.wman.entry_latency, id, Event::EntryComplete);
    }

    fn on_entry_complete(&mut self, s: &mut Sched, id: NodeId) {
        let now = s.now();
        if let Some(bs) = self.bs.as_mut() {
            bs.attached.insert(id);
        }
        self.metrics.record_attachment(AttachmentChange {
            at: now,
            mn: id,
            node: NodeId::BS,
            attached: true,
        });
        let ru = self.control(id, NodeId::BS, now, ControlMessage::RouteUpdate { mn: id, new_attachment: NodeId::BS });
        self.send_air(s, NodeId::BS, ru);
        let mn = self.mn(id);
        mn.ru_pending = Some(NodeId::BS);
        mn.draining = mn.assoc;
        mn.data_via = Some(NodeId::BS);
        mn.flow.attachment = Some(NodeId::BS);
        mn.ho.phase = MnPhase::OnWman;
        if let Some(o) = mn.open.as_mut() {
            o.completed_at = Some(now);
        }
        self.try_finish_drain(s, id);
    }

    /// Releases the old attachment once its queue holds nothing of ours and
    /// the route update is on its way.
    fn try_finish_drain(&mut self, s: &mut Sched, id: NodeId) {
        let now = s.now();
        let mn = &self.mns[id.slot()];
        let Some(old) = mn.draining else {
            return;
        };
        if mn.ru_pending.is_some() {
            return;
        }
        let pending = match old.kind {
            NodeKind::Ap => self.aps[old.slot()].server.backlog_of(id),
            _ => self.bs.as_ref().map_or(0, |b| b.server.backlog_of(id)),
        };
        if pending > 0 {
            return;
        }
        self.server(old).purge_control(id);
        match old.kind {
            NodeKind::Ap => {
                self.aps[old.slot()].associated.remove(&id);
                let mn = self.mn(id);
                mn.assoc = None;
                mn.tuned = None;
                s.schedule_in(self.cfg.wman.return_scan_period, id, Event::ReturnScan);
            }
            _ => {
                if let Some(bs) = self.bs.as_mut() {
                    bs.attached.remove(&id);
                }
            }
        }
        self.metrics.record_attachment(AttachmentChange {
            at: now,
            mn: id,
            node: old,
            attached: false,
        });
        let mn = self.mn(id);
        mn.draining = None;
        let last = mn.last_tx.get(&old).copied();
        if let Some(o) = mn.open.as_mut() {
            o.old_released = true;
            o.last_old = last;
        }
        self.reset_detectors(id);
        self.close_handoff_if_done(id);
    }

    fn on_return_scan(&mut self, s: &mut Sched, id: NodeId) {
        let mn = self.mn(id);
        if mn.ho.phase != MnPhase::OnWman || mn.assoc.is_some() || mn.scan.is_some() {
            return;
        }
        mn.ho.phase = MnPhase::Returning;
        self.start_scan(s, id, ScanState::unassociated(), true);
    }

    fn try_next_candidate(&mut self, s: &mut Sched, id: NodeId) {
        let period = self.cfg.wman.return_scan_period;
        let mn = self.mn(id);
        mn.tuned = None;
        match mn.return_candidates.pop_front() {
            Some(c) => {
                mn.target = Some(c);
                s.schedule_in(self.cfg.scan.switch, id, Event::SwitchDone);
            }
            None => {
                mn.target = None;
                mn.ho.phase = MnPhase::OnWman;
                s.schedule_in(period, id, Event::ReturnScan);
            }
        }
    }

    fn on_return_load_response(&mut self, s: &mut Sched, id: NodeId, from: NodeId, spare: BitRate) {
        let now = s.now();
        let delta = self.cfg.handoff.delta_bps;
        let mn = self.mn(id);
        if mn.ho.phase != MnPhase::Returning || mn.target.map(|t| t.ap_id) != Some(from) {
            return;
        }
        let m = mn.offered.measure(now);
        if !return_allowed(spare, m, delta) {
            self.try_next_candidate(s, id);
            return;
        }
        mn.open = Some(OpenHandoff {
            from: NodeId::BS,
            to: from,
            kind: HandoffKind::VerticalDown,
            decided_at: now,
            completed_at: None,
            old_released: false,
            last_old: None,
            first_new: None,
        });
        let frame = self.control(id, from, now, ControlMessage::AssocRequest);
        self.send_air(s, from, frame);
    }

    fn close_handoff_if_done(&mut self, id: NodeId) {
        let mn = self.mn(id);
        let Some(o) = mn.open else {
            return;
        };
        let (Some(done), Some(first)) = (o.completed_at, o.first_new) else {
            return;
        };
        if !o.old_released {
            return;
        }
        mn.open = None;
        let gap = o.last_old.map_or(Duration::ZERO, |l| first.saturating_since(l));
        self.metrics.record_handoff(HandoffRow {
            mn: id,
            from: o.from,
            to: o.to,
            kind: o.kind,
            decided_at: o.decided_at,
            completed_at: done,
            gap,
        });
    }

    // ---- channel service and delivery ----

    fn on_service_done(&mut self, s: &mut Sched, point: NodeId) -> Result<(), WorldError> {
        let now = s.now();
        let Some(frame) = self.server(point).finish() else {
            return Ok(());
        };
        match frame {
            Frame::Data(mut pkt) => {
                let id = pkt.src;
                pkt.via = Some(point);
                let mn = self.mn(id);
                mn.last_tx.insert(point, now);
                if let Some(o) = mn.open.as_mut() {
                    if o.to == point && o.first_new.is_none() && o.completed_at.is_some() {
                        o.first_new = Some(now);
                    }
                }
                self.close_handoff_if_done(id);
                self.send_wired(s, point, NodeId::CN, Wired::Data(pkt))?;
                if self.mns[id.slot()].assoc == Some(point) {
                    if let Some(d) = self.mn(id).departure.take() {
                        self.execute_departure(s, id, d);
                    }
                }
                if self.mns[id.slot()].data_via == Some(point) {
                    self.release_held(s, id);
                }
                if self.mns[id.slot()].draining == Some(point) {
                    self.try_finish_drain(s, id);
                }
            }
            Frame::Control(cf) => {
                if cf.dst == point {
                    self.on_uplink_control(s, point, cf)?;
                } else {
                    self.on_downlink_control(s, point, cf);
                }
            }
        }
        self.kick(s, point);
        Ok(())
    }

    fn on_uplink_control(&mut self, s: &mut Sched, point: NodeId, cf: ControlFrame) -> Result<(), WorldError> {
        let now = s.now();
        let mn = cf.src;
        match cf.msg {
            ControlMessage::MoveRequest { ap_list, mn_load } => {
                self.on_move_request(s, point, mn, &ap_list, mn_load)?;
            }
            ControlMessage::AssocRequest => {
                let frame = self.control(point, mn, now, ControlMessage::AssocResponse);
                self.send_air(s, point, frame);
            }
            ControlMessage::LoadRequestFromMn { .. } => {
                let cap = self.cfg.mac.effective_capacity_bps as f64;
                let load = self.load_meter(point).measure(now);
                let frame = self.control(
                    point,
                    mn,
                    now,
                    ControlMessage::LoadResponse {
                        load_bps: load,
                        spare_bps: spare_capacity(cap, load),
                    },
                );
                self.send_air(s, point, frame);
            }
            ControlMessage::RouteUpdate { .. } => {
                let fwd = ControlFrame { dst: NodeId::AR, ..cf };
                self.send_wired(s, point, NodeId::AR, Wired::Control(fwd))?;
                if self.mns[mn.slot()].ru_pending == Some(point) {
                    self.mn(mn).ru_pending = None;
                    self.try_finish_drain(s, mn);
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn on_downlink_control(&mut self, s: &mut Sched, point: NodeId, cf: ControlFrame) {
        let id = cf.dst;
        match cf.msg {
            ControlMessage::HandoffTarget { hc_list } => self.on_handoff_target(s, id, &hc_list),
            ControlMessage::AssocResponse => self.on_assoc_response(s, id, point),
            ControlMessage::LoadResponse { spare_bps, .. } => self.on_return_load_response(s, id, point, spare_bps),
            ControlMessage::DsProbeResponse { entry, .. } => {
                if let Some(scan) = self.mn(id).scan.as_mut() {
                    scan.state.record(entry);
                }
            }
            _ => {}
        }
    }

    fn on_wired(&mut self, s: &mut Sched, at: NodeId, dst: NodeId, payload: Wired) -> Result<(), WorldError> {
        let now = s.now();
        if at == NodeId::AR {
            match &payload {
                Wired::Data(p) => {
                    let route = self.routes.get(&p.src).copied();
                    let ok = match (route, p.via) {
                        (Some(r), Some(v)) => v == r.current || Some(v) == r.prev,
                        _ => false,
                    };
                    if !ok {
                        self.metrics.record_route_violation();
                    }
                }
                Wired::Control(cf) => {
                    if let ControlMessage::RouteUpdate { mn, new_attachment } = cf.msg {
                        if let Some(r) = self.routes.get_mut(&mn) {
                            if r.current != new_attachment {
                                r.prev = Some(r.current);
                                r.current = new_attachment;
                            }
                        }
                    }
                }
            }
        }
        if at != dst {
            return self.send_wired(s, at, dst, payload);
        }
        match payload {
            Wired::Data(p) => {
                self.counts[p.flow_id as usize - 1].delivered += 1;
                self.metrics.record_delivery(&p, now);
            }
            Wired::Control(cf) => match cf.msg {
                ControlMessage::LoadRequest => {
                    let load = self.load_meter(at).measure(now);
                    let cap = self.cfg.mac.effective_capacity_bps as f64;
                    let frame = self.control(
                        at,
                        cf.src,
                        now,
                        ControlMessage::LoadResponse {
                            load_bps: load,
                            spare_bps: spare_capacity(cap, load),
                        },
                    );
                    self.send_wired(s, at, cf.src, Wired::Control(frame))?;
                }
                ControlMessage::LoadResponse { load_bps, .. } => {
                    self.aps[at.slot()].ho.on_load_response(now, cf.src, load_bps);
                }
                ControlMessage::DsProbeResponse { mn, .. } => {
                    let reachable = match at.kind {
                        NodeKind::Ap => self.mns[mn.slot()].assoc == Some(at),
                        NodeKind::Bs => self.mns[mn.slot()].data_via == Some(NodeId::BS),
                        _ => false,
                    };
                    if reachable && self.mns[mn.slot()].scan.is_some() {
                        let frame = ControlFrame { src: at, dst: mn, ..cf };
                        self.send_air(s, at, frame);
                    }
                }
                _ => {}
            },
        }
        Ok(())
    }

    fn on_metrics_tick(&mut self, t_sec: u32) {
        for ap in &self.aps {
            let n = ap.associated.iter().filter(|m| self.mns[m.slot()].active).count();
            self.metrics.record_mn_count(t_sec, ap.id, n as u32);
        }
        if let Some(bs) = &self.bs {
            self.metrics.record_mn_count(t_sec, NodeId::BS, bs.attached.len() as u32);
        }
    }
}

/// Builds the world for `cfg` and runs it to the horizon.
pub fn run(cfg: &ScenarioConfig) -> Result<RunResults, WorldError> {
    World::new(cfg).run()
}

/// Strongest AP among scan results, used by tests and tools.
pub fn best_entry(entries: &[ApEntry]) -> Option<NodeId> {
    strongest(entries.iter().map(|e| (e.ap_id, e.sinr)))
}
