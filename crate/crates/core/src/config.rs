//! Scenario configuration: sectioned `key = value` text, defaults, validation
//! and the six standard case presets.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment            (also allowed after a value)
//! [section]
//! key = value
//! ```
//!
//! Durations are in the unit named by the key suffix (`_ms`, `_s`, `_us`)
//! and may be fractional. Topology entries are whitespace-separated tuples:
//! `ap.N = x y channel range_m`, `bs = x y range_m`, `mn.N = x y ap start_s`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::detection::DetectionMode;
use crate::network::{ChannelId, Position, RadioParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{key}: {reason}")]
    Validation { key: String, reason: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub horizon: Duration,
    pub seed: u64,
    /// Off reproduces the baseline: nobody ever moves.
    pub scheme: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacParams {
    pub effective_capacity_bps: u64,
    pub overhead: Duration,
    /// Upper bound of the random channel-access delay before a frame joins
    /// the shared queue; stands in for DCF backoff.
    pub access_jitter: Duration,
    pub queue_capacity: usize,
    pub load_window: Duration,
    pub control_bytes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub backbone_bps: u64,
    pub backbone_delay: Duration,
    pub bs_bps: u64,
    pub bs_delay: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficParams {
    pub packet_size_bytes: u32,
    pub interval: Duration,
    /// Offset each flow's first packet by a seeded fraction of one interval.
    pub phase_jitter: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionParams {
    pub mode: DetectionMode,
    pub alpha: f64,
    pub qlength: f64,
    pub drop_threshold: f64,
    pub sample_period: Duration,
    pub window: Duration,
    /// EWMA level that switches the WMAN radio on; defaults to `qlength`.
    pub wman_limit: Option<f64>,
}

impl DetectionParams {
    pub fn wman_limit(&self) -> f64 {
        self.wman_limit.unwrap_or(self.qlength)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanParams {
    pub period: Duration,
    pub dwell: Duration,
    pub switch: Duration,
    /// How long after the last probe the MN keeps collecting responses.
    pub collect: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoffParams {
    pub delta_bps: f64,
    pub t_ignore: Duration,
    pub t_repeat: Duration,
    pub n_repeat: u32,
    pub load_response_timeout: Duration,
    pub retry_backoff: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmanParams {
    pub enabled: bool,
    pub entry_latency: Duration,
    pub scan_latency: Duration,
    pub return_scan_period: Duration,
    pub capacity_bps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApSpec {
    pub pos: Position,
    pub channel: u8,
    pub range_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsSpec {
    pub pos: Position,
    pub range_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnSpec {
    pub pos: Position,
    /// 1-based index of the AP the MN starts associated with.
    pub ap: u16,
    pub start: Duration,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Topology {
    pub aps: Vec<ApSpec>,
    pub bs: Option<BsSpec>,
    pub mns: Vec<MnSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub sim: SimParams,
    pub mac: MacParams,
    pub radio: RadioParams,
    pub links: LinkParams,
    pub traffic: TrafficParams,
    pub detection: DetectionParams,
    pub scan: ScanParams,
    pub handoff: HandoffParams,
    pub wman: WmanParams,
    pub topology: Topology,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            sim: SimParams {
                horizon: Duration::from_secs(20),
                seed: 1,
                scheme: true,
            },
            mac: MacParams {
                effective_capacity_bps: 4_200_000,
                overhead: Duration::from_micros(100),
                access_jitter: Duration::from_micros(3000),
                queue_capacity: 100,
                load_window: Duration::from_secs(1),
                control_bytes: 128,
            },
            radio: RadioParams::default(),
            links: LinkParams {
                backbone_bps: 100_000_000,
                backbone_delay: Duration::from_millis(2),
                bs_bps: 10_000_000,
                bs_delay: Duration::from_millis(2),
            },
            traffic: TrafficParams {
                packet_size_bytes: 1500,
                interval: Duration::from_millis(20),
                phase_jitter: true,
            },
            detection: DetectionParams {
                mode: DetectionMode::Ewma,
                alpha: 0.1,
                qlength: 1.3,
                drop_threshold: 0.01,
                sample_period: Duration::from_millis(20),
                window: Duration::from_secs(1),
                wman_limit: None,
            },
            scan: ScanParams {
                period: Duration::from_millis(100),
                dwell: Duration::from_millis(5),
                switch: Duration::from_millis(1),
                collect: Duration::from_millis(20),
            },
            handoff: HandoffParams {
                delta_bps: 250_000.0,
                t_ignore: Duration::from_secs(1),
                t_repeat: Duration::from_millis(200),
                n_repeat: 4,
                load_response_timeout: Duration::from_millis(50),
                retry_backoff: Duration::from_secs(1),
            },
            wman: WmanParams {
                enabled: false,
                entry_latency: Duration::from_millis(20),
                scan_latency: Duration::from_millis(50),
                return_scan_period: Duration::from_secs(5),
                capacity_bps: 10_000_000,
            },
            topology: Topology::default(),
        }
    }
}

/// The six experiment cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CasePreset {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl CasePreset {
    pub const ALL: [CasePreset; 6] = [
        CasePreset::I,
        CasePreset::II,
        CasePreset::III,
        CasePreset::IV,
        CasePreset::V,
        CasePreset::VI,
    ];

    pub fn detection_mode(self) -> DetectionMode {
        match self {
            CasePreset::I | CasePreset::IV => DetectionMode::DropRate,
            _ => DetectionMode::Ewma,
        }
    }

    /// EWMA threshold; the drop-rate cases keep the tighter value for the
    /// WMAN activation limit.
    pub fn qlength(self) -> f64 {
        match self {
            CasePreset::II | CasePreset::V => 10.0,
            _ => 1.3,
        }
    }

    pub fn wman_enabled(self) -> bool {
        matches!(self, CasePreset::IV | CasePreset::V | CasePreset::VI)
    }

    pub fn name(self) -> &'static str {
        match self {
            CasePreset::I => "I",
            CasePreset::II => "II",
            CasePreset::III => "III",
            CasePreset::IV => "IV",
            CasePreset::V => "V",
            CasePreset::VI => "VI",
        }
    }
}

impl fmt::Display for CasePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CasePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        CasePreset::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown case {s:?}, expected one of I..VI"))
    }
}

/// Two overlapping BSSs on channels 1 and 11, fifteen MNs in the overlap all
/// starting on AP1, MN i sending from second i, BS covering everything.
pub fn build_standard_scenario(case: CasePreset, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.sim.seed = seed;
    cfg.detection.mode = case.detection_mode();
    cfg.detection.qlength = case.qlength();
    cfg.wman.enabled = case.wman_enabled();
    cfg.topology.aps = vec![
        ApSpec {
            pos: Position::new(0.0, 0.0),
            channel: 1,
            range_m: 50.0,
        },
        ApSpec {
            pos: Position::new(60.0, 0.0),
            channel: 11,
            range_m: 50.0,
        },
    ];
    cfg.topology.bs = Some(BsSpec {
        pos: Position::new(30.0, 40.0),
        range_m: 1000.0,
    });
    let xs = [24.0, 27.0, 30.0, 33.0, 36.0];
    let ys = [-6.0, 0.0, 6.0];
    cfg.topology.mns = (0..15)
        .map(|i| MnSpec {
            pos: Position::new(xs[i % 5], ys[i / 5]),
            ap: 1,
            start: Duration::from_secs(i as u64 + 1),
        })
        .collect();
    cfg
}

fn ms(d: Duration) -> String {
    let us = d.as_micros();
    if us % 1000 == 0 {
        (us / 1000).to_string()
    } else {
        format!("{}", us as f64 / 1000.0)
    }
}

fn secs(d: Duration) -> String {
    let us = d.as_micros();
    if us % 1_000_000 == 0 {
        (us / 1_000_000).to_string()
    } else {
        format!("{}", us as f64 / 1e6)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses and validates; omitted keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let entries = tokenize(text)?;
        let mut cfg = ScenarioConfig::default();
        let mut aps: BTreeMap<u16, ApSpec> = BTreeMap::new();
        let mut mns: BTreeMap<u16, MnSpec> = BTreeMap::new();
        let mut scan_return: Option<Duration> = None;
        let mut wman_return: Option<Duration> = None;
        for (key, (value, line)) in &entries {
            let v = Value { key, raw: value, line: *line };
            match key.as_str() {
                "sim.horizon_s" => cfg.sim.horizon = v.secs()?,
                "sim.seed" => cfg.sim.seed = v.parse()?,
                "sim.scheme" => cfg.sim.scheme = v.boolean()?,
                "mac.effective_capacity_bps" => cfg.mac.effective_capacity_bps = v.parse()?,
                "mac.overhead_us" => cfg.mac.overhead = v.micros()?,
                "mac.access_jitter_us" => cfg.mac.access_jitter = v.micros()?,
                "mac.queue_capacity" => cfg.mac.queue_capacity = v.parse()?,
                "mac.load_window_ms" => cfg.mac.load_window = v.millis()?,
                "mac.control_bytes" => cfg.mac.control_bytes = v.parse()?,
                "radio.tx_power_dbm" => cfg.radio.tx_power_dbm = v.parse()?,
                "radio.ref_loss_db" => cfg.radio.ref_loss_db = v.parse()?,
                "radio.pathloss_exponent" => cfg.radio.pathloss_exponent = v.parse()?,
                "radio.noise_floor_dbm" => cfg.radio.noise_floor_dbm = v.parse()?,
                "links.backbone_bps" => cfg.links.backbone_bps = v.parse()?,
                "links.backbone_delay_ms" => cfg.links.backbone_delay = v.millis()?,
                "links.bs_bps" => cfg.links.bs_bps = v.parse()?,
                "links.bs_delay_ms" => cfg.links.bs_delay = v.millis()?,
                "traffic.packet_size_bytes" => cfg.traffic.packet_size_bytes = v.parse()?,
                "traffic.interval_ms" => cfg.traffic.interval = v.millis()?,
                "traffic.phase_jitter" => cfg.traffic.phase_jitter = v.boolean()?,
                "detection.mode" => {
                    cfg.detection.mode = match v.raw.as_str() {
                        "drop_rate" => DetectionMode::DropRate,
                        "ewma" => DetectionMode::Ewma,
                        _ => return Err(v.err("expected drop_rate or ewma")),
                    }
                }
                "detection.alpha" => cfg.detection.alpha = v.parse()?,
                "detection.qlength" => cfg.detection.qlength = v.parse()?,
                "detection.drop_threshold" => cfg.detection.drop_threshold = v.parse()?,
                "detection.sample_period_ms" => cfg.detection.sample_period = v.millis()?,
                "detection.window_ms" => cfg.detection.window = v.millis()?,
                "detection.wman_limit" => cfg.detection.wman_limit = Some(v.parse()?),
                "scan.period_ms" => cfg.scan.period = v.millis()?,
                "scan.dwell_ms" => cfg.scan.dwell = v.millis()?,
                "scan.switch_ms" => cfg.scan.switch = v.millis()?,
                "scan.collect_ms" => cfg.scan.collect = v.millis()?,
                "scan.return_period_s" => scan_return = Some(v.secs()?),
                "handoff.delta_bps" => cfg.handoff.delta_bps = v.parse()?,
                "handoff.t_ignore_ms" => cfg.handoff.t_ignore = v.millis()?,
                "handoff.t_repeat_ms" => cfg.handoff.t_repeat = v.millis()?,
                "handoff.n_repeat" => cfg.handoff.n_repeat = v.parse()?,
                "handoff.load_response_timeout_ms" => cfg.handoff.load_response_timeout = v.millis()?,
                "handoff.retry_backoff_ms" => cfg.handoff.retry_backoff = v.millis()?,
                "wman.enabled" => cfg.wman.enabled = v.boolean()?,
                "wman.entry_latency_ms" => cfg.wman.entry_latency = v.millis()?,
                "wman.scan_latency_ms" => cfg.wman.scan_latency = v.millis()?,
                "wman.return_scan_period_s" => wman_return = Some(v.secs()?),
                "wman.capacity_bps" => cfg.wman.capacity_bps = v.parse()?,
                "topology.bs" => {
                    let f = v.fields::<3>()?;
                    cfg.topology.bs = Some(BsSpec {
                        pos: Position::new(f[0], f[1]),
                        range_m: f[2],
                    });
                }
                k => {
                    if let Some(idx) = k.strip_prefix("topology.ap.") {
                        let f = v.fields::<4>()?;
                        aps.insert(
                            index(k, idx)?,
                            ApSpec {
                                pos: Position::new(f[0], f[1]),
                                channel: channel_field(&v, f[2])?,
                                range_m: f[3],
                            },
                        );
                    } else if let Some(idx) = k.strip_prefix("topology.mn.") {
                        let f = v.fields::<4>()?;
                        if f[2] < 1.0 || f[2].fract() != 0.0 {
                            return Err(v.err("AP index must be a positive integer"));
                        }
                        if f[3] < 0.0 {
                            return Err(invalid(k, "start time must not be negative"));
                        }
                        mns.insert(
                            index(k, idx)?,
                            MnSpec {
                                pos: Position::new(f[0], f[1]),
                                ap: f[2] as u16,
                                start: Duration::from_micros((f[3] * 1e6).round() as u64),
                            },
                        );
                    } else {
                        return Err(invalid(k, "unknown key"));
                    }
                }
            }
        }
        match (scan_return, wman_return) {
            (Some(a), Some(b)) if a != b => {
                return Err(invalid(
                    "wman.return_scan_period_s",
                    "conflicts with scan.return_period_s",
                ))
            }
            (Some(p), _) | (None, Some(p)) => cfg.wman.return_scan_period = p,
            (None, None) => {}
        }
        if !aps.is_empty() {
            cfg.topology.aps = dense("topology.ap", aps)?;
        }
        if !mns.is_empty() {
            cfg.topology.mns = dense("topology.mn", mns)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, d: Duration| {
            if d.is_zero() {
                Err(invalid(key, "must be > 0"))
            } else {
                Ok(())
            }
        };
        positive("sim.horizon_s", self.sim.horizon)?;
        positive("mac.load_window_ms", self.mac.load_window)?;
        positive("links.backbone_delay_ms", self.links.backbone_delay)?;
        positive("links.bs_delay_ms", self.links.bs_delay)?;
        positive("traffic.interval_ms", self.traffic.interval)?;
        if self.mac.access_jitter >= self.traffic.interval {
            return Err(invalid("mac.access_jitter_us", "must be shorter than traffic.interval_ms"));
        }
        positive("detection.sample_period_ms", self.detection.sample_period)?;
        positive("detection.window_ms", self.detection.window)?;
        positive("scan.period_ms", self.scan.period)?;
        positive("scan.dwell_ms", self.scan.dwell)?;
        positive("scan.switch_ms", self.scan.switch)?;
        positive("scan.collect_ms", self.scan.collect)?;
        positive("handoff.t_ignore_ms", self.handoff.t_ignore)?;
        positive("handoff.t_repeat_ms", self.handoff.t_repeat)?;
        positive("handoff.load_response_timeout_ms", self.handoff.load_response_timeout)?;
        positive("handoff.retry_backoff_ms", self.handoff.retry_backoff)?;
        positive("wman.entry_latency_ms", self.wman.entry_latency)?;
        positive("wman.scan_latency_ms", self.wman.scan_latency)?;
        positive("wman.return_scan_period_s", self.wman.return_scan_period)?;

        for (key, rate) in [
            ("mac.effective_capacity_bps", self.mac.effective_capacity_bps),
            ("links.backbone_bps", self.links.backbone_bps),
            ("links.bs_bps", self.links.bs_bps),
            ("wman.capacity_bps", self.wman.capacity_bps),
        ] {
            if rate == 0 {
                return Err(invalid(key, "must be > 0"));
            }
        }
        if !(self.handoff.delta_bps > 0.0) {
            return Err(invalid("handoff.delta_bps", "must be > 0"));
        }
        if self.mac.queue_capacity == 0 {
            return Err(invalid("mac.queue_capacity", "must be > 0"));
        }
        if self.mac.control_bytes == 0 {
            return Err(invalid("mac.control_bytes", "must be > 0"));
        }
        if self.traffic.packet_size_bytes == 0 {
            return Err(invalid("traffic.packet_size_bytes", "must be > 0"));
        }
        if !(self.detection.alpha > 0.0 && self.detection.alpha <= 1.0) {
            return Err(invalid("detection.alpha", "must be in (0, 1]"));
        }
        if !(self.detection.qlength >= 0.0) {
            return Err(invalid("detection.qlength", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.detection.drop_threshold) {
            return Err(invalid("detection.drop_threshold", "must be in [0, 1)"));
        }
        if self.handoff.n_repeat == 0 {
            return Err(invalid("handoff.n_repeat", "must be >= 1"));
        }
        if self.scan.dwell + self.scan.switch * 2 >= self.scan.period {
            return Err(invalid("scan.dwell_ms", "dwell plus two switches must fit inside scan.period_ms"));
        }
        if !(self.radio.pathloss_exponent > 0.0) {
            return Err(invalid("radio.pathloss_exponent", "must be > 0"));
        }

        let topo = &self.topology;
        if topo.aps.is_empty() {
            return Err(invalid("topology.ap", "at least one AP is required"));
        }
        for (i, ap) in topo.aps.iter().enumerate() {
            let key = format!("topology.ap.{}", i + 1);
            ChannelId::new(ap.channel).map_err(|e| invalid(&key, e.to_string()))?;
            if !(ap.range_m > 0.0) {
                return Err(invalid(&key, "range must be > 0"));
            }
            for (j, other) in topo.aps.iter().enumerate().skip(i + 1) {
                let other_key = format!("topology.ap.{}", j + 1);
                if ap.channel == other.channel {
                    return Err(invalid(&other_key, format!("channel {} already used by {key}", ap.channel)));
                }
                let covers_overlap = ap.pos.distance(&other.pos) < ap.range_m + other.range_m;
                if covers_overlap && ap.channel.abs_diff(other.channel) < 5 {
                    return Err(invalid(
                        &other_key,
                        format!("coverage overlaps {key} but channels {} and {} overlap", ap.channel, other.channel),
                    ));
                }
            }
        }
        if let Some(bs) = &topo.bs {
            if !(bs.range_m > 0.0) {
                return Err(invalid("topology.bs", "range must be > 0"));
            }
        }
        if self.wman.enabled && topo.bs.is_none() {
            return Err(invalid("wman.enabled", "requires topology.bs"));
        }
        for (i, mn) in topo.mns.iter().enumerate() {
            let key = format!("topology.mn.{}", i + 1);
            let Some(ap) = topo.aps.get(mn.ap as usize - 1) else {
                return Err(invalid(&key, format!("no AP {}", mn.ap)));
            };
            if mn.pos.distance(&ap.pos) > ap.range_m {
                return Err(invalid(&key, format!("outside the coverage of AP{}", mn.ap)));
            }
            if mn.start >= self.sim.horizon {
                return Err(invalid(&key, "traffic starts after the horizon"));
            }
        }
        Ok(())
    }

    /// Serializes to the text grammar; `parse(to_text())` is the identity.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = match self.detection.mode {
            DetectionMode::DropRate => "drop_rate",
            DetectionMode::Ewma => "ewma",
        };
        let _ = writeln!(s, "[sim]");
        let _ = writeln!(s, "horizon_s = {}", secs(self.sim.horizon));
        let _ = writeln!(s, "seed = {}", self.sim.seed);
        let _ = writeln!(s, "scheme = {}", self.sim.scheme);
        let _ = writeln!(s, "\n[mac]");
        let _ = writeln!(s, "effective_capacity_bps = {}", self.mac.effective_capacity_bps);
        let _ = writeln!(s, "overhead_us = {}", self.mac.overhead.as_micros());
        let _ = writeln!(s, "access_jitter_us = {}", self.mac.access_jitter.as_micros());
        let _ = writeln!(s, "queue_capacity = {}", self.mac.queue_capacity);
        let _ = writeln!(s, "load_window_ms = {}", ms(self.mac.load_window));
        let _ = writeln!(s, "control_bytes = {}", self.mac.control_bytes);
        let _ = writeln!(s, "\n[radio]");
        let _ = writeln!(s, "tx_power_dbm = {}", num(self.radio.tx_power_dbm));
        let _ = writeln!(s, "ref_loss_db = {}", num(self.radio.ref_loss_db));
        let _ = writeln!(s, "pathloss_exponent = {}", num(self.radio.pathloss_exponent));
        let _ = writeln!(s, "noise_floor_dbm = {}", num(self.radio.noise_floor_dbm));
        let _ = writeln!(s, "\n[links]");
        let _ = writeln!(s, "backbone_bps = {}", self.links.backbone_bps);
        let _ = writeln!(s, "backbone_delay_ms = {}", ms(self.links.backbone_delay));
        let _ = writeln!(s, "bs_bps = {}", self.links.bs_bps);
        let _ = writeln!(s, "bs_delay_ms = {}", ms(self.links.bs_delay));
        let _ = writeln!(s, "\n[traffic]");
        let _ = writeln!(s, "packet_size_bytes = {}", self.traffic.packet_size_bytes);
        let _ = writeln!(s, "interval_ms = {}", ms(self.traffic.interval));
        let _ = writeln!(s, "phase_jitter = {}", self.traffic.phase_jitter);
        let _ = writeln!(s, "\n[detection]");
        let _ = writeln!(s, "mode = {mode}");
        let _ = writeln!(s, "alpha = {}", num(self.detection.alpha));
        let _ = writeln!(s, "qlength = {}", num(self.detection.qlength));
        let _ = writeln!(s, "drop_threshold = {}", num(self.detection.drop_threshold));
        let _ = writeln!(s, "sample_period_ms = {}", ms(self.detection.sample_period));
        let _ = writeln!(s, "window_ms = {}", ms(self.detection.window));
        if let Some(l) = self.detection.wman_limit {
            let _ = writeln!(s, "wman_limit = {}", num(l));
        }
        let _ = writeln!(s, "\n[scan]");
        let _ = writeln!(s, "period_ms = {}", ms(self.scan.period));
        let _ = writeln!(s, "dwell_ms = {}", ms(self.scan.dwell));
        let _ = writeln!(s, "switch_ms = {}", ms(self.scan.switch));
        let _ = writeln!(s, "collect_ms = {}", ms(self.scan.collect));
        let _ = writeln!(s, "\n[handoff]");
        let _ = writeln!(s, "delta_bps = {}", num(self.handoff.delta_bps));
        let _ = writeln!(s, "t_ignore_ms = {}", ms(self.handoff.t_ignore));
        let _ = writeln!(s, "t_repeat_ms = {}", ms(self.handoff.t_repeat));
        let _ = writeln!(s, "n_repeat = {}", self.handoff.n_repeat);
        let _ = writeln!(s, "load_response_timeout_ms = {}", ms(self.handoff.load_response_timeout));
        let _ = writeln!(s, "retry_backoff_ms = {}", ms(self.handoff.retry_backoff));
        let _ = writeln!(s, "\n[wman]");
        let _ = writeln!(s, "enabled = {}", self.wman.enabled);
        let _ = writeln!(s, "entry_latency_ms = {}", ms(self.wman.entry_latency));
        let _ = writeln!(s, "scan_latency_ms = {}", ms(self.wman.scan_latency));
        let _ = writeln!(s, "return_scan_period_s = {}", secs(self.wman.return_scan_period));
        let _ = writeln!(s, "capacity_bps = {}", self.wman.capacity_bps);
        let _ = writeln!(s, "\n[topology]");
        let _ = writeln!(s, "# ap.N = x y channel range_m");
        for (i, ap) in self.topology.aps.iter().enumerate() {
            let _ = writeln!(s, "ap.{} = {} {} {} {}", i + 1, num(ap.pos.x), num(ap.pos.y), ap.channel, num(ap.range_m));
        }
        if let Some(bs) = &self.topology.bs {
            let _ = writeln!(s, "# bs = x y range_m");
            let _ = writeln!(s, "bs = {} {} {}", num(bs.pos.x), num(bs.pos.y), num(bs.range_m));
        }
        let _ = writeln!(s, "# mn.N = x y ap start_s");
        for (i, mn) in self.topology.mns.iter().enumerate() {
            let _ = writeln!(s, "mn.{} = {} {} {} {}", i + 1, num(mn.pos.x), num(mn.pos.y), mn.ap, secs(mn.start));
        }
        s
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<String, (String, usize)>, ConfigError> {
    let mut out = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
                .ok_or_else(|| ConfigError::Parse {
                    line: line_no,
                    msg: format!("malformed section header {line:?}"),
                })?;
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            msg: format!("expected key = value, got {line:?}"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                msg: "empty key or value".into(),
            });
        }
        let sec = section.as_deref().ok_or_else(|| ConfigError::Parse {
            line: line_no,
            msg: "key outside of any [section]".into(),
        })?;
        let full = format!("{sec}.{k}");
        if out.insert(full.clone(), (v.to_string(), line_no)).is_some() {
            return Err(ConfigError::Parse {
                line: line_no,
                msg: format!("duplicate key {full}"),
            });
        }
    }
    Ok(out)
}

struct Value<'a> {
    key: &'a str,
    raw: &'a String,
    line: usize,
}

impl Value<'_> {
    fn err(&self, msg: &str) -> ConfigError {
        ConfigError::Parse {
            line: self.line,
            msg: format!("{}: {msg} (got {:?})", self.key, self.raw),
        }
    }

    fn parse<T: FromStr>(&self) -> Result<T, ConfigError> {
        self.raw.parse().map_err(|_| self.err("invalid value"))
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        match self.raw.as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(self.err("expected a boolean")),
        }
    }

    fn scaled(&self, us_per_unit: f64) -> Result<Duration, ConfigError> {
        let v: f64 = self.parse()?;
        if !v.is_finite() || v < 0.0 {
            return Err(invalid(self.key, "duration must be a non-negative number"));
        }
        Ok(Duration::from_micros((v * us_per_unit).round() as u64))
    }

    fn micros(&self) -> Result<Duration, ConfigError> {
        self.scaled(1.0)
    }

    fn millis(&self) -> Result<Duration, ConfigError> {
        self.scaled(1e3)
    }

    fn secs(&self) -> Result<Duration, ConfigError> {
        self.scaled(1e6)
    }

    fn fields<const N: usize>(&self) -> Result<[f64; N], ConfigError> {
        let parts: Vec<&str> = self.raw.split_whitespace().collect();
        if parts.len() != N {
            return Err(self.err(&format!("expected {N} fields")));
        }
        let mut out = [0.0f64; N];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = p.parse().map_err(|_| self.err("non-numeric field"))?;
            if !o.is_finite() {
                return Err(self.err("non-finite field"));
            }
        }
        Ok(out)
    }
}

fn channel_field(v: &Value<'_>, f: f64) -> Result<u8, ConfigError> {
    if f.fract() != 0.0 || !(0.0..=255.0).contains(&f) {
        return Err(v.err("channel must be an integer"));
    }
    Ok(f as u8)
}

fn index(key: &str, idx: &str) -> Result<u16, ConfigError> {
    idx.parse::<u16>()
        .ok()
        .filter(|&i| i >= 1)
        .ok_or_else(|| invalid(key, "index must be a positive integer"))
}

fn dense<T>(prefix: &str, map: BTreeMap<u16, T>) -> Result<Vec<T>, ConfigError> {
    let mut out = Vec::with_capacity(map.len());
    for (expect, (idx, v)) in (1u16..).zip(map) {
        if idx != expect {
            return Err(invalid(&format!("{prefix}.{expect}"), "indices must be consecutive from 1"));
        }
        out.push(v);
    }
    Ok(out)
}
