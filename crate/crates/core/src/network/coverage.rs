//! Static positions and a log-distance signal-quality proxy.

use std::collections::BTreeMap;

use super::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalQuality {
    /// Received power above the noise floor, in dB.
    Db(f64),
    OutOfRange,
}

impl SignalQuality {
    pub fn db(self) -> Option<f64> {
        match self {
            SignalQuality::Db(v) => Some(v),
            SignalQuality::OutOfRange => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub tx_power_dbm: f64,
    /// Path loss at the 1 m reference distance.
    pub ref_loss_db: f64,
    pub pathloss_exponent: f64,
    pub noise_floor_dbm: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            tx_power_dbm: 20.0,
            ref_loss_db: 40.0,
            pathloss_exponent: 3.0,
            noise_floor_dbm: -95.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CoverageModel {
    pub radio: RadioParams,
    positions: BTreeMap<NodeId, Position>,
    ranges: BTreeMap<NodeId, f64>,
}

impl CoverageModel {
    pub fn new(radio: RadioParams) -> Self {
        CoverageModel {
            radio,
            ..Default::default()
        }
    }

    pub fn place(&mut self, node: NodeId, pos: Position) {
        self.positions.insert(node, pos);
    }

    /// Places a fixed station (AP or BS) with its coverage radius.
    pub fn place_station(&mut self, node: NodeId, pos: Position, range_m: f64) {
        self.positions.insert(node, pos);
        self.ranges.insert(node, range_m);
    }

    pub fn position(&self, node: NodeId) -> Option<Position> {
        self.positions.get(&node).copied()
    }

    pub fn range(&self, station: NodeId) -> Option<f64> {
        self.ranges.get(&station).copied()
    }

    pub fn in_range(&self, mn: NodeId, station: NodeId) -> bool {
        self.signal_quality(mn, station).db().is_some()
    }

    pub fn signal_quality(&self, mn: NodeId, station: NodeId) -> SignalQuality {
        let (Some(a), Some(b), Some(range)) = (
            self.positions.get(&mn),
            self.positions.get(&station),
            self.ranges.get(&station),
        ) else {
            return SignalQuality::OutOfRange;
        };
        let d = a.distance(b);
        if d > *range {
            return SignalQuality::OutOfRange;
        }
        SignalQuality::Db(self.quality_at(d))
    }

    /// Log-distance quality, with distances below 1 m clamped to 1 m.
    pub fn quality_at(&self, distance_m: f64) -> f64 {
        let r = &self.radio;
        let d = distance_m.max(1.0);
        r.tx_power_dbm - r.ref_loss_db - 10.0 * r.pathloss_exponent * d.log10() - r.noise_floor_dbm
    }
}

/// Picks the strongest candidate; ties go to the lower node index.
pub fn strongest<I>(candidates: I) -> Option<NodeId>
where
    I: IntoIterator<Item = (NodeId, f64)>,
{
    candidates
        .into_iter()
        .fold(None::<(NodeId, f64)>, |best, (id, q)| match best {
            Some((bid, bq)) if bq > q || (bq == q && bid.index <= id.index) => Some((bid, bq)),
            _ => Some((id, q)),
        })
        .map(|(id, _)| id)
}
