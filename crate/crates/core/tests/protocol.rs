use std::time::Duration;

use handoff_sim::metrics::{HandoffKind, MoveRequestOutcome};
use handoff_sim::network::NodeId;
use handoff_sim::{build_standard_scenario, world, CasePreset};

#[test]
fn baseline_never_hands_off() {
    let mut cfg = build_standard_scenario(CasePreset::III, 1);
    cfg.sim.scheme = false;
    let r = world::run(&cfg).unwrap();
    assert!(r.handoffs.is_empty());
    assert!(r.move_requests.is_empty());
}

#[test]
fn ess_only_cases_stay_horizontal() {
    for case in [CasePreset::I, CasePreset::II, CasePreset::III] {
        let r = world::run(&build_standard_scenario(case, 1)).unwrap();
        assert!(!r.handoffs.is_empty(), "case {case}");
        assert!(r.handoffs.iter().all(|h| h.kind == HandoffKind::Horizontal), "case {case}");
        assert!(r.handoffs.iter().all(|h| h.from == NodeId::ap(1) && h.to == NodeId::ap(2)), "case {case}");
    }
}

#[test]
fn overlay_takes_excess_stations() {
    let r = world::run(&build_standard_scenario(CasePreset::VI, 1)).unwrap();
    let up = r.handoffs.iter().filter(|h| h.kind == HandoffKind::VerticalUp).count();
    assert!(up >= 1);
    assert!(r.handoffs.iter().filter(|h| h.kind == HandoffKind::VerticalUp).all(|h| h.to == NodeId::BS));
}

#[test]
fn processed_requests_respect_ignore_window() {
    for case in CasePreset::ALL {
        let cfg = build_standard_scenario(case, 5);
        let t_ignore = cfg.handoff.t_ignore;
        let r = world::run(&cfg).unwrap();
        for ap in [NodeId::ap(1), NodeId::ap(2)] {
            let times: Vec<_> = r
                .move_requests
                .iter()
                .filter(|m| m.ap == ap && m.outcome == MoveRequestOutcome::Processed)
                .map(|m| m.at)
                .collect();
            for w in times.windows(2) {
                assert!(w[1] - w[0] >= t_ignore, "case {case} {ap}: {:?}", w);
            }
        }
    }
}

#[test]
fn handoff_completes_after_decision() {
    let r = world::run(&build_standard_scenario(CasePreset::IV, 1)).unwrap();
    for h in &r.handoffs {
        assert!(h.completed_at >= h.decided_at);
        assert!(h.gap < Duration::from_millis(50));
    }
}
