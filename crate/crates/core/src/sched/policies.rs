use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BroadcastRequest, DeliveryPlan, Scheduler, SpecError};
use crate::topology::{KdLayout, Topology};
use crate::types::{NodeId, Time};

/// Lock-step rounds one tick apart: every broadcast is received by all
/// neighbours and acked in the round after it was issued.
#[derive(Debug, Clone, Default)]
pub struct SyncScheduler;

impl Scheduler for SyncScheduler {
    fn name(&self) -> String {
        "sync".into()
    }

    fn plan(&mut self, req: &BroadcastRequest<'_>, _: &Topology, _: Time) -> DeliveryPlan {
        DeliveryPlan::at(req, req.issue_time, req.issue_time + 1)
    }
}

/// Lock-step rounds spaced exactly `f_ack` apart.
#[derive(Debug, Clone, Default)]
pub struct MaxDelayScheduler;

impl Scheduler for MaxDelayScheduler {
    fn name(&self) -> String {
        "maxdelay".into()
    }

    fn plan(&mut self, req: &BroadcastRequest<'_>, _: &Topology, f_ack: Time) -> DeliveryPlan {
        DeliveryPlan::at(req, req.issue_time, req.issue_time + f_ack)
    }
}

/// Seeded random timing: each receive delay is uniform in `[1, f_ack]` and
/// the ack falls uniformly between the last receive and `issue + f_ack`.
#[derive(Debug, Clone)]
pub struct RandomScheduler {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomScheduler {
    pub fn new(seed: u64) -> Self {
        RandomScheduler {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for RandomScheduler {
    fn name(&self) -> String {
        format!("random:seed={}", self.seed)
    }

    fn plan(&mut self, req: &BroadcastRequest<'_>, _: &Topology, f_ack: Time) -> DeliveryPlan {
        let issue = req.issue_time;
        let receives: Vec<(NodeId, Time)> = req
            .receivers
            .iter()
            .map(|&v| (v, issue + self.rng.gen_range(1..=f_ack)))
            .collect();
        let last = receives.iter().map(|&(_, t)| t).max().unwrap_or(issue + 1);
        let ack = self.rng.gen_range(last..=issue + f_ack);
        DeliveryPlan {
            release: issue,
            receives,
            ack,
        }
    }
}

/// Synchronous, except that broadcasts by `held` issued before round `t`
/// are withheld and delivered (and acked) in round `t + 1`.
#[derive(Debug, Clone)]
struct Withholding {
    held: NodeId,
    t: Time,
}

impl Withholding {
    fn plan(&self, req: &BroadcastRequest<'_>) -> DeliveryPlan {
        if req.sender == self.held && req.issue_time < self.t {
            DeliveryPlan::at(req, self.t, self.t + 1)
        } else {
            DeliveryPlan::at(req, req.issue_time, req.issue_time + 1)
        }
    }
}

/// For `K_D`: synchronous, but nothing the `L_{D-1}` endpoint broadcasts
/// reaches anyone during the first `t` rounds.
#[derive(Debug, Clone)]
pub struct SemiSyncScheduler(Withholding);

impl SemiSyncScheduler {
    pub fn for_topology(topology: &Topology, t: Time) -> Result<Self, SpecError> {
        let layout = KdLayout::from_topology(topology)
            .ok_or_else(|| SpecError::Config(format!("semisync needs a K_D topology, got {}", topology.name())))?;
        Ok(SemiSyncScheduler(Withholding {
            held: layout.endpoint(),
            t,
        }))
    }

    pub fn endpoint(&self) -> NodeId {
        self.0.held
    }

    pub fn t(&self) -> Time {
        self.0.t
    }
}

impl Scheduler for SemiSyncScheduler {
    fn name(&self) -> String {
        format!("semisync:t={}", self.0.t)
    }

    fn plan(&mut self, req: &BroadcastRequest<'_>, _: &Topology, _: Time) -> DeliveryPlan {
        self.0.plan(req)
    }
}

/// For network A: synchronous, but nothing the bridge `q` broadcasts
/// reaches anyone during the first `t` rounds.
#[derive(Debug, Clone)]
pub struct BridgeScheduler(Withholding);

impl BridgeScheduler {
    pub fn for_topology(topology: &Topology, t: Time) -> Result<Self, SpecError> {
        let q = topology
            .find_label("q")
            .ok_or_else(|| SpecError::Config(format!("bridge needs a gadget network A, got {}", topology.name())))?;
        Ok(BridgeScheduler(Withholding { held: q, t }))
    }

    pub fn bridge(&self) -> NodeId {
        self.0.held
    }

    pub fn t(&self) -> Time {
        self.0.t
    }
}

impl Scheduler for BridgeScheduler {
    fn name(&self) -> String {
        format!("bridge:t={}", self.0.t)
    }

    fn plan(&mut self, req: &BroadcastRequest<'_>, _: &Topology, _: Time) -> DeliveryPlan {
        self.0.plan(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_clique, build_kd, build_network_a};

    fn req(receivers: &[NodeId], sender: u32, issue: Time) -> BroadcastRequest<'_> {
        BroadcastRequest {
            sender: NodeId(sender),
            seq: 0,
            issue_time: issue,
            receivers,
        }
    }

    #[test]
    fn random_plans_stay_inside_the_window() {
        let topo = build_clique(4).unwrap();
        let rx = [NodeId(1), NodeId(2), NodeId(3)];
        let mut s = RandomScheduler::new(7);
        for i in 0..10_000u64 {
            let r = req(&rx, 0, i);
            let p = s.plan(&r, &topo, 6);
            assert!(p.ack <= i + 6);
            for &(_, t) in &p.receives {
                assert!(t > i && t <= p.ack);
            }
        }
    }

    #[test]
    fn random_is_reproducible_per_seed() {
        let topo = build_clique(3).unwrap();
        let rx = [NodeId(1), NodeId(2)];
        let mut a = RandomScheduler::new(3);
        let mut b = RandomScheduler::new(3);
        for i in 0..100 {
            assert_eq!(a.plan(&req(&rx, 0, i), &topo, 9), b.plan(&req(&rx, 0, i), &topo, 9));
        }
    }

    #[test]
    fn semisync_withholds_only_the_endpoint_before_t() {
        let topo = build_kd(4).unwrap();
        let mut s = SemiSyncScheduler::for_topology(&topo, 5).unwrap();
        let end = s.endpoint();
        let rx = [NodeId(0)];
        let early = s.plan(&req(&rx, end.0, 2), &topo, 1);
        assert_eq!((early.release, early.ack), (5, 6));
        let late = s.plan(&req(&rx, end.0, 5), &topo, 1);
        assert_eq!(late.ack, 6);
        let other = s.plan(&req(&rx, 1, 2), &topo, 1);
        assert_eq!(other.ack, 3);
    }

    #[test]
    fn withholding_schedulers_reject_wrong_families() {
        let clique = build_clique(4).unwrap();
        assert!(SemiSyncScheduler::for_topology(&clique, 3).is_err());
        assert!(BridgeScheduler::for_topology(&clique, 3).is_err());
        let (a, _) = build_network_a(4, 4).unwrap();
        let b = BridgeScheduler::for_topology(&a, 3).unwrap();
        assert_eq!(a.label(b.bridge()), "q");
    }
}
