//! Built-in scenarios.

use macsim_core::SchedulerSpec;

use crate::scenario::{Experiment, ExploreSpec, RunSpec, Scenario, SeedRange};
use crate::spec::{ProtocolSpec, TopologySpec, ValueSpec};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> Scenario,
}

impl Preset {
    pub fn scenario(&self) -> Scenario {
        (self.build)()
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "thm2-demo",
        summary: "anonymous flooding on gadget network A (bridge withheld) vs network B: indistinguishable copies, agreement violated",
        build: thm2,
    },
    Preset {
        name: "thm3-demo",
        summary: "id flooding without n on K_D (endpoint withheld) vs a lone line: agreement violated",
        build: thm3,
    },
    Preset {
        name: "thm4-demo",
        summary: "wPAXOS on lines D in {4,6,8} under max delay: causal-history and decision-time lower bounds",
        build: thm4,
    },
    Preset {
        name: "twophase-suite",
        summary: "two-phase consensus on cliques n=2..8 (random) and n in {2,5,16} x f_ack in {1,5,10} (max delay)",
        build: twophase_suite,
    },
    Preset {
        name: "twophase-exhaustive",
        summary: "every valid-step interleaving of two-phase consensus on a 3-clique, all inputs, no crashes",
        build: twophase_exhaustive,
    },
    Preset {
        name: "wpaxos-suite",
        summary: "500 random-scheduler wPAXOS runs over clique n=5, line D=6, K_4 and random connected n=12",
        build: wpaxos_suite,
    },
    Preset {
        name: "wpaxos-scaling",
        summary: "wPAXOS decision times on lines D in {2,4,8}, max delay, f_ack=4, 50 seeds",
        build: wpaxos_scaling,
    },
    Preset {
        name: "flp-explore",
        summary: "valid-step exploration with one crash on a 3-clique: bivalent-prefix statistics",
        build: flp_explore,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

fn scenario(name: &str, description: &str, seeds: SeedRange, experiment: Experiment) -> Scenario {
    Scenario {
        name: name.into(),
        description: description.into(),
        seeds,
        experiment,
    }
}

fn thm2() -> Scenario {
    scenario(
        "thm2-demo",
        "Anonymous min-flooding is correct on network B under the synchronous scheduler. On network A, \
         withholding the bridge keeps each gadget copy in lock-step with B for t rounds, so one copy \
         decides 0 and the other 1.",
        SeedRange::default(),
        Experiment::GadgetPartition { diameter: 6, n: 6 },
    )
}

fn thm3() -> Scenario {
    scenario(
        "thm3-demo",
        "Id-based flooding that does not know n is correct on a lone line. In K_D, withholding the \
         bridging endpoint for t rounds lets each line decide on its own.",
        SeedRange::default(),
        Experiment::KdPartition { diameter: 4 },
    )
}

fn thm4() -> Scenario {
    scenario(
        "thm4-demo",
        "Under maximum delay, information crosses one hop per f_ack, so no endpoint of a line hears \
         from the far half before floor(D/2)*f_ack.",
        SeedRange::default(),
        Experiment::CausalBound {
            diameters: vec![4, 6, 8],
            f_ack: 4,
        },
    )
}

fn twophase_suite() -> Scenario {
    let mut runs: Vec<RunSpec> = (2..=8)
        .map(|n| {
            RunSpec::new(
                TopologySpec::Clique { n },
                SchedulerSpec::Random { seed: 0 },
                ProtocolSpec::twophase(),
            )
            .values(ValueSpec::Random)
            .f_ack(4)
        })
        .collect();
    for n in [2, 5, 16] {
        for f in [1, 5, 10] {
            let mut cell = RunSpec::new(
                TopologySpec::Clique { n },
                SchedulerSpec::MaxDelay,
                ProtocolSpec::twophase(),
            )
            .values(ValueSpec::Random)
            .f_ack(f);
            cell.deadline = Some(2 * f);
            runs.push(cell);
        }
    }
    scenario(
        "twophase-suite",
        "Two-phase consensus: safety and liveness under random schedules, and the 2*f_ack decision \
         time under maximum delay.",
        SeedRange::new(0, 100),
        Experiment::Simulate { runs },
    )
}

fn twophase_exhaustive() -> Scenario {
    scenario(
        "twophase-exhaustive",
        "All valid-step executions of two-phase consensus on a 3-clique for every input vector.",
        SeedRange::default(),
        Experiment::Explore(ExploreSpec {
            n: 3,
            crash_budget: 0,
            depth: 64,
            values: None,
            protocol: ProtocolSpec::twophase(),
        }),
    )
}

pub fn wpaxos_matrix() -> Vec<TopologySpec> {
    vec![
        TopologySpec::Clique { n: 5 },
        TopologySpec::Line { d: 6 },
        TopologySpec::Kd { d: 4 },
        TopologySpec::Random {
            n: 12,
            p: 0.15,
            seed: None,
        },
    ]
}

fn wpaxos_suite() -> Scenario {
    let runs = wpaxos_matrix()
        .into_iter()
        .map(|t| {
            RunSpec::new(t, SchedulerSpec::Random { seed: 0 }, ProtocolSpec::wpaxos())
                .values(ValueSpec::Random)
                .f_ack(3)
                .quiescent()
        })
        .collect();
    scenario(
        "wpaxos-suite",
        "wPAXOS under random schedules, run to quiescence: count audit, agreement, validity, decide \
         flooding, acceptor monotonicity, tree shape and tag bound.",
        SeedRange::new(0, 125),
        Experiment::Simulate { runs },
    )
}

fn wpaxos_scaling() -> Scenario {
    let runs = [2, 4, 8]
        .into_iter()
        .map(|d| {
            RunSpec::new(
                TopologySpec::Line { d },
                SchedulerSpec::MaxDelay,
                ProtocolSpec::wpaxos(),
            )
            .values(ValueSpec::Random)
            .f_ack(4)
        })
        .collect();
    scenario(
        "wpaxos-scaling",
        "wPAXOS decision time against diameter on lines under maximum delay.",
        SeedRange::new(0, 50),
        Experiment::Simulate { runs },
    )
}

fn flp_explore() -> Scenario {
    scenario(
        "flp-explore",
        "Valid-step exploration of two-phase consensus with one crash allowed: counts bivalent, \
         univalent and stuck states. Illustrates the exploration machinery; it proves nothing by itself.",
        SeedRange::default(),
        Experiment::Explore(ExploreSpec {
            n: 3,
            crash_budget: 1,
            depth: 64,
            values: None,
            protocol: ProtocolSpec::twophase(),
        }),
    )
}
