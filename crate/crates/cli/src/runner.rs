//! Executes simulate cells: builds the network, scheduler and protocol from
//! their specs, runs one seed, and assembles the check report.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use macsim_core::checkers::{
    audit_counts, check_acceptor_monotonicity, check_agreement, check_contract, check_decide_flood, check_message_size,
    check_status_coexistence, check_tag_bound, check_termination, check_tree_after_stabilization, check_uniform_ids,
    check_validity, gst_estimate, id_field_range, max_tag, measure_times, CheckReport, CheckResult, ReportMetrics,
};
use macsim_core::naive::{AnonFlooder, IdFlooder};
use macsim_core::sched::Scheduler;
use macsim_core::topology::{build_line, build_network_b, KdLayout};
use macsim_core::twophase::TwoPhaseNode;
use macsim_core::wpaxos::{WpaxosConfig, WpaxosNode};
use macsim_core::{run_simulation, ExecutionTrace, Protocol, SchedulerSpec, SimConfig, Time, Topology, Value};
use rayon::prelude::*;
use serde::Serialize;

use crate::scenario::{CheckKind, RunSpec, Scenario};
use crate::spec::{ProtocolSpec, TopologySpec};

/// Per-message id capacity of the model.
pub const ID_CAPACITY: usize = 12;

const DEFAULT_HORIZON: Time = 10_000_000;

/// One line of the per-run table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub scenario: String,
    pub cell: usize,
    pub label: String,
    pub seed: u64,
    pub topology: String,
    pub n: usize,
    pub diameter: u32,
    pub scheduler: String,
    pub protocol: String,
    pub f_ack: Time,
    pub terminated: bool,
    pub decision_time: Option<Time>,
    pub time_over_fack: Option<f64>,
    pub time_over_d_fack: Option<f64>,
    /// Distinct decided values, e.g. `1` or `0|1`; empty if none.
    pub decisions: String,
    pub max_ids: usize,
    pub max_tag: Option<u64>,
    pub gst: Option<Time>,
    pub events: usize,
    pub failed_checks: String,
    pub verdict: String,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub row: RunRow,
    pub report: CheckReport,
    /// JSON-lines event trace, when requested.
    pub trace: Option<String>,
}

/// A finished run of any of the supported protocols.
pub enum AnyTrace {
    TwoPhase(ExecutionTrace<TwoPhaseNode>),
    Wpaxos(ExecutionTrace<WpaxosNode>),
    AnonFlood(ExecutionTrace<AnonFlooder>),
    IdFlood(ExecutionTrace<IdFlooder>),
}

macro_rules! each {
    ($self:expr, $t:ident => $body:expr) => {
        match $self {
            AnyTrace::TwoPhase($t) => $body,
            AnyTrace::Wpaxos($t) => $body,
            AnyTrace::AnonFlood($t) => $body,
            AnyTrace::IdFlood($t) => $body,
        }
    };
}

impl AnyTrace {
    pub fn decision_time(&self) -> Option<Time> {
        each!(self, t => if t.terminated { t.decision_time() } else { None })
    }

    pub fn scheduler(&self) -> &str {
        each!(self, t => &t.scheduler)
    }

    pub fn to_jsonl(&self) -> String {
        each!(self, t => t.to_jsonl())
    }

    fn events(&self) -> usize {
        each!(self, t => t.events.len())
    }

    fn decisions(&self) -> String {
        each!(self, t => distinct_decisions(&t.decided_values()))
    }

    fn terminated(&self) -> bool {
        each!(self, t => t.terminated)
    }

    fn topology(&self) -> &Topology {
        each!(self, t => &t.topology)
    }

    fn f_ack(&self) -> Time {
        each!(self, t => t.config.f_ack)
    }

    /// Table row with the run-identifying fields (`scenario`, `cell`,
    /// `label`, `seed`, `protocol`) left for the caller.
    pub fn row(&self, report: &CheckReport) -> RunRow {
        let topology = self.topology();
        RunRow {
            scenario: String::new(),
            cell: 0,
            label: String::new(),
            seed: 0,
            topology: topology.name().to_string(),
            n: topology.n(),
            diameter: topology.diameter(),
            scheduler: self.scheduler().to_string(),
            protocol: String::new(),
            f_ack: self.f_ack(),
            terminated: self.terminated(),
            decision_time: report.metrics.decision_time,
            time_over_fack: report.metrics.decision_time_over_fack,
            time_over_d_fack: report.metrics.decision_time_over_d_fack,
            decisions: self.decisions(),
            max_ids: report.metrics.max_ids_per_message,
            max_tag: report.metrics.max_tag,
            gst: report.metrics.gst,
            events: self.events(),
            failed_checks: report.failures().map(|c| c.name.as_str()).collect::<Vec<_>>().join(";"),
            verdict: if report.any_failed() { "fail" } else { "pass" }.into(),
        }
    }

    pub fn report(&self, checks: &[CheckKind], deadline: Option<Time>) -> CheckReport {
        let mut report = CheckReport::default();
        for &kind in checks {
            let generic = each!(self, t => generic_check(t, kind, deadline));
            let result = generic.unwrap_or_else(|| match (self, kind) {
                (AnyTrace::TwoPhase(t), CheckKind::UniformIds) => check_uniform_ids(t, 1),
                (AnyTrace::TwoPhase(t), CheckKind::StatusCoexistence) => check_status_coexistence(t),
                (AnyTrace::Wpaxos(t), CheckKind::Audit) => audit_counts(t).result,
                (AnyTrace::Wpaxos(t), CheckKind::DecideFlood) => check_decide_flood(t),
                (AnyTrace::Wpaxos(t), CheckKind::AcceptorMonotonicity) => check_acceptor_monotonicity(t),
                (AnyTrace::Wpaxos(t), CheckKind::Tree) => check_tree_after_stabilization(t),
                (AnyTrace::Wpaxos(t), CheckKind::TagBound) => check_tag_bound(t, (t.n() as u64).saturating_pow(3)),
                _ => CheckResult::inapplicable(check_name(kind), "not defined for this protocol"),
            });
            report.push(result);
        }
        report.metrics = each!(self, t => base_metrics(t));
        if let AnyTrace::Wpaxos(t) = self {
            report.metrics.max_tag = Some(max_tag(t));
            report.metrics.gst = gst_estimate(t);
        }
        report
    }
}

fn check_name(kind: CheckKind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn generic_check<P: Protocol>(t: &ExecutionTrace<P>, kind: CheckKind, deadline: Option<Time>) -> Option<CheckResult> {
    Some(match kind {
        CheckKind::Agreement => check_agreement(t),
        CheckKind::Validity => check_validity(t),
        CheckKind::Termination => check_termination(t, deadline),
        CheckKind::Contract => check_contract(t),
        CheckKind::MessageSize => check_message_size(t, ID_CAPACITY),
        _ => return None,
    })
}

fn base_metrics<P: Protocol>(t: &ExecutionTrace<P>) -> ReportMetrics {
    let m = measure_times(t);
    ReportMetrics {
        decision_time: m.decision_time,
        decision_time_over_fack: m.over_fack,
        decision_time_over_d_fack: m.over_d_fack,
        max_ids_per_message: id_field_range(t).map_or(0, |(_, hi)| hi),
        max_tag: None,
        gst: None,
    }
}

pub fn distinct_decisions(values: &[Option<Value>]) -> String {
    let mut seen: Vec<Value> = values.iter().flatten().copied().collect();
    seen.sort();
    seen.dedup();
    seen.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("|")
}

/// Runs `protocol` once. Flooders default to `diameter` rounds.
pub fn execute(
    protocol: &ProtocolSpec,
    topology: Arc<Topology>,
    values: Vec<Value>,
    scheduler: Box<dyn Scheduler>,
    config: SimConfig,
    n_known: Option<usize>,
    horizon: Time,
) -> Result<AnyTrace> {
    let n = topology.n();
    if values.len() != n {
        bail!("{} input values for {n} nodes", values.len());
    }
    let diameter = topology.diameter() as usize;
    Ok(match *protocol {
        ProtocolSpec::TwoPhase { .. } => AnyTrace::TwoPhase(run_simulation(
            topology,
            TwoPhaseNode::factory(values, protocol.twophase_options()),
            scheduler,
            config,
            horizon,
        )?),
        ProtocolSpec::Wpaxos { fault } => {
            let mut cfg = WpaxosConfig::new(n_known.unwrap_or(n));
            if let Some(f) = fault {
                cfg = cfg.with_fault(f);
            }
            AnyTrace::Wpaxos(run_simulation(
                topology,
                WpaxosNode::factory(values, cfg),
                scheduler,
                config,
                horizon,
            )?)
        }
        ProtocolSpec::AnonFlood { rounds } => AnyTrace::AnonFlood(run_simulation(
            topology,
            AnonFlooder::factory(values, rounds.unwrap_or(diameter)),
            scheduler,
            config.anonymous(),
            horizon,
        )?),
        ProtocolSpec::IdFlood { rounds } => AnyTrace::IdFlood(run_simulation(
            topology,
            IdFlooder::factory(values, rounds.unwrap_or(diameter)),
            scheduler,
            config,
            horizon,
        )?),
    })
}

/// Fills in `t` for a withholding scheduler that left it out: the decision
/// time of the same protocol under the synchronous scheduler on the
/// reference network (the free-standing line for `K_D`, network B for
/// network A).
fn measure_withholding_t(spec: &RunSpec, topology: &Topology, values: &[Value]) -> Result<Option<Time>> {
    let reference = match spec.scheduler {
        SchedulerSpec::SemiSync { t: None } => {
            let layout = KdLayout::from_topology(topology).context("semisync needs a K_D topology")?;
            let line = build_line(layout.first.len() - 1)?;
            let vals = layout.first.iter().map(|u| values[u.index()]).collect();
            (line, vals)
        }
        SchedulerSpec::Bridge { t: None } => {
            let TopologySpec::NetA { d, n } = spec.topology else {
                bail!("bridge without t needs a netA topology spec to derive network B; give t explicitly");
            };
            let (b, _) = build_network_b(d, n)?;
            let vals = spec.values.assign(b.n(), 0)?;
            (b, vals)
        }
        _ => return Ok(None),
    };
    let (topo, vals) = reference;
    let sync = SchedulerSpec::Sync.build(&topo, None)?;
    let trace = execute(
        &spec.protocol,
        Arc::new(topo),
        vals,
        sync,
        SimConfig::new(1),
        spec.n_known,
        spec.horizon.unwrap_or(DEFAULT_HORIZON),
    )?;
    match trace.decision_time() {
        Some(t) => Ok(Some(t)),
        None => bail!("reference run for {} did not decide; give t explicitly", spec.scheduler),
    }
}

/// Runs one cell for one seed.
pub fn simulate(scenario: &str, cell: usize, spec: &RunSpec, seed: u64, keep_trace: bool) -> Result<RunRecord> {
    let topology = Arc::new(spec.topology.build(seed)?);
    let n = topology.n();
    let values = spec.values.assign(n, seed)?;
    let sched_spec = spec.scheduler.with_seed(seed);
    let measured = measure_withholding_t(spec, &topology, &values)?;
    let scheduler = sched_spec.build(&topology, measured)?;
    let mut config = SimConfig::new(spec.f_ack);
    if spec.quiescent {
        config = config.run_to_quiescence();
    }
    let trace = execute(
        &spec.protocol,
        Arc::clone(&topology),
        values,
        scheduler,
        config,
        spec.n_known,
        spec.horizon.unwrap_or(DEFAULT_HORIZON),
    )
    .with_context(|| format!("cell {cell} ({} on {}) seed {seed}", spec.protocol, spec.topology))?;
    let checks = spec
        .checks
        .clone()
        .unwrap_or_else(|| CheckKind::defaults_for(&spec.protocol));
    let report = trace.report(&checks, spec.deadline);
    let mut row = trace.row(&report);
    row.scenario = scenario.to_string();
    row.cell = cell;
    row.seed = seed;
    row.protocol = spec.protocol.to_string();
    Ok(RunRecord {
        row,
        report,
        trace: keep_trace.then(|| trace.to_jsonl()),
    })
}

/// Worker count: `MACSIM_THREADS` if set, else every available core.
pub fn worker_threads() -> usize {
    std::env::var("MACSIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (cell, seed) pair on a pool of `threads` workers. Results come
/// back in cell-major, seed-ascending order regardless of scheduling.
pub fn run_matrix(scenario: &Scenario, runs: &[RunSpec], threads: usize, keep_traces: bool) -> Result<Vec<RunRecord>> {
    let jobs: Vec<(usize, u64)> = (0..runs.len())
        .flat_map(|cell| scenario.seeds.iter().map(move |seed| (cell, seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(cell, seed)| simulate(&scenario.name, cell, &runs[cell], seed, keep_traces))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::ValueSpec;

    fn spec(topology: &str, scheduler: &str, protocol: &str) -> RunSpec {
        RunSpec::new(
            topology.parse().unwrap(),
            scheduler.parse().unwrap(),
            protocol.parse().unwrap(),
        )
    }

    #[test]
    fn twophase_cell_reports_every_default_check() {
        let rec = simulate("t", 0, &spec("clique:n=4", "maxdelay", "twophase").f_ack(5), 0, false).unwrap();
        assert_eq!(rec.row.decision_time, Some(10));
        assert_eq!(rec.row.max_ids, 1);
        assert_eq!(rec.row.verdict, "pass");
        assert_eq!(rec.report.checks.len(), 7);
        assert!(rec.report.checks.iter().all(CheckResult::passed));
    }

    #[test]
    fn wpaxos_cell_reports_tags_and_gst() {
        let rec = simulate(
            "w",
            0,
            &spec("line:d=3", "random:seed=1", "wpaxos").quiescent(),
            4,
            true,
        )
        .unwrap();
        assert_eq!(rec.row.verdict, "pass", "{:?}", rec.report);
        assert!(rec.row.max_tag.is_some() && rec.row.gst.is_some());
        assert!(rec.trace.unwrap().lines().count() > 1);
    }

    #[test]
    fn mutation_shows_up_as_failed_check() {
        let cell = spec("clique:n=4", "sync", "twophase:fault=premature-decide").values(ValueSpec::Alternate);
        let rec = simulate("m", 0, &cell, 0, false).unwrap();
        assert_eq!(rec.row.verdict, "fail");
        assert!(rec.row.failed_checks.contains("agreement"), "{}", rec.row.failed_checks);
    }

    #[test]
    fn withholding_t_is_measured_from_the_reference_network() {
        let rec = simulate(
            "k",
            0,
            &spec("kd:D=4", "semisync", "idflood").values(ValueSpec::Zeros),
            0,
            false,
        )
        .unwrap();
        assert_eq!(rec.row.scheduler, "semisync:t=4");
        let rec = simulate("a", 0, &spec("netA:D=4,n=4", "bridge", "anonflood"), 0, false).unwrap();
        assert_eq!(rec.row.scheduler, "bridge:t=4");
        assert!(simulate("c", 0, &spec("clique:n=3", "bridge", "anonflood"), 0, false).is_err());
    }

    #[test]
    fn matrix_order_and_determinism() {
        let mut scenario = Scenario {
            name: "m".into(),
            description: String::new(),
            seeds: "0..6".parse().unwrap(),
            experiment: crate::scenario::Experiment::Simulate { runs: vec![] },
        };
        let runs = vec![
            spec("clique:n=5", "random:seed=0", "twophase")
                .values(ValueSpec::Random)
                .f_ack(3),
            spec("line:d=3", "random:seed=0", "wpaxos").f_ack(2),
        ];
        let a = run_matrix(&scenario, &runs, 4, false).unwrap();
        let b = run_matrix(&scenario, &runs, 1, false).unwrap();
        let key: Vec<_> = a.iter().map(|r| (r.row.cell, r.row.seed)).collect();
        let want: Vec<_> = (0..2).flat_map(|c| (0..6).map(move |s| (c, s))).collect();
        assert_eq!(key, want);
        assert_eq!(
            a.iter().map(|r| &r.row).collect::<Vec<_>>(),
            b.iter().map(|r| &r.row).collect::<Vec<_>>()
        );
        scenario.seeds = "0..1".parse().unwrap();
        assert_eq!(run_matrix(&scenario, &runs, 2, false).unwrap().len(), 2);
    }
}
