//! Fixed constructions: the two partition arguments, the causal-history
//! time bound, and valid-step exploration.
//!
//! The partition demos run flooding protocols that are correct under the
//! synchronous scheduler on their reference networks. They stand in for
//! "any algorithm": the point is to watch the partition mechanics defeat a
//! concrete protocol, not to prove that no protocol exists.

use std::sync::Arc;

use anyhow::{bail, ensure, Result};
use macsim_core::checkers::{
    check_agreement, check_causal_bound, check_indistinguishable, CheckReport, CheckResult, Witness,
};
use macsim_core::naive::{AnonFlooder, IdFlooder};
use macsim_core::sched::explore::{ExploreConfig, Explorer};
use macsim_core::sched::{BridgeScheduler, MaxDelayScheduler, SemiSyncScheduler, SyncScheduler};
use macsim_core::topology::{
    build_clique, build_kd, build_line, build_network_a, build_network_b, KdLayout, NodeMapping,
};
use macsim_core::twophase::TwoPhaseNode;
use macsim_core::wpaxos::{WpaxosConfig, WpaxosNode};
use macsim_core::{run_simulation, ExecutionTrace, NodeId, Protocol, SimConfig, Time, Value};
use serde::Serialize;
use serde_json::json;

use crate::runner::{AnyTrace, RunRow};
use crate::scenario::{CheckKind, ExploreSpec};
use crate::spec::ProtocolSpec;

const HORIZON: Time = 1_000_000;

/// What a construction produced: per-run rows, its own verdicts, and
/// construction-specific details.
#[derive(Debug, Clone, Serialize)]
pub struct DemoOutcome {
    pub rows: Vec<RunRow>,
    pub report: CheckReport,
    pub details: serde_json::Value,
}

fn row(label: &str, protocol: &str, trace: AnyTrace) -> RunRow {
    let report = trace.report(
        &[CheckKind::Agreement, CheckKind::Validity, CheckKind::Termination],
        None,
    );
    let mut r = trace.row(&report);
    r.label = label.to_string();
    r.protocol = protocol.to_string();
    r
}

fn decisions_of<P: Protocol>(t: &ExecutionTrace<P>, nodes: impl IntoIterator<Item = NodeId>) -> Vec<Option<Value>> {
    nodes
        .into_iter()
        .map(|u| t.decisions[u.index()].map(|(v, _)| v))
        .collect()
}

/// Expects every listed node to have decided `want`.
fn check_group<P: Protocol>(name: &str, t: &ExecutionTrace<P>, nodes: &[NodeId], want: Value) -> CheckResult {
    let got = decisions_of(t, nodes.iter().copied());
    match nodes.iter().zip(&got).find(|(_, d)| **d != Some(want)) {
        None => CheckResult::pass(name).with_note(format!("{} nodes decided {want}", nodes.len())),
        Some((u, d)) => CheckResult::fail(
            name,
            Witness::new(format!("{u} decided {d:?}, expected {want}")).nodes([*u]),
        ),
    }
}

/// Agreement must fail on the partitioned network; the failure witness is
/// what the construction is meant to produce.
fn expect_violation<P: Protocol>(name: &str, t: &ExecutionTrace<P>) -> CheckResult {
    let agreement = check_agreement(t);
    match agreement.witness {
        Some(w) if agreement.failed() => CheckResult::pass(name).with_note(format!("agreement violated: {}", w.detail)),
        _ => CheckResult::fail(
            name,
            Witness::new("all decisions agree; the partition was not reproduced"),
        ),
    }
}

/// Anonymous flooding on network A, with the bridge `q` withheld for `t`
/// rounds, against network B under the synchronous scheduler. Gadget copy 0
/// of A starts with 0s and copy 1 with 1s; each copy must look exactly like
/// B with uniform inputs of the same value, so the copies decide
/// differently.
pub fn gadget_partition(diameter: usize, n: usize) -> Result<DemoOutcome> {
    let (a, params) = build_network_a(diameter, n)?;
    let (b, mapping) = build_network_b(diameter, n)?;
    let (a, b) = (Arc::new(a), Arc::new(b));
    let rounds = diameter;
    let run_b = |v: Value| {
        run_simulation(
            Arc::clone(&b),
            AnonFlooder::factory(vec![v; b.n()], rounds),
            SyncScheduler,
            SimConfig::new(1).anonymous(),
            HORIZON,
        )
    };
    let b0 = run_b(Value::Zero)?;
    let b1 = run_b(Value::One)?;
    let Some(t) = b0.decision_time().filter(|_| b0.terminated) else {
        bail!("reference run on network B did not decide");
    };

    let mut values = vec![Value::One; a.n()];
    for pos in mapping.positions() {
        values[mapping.a_node(0, pos).index()] = Value::Zero;
    }
    let bridge = BridgeScheduler::for_topology(&a, t)?;
    let q = bridge.bridge();
    let run_a = run_simulation(
        Arc::clone(&a),
        AnonFlooder::factory(values, rounds),
        bridge,
        SimConfig::new(1).anonymous(),
        HORIZON,
    )?;

    let copy = |c: usize| -> Vec<NodeId> { mapping.positions().map(|p| mapping.a_node(c, p)).collect() };
    let mut report = CheckReport::default();
    let all_b: Vec<NodeId> = b.nodes().collect();
    report.push(check_group("reference_uniform_zero", &b0, &all_b, Value::Zero));
    report.push(check_group("reference_uniform_one", &b1, &all_b, Value::One));
    report.push(rename(
        check_indistinguishable(&run_a, &b0, &mapping.pairs(0), t),
        "indistinguishable_copy0",
    ));
    report.push(rename(
        check_indistinguishable(&run_a, &b1, &mapping.pairs(1), t),
        "indistinguishable_copy1",
    ));
    report.push(check_group("copy0_decides_0", &run_a, &copy(0), Value::Zero));
    report.push(check_group("copy1_decides_1", &run_a, &copy(1), Value::One));
    report.push(expect_violation("agreement_violation_on_a", &run_a));

    let details = json!({
        "diameter": diameter,
        "n_requested": n,
        "size": params.n_prime,
        "gadget_size": params.gadget_size(),
        "bridge": q,
        "t": t,
        "mapping": mapping_details(&mapping),
    });
    let protocol = ProtocolSpec::AnonFlood { rounds: Some(rounds) }.to_string();
    Ok(DemoOutcome {
        rows: vec![
            row("network-a", &protocol, AnyTrace::AnonFlood(run_a)),
            row("network-b-zeros", &protocol, AnyTrace::AnonFlood(b0)),
            row("network-b-ones", &protocol, AnyTrace::AnonFlood(b1)),
        ],
        report,
        details,
    })
}

fn mapping_details(mapping: &NodeMapping) -> serde_json::Value {
    let s: Vec<_> = mapping
        .positions()
        .map(|p| json!({"position": p, "copies": mapping.copies(p)}))
        .collect();
    serde_json::Value::Array(s)
}

fn rename(mut r: CheckResult, name: &str) -> CheckResult {
    r.name = name.to_string();
    r
}

/// Id-based flooding without knowledge of `n` on `K_D`. The first line
/// starts with 0s, everything else with 1s, and the endpoint bridging the
/// two lines is withheld for `t` rounds, where `t` is the decision time on a
/// free-standing `L_D`. The first line cannot tell it is not alone and
/// decides 0; the second line only hears ids above its own minimum, which
/// starts with a 1, and decides 1.
pub fn kd_partition(diameter: usize) -> Result<DemoOutcome> {
    ensure!(diameter >= 1, "K_D needs D >= 1");
    let kd = Arc::new(build_kd(diameter)?);
    let line = Arc::new(build_line(diameter)?);
    let layout = KdLayout::from_topology(&kd).expect("K_D carries its layout labels");
    let rounds = diameter;
    let reference = run_simulation(
        Arc::clone(&line),
        IdFlooder::factory(vec![Value::Zero; line.n()], rounds),
        SyncScheduler,
        SimConfig::new(1),
        HORIZON,
    )?;
    let Some(t) = reference.decision_time().filter(|_| reference.terminated) else {
        bail!("reference run on the line did not decide");
    };
    let mut values = vec![Value::One; kd.n()];
    for u in &layout.first {
        values[u.index()] = Value::Zero;
    }
    let semi = SemiSyncScheduler::for_topology(&kd, t)?;
    let endpoint = semi.endpoint();
    let run = run_simulation(
        Arc::clone(&kd),
        IdFlooder::factory(values, rounds),
        semi,
        SimConfig::new(1),
        HORIZON,
    )?;
    // The first line keeps ids 0..=D, so plain (id-bearing) digests must
    // match node for node.
    let pairs: Vec<(NodeId, NodeId)> = layout.first.iter().zip(line.nodes()).map(|(&x, y)| (x, y)).collect();
    let mut report = CheckReport::default();
    report.push(check_group(
        "reference_decides_0",
        &reference,
        &line.nodes().collect::<Vec<_>>(),
        Value::Zero,
    ));
    report.push(rename(
        check_indistinguishable(&run, &reference, &pairs, t),
        "indistinguishable_first_line",
    ));
    report.push(check_group("first_line_decides_0", &run, &layout.first, Value::Zero));
    report.push(check_group("second_line_decides_1", &run, &layout.second, Value::One));
    report.push(expect_violation("agreement_violation_on_kd", &run));
    let details = json!({
        "diameter": diameter,
        "size": kd.n(),
        "endpoint": endpoint,
        "t": t,
        "first_line": layout.first,
        "second_line": layout.second,
    });
    let protocol = ProtocolSpec::IdFlood { rounds: Some(rounds) }.to_string();
    Ok(DemoOutcome {
        rows: vec![
            row("kd", &protocol, AnyTrace::IdFlood(run)),
            row("line-reference", &protocol, AnyTrace::IdFlood(reference)),
        ],
        report,
        details,
    })
}

/// wPAXOS on lines under maximum delay: nothing from beyond half the
/// diameter reaches an endpoint before `⌊D/2⌋·f_ack`, and no node decides
/// earlier than that.
pub fn causal_bound(diameters: &[usize], f_ack: Time) -> Result<DemoOutcome> {
    let mut report = CheckReport::default();
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for &d in diameters {
        ensure!(d >= 1, "line diameter must be at least 1");
        let line = Arc::new(build_line(d)?);
        let n = line.n();
        let values: Vec<Value> = (0..n).map(|i| Value::from(i % 2 == 1)).collect();
        let trace = run_simulation(
            Arc::clone(&line),
            WpaxosNode::factory(values, WpaxosConfig::new(n)),
            MaxDelayScheduler,
            SimConfig::new(f_ack),
            HORIZON,
        )?;
        let bound = (d as Time / 2) * f_ack;
        report.push(rename(
            check_causal_bound(&trace, bound),
            &format!("causal_history_bound_d{d}"),
        ));
        let name = format!("decision_time_lower_bound_d{d}");
        let first_decision = trace.decisions.iter().flatten().map(|&(_, t)| t).min();
        report.push(match first_decision {
            Some(t) if trace.terminated && t >= bound => {
                CheckResult::pass(&name).with_note(format!("first decision at {t} >= {bound}"))
            }
            Some(t) if trace.terminated => {
                CheckResult::fail(&name, Witness::new(format!("a node decided at {t} < {bound}")))
            }
            _ => CheckResult::fail(&name, Witness::new("the run did not terminate")),
        });
        details.push(json!({
            "diameter": d,
            "bound": bound,
            "first_decision": first_decision,
            "decision_time": trace.decision_time(),
        }));
        let mut r = row(
            &format!("line-d{d}"),
            &ProtocolSpec::wpaxos().to_string(),
            AnyTrace::Wpaxos(trace),
        );
        r.cell = rows.len();
        rows.push(r);
    }
    Ok(DemoOutcome {
        rows,
        report,
        details: json!({ "f_ack": f_ack, "lines": details }),
    })
}

/// Valid-step exploration of two-phase consensus on a clique, over every
/// input vector unless one is given. With a crash budget it also reports
/// valence statistics.
pub fn explore(spec: &ExploreSpec) -> Result<DemoOutcome> {
    ensure!(spec.n >= 1, "exploration needs at least one node");
    ensure!(spec.n <= 6, "exploration beyond 6 nodes is not tractable");
    let topology = Arc::new(build_clique(spec.n)?);
    let inputs: Vec<Vec<Value>> = match &spec.values {
        Some(v) => vec![v.assign(spec.n, 0)?],
        None => (0u32..1 << spec.n)
            .map(|mask| (0..spec.n).map(|i| Value::from(mask >> i & 1 == 1)).collect())
            .collect(),
    };
    let options = spec.protocol.twophase_options();
    let mut report = CheckReport::default();
    let mut failures: [Option<Witness>; 3] = Default::default();
    let mut per_input = Vec::new();
    let (mut terminals, mut states, mut stuck) = (0usize, 0usize, 0usize);
    for values in inputs {
        let config = ExploreConfig::new(spec.depth).crash_budget(spec.crash_budget);
        let explorer = Explorer::new(
            Arc::clone(&topology),
            TwoPhaseNode::factory(values.clone(), options),
            config,
        );
        let result = explorer.run();
        terminals += result.terminals.len();
        stuck += result.stuck.len();
        states += result.states_visited;
        let bits: String = values.iter().map(|v| v.to_string()).collect();
        for outcome in &result.terminals {
            let decided: Vec<Value> = outcome.decisions.iter().flatten().copied().collect();
            if failures[0].is_none() && decided.iter().any(|v| *v != decided[0]) {
                failures[0] = Some(
                    Witness::new(format!(
                        "inputs {bits}: decisions {:?} after {} steps",
                        outcome.decisions,
                        outcome.path.len()
                    ))
                    .values(decided.clone()),
                );
            }
            if failures[1].is_none() && decided.iter().any(|v| !values.contains(v)) {
                failures[1] = Some(Witness::new(format!("inputs {bits}: decided a value nobody proposed")));
            }
        }
        if failures[2].is_none() {
            if let Some(blocked) = result.stuck.first() {
                failures[2] = Some(Witness::new(format!(
                    "inputs {bits}: no valid step after {} steps with undecided live nodes",
                    blocked.path.len()
                )));
            } else if result.cutoff > 0 || result.truncated {
                failures[2] = Some(Witness::new(format!(
                    "inputs {bits}: exploration hit depth {} or the state cap",
                    spec.depth
                )));
            }
        }
        let valence = (spec.crash_budget > 0).then(|| explorer.valence());
        per_input.push(json!({
            "values": bits,
            "states_visited": result.states_visited,
            "terminals": result.terminals.len(),
            "stuck": result.stuck.len(),
            "cutoff": result.cutoff,
            "valence": valence,
        }));
    }
    let [agreement, validity, termination] = failures;
    for (name, failure) in [("agreement", agreement), ("validity", validity)] {
        report.push(match failure {
            None => CheckResult::pass(name).with_note(format!("{terminals} complete executions")),
            Some(w) => CheckResult::fail(name, w),
        });
    }
    report.push(match termination {
        // The protocol does not tolerate crashes; blocked executions are
        // part of what the exploration is meant to expose.
        _ if spec.crash_budget > 0 => CheckResult::inapplicable(
            "termination",
            format!("crashes allowed; {stuck} blocked executions recorded"),
        ),
        None => CheckResult::pass("termination").with_note(format!("{terminals} complete executions")),
        Some(w) => CheckResult::fail("termination", w),
    });
    Ok(DemoOutcome {
        rows: Vec::new(),
        report,
        details: json!({
            "n": spec.n,
            "crash_budget": spec.crash_budget,
            "depth": spec.depth,
            "states_visited": states,
            "complete_executions": terminals,
            "blocked_executions": stuck,
            "inputs": per_input,
        }),
    })
}
