//! Textual specs for topologies, protocols and input assignments, shared by
//! scenario files and command-line flags. Each round-trips through
//! `Display`/`FromStr` and serializes as its string form.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use macsim_core::topology::{
    build_clique, build_kd, build_line, build_network_a, build_network_b, build_random_connected, load_topology,
};
use macsim_core::twophase::{DecidedZeroSource, TwoPhaseFault, TwoPhaseOptions};
use macsim_core::types::parse_values;
use macsim_core::wpaxos::WpaxosFault;
use macsim_core::{Topology, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `kind` or `kind:key=value,key=value`.
fn split_spec(s: &str) -> Result<(&str, BTreeMap<&str, &str>)> {
    let s = s.trim();
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut params = BTreeMap::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got {part:?}"))?;
        if params.insert(k.trim(), v.trim()).is_some() {
            bail!("parameter {k:?} given twice");
        }
    }
    Ok((kind, params))
}

struct Params<'a> {
    spec: &'a str,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Params<'a> {
    /// Removes the first present key among `keys` and parses it.
    fn take<T: FromStr>(&mut self, keys: &[&str]) -> Result<Option<T>> {
        for key in keys {
            if let Some(v) = self.map.remove(*key) {
                return v
                    .parse()
                    .map(Some)
                    .map_err(|_| anyhow!("{:?}: bad value {v:?} for {key}", self.spec));
            }
        }
        Ok(None)
    }

    fn need<T: FromStr>(&mut self, keys: &[&str]) -> Result<T> {
        self.take(keys)?
            .ok_or_else(|| anyhow!("{:?}: missing parameter {}", self.spec, keys[0]))
    }

    fn done(self) -> Result<()> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => bail!("{:?}: unknown parameter {k:?}", self.spec),
        }
    }
}

fn parse_with<'a, T>(s: &'a str, f: impl FnOnce(&'a str, &mut Params<'a>) -> Result<T>) -> Result<T> {
    let (kind, map) = split_spec(s).with_context(|| format!("in spec {s:?}"))?;
    let mut params = Params { spec: s, map };
    let value = f(kind, &mut params)?;
    params.done()?;
    Ok(value)
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse()
                    .map_err(|e: anyhow::Error| serde::de::Error::custom(format!("{e:#}")))
            }
        }
    };
}

/// `clique:n=5 | line:d=4 | kd:D=4 | netA:D=4,n=4 | netB:D=4,n=4 |
/// random:n=12,p=0.15[,seed=3] | file:<path>`.
///
/// A random graph without a seed is drawn from the run seed, so a sweep
/// covers a fresh graph per seed.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Clique { n: usize },
    Line { d: usize },
    Kd { d: usize },
    NetA { d: usize, n: usize },
    NetB { d: usize, n: usize },
    Random { n: usize, p: f64, seed: Option<u64> },
    File(PathBuf),
}

impl TopologySpec {
    pub fn build(&self, run_seed: u64) -> Result<Topology> {
        let t = match self {
            TopologySpec::Clique { n } => build_clique(*n)?,
            TopologySpec::Line { d } => build_line(*d)?,
            TopologySpec::Kd { d } => build_kd(*d)?,
            TopologySpec::NetA { d, n } => build_network_a(*d, *n)?.0,
            TopologySpec::NetB { d, n } => build_network_b(*d, *n)?.0,
            TopologySpec::Random { n, p, seed } => build_random_connected(*n, *p, seed.unwrap_or(run_seed))?,
            TopologySpec::File(path) => load_topology(path).with_context(|| format!("loading {}", path.display()))?,
        };
        Ok(t)
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySpec::Clique { n } => write!(f, "clique:n={n}"),
            TopologySpec::Line { d } => write!(f, "line:d={d}"),
            TopologySpec::Kd { d } => write!(f, "kd:D={d}"),
            TopologySpec::NetA { d, n } => write!(f, "netA:D={d},n={n}"),
            TopologySpec::NetB { d, n } => write!(f, "netB:D={d},n={n}"),
            TopologySpec::Random { n, p, seed: None } => write!(f, "random:n={n},p={p}"),
            TopologySpec::Random { n, p, seed: Some(s) } => write!(f, "random:n={n},p={p},seed={s}"),
            TopologySpec::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for TopologySpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.trim().strip_prefix("file:") {
            if path.is_empty() {
                bail!("{s:?}: empty path");
            }
            return Ok(TopologySpec::File(PathBuf::from(path)));
        }
        parse_with(s, |kind, p| {
            Ok(match kind {
                "clique" => TopologySpec::Clique { n: p.need(&["n"])? },
                "line" => TopologySpec::Line {
                    d: p.need(&["d", "D"])?,
                },
                "kd" => TopologySpec::Kd {
                    d: p.need(&["D", "d"])?,
                },
                "netA" => TopologySpec::NetA {
                    d: p.need(&["D", "d"])?,
                    n: p.need(&["n"])?,
                },
                "netB" => TopologySpec::NetB {
                    d: p.need(&["D", "d"])?,
                    n: p.need(&["n"])?,
                },
                "random" => TopologySpec::Random {
                    n: p.need(&["n"])?,
                    p: p.take(&["p"])?.unwrap_or(0.2),
                    seed: p.take(&["seed"])?,
                },
                other => bail!("unknown topology {other:?}"),
            })
        })
    }
}

string_serde!(TopologySpec);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolSpec {
    /// `twophase[:rule=phase2-only][,fault=premature-decide]`
    TwoPhase {
        phase_two_only: bool,
        premature_decide: bool,
    },
    /// `wpaxos[:fault=double-count|keep-min-prior]`
    Wpaxos { fault: Option<WpaxosFault> },
    /// `anonflood[:rounds=<int>]`; rounds default to the diameter.
    AnonFlood { rounds: Option<usize> },
    /// `idflood[:rounds=<int>]`
    IdFlood { rounds: Option<usize> },
}

impl ProtocolSpec {
    pub fn twophase() -> Self {
        ProtocolSpec::TwoPhase {
            phase_two_only: false,
            premature_decide: false,
        }
    }

    pub fn wpaxos() -> Self {
        ProtocolSpec::Wpaxos { fault: None }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolSpec::TwoPhase { .. } => "twophase",
            ProtocolSpec::Wpaxos { .. } => "wpaxos",
            ProtocolSpec::AnonFlood { .. } => "anonflood",
            ProtocolSpec::IdFlood { .. } => "idflood",
        }
    }

    pub fn twophase_options(&self) -> TwoPhaseOptions {
        match *self {
            ProtocolSpec::TwoPhase {
                phase_two_only,
                premature_decide,
            } => TwoPhaseOptions {
                decided_zero_source: if phase_two_only {
                    DecidedZeroSource::AfterPhaseOneOnly
                } else {
                    DecidedZeroSource::AllReceived
                },
                fault: premature_decide.then_some(TwoPhaseFault::PrematureDecide),
                ..TwoPhaseOptions::default()
            },
            _ => TwoPhaseOptions::default(),
        }
    }
}

fn fault_name(f: WpaxosFault) -> &'static str {
    match f {
        WpaxosFault::DoubleCount => "double-count",
        WpaxosFault::KeepMinPrior => "keep-min-prior",
    }
}

impl fmt::Display for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProtocolSpec::TwoPhase {
                phase_two_only,
                premature_decide,
            } => {
                let mut opts = Vec::new();
                if phase_two_only {
                    opts.push("rule=phase2-only");
                }
                if premature_decide {
                    opts.push("fault=premature-decide");
                }
                if opts.is_empty() {
                    write!(f, "twophase")
                } else {
                    write!(f, "twophase:{}", opts.join(","))
                }
            }
            ProtocolSpec::Wpaxos { fault: None } => write!(f, "wpaxos"),
            ProtocolSpec::Wpaxos { fault: Some(x) } => write!(f, "wpaxos:fault={}", fault_name(x)),
            ProtocolSpec::AnonFlood { rounds: None } => write!(f, "anonflood"),
            ProtocolSpec::AnonFlood { rounds: Some(r) } => write!(f, "anonflood:rounds={r}"),
            ProtocolSpec::IdFlood { rounds: None } => write!(f, "idflood"),
            ProtocolSpec::IdFlood { rounds: Some(r) } => write!(f, "idflood:rounds={r}"),
        }
    }
}

impl FromStr for ProtocolSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_with(s, |kind, p| {
            Ok(match kind {
                "twophase" => {
                    let rule: Option<String> = p.take(&["rule"])?;
                    let fault: Option<String> = p.take(&["fault"])?;
                    let phase_two_only = match rule.as_deref() {
                        None | Some("all") => false,
                        Some("phase2-only") => true,
                        Some(other) => bail!("unknown two-phase rule {other:?}"),
                    };
                    let premature_decide = match fault.as_deref() {
                        None => false,
                        Some("premature-decide") => true,
                        Some(other) => bail!("unknown two-phase fault {other:?}"),
                    };
                    ProtocolSpec::TwoPhase {
                        phase_two_only,
                        premature_decide,
                    }
                }
                "wpaxos" => {
                    let fault: Option<String> = p.take(&["fault"])?;
                    ProtocolSpec::Wpaxos {
                        fault: match fault.as_deref() {
                            None => None,
                            Some("double-count") => Some(WpaxosFault::DoubleCount),
                            Some("keep-min-prior") => Some(WpaxosFault::KeepMinPrior),
                            Some(other) => bail!("unknown wpaxos fault {other:?}"),
                        },
                    }
                }
                "anonflood" => ProtocolSpec::AnonFlood {
                    rounds: p.take(&["rounds"])?,
                },
                "idflood" => ProtocolSpec::IdFlood {
                    rounds: p.take(&["rounds"])?,
                },
                other => bail!("unknown protocol {other:?}"),
            })
        })
    }
}

string_serde!(ProtocolSpec);

/// Initial-value assignment: `alternate | zeros | ones | half | random | bits:0110`.
///
/// `random` draws from the run seed, so a seed sweep varies the inputs too.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueSpec {
    Alternate,
    Zeros,
    Ones,
    /// First half (rounded up) 0, the rest 1.
    Half,
    Random,
    Bits(Vec<Value>),
}

impl ValueSpec {
    pub fn assign(&self, n: usize, seed: u64) -> Result<Vec<Value>> {
        Ok(match self {
            ValueSpec::Alternate => (0..n).map(|i| Value::from(i % 2 == 1)).collect(),
            ValueSpec::Zeros => vec![Value::Zero; n],
            ValueSpec::Ones => vec![Value::One; n],
            ValueSpec::Half => (0..n).map(|i| Value::from(i >= n.div_ceil(2))).collect(),
            ValueSpec::Random => {
                // Decorrelated from the scheduler stream that shares the seed.
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7a1e_u64);
                (0..n).map(|_| Value::from(rng.gen_bool(0.5))).collect()
            }
            ValueSpec::Bits(bits) => {
                if bits.len() != n {
                    bail!("value bitstring has {} entries for {n} nodes", bits.len());
                }
                bits.clone()
            }
        })
    }
}

impl fmt::Display for ValueSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueSpec::Alternate => write!(f, "alternate"),
            ValueSpec::Zeros => write!(f, "zeros"),
            ValueSpec::Ones => write!(f, "ones"),
            ValueSpec::Half => write!(f, "half"),
            ValueSpec::Random => write!(f, "random"),
            ValueSpec::Bits(bits) => {
                write!(f, "bits:")?;
                bits.iter().try_for_each(|v| write!(f, "{v}"))
            }
        }
    }
}

impl FromStr for ValueSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "alternate" => ValueSpec::Alternate,
            "zeros" => ValueSpec::Zeros,
            "ones" => ValueSpec::Ones,
            "half" => ValueSpec::Half,
            "random" => ValueSpec::Random,
            other => match other.strip_prefix("bits:") {
                Some(bits) => ValueSpec::Bits(parse_values(bits).map_err(|e| anyhow!("{s:?}: {e}"))?),
                None => bail!("unknown value assignment {s:?}"),
            },
        })
    }
}

string_serde!(ValueSpec);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_specs_round_trip() {
        for text in [
            "clique:n=5",
            "line:d=4",
            "kd:D=4",
            "netA:D=4,n=4",
            "netB:D=6,n=6",
            "random:n=12,p=0.15,seed=3",
            "random:n=12,p=0.15",
            "file:/tmp/x.edges",
        ] {
            let spec: TopologySpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert_eq!("line:D=3".parse::<TopologySpec>().unwrap(), TopologySpec::Line { d: 3 });
    }

    #[test]
    fn topology_specs_build_expected_sizes() {
        let size = |s: &str| s.parse::<TopologySpec>().unwrap().build(0).unwrap().n();
        assert_eq!(size("clique:n=5"), 5);
        assert_eq!(size("line:d=4"), 5);
        assert_eq!(size("kd:D=4"), 14);
        assert_eq!(size("netA:D=4,n=4"), 15);
        assert_eq!(size("netB:D=4,n=4"), 15);
    }

    #[test]
    fn malformed_specs_are_rejected() {
        for bad in [
            "",
            "ring:n=3",
            "clique",
            "clique:n=x",
            "clique:n=3,m=2",
            "clique:n=3,n=4",
            "line:4",
        ] {
            assert!(bad.parse::<TopologySpec>().is_err(), "{bad}");
        }
        for bad in ["paxos", "wpaxos:fault=none", "twophase:rule=x", "anonflood:r=2"] {
            assert!(bad.parse::<ProtocolSpec>().is_err(), "{bad}");
        }
        for bad in ["bits:012", "mixed"] {
            assert!(bad.parse::<ValueSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn protocol_specs_round_trip() {
        for text in [
            "twophase",
            "twophase:rule=phase2-only",
            "twophase:fault=premature-decide",
            "wpaxos",
            "wpaxos:fault=double-count",
            "wpaxos:fault=keep-min-prior",
            "anonflood",
            "idflood:rounds=3",
        ] {
            assert_eq!(text.parse::<ProtocolSpec>().unwrap().to_string(), text);
        }
    }

    #[test]
    fn value_assignments() {
        let v = |s: &str, n| s.parse::<ValueSpec>().unwrap().assign(n, 7).unwrap();
        assert_eq!(v("alternate", 3), vec![Value::Zero, Value::One, Value::Zero]);
        assert_eq!(
            v("half", 5),
            vec![Value::Zero, Value::Zero, Value::Zero, Value::One, Value::One]
        );
        assert_eq!(v("bits:10", 2), vec![Value::One, Value::Zero]);
        assert_eq!(v("random", 16), v("random", 16));
        assert!("bits:10".parse::<ValueSpec>().unwrap().assign(3, 0).is_err());
    }
}
