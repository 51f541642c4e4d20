//! Edge-list files: first non-comment line is `n`, then one `u v` pair per
//! line (0-based). Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use super::{Topology, TopologyError};

pub fn parse_edge_list(name: &str, text: &str) -> Result<Topology, TopologyError> {
    let mut n = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<u32>().map_err(|e| TopologyError::Parse {
                line: lineno,
                msg: format!("{s:?}: {e}"),
            })
        };
        match (n, fields.as_slice()) {
            (None, [count]) => n = Some(parse(count)? as usize),
            (None, _) => {
                return Err(TopologyError::Parse {
                    line: lineno,
                    msg: "expected node count".into(),
                })
            }
            (Some(_), [u, v]) => edges.push((parse(u)?, parse(v)?)),
            (Some(_), _) => {
                return Err(TopologyError::Parse {
                    line: lineno,
                    msg: format!("expected `u v`, got {line:?}"),
                })
            }
        }
    }
    let n = n.ok_or(TopologyError::Parse {
        line: 0,
        msg: "missing node count".into(),
    })?;
    Topology::from_edges(name, n, edges)
}

pub fn to_edge_list(topology: &Topology) -> String {
    let mut out = format!("# {}\n{}\n", topology.name(), topology.n());
    for (u, v) in topology.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology, TopologyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| TopologyError::Io(e.to_string()))?;
    parse_edge_list(&format!("file:{}", path.display()), &text)
}

pub fn save_topology(topology: &Topology, path: impl AsRef<Path>) -> Result<(), TopologyError> {
    std::fs::write(path, to_edge_list(topology)).map_err(|e| TopologyError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_kd;

    #[test]
    fn parses_comments_and_edges() {
        let t = parse_edge_list("t", "# a triangle\n3\n0 1\n# mid\n1 2\n2 0\n").unwrap();
        assert_eq!((t.n(), t.edge_count(), t.diameter()), (3, 3, 1));
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_edge_list("t", "3\n0 1\n1 x\n").unwrap_err();
        assert!(matches!(err, TopologyError::Parse { line: 3, .. }));
        let err = parse_edge_list("t", "3\n0 1 2\n").unwrap_err();
        assert!(matches!(err, TopologyError::Parse { line: 2, .. }));
    }

    #[test]
    fn rejects_disconnected_file() {
        let err = parse_edge_list("t", "4\n0 1\n2 3\n").unwrap_err();
        assert!(matches!(err, TopologyError::Disconnected(_)));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k4.edges");
        let k4 = build_kd(4).unwrap();
        save_topology(&k4, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().any(|l| l == "14"));
        let back = load_topology(&path).unwrap();
        assert_eq!(back.n(), 14);
        assert_eq!(back.edges(), k4.edges());
        assert_eq!(back.diameter(), 4);
    }
}
