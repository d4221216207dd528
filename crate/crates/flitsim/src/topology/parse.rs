//! Line-oriented topology files.
//!
//! ```text
//! # comment
//! HOST <name> <port> -- SWITCH <name> <port>
//! SWITCH <name> <port> -- SWITCH <name> <port>
//! ```
//!
//! `HOST -- HOST` is accepted only for a file holding a single such line:
//! two adapters cabled back to back.

use super::{BuildError, NamedEndpoint, NamedNode, Topology};
use crate::error::{Error, Result};

pub fn parse_topology(text: &str) -> Result<Topology> {
    let mut cables = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        cables.push(parse_line(line).map_err(|msg| Error::Parse { line: line_no, msg })?);
        lines.push(line_no);
    }
    if cables.is_empty() {
        return Err(Error::Topology("topology file contains no links".into()));
    }
    Topology::from_named_checked(&cables).map_err(|e| match e {
        BuildError::DuplicatePort { cable, what } => Error::Parse {
            line: lines[cable],
            msg: format!("duplicate port: {what} already has a link"),
        },
        BuildError::HostToHost { cable } => Error::Parse {
            line: lines[cable],
            msg: "a HOST may only connect to a SWITCH".into(),
        },
        BuildError::SelfLoop { cable } => Error::Parse {
            line: lines[cable],
            msg: "link connects a port to itself".into(),
        },
        BuildError::Other(e) => e,
    })
}

fn parse_line(line: &str) -> std::result::Result<(NamedEndpoint, NamedEndpoint), String> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 7 || tokens[3] != "--" {
        return Err(format!(
            "expected `<KIND> <name> <port> -- <KIND> <name> <port>`, got `{line}`"
        ));
    }
    let left = parse_endpoint(&tokens[0..3])?;
    let right = parse_endpoint(&tokens[4..7])?;
    if matches!(left.node, NamedNode::Switch(_)) && matches!(right.node, NamedNode::Host(_)) {
        return Err("write host links with the HOST on the left".into());
    }
    Ok((left, right))
}

fn parse_endpoint(t: &[&str]) -> std::result::Result<NamedEndpoint, String> {
    let port: u16 = t[2]
        .parse()
        .map_err(|_| format!("invalid port number `{}`", t[2]))?;
    match t[0] {
        "HOST" => Ok(NamedEndpoint::host(t[1], port)),
        "SWITCH" => Ok(NamedEndpoint::switch(t[1], port)),
        other => Err(format!("unknown node kind `{other}` (expected HOST or SWITCH)")),
    }
}

/// Emits the file grammar, one line per link, lines sorted lexicographically.
pub fn serialize_topology(topo: &Topology) -> String {
    let mut lines: Vec<String> = topo
        .named_cables()
        .into_iter()
        .map(|(a, b)| {
            // hosts always go on the left
            let (l, r) = match (&a.node, &b.node) {
                (NamedNode::Switch(_), NamedNode::Host(_)) => (b, a),
                _ => (a, b),
            };
            format!("{} -- {}", fmt_endpoint(&l), fmt_endpoint(&r))
        })
        .collect();
    lines.sort();
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn fmt_endpoint(e: &NamedEndpoint) -> String {
    match &e.node {
        NamedNode::Host(n) => format!("HOST {n} {}", e.port),
        NamedNode::Switch(n) => format!("SWITCH {n} {}", e.port),
    }
}
