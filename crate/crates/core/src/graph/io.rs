use std::fmt::Write as _;

use super::{Cost, GraphError, TransitionGraph};

/// `i,j,cost,is_direct_edge` for every ordered pair `i ≠ j`.
pub fn write_graph_csv(g: &TransitionGraph) -> String {
    let mut out = String::from("i,j,cost,is_direct_edge\n");
    for i in 0..g.len() {
        for j in 0..g.len() {
            if i != j {
                let _ = writeln!(out, "{i},{j},{},{}", g.q[i][j], g.direct[i][j]);
            }
        }
    }
    out
}

/// Cost matrix and direct adjacency from [`write_graph_csv`] output.
pub fn parse_graph_csv(text: &str) -> Result<(Vec<Vec<Cost>>, Vec<Vec<bool>>), GraphError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut n = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| GraphError::Parse(e.to_string()))?;
        if rec.len() != 4 {
            return Err(GraphError::Parse(format!("expected 4 columns, got {}", rec.len())));
        }
        let i: usize = rec[0].parse().map_err(|_| GraphError::Parse(format!("bad i '{}'", &rec[0])))?;
        let j: usize = rec[1].parse().map_err(|_| GraphError::Parse(format!("bad j '{}'", &rec[1])))?;
        let cost = match &rec[2] {
            "inf" => Cost::Infinite,
            s => Cost::Finite(s.parse().map_err(|_| GraphError::Parse(format!("bad cost '{s}'")))?),
        };
        let direct: bool = rec[3]
            .parse()
            .map_err(|_| GraphError::Parse(format!("bad flag '{}'", &rec[3])))?;
        n = n.max(i + 1).max(j + 1);
        rows.push((i, j, cost, direct));
    }
    let mut q = vec![vec![Cost::Infinite; n]; n];
    let mut direct = vec![vec![false; n]; n];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = Cost::Finite(0.0);
    }
    for (i, j, c, d) in rows {
        q[i][j] = c;
        direct[i][j] = d;
    }
    Ok((q, direct))
}

/// `%g`-style formatting with `digits` significant digits.
pub(crate) fn sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    let p = digits as i32;
    if exp < -5 || exp >= p {
        let s = format!("{:.*e}", (p - 1) as usize, v);
        let (mant, e) = s.split_once('e').unwrap();
        format!("{}e{}", trim_zeros(mant), e)
    } else {
        let decimals = (p - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Graphviz rendering of the direct edges; targets are double circles.
pub fn emit_dot(g: &TransitionGraph) -> String {
    let mut out = String::from("digraph transition_graph {\n");
    if g.is_empty() {
        out.push_str("}\n");
        return out;
    }
    out.push_str("  rankdir=LR;\n  node [shape=circle];\n");
    for n in &g.nodes {
        let shape = if g.is_target(n.id) { ", shape=doublecircle" } else { "" };
        let _ = writeln!(
            out,
            "  {} [label=\"{}\\n{}\\nf={}\"{}];",
            n.id,
            n.id,
            n.kind,
            sig(n.value, 6),
            shape
        );
    }
    for i in 0..g.len() {
        for j in 0..g.len() {
            if g.direct[i][j] {
                let label = match g.q[i][j] {
                    Cost::Finite(v) => sig(v, 6),
                    Cost::Infinite => "inf".into(),
                };
                let _ = writeln!(out, "  {i} -> {j} [label=\"{label}\"];");
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.0012724, 6), "0.0012724");
        assert_eq!(sig(1.0 / 3.0, 6), "0.333333");
        assert_eq!(sig(-7.247681, 6), "-7.24768");
        assert_eq!(sig(1234567.0, 6), "1.23457e6");
        assert_eq!(sig(2.5e-7, 6), "2.5e-7");
        assert_eq!(sig(0.0, 6), "0");
    }

    #[test]
    fn empty_graph_is_header_only() {
        let g = TransitionGraph::from_matrix(Vec::new(), Vec::new());
        assert_eq!(emit_dot(&g), "digraph transition_graph {\n}\n");
    }

    #[test]
    fn csv_roundtrip() {
        let inf = f64::INFINITY;
        let g = TransitionGraph::from_matrix(
            vec![vec![0.0, 0.1, inf], vec![0.0, 0.0, 1.0 / 3.0], vec![inf, 2.5, 0.0]],
            vec![0],
        );
        let text = write_graph_csv(&g);
        assert!(text.starts_with("i,j,cost,is_direct_edge\n0,1,0.1,true\n0,2,inf,false\n"));
        let (q, direct) = parse_graph_csv(&text).unwrap();
        assert_eq!(q, g.q);
        assert_eq!(direct, g.direct);
    }
}
