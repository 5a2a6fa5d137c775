//! Text and CSV rendering: the graph-dump listing, solver reports and the
//! fixed-schema result rows.

use idnc_core::graph::{IdncGraph, DEFAULT_VERTEX_CAP};
use idnc_core::mdp::ValuePolicyTable;
use idnc_core::sim::AggregateResult;
use idnc_core::{ConnectivityMatrix, StatusMatrix, Vertex};

use crate::CliError;

pub const CSV_HEADER: &str = "sweep_variable,scheduler,runs,mean_psnr,std_psnr,mean_distortion";

pub fn csv_row(sweep_variable: &str, scheduler: &str, agg: &AggregateResult) -> String {
    format!(
        "{},{},{},{:.6},{:.6},{:.6}",
        sweep_variable, scheduler, agg.runs, agg.mean_psnr, agg.std_psnr, agg.mean_distortion
    )
}

fn vertex_set(verts: &[Vertex]) -> String {
    let items: Vec<String> = verts.iter().map(Vertex::to_string).collect();
    if items.is_empty() {
        "{ }".to_string()
    } else {
        format!("{{ {} }}", items.join(", "))
    }
}

/// Deterministic listing of the conflict graph: vertices, edges with their
/// rule tags, and every maximal independent set.
pub fn render_graph_dump(y: &ConnectivityMatrix, f: &StatusMatrix) -> Result<String, CliError> {
    let g = IdncGraph::build(y, f)?;
    if g.is_empty() {
        return Ok("empty graph\n".to_string());
    }
    let mut out = String::new();
    out.push_str(&format!("vertices ({}):\n", g.vertex_count()));
    for v in g.vertices() {
        out.push_str(&format!("  {v}\n"));
    }
    let edges = g.edges();
    out.push_str(&format!("edges ({}):\n", edges.len()));
    for (u, v, rule) in edges {
        out.push_str(&format!("  {} -- {}  [{}]\n", g.vertex(u), g.vertex(v), rule));
    }
    let sets = g.maximal_independent_sets_capped(DEFAULT_VERTEX_CAP)?;
    out.push_str(&format!("maximal independent sets ({}):\n", sets.len()));
    for s in &sets {
        out.push_str(&format!("  {}\n", vertex_set(&g.resolve(s))));
    }
    Ok(out)
}

pub fn render_mdp_report(table: &ValuePolicyTable) -> String {
    let action = table.root_action();
    format!(
        "optimal value: {:.6}\nfirst action: {}\nreachable states: {}\ntable entries: {}\n",
        table.root_value(),
        if action.is_empty() {
            "(idle)".to_string()
        } else {
            vertex_set(action)
        },
        table.reachable_states(),
        table.len(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use idnc_core::fixtures;

    #[test]
    fn line_fixture_dump_is_stable() {
        let text = render_graph_dump(&fixtures::line_scm(), &fixtures::line_status()).unwrap();
        let expected = "\
vertices (4):
  v(1,2,3)
  v(2,1,1)
  v(3,2,2)
  v(3,4,1)
edges (4):
  v(1,2,3) -- v(2,1,1)  [C5]
  v(1,2,3) -- v(3,2,2)  [C3]
  v(1,2,3) -- v(3,4,1)  [C4]
  v(2,1,1) -- v(3,2,2)  [C5]
maximal independent sets (3):
  { v(1,2,3) }
  { v(2,1,1), v(3,4,1) }
  { v(3,2,2), v(3,4,1) }
";
        assert_eq!(text, expected);
    }

    #[test]
    fn empty_graph_dump() {
        let f = StatusMatrix::from_rows(vec![vec![0; 3]; 4]).unwrap();
        let text = render_graph_dump(&fixtures::line_scm(), &f).unwrap();
        assert_eq!(text, "empty graph\n");
    }

    #[test]
    fn csv_schema_is_fixed() {
        assert_eq!(
            CSV_HEADER,
            "sweep_variable,scheduler,runs,mean_psnr,std_psnr,mean_distortion"
        );
        let agg = AggregateResult {
            runs: 3,
            mean_distortion: 1.25,
            std_distortion: 0.5,
            mean_psnr: 30.123456789,
            std_psnr: 0.25,
            psnr_histogram: vec![],
        };
        assert_eq!(csv_row("7", "tsmis", &agg), "7,tsmis,3,30.123457,0.250000,1.250000");
    }
}
