//! Call graphs supplied as JSON by an external taint-analysis tool.
//!
//! ```json
//! {"nodes": [{"class": "a.B", "method": "run", "descriptor": "()V"}, ...],
//!  "edges": [[0, 1], ...],
//!  "entry": [0]}
//! ```

use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use super::method::MethodRef;

#[derive(Debug, Error)]
pub enum CallGraphError {
    #[error("cannot read call graph: {0}")]
    Io(#[from] std::io::Error),
    #[error("call graph is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("call graph schema violation at {0:?}")]
    SchemaViolation(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    pub nodes: Vec<MethodRef>,
    /// `(caller, callee)` in the order recorded by the producer.
    pub edges: Vec<(usize, usize)>,
    pub entry_points: Vec<usize>,
}

impl CallGraph {
    /// Successor lists in stored edge order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
        }
        adj
    }

    pub fn from_json(text: &str) -> Result<CallGraph, CallGraphError> {
        let v: Value = serde_json::from_str(text)?;
        from_value(&v).map_err(CallGraphError::SchemaViolation)
    }

    pub fn to_json(&self) -> String {
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|m| {
                serde_json::json!({"class": m.class_name, "method": m.method_name, "descriptor": m.descriptor})
            })
            .collect();
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|(a, b)| serde_json::json!([a, b]))
            .collect();
        serde_json::json!({"nodes": nodes, "edges": edges, "entry": self.entry_points}).to_string()
    }
}

pub fn load_call_graph(path: &Path) -> Result<CallGraph, CallGraphError> {
    CallGraph::from_json(&std::fs::read_to_string(path)?)
}

fn from_value(v: &Value) -> Result<CallGraph, String> {
    let obj = v.as_object().ok_or_else(String::new)?;
    let nodes_v = obj.get("nodes").and_then(Value::as_array).ok_or("/nodes")?;
    let mut nodes = Vec::with_capacity(nodes_v.len());
    for (i, n) in nodes_v.iter().enumerate() {
        let field = |k: &str| -> Result<String, String> {
            n.get(k)
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .ok_or(format!("/nodes/{i}/{k}"))
        };
        let class = field("class")?;
        let method = field("method")?;
        let descriptor = field("descriptor")?;
        nodes.push(MethodRef::new(&class, &method, &descriptor));
    }
    let index = |x: &Value, ptr: String| -> Result<usize, String> {
        x.as_u64()
            .map(|i| i as usize)
            .filter(|&i| i < nodes.len())
            .ok_or(ptr)
    };
    let edges_v = obj.get("edges").and_then(Value::as_array).ok_or("/edges")?;
    let mut edges = Vec::with_capacity(edges_v.len());
    for (i, e) in edges_v.iter().enumerate() {
        let pair = e
            .as_array()
            .filter(|p| p.len() == 2)
            .ok_or(format!("/edges/{i}"))?;
        edges.push((
            index(&pair[0], format!("/edges/{i}/0"))?,
            index(&pair[1], format!("/edges/{i}/1"))?,
        ));
    }
    let entry_v = obj.get("entry").and_then(Value::as_array).ok_or("/entry")?;
    let entry_points = entry_v
        .iter()
        .enumerate()
        .map(|(i, x)| index(x, format!("/entry/{i}")))
        .collect::<Result<_, _>>()?;
    Ok(CallGraph {
        nodes,
        edges,
        entry_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{"nodes":[{"class":"com.a.Main","method":"onCreate","descriptor":"()V"},
        {"class":"android.util.Log","method":"d","descriptor":"(Ljava/lang/String;Ljava/lang/String;)I"}],
        "edges":[[0,1]],"entry":[0]}"#;

    #[test]
    fn loads_simple_graph() {
        let g = CallGraph::from_json(TWO).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges, vec![(0, 1)]);
        assert_eq!(g.entry_points, vec![0]);
        assert_eq!(CallGraph::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn out_of_range_edge_is_located() {
        let bad = TWO.replace("[[0,1]]", "[[0,5]]");
        match CallGraph::from_json(&bad) {
            Err(CallGraphError::SchemaViolation(p)) => assert_eq!(p, "/edges/0/1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_graph_is_valid() {
        let g = CallGraph::from_json(r#"{"nodes":[],"edges":[],"entry":[]}"#).unwrap();
        assert_eq!(g, CallGraph::default());
    }

    #[test]
    fn schema_pointers() {
        let cases = [
            ("[]", ""),
            (r#"{"edges":[],"entry":[]}"#, "/nodes"),
            (
                r#"{"nodes":[{"class":"a"}],"edges":[],"entry":[]}"#,
                "/nodes/0/method",
            ),
            (r#"{"nodes":[],"edges":[[0]],"entry":[]}"#, "/edges/0"),
            (r#"{"nodes":[],"edges":[],"entry":[0]}"#, "/entry/0"),
            (r#"{"nodes":[],"edges":[]}"#, "/entry"),
        ];
        for (json, ptr) in cases {
            match CallGraph::from_json(json) {
                Err(CallGraphError::SchemaViolation(p)) => assert_eq!(p, ptr, "{json}"),
                other => panic!("{json}: {other:?}"),
            }
        }
    }

    #[test]
    fn preserves_edge_order() {
        let g = CallGraph::from_json(
            r#"{"nodes":[{"class":"a","method":"m","descriptor":"()V"},
            {"class":"b","method":"m","descriptor":"()V"},{"class":"c","method":"m","descriptor":"()V"}],
            "edges":[[0,2],[0,1],[2,1]],"entry":[0]}"#,
        )
        .unwrap();
        assert_eq!(g.edges, vec![(0, 2), (0, 1), (2, 1)]);
        assert_eq!(g.adjacency()[0], vec![2, 1]);
    }
}
