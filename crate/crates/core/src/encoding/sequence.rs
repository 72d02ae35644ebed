use std::collections::BTreeMap;

use super::vocab::Vocabulary;
use super::EncodingError;
use crate::apk::callgraph::CallGraph;
use crate::apk::method::PlatformPrefixes;
use crate::report::AppId;

pub const DEFAULT_ROUTE_CAP: usize = 10_000;
pub const DEFAULT_MAX_LEN: usize = 2048;

/// Ordered API tokens of one application (canonical method strings).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiSequence {
    pub app_id: AppId,
    pub tokens: Vec<String>,
}

/// All root-to-leaf DFS paths from one node. A node is a leaf when every
/// successor is already on the current path.
fn routes_from(
    adj: &[Vec<usize>],
    start: usize,
    cap: usize,
    count: &mut usize,
    emit: &mut dyn FnMut(&[usize]),
) -> Result<(), EncodingError> {
    let mut on_path = vec![false; adj.len()];
    let mut path = vec![start];
    let mut next_child = vec![0usize];
    on_path[start] = true;
    let mut expanded = vec![false];
    while let Some(&node) = path.last() {
        let depth = path.len() - 1;
        let children = &adj[node];
        let mut pushed = false;
        while next_child[depth] < children.len() {
            let ch = children[next_child[depth]];
            next_child[depth] += 1;
            if !on_path[ch] {
                expanded[depth] = true;
                on_path[ch] = true;
                path.push(ch);
                next_child.push(0);
                expanded.push(false);
                pushed = true;
                break;
            }
        }
        if pushed {
            continue;
        }
        if !expanded[depth] {
            *count += 1;
            if *count > cap {
                return Err(EncodingError::RouteExplosion(cap));
            }
            emit(&path);
        }
        on_path[node] = false;
        path.pop();
        next_child.pop();
        expanded.pop();
    }
    Ok(())
}

/// Routes from each entry point, restricted to platform methods and
/// concatenated in entry-point then route order.
pub fn extract_api_routes(
    graph: &CallGraph,
    prefixes: &PlatformPrefixes,
    cap: usize,
) -> Result<Vec<String>, EncodingError> {
    let adj = graph.adjacency();
    let platform: Vec<bool> = graph
        .nodes
        .iter()
        .map(|m| m.is_platform(prefixes))
        .collect();
    let names: Vec<String> = graph.nodes.iter().map(|m| m.to_string()).collect();
    let mut out = Vec::new();
    let mut count = 0;
    for &e in &graph.entry_points {
        routes_from(&adj, e, cap, &mut count, &mut |route| {
            out.extend(
                route
                    .iter()
                    .filter(|&&n| platform[n])
                    .map(|&n| names[n].clone()),
            );
        })?;
    }
    Ok(out)
}

/// 1-based vocabulary indices, unknown tokens as 0, truncated or
/// right-padded with 0 to `max_len`.
pub fn encode_sequence<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    max_len: usize,
) -> Vec<usize> {
    let mut out: Vec<usize> = tokens
        .iter()
        .take(max_len)
        .map(|t| vocab.get(t.as_ref()).map_or(0, |i| i + 1))
        .collect();
    out.resize(max_len, 0);
    out
}

/// Contiguous windows of length `n` with their counts. `n == 0` yields
/// nothing.
pub fn ngrams<T: Clone + Ord>(seq: &[T], n: usize) -> BTreeMap<Vec<T>, u64> {
    let mut out = BTreeMap::new();
    if n == 0 {
        return out;
    }
    for w in seq.windows(n) {
        *out.entry(w.to_vec()).or_insert(0) += 1;
    }
    out
}

pub const NGRAM_SEP: &str = "|";

/// [`ngrams`] keyed by the tokens joined with `|`.
pub fn ngram_counts<S: AsRef<str>>(seq: &[S], n: usize) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    if n == 0 {
        return out;
    }
    for w in seq.windows(n) {
        let key = w
            .iter()
            .map(AsRef::as_ref)
            .collect::<Vec<_>>()
            .join(NGRAM_SEP);
        *out.entry(key).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apk::method::MethodRef;
    use crate::encoding::vocab::ValueKind;

    fn graph(nodes: &[&str], edges: &[(usize, usize)], entry: &[usize]) -> CallGraph {
        CallGraph {
            nodes: nodes
                .iter()
                .map(|s| s.parse::<MethodRef>().unwrap())
                .collect(),
            edges: edges.to_vec(),
            entry_points: entry.to_vec(),
        }
    }

    fn routes(g: &CallGraph) -> Vec<String> {
        extract_api_routes(g, &PlatformPrefixes::default(), DEFAULT_ROUTE_CAP).unwrap()
    }

    #[test]
    fn chain_keeps_platform_only() {
        let g = graph(
            &["com.a.Main.e()V", "com.a.U.u()V", "android.util.Log.a()V"],
            &[(0, 1), (1, 2)],
            &[0],
        );
        assert_eq!(routes(&g), vec!["android.util.Log.a()V"]);
    }

    #[test]
    fn two_children_in_edge_order() {
        let g = graph(
            &[
                "com.a.Main.e()V",
                "java.io.File.a1()V",
                "java.io.File.a2()V",
            ],
            &[(0, 1), (0, 2)],
            &[0],
        );
        assert_eq!(routes(&g), vec!["java.io.File.a1()V", "java.io.File.a2()V"]);
        let g = graph(
            &[
                "com.a.Main.e()V",
                "java.io.File.a1()V",
                "java.io.File.a2()V",
            ],
            &[(0, 2), (0, 1)],
            &[0],
        );
        assert_eq!(routes(&g), vec!["java.io.File.a2()V", "java.io.File.a1()V"]);
    }

    #[test]
    fn self_loop_terminates() {
        let g = graph(&["android.a.B.a()V"], &[(0, 0)], &[0]);
        assert_eq!(routes(&g), vec!["android.a.B.a()V"]);
    }

    #[test]
    fn diamond_repeats_shared_suffix() {
        // e -> x, e -> y, x -> a, y -> a
        let g = graph(
            &[
                "com.a.E.e()V",
                "java.a.X.x()V",
                "java.a.Y.y()V",
                "android.a.A.a()V",
            ],
            &[(0, 1), (0, 2), (1, 3), (2, 3)],
            &[0],
        );
        assert_eq!(
            routes(&g),
            vec![
                "java.a.X.x()V",
                "android.a.A.a()V",
                "java.a.Y.y()V",
                "android.a.A.a()V"
            ]
        );
    }

    #[test]
    fn route_cap() {
        // Layers of two parallel nodes give 2^k routes.
        let k = 12;
        let mut nodes = vec!["com.a.E.e()V".to_string()];
        let mut edges = Vec::new();
        let mut prev = vec![0];
        for layer in 0..k {
            let a = nodes.len();
            nodes.push(format!("java.a.L{layer}.a()V"));
            nodes.push(format!("java.a.L{layer}.b()V"));
            for &p in &prev {
                edges.push((p, a));
                edges.push((p, a + 1));
            }
            prev = vec![a, a + 1];
        }
        let refs: Vec<&str> = nodes.iter().map(String::as_str).collect();
        let g = graph(&refs, &edges, &[0]);
        assert_eq!(
            extract_api_routes(&g, &PlatformPrefixes::default(), 1000),
            Err(EncodingError::RouteExplosion(1000))
        );
        assert_eq!(routes(&g).len(), (1 << k) * k);
    }

    #[test]
    fn sequence_examples() {
        let v = Vocabulary::new(
            ["a", "b", "c", "d"].map(String::from).to_vec(),
            ValueKind::Count,
        )
        .unwrap();
        assert_eq!(
            encode_sequence(&["a", "c", "a", "d"], &v, 4),
            vec![1, 3, 1, 4]
        );
        assert_eq!(
            encode_sequence(&["d", "c", "b", "a"], &v, 4),
            vec![4, 3, 2, 1]
        );
        assert_eq!(encode_sequence::<&str>(&[], &v, 3), vec![0, 0, 0]);
        assert_eq!(encode_sequence(&["a", "zz", "b"], &v, 2), vec![1, 0]);
    }

    #[test]
    fn ngram_examples() {
        let s = ["op1", "op2", "op3", "op4"];
        let bi = ngram_counts(&s, 2);
        assert_eq!(
            bi.keys().collect::<Vec<_>>(),
            vec!["op1|op2", "op2|op3", "op3|op4"]
        );
        assert_eq!(ngrams(&s, 1).len(), 4);
        assert!(ngrams(&s[..3], 5).is_empty());
        assert!(ngrams(&s, 0).is_empty());
    }
}
