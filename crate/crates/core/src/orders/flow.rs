//! Dinic maximum flow with floating-point capacities.

/// Residual capacities at or below this are treated as saturated.
const CAP_EPS: f64 = 1e-15;

struct Edge {
    to: usize,
    cap: f64,
}

pub(crate) struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self { edges: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0 });
    }

    fn levels(&self, s: usize) -> Vec<i64> {
        let mut level = vec![-1; self.adj.len()];
        let mut queue = std::collections::VecDeque::new();
        level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let edge = &self.edges[e];
                if edge.cap > CAP_EPS && level[edge.to] < 0 {
                    level[edge.to] = level[u] + 1;
                    queue.push_back(edge.to);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, pushed: f64, level: &[i64], iter: &mut [usize]) -> f64 {
        if u == t {
            return pushed;
        }
        while iter[u] < self.adj[u].len() {
            let e = self.adj[u][iter[u]];
            let (to, cap) = (self.edges[e].to, self.edges[e].cap);
            if cap > CAP_EPS && level[to] == level[u] + 1 {
                let got = self.augment(to, t, pushed.min(cap), level, iter);
                if got > 0.0 {
                    self.edges[e].cap -= got;
                    self.edges[e ^ 1].cap += got;
                    return got;
                }
            }
            iter[u] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(s);
            if level[t] < 0 {
                return total;
            }
            let mut iter = vec![0usize; self.adj.len()];
            loop {
                let f = self.augment(s, t, f64::INFINITY, &level, &mut iter);
                if f <= 0.0 {
                    break;
                }
                total += f;
            }
        }
    }
}

/// Maximum flow from `source` to `sink` in a graph given as `(from, to, capacity)`.
pub fn max_flow(nodes: usize, edges: &[(usize, usize, f64)], source: usize, sink: usize) -> f64 {
    let mut g = FlowNetwork::new(nodes);
    for &(a, b, c) in edges {
        g.add_edge(a, b, c);
    }
    g.max_flow(source, sink)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS figure 26.1: max flow 23.
        let edges = [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (1, 3, 12.0),
            (2, 1, 4.0),
            (2, 4, 14.0),
            (3, 2, 9.0),
            (3, 5, 20.0),
            (4, 3, 7.0),
            (4, 5, 4.0),
        ];
        assert!((max_flow(6, &edges, 0, 5) - 23.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_sink() {
        assert_eq!(max_flow(3, &[(0, 1, 1.0)], 0, 2), 0.0);
    }
}
