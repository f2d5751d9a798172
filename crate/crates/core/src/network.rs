//! Directed road network with integer travel times and HOV lane membership.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::io::Read;

use serde::Deserialize;

use crate::error::NetworkError;
use crate::{NodeId, Seconds};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub travel_time: Seconds,
    pub hov: bool,
}

/// A simple path together with its total travel time.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PathResult {
    pub total_time: Seconds,
    pub nodes: Vec<NodeId>,
}

/// Immutable directed road graph.
///
/// Node and edge order follow the input; adjacency lists are sorted by head
/// (resp. tail) id so that every traversal is deterministic.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<NodeId, usize>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    edge_lookup: HashMap<(NodeId, NodeId), usize>,
}

impl RoadNetwork {
    /// Builds and validates a network.
    ///
    /// When `hov_nodes` is given and no edge carries an HOV flag, the HOV edge
    /// set becomes the subgraph induced by those nodes. If both forms are
    /// present the per-edge flags win.
    pub fn new(
        nodes: Vec<Node>,
        mut edges: Vec<Edge>,
        hov_nodes: Option<&BTreeSet<NodeId>>,
    ) -> Result<Self, NetworkError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (k, n) in nodes.iter().enumerate() {
            if index.insert(n.id, k).is_some() {
                return Err(NetworkError::DuplicateNode(n.id));
            }
        }
        let mut edge_lookup = HashMap::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            for end in [e.tail, e.head] {
                if !index.contains_key(&end) {
                    return Err(NetworkError::DanglingEndpoint {
                        tail: e.tail,
                        head: e.head,
                        node: end,
                    });
                }
            }
            if e.travel_time < 1 {
                return Err(NetworkError::NonPositiveTravelTime {
                    tail: e.tail,
                    head: e.head,
                    travel_time: e.travel_time,
                });
            }
            if e.tail == e.head {
                return Err(NetworkError::SelfLoop(e.tail));
            }
            if edge_lookup.insert((e.tail, e.head), k).is_some() {
                return Err(NetworkError::DuplicateEdge {
                    tail: e.tail,
                    head: e.head,
                });
            }
        }
        if let Some(hov_nodes) = hov_nodes {
            if let Some(&missing) = hov_nodes.iter().find(|n| !index.contains_key(n)) {
                return Err(NetworkError::UnknownNode(missing));
            }
            if edges.iter().any(|e| e.hov) {
                log::warn!("both HOV node list and per-edge HOV flags given; using the edge flags");
            } else {
                for e in &mut edges {
                    e.hov = hov_nodes.contains(&e.tail) && hov_nodes.contains(&e.head);
                }
            }
        }

        let mut out_adj = vec![Vec::new(); nodes.len()];
        let mut in_adj = vec![Vec::new(); nodes.len()];
        for (k, e) in edges.iter().enumerate() {
            out_adj[index[&e.tail]].push(k);
            in_adj[index[&e.head]].push(k);
        }
        for adj in &mut out_adj {
            adj.sort_by_key(|&k| edges[k].head);
        }
        for adj in &mut in_adj {
            adj.sort_by_key(|&k| edges[k].tail);
        }

        Ok(Self {
            nodes,
            edges,
            index,
            out_adj,
            in_adj,
            edge_lookup,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.index.get(&id).map(|&k| &self.nodes[k])
    }

    pub fn edge(&self, tail: NodeId, head: NodeId) -> Option<&Edge> {
        self.edge_lookup.get(&(tail, head)).map(|&k| &self.edges[k])
    }

    /// Travel time of the directed edge `tail -> head`, if present.
    pub fn travel_time(&self, tail: NodeId, head: NodeId) -> Option<Seconds> {
        self.edge(tail, head).map(|e| e.travel_time)
    }

    pub fn is_hov(&self, tail: NodeId, head: NodeId) -> bool {
        self.edge(tail, head).is_some_and(|e| e.hov)
    }

    pub fn hov_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.hov)
    }

    /// Outgoing edges of `id`, sorted by head id.
    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        let adj = self.index.get(&id).map(|&k| self.out_adj[k].as_slice()).unwrap_or(&[]);
        adj.iter().map(move |&k| &self.edges[k])
    }

    /// Incoming edges of `id`, sorted by tail id.
    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        let adj = self.index.get(&id).map(|&k| self.in_adj[k].as_slice()).unwrap_or(&[]);
        adj.iter().map(move |&k| &self.edges[k])
    }

    fn check(&self, id: NodeId) -> Result<usize, NetworkError> {
        self.index.get(&id).copied().ok_or(NetworkError::UnknownNode(id))
    }

    /// Shortest travel time `i -> j`; `None` when `j` is unreachable.
    pub fn shortest_travel_time(&self, i: NodeId, j: NodeId) -> Result<Option<Seconds>, NetworkError> {
        self.check(i)?;
        let target = self.check(j)?;
        Ok(self.dijkstra(i, Direction::Forward, &Blocked::default())[target])
    }

    /// Shortest travel times from `source` to every node, indexed like
    /// [`RoadNetwork::nodes`].
    pub fn times_from(&self, source: NodeId) -> Result<DistanceMap<'_>, NetworkError> {
        self.check(source)?;
        Ok(DistanceMap {
            net: self,
            dist: self.dijkstra(source, Direction::Forward, &Blocked::default()),
        })
    }

    /// Shortest travel times from every node to `target`.
    pub fn times_to(&self, target: NodeId) -> Result<DistanceMap<'_>, NetworkError> {
        self.check(target)?;
        Ok(DistanceMap {
            net: self,
            dist: self.dijkstra(target, Direction::Reverse, &Blocked::default()),
        })
    }

    fn dijkstra(&self, source: NodeId, dir: Direction, blocked: &Blocked) -> Vec<Option<Seconds>> {
        let mut dist: Vec<Option<Seconds>> = vec![None; self.nodes.len()];
        let src = self.index[&source];
        if blocked.nodes.contains(&source) {
            return dist;
        }
        dist[src] = Some(0);
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0, src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u].is_some_and(|best| d > best) {
                continue;
            }
            let adj = match dir {
                Direction::Forward => &self.out_adj[u],
                Direction::Reverse => &self.in_adj[u],
            };
            for &k in adj {
                let e = &self.edges[k];
                if blocked.edges.contains(&(e.tail, e.head)) {
                    continue;
                }
                let next = match dir {
                    Direction::Forward => e.head,
                    Direction::Reverse => e.tail,
                };
                if blocked.nodes.contains(&next) {
                    continue;
                }
                let v = self.index[&next];
                let nd = d + e.travel_time;
                if dist[v].is_none_or(|cur| nd < cur) {
                    dist[v] = Some(nd);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }

    /// Shortest `source -> target` path avoiding `blocked`; among equal-time
    /// paths the lexicographically smallest node sequence is returned.
    fn lex_shortest_path(&self, source: NodeId, target: NodeId, blocked: &Blocked) -> Option<PathResult> {
        let to_target = self.dijkstra(target, Direction::Reverse, blocked);
        let total = to_target[self.index[&source]]?;
        let mut nodes = vec![source];
        let mut cur = source;
        while cur != target {
            let rem = to_target[self.index[&cur]].expect("on a shortest path");
            let next = self.out_adj[self.index[&cur]]
                .iter()
                .map(|&k| &self.edges[k])
                .filter(|e| !blocked.edges.contains(&(e.tail, e.head)) && !blocked.nodes.contains(&e.head))
                .find(|e| to_target[self.index[&e.head]] == Some(rem - e.travel_time))
                .expect("shortest-path successor exists");
            cur = next.head;
            nodes.push(cur);
        }
        Some(PathResult {
            total_time: total,
            nodes,
        })
    }

    /// Yen's k shortest loopless paths, in nondecreasing time with ties broken
    /// by lexicographic node sequence.
    pub fn k_shortest_paths(&self, i: NodeId, j: NodeId, k: usize) -> Result<Vec<PathResult>, NetworkError> {
        self.check(i)?;
        self.check(j)?;
        if k == 0 || i == j {
            return Err(NetworkError::InvalidPathQuery { from: i, to: j, k });
        }
        let mut found: Vec<PathResult> = Vec::new();
        let Some(first) = self.lex_shortest_path(i, j, &Blocked::default()) else {
            return Ok(found);
        };
        found.push(first);
        let mut candidates: BTreeSet<PathResult> = BTreeSet::new();

        while found.len() < k {
            let last = found.last().expect("non-empty").clone();
            for spur_idx in 0..last.nodes.len() - 1 {
                let spur = last.nodes[spur_idx];
                let root = &last.nodes[..=spur_idx];
                let mut blocked = Blocked::default();
                for p in &found {
                    if p.nodes.len() > spur_idx + 1 && &p.nodes[..=spur_idx] == root {
                        blocked.edges.insert((p.nodes[spur_idx], p.nodes[spur_idx + 1]));
                    }
                }
                blocked.nodes.extend(root[..spur_idx].iter().copied());
                if let Some(spur_path) = self.lex_shortest_path(spur, j, &blocked) {
                    let root_time: Seconds = root
                        .windows(2)
                        .map(|w| self.travel_time(w[0], w[1]).expect("root edge"))
                        .sum();
                    let mut nodes = root[..spur_idx].to_vec();
                    nodes.extend(spur_path.nodes);
                    candidates.insert(PathResult {
                        total_time: root_time + spur_path.total_time,
                        nodes,
                    });
                }
            }
            match candidates.pop_first() {
                Some(next) => found.push(next),
                None => break,
            }
        }
        Ok(found)
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Reverse,
}

#[derive(Default)]
struct Blocked {
    nodes: HashSet<NodeId>,
    edges: HashSet<(NodeId, NodeId)>,
}

/// Result of a one-to-all (or all-to-one) shortest path computation.
#[derive(Debug, Clone)]
pub struct DistanceMap<'a> {
    net: &'a RoadNetwork,
    dist: Vec<Option<Seconds>>,
}

impl DistanceMap<'_> {
    pub fn get(&self, id: NodeId) -> Option<Seconds> {
        self.net.index.get(&id).and_then(|&k| self.dist[k])
    }
}

#[derive(Debug, Deserialize)]
struct NodeRow {
    node_id: NodeId,
    lat: f64,
    lon: f64,
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    tail: NodeId,
    head: NodeId,
    travel_time_s: Seconds,
    hov: u8,
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source)
}

fn malformed(file: &'static str, err: &csv::Error) -> NetworkError {
    NetworkError::Malformed {
        file,
        line: err.position().map_or(0, |p| p.line()),
        message: err.to_string(),
    }
}

/// Loads a network from the nodes/edges CSV files and an optional HOV node
/// list (one node id per line).
pub fn load_network<N: Read, E: Read, H: Read>(
    nodes_source: N,
    edges_source: E,
    hov_nodes_source: Option<H>,
) -> Result<RoadNetwork, NetworkError> {
    let mut nodes = Vec::new();
    for row in csv_reader(nodes_source).deserialize::<NodeRow>() {
        let row = row.map_err(|e| malformed("nodes", &e))?;
        nodes.push(Node {
            id: row.node_id,
            lat: row.lat,
            lon: row.lon,
        });
    }

    let mut edges = Vec::new();
    let mut rdr = csv_reader(edges_source);
    let headers = rdr.headers().map_err(|e| malformed("edges", &e))?.clone();
    for record in rdr.records() {
        let record = record.map_err(|e| malformed("edges", &e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row: EdgeRow = record.deserialize(Some(&headers)).map_err(|e| NetworkError::Malformed {
            file: "edges",
            line,
            message: e.to_string(),
        })?;
        let hov = match row.hov {
            0 => false,
            1 => true,
            other => {
                return Err(NetworkError::Malformed {
                    file: "edges",
                    line,
                    message: format!("hov must be 0 or 1, got {other}"),
                })
            }
        };
        edges.push(Edge {
            tail: row.tail,
            head: row.head,
            travel_time: row.travel_time_s,
            hov,
        });
    }

    let hov_nodes = match hov_nodes_source {
        Some(mut src) => {
            let mut text = String::new();
            src.read_to_string(&mut text).map_err(|e| NetworkError::Malformed {
                file: "hov-nodes",
                line: 0,
                message: e.to_string(),
            })?;
            let mut set = BTreeSet::new();
            for (k, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let id = line.parse().map_err(|_| NetworkError::Malformed {
                    file: "hov-nodes",
                    line: k as u64 + 1,
                    message: format!("not a node id: {line:?}"),
                })?;
                set.insert(id);
            }
            Some(set)
        }
        None => None,
    };

    RoadNetwork::new(nodes, edges, hov_nodes.as_ref())
}

/// Writes the network back out as nodes and edges CSV text.
pub fn write_network<N: std::io::Write, E: std::io::Write>(
    net: &RoadNetwork,
    mut nodes_sink: N,
    mut edges_sink: E,
) -> std::io::Result<()> {
    writeln!(nodes_sink, "node_id,lat,lon")?;
    for n in net.nodes() {
        writeln!(nodes_sink, "{},{},{}", n.id, n.lat, n.lon)?;
    }
    writeln!(edges_sink, "tail,head,travel_time_s,hov")?;
    for e in net.edges() {
        writeln!(edges_sink, "{},{},{},{}", e.tail, e.head, e.travel_time, u8::from(e.hov))?;
    }
    Ok(())
}
