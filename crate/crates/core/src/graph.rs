//! Transition-structure analysis: reachability graphs over states, forward
//! reachability, strongly connected components (Kosaraju's algorithm) with a
//! topological numbering, and detection of states that can reach a goal with
//! probability one.
//!
//! Component ids are numbered so that descendants come first: for every edge
//! `s1 -> s2` across components, `id(s2) < id(s1)`. Solving components in
//! increasing id order therefore solves everything a component depends on
//! before the component itself.

use crate::mdp::{Mdp, StateId, StateSet};

/// A directed graph over the state space. Vertices are state ids; only the
/// states listed in `vertices` take part (the rest have no edges). Adjacency
/// lists are deduplicated and never contain self-loops.
#[derive(Clone, Debug)]
pub struct StateGraph {
    num_states: usize,
    vertices: Vec<StateId>,
    in_graph: Vec<bool>,
    adj: Vec<Vec<u32>>,
}

impl StateGraph {
    /// Number of vertices actually in the graph.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn vertices(&self) -> &[StateId] {
        &self.vertices
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.in_graph[s.idx()]
    }

    pub fn successors(&self, s: StateId) -> &[u32] {
        &self.adj[s.idx()]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    fn reversed_adj(&self) -> Vec<Vec<u32>> {
        let mut rev = vec![Vec::new(); self.num_states];
        for &s in &self.vertices {
            for &t in &self.adj[s.idx()] {
                rev[t as usize].push(s.0);
            }
        }
        rev
    }
}

/// Builds the graph induced by the actions that pass `filter`, restricted to
/// `restrict` when given. An edge `s -> t` exists iff some kept action of
/// `s` reaches `t` with positive probability; goal vertices have no
/// outgoing edges since goals carry no actions.
pub fn build_graph(
    mdp: &Mdp,
    mut filter: impl FnMut(StateId, u32) -> bool,
    restrict: Option<&StateSet>,
) -> StateGraph {
    let n = mdp.num_states();
    let vertices: Vec<StateId> = match restrict {
        Some(set) => set.members().to_vec(),
        None => mdp.states().collect(),
    };
    let member = |s: StateId| restrict.map_or(true, |set| set.contains(s));
    let mut adj = vec![Vec::new(); n];
    let mut in_graph = vec![false; n];
    for &s in &vertices {
        in_graph[s.idx()] = true;
        let out = &mut adj[s.idx()];
        for (slot, act) in mdp.actions(s).iter().enumerate() {
            if !filter(s, slot as u32) {
                continue;
            }
            for &(succ, _) in &act.transitions {
                if succ != s && member(succ) {
                    out.push(succ.0);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }
    StateGraph {
        num_states: n,
        vertices,
        in_graph,
        adj,
    }
}

/// Strongly connected components plus the topological numbering described in
/// the module docs. `id` is 1-based; 0 marks states outside the graph.
#[derive(Clone, Debug)]
pub struct SccDecomposition {
    component_count: usize,
    id: Vec<u32>,
    members: Vec<Vec<StateId>>,
}

impl SccDecomposition {
    pub fn component_count(&self) -> usize {
        self.component_count
    }

    /// Component id of a state (1-based), or 0 if the state was not a
    /// vertex of the decomposed graph.
    pub fn id_of(&self, s: StateId) -> u32 {
        self.id[s.idx()]
    }

    /// Members of component `cid`, ascending by state id.
    pub fn members(&self, cid: u32) -> &[StateId] {
        &self.members[cid as usize - 1]
    }

    pub fn max_component_size(&self) -> usize {
        self.members.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Kosaraju's two-pass algorithm: a depth-first finish ordering of the
/// graph, then a traversal of the transpose in reverse finish order. Both
/// passes use explicit stacks. Runs in time linear in vertices plus edges.
pub fn kosaraju_scc(graph: &StateGraph) -> SccDecomposition {
    let n = graph.num_states();
    let mut finish: Vec<u32> = Vec::with_capacity(graph.vertex_count());
    let mut visited = vec![false; n];

    // Pass 1: record vertices in increasing finish time.
    // Stack frames are (vertex, next successor index to expand).
    let mut stack: Vec<(u32, usize)> = Vec::new();
    for &root in graph.vertices() {
        if visited[root.idx()] {
            continue;
        }
        stack.push((root.0, 0));
        while let Some((v, ei)) = stack.pop() {
            if ei == 0 {
                if visited[v as usize] {
                    continue;
                }
                visited[v as usize] = true;
            }
            if let Some(&w) = graph.adj[v as usize].get(ei) {
                stack.push((v, ei + 1));
                if !visited[w as usize] {
                    stack.push((w, 0));
                }
            } else {
                finish.push(v);
            }
        }
    }

    // Pass 2: sweep the transpose in decreasing finish time. Components are
    // discovered ancestors-first, so numbering them in reverse discovery
    // order gives descendants the smaller ids.
    let rev = graph.reversed_adj();
    let mut discovered = vec![false; n];
    let mut components: Vec<Vec<StateId>> = Vec::new();
    let mut dfs: Vec<u32> = Vec::new();
    for &root in finish.iter().rev() {
        if discovered[root as usize] {
            continue;
        }
        let mut comp = Vec::new();
        discovered[root as usize] = true;
        dfs.push(root);
        while let Some(v) = dfs.pop() {
            comp.push(StateId(v));
            for &w in &rev[v as usize] {
                if !discovered[w as usize] {
                    discovered[w as usize] = true;
                    dfs.push(w);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }

    let total = components.len();
    let mut id = vec![0u32; n];
    let mut members = vec![Vec::new(); total];
    for (order, comp) in components.into_iter().enumerate() {
        let cid = (total - order) as u32;
        for &s in &comp {
            id[s.idx()] = cid;
        }
        members[cid as usize - 1] = comp;
    }

    SccDecomposition {
        component_count: total,
        id,
        members,
    }
}

/// States reachable from `from` through actions passing `filter`, including
/// `from` itself.
pub fn reachable_states(
    mdp: &Mdp,
    from: StateId,
    mut filter: impl FnMut(StateId, u32) -> bool,
) -> StateSet {
    let n = mdp.num_states();
    let mut seen = vec![false; n];
    let mut members = Vec::new();
    let mut stack = vec![from];
    seen[from.idx()] = true;
    while let Some(s) = stack.pop() {
        members.push(s);
        for (slot, act) in mdp.actions(s).iter().enumerate() {
            if !filter(s, slot as u32) {
                continue;
            }
            for &(succ, _) in &act.transitions {
                if !seen[succ.idx()] {
                    seen[succ.idx()] = true;
                    stack.push(succ);
                }
            }
        }
    }
    StateSet::from_members(n, members)
}

/// States that can reach a goal with probability one under some policy,
/// i.e. the states whose optimal value is finite.
///
/// Iterates the standard pruning: drop actions with a successor outside the
/// candidate set, drop states that no longer reach a goal through the
/// remaining actions, repeat until stable. Graph reachability alone is not
/// enough: a state may reach a goal along some path while every one of its
/// actions still risks an inescapable dead end.
pub fn proper_states(mdp: &Mdp) -> Vec<bool> {
    let n = mdp.num_states();
    let mut candidate = vec![true; n];
    loop {
        // Backward reachability from the goals over actions whose
        // successors all stay inside the candidate set.
        let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n];
        for s in mdp.states() {
            if !candidate[s.idx()] {
                continue;
            }
            for act in mdp.actions(s) {
                if act.transitions.iter().all(|&(t, _)| candidate[t.idx()]) {
                    for &(t, _) in &act.transitions {
                        rev[t.idx()].push(s.0);
                    }
                }
            }
        }
        let mut reached = vec![false; n];
        let mut stack: Vec<u32> = Vec::new();
        for &g in mdp.goals() {
            if candidate[g.idx()] {
                reached[g.idx()] = true;
                stack.push(g.0);
            }
        }
        while let Some(v) = stack.pop() {
            for &p in &rev[v as usize] {
                if !reached[p as usize] {
                    reached[p as usize] = true;
                    stack.push(p);
                }
            }
        }
        if reached == candidate {
            return candidate;
        }
        candidate = reached;
    }
}
