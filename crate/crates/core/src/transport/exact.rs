//! Exact discrete optimal transport by the primal network simplex method on
//! the complete bipartite graph between the supports of the two marginals.
//!
//! The spanning-tree bookkeeping (parent, thread, subtree sizes, last
//! successors) follows the classical strongly-feasible-tree implementation,
//! which rules out cycling under degeneracy. Arcs are implicit: arc
//! `a = s * nt + t` joins the `s`-th source to the `t`-th sink. Pricing scans
//! fixed-size blocks in a fixed cyclic order, so runs are deterministic.

use super::cost::CostMatrix;
use crate::error::{Error, Result};

const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Solves `min sum c_ij p_ij` over couplings of `supply` and `demand`; returns
/// the nonzero entries `(i, j, mass)`.
pub(crate) fn network_simplex(
    supply: &[f64],
    demand: &[f64],
    cost: &CostMatrix,
) -> Result<Vec<(usize, usize, f64)>> {
    let src: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > 0.0).collect();
    let snk: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > 0.0).collect();
    if src.is_empty() || snk.is_empty() {
        return Ok(Vec::new());
    }
    if src.len() == 1 || snk.len() == 1 {
        // Only one coupling exists.
        let mut out = Vec::new();
        if src.len() == 1 {
            for &j in &snk {
                out.push((src[0], j, demand[j]));
            }
        } else {
            for &i in &src {
                out.push((i, snk[0], supply[i]));
            }
        }
        return Ok(out);
    }
    let mut ns = Simplex::new(&src, &snk, supply, demand, cost);
    ns.run()?;
    let mut out = Vec::new();
    let nt = snk.len();
    for (a, &f) in ns.flow[..ns.arc_num].iter().enumerate() {
        if f > 0.0 {
            out.push((src[a / nt], snk[a % nt], f));
        }
    }
    Ok(out)
}

struct Simplex<'a> {
    src: &'a [usize],
    snk: &'a [usize],
    cost_m: &'a CostMatrix,
    ns: usize,
    nt: usize,
    node_num: usize,
    arc_num: usize,
    root: usize,
    tol: f64,

    flow: Vec<f64>,
    state: Vec<i8>,
    // Artificial arc of node u is arc_num + u: source/target stored explicitly.
    art_src: Vec<usize>,
    art_tgt: Vec<usize>,
    art_cost_v: Vec<f64>,

    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,

    next_arc: usize,
    block_size: usize,

    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

const NONE: usize = usize::MAX;

impl<'a> Simplex<'a> {
    fn new(
        src: &'a [usize],
        snk: &'a [usize],
        supply: &[f64],
        demand: &[f64],
        cost_m: &'a CostMatrix,
    ) -> Self {
        let ns = src.len();
        let nt = snk.len();
        let node_num = ns + nt;
        let arc_num = ns * nt;
        let root = node_num;
        let mut max_c: f64 = 0.0;
        for &i in src {
            for &j in snk {
                max_c = max_c.max(cost_m.get(i, j));
            }
        }
        let art_cost = (max_c + 1.0) * node_num as f64;
        let tol = 1e-13 * (max_c + 1.0);

        let mut sup = vec![0.0; node_num + 1];
        for (k, &i) in src.iter().enumerate() {
            sup[k] = supply[i];
        }
        for (k, &j) in snk.iter().enumerate() {
            sup[ns + k] = -demand[j];
        }

        let total = arc_num + node_num;
        let mut s = Simplex {
            src,
            snk,
            cost_m,
            ns,
            nt,
            node_num,
            arc_num,
            root,
            tol,
            flow: vec![0.0; total],
            state: vec![STATE_LOWER; total],
            art_src: vec![0; node_num],
            art_tgt: vec![0; node_num],
            art_cost_v: vec![0.0; node_num],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            pred_dir: vec![0; node_num + 1],
            pi: vec![0.0; node_num + 1],
            dirty_revs: Vec::new(),
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt().ceil() as usize).max(10),
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };
        s.parent[root] = NONE;
        s.pred[root] = NONE;
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        s.pi[root] = 0.0;
        for u in 0..node_num {
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.state[e] = STATE_TREE;
            if sup[u] >= 0.0 {
                s.pred_dir[u] = DIR_UP;
                s.pi[u] = 0.0;
                s.art_src[u] = u;
                s.art_tgt[u] = root;
                s.flow[e] = sup[u];
                s.art_cost_v[u] = 0.0;
            } else {
                s.pred_dir[u] = DIR_DOWN;
                s.pi[u] = art_cost;
                s.art_src[u] = root;
                s.art_tgt[u] = u;
                s.flow[e] = -sup[u];
                s.art_cost_v[u] = art_cost;
            }
        }
        s
    }

    #[inline]
    fn source(&self, a: usize) -> usize {
        if a < self.arc_num {
            a / self.nt
        } else {
            self.art_src[a - self.arc_num]
        }
    }

    #[inline]
    fn target(&self, a: usize) -> usize {
        if a < self.arc_num {
            self.ns + a % self.nt
        } else {
            self.art_tgt[a - self.arc_num]
        }
    }

    #[inline]
    fn cost(&self, a: usize) -> f64 {
        if a < self.arc_num {
            self.cost_m.get(self.src[a / self.nt], self.snk[a % self.nt])
        } else {
            self.art_cost_v[a - self.arc_num]
        }
    }

    fn find_entering_arc(&mut self) -> bool {
        let mut min = -self.tol;
        let mut cnt = self.block_size;
        let mut found = NONE;
        let nt = self.nt;
        let mut e = self.next_arc;
        loop {
            // Arcs are scanned row by row, so the source potential is shared.
            let s = e / nt;
            let t = e % nt;
            if self.state[e] != STATE_TREE {
                let c = self.cost_m.get(self.src[s], self.snk[t]) + self.pi[s] - self.pi[self.ns + t];
                if c < min {
                    min = c;
                    found = e;
                }
            }
            e += 1;
            if e == self.arc_num {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found != NONE {
                    break;
                }
                cnt = self.block_size;
            }
            if e == self.next_arc {
                break;
            }
        }
        if found == NONE {
            return false;
        }
        self.in_arc = found;
        self.next_arc = e;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// All arcs are uncapacitated, so only arcs whose flow decreases around
    /// the cycle can leave. Returns false if the cycle is unbounded.
    fn find_leaving_arc(&mut self) -> bool {
        // Entering arcs are always at their lower bound.
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP {
                let d = self.flow[self.pred[u]].max(0.0);
                if d < delta {
                    delta = d;
                    self.u_out = u;
                    result = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN {
                let d = self.flow[self.pred[u]].max(0.0);
                if d <= delta {
                    delta = d;
                    self.u_out = u;
                    result = 2;
                }
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            self.flow[self.in_arc] += val;
            let mut u = self.source(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.flow[out] = 0.0;
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) { DIR_UP } else { DIR_DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue =
                if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source(self.in_arc) { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }
        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in]
            - self.pi[self.u_in]
            - self.pred_dir[self.u_in] as f64 * self.cost(self.in_arc);
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Recomputes all potentials from the tree to shed accumulated rounding.
    fn refresh_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut u = self.thread[self.root];
        while u != self.root {
            let p = self.parent[u];
            self.pi[u] = self.pi[p] - self.pred_dir[u] as f64 * self.cost(self.pred[u]);
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<()> {
        let max_pivots = 200 * (self.arc_num + self.node_num) + 10_000;
        let mut pivots = 0usize;
        loop {
            if !self.find_entering_arc() {
                // Confirm optimality with fresh potentials before stopping.
                self.refresh_potentials();
                if !self.find_entering_arc() {
                    break;
                }
            }
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::Iteration {
                    what: "network simplex (unbounded cycle)".into(),
                    iters: pivots,
                    residual: f64::INFINITY,
                });
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            pivots += 1;
            if pivots % 1024 == 0 {
                self.refresh_potentials();
            }
            if pivots > max_pivots {
                return Err(Error::Iteration {
                    what: "network simplex".into(),
                    iters: pivots,
                    residual: f64::NAN,
                });
            }
        }
        Ok(())
    }
}
