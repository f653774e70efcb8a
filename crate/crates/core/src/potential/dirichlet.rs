//! Discrete Dirichlet problems for finite Markov chains: hitting
//! probabilities `h(x) = P_x(hit T before K)`, or more generally harmonic
//! extensions of boundary payoffs.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::lattice::{neighbors, Edge, Site};

/// Systems at most this large fall back to the dense solver when the
/// iterative one fails.
pub const DENSE_FALLBACK_LIMIT: usize = 5_000;

/// Stopping tolerance on the sup-norm residual of `(I - P) h = b`.
pub const RESIDUAL_TOL: f64 = 1e-13;

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Node {
    /// Unknown value, harmonic for the transition kernel.
    Free,
    /// Absorbing with the given payoff.
    Fixed(f64),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Method {
    /// Iterative, with dense fallback below [`DENSE_FALLBACK_LIMIT`].
    Auto,
    Iterative,
    Dense,
    /// Direct elimination for chains whose unknowns only couple to their
    /// immediate predecessor and successor.
    Tridiagonal,
}

#[derive(Clone, Debug)]
pub struct DirichletProblem {
    nodes: Vec<Node>,
    /// Outgoing transition probabilities of each node (used for free nodes).
    trans: Vec<Vec<(usize, f64)>>,
    start: usize,
    labels: Option<Vec<Site>>,
    index: Option<FxHashMap<Site, usize>>,
}

#[derive(Clone, Debug)]
pub struct DirichletSolution {
    /// Value per node; NaN on free nodes that cannot reach an absorbing node.
    pub values: Vec<f64>,
    pub start_value: f64,
    /// Sup-norm of `h - P h` over free nodes.
    pub residual: f64,
    pub iterations: usize,
    pub method: Method,
}

impl DirichletProblem {
    /// General finite chain. `trans[i]` lists `(j, p_ij)` for free nodes.
    pub fn chain(nodes: Vec<Node>, trans: Vec<Vec<(usize, f64)>>, start: usize) -> Result<DirichletProblem> {
        if nodes.len() != trans.len() || start >= nodes.len() {
            return Err(Error::invalid("chain: node/transition size mismatch"));
        }
        for (i, row) in trans.iter().enumerate() {
            if let Node::Free = nodes[i] {
                let total: f64 = row.iter().map(|&(_, p)| p).sum();
                if row.iter().any(|&(j, p)| j >= nodes.len() || p < 0.0) || (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!("chain: row {i} is not a probability vector")));
                }
            }
        }
        Ok(DirichletProblem {
            nodes,
            trans,
            start,
            labels: None,
            index: None,
        })
    }

    /// SRW along the edges accepted by `open`, free on `free` sites; every
    /// other site reachable in one step must carry a payoff from `payoff`.
    pub fn on_graph<O, P>(dim: usize, free: &[Site], open: O, payoff: P, start: Site) -> Result<DirichletProblem>
    where
        O: Fn(Edge) -> bool,
        P: Fn(Site) -> Option<f64>,
    {
        let mut labels: Vec<Site> = Vec::with_capacity(free.len());
        let mut index: FxHashMap<Site, usize> = FxHashMap::default();
        let mut nodes = Vec::with_capacity(free.len());
        for &z in free {
            if index.insert(z, labels.len()).is_none() {
                labels.push(z);
                nodes.push(Node::Free);
            }
        }
        let mut trans: Vec<Vec<(usize, f64)>> = vec![Vec::new(); labels.len()];
        let n_free = labels.len();
        for i in 0..n_free {
            let z = labels[i];
            let mut row = Vec::with_capacity(2 * dim);
            for (k, y) in neighbors(z, dim).into_iter().enumerate() {
                if !open(Edge::incident(z, k)) {
                    continue;
                }
                let j = match index.get(&y) {
                    Some(&j) => j,
                    None => {
                        let g = payoff(y).ok_or_else(|| {
                            Error::invalid(format!("walk from {z:?} leaves the domain at {y:?}"))
                        })?;
                        let j = labels.len();
                        index.insert(y, j);
                        labels.push(y);
                        nodes.push(Node::Fixed(g));
                        trans.push(Vec::new());
                        j
                    }
                };
                row.push(j);
            }
            if row.is_empty() {
                return Err(Error::Disconnected);
            }
            let p = 1.0 / row.len() as f64;
            trans[i] = row.into_iter().map(|j| (j, p)).collect();
        }
        let start_idx = match index.get(&start) {
            Some(&i) => i,
            None => {
                let g = payoff(start).ok_or_else(|| Error::invalid("start site is outside the problem"))?;
                labels.push(start);
                nodes.push(Node::Fixed(g));
                trans.push(Vec::new());
                labels.len() - 1
            }
        };
        index.entry(start).or_insert(start_idx);
        Ok(DirichletProblem {
            nodes,
            trans,
            start: start_idx,
            labels: Some(labels),
            index: Some(index),
        })
    }

    /// SRW on Z^dim, free on `free`, absorbed elsewhere with `payoff`.
    pub fn on_lattice<P>(dim: usize, free: &[Site], payoff: P, start: Site) -> Result<DirichletProblem>
    where
        P: Fn(Site) -> Option<f64>,
    {
        DirichletProblem::on_graph(dim, free, |_| true, payoff, start)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn free_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Free)).count()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn labels(&self) -> Option<&[Site]> {
        self.labels.as_deref()
    }

    pub fn index_of(&self, z: Site) -> Option<usize> {
        self.index.as_ref()?.get(&z).copied()
    }

    pub fn with_start(mut self, start: usize) -> DirichletProblem {
        assert!(start < self.nodes.len());
        self.start = start;
        self
    }

    /// Free nodes from which some fixed node is reachable.
    fn solvable(&self) -> Vec<bool> {
        let n = self.nodes.len();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in self.trans.iter().enumerate() {
            if let Node::Free = self.nodes[i] {
                for &(j, p) in row {
                    if p > 0.0 {
                        rev[j].push(i);
                    }
                }
            }
        }
        let mut ok = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Fixed(_) = node {
                ok[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(j) = queue.pop_front() {
            for &i in &rev[j] {
                if !ok[i] {
                    ok[i] = true;
                    queue.push_back(i);
                }
            }
        }
        ok
    }

    /// Solves for the full field.
    pub fn solve(&self, method: Method) -> Result<DirichletSolution> {
        let ok = self.solvable();
        if !ok[self.start] {
            return Err(Error::Disconnected);
        }
        let sys = System::assemble(self, &ok);
        let (x, iterations, used) = match method {
            Method::Dense => (sys.solve_dense()?, 0, Method::Dense),
            Method::Tridiagonal => (sys.solve_tridiagonal()?, 0, Method::Tridiagonal),
            Method::Auto if sys.is_tridiagonal() => (sys.solve_tridiagonal()?, 0, Method::Tridiagonal),
            Method::Iterative => {
                let (x, it) = sys.solve_iterative()?;
                (x, it, Method::Iterative)
            }
            Method::Auto => match sys.solve_iterative() {
                Ok((x, it)) => (x, it, Method::Iterative),
                Err(e) if sys.n <= DENSE_FALLBACK_LIMIT => {
                    let _ = e;
                    (sys.solve_dense()?, 0, Method::Dense)
                }
                Err(e) => return Err(e),
            },
        };
        let mut values = vec![f64::NAN; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Fixed(g) = node {
                values[i] = *g;
            }
        }
        for (k, &i) in sys.free.iter().enumerate() {
            values[i] = x[k];
        }
        let residual = self.residual(&values);
        Ok(DirichletSolution {
            start_value: values[self.start],
            values,
            residual,
            iterations,
            method: used,
        })
    }

    /// `max |h(x) - sum_y p_xy h(y)|` over free nodes with finite values.
    pub fn residual(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Free = node {
                if !values[i].is_finite() {
                    continue;
                }
                let avg: f64 = self.trans[i].iter().map(|&(j, p)| p * values[j]).sum();
                worst = worst.max((values[i] - avg).abs());
            }
        }
        worst
    }
}

/// `P_start(hit T before K)` by SRW on Z^dim moving freely on `free`, with
/// `T` and `K` absorbing. Every step out of `free` must land in `T` or `K`.
pub fn solve_hit_probability(
    dim: usize,
    free: &[Site],
    target: &[Site],
    killing: &[Site],
    start: Site,
) -> Result<f64> {
    let t: rustc_hash::FxHashSet<Site> = target.iter().copied().collect();
    let k: rustc_hash::FxHashSet<Site> = killing.iter().copied().collect();
    if t.iter().any(|z| k.contains(z)) {
        return Err(Error::invalid("target and killing sets overlap"));
    }
    let free: Vec<Site> = free
        .iter()
        .copied()
        .filter(|z| !t.contains(z) && !k.contains(z))
        .collect();
    let payoff = |z: Site| {
        if t.contains(&z) {
            Some(1.0)
        } else if k.contains(&z) {
            Some(0.0)
        } else {
            None
        }
    };
    let p = DirichletProblem::on_lattice(dim, &free, payoff, start)?;
    Ok(p.solve(Method::Auto)?.start_value)
}

/// Linear system `(I - P_FF) x = P_FB g` in CSR form.
struct System {
    n: usize,
    free: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
    symmetric: bool,
}

impl System {
    fn assemble(p: &DirichletProblem, ok: &[bool]) -> System {
        let mut slot = vec![usize::MAX; p.nodes.len()];
        let mut free = Vec::new();
        for (i, node) in p.nodes.iter().enumerate() {
            if matches!(node, Node::Free) && ok[i] {
                slot[i] = free.len();
                free.push(i);
            }
        }
        let n = free.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![1.0; n];
        let mut rhs = vec![0.0; n];
        row_ptr.push(0);
        for (k, &i) in free.iter().enumerate() {
            for &(j, pij) in &p.trans[i] {
                match p.nodes[j] {
                    Node::Fixed(g) => rhs[k] += pij * g,
                    Node::Free if j == i => diag[k] -= pij,
                    // free but cannot reach the absorbing set: probability 0 there
                    Node::Free if slot[j] == usize::MAX => {}
                    Node::Free => {
                        cols.push(slot[j]);
                        vals.push(-pij);
                    }
                }
            }
            row_ptr.push(cols.len());
        }
        let mut sys = System {
            n,
            free,
            row_ptr,
            cols,
            vals,
            diag,
            rhs,
            symmetric: false,
        };
        sys.symmetric = sys.check_symmetric();
        sys
    }

    fn check_symmetric(&self) -> bool {
        let mut entries: FxHashMap<(usize, usize), f64> = FxHashMap::default();
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                *entries.entry((r, self.cols[k])).or_default() += self.vals[k];
            }
        }
        entries
            .iter()
            .all(|(&(r, c), &v)| entries.get(&(c, r)).is_some_and(|&w| (v - w).abs() <= 1e-15))
    }

    #[inline]
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = self.diag[r] * x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[r] = acc;
        }
    }

    fn residual_inf(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.apply(x, scratch);
        scratch
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn solve_iterative(&self) -> Result<(Vec<f64>, usize)> {
        if self.n == 0 {
            return Ok((Vec::new(), 0));
        }
        if self.symmetric {
            self.conjugate_gradient()
        } else {
            self.bicgstab()
        }
    }

    /// Jacobi-preconditioned conjugate gradients, restarted from the true
    /// residual whenever the recurrence stalls.
    fn conjugate_gradient(&self) -> Result<(Vec<f64>, usize)> {
        let n = self.n;
        let max_iter = 20 * n + 1000;
        let mut x = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        let mut total = 0;
        for _restart in 0..8 {
            // r = b - A x
            self.apply(&x, &mut scratch);
            let mut r: Vec<f64> = self.rhs.iter().zip(&scratch).map(|(b, ax)| b - ax).collect();
            let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(ri, di)| ri / di).collect();
            let mut p = z.clone();
            let mut rz: f64 = dot(&r, &z);
            let mut ap = vec![0.0; n];
            while total < max_iter {
                if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) < RESIDUAL_TOL * 0.1 || rz == 0.0 {
                    break;
                }
                self.apply(&p, &mut ap);
                let pap = dot(&p, &ap);
                if pap <= 0.0 {
                    break;
                }
                let alpha = rz / pap;
                for i in 0..n {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                }
                for i in 0..n {
                    z[i] = r[i] / self.diag[i];
                }
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for i in 0..n {
                    p[i] = z[i] + beta * p[i];
                }
                total += 1;
            }
            if self.residual_inf(&x, &mut scratch) < RESIDUAL_TOL {
                return Ok((x, total));
            }
            if total >= max_iter {
                break;
            }
        }
        Err(Error::Solver(format!(
            "conjugate gradients did not reach residual {RESIDUAL_TOL:e} in {total} iterations"
        )))
    }

    /// Jacobi-preconditioned BiCGSTAB for non-symmetric kernels.
    fn bicgstab(&self) -> Result<(Vec<f64>, usize)> {
        let n = self.n;
        let max_iter = 20 * n + 1000;
        let mut x = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        let mut total = 0;
        let precond = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = v[i] / self.diag[i];
            }
        };
        for _restart in 0..8 {
            self.apply(&x, &mut scratch);
            let mut r: Vec<f64> = self.rhs.iter().zip(&scratch).map(|(b, ax)| b - ax).collect();
            let r_hat = r.clone();
            let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
            let mut v = vec![0.0; n];
            let mut p = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut s = vec![0.0; n];
            let mut zz = vec![0.0; n];
            let mut t = vec![0.0; n];
            while total < max_iter {
                if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) < RESIDUAL_TOL * 0.1 {
                    break;
                }
                let rho_new = dot(&r_hat, &r);
                if rho_new == 0.0 || omega == 0.0 {
                    break;
                }
                let beta = (rho_new / rho) * (alpha / omega);
                rho = rho_new;
                for i in 0..n {
                    p[i] = r[i] + beta * (p[i] - omega * v[i]);
                }
                precond(&p, &mut y);
                self.apply(&y, &mut v);
                let denom = dot(&r_hat, &v);
                if denom == 0.0 {
                    break;
                }
                alpha = rho / denom;
                for i in 0..n {
                    s[i] = r[i] - alpha * v[i];
                }
                precond(&s, &mut zz);
                self.apply(&zz, &mut t);
                let tt = dot(&t, &t);
                omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
                for i in 0..n {
                    x[i] += alpha * y[i] + omega * zz[i];
                    r[i] = s[i] - omega * t[i];
                }
                total += 1;
            }
            if self.residual_inf(&x, &mut scratch) < RESIDUAL_TOL {
                return Ok((x, total));
            }
            if total >= max_iter {
                break;
            }
        }
        Err(Error::Solver(format!(
            "BiCGSTAB did not reach residual {RESIDUAL_TOL:e} in {total} iterations"
        )))
    }

    fn is_tridiagonal(&self) -> bool {
        (0..self.n).all(|r| {
            self.cols[self.row_ptr[r]..self.row_ptr[r + 1]]
                .iter()
                .all(|&c| c + 1 == r || c == r + 1)
        })
    }

    /// Thomas algorithm.
    fn solve_tridiagonal(&self) -> Result<Vec<f64>> {
        if !self.is_tridiagonal() {
            return Err(Error::Solver("system is not tridiagonal".into()));
        }
        let n = self.n;
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] + 1 == r {
                    lower[r] += self.vals[k];
                } else {
                    upper[r] += self.vals[k];
                }
            }
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for r in 0..n {
            let denom = self.diag[r] - if r > 0 { lower[r] * c[r - 1] } else { 0.0 };
            if denom.abs() < 1e-300 {
                return Err(Error::Solver("singular system".into()));
            }
            c[r] = upper[r] / denom;
            d[r] = (self.rhs[r] - if r > 0 { lower[r] * d[r - 1] } else { 0.0 }) / denom;
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            x[r] = d[r] - if r + 1 < n { c[r] * x[r + 1] } else { 0.0 };
        }
        Ok(x)
    }

    /// Gaussian elimination with partial pivoting on the dense matrix.
    fn solve_dense(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            a[r * n + r] = self.diag[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                a[r * n + self.cols[k]] += self.vals[k];
            }
        }
        dense_solve(&mut a, self.rhs.clone(), n)
    }
}

/// Solves `A x = b` in place (`a` is row-major `n x n`).
pub fn dense_solve(a: &mut [f64], mut b: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty");
        if a[pivot * n + col].abs() < 1e-300 {
            return Err(Error::Solver("singular system".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for k in col + 1..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{BallShape, Metric};

    fn interval(n: i32) -> Vec<Site> {
        (-n..=n).map(|x| Site::from_slice(&[x])).collect()
    }

    #[test]
    fn gamblers_ruin_small() {
        let n = 10;
        let free = interval(n);
        let p = DirichletProblem::on_lattice(
            1,
            &free[1..free.len() - 1],
            |z| match z.coord(0) {
                0 => Some(1.0),
                x if x.abs() == n => Some(0.0),
                _ => None,
            },
            Site::from_slice(&[3]),
        );
        // 0 is in the free list, so it must be excluded explicitly
        assert!(p.is_ok());
        let h = solve_hit_probability(
            1,
            &free,
            &[Site::ORIGIN],
            &[Site::from_slice(&[-n]), Site::from_slice(&[n])],
            Site::from_slice(&[3]),
        )
        .unwrap();
        assert!((h - 0.7).abs() < 1e-12);
    }

    #[test]
    fn gamblers_ruin_full_field_large() {
        for n in [100, 1000] {
            let free: Vec<Site> = (-n + 1..n).filter(|&x| x != 0).map(|x| Site::from_slice(&[x])).collect();
            let p = DirichletProblem::on_lattice(
                1,
                &free,
                |z| match z.coord(0) {
                    0 => Some(1.0),
                    x if x.abs() == n => Some(0.0),
                    _ => None,
                },
                Site::from_slice(&[1]),
            )
            .unwrap();
            let sol = p.solve(Method::Auto).unwrap();
            assert!(sol.residual < 1e-13);
            for (z, h) in p.labels().unwrap().iter().zip(&sol.values) {
                let exact = 1.0 - z.coord(0).abs() as f64 / n as f64;
                assert!((h - exact).abs() <= 1e-12, "n={n} x={} err={}", z.coord(0), h - exact);
            }
        }
    }

    #[test]
    fn boundary_conditions_at_start() {
        let free = interval(5);
        let kill = [Site::from_slice(&[-5]), Site::from_slice(&[5])];
        assert_eq!(solve_hit_probability(1, &free, &[Site::ORIGIN], &kill, Site::ORIGIN).unwrap(), 1.0);
        assert_eq!(solve_hit_probability(1, &free, &[Site::ORIGIN], &kill, kill[1]).unwrap(), 0.0);
    }

    #[test]
    fn overlapping_sets_rejected() {
        let free = interval(3);
        assert!(solve_hit_probability(1, &free, &[Site::ORIGIN], &[Site::ORIGIN], Site::ORIGIN).is_err());
    }

    #[test]
    fn disconnected_start_is_an_error() {
        // start on a free island with no route to absorption
        let nodes = vec![Node::Free, Node::Free, Node::Fixed(1.0)];
        let trans = vec![vec![(1, 1.0)], vec![(0, 1.0)], vec![]];
        let p = DirichletProblem::chain(nodes, trans, 0).unwrap();
        assert!(matches!(p.solve(Method::Auto), Err(Error::Disconnected)));
    }

    #[test]
    fn iterative_and_dense_agree_on_ball() {
        let free: Vec<Site> = BallShape::new(Metric::Graph, 4.0)
            .sites(2)
            .into_iter()
            .filter(|z| z.l1() < 5 && !z.is_origin())
            .collect();
        let p = DirichletProblem::on_lattice(
            2,
            &free,
            |z| {
                if z.is_origin() {
                    Some(1.0)
                } else if z.l1() == 5 {
                    Some(0.0)
                } else {
                    None
                }
            },
            Site::from_slice(&[1, 0]),
        )
        .unwrap();
        let a = p.solve(Method::Iterative).unwrap();
        let b = p.solve(Method::Dense).unwrap();
        assert!(a.residual < 1e-10 && b.residual < 1e-10);
        let diff = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn nonsymmetric_chain_uses_bicgstab() {
        // biased walk on {0..=20}: up 2/3, down 1/3, absorbed at 0 (payoff 1) and 20 (payoff 0)
        let n = 20;
        let mut nodes = vec![Node::Free; n + 1];
        nodes[0] = Node::Fixed(1.0);
        nodes[n] = Node::Fixed(0.0);
        let trans: Vec<Vec<(usize, f64)>> = (0..=n)
            .map(|k| {
                if k == 0 || k == n {
                    vec![]
                } else {
                    vec![(k + 1, 2.0 / 3.0), (k - 1, 1.0 / 3.0)]
                }
            })
            .collect();
        let p = DirichletProblem::chain(nodes, trans, 5).unwrap();
        let sol = p.solve(Method::Iterative).unwrap();
        let tri = p.solve(Method::Tridiagonal).unwrap();
        assert!((tri.start_value - sol.start_value).abs() < 1e-13);
        // closed form with r = 1/2
        let r: f64 = 0.5;
        let exact = (r.powi(5) - r.powi(20)) / (1.0 - r.powi(20));
        assert!((sol.start_value - exact).abs() < 1e-12, "{} vs {exact}", sol.start_value);
    }
}
