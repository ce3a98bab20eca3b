//! Reference implementations used only by tests. Each one is written from the
//! defining formula and shares no code with the library.
#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use seqreject::ClusterHierarchy;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, q: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((m, q), || StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, m: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(m, || StandardNormal.sample(rng))
}

/// `(1/(2m))‖y − Xβ‖² + λ‖β‖₁`
pub fn lasso_objective(x: ArrayView2<f64>, y: ArrayView1<f64>, beta: ArrayView1<f64>, lambda: f64) -> f64 {
    let r = &y - &x.dot(&beta);
    r.dot(&r) / (2.0 * x.nrows() as f64) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest violation of the Lasso optimality conditions.
pub fn lasso_kkt(x: ArrayView2<f64>, y: ArrayView1<f64>, beta: ArrayView1<f64>, lambda: f64) -> f64 {
    let r = &y - &x.dot(&beta);
    let g = x.t().dot(&r) / x.nrows() as f64;
    g.iter()
        .zip(beta.iter())
        .map(|(&gj, &bj)| if bj != 0.0 { (gj - lambda * bj.signum()).abs() } else { (gj.abs() - lambda).max(0.0) })
        .fold(0.0, f64::max)
}

/// The Lasso objective in Gram form: `XᵀX/m`, `Xᵀy/m` and `‖y‖²/(2m)`.
struct Quadratic {
    gram: Array2<f64>,
    xty: Array1<f64>,
    offset: f64,
    lambda: f64,
}

impl Quadratic {
    fn new(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Self {
        let m = x.nrows() as f64;
        Quadratic { gram: x.t().dot(&x) / m, xty: x.t().dot(&y) / m, offset: y.dot(&y) / (2.0 * m), lambda }
    }

    fn objective(&self, beta: &Array1<f64>) -> f64 {
        0.5 * beta.dot(&self.gram.dot(beta)) - self.xty.dot(beta)
            + self.offset
            + self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Largest eigenvalue of the Gram matrix by power iteration, inflated slightly.
    fn lipschitz(&self) -> f64 {
        let q = self.xty.len();
        let mut v = Array1::from_elem(q, 1.0 / (q as f64).sqrt());
        let mut est = 0.0;
        for _ in 0..500 {
            let w = self.gram.dot(&v);
            let norm = w.dot(&w).sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            est = norm;
            v = w / norm;
        }
        est * 1.001
    }

    fn prox_step(&self, at: &Array1<f64>, step: f64) -> Array1<f64> {
        let g = self.gram.dot(at) - &self.xty;
        Array1::from_shape_fn(at.len(), |j| soft(at[j] - step * g[j], step * self.lambda))
    }
}

fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// Plain proximal gradient descent for a fixed number of iterations.
pub fn ista(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, iterations: usize) -> Array1<f64> {
    let f = Quadratic::new(x, y, lambda);
    let step = 1.0 / f.lipschitz();
    let mut beta = Array1::zeros(x.ncols());
    for _ in 0..iterations {
        beta = f.prox_step(&beta, step);
    }
    beta
}

/// Accelerated proximal gradient with function-value restarts, run until the
/// iterates stop moving.
pub fn fista(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, max_iter: usize) -> Array1<f64> {
    let f = Quadratic::new(x, y, lambda);
    let step = 1.0 / f.lipschitz();
    let mut beta: Array1<f64> = Array1::zeros(x.ncols());
    let mut z = beta.clone();
    let mut t = 1.0f64;
    let mut f_old = f.objective(&beta);
    for _ in 0..max_iter {
        let next = f.prox_step(&z, step);
        let f_new = f.objective(&next);
        if f_new > f_old {
            t = 1.0;
            z = beta.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + &((&next - &beta) * ((t - 1.0) / t_next));
        let moved = (&next - &beta).iter().map(|d| d.abs()).fold(0.0, f64::max);
        beta = next;
        t = t_next;
        f_old = f_new;
        if moved < 1e-15 {
            break;
        }
    }
    beta
}

/// One agglomeration step: the two merged member sets and the height.
pub type Merge = (Vec<usize>, Vec<usize>, f64);

/// Complete linkage straight from the definition: at every step the
/// distance between two clusters is recomputed as the largest pairwise
/// distance between their members. Ties go to the pair with the
/// lexicographically smallest (smallest member, smallest member).
pub fn brute_complete_linkage(d: ArrayView2<f64>) -> Vec<Merge> {
    let mut clusters: Vec<Vec<usize>> = (0..d.nrows()).map(|j| vec![j]).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut dist = f64::NEG_INFINITY;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        dist = dist.max(d[[i, j]]);
                    }
                }
                let key = |(x, y): (usize, usize)| {
                    let (u, v) = (clusters[x][0], clusters[y][0]);
                    (u.min(v), u.max(v))
                };
                let better = match best {
                    None => true,
                    Some((ba, bb, bd)) => dist < bd || (dist == bd && key((a, b)) < key((ba, bb))),
                };
                if better {
                    best = Some((a, b, dist));
                }
            }
        }
        let (a, b, height) = best.unwrap();
        let right = clusters.remove(b);
        let left = clusters[a].clone();
        clusters[a].extend(&right);
        clusters[a].sort_unstable();
        let (first, second) = if left[0] < right[0] { (left, right) } else { (right, left) };
        merges.push((first, second, height));
    }
    merges
}

/// Merge sequence of a library hierarchy in node-creation order.
pub fn hierarchy_merges(h: &ClusterHierarchy) -> Vec<Merge> {
    let p = h.n_variables();
    h.nodes()[p..]
        .iter()
        .map(|node| {
            let mut sets: Vec<Vec<usize>> = node.children.iter().map(|&c| h.members(c).unwrap().to_vec()).collect();
            sets.sort();
            (sets[0].clone(), sets[1].clone(), node.height)
        })
        .collect()
}

/// Symmetric matrix with zero diagonal and entries uniform in (0, 2).
pub fn random_distance(rng: &mut ChaCha8Rng, p: usize) -> Array2<f64> {
    let mut d = Array2::zeros((p, p));
    for i in 0..p {
        for j in i + 1..p {
            let v: f64 = rng.random_range(0.0..2.0);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Composite Simpson rule with `2k` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + inner + f(b)) * h / 3.0
}

/// Kolmogorov–Smirnov distance of a sample from Uniform(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &u)| ((i as f64 + 1.0) / n - u).max(u - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Random binary tree over `p` leaves from uniformly chosen merges.
pub fn random_binary_tree(rng: &mut ChaCha8Rng, p: usize) -> ClusterHierarchy {
    let mut live: Vec<usize> = (0..p).collect();
    let mut merges = Vec::new();
    for k in 0..p - 1 {
        live.shuffle(rng);
        let a = live.pop().unwrap();
        let b = live.pop().unwrap();
        merges.push((a, b, k as f64));
        live.push(p + k);
    }
    ClusterHierarchy::from_merges(p, &merges).unwrap()
}

/// Random subset of `0..p`, each element kept with probability `prob`.
pub fn random_subset(rng: &mut ChaCha8Rng, p: usize, prob: f64) -> Vec<usize> {
    (0..p).filter(|_| rng.random_bool(prob)).collect()
}

/// Random ancestor-closed subset of `within` (itself ancestor closed): the
/// root, then each child of a kept node, is kept with probability `prob`.
pub fn random_closed_subset(rng: &mut ChaCha8Rng, h: &ClusterHierarchy, within: &[bool], prob: f64) -> Vec<bool> {
    let mut keep = vec![false; h.len()];
    let mut stack = vec![h.root()];
    while let Some(c) = stack.pop() {
        if within[c] && rng.random_bool(prob) {
            keep[c] = true;
            stack.extend(h.children(c).unwrap());
        }
    }
    keep
}

/// Every node meeting `active`: the sets that can be exactly the false nulls.
pub fn congruent_set(h: &ClusterHierarchy, active: &[usize]) -> Vec<bool> {
    (0..h.len()).map(|c| h.members(c).unwrap().iter().any(|j| active.contains(j))).collect()
}

pub fn ids(flags: &[bool]) -> Vec<usize> {
    (0..flags.len()).filter(|&i| flags[i]).collect()
}

fn strict_ancestors(h: &ClusterHierarchy, c: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = h.parent(c).unwrap();
    while let Some(a) = cur {
        out.push(a);
        cur = h.parent(a).unwrap();
    }
    out
}

fn descendants(h: &ClusterHierarchy, c: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = h.children(c).unwrap().to_vec();
    while let Some(d) = stack.pop() {
        out.push(d);
        stack.extend(h.children(d).unwrap());
    }
    out
}

/// `|Ŝ ∩ C|` by counting members.
pub fn screened_mass(h: &ClusterHierarchy, c: usize, s_hat: &[usize]) -> usize {
    h.members(c).unwrap().iter().filter(|j| s_hat.contains(j)).count()
}

/// A rejected node whose descendants are all rejected.
pub fn is_extinct(h: &ClusterHierarchy, c: usize, rejected: &[bool]) -> bool {
    rejected[c] && descendants(h, c).iter().all(|&d| rejected[d])
}

/// Hierarchical Bonferroni multiplier written from its case definition.
pub fn m_hier_bonferroni(h: &ClusterHierarchy, c: usize, rejected: &[bool], s_hat: &[usize]) -> f64 {
    if !strict_ancestors(h, c).iter().all(|&a| rejected[a]) {
        return f64::INFINITY;
    }
    let w = screened_mass(h, c, s_hat);
    if w == 0 {
        1.0
    } else {
        s_hat.len() as f64 / w as f64
    }
}

/// Inheritance share `n_D`: screened mass of the non-extinct children of `D`
/// over the screened mass of `D`.
pub fn inheritance_share(h: &ClusterHierarchy, d: usize, rejected: &[bool], s_hat: &[usize]) -> f64 {
    let total = screened_mass(h, d, s_hat);
    if total == 0 {
        return 1.0;
    }
    let alive: usize = h
        .children(d)
        .unwrap()
        .iter()
        .filter(|&&e| !is_extinct(h, e, rejected))
        .map(|&e| screened_mass(h, e, s_hat))
        .sum();
    alive as f64 / total as f64
}

/// Inheritance multiplier written from its definition.
pub fn m_inheritance(h: &ClusterHierarchy, c: usize, rejected: &[bool], s_hat: &[usize]) -> f64 {
    let base = m_hier_bonferroni(h, c, rejected, s_hat);
    if !base.is_finite() || screened_mass(h, c, s_hat) == 0 {
        return base;
    }
    let factor: f64 = strict_ancestors(h, c).iter().map(|&d| inheritance_share(h, d, rejected, s_hat)).product();
    if factor == 0.0 {
        f64::INFINITY
    } else {
        base * factor
    }
}

/// Binary-tree Shaffer factor.
pub fn shaffer_factor(h: &ClusterHierarchy, c: usize, rejected: &[bool], s_hat: &[usize]) -> f64 {
    let Some(parent) = h.parent(c).unwrap() else { return 1.0 };
    let sibling = h.children(parent).unwrap().iter().copied().find(|&s| s != c).unwrap();
    let wc = screened_mass(h, c, s_hat);
    if rejected[c] || !h.children(sibling).unwrap().is_empty() || rejected[sibling] || wc == 0 {
        return 1.0;
    }
    wc as f64 / (wc + screened_mass(h, sibling, s_hat)) as f64
}
